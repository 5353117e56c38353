#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvflow::mms::{build_space, Domain, EdgeSpec, MetricMeasureSpace};
use tvflow::relax::RelaxConfig;
use tvflow::{TimeGrid, VertexFunction};

pub fn s2() -> MetricMeasureSpace {
    build_space(&[("a".into(), 1.0), ("b".into(), 1.0)], &[EdgeSpec::new("a", "b", 1.0, 1.0)]).unwrap()
}

/// `a` free, `b` held at zero, `u₀ = (1, 0)`.
pub fn s2_dirichlet(t: f64, n: usize, eps: f64, tol: f64) -> RelaxConfig {
    let space = s2();
    let domain = Domain::from_ids(&space, &["a"], &["a", "b"]).unwrap();
    RelaxConfig::new(space, domain, TimeGrid::new(t, n).unwrap(), VertexFunction::new(vec![1.0, 0.0]), eps, tol).unwrap()
}

/// Six vertices on a cycle with one chord; the two ends of the cycle form the ring.
pub fn six_vertex() -> (MetricMeasureSpace, Domain, VertexFunction) {
    let ids = ["a", "b", "c", "d", "e", "f"];
    let mu = [1.0, 0.5, 2.0, 1.0, 1.5, 0.8];
    let vertices: Vec<(String, f64)> = ids.iter().zip(mu).map(|(i, m)| (i.to_string(), m)).collect();
    let edges = vec![
        EdgeSpec::new("a", "b", 1.0, 1.0),
        EdgeSpec::new("b", "c", 2.0, 0.5),
        EdgeSpec::new("c", "d", 0.5, 1.0),
        EdgeSpec::new("d", "e", 1.5, 1.0),
        EdgeSpec::new("e", "f", 1.0, 2.0),
        EdgeSpec::new("a", "f", 0.7, 1.5),
        EdgeSpec::new("b", "e", 0.3, 1.0),
    ];
    let space = build_space(&vertices, &edges).unwrap();
    let domain = Domain::from_ids(&space, &["b", "c", "d", "e"], &ids).unwrap();
    (space, domain, VertexFunction::new(vec![1.0, 0.2, -0.5, 0.8, 0.0, -0.3]))
}

pub fn six_vertex_config(t: f64, n: usize, eps: f64, tol: f64) -> RelaxConfig {
    let (space, domain, u0) = six_vertex();
    RelaxConfig::new(space, domain, TimeGrid::new(t, n).unwrap(), u0, eps, tol).unwrap()
}

/// Connected graph on `n` vertices: a random spanning tree plus a few chords.
pub fn random_graph(n: usize, rng: &mut impl Rng) -> MetricMeasureSpace {
    let ids: Vec<String> = (0..n).map(|k| format!("v{k}")).collect();
    let vertices: Vec<(String, f64)> = ids.iter().map(|id| (id.clone(), rng.gen_range(0.2..3.0))).collect();
    let mut pairs = std::collections::BTreeSet::new();
    for k in 1..n {
        let parent = rng.gen_range(0..k);
        pairs.insert((parent, k));
    }
    for _ in 0..rng.gen_range(0..=n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let edges: Vec<EdgeSpec> = pairs
        .into_iter()
        .map(|(a, b)| EdgeSpec::new(&ids[a], &ids[b], rng.gen_range(0.1..3.0), rng.gen_range(0.2..3.0)))
        .collect();
    build_space(&vertices, &edges).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense tableau simplex for `max cᵀx` subject to `Ax ≤ b`, `x ≥ 0`, with
/// `b ≥ 0` so that the origin is a feasible start. Bland's rule avoids cycling.
pub fn simplex_max(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    let (m, n) = (a.len(), c.len());
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        assert!(b[i] >= 0.0);
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        let Some(enter) = (0..n + m).find(|&j| t[m][j] < -1e-14) else { break };
        let mut leave = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] > 1e-14 {
                let ratio = t[i][width - 1] / t[i][enter];
                if ratio < best - 1e-15 || (ratio <= best + 1e-15 && leave.map_or(false, |l: usize| basis[i] < basis[l])) {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let r = leave.expect("objective bounded");
        let pivot = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= pivot;
        }
        for i in 0..=m {
            if i != r && t[i][enter] != 0.0 {
                let f = t[i][enter];
                for j in 0..width {
                    t[i][j] -= f * t[r][j];
                }
            }
        }
        basis[r] = enter;
    }
    t[m][width - 1]
}
