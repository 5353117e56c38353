//! Accelerated projected gradient on the dual of a time chain of weighted
//! graph TV problems coupled by a quadratic in time.
//!
//! Every slice `j` carries the row-scaled optimality condition
//!
//! ```text
//! (A_j + C_j + λ_j) v_j − A_j v_{j−1} − C_j v_{j+1}
//!     = λ_j f_j − (β_j / μ_x) (Bᵀ w p_j)_x
//! ```
//!
//! with `v_{−1}` the fixed initial slice and `C_{last} = 0`. The true
//! objective is `Σ_j s_j [ (A_j/2) Σ μ (v_j − v_{j−1})² + (λ_j/2) Σ μ (v_j − f_j)²
//! + β_j Σ_e w |z_je| ]` with `s_j = exp(log_scale_j)`. For fixed `p` the
//! primal minimizer is a tridiagonal solve per vertex; the dual step uses the
//! metric `s_j β_j w_e`, in which the gradient is the edge residual `z`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Tail {
    Free(usize),
    Fixed(f64),
}

/// `z = v(head) − v(tail)` on one slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EdgeTerm {
    pub head: usize,
    pub tail: Tail,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ChainProblem {
    pub slices: usize,
    pub measure: Vec<f64>,
    pub back: Vec<f64>,
    pub forward: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// Fidelity targets, `slices × free` row-major; empty when every `λ_j` vanishes.
    pub target: Vec<f64>,
    /// Value of the slice before the first one, per free vertex.
    pub initial: Vec<f64>,
    pub beta: Vec<f64>,
    pub log_scale: Vec<f64>,
    pub edges: Vec<EdgeTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub(crate) struct ChainSolution {
    /// Primal slices, `slices × free` row-major.
    pub v: Vec<f64>,
    pub value: f64,
    pub gap: f64,
    pub scaled_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Factor {
    denom: Vec<f64>,
    upper: Vec<f64>,
}

const CHECK_EVERY: usize = 10;

impl ChainProblem {
    fn free(&self) -> usize {
        self.measure.len()
    }

    fn diag(&self, j: usize) -> f64 {
        self.back[j] + self.forward[j] + self.fidelity[j]
    }

    fn factor(&self) -> Factor {
        let k = self.slices;
        let mut denom = vec![0.0; k];
        let mut upper = vec![0.0; k];
        for j in 0..k {
            let lower = if j > 0 { -self.back[j] } else { 0.0 };
            let d = self.diag(j) - if j > 0 { lower * upper[j - 1] } else { 0.0 };
            denom[j] = d;
            upper[j] = -self.forward[j] / d;
        }
        Factor { denom, upper }
    }

    /// `(Bᵀ w p_j)` per slice and free vertex, accumulated into `out`.
    fn adjoint(&self, p: &[f64], out: &mut [f64]) {
        let (n, m) = (self.free(), self.edges.len());
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..self.slices {
            let row = &mut out[j * n..(j + 1) * n];
            for (e, term) in self.edges.iter().enumerate() {
                let q = term.weight * p[j * m + e];
                row[term.head] += q;
                if let Tail::Free(t) = term.tail {
                    row[t] -= q;
                }
            }
        }
    }

    /// Primal minimizer of the Lagrangian at dual point `p`; with `homogeneous`
    /// the data terms are dropped, leaving the linear part of the map.
    fn recover(&self, fac: &Factor, p: &[f64], homogeneous: bool, scratch: &mut [f64], v: &mut [f64]) {
        let (n, k) = (self.free(), self.slices);
        self.adjoint(p, scratch);
        for j in 0..k {
            for x in 0..n {
                let mut r = -self.beta[j] / self.measure[x] * scratch[j * n + x];
                if !homogeneous {
                    if self.fidelity[j] != 0.0 {
                        r += self.fidelity[j] * self.target[j * n + x];
                    }
                    if j == 0 {
                        r += self.back[0] * self.initial[x];
                    }
                }
                v[j * n + x] = r;
            }
        }
        for x in 0..n {
            let mut prev = 0.0;
            for j in 0..k {
                let lower = if j > 0 { -self.back[j] } else { 0.0 };
                let d = (v[j * n + x] - lower * prev) / fac.denom[j];
                v[j * n + x] = d;
                prev = d;
            }
            for j in (0..k.saturating_sub(1)).rev() {
                v[j * n + x] -= fac.upper[j] * v[(j + 1) * n + x];
            }
        }
    }

    fn residual(&self, v: &[f64], homogeneous: bool, z: &mut [f64]) {
        let (n, m) = (self.free(), self.edges.len());
        for j in 0..self.slices {
            let row = &v[j * n..(j + 1) * n];
            for (e, term) in self.edges.iter().enumerate() {
                let tail = match term.tail {
                    Tail::Free(t) => row[t],
                    Tail::Fixed(c) if !homogeneous => c,
                    Tail::Fixed(_) => 0.0,
                };
                z[j * m + e] = row[term.head] - tail;
            }
        }
    }

    fn operator_norm(&self, fac: &Factor) -> f64 {
        let (n, m, k) = (self.free(), self.edges.len(), self.slices);
        let mut q: Vec<f64> = (0..k * m).map(|i| 1.0 + 0.5 * ((i * 7919 % 101) as f64 / 101.0)).collect();
        let mut scratch = vec![0.0; k * n];
        let mut v = vec![0.0; k * n];
        let mut z = vec![0.0; k * m];
        let norm = |a: &[f64]| a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut estimate: f64 = 0.0;
        let mut qn = norm(&q);
        for it in 0..300 {
            self.recover(fac, &q, true, &mut scratch, &mut v);
            self.residual(&v, true, &mut z);
            // The map is q ↦ −z; flip the sign to keep the iteration positive.
            let zn = norm(&z);
            if zn == 0.0 || qn == 0.0 {
                break;
            }
            let ratio = zn / qn;
            if it >= 200 {
                estimate = estimate.max(ratio);
            } else {
                estimate = ratio;
            }
            for (qi, zi) in q.iter_mut().zip(&z) {
                *qi = -zi / zn;
            }
            qn = 1.0;
        }
        estimate
    }

    fn gaps(&self, v: &[f64], p: &[f64], z: &[f64]) -> (f64, f64, f64, f64) {
        let (n, m) = (self.free(), self.edges.len());
        let (mut value, mut gap, mut svalue, mut sgap) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..self.slices {
            let s = self.log_scale[j].exp();
            let mut tv = 0.0;
            let mut g = 0.0;
            for e in 0..m {
                let (zi, pi) = (z[j * m + e], p[j * m + e]);
                let w = self.edges[e].weight;
                tv += w * zi.abs();
                g += w * (zi.abs() - pi * zi);
            }
            let mut kin = 0.0;
            for x in 0..n {
                let prev = if j == 0 { self.initial[x] } else { v[(j - 1) * n + x] };
                let d = v[j * n + x] - prev;
                kin += 0.5 * self.back[j] * self.measure[x] * d * d;
                if self.fidelity[j] != 0.0 {
                    let f = v[j * n + x] - self.target[j * n + x];
                    kin += 0.5 * self.fidelity[j] * self.measure[x] * f * f;
                }
            }
            let slice_value = kin + self.beta[j] * tv;
            value += s * slice_value;
            gap += s * self.beta[j] * g;
            svalue += slice_value;
            sgap += self.beta[j] * g;
        }
        (value, gap, svalue, sgap)
    }

    pub fn solve(&self, opts: &SolveOptions) -> ChainSolution {
        let (n, m, k) = (self.free(), self.edges.len(), self.slices);
        let fac = self.factor();
        let mut p = vec![0.0; k * m];
        if let Some(seed) = opts.seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            p.iter_mut().for_each(|q| *q = rng.gen_range(-1.0..=1.0));
        }
        let mut scratch = vec![0.0; k * n];
        let mut v = vec![0.0; k * n];
        let mut z = vec![0.0; k * m];

        let finish = |p: Vec<f64>, iterations: usize, converged_hint: Option<bool>| -> ChainSolution {
            let mut scratch = vec![0.0; k * n];
            let mut v = vec![0.0; k * n];
            let mut z = vec![0.0; k * m];
            self.recover(&fac, &p, false, &mut scratch, &mut v);
            self.residual(&v, false, &mut z);
            let (value, gap, scaled_value, scaled_gap) = self.gaps(&v, &p, &z);
            let converged = converged_hint.unwrap_or_else(|| self.accept(value, gap, scaled_value, scaled_gap, opts.tol));
            ChainSolution { v, value, gap, scaled_gap, iterations, converged }
        };

        if m == 0 || k == 0 {
            return finish(p, 0, None);
        }

        let mut lip = 1.1 * self.operator_norm(&fac);
        if !(lip > 0.0 && lip.is_finite()) {
            lip = 1.0;
        }
        let metric: Vec<f64> = (0..k * m).map(|i| self.beta[i / m] * self.edges[i % m].weight).collect();

        let mut y = p.clone();
        let mut p_next = vec![0.0; k * m];
        let mut theta: f64 = 1.0;
        let mut best_sgap = f64::INFINITY;
        let mut best_p = p.clone();

        for it in 1..=opts.max_iter {
            self.recover(&fac, &y, false, &mut scratch, &mut v);
            self.residual(&v, false, &mut z);
            for i in 0..k * m {
                p_next[i] = (y[i] + z[i] / lip).clamp(-1.0, 1.0);
            }
            let restart: f64 = (0..k * m).map(|i| metric[i] * (y[i] - p_next[i]) * (p_next[i] - p[i])).sum();
            if restart > 0.0 {
                theta = 1.0;
                y.copy_from_slice(&p_next);
            } else {
                let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
                let mom = (theta - 1.0) / theta_next;
                for i in 0..k * m {
                    y[i] = p_next[i] + mom * (p_next[i] - p[i]);
                }
                theta = theta_next;
            }
            std::mem::swap(&mut p, &mut p_next);

            if it % CHECK_EVERY == 0 || it == opts.max_iter {
                self.recover(&fac, &p, false, &mut scratch, &mut v);
                self.residual(&v, false, &mut z);
                let (value, gap, svalue, sgap) = self.gaps(&v, &p, &z);
                if self.accept(value, gap, svalue, sgap, opts.tol) {
                    return finish(p, it, Some(true));
                }
                if sgap < best_sgap {
                    best_sgap = sgap;
                    best_p.copy_from_slice(&p);
                } else if sgap > 1e3 * best_sgap {
                    lip *= 2.0;
                    theta = 1.0;
                    p.copy_from_slice(&best_p);
                    y.copy_from_slice(&best_p);
                }
            }
        }
        finish(p, opts.max_iter, None)
    }

    fn accept(&self, value: f64, gap: f64, svalue: f64, sgap: f64, tol: f64) -> bool {
        gap <= tol * (1.0 + value.abs()) && sgap <= tol * (1.0 + svalue.abs())
    }
}
