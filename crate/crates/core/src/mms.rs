use std::collections::HashMap;

use petgraph::algo::{connected_components, dijkstra};
use petgraph::graph::{NodeIndex, UnGraph};

use crate::bv::VertexFunction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub u: String,
    pub v: String,
    pub weight: f64,
    pub length: f64,
}

impl EdgeSpec {
    pub fn new(u: &str, v: &str, weight: f64, length: f64) -> Self {
        EdgeSpec { u: u.to_string(), v: v.to_string(), weight, length }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
    pub length: f64,
}

/// Finite connected weighted graph carrying a vertex measure and the
/// shortest-path metric over edge lengths.
#[derive(Debug, Clone)]
pub struct MetricMeasureSpace {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    measure: Vec<f64>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    dist: Vec<f64>,
}

fn check_positive(what: impl FnOnce() -> String, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::NonpositiveParameter(format!("{} = {x}", what())))
    }
}

pub fn build_space(vertex_measures: &[(String, f64)], edge_list: &[EdgeSpec]) -> Result<MetricMeasureSpace> {
    if vertex_measures.is_empty() {
        return Err(Error::InvalidParameter("vertex list is empty".into()));
    }
    let mut index = HashMap::new();
    let mut ids = Vec::with_capacity(vertex_measures.len());
    let mut measure = Vec::with_capacity(vertex_measures.len());
    for (id, mu) in vertex_measures {
        check_positive(|| format!("mu({id})"), *mu)?;
        if index.insert(id.clone(), ids.len()).is_some() {
            return Err(Error::InvalidParameter(format!("duplicate vertex id `{id}`")));
        }
        ids.push(id.clone());
        measure.push(*mu);
    }

    let n = ids.len();
    let mut edges = Vec::with_capacity(edge_list.len());
    let mut adjacency = vec![Vec::new(); n];
    for spec in edge_list {
        let a = *index.get(&spec.u).ok_or_else(|| Error::UnknownVertex(spec.u.clone()))?;
        let b = *index.get(&spec.v).ok_or_else(|| Error::UnknownVertex(spec.v.clone()))?;
        if a == b {
            return Err(Error::InvalidParameter(format!("self-loop at `{}`", spec.u)));
        }
        if adjacency[a].iter().any(|&(y, _)| y == b) {
            return Err(Error::InvalidParameter(format!("duplicate edge {}-{}", spec.u, spec.v)));
        }
        check_positive(|| format!("w({},{})", spec.u, spec.v), spec.weight)?;
        check_positive(|| format!("len({},{})", spec.u, spec.v), spec.length)?;
        let e = edges.len();
        adjacency[a].push((b, e));
        adjacency[b].push((a, e));
        edges.push(Edge { a, b, weight: spec.weight, length: spec.length });
    }

    let mut graph = UnGraph::<(), f64>::with_capacity(n, edges.len());
    for _ in 0..n {
        graph.add_node(());
    }
    for e in &edges {
        graph.add_edge(NodeIndex::new(e.a), NodeIndex::new(e.b), e.length);
    }
    let components = connected_components(&graph);
    if components != 1 {
        return Err(Error::DisconnectedGraph { components });
    }

    let mut dist = vec![f64::INFINITY; n * n];
    for x in 0..n {
        for (node, d) in dijkstra(&graph, NodeIndex::new(x), None, |e| *e.weight()) {
            dist[x * n + node.index()] = d;
        }
    }
    // Path sums can differ in the last bit depending on direction.
    for x in 0..n {
        for y in x + 1..n {
            let d = dist[x * n + y].min(dist[y * n + x]);
            dist[x * n + y] = d;
            dist[y * n + x] = d;
        }
    }

    Ok(MetricMeasureSpace { ids, index, measure, edges, adjacency, dist })
}

impl MetricMeasureSpace {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, x: usize) -> &str {
        &self.ids[x]
    }

    pub fn vertex(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn mu(&self, x: usize) -> f64 {
        self.measure[x]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `x` as `(neighbor, edge index)` pairs.
    pub fn neighbors(&self, x: usize) -> &[(usize, usize)] {
        &self.adjacency[x]
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.len() + y]
    }

    pub fn measure_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.measure[x]).sum()
    }

    fn check_vertex(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownVertex(format!("#{x}")))
        }
    }
}

/// Nested vertex sets Ω ⊆ Ω* with the boundary ring Ω* \ Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    in_omega: Vec<bool>,
    in_star: Vec<bool>,
    omega: Vec<usize>,
    omega_star: Vec<usize>,
    ring: Vec<usize>,
}

impl Domain {
    pub fn new(space: &MetricMeasureSpace, omega: &[usize], omega_star: &[usize]) -> Result<Self> {
        let n = space.len();
        let mut in_omega = vec![false; n];
        let mut in_star = vec![false; n];
        for &x in omega_star {
            space.check_vertex(x)?;
            in_star[x] = true;
        }
        for &x in omega {
            space.check_vertex(x)?;
            if !in_star[x] {
                return Err(Error::validation(
                    "domain nesting",
                    format!("vertex `{}` is in omega but not in omega_star", space.id(x)),
                ));
            }
            in_omega[x] = true;
        }
        if !in_star.iter().any(|&b| b) {
            return Err(Error::InvalidParameter("omega_star is empty".into()));
        }
        for x in (0..n).filter(|&x| in_omega[x]) {
            for &(y, _) in space.neighbors(x) {
                if !in_star[y] {
                    return Err(Error::validation(
                        "domain ring",
                        format!(
                            "edge {}-{} leaves omega_star from omega",
                            space.id(x),
                            space.id(y)
                        ),
                    ));
                }
            }
        }
        let omega = (0..n).filter(|&x| in_omega[x]).collect();
        let omega_star = (0..n).filter(|&x| in_star[x]).collect();
        let ring = (0..n).filter(|&x| in_star[x] && !in_omega[x]).collect();
        Ok(Domain { in_omega, in_star, omega, omega_star, ring })
    }

    pub fn from_ids(space: &MetricMeasureSpace, omega: &[&str], omega_star: &[&str]) -> Result<Self> {
        let o: Vec<usize> = omega.iter().map(|id| space.vertex(id)).collect::<Result<_>>()?;
        let s: Vec<usize> = omega_star.iter().map(|id| space.vertex(id)).collect::<Result<_>>()?;
        Domain::new(space, &o, &s)
    }

    /// Ω = Ω* = V: no lateral boundary.
    pub fn whole(space: &MetricMeasureSpace) -> Self {
        let all: Vec<usize> = (0..space.len()).collect();
        Domain::new(space, &all, &all).expect("whole vertex set is a valid domain")
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn omega_star(&self) -> &[usize] {
        &self.omega_star
    }

    pub fn ring(&self) -> &[usize] {
        &self.ring
    }

    pub fn in_omega(&self, x: usize) -> bool {
        self.in_omega[x]
    }

    pub fn in_omega_star(&self, x: usize) -> bool {
        self.in_star[x]
    }

    pub fn in_ring(&self, x: usize) -> bool {
        self.in_star[x] && !self.in_omega[x]
    }

    pub fn star_mask(&self) -> &[bool] {
        &self.in_star
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    pub members: Vec<usize>,
}

pub fn ball(space: &MetricMeasureSpace, x: usize, r: f64) -> Result<Ball> {
    space.check_vertex(x)?;
    check_positive(|| "radius".into(), r)?;
    Ok(open_ball(space, x, r))
}

fn open_ball(space: &MetricMeasureSpace, x: usize, r: f64) -> Ball {
    let members = (0..space.len()).filter(|&y| space.distance(x, y) < r).collect();
    Ball { center: x, radius: r, members }
}

/// Sorted distinct positive values of `d(x, ·) / s` for each scale `s`.
fn breakpoints(space: &MetricMeasureSpace, x: usize, scales: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = (0..space.len())
        .map(|y| space.distance(x, y))
        .filter(|&d| d > 0.0)
        .flat_map(|d| scales.iter().map(move |s| d / s))
        .collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Sample radii hitting every constancy interval of `r ↦ B_r(x)` for the
/// given breakpoints: each breakpoint, each midpoint, and one radius past the end.
fn sample_radii(bp: &[f64]) -> Vec<f64> {
    let mut r = Vec::with_capacity(2 * bp.len() + 1);
    let mut prev = 0.0;
    for &b in bp {
        r.push(0.5 * (prev + b));
        r.push(b);
        prev = b;
    }
    r.push(if prev > 0.0 { 2.0 * prev } else { 1.0 });
    r
}

pub fn doubling_constant(space: &MetricMeasureSpace) -> f64 {
    let mut best: f64 = 1.0;
    for x in 0..space.len() {
        for r in sample_radii(&breakpoints(space, x, &[1.0, 2.0])) {
            let inner = space.measure_of(&open_ball(space, x, r).members);
            let outer = space.measure_of(&open_ball(space, x, 2.0 * r).members);
            best = best.max(outer / inner);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoincareRatio {
    Finite(f64),
    Infinite,
}

impl PoincareRatio {
    pub fn value(self) -> f64 {
        match self {
            PoincareRatio::Finite(v) => v,
            PoincareRatio::Infinite => f64::INFINITY,
        }
    }

    fn max(self, other: PoincareRatio) -> PoincareRatio {
        match (self, other) {
            (PoincareRatio::Finite(a), PoincareRatio::Finite(b)) => PoincareRatio::Finite(a.max(b)),
            _ => PoincareRatio::Infinite,
        }
    }
}

/// Pointwise slope `g(x) = max_{y ~ x} |u(x) − u(y)| / ℓ_xy`.
pub fn pointwise_slope(space: &MetricMeasureSpace, u: &VertexFunction) -> Vec<f64> {
    (0..space.len())
        .map(|x| {
            space
                .neighbors(x)
                .iter()
                .map(|&(y, e)| (u[x] - u[y]).abs() / space.edges()[e].length)
                .fold(0.0, f64::max)
        })
        .collect()
}

fn mean_oscillation(space: &MetricMeasureSpace, u: &VertexFunction, members: &[usize]) -> f64 {
    let m = space.measure_of(members);
    let avg = members.iter().map(|&y| space.mu(y) * u[y]).sum::<f64>() / m;
    members.iter().map(|&y| space.mu(y) * (u[y] - avg).abs()).sum::<f64>() / m
}

fn mean_of(space: &MetricMeasureSpace, g: &[f64], members: &[usize]) -> f64 {
    members.iter().map(|&y| space.mu(y) * g[y]).sum::<f64>() / space.measure_of(members)
}

fn ratio(num: f64, den: f64) -> PoincareRatio {
    if den > 0.0 {
        PoincareRatio::Finite(num / den)
    } else if num == 0.0 {
        PoincareRatio::Finite(0.0)
    } else {
        PoincareRatio::Infinite
    }
}

fn check_dilation(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("dilation must be >= 1, got {tau}")))
    }
}

/// Poincaré quotient on the single ball `B_ρ(x₀)` with dilation `τ`.
pub fn poincare_ratio_at(
    space: &MetricMeasureSpace,
    u: &VertexFunction,
    x0: usize,
    rho: f64,
    tau: f64,
) -> Result<PoincareRatio> {
    check_dilation(tau)?;
    u.check_len(space.len())?;
    let inner = ball(space, x0, rho)?;
    let outer = open_ball(space, x0, tau * rho);
    let g = pointwise_slope(space, u);
    Ok(ratio(
        mean_oscillation(space, u, &inner.members),
        rho * mean_of(space, &g, &outer.members),
    ))
}

/// Least constant in the weak (1,1)-Poincaré inequality for this `u`:
/// the supremum over all centers and radii.
///
/// Both balls are constant for ρ in each interval `(b_j, b_{j+1}]` between
/// consecutive breakpoints, where the quotient is `C_j / ρ`; the supremum
/// on that interval is the left limit `C_j / b_j`.
pub fn poincare_ratio(space: &MetricMeasureSpace, u: &VertexFunction, tau: f64) -> Result<PoincareRatio> {
    check_dilation(tau)?;
    u.check_len(space.len())?;
    let g = pointwise_slope(space, u);
    let mut best = PoincareRatio::Finite(0.0);
    for x0 in 0..space.len() {
        let bp = breakpoints(space, x0, &[1.0, tau]);
        for (j, &left) in bp.iter().enumerate() {
            let probe = match bp.get(j + 1) {
                Some(&right) => right,
                None => 2.0 * left,
            };
            let inner = open_ball(space, x0, probe);
            let outer = open_ball(space, x0, tau * probe);
            let q = ratio(mean_oscillation(space, u, &inner.members), left * mean_of(space, &g, &outer.members));
            best = best.max(q);
        }
    }
    Ok(best)
}
