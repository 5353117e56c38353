use serde::Serialize;

use crate::bv::VertexFunction;
use crate::chain::{ChainProblem, SolveOptions};
use crate::error::{Error, Result};
use crate::mms::{Domain, MetricMeasureSpace};
use crate::relax::{edge_terms, slots};
use crate::timefn::{SpaceTimeFunction, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mm,
    Analytic,
    Brute,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Mm => "mm",
            Method::Analytic => "analytic",
            Method::Brute => "brute",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub values: SpaceTimeFunction,
    pub method: Method,
}

impl Trajectory {
    pub fn grid(&self) -> TimeGrid {
        self.values.grid()
    }
}

/// Default duality gap target of a single implicit Euler step.
pub const ROF_TOL: f64 = 1e-11;
const ROF_MAX_ITER: usize = 200_000;

/// One implicit Euler step: the minimizer of
/// `TV(w; Ω*) + (1/(2Δt)) ‖w − u_prev‖²_{L²(μ)}` over `w` equal to `u_prev` off Ω.
pub fn rof_step(space: &MetricMeasureSpace, domain: &Domain, u_prev: &VertexFunction, dt: f64) -> Result<VertexFunction> {
    rof_step_with(space, domain, u_prev, dt, ROF_TOL)
}

pub fn rof_step_with(
    space: &MetricMeasureSpace,
    domain: &Domain,
    u_prev: &VertexFunction,
    dt: f64,
    tol: f64,
) -> Result<VertexFunction> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::NonpositiveParameter(format!("dt = {dt}")));
    }
    u_prev.check_len(space.len())?;
    let free = domain.omega();
    let slot = slots(space.len(), free);
    let problem = ChainProblem {
        slices: 1,
        measure: free.iter().map(|&x| space.mu(x)).collect(),
        back: vec![0.0],
        forward: vec![0.0],
        fidelity: vec![1.0 / dt],
        target: free.iter().map(|&x| u_prev[x]).collect(),
        initial: vec![0.0; free.len()],
        beta: vec![1.0],
        log_scale: vec![0.0],
        edges: edge_terms(space, domain, &slot, u_prev),
    };
    let sol = problem.solve(&SolveOptions { tol, max_iter: ROF_MAX_ITER, seed: None });
    if !sol.converged {
        return Err(Error::MaxIterationsExceeded {
            iterations: sol.iterations,
            relative_gap: sol.gap / (1.0 + sol.value.abs()),
        });
    }
    let mut w = u_prev.clone();
    for (i, &x) in free.iter().enumerate() {
        w[x] = sol.v[i];
    }
    Ok(w)
}

/// Implicit Euler iterates on the grid, starting from `u₀`.
pub fn minimizing_movements(
    space: &MetricMeasureSpace,
    domain: &Domain,
    u0: &VertexFunction,
    grid: TimeGrid,
) -> Result<Trajectory> {
    minimizing_movements_with(space, domain, u0, grid, ROF_TOL)
}

pub fn minimizing_movements_with(
    space: &MetricMeasureSpace,
    domain: &Domain,
    u0: &VertexFunction,
    grid: TimeGrid,
    tol: f64,
) -> Result<Trajectory> {
    u0.check_len(space.len())?;
    let mut slices = Vec::with_capacity(grid.steps() + 1);
    slices.push(u0.clone());
    for k in 1..=grid.steps() {
        let next = rof_step_with(space, domain, &slices[k - 1], grid.dt(), tol)?;
        slices.push(next);
    }
    Ok(Trajectory { values: SpaceTimeFunction::new(grid, slices)?, method: Method::Mm })
}

fn check_two_point(mu_a: f64, mu_b: f64, w: f64) -> Result<()> {
    for (name, v) in [("mu_a", mu_a), ("mu_b", mu_b), ("w", w)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonpositiveParameter(format!("{name} = {v}")));
        }
    }
    Ok(())
}

/// Free flow on a single edge with data `α ≥ β`: both values move towards
/// each other at speeds `w/μ` until they meet at the weighted mean.
pub fn two_point_analytic(mu_a: f64, mu_b: f64, w: f64, u0: (f64, f64), t: f64) -> Result<(f64, f64)> {
    check_two_point(mu_a, mu_b, w)?;
    let (alpha, beta) = u0;
    if alpha < beta {
        return Err(Error::InvalidOrder(format!("expected u0(a) >= u0(b), got ({alpha}, {beta})")));
    }
    let meet = (alpha - beta) / (w * (1.0 / mu_a + 1.0 / mu_b));
    if t >= meet {
        let mean = (mu_a * alpha + mu_b * beta) / (mu_a + mu_b);
        Ok((mean, mean))
    } else {
        Ok((alpha - w / mu_a * t, beta + w / mu_b * t))
    }
}

/// Flow at a single free vertex joined by one edge to a vertex held at `β`.
pub fn dirichlet_two_point(mu_a: f64, w: f64, alpha: f64, beta: f64, t: f64) -> Result<f64> {
    check_two_point(mu_a, 1.0, w)?;
    let speed = w / mu_a;
    Ok(if alpha >= beta { (alpha - speed * t).max(beta) } else { (alpha + speed * t).min(beta) })
}

/// Analytic trajectory of the free two-point flow on a grid.
pub fn two_point_trajectory(mu_a: f64, mu_b: f64, w: f64, u0: (f64, f64), grid: TimeGrid) -> Result<Trajectory> {
    let nodes: Vec<(f64, f64)> = grid.nodes().map(|t| two_point_analytic(mu_a, mu_b, w, u0, t)).collect::<Result<_>>()?;
    let mut values = SpaceTimeFunction::from_fn(grid, 2, |_, _| 0.0);
    for (k, (a, b)) in nodes.into_iter().enumerate() {
        values.slice_mut(k)[0] = a;
        values.slice_mut(k)[1] = b;
    }
    Ok(Trajectory { values, method: Method::Analytic })
}

/// Exhaustive grid search over a box of at most four variables, refined twice
/// around the incumbent. The first pass uses cells no finer than `resolution`
/// when the point budget allows.
pub fn brute_force_min(
    objective: impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    resolution: f64,
) -> Result<(Vec<f64>, f64)> {
    let d = bounds.len();
    if d > 4 {
        return Err(Error::DimensionTooLarge(d));
    }
    if d == 0 {
        return Ok((Vec::new(), objective(&[])));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::NonpositiveParameter(format!("resolution = {resolution}")));
    }
    const BUDGET: f64 = 1e6;
    let per_dim = BUDGET.powf(1.0 / d as f64).floor() as usize;
    let mut lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let mut hi: Vec<f64> = bounds.iter().map(|b| b.1).collect();
    for (l, h) in lo.iter().zip(&hi) {
        if !(h > l) {
            return Err(Error::InvalidParameter(format!("empty search interval [{l}, {h}]")));
        }
    }
    let mut best = (Vec::new(), f64::INFINITY);
    for _pass in 0..3 {
        let counts: Vec<usize> = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| (((h - l) / resolution).ceil() as usize + 1).clamp(2, per_dim.max(2)))
            .collect();
        let steps: Vec<f64> = (0..d).map(|i| (hi[i] - lo[i]) / (counts[i] - 1) as f64).collect();
        let total: usize = counts.iter().product();
        let mut point = vec![0.0; d];
        for flat in 0..total {
            let mut rem = flat;
            for i in 0..d {
                point[i] = lo[i] + (rem % counts[i]) as f64 * steps[i];
                rem /= counts[i];
            }
            let f = objective(&point);
            if f < best.1 {
                best = (point.clone(), f);
            }
        }
        for i in 0..d {
            let c = best.0[i];
            lo[i] = (c - 2.0 * steps[i]).max(bounds[i].0);
            hi[i] = (c + 2.0 * steps[i]).min(bounds[i].1);
        }
    }
    Ok(best)
}
