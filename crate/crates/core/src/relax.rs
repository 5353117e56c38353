use serde::Serialize;

use crate::bv::{edges_inside, l1_norm, l2_norm_sq, tv_masked, VertexFunction};
use crate::chain::{ChainProblem, EdgeTerm, SolveOptions, Tail};
use crate::error::{Error, Result};
use crate::mms::{Domain, MetricMeasureSpace};
use crate::timefn::{dt_norm_sq, k_norm, l1_norm_st, l2_norm_sq_st, mollifier_weights, tv_series, SpaceTimeFunction, TimeGrid};
use crate::varsol::{Certificate, Check, Slack};

#[derive(Debug, Clone)]
pub struct RelaxConfig {
    pub space: MetricMeasureSpace,
    pub domain: Domain,
    pub grid: TimeGrid,
    pub u0: VertexFunction,
    pub epsilon: f64,
    pub tol: f64,
}

impl RelaxConfig {
    pub fn new(
        space: MetricMeasureSpace,
        domain: Domain,
        grid: TimeGrid,
        u0: VertexFunction,
        epsilon: f64,
        tol: f64,
    ) -> Result<Self> {
        u0.check_len(space.len())?;
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {epsilon} outside (0, 1]")));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::NonpositiveParameter(format!("tol = {tol}")));
        }
        Ok(RelaxConfig { space, domain, grid, u0, epsilon, tol })
    }

    pub fn tv_u0(&self) -> f64 {
        tv_masked(&self.space, self.u0.values(), self.domain.star_mask())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        RelaxConfig::new(self.space.clone(), self.domain.clone(), self.grid, self.u0.clone(), epsilon, self.tol)
    }

    pub fn with_u0(&self, u0: VertexFunction) -> Result<Self> {
        RelaxConfig::new(self.space.clone(), self.domain.clone(), self.grid, u0, self.epsilon, self.tol)
    }
}

/// Exponential time weights of the relaxed functional.
///
/// The kinetic term of interval `k` carries `W_k = ∫_{t_{k−1}}^{t_k} e^{−t/ε} dt`;
/// the total variation of slice `k` carries `W̃_k = ∫ φ_k(t) e^{−t/ε} dt` with
/// `φ_k` the hat function at node `k`, so that `Σ_k W̃_k TV(v_k)` integrates
/// the piecewise linear interpolant of the TV series exactly.
///
/// Both are stored relative to `ε e^{−t_k/ε}` to stay representable when
/// `T/ε` is large.
#[derive(Debug, Clone)]
pub(crate) struct Weights {
    pub a: f64,
    /// `ε (e^a − 1)/Δt²`: row-scaled coupling to the previous slice.
    pub back: f64,
    /// `ε (1 − e^{−a})/Δt²`: row-scaled coupling to the next slice.
    pub forward: f64,
    /// `W̃_k / (ε e^{−t_k/ε})` for `k = 0..=N`.
    pub beta: Vec<f64>,
    /// `−t_k/ε` for `k = 0..=N`.
    pub log_scale: Vec<f64>,
}

impl Weights {
    pub fn new(grid: TimeGrid, epsilon: f64) -> Self {
        let n = grid.steps();
        let dt = grid.dt();
        let a = dt / epsilon;
        let (_, left, right) = mollifier_weights(a);
        let grow = a.exp();
        let beta = (0..=n)
            .map(|k| match k {
                0 => right,
                k if k == n => grow * left,
                _ => grow * left + right,
            })
            .collect();
        Weights {
            a,
            back: epsilon * a.exp_m1() / (dt * dt),
            forward: -epsilon * (-a).exp_m1() / (dt * dt),
            beta,
            log_scale: (0..=n).map(|k| -grid.node(k) / epsilon).collect(),
        }
    }

    /// `W_k` for `k = 1..=N`.
    pub fn kinetic(&self, epsilon: f64, k: usize) -> f64 {
        epsilon * self.log_scale[k - 1].exp() * -(-self.a).exp_m1()
    }

    /// `W̃_k` for `k = 0..=N`.
    pub fn tv(&self, epsilon: f64, k: usize) -> f64 {
        epsilon * self.log_scale[k].exp() * self.beta[k]
    }
}

fn check_shape(v: &SpaceTimeFunction, cfg: &RelaxConfig) -> Result<()> {
    if v.grid() != cfg.grid {
        return Err(Error::GridMismatch(format!(
            "function on (T, N) = ({}, {}), configuration on ({}, {})",
            v.grid().horizon(),
            v.grid().steps(),
            cfg.grid.horizon(),
            cfg.grid.steps()
        )));
    }
    if v.vertex_count() != cfg.space.len() {
        return Err(Error::DimensionMismatch { expected: cfg.space.len(), got: v.vertex_count() });
    }
    Ok(())
}

/// `Σ_k W_k ½ ‖(v_k − v_{k−1})/Δt‖²_{L²(Ω*)} + (1/ε) Σ_k W̃_k TV(v_k; Ω*)`.
pub fn evaluate_f_eps(v: &SpaceTimeFunction, cfg: &RelaxConfig) -> Result<f64> {
    check_shape(v, cfg)?;
    let wts = Weights::new(cfg.grid, cfg.epsilon);
    let star = cfg.domain.omega_star();
    let dt = cfg.grid.dt();
    let mut value = 0.0;
    for k in 1..=cfg.grid.steps() {
        let kin: f64 = star
            .iter()
            .map(|&x| {
                let d = (v.at(x, k) - v.at(x, k - 1)) / dt;
                cfg.space.mu(x) * d * d
            })
            .sum();
        value += 0.5 * wts.kinetic(cfg.epsilon, k) * kin;
    }
    for (k, tv) in tv_series(&cfg.space, v, star).into_iter().enumerate() {
        value += wts.tv(cfg.epsilon, k) / cfg.epsilon * tv;
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: &'static str,
    pub vertex: String,
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub violations: Vec<Violation>,
}

/// Exact check of `v_0 = u₀` on Ω* and `v_k = u₀` on the ring for all `k`.
pub fn check_admissible(v: &SpaceTimeFunction, cfg: &RelaxConfig) -> Admissibility {
    let mut violations = Vec::new();
    if check_shape(v, cfg).is_err() {
        violations.push(Violation { kind: "shape", vertex: String::new(), node: 0 });
        return Admissibility { admissible: false, violations };
    }
    for &x in cfg.domain.omega_star() {
        if v.at(x, 0) != cfg.u0[x] {
            violations.push(Violation { kind: "initial", vertex: cfg.space.id(x).to_string(), node: 0 });
        }
    }
    for k in 1..=cfg.grid.steps() {
        for &x in cfg.domain.ring() {
            if v.at(x, k) != cfg.u0[x] {
                violations.push(Violation { kind: "boundary", vertex: cfg.space.id(x).to_string(), node: k });
            }
        }
    }
    Admissibility { admissible: violations.is_empty(), violations }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Start the dual iteration from a seeded random point instead of zero.
    pub seed: Option<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iter: 400_000, seed: None }
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub minimizer: SpaceTimeFunction,
    pub primal_value: f64,
    /// Duality gap of the weighted problem.
    pub dual_gap: f64,
    /// Duality gap with every slice rescaled to unit exponential weight; it
    /// bounds the first-order condition uniformly in time.
    pub scaled_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSummary {
    pub primal_value: f64,
    pub dual_gap: f64,
    pub scaled_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tolerance: f64,
}

impl SolverReport {
    pub fn summary(&self) -> SolverSummary {
        SolverSummary {
            primal_value: self.primal_value,
            dual_gap: self.dual_gap,
            scaled_gap: self.scaled_gap,
            iterations: self.iterations,
            converged: self.converged,
            tolerance: self.tolerance,
        }
    }

    pub fn certificate(&self, cfg: &RelaxConfig) -> Certificate {
        Certificate { gap: self.scaled_gap, dt: cfg.grid.dt(), eps: cfg.epsilon }
    }
}

/// Free unknowns `v_k(x)`, `k ≥ 1`, `x ∈ Ω`, and the dual edge terms of Ω*.
pub(crate) fn edge_terms(space: &MetricMeasureSpace, domain: &Domain, slot: &[Option<usize>], fixed: &VertexFunction) -> Vec<EdgeTerm> {
    edges_inside(space, domain.star_mask())
        .into_iter()
        .filter_map(|i| {
            let e = space.edges()[i];
            match (slot[e.a], slot[e.b]) {
                (Some(h), Some(t)) => Some(EdgeTerm { head: h, tail: Tail::Free(t), weight: e.weight }),
                (Some(h), None) => Some(EdgeTerm { head: h, tail: Tail::Fixed(fixed[e.b]), weight: e.weight }),
                (None, Some(h)) => Some(EdgeTerm { head: h, tail: Tail::Fixed(fixed[e.a]), weight: e.weight }),
                (None, None) => None,
            }
        })
        .collect()
}

pub(crate) fn slots(n: usize, free: &[usize]) -> Vec<Option<usize>> {
    let mut slot = vec![None; n];
    for (i, &x) in free.iter().enumerate() {
        slot[x] = Some(i);
    }
    slot
}

pub fn minimize_f_eps(cfg: &RelaxConfig) -> Result<SolverReport> {
    minimize_f_eps_with(cfg, &SolverOptions::default())
}

/// Minimizes the relaxed functional over the admissible class. Running out
/// of iterations is not an error here: the report comes back with
/// `converged = false` and the certificate reached so far.
pub fn minimize_f_eps_with(cfg: &RelaxConfig, opts: &SolverOptions) -> Result<SolverReport> {
    let n_steps = cfg.grid.steps();
    let free = cfg.domain.omega();
    let slot = slots(cfg.space.len(), free);
    let wts = Weights::new(cfg.grid, cfg.epsilon);
    let mut forward = vec![wts.forward; n_steps];
    forward[n_steps - 1] = 0.0;
    let problem = ChainProblem {
        slices: n_steps,
        measure: free.iter().map(|&x| cfg.space.mu(x)).collect(),
        back: vec![wts.back; n_steps],
        forward,
        fidelity: vec![0.0; n_steps],
        target: Vec::new(),
        initial: free.iter().map(|&x| cfg.u0[x]).collect(),
        beta: wts.beta[1..].to_vec(),
        log_scale: wts.log_scale[1..].to_vec(),
        edges: edge_terms(&cfg.space, &cfg.domain, &slot, &cfg.u0),
    };
    let sol = problem.solve(&SolveOptions { tol: cfg.tol, max_iter: opts.max_iter, seed: opts.seed });

    let mut minimizer = SpaceTimeFunction::constant_extension(cfg.grid, &cfg.u0);
    let nf = free.len();
    for k in 1..=n_steps {
        let slice = minimizer.slice_mut(k);
        for (i, &x) in free.iter().enumerate() {
            slice[x] = sol.v[(k - 1) * nf + i];
        }
    }
    let primal_value = evaluate_f_eps(&minimizer, cfg)?;
    Ok(SolverReport {
        minimizer,
        primal_value,
        dual_gap: sol.gap,
        scaled_gap: sol.scaled_gap,
        iterations: sol.iterations,
        converged: sol.converged,
        tolerance: cfg.tol,
    })
}

/// Node weights `ζ` in `[0, 1]` paired with the minimality residual.
fn check_test_pair(phi: &SpaceTimeFunction, zeta: &[f64], cfg: &RelaxConfig) -> Result<()> {
    check_shape(phi, cfg)?;
    if zeta.len() != cfg.grid.steps() + 1 {
        return Err(Error::InadmissibleTestFunction(format!(
            "cutoff has {} nodes, grid has {}",
            zeta.len(),
            cfg.grid.steps() + 1
        )));
    }
    if let Some(k) = zeta.iter().position(|z| !(0.0..=1.0).contains(z)) {
        return Err(Error::InadmissibleTestFunction(format!("cutoff outside [0, 1] at node {k}")));
    }
    for k in 0..=cfg.grid.steps() {
        for x in 0..cfg.space.len() {
            if !cfg.domain.in_omega(x) && phi.at(x, k) != 0.0 {
                return Err(Error::InadmissibleTestFunction(format!(
                    "perturbation nonzero outside omega at vertex `{}`, node {k}",
                    cfg.space.id(x)
                )));
            }
        }
    }
    if zeta[0] != 0.0 && phi.slice(0).values().iter().any(|&p| p != 0.0) {
        return Err(Error::InadmissibleTestFunction("needs cutoff or perturbation to vanish at t = 0".into()));
    }
    Ok(())
}

/// Right side minus left side of the rewritten minimality condition
///
/// ```text
/// ∫ ζ ‖Du_ε‖ dt ≤ ∫ ζ ‖D(u_ε + φ)‖ dt + ∫∫ ζ ∂_t u_ε φ + ε ∫∫ (ζ' φ + ζ ∂_t φ) ∂_t u_ε
/// ```
///
/// discretized so that it is the exact first-order condition of the discrete
/// functional along `ψ_k = e^{t_k/ε} ζ_k φ_k`. A certified minimizer
/// therefore satisfies `residual ≥ −ε · scaled_gap`.
pub fn minimality_residual(u: &SpaceTimeFunction, phi: &SpaceTimeFunction, zeta: &[f64], cfg: &RelaxConfig) -> Result<f64> {
    check_shape(u, cfg)?;
    check_test_pair(phi, zeta, cfg)?;
    let eps = cfg.epsilon;
    let wts = Weights::new(cfg.grid, eps);
    let star = cfg.domain.star_mask();
    let omega = cfg.domain.omega();
    let dt = cfg.grid.dt();
    let a = wts.a;
    let omega_w = eps * 4.0 * (0.5 * a).sinh().powi(2) / a;
    let kappa = -(-a).exp_m1() / a;

    let mut residual = 0.0;
    for k in 0..=cfg.grid.steps() {
        if zeta[k] == 0.0 {
            continue;
        }
        let moved: Vec<f64> = u.slice(k).values().iter().zip(phi.slice(k).values()).map(|(a, b)| a + b).collect();
        let diff = tv_masked(&cfg.space, &moved, star) - tv_masked(&cfg.space, u.slice(k).values(), star);
        residual += eps * wts.beta[k] * zeta[k] * diff;
    }
    for k in 1..=cfg.grid.steps() {
        for &x in omega {
            let du = (u.at(x, k) - u.at(x, k - 1)) / dt;
            let g1 = zeta[k] * phi.at(x, k);
            let g0 = zeta[k - 1] * phi.at(x, k - 1);
            residual += cfg.space.mu(x) * du * (omega_w * g1 + dt * kappa * eps * (g1 - g0) / dt);
        }
    }
    Ok(residual)
}

/// The a-priori bounds of the relaxed problem evaluated on a computed minimizer.
pub fn energy_bounds(cfg: &RelaxConfig, report: &SolverReport) -> Result<Vec<Check>> {
    let u = &report.minimizer;
    check_shape(u, cfg)?;
    let cert = report.certificate(cfg);
    let mut checks = admissible_bounds(u, cfg, Some(report.primal_value))?;

    let space = &cfg.space;
    let star = cfg.domain.omega_star();
    let n = cfg.grid.steps();
    let t = cfg.grid.horizon();
    let tv0 = cfg.tv_u0();
    let energy = dt_norm_sq(space, u, star, 0, n);

    let slack = Slack::scaled(0.0, 0.0, 0.5 * tv0);
    checks.push(Check::inequality(
        "time_derivative_bound",
        "uniform time derivative bound",
        energy,
        tv0,
        slack,
        &cert,
    ));

    let slack = Slack::scaled(0.0, 0.0, 0.5 * t * t * tv0);
    checks.push(Check::inequality(
        "l2_bound",
        "space-time L2 bound",
        l2_norm_sq_st(space, u, star, 0, n),
        t * t * tv0 + 2.0 * t * l2_norm_sq(space, &cfg.u0, star),
        slack,
        &cert,
    ));

    let slack = Slack::scaled(0.0, 0.0, 0.5 * tv0);
    checks.push(crate::varsol::holder_check(space, u, star, tv0, slack, &cert));

    let series = tv_series(space, u, star);
    let dt = cfg.grid.dt();
    let slack = Slack::scaled(0.0, tv0, 0.0);
    let eta = slack.eta(&cert);
    let mut worst: Option<(f64, f64, f64)> = None;
    for k1 in 0..n {
        let mut integral = 0.0;
        for k2 in k1 + 1..=n {
            integral += dt * series[k2 - 1];
            let rhs = ((k2 - k1) as f64 * dt + 0.5 * cfg.epsilon) * tv0;
            let r = rhs - integral;
            if worst.map_or(true, |(w, _, _)| r < w) {
                worst = Some((r, integral, rhs));
            }
        }
    }
    let (_, lhs, rhs) = worst.expect("grid has at least one interval");
    checks.push(Check::with_eta("sliced_tv_bound", "sliced total variation bound", lhs, rhs, slack, eta));
    Ok(checks)
}

/// Bounds valid for every admissible function: the L¹ estimate through the
/// time derivative, and the 𝒦-norm estimate when the functional value is known.
pub fn admissible_bounds(v: &SpaceTimeFunction, cfg: &RelaxConfig, value: Option<f64>) -> Result<Vec<Check>> {
    check_shape(v, cfg)?;
    let space = &cfg.space;
    let star = cfg.domain.omega_star();
    let n = cfg.grid.steps();
    let t = cfg.grid.horizon();
    let exact = Certificate { gap: 0.0, dt: cfg.grid.dt(), eps: cfg.epsilon };
    let l1_u0 = l1_norm(space, &cfg.u0, star);
    let mu_omega = space.measure_of(cfg.domain.omega());
    let root = (t * mu_omega).sqrt();
    let mut checks = vec![Check::inequality(
        "l1_bound",
        "L1 bound through the time derivative",
        l1_norm_st(space, v, star, 0, n),
        t * (root * dt_norm_sq(space, v, star, 0, n).sqrt() + l1_u0),
        Slack::default(),
        &exact,
    )];
    let value = match value {
        Some(f) => f,
        None => evaluate_f_eps(v, cfg)?,
    };
    let growth = (t / cfg.epsilon).exp();
    checks.push(Check::inequality(
        "k_norm_bound",
        "K-norm bound through the functional",
        k_norm(space, v, &cfg.domain),
        2.0 * growth * (1.0 + t * root) * (value + 1.0) + t * l1_u0,
        Slack::default(),
        &exact,
    ));
    Ok(checks)
}
