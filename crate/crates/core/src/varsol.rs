use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bv::{l2_norm_sq, mask, tv_masked, VertexFunction};
use crate::error::{Error, Result};
use crate::mms::{Domain, MetricMeasureSpace};
use crate::relax::{minimize_f_eps_with, RelaxConfig, SolverOptions, SolverReport};
use crate::timefn::{dt_norm_sq, mollify, tv_series, SpaceTimeFunction, TimeGrid};

/// Relative rounding allowance added to every tolerance.
pub const ROUNDING: f64 = 1e-12;

/// Quantities the slack of an inequality check is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    /// Scaled duality gap of the solve that produced the candidate; zero for exact data.
    pub gap: f64,
    pub dt: f64,
    pub eps: f64,
}

impl Certificate {
    pub fn exact(dt: f64) -> Self {
        Certificate { gap: 0.0, dt, eps: 0.0 }
    }
}

/// `η = gap·gap + root_gap·√gap + dt·Δt + eps·ε`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Slack {
    pub gap: f64,
    pub root_gap: f64,
    pub dt: f64,
    pub eps: f64,
}

impl Slack {
    pub fn scaled(gap: f64, dt: f64, eps: f64) -> Self {
        Slack { gap, root_gap: 0.0, dt, eps }
    }

    /// Solver gap plus an `O(Δt)` quadrature allowance proportional to `TV(u₀)`.
    pub fn standard(tv0: f64) -> Self {
        Slack { gap: 1.0, root_gap: 0.0, dt: tv0, eps: 0.0 }
    }

    /// Pointwise comparison of two minimizers: the gap controls squared
    /// distances, so it enters through its root, scaled by the kinetic
    /// coupling `ε/Δt²` of the lightest free vertex.
    pub fn pointwise(cfg: &RelaxConfig) -> Self {
        let mu_min = cfg.domain.omega().iter().map(|&x| cfg.space.mu(x)).fold(f64::INFINITY, f64::min);
        let root_gap = if mu_min.is_finite() { 2.0 * cfg.grid.dt() * (2.0 / (cfg.epsilon * mu_min)).sqrt() } else { 0.0 };
        Slack { gap: 0.0, root_gap, dt: 0.0, eps: 0.0 }
    }

    pub fn eta(&self, c: &Certificate) -> f64 {
        self.gap * c.gap + self.root_gap * c.gap.sqrt() + self.dt * c.dt + self.eps * c.eps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub property: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub slack: Slack,
}

impl Check {
    /// `lhs ≤ rhs + η`, with `η` from the slack and certificate.
    pub fn inequality(name: &str, property: &str, lhs: f64, rhs: f64, slack: Slack, cert: &Certificate) -> Self {
        Check::with_eta(name, property, lhs, rhs, slack, slack.eta(cert))
    }

    pub fn with_eta(name: &str, property: &str, lhs: f64, rhs: f64, slack: Slack, eta: f64) -> Self {
        let residual = rhs - lhs;
        let tolerance = eta + ROUNDING * (1.0 + lhs.abs() + rhs.abs());
        Check {
            name: name.to_string(),
            property: property.to_string(),
            lhs,
            rhs,
            residual,
            tolerance,
            pass: residual >= -tolerance,
            slack,
        }
    }

    /// A check whose slack already sits inside `rhs`; only rounding is tolerated.
    fn embedded(name: &str, property: &str, lhs: f64, rhs: f64, slack: Slack) -> Self {
        Check::with_eta(name, property, lhs, rhs, slack, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn new(checks: Vec<Check>) -> Self {
        VerificationReport { checks }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// The check with the smallest margin `residual + tolerance`.
    pub fn worst(&self) -> Option<&Check> {
        self.checks.iter().min_by(|a, b| (a.residual + a.tolerance).total_cmp(&(b.residual + b.tolerance)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Relax,
    Oracle,
    File,
}

/// A space-time function put forward as a solution of the flow.
#[derive(Debug, Clone)]
pub struct CandidateSolution {
    pub space: MetricMeasureSpace,
    pub domain: Domain,
    pub u0: VertexFunction,
    pub u: SpaceTimeFunction,
    pub provenance: Provenance,
    pub certificate: Certificate,
}

impl CandidateSolution {
    pub fn new(
        space: MetricMeasureSpace,
        domain: Domain,
        u0: VertexFunction,
        u: SpaceTimeFunction,
        provenance: Provenance,
        certificate: Certificate,
    ) -> Result<Self> {
        u0.check_len(space.len())?;
        if u.vertex_count() != space.len() {
            return Err(Error::DimensionMismatch { expected: space.len(), got: u.vertex_count() });
        }
        for k in 0..=u.grid().steps() {
            for &x in domain.ring() {
                if u.at(x, k) != u0[x] {
                    return Err(Error::RingViolation { vertex: x, node: k });
                }
            }
        }
        let star = domain.omega_star();
        let start = u.slice(0).zip_map(&u0, |a, b| a - b);
        let scale = 1.0 + l2_norm_sq(&space, &u0, star);
        if l2_norm_sq(&space, &start, star) > 1e-16 * scale {
            return Err(Error::validation("initial slice", "u(0) differs from the datum"));
        }
        Ok(CandidateSolution { space, domain, u0, u, provenance, certificate })
    }

    pub fn from_relax(cfg: &RelaxConfig, report: &SolverReport) -> Result<Self> {
        CandidateSolution::new(
            cfg.space.clone(),
            cfg.domain.clone(),
            cfg.u0.clone(),
            report.minimizer.clone(),
            Provenance::Relax,
            report.certificate(cfg),
        )
    }

    pub fn grid(&self) -> TimeGrid {
        self.u.grid()
    }

    pub fn tv_u0(&self) -> f64 {
        tv_masked(&self.space, self.u0.values(), self.domain.star_mask())
    }

    fn star(&self) -> &[usize] {
        self.domain.omega_star()
    }

    fn node_range(&self, t1: f64, t2: f64) -> Result<(usize, usize)> {
        let g = self.grid();
        let err = || Error::IntervalOutOfRange { t1, t2, horizon: g.horizon() };
        let k1 = g.node_index(t1).ok_or_else(err)?;
        let k2 = g.node_index(t2).ok_or_else(err)?;
        if k1 >= k2 {
            return Err(err());
        }
        Ok((k1, k2))
    }
}

fn check_comparison_map(c: &CandidateSolution, v: &SpaceTimeFunction, k1: usize, k2: usize) -> Result<()> {
    c.u.check_same_shape(v)?;
    for k in k1..=k2 {
        for &x in c.domain.ring() {
            if v.at(x, k) != c.u0[x] {
                return Err(Error::RingViolation { vertex: x, node: k });
            }
        }
    }
    Ok(())
}

fn residual_on_nodes(c: &CandidateSolution, v: &SpaceTimeFunction, k1: usize, k2: usize) -> f64 {
    let space = &c.space;
    let star = c.star();
    let m = mask(space.len(), star);
    let dt = c.grid().dt();
    let mut r = 0.0;
    for k in k1 + 1..=k2 {
        let mut s = 0.0;
        for &x in star {
            let dv = (v.at(x, k) - v.at(x, k - 1)) / dt;
            let gap = 0.5 * ((v.at(x, k - 1) - c.u.at(x, k - 1)) + (v.at(x, k) - c.u.at(x, k)));
            s += space.mu(x) * dv * gap;
        }
        r += dt * s;
    }
    for k in k1..k2 {
        r += dt * (tv_masked(space, v.slice(k).values(), &m) - tv_masked(space, c.u.slice(k).values(), &m));
    }
    let diff = |k: usize| -> f64 {
        star.iter().map(|&x| space.mu(x) * (v.at(x, k) - c.u.at(x, k)).powi(2)).sum()
    };
    r + 0.5 * diff(k1) - 0.5 * diff(k2)
}

/// Right side minus left side of the variational inequality on `[t₁, t₂]`:
///
/// ```text
/// ∫[⟨∂_t v, v − u⟩ + ‖Dv‖(Ω*)] − ∫‖Du‖(Ω*) + ½‖(v − u)(t₁)‖² − ½‖(v − u)(t₂)‖²
/// ```
pub fn variational_inequality_residual(c: &CandidateSolution, v: &SpaceTimeFunction, t1: f64, t2: f64) -> Result<f64> {
    let (k1, k2) = c.node_range(t1, t2)?;
    check_comparison_map(c, v, k1, k2)?;
    Ok(residual_on_nodes(c, v, k1, k2))
}

/// Trapezoid cutoff vanishing outside `(t₁, t₂)` with ramps of width `ϑ`.
pub fn trapezoid_cutoff(grid: TimeGrid, t1: f64, t2: f64, theta: f64) -> Vec<f64> {
    grid.nodes()
        .map(|t| {
            if t <= t1 || t >= t2 {
                0.0
            } else if t < t1 + theta {
                (t - t1) / theta
            } else if t > t2 - theta {
                (t2 - t) / theta
            } else {
                1.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationEntry {
    pub map: usize,
    pub theta: f64,
    pub h: f64,
    /// Residual on `[0, T]` of the blended map `ζ_ϑ v + (1 − ζ_ϑ)[u]_h`.
    pub blended: f64,
    /// Residual of `v` itself on `[t₁, t₂]`.
    pub localized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationReport {
    pub entries: Vec<LocalizationEntry>,
    pub report: VerificationReport,
}

/// Blends each comparison map with the time mollification of `u` through
/// the trapezoid cutoff and evaluates the resulting maps on the whole cylinder.
pub fn localization_battery(
    c: &CandidateSolution,
    t1: f64,
    t2: f64,
    thetas: &[f64],
    hs: &[f64],
    maps: &[SpaceTimeFunction],
    slack: Slack,
) -> Result<LocalizationReport> {
    let (k1, k2) = c.node_range(t1, t2)?;
    let grid = c.grid();
    let (ta, tb) = (grid.node(k1), grid.node(k2));
    for v in maps {
        check_comparison_map(c, v, k1, k2)?;
    }
    let eta = slack.eta(&c.certificate);
    let mut entries = Vec::new();
    let mut checks = Vec::new();
    for &h in hs {
        let m = mollify(&c.u, h, &c.u0)?;
        for &theta in thetas {
            if !(theta > 0.0 && theta <= 0.5 * (tb - ta)) {
                return Err(Error::InvalidParameter(format!("cutoff width {theta} outside (0, (t2 - t1)/2]")));
            }
            let zeta = trapezoid_cutoff(grid, ta, tb, theta);
            for (i, v) in maps.iter().enumerate() {
                let mut blended = m.values.clone();
                for (k, &z) in zeta.iter().enumerate() {
                    if z == 0.0 {
                        continue;
                    }
                    let s = blended.slice_mut(k);
                    for x in 0..s.len() {
                        s[x] = z * v.at(x, k) + (1.0 - z) * s[x];
                    }
                }
                let full = residual_on_nodes(c, &blended, 0, grid.steps());
                let localized = residual_on_nodes(c, v, k1, k2);
                checks.push(Check::with_eta(
                    &format!("localized_map_{i}_theta_{theta}_h_{h}"),
                    "variational inequality for the blended comparison map",
                    0.0,
                    full,
                    slack,
                    eta,
                ));
                entries.push(LocalizationEntry { map: i, theta, h, blended: full, localized });
            }
        }
    }
    Ok(LocalizationReport { entries, report: VerificationReport::new(checks) })
}

/// Linear-in-time control of the distance to the initial datum.
pub fn initial_condition_check(c: &CandidateSolution, slack: Slack) -> VerificationReport {
    let space = &c.space;
    let star = c.star();
    let m = mask(space.len(), star);
    let g = c.grid();
    let dt = g.dt();
    let tv0 = c.tv_u0();
    let eta = slack.eta(&c.certificate);

    let mut integral = 0.0;
    let mut worst_energy: Option<(f64, f64)> = None;
    let mut worst_growth: Option<(f64, f64)> = None;
    for k in 1..=g.steps() {
        integral += dt * tv_masked(space, c.u.slice(k - 1).values(), &m);
        let tau = g.node(k);
        let dist: f64 = star.iter().map(|&x| space.mu(x) * (c.u.at(x, k) - c.u0[x]).powi(2)).sum();
        let lhs = integral + 0.5 * dist;
        let rhs = tau * tv0;
        if worst_energy.map_or(true, |(l, r)| rhs - lhs < r - l) {
            worst_energy = Some((lhs, rhs));
        }
        let rhs = 2.0 * tau * tv0;
        if worst_growth.map_or(true, |(l, r)| rhs - dist < r - l) {
            worst_growth = Some((dist, rhs));
        }
    }
    let (l1, r1) = worst_energy.expect("grid has a step");
    let (l2, r2) = worst_growth.expect("grid has a step");
    VerificationReport::new(vec![
        Check::with_eta(
            "initial_energy",
            "energy up to tau against tau times the datum variation",
            l1,
            r1,
            slack,
            eta,
        ),
        Check::with_eta(
            "initial_l2_growth",
            "squared distance to the datum grows at most linearly",
            l2,
            r2,
            slack,
            2.0 * eta,
        ),
    ])
}

/// `‖u(t) − u(s)‖ ≤ √(TV(u₀) + η) √|t − s|` at the worst node pair.
pub fn holder_check(
    space: &MetricMeasureSpace,
    u: &SpaceTimeFunction,
    star: &[usize],
    tv0: f64,
    slack: Slack,
    cert: &Certificate,
) -> Check {
    let g = u.grid();
    let bound = (tv0 + slack.eta(cert)).sqrt();
    let mut worst: Option<(f64, f64)> = None;
    for k1 in 0..g.steps() {
        for k2 in k1 + 1..=g.steps() {
            let d: f64 = star.iter().map(|&x| space.mu(x) * (u.at(x, k2) - u.at(x, k1)).powi(2)).sum::<f64>().sqrt();
            let rhs = bound * (g.node(k2) - g.node(k1)).sqrt();
            if worst.map_or(true, |(l, r)| rhs - d < r - l) {
                worst = Some((d, rhs));
            }
        }
    }
    let (lhs, rhs) = worst.expect("grid has a step");
    Check::embedded("holder_bound", "half-Hoelder continuity in L2", lhs, rhs, slack)
}

/// Energy estimate, Hölder continuity and averaged total variation bound.
pub fn regularity_and_energy_check(c: &CandidateSolution, slack: Slack) -> VerificationReport {
    let space = &c.space;
    let star = c.star();
    let g = c.grid();
    let tv0 = c.tv_u0();
    let eta = slack.eta(&c.certificate);
    let energy = dt_norm_sq(space, &c.u, star, 0, g.steps());

    let series = tv_series(space, &c.u, star);
    let mut prefix = vec![0.0; g.steps() + 1];
    for k in 1..=g.steps() {
        prefix[k] = prefix[k - 1] + g.dt() * series[k - 1];
    }
    let mut worst: Option<(f64, f64)> = None;
    for k1 in 0..g.steps() {
        for k2 in k1 + 1..=g.steps() {
            let avg = (prefix[k2] - prefix[k1]) / (g.node(k2) - g.node(k1));
            if worst.map_or(true, |(l, _)| avg > l) {
                worst = Some((avg, tv0));
            }
        }
    }
    let (avg, _) = worst.expect("grid has a step");
    VerificationReport::new(vec![
        Check::with_eta("energy_bound", "time derivative energy against datum variation", energy, tv0, slack, eta),
        holder_check(space, &c.u, star, tv0, slack, &c.certificate),
        Check::with_eta("average_tv_bound", "time-averaged total variation", avg, tv0, slack, eta),
    ])
}

#[derive(Debug, Clone)]
pub struct ComparisonOutcome {
    pub lower: SolverReport,
    pub upper: SolverReport,
    pub report: VerificationReport,
}

/// Solves the relaxed problem for ordered data and checks that the
/// minimizers stay ordered.
pub fn comparison_test(
    cfg: &RelaxConfig,
    u0: &VertexFunction,
    v0: &VertexFunction,
    opts: &SolverOptions,
    slack: Slack,
) -> Result<ComparisonOutcome> {
    u0.check_len(cfg.space.len())?;
    v0.check_len(cfg.space.len())?;
    if let Some(x) = (0..cfg.space.len()).find(|&x| u0[x] > v0[x]) {
        return Err(Error::DataNotOrdered(x));
    }
    let lo_cfg = cfg.with_u0(u0.clone())?;
    let hi_cfg = cfg.with_u0(v0.clone())?;
    let lower = minimize_f_eps_with(&lo_cfg, opts)?;
    let upper = minimize_f_eps_with(&hi_cfg, opts)?;
    let cert = Certificate {
        gap: lower.scaled_gap.max(upper.scaled_gap),
        dt: cfg.grid.dt(),
        eps: cfg.epsilon,
    };
    let (u, w) = (&lower.minimizer, &upper.minimizer);
    let star = cfg.domain.omega_star();
    let mut excess = f64::NEG_INFINITY;
    let mut submod = f64::INFINITY;
    let mut submod_pair = (0.0, 0.0);
    for k in 0..=cfg.grid.steps() {
        for &x in star {
            excess = excess.max(u.at(x, k) - w.at(x, k));
        }
        let (a, b) = (u.slice(k), w.slice(k));
        let lo = a.zip_map(b, f64::min);
        let hi = a.zip_map(b, f64::max);
        let m = cfg.domain.star_mask();
        let lhs = tv_masked(&cfg.space, lo.values(), m) + tv_masked(&cfg.space, hi.values(), m);
        let rhs = tv_masked(&cfg.space, a.values(), m) + tv_masked(&cfg.space, b.values(), m);
        if rhs - lhs < submod {
            submod = rhs - lhs;
            submod_pair = (lhs, rhs);
        }
    }
    let report = VerificationReport::new(vec![
        Check::inequality("ordering", "ordered data give ordered solutions", excess, 0.0, slack, &cert),
        Check::inequality(
            "submodularity",
            "total variation of min and max against the pair",
            submod_pair.0,
            submod_pair.1,
            Slack::default(),
            &cert,
        ),
    ]);
    Ok(ComparisonOutcome { lower, upper, report })
}

/// `∫‖D(u + φ)‖ dt − ∫[⟨u, ∂_t φ⟩ + ‖Du‖] dt` for `φ` compactly supported in `Ω × (0, T)`.
pub fn parabolic_minimizer_residual(c: &CandidateSolution, phi: &SpaceTimeFunction) -> Result<f64> {
    c.u.check_same_shape(phi)?;
    let g = c.grid();
    let n = g.steps();
    for k in 0..=n {
        for x in 0..c.space.len() {
            let inside = c.domain.in_omega(x) && k != 0 && k != n;
            if !inside && phi.at(x, k) != 0.0 {
                return Err(Error::SupportViolation(format!(
                    "perturbation nonzero at vertex `{}`, node {k}",
                    c.space.id(x)
                )));
            }
        }
    }
    let space = &c.space;
    let star = c.star();
    let m = mask(space.len(), star);
    let dt = g.dt();
    let mut r = 0.0;
    for k in 0..n {
        let moved: Vec<f64> = c.u.slice(k).values().iter().zip(phi.slice(k).values()).map(|(a, b)| a + b).collect();
        r += dt * (tv_masked(space, &moved, &m) - tv_masked(space, c.u.slice(k).values(), &m));
    }
    for k in 1..=n {
        let s: f64 = star
            .iter()
            .map(|&x| {
                let dphi = (phi.at(x, k) - phi.at(x, k - 1)) / dt;
                space.mu(x) * 0.5 * (c.u.at(x, k - 1) + c.u.at(x, k)) * dphi
            })
            .sum();
        r -= dt * s;
    }
    Ok(r)
}

/// Random field, piecewise linear in time between `knots` equally spaced
/// breakpoints, with values uniform in `[−amplitude, amplitude]` on the
/// vertices selected by `keep` and zero elsewhere.
pub fn random_field(
    grid: TimeGrid,
    n: usize,
    keep: impl Fn(usize) -> bool,
    knots: usize,
    amplitude: f64,
    rng: &mut impl Rng,
) -> SpaceTimeFunction {
    let knots = knots.max(1);
    let values: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..=knots).map(|_| rng.gen_range(-amplitude..=amplitude)).collect())
        .collect();
    SpaceTimeFunction::from_fn(grid, n, |x, t| {
        if !keep(x) {
            return 0.0;
        }
        let s = t / grid.horizon() * knots as f64;
        let i = (s.floor() as usize).min(knots - 1);
        let f = s - i as f64;
        values[x][i] * (1.0 - f) + values[x][i + 1] * f
    })
}

/// Seeded comparison maps equal to the datum on the ring: half are
/// perturbations of the datum, half small perturbations of the candidate.
pub fn comparison_maps(c: &CandidateSolution, count: usize, seed: u64) -> Vec<SpaceTimeFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = c.grid();
    let n = c.space.len();
    let scale = 1.0 + c.u0.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (0..count)
        .map(|i| {
            let knots = rng.gen_range(1..=6);
            let amp = scale * 10f64.powf(rng.gen_range(-2.0..0.0));
            let field = random_field(g, n, |x| c.domain.in_omega(x), knots, amp, &mut rng);
            let base = if i % 2 == 0 { SpaceTimeFunction::constant_extension(g, &c.u0) } else { c.u.clone() };
            base.zip_map(&field, |a, b| a + b).expect("same grid")
        })
        .collect()
}

/// Seeded perturbations vanishing on the ring and at both ends of the time interval.
pub fn compact_perturbations(c: &CandidateSolution, count: usize, seed: u64) -> Vec<SpaceTimeFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = c.grid();
    let n = c.space.len();
    let scale = 1.0 + c.u0.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (0..count)
        .map(|_| {
            let knots = rng.gen_range(2..=6);
            let amp = scale * 10f64.powf(rng.gen_range(-3.0..0.0));
            let mut f = random_field(g, n, |x| c.domain.in_omega(x), knots, amp, &mut rng);
            let last = g.steps();
            for x in 0..n {
                f.slice_mut(0)[x] = 0.0;
                f.slice_mut(last)[x] = 0.0;
            }
            f
        })
        .collect()
}

/// Variational inequality on `[0, T]` against the time-independent extension
/// of the datum and `count` seeded comparison maps.
pub fn variational_battery(c: &CandidateSolution, count: usize, seed: u64, slack: Slack) -> Result<VerificationReport> {
    let t = c.grid().horizon();
    let eta = slack.eta(&c.certificate);
    let mut checks = Vec::with_capacity(count + 1);
    let ext = SpaceTimeFunction::constant_extension(c.grid(), &c.u0);
    let r = variational_inequality_residual(c, &ext, 0.0, t)?;
    checks.push(Check::with_eta("varineq_datum_extension", "variational inequality", 0.0, r, slack, eta));
    for (i, v) in comparison_maps(c, count, seed).iter().enumerate() {
        let r = variational_inequality_residual(c, v, 0.0, t)?;
        checks.push(Check::with_eta(&format!("varineq_map_{i}"), "variational inequality", 0.0, r, slack, eta));
    }
    Ok(VerificationReport::new(checks))
}

/// Parabolic minimizer inequality against `count` seeded compactly supported perturbations.
pub fn parabolic_battery(c: &CandidateSolution, count: usize, seed: u64, slack: Slack) -> Result<VerificationReport> {
    let eta = slack.eta(&c.certificate);
    let mut checks = Vec::with_capacity(count);
    for (i, phi) in compact_perturbations(c, count, seed).iter().enumerate() {
        let r = parabolic_minimizer_residual(c, phi)?;
        checks.push(Check::with_eta(&format!("parabolic_{i}"), "parabolic minimizer inequality", 0.0, r, slack, eta));
    }
    Ok(VerificationReport::new(checks))
}
