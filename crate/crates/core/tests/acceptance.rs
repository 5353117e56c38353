//! Acceptance suite: one line per criterion, then a single assertion over all of them.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::{json, Value};
use tvflow::bv::{dual_total_variation, total_variation};
use tvflow::mms::{Domain, MetricMeasureSpace};
use tvflow::oracle::{minimizing_movements, two_point_trajectory};
use tvflow::relax::{
    energy_bounds, evaluate_f_eps, minimality_residual, minimize_f_eps, minimize_f_eps_with, RelaxConfig, SolverOptions,
    SolverReport,
};
use tvflow::timefn::{
    dt_norm_sq, l1_norm_st, l2_norm_sq_st, mollify, mollify_ode_residual, mollify_series, tv_integral, tv_series,
};
use tvflow::varsol::{
    comparison_test, initial_condition_check, parabolic_battery, regularity_and_energy_check, variational_battery,
    Certificate, Provenance, Slack, VerificationReport,
};
use tvflow::{CandidateSolution, SpaceTimeFunction, TimeGrid, VertexFunction};

use common::*;

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
    data: Value,
}

fn outcome(pass: bool, detail: String, data: Value) -> Outcome {
    Outcome { pass, detail, data }
}

/// A computed solution kept for the post-solve criteria.
struct Solved {
    label: String,
    cfg: RelaxConfig,
    report: SolverReport,
}

fn l2_distance(space: &MetricMeasureSpace, domain: &Domain, a: &SpaceTimeFunction, b: &SpaceTimeFunction) -> f64 {
    let d = a.zip_map(b, |x, y| x - y).unwrap();
    l2_norm_sq_st(space, &d, domain.omega_star(), 0, a.grid().steps()).sqrt()
}

fn fails(report: &VerificationReport) -> Vec<String> {
    report.failures().map(|c| format!("{} (residual {:.3e}, tolerance {:.3e})", c.name, c.residual, c.tolerance)).collect()
}

fn tv_duality(seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let (mut worst_dual, mut worst_lp) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = rng.gen_range(2..=12);
        let space = random_graph(n, &mut rng);
        let u = VertexFunction::new((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let region: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.75)).collect();
        let primal = total_variation(&space, &u, &region).value;
        let dual = dual_total_variation(&space, &u, &region).value;
        worst_dual = worst_dual.max((primal - dual).abs());

        // sup over |F| ≤ 1 supported in the region of Σ_x μ u div F, with F = q − 1, 0 ≤ q ≤ 2.
        let inside: Vec<bool> = (0..n).map(|x| region.contains(&x)).collect();
        let m = space.edges().len();
        let mut div = vec![vec![0.0; m]; n];
        for (e, edge) in space.edges().iter().enumerate() {
            if inside[edge.a] && inside[edge.b] {
                div[edge.a][e] += edge.weight / space.mu(edge.a);
                div[edge.b][e] -= edge.weight / space.mu(edge.b);
            }
        }
        let c: Vec<f64> = (0..m).map(|e| (0..n).map(|x| space.mu(x) * u[x] * div[x][e]).sum()).collect();
        let a: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let lp = simplex_max(&c, &a, &vec![2.0; m]) - c.iter().sum::<f64>();
        worst_lp = worst_lp.max((lp - primal).abs());
    }
    let pass = worst_dual <= 1e-10 && worst_lp <= 1e-8;
    outcome(
        pass,
        format!("200 graphs: max |dual - primal| = {worst_dual:.2e}, max |LP - primal| = {worst_lp:.2e}"),
        json!({ "dual": worst_dual, "lp": worst_lp }),
    )
}

/// Smooth random space-time function: a few sinusoids per vertex.
fn smooth_field(grid: TimeGrid, n: usize, coeffs: &[[f64; 3]]) -> SpaceTimeFunction {
    SpaceTimeFunction::from_fn(grid, n, |x, t| {
        coeffs[x * 3..x * 3 + 3].iter().map(|&[amp, freq, phase]| amp * (freq * t + phase).sin()).sum()
    })
}

fn mollification(seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let (space, _, _) = six_vertex();
    let n = space.len();
    let all: Vec<usize> = (0..n).collect();
    let mut problems = Vec::new();

    // ODE identity: residual of the centered difference under grid doubling.
    let mut min_order = f64::INFINITY;
    let mut max_constant = 0.0f64;
    for _ in 0..20 {
        let coeffs: Vec<[f64; 3]> =
            (0..3 * n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(0.5..8.0), rng.gen_range(0.0..6.3)]).collect();
        let v0 = VertexFunction::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let h = rng.gen_range(0.05..0.5);
        let mut prev: Option<f64> = None;
        for steps in [64, 128, 256, 512] {
            let grid = TimeGrid::new(1.0, steps).unwrap();
            let m = mollify(&smooth_field(grid, n, &coeffs), h, &v0).unwrap();
            let r = mollify_ode_residual(&space, &m, &all);
            max_constant = max_constant.max(r / grid.dt());
            if let Some(p) = prev {
                min_order = min_order.min((p / r).log2());
            }
            prev = Some(r);
        }
    }
    if min_order < 1.0 {
        problems.push(format!("observed order {min_order:.3}"));
    }

    // L¹ bound and TV bound at every node, on piecewise linear random data.
    let mut worst_l1 = f64::INFINITY;
    let mut worst_tv = f64::INFINITY;
    for _ in 0..20 {
        let steps = rng.gen_range(8..=64);
        let horizon = rng.gen_range(0.5..2.0);
        let grid = TimeGrid::new(horizon, steps).unwrap();
        let vals: Vec<f64> = (0..n * (steps + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = SpaceTimeFunction::from_fn(grid, n, |x, t| vals[x * (steps + 1) + grid.node_index(t).unwrap()]);
        let v0 = VertexFunction::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let l1_v0: f64 = (0..n).map(|x| space.mu(x) * v0[x].abs()).sum();
        for _ in 0..3 {
            let h = horizon * 10f64.powf(rng.gen_range(-2.0..0.0));
            let m = mollify(&v, h, &v0).unwrap();
            for k in 1..=steps {
                let t0 = grid.node(k);
                let lhs = m.l1_norm(&space, &all, k);
                let rhs = l1_norm_st(&space, &v, &all, 0, k) + h * -(-t0 / h).exp_m1() * l1_v0;
                worst_l1 = worst_l1.min(rhs - lhs);
            }
            let bound = mollify_series(&tv_series(&space, &v, &all), grid.dt(), h, total_variation(&space, &v0, &all).value);
            let actual = tv_series(&space, &m.values, &all);
            for k in 0..=steps {
                worst_tv = worst_tv.min(bound[k] - actual[k]);
            }
        }
    }
    if worst_l1 < -1e-10 {
        problems.push(format!("L1 bound violated by {:.3e}", -worst_l1));
    }
    if worst_tv < -1e-10 {
        problems.push(format!("TV bound violated by {:.3e}", -worst_tv));
    }

    // Convergence of the integrated total variation and of the L¹ distance as h = 2^{-j} shrinks.
    let grid = TimeGrid::new(1.0, 4096).unwrap();
    let coeffs: Vec<[f64; 3]> =
        (0..3 * n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(0.5..4.0), rng.gen_range(0.0..6.3)]).collect();
    let v = smooth_field(grid, n, &coeffs);
    let v0 = v.slice(0).clone();
    let target = tv_integral(&space, &v, &all, 0, grid.steps());
    let mut tv_errors = Vec::new();
    let mut l1_errors = Vec::new();
    for j in 1..=8 {
        let m = mollify(&v, 2f64.powi(-j), &v0).unwrap();
        tv_errors.push((tv_integral(&space, &m.values, &all, 0, grid.steps()) - target).abs());
        l1_errors.push(m.l1_distance_to_base(&space, &all));
    }
    let monotone = |e: &[f64]| e.windows(2).all(|w| w[1] <= w[0]);
    if !monotone(&tv_errors) || tv_errors[7] > 0.05 * tv_errors[0] {
        problems.push(format!("integrated TV errors {tv_errors:?}"));
    }
    if !monotone(&l1_errors) {
        problems.push(format!("L1 distances {l1_errors:?}"));
    }

    outcome(
        problems.is_empty(),
        format!(
            "ODE order >= {min_order:.2} (C = {max_constant:.3}), L1 margin {worst_l1:.2e}, TV margin {worst_tv:.2e}, \
             TV integral error {:.2e} -> {:.2e}{}",
            tv_errors[0],
            tv_errors[7],
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
        json!({ "order": min_order, "constant": max_constant, "l1": worst_l1, "tv": worst_tv, "tv_errors": tv_errors, "l1_errors": l1_errors }),
    )
}

fn functional_sanity() -> Outcome {
    let mut configs = vec![s2_dirichlet(1.0, 8, 1.0 / 64.0, 1e-6), s2_dirichlet(1.5, 256, 2f64.powi(-6), 1e-6)];
    for j in 2..=7 {
        configs.push(six_vertex_config(1.5, 512, 2f64.powi(-j), 1e-6));
    }
    let mut worst = 0.0f64;
    for cfg in &configs {
        let ext = SpaceTimeFunction::constant_extension(cfg.grid, &cfg.u0);
        let expected = -(-cfg.grid.horizon() / cfg.epsilon).exp_m1() * cfg.tv_u0();
        worst = worst.max((evaluate_f_eps(&ext, cfg).unwrap() - expected).abs());
    }
    outcome(worst <= 1e-12, format!("{} configurations, max deviation {worst:.2e}", configs.len()), json!({ "deviation": worst }))
}

fn certified_minimization(solved: &mut Vec<Solved>) -> Outcome {
    let mut problems = Vec::new();
    let mut data = Vec::new();
    let cases = [
        ("s2 dirichlet", s2_dirichlet(1.5, 256, 2f64.powi(-6), 1e-6)),
        ("six vertex", six_vertex_config(1.5, 256, 2f64.powi(-6), 1e-6)),
    ];
    for (label, cfg) in cases {
        let r = minimize_f_eps(&cfg).unwrap();
        let gap_ok = r.converged && r.dual_gap <= 1e-6 * (1.0 + r.primal_value.abs());
        if !gap_ok {
            problems.push(format!("{label}: gap {:.3e} at value {:.6}", r.dual_gap, r.primal_value));
        }
        let mut spread = 0.0f64;
        for seed in 1..=3 {
            let again = minimize_f_eps_with(&cfg, &SolverOptions { seed: Some(seed), ..Default::default() }).unwrap();
            spread = spread.max(l2_distance(&cfg.space, &cfg.domain, &r.minimizer, &again.minimizer));
        }
        if spread > 1e-5 {
            problems.push(format!("{label}: random restarts differ by {spread:.3e}"));
        }
        data.push(json!({ "case": label, "gap": r.dual_gap, "value": r.primal_value, "spread": spread }));
        solved.push(Solved { label: format!("{label} eps=2^-6 N=256"), cfg, report: r });
    }
    // The S2 minimizer against the analytic flow max(1 - t, 0).
    let s2 = &solved[solved.len() - 2];
    let exact = SpaceTimeFunction::from_fn(s2.cfg.grid, 2, |x, t| if x == 0 { (1.0 - t).max(0.0) } else { 0.0 });
    let to_exact = l2_distance(&s2.cfg.space, &s2.cfg.domain, &s2.report.minimizer, &exact);
    if to_exact > 0.05 {
        problems.push(format!("s2 distance to analytic flow {to_exact:.3e}"));
    }
    let detail = format!(
        "gaps {:.1e} / {:.1e}, restart spread {:.1e} / {:.1e}, S2 distance to analytic flow {to_exact:.2e}",
        data[0]["gap"].as_f64().unwrap(),
        data[1]["gap"].as_f64().unwrap(),
        data[0]["spread"].as_f64().unwrap(),
        data[1]["spread"].as_f64().unwrap(),
    );
    let pass = problems.is_empty();
    outcome(pass, if pass { detail } else { format!("{detail}; {}", problems.join("; ")) }, json!({ "cases": data, "analytic": to_exact }))
}

fn eps_convergence(solved: &mut Vec<Solved>) -> Outcome {
    let mut problems = Vec::new();
    let mut data = Vec::new();
    let mut finals = Vec::new();
    let fixtures = [("s2 dirichlet", s2_dirichlet(1.5, 512, 1.0, 1e-6)), ("six vertex", six_vertex_config(1.5, 512, 1.0, 1e-6))];
    for (label, base) in fixtures {
        let mm = minimizing_movements(&base.space, &base.domain, &base.u0, base.grid).unwrap();
        let slack = Slack::standard(base.tv_u0());
        let mut prev: Option<(f64, f64)> = None;
        let mut dists = Vec::new();
        for j in 2..=7 {
            let cfg = base.with_epsilon(2f64.powi(-j)).unwrap();
            let r = minimize_f_eps(&cfg).unwrap();
            if !r.converged {
                problems.push(format!("{label} eps=2^-{j}: solver did not converge"));
            }
            let d = l2_distance(&cfg.space, &cfg.domain, &r.minimizer, &mm.values);
            let eta = slack.eta(&r.certificate(&cfg));
            if let Some((pd, peta)) = prev {
                if d > pd + 2.0 * eta.max(peta) {
                    problems.push(format!("{label}: distance rises from {pd:.3e} to {d:.3e} at eps=2^-{j}"));
                }
            }
            prev = Some((d, eta));
            dists.push(d);
            solved.push(Solved { label: format!("{label} eps=2^-{j} N=512"), cfg, report: r });
        }
        let last = *dists.last().unwrap();
        if last > 0.05 {
            problems.push(format!("{label}: final distance {last:.3e}"));
        }
        finals.push(last);
        data.push(json!({ "fixture": label, "distances": dists }));
    }
    let detail = format!("final distances {:.2e} (S2), {:.2e} (six vertex), monotone within 2 eta", finals[0], finals[1]);
    let pass = problems.is_empty();
    outcome(pass, if pass { detail } else { format!("{detail}; {}", problems.join("; ")) }, json!(data))
}

fn energy(solved: &[Solved]) -> Outcome {
    let mut problems = Vec::new();
    let mut worst: Option<(f64, String)> = None;
    for s in solved {
        for c in energy_bounds(&s.cfg, &s.report).unwrap() {
            let margin = c.residual + c.tolerance;
            if worst.as_ref().map_or(true, |(m, _)| margin < *m) {
                worst = Some((margin, format!("{} on {}", c.name, s.label)));
            }
            if !c.pass {
                problems.push(format!("{} on {}: residual {:.3e}", c.name, s.label, c.residual));
            }
        }
    }
    // Equality case: the free two-point flow dissipates exactly TV(u₀).
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let flow = two_point_trajectory(1.0, 1.0, 1.0, (1.0, 0.0), grid).unwrap();
    let dissipated = dt_norm_sq(&s2(), &flow.values, &[0, 1], 0, grid.steps());
    if (dissipated - 1.0).abs() > 1e-12 {
        problems.push(format!("analytic dissipation {dissipated}"));
    }
    let (margin, at) = worst.unwrap();
    let detail = format!("{} solutions, smallest margin {margin:.3e} ({at}); analytic dissipation {dissipated}", solved.len());
    let pass = problems.is_empty();
    outcome(pass, if pass { detail } else { format!("{detail}; {}", problems.join("; ")) }, json!({ "margin": margin, "dissipation": dissipated }))
}

fn batteries(solved: &[Solved], seed: u64) -> Outcome {
    let mut problems = Vec::new();
    let mut data = Vec::new();
    for s in solved.iter().filter(|s| s.label.contains("eps=2^-6")) {
        let c = CandidateSolution::from_relax(&s.cfg, &s.report).unwrap();
        let slack = Slack::standard(s.cfg.tv_u0());
        let var = variational_battery(&c, 50, seed, slack).unwrap();
        let par = parabolic_battery(&c, 50, seed ^ 0x5eed, slack).unwrap();
        for f in fails(&var).into_iter().chain(fails(&par)) {
            problems.push(format!("{}: {f}", s.label));
        }
        let min = |r: &VerificationReport| r.checks.iter().map(|c| c.residual).fold(f64::INFINITY, f64::min);

        // Minimality along the segment towards the datum extension.
        let ext = SpaceTimeFunction::constant_extension(s.cfg.grid, &s.cfg.u0);
        let phi = ext.zip_map(&s.report.minimizer, |a, b| a - b).unwrap();
        let zeta = vec![1.0; s.cfg.grid.steps() + 1];
        let minimality = minimality_residual(&s.report.minimizer, &phi, &zeta, &s.cfg).unwrap();
        let bound = -s.cfg.epsilon * s.report.scaled_gap;
        if minimality < bound {
            problems.push(format!("{}: minimality residual {minimality:.3e} below {bound:.3e}", s.label));
        }
        data.push(json!({
            "case": s.label,
            "varineq_min": min(&var),
            "parabolic_min": min(&par),
            "minimality": minimality,
            "eta": slack.eta(&c.certificate),
        }));
    }
    let detail = data
        .iter()
        .map(|d| {
            format!(
                "{}: varineq min {:.2e}, parabolic min {:.2e}",
                d["case"].as_str().unwrap(),
                d["varineq_min"].as_f64().unwrap(),
                d["parabolic_min"].as_f64().unwrap()
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    let pass = problems.is_empty() && data.len() >= 2;
    outcome(pass, if pass { detail } else { format!("{detail}; {}", problems.join("; ")) }, json!(data))
}

fn comparison(seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut problems = Vec::new();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_eta = 0.0;
    let mut run = |cfg: &RelaxConfig, lo: &VertexFunction, hi: &VertexFunction, label: &str, problems: &mut Vec<String>| {
        let out = comparison_test(cfg, lo, hi, &SolverOptions::default(), Slack::pointwise(cfg)).unwrap();
        let order = &out.report.checks[0];
        if order.lhs > worst_excess {
            worst_excess = order.lhs;
            worst_eta = order.tolerance;
        }
        problems.extend(fails(&out.report).into_iter().map(|f| format!("{label}: {f}")));
        order.lhs
    };
    let base = s2_dirichlet(1.5, 256, 2f64.powi(-6), 1e-6);
    run(&base, &VertexFunction::new(vec![1.0, 0.0]), &VertexFunction::new(vec![2.0, 0.0]), "s2", &mut problems);
    let mut excesses = Vec::new();
    for i in 0..20 {
        let space = random_graph(6, &mut rng);
        let domain = Domain::new(&space, &[1, 2, 3, 4], &[0, 1, 2, 3, 4, 5]).unwrap();
        let u0 = VertexFunction::new((0..6).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let v0 = VertexFunction::new((0..6).map(|x| u0[x] + if rng.gen_bool(0.5) { rng.gen_range(0.0..0.5) } else { 0.0 }).collect());
        let cfg = RelaxConfig::new(space, domain, TimeGrid::new(1.0, 128).unwrap(), u0.clone(), 2f64.powi(-5), 1e-6).unwrap();
        excesses.push(run(&cfg, &u0, &v0, &format!("pair {i}"), &mut problems));
    }
    let detail = format!("21 pairs, largest excess {worst_excess:.2e} against tolerance {worst_eta:.2e}");
    let pass = problems.is_empty();
    outcome(pass, if pass { detail } else { format!("{detail}; {}", problems.join("; ")) }, json!({ "excess": excesses }))
}

fn regularity(solved: &[Solved]) -> Outcome {
    let mut problems = Vec::new();
    let mut count = 0;
    let mut worst: Option<(f64, String)> = None;
    let mut inspect = |label: &str, c: &CandidateSolution, slack: Slack, problems: &mut Vec<String>| {
        let mut report = initial_condition_check(c, slack);
        report.extend(regularity_and_energy_check(c, slack));
        for ch in &report.checks {
            let margin = ch.residual + ch.tolerance;
            if worst.as_ref().map_or(true, |(m, _)| margin < *m) {
                worst = Some((margin, format!("{} on {label}", ch.name)));
            }
        }
        problems.extend(fails(&report).into_iter().map(|f| format!("{label}: {f}")));
    };
    for s in solved {
        let c = CandidateSolution::from_relax(&s.cfg, &s.report).unwrap();
        inspect(&s.label, &c, Slack::standard(s.cfg.tv_u0()), &mut problems);
        count += 1;
    }
    for (label, cfg) in [("s2 dirichlet", s2_dirichlet(1.5, 512, 1.0, 1e-6)), ("six vertex", six_vertex_config(1.5, 512, 1.0, 1e-6))] {
        let mm = minimizing_movements(&cfg.space, &cfg.domain, &cfg.u0, cfg.grid).unwrap();
        let c = CandidateSolution::new(
            cfg.space.clone(),
            cfg.domain.clone(),
            cfg.u0.clone(),
            mm.values,
            Provenance::Oracle,
            Certificate::exact(cfg.grid.dt()),
        )
        .unwrap();
        inspect(&format!("{label} minimizing movements"), &c, Slack::standard(cfg.tv_u0()), &mut problems);
        count += 1;
    }
    let (margin, at) = worst.unwrap();
    let detail = format!("{count} solutions, smallest margin {margin:.3e} ({at})");
    let pass = problems.is_empty();
    outcome(pass, if pass { detail } else { format!("{detail}; {}", problems.join("; ")) }, json!({ "margin": margin }))
}

struct Suite {
    outcomes: Vec<(usize, &'static str, Outcome, Duration)>,
}

impl Suite {
    fn report(&self) -> String {
        let data: Vec<Value> =
            self.outcomes.iter().map(|(id, name, o, _)| json!({ "criterion": id, "name": name, "pass": o.pass, "data": o.data })).collect();
        serde_json::to_string_pretty(&data).unwrap()
    }
}

fn run_suite(seed: u64) -> Suite {
    let mut outcomes = Vec::new();
    let mut timed = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        outcomes.push((id, name, o, start.elapsed()));
    };
    let mut solved = Vec::new();
    timed(1, "TV duality", &mut || tv_duality(seed));
    timed(2, "mollification", &mut || mollification(seed + 1));
    timed(3, "relaxed functional on the datum extension", &mut functional_sanity);
    timed(4, "certified minimization", &mut || certified_minimization(&mut solved));
    timed(6, "epsilon convergence", &mut || eps_convergence(&mut solved));
    timed(5, "energy bounds", &mut || energy(&solved));
    timed(7, "variational and parabolic batteries", &mut || batteries(&solved, seed + 7));
    timed(8, "comparison principle", &mut || comparison(seed + 8));
    timed(9, "initial condition and regularity", &mut || regularity(&solved));
    outcomes.sort_by_key(|o| o.0);
    Suite { outcomes }
}

fn main() {
    let first = run_suite(SEED);
    let start = Instant::now();
    let second = run_suite(SEED);
    let identical = first.report() == second.report();
    let determinism = outcome(
        identical,
        format!("second run of criteria 1-9 {} the first report byte for byte", if identical { "reproduces" } else { "differs from" }),
        Value::Null,
    );

    let mut all = true;
    for (id, name, o, elapsed) in first.outcomes.iter().chain(std::iter::once(&(10, "determinism", determinism, start.elapsed()))) {
        all &= o.pass;
        println!(
            "criterion {id:>2} [{}] {name}: {} ({:.2} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    if !all {
        eprintln!("at least one acceptance criterion failed");
        std::process::exit(1);
    }
}
