use crate::bv::{mask, tv_masked, VertexFunction};
use crate::error::{Error, Result};
use crate::mms::{Domain, MetricMeasureSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::NonpositiveParameter(format!("T = {horizon}")));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|k| self.node(k))
    }

    /// Index of the node equal to `t` up to rounding.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt()).round();
        if k < 0.0 || k > self.steps as f64 {
            return None;
        }
        let k = k as usize;
        ((self.node(k) - t).abs() <= 1e-9 * self.horizon.max(1.0)).then_some(k)
    }
}

/// Values on vertices × time nodes, read as piecewise linear in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeFunction {
    grid: TimeGrid,
    slices: Vec<VertexFunction>,
}

impl SpaceTimeFunction {
    pub fn new(grid: TimeGrid, slices: Vec<VertexFunction>) -> Result<Self> {
        if slices.len() != grid.steps() + 1 {
            return Err(Error::GridMismatch(format!(
                "{} slices for N = {}",
                slices.len(),
                grid.steps()
            )));
        }
        let n = slices[0].len();
        for s in &slices {
            s.check_len(n)?;
        }
        Ok(SpaceTimeFunction { grid, slices })
    }

    /// `v(t) = u₀` for every node.
    pub fn constant_extension(grid: TimeGrid, u0: &VertexFunction) -> Self {
        SpaceTimeFunction { grid, slices: vec![u0.clone(); grid.steps() + 1] }
    }

    pub fn from_fn(grid: TimeGrid, n: usize, f: impl Fn(usize, f64) -> f64) -> Self {
        let slices = grid
            .nodes()
            .map(|t| VertexFunction::new((0..n).map(|x| f(x, t)).collect()))
            .collect();
        SpaceTimeFunction { grid, slices }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn vertex_count(&self) -> usize {
        self.slices[0].len()
    }

    pub fn slice(&self, k: usize) -> &VertexFunction {
        &self.slices[k]
    }

    pub fn slices(&self) -> &[VertexFunction] {
        &self.slices
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut VertexFunction {
        &mut self.slices[k]
    }

    pub fn at(&self, x: usize, k: usize) -> f64 {
        self.slices[k][x]
    }

    pub fn zip_map(&self, other: &SpaceTimeFunction, f: impl Fn(f64, f64) -> f64 + Copy) -> Result<Self> {
        self.check_same_shape(other)?;
        let slices = self.slices.iter().zip(&other.slices).map(|(a, b)| a.zip_map(b, f)).collect();
        Ok(SpaceTimeFunction { grid: self.grid, slices })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        SpaceTimeFunction { grid: self.grid, slices: self.slices.iter().map(|s| s.map(f)).collect() }
    }

    pub fn check_same_shape(&self, other: &SpaceTimeFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "(T, N) = ({}, {}) vs ({}, {})",
                self.grid.horizon(),
                self.grid.steps(),
                other.grid.horizon(),
                other.grid.steps()
            )));
        }
        if self.vertex_count() != other.vertex_count() {
            return Err(Error::DimensionMismatch { expected: self.vertex_count(), got: other.vertex_count() });
        }
        Ok(())
    }
}

/// Difference quotients `D_k = (v_k − v_{k−1}) / Δt`; entry `k − 1` belongs to interval `k`.
pub fn time_derivative(v: &SpaceTimeFunction) -> Vec<VertexFunction> {
    let dt = v.grid().dt();
    v.slices().windows(2).map(|w| w[1].zip_map(&w[0], |b, a| (b - a) / dt)).collect()
}

fn check_range(grid: TimeGrid, k1: usize, k2: usize) {
    assert!(k1 <= k2 && k2 <= grid.steps(), "node range {k1}..{k2} outside grid");
}

/// `∫_{t_{k1}}^{t_{k2}} ∫_S |∂_t v|² dμ dt`.
pub fn dt_norm_sq(space: &MetricMeasureSpace, v: &SpaceTimeFunction, set: &[usize], k1: usize, k2: usize) -> f64 {
    check_range(v.grid(), k1, k2);
    let dt = v.grid().dt();
    (k1 + 1..=k2)
        .map(|k| {
            set.iter()
                .map(|&x| {
                    let d = (v.at(x, k) - v.at(x, k - 1)) / dt;
                    space.mu(x) * d * d
                })
                .sum::<f64>()
                * dt
        })
        .sum()
}

/// `∫_0^Δt |a + (b − a) s/Δt| ds`.
pub fn linear_abs_integral(a: f64, b: f64, dt: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * dt * (a.abs() + b.abs())
    } else {
        0.5 * dt * (a * a + b * b) / (a.abs() + b.abs())
    }
}

/// Exact `∫∫ |v| dμ dt` over `S × [t_{k1}, t_{k2}]` for the piecewise linear reading of `v`.
pub fn l1_norm_st(space: &MetricMeasureSpace, v: &SpaceTimeFunction, set: &[usize], k1: usize, k2: usize) -> f64 {
    check_range(v.grid(), k1, k2);
    let dt = v.grid().dt();
    (k1 + 1..=k2)
        .map(|k| set.iter().map(|&x| space.mu(x) * linear_abs_integral(v.at(x, k - 1), v.at(x, k), dt)).sum::<f64>())
        .sum()
}

/// Exact `∫∫ v² dμ dt` over `S × [t_{k1}, t_{k2}]`.
pub fn l2_norm_sq_st(space: &MetricMeasureSpace, v: &SpaceTimeFunction, set: &[usize], k1: usize, k2: usize) -> f64 {
    check_range(v.grid(), k1, k2);
    let dt = v.grid().dt();
    (k1 + 1..=k2)
        .map(|k| {
            set.iter()
                .map(|&x| {
                    let (a, b) = (v.at(x, k - 1), v.at(x, k));
                    space.mu(x) * (a * a + a * b + b * b)
                })
                .sum::<f64>()
                * dt
                / 3.0
        })
        .sum()
}

/// `∫_{t_{k1}}^{t_{k2}} TV(v(t); S) dt` by left-endpoint quadrature.
pub fn tv_integral(space: &MetricMeasureSpace, v: &SpaceTimeFunction, set: &[usize], k1: usize, k2: usize) -> f64 {
    check_range(v.grid(), k1, k2);
    let m = mask(space.len(), set);
    let dt = v.grid().dt();
    (k1..k2).map(|k| dt * tv_masked(space, v.slice(k).values(), &m)).sum()
}

/// `TV(v_k; S)` for every node.
pub fn tv_series(space: &MetricMeasureSpace, v: &SpaceTimeFunction, set: &[usize]) -> Vec<f64> {
    let m = mask(space.len(), set);
    v.slices().iter().map(|s| tv_masked(space, s.values(), &m)).collect()
}

/// `Σ_k Δt (‖v_k‖_{L¹(Ω*)} + TV(v_k; Ω*)) + ‖∂_t v‖_{L²(Ω*_T)}`.
pub fn k_norm(space: &MetricMeasureSpace, v: &SpaceTimeFunction, domain: &Domain) -> f64 {
    let set = domain.omega_star();
    let n = v.grid().steps();
    let dt = v.grid().dt();
    let l1: f64 = (0..n).map(|k| dt * crate::bv::l1_norm(space, v.slice(k), set)).sum();
    l1 + tv_integral(space, v, set, 0, n) + dt_norm_sq(space, v, set, 0, n).sqrt()
}

/// Weights of the one-interval update `M_k = e^{−b} M_{k−1} + α₀ v_{k−1} + α₁ v_k`
/// with `b = Δt/h`, exact for `v` linear on the interval.
pub fn mollifier_weights(b: f64) -> (f64, f64, f64) {
    let decay = (-b).exp();
    let one_minus = -(-b).exp_m1();
    let alpha1 = if b < 1e-2 {
        b * (0.5 - b * (1.0 / 6.0 - b * (1.0 / 24.0 - b * (1.0 / 120.0 - b / 720.0))))
    } else {
        1.0 - one_minus / b
    };
    (decay, one_minus - alpha1, alpha1)
}

fn check_h(h: f64, horizon: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 && h <= horizon {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mollification parameter h = {h} outside (0, {horizon}]")))
    }
}

/// Scalar mollification of a node series.
pub fn mollify_series(series: &[f64], dt: f64, h: f64, v0: f64) -> Vec<f64> {
    let (decay, a0, a1) = mollifier_weights(dt / h);
    let mut out = Vec::with_capacity(series.len());
    out.push(v0);
    for k in 1..series.len() {
        let prev = out[k - 1];
        out.push(decay * prev + a0 * series[k - 1] + a1 * series[k]);
    }
    out
}

/// `[v]_h^{v₀}(t) = e^{−t/h} v₀ + (1/h) ∫_0^t e^{(s−t)/h} v(s) ds` at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedFunction {
    pub base: SpaceTimeFunction,
    pub h: f64,
    pub anchor: VertexFunction,
    pub values: SpaceTimeFunction,
}

pub fn mollify(v: &SpaceTimeFunction, h: f64, v0: &VertexFunction) -> Result<MollifiedFunction> {
    let grid = v.grid();
    check_h(h, grid.horizon())?;
    v0.check_len(v.vertex_count())?;
    let (decay, a0, a1) = mollifier_weights(grid.dt() / h);
    let mut slices = Vec::with_capacity(grid.steps() + 1);
    slices.push(v0.clone());
    for k in 1..=grid.steps() {
        let prev = &slices[k - 1];
        let next = (0..v.vertex_count())
            .map(|x| decay * prev[x] + a0 * v.at(x, k - 1) + a1 * v.at(x, k))
            .collect();
        slices.push(VertexFunction::new(next));
    }
    Ok(MollifiedFunction {
        base: v.clone(),
        h,
        anchor: v0.clone(),
        values: SpaceTimeFunction { grid, slices },
    })
}

/// On `[t_{k−1}, t_k]`, with `τ = t − t_{k−1}`, the mollification is exactly
/// `p(τ) + E e^{−τ/h}` where `p(τ) = a − ch + cτ` follows the linear piece `a + cτ` of `v`.
struct ExpPiece {
    p0: f64,
    c: f64,
    e: f64,
    h: f64,
    len: f64,
}

impl ExpPiece {
    fn eval(&self, t: f64) -> f64 {
        self.p0 + self.c * t + self.e * (-t / self.h).exp()
    }

    fn integral(&self, lo: f64, hi: f64) -> f64 {
        // Split off the exponential so that its cancellation is done in one expm1.
        let poly = self.p0 * (hi - lo) + 0.5 * self.c * (hi * hi - lo * lo);
        let exp = -self.h * self.e * (-lo / self.h).exp() * (-(hi - lo) / self.h).exp_m1();
        poly + exp
    }

    fn abs_integral(&self) -> f64 {
        let mut cuts = vec![0.0];
        if self.e != 0.0 {
            let ratio = self.c * self.h / self.e;
            if ratio > 0.0 {
                let tc = -self.h * ratio.ln();
                if tc > 0.0 && tc < self.len {
                    cuts.push(tc);
                }
            }
        }
        cuts.push(self.len);
        let mut points = Vec::with_capacity(5);
        for w in cuts.windows(2) {
            points.push(w[0]);
            let (fa, fb) = (self.eval(w[0]), self.eval(w[1]));
            if fa * fb < 0.0 {
                points.push(self.root(w[0], w[1], fa));
            }
        }
        points.push(self.len);
        points.windows(2).map(|w| self.integral(w[0], w[1]).abs()).sum()
    }

    fn root(&self, mut lo: f64, mut hi: f64, flo: f64) -> f64 {
        let s = flo.signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) * s > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn square_integral(&self) -> f64 {
        let (p0, c, e, h, d) = (self.p0, self.c, self.e, self.h, self.len);
        let p1 = p0 + c * d;
        let b = d / h;
        let one_minus = -(-b).exp_m1();
        let poly = d * (p0 * p0 + p0 * p1 + p1 * p1) / 3.0;
        // ∫ τ e^{−τ/h} = h² (1 − e^{−b}(1 + b))
        let tau_exp = h * h * (one_minus - b * (-b).exp());
        let cross = 2.0 * e * (p0 * h * one_minus + c * tau_exp);
        let sq = e * e * 0.5 * h * (-(-2.0 * b).exp_m1());
        poly + cross + sq
    }
}

impl MollifiedFunction {
    fn piece(&self, x: usize, k: usize, subtract_base: bool) -> ExpPiece {
        let dt = self.values.grid().dt();
        let a = self.base.at(x, k - 1);
        let c = (self.base.at(x, k) - a) / dt;
        let e = self.values.at(x, k - 1) - a + c * self.h;
        let p0 = if subtract_base { -c * self.h } else { a - c * self.h };
        let c = if subtract_base { 0.0 } else { c };
        ExpPiece { p0, c, e, h: self.h, len: dt }
    }

    /// Exact `∫_0^{t_{k0}} ∫_S |[v]_h| dμ dt`.
    pub fn l1_norm(&self, space: &MetricMeasureSpace, set: &[usize], k0: usize) -> f64 {
        (1..=k0)
            .map(|k| set.iter().map(|&x| space.mu(x) * self.piece(x, k, false).abs_integral()).sum::<f64>())
            .sum()
    }

    /// Exact `∫_0^{t_{k0}} ∫_S [v]_h² dμ dt`.
    pub fn l2_norm_sq(&self, space: &MetricMeasureSpace, set: &[usize], k0: usize) -> f64 {
        (1..=k0)
            .map(|k| set.iter().map(|&x| space.mu(x) * self.piece(x, k, false).square_integral()).sum::<f64>())
            .sum()
    }

    /// Exact `‖[v]_h − v‖_{L¹(S × (0,T))}`.
    pub fn l1_distance_to_base(&self, space: &MetricMeasureSpace, set: &[usize]) -> f64 {
        let n = self.values.grid().steps();
        (1..=n)
            .map(|k| set.iter().map(|&x| space.mu(x) * self.piece(x, k, true).abs_integral()).sum::<f64>())
            .sum()
    }
}

/// Largest `L²(S)` norm over interior nodes of `∂_t[v]_h + ([v]_h − v)/h`,
/// with the time derivative taken by centered differences.
pub fn mollify_ode_residual(space: &MetricMeasureSpace, m: &MollifiedFunction, set: &[usize]) -> f64 {
    let grid = m.values.grid();
    let dt = grid.dt();
    (1..grid.steps())
        .map(|k| {
            set.iter()
                .map(|&x| {
                    let d = (m.values.at(x, k + 1) - m.values.at(x, k - 1)) / (2.0 * dt);
                    let r = d + (m.values.at(x, k) - m.base.at(x, k)) / m.h;
                    space.mu(x) * r * r
                })
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}
