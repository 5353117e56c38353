use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::mms::MetricMeasureSpace;

/// Real function on the vertices of a space, indexed by vertex number.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VertexFunction(pub Vec<f64>);

impl VertexFunction {
    pub fn new(values: Vec<f64>) -> Self {
        VertexFunction(values)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        VertexFunction(vec![c; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.0.len() });
        }
        if let Some(x) = self.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at vertex #{x}")));
        }
        Ok(())
    }

    pub fn zip_map(&self, other: &VertexFunction, f: impl Fn(f64, f64) -> f64) -> VertexFunction {
        VertexFunction(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> VertexFunction {
        VertexFunction(self.0.iter().map(|&a| f(a)).collect())
    }
}

impl Index<usize> for VertexFunction {
    type Output = f64;
    fn index(&self, x: usize) -> &f64 {
        &self.0[x]
    }
}

impl IndexMut<usize> for VertexFunction {
    fn index_mut(&mut self, x: usize) -> &mut f64 {
        &mut self.0[x]
    }
}

/// Vertex subset as a membership mask.
pub fn mask(n: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &x in set {
        m[x] = true;
    }
    m
}

/// Indices of the edges with both endpoints in `set`.
pub fn edges_inside(space: &MetricMeasureSpace, set: &[bool]) -> Vec<usize> {
    space
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| set[e.a] && set[e.b])
        .map(|(i, _)| i)
        .collect()
}

pub fn l1_norm(space: &MetricMeasureSpace, u: &VertexFunction, set: &[usize]) -> f64 {
    set.iter().map(|&x| space.mu(x) * u[x].abs()).sum()
}

pub fn l2_norm_sq(space: &MetricMeasureSpace, u: &VertexFunction, set: &[usize]) -> f64 {
    set.iter().map(|&x| space.mu(x) * u[x] * u[x]).sum()
}

pub fn inner(space: &MetricMeasureSpace, u: &VertexFunction, v: &VertexFunction, set: &[usize]) -> f64 {
    set.iter().map(|&x| space.mu(x) * u[x] * v[x]).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TVValue {
    pub value: f64,
    pub region: Vec<usize>,
}

/// Sum of `w_xy |u(x) − u(y)|` over the edges with both endpoints in `region`.
pub fn total_variation(space: &MetricMeasureSpace, u: &VertexFunction, region: &[usize]) -> TVValue {
    let m = mask(space.len(), region);
    TVValue { value: tv_masked(space, u.values(), &m), region: region.to_vec() }
}

pub(crate) fn tv_masked(space: &MetricMeasureSpace, u: &[f64], m: &[bool]) -> f64 {
    space
        .edges()
        .iter()
        .filter(|e| m[e.a] && m[e.b])
        .map(|e| e.weight * (u[e.a] - u[e.b]).abs())
        .sum()
}

/// Edge field with values on both orientations of every edge.
///
/// `forward[e]` is `F(a, b)` and `backward[e]` is `F(b, a)` for edge `e = {a, b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    forward: Vec<f64>,
    backward: Vec<f64>,
    support: Vec<usize>,
}

impl Derivation {
    pub fn new(space: &MetricMeasureSpace, forward: Vec<f64>, backward: Vec<f64>, support: &[usize]) -> Result<Self> {
        let m = space.edges().len();
        for v in [&forward, &backward] {
            if v.len() != m {
                return Err(Error::DimensionMismatch { expected: m, got: v.len() });
            }
        }
        let inside = mask(space.len(), support);
        for (i, e) in space.edges().iter().enumerate() {
            if !(inside[e.a] && inside[e.b]) && (forward[i] != 0.0 || backward[i] != 0.0) {
                return Err(Error::SupportViolation(format!("derivation nonzero on edge {i} outside its support")));
            }
        }
        Ok(Derivation { forward, backward, support: support.to_vec() })
    }

    /// Antisymmetric field from its values `F(a, b)` on the stored orientation.
    pub fn antisymmetric(space: &MetricMeasureSpace, field: Vec<f64>, support: &[usize]) -> Result<Self> {
        let backward = field.iter().map(|f| -f).collect();
        Derivation::new(space, field, backward, support)
    }

    pub fn zero(space: &MetricMeasureSpace) -> Self {
        let m = space.edges().len();
        Derivation { forward: vec![0.0; m], backward: vec![0.0; m], support: Vec::new() }
    }

    pub fn forward(&self) -> &[f64] {
        &self.forward
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn bound(&self) -> f64 {
        self.forward.iter().chain(&self.backward).fold(0.0, |a, f| a.max(f.abs()))
    }

    fn check_antisymmetric(&self) -> Result<()> {
        for (edge, (&forward, &backward)) in self.forward.iter().zip(&self.backward).enumerate() {
            if forward != -backward {
                return Err(Error::AntisymmetryViolated { edge, forward, backward });
            }
        }
        Ok(())
    }
}

/// `div F(x) = (1/μ(x)) Σ_{y~x} w_xy F(x, y)`.
pub fn divergence(space: &MetricMeasureSpace, f: &Derivation) -> Result<VertexFunction> {
    f.check_antisymmetric()?;
    let mut div = vec![0.0; space.len()];
    for (i, e) in space.edges().iter().enumerate() {
        div[e.a] += e.weight * f.forward[i];
        div[e.b] += e.weight * f.backward[i];
    }
    for (x, d) in div.iter_mut().enumerate() {
        *d /= space.mu(x);
    }
    Ok(VertexFunction(div))
}

/// `∫ u div F dμ`.
pub fn pairing(space: &MetricMeasureSpace, u: &VertexFunction, f: &Derivation) -> Result<f64> {
    let div = divergence(space, f)?;
    Ok((0..space.len()).map(|x| space.mu(x) * u[x] * div[x]).sum())
}

/// Maximizer of the pairing among derivations bounded by 1 and supported in `region`.
pub fn sign_field(space: &MetricMeasureSpace, u: &VertexFunction, region: &[usize]) -> Derivation {
    let m = mask(space.len(), region);
    let field = space
        .edges()
        .iter()
        .map(|e| {
            if m[e.a] && m[e.b] {
                let d = u[e.a] - u[e.b];
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            } else {
                0.0
            }
        })
        .collect();
    Derivation::antisymmetric(space, field, region).expect("sign field respects its support")
}

/// Total variation through its dual representation, evaluated as the pairing
/// with the sign field.
pub fn dual_total_variation(space: &MetricMeasureSpace, u: &VertexFunction, region: &[usize]) -> TVValue {
    let f = sign_field(space, u, region);
    let value = pairing(space, u, &f).expect("sign field is antisymmetric");
    TVValue { value, region: region.to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mms::{build_space, EdgeSpec};

    fn s2() -> MetricMeasureSpace {
        build_space(&[("a".into(), 1.0), ("b".into(), 1.0)], &[EdgeSpec::new("a", "b", 1.0, 1.0)]).unwrap()
    }

    #[test]
    fn tv_examples() {
        let s = s2();
        let u = VertexFunction::new(vec![1.0, 0.0]);
        assert_eq!(total_variation(&s, &u, &[0, 1]).value, 1.0);
        assert_eq!(total_variation(&s, &VertexFunction::constant(2, 4.0), &[0, 1]).value, 0.0);
        assert_eq!(total_variation(&s, &VertexFunction::new(vec![3.0, 1.0]), &[0]).value, 0.0);
    }

    #[test]
    fn divergence_and_pairing() {
        let s = s2();
        let f = Derivation::antisymmetric(&s, vec![1.0], &[0, 1]).unwrap();
        let div = divergence(&s, &f).unwrap();
        assert_eq!(div.values(), &[1.0, -1.0]);
        assert_eq!(pairing(&s, &VertexFunction::new(vec![1.0, 0.0]), &f).unwrap(), 1.0);
        let bad = Derivation::new(&s, vec![1.0], vec![0.5], &[0, 1]).unwrap();
        assert!(matches!(divergence(&s, &bad), Err(Error::AntisymmetryViolated { .. })));
        assert!(matches!(
            Derivation::antisymmetric(&s, vec![1.0], &[0]),
            Err(Error::SupportViolation(_))
        ));
    }

    #[test]
    fn dual_matches_primal_on_s2() {
        let s = s2();
        let u = VertexFunction::new(vec![1.0, 0.0]);
        assert_eq!(dual_total_variation(&s, &u, &[0, 1]).value, 1.0);
        assert_eq!(sign_field(&s, &u, &[0, 1]).forward(), &[1.0]);
    }
}
