//! Phase space, Poisson structures, constraint sets, and the Jacobiator.

use std::collections::HashSet;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::error::DiracError;
use crate::linalg::RatMatrix;
use crate::poly::{parse_poly, rational_from_decimal, rational_from_f64, rational_to_f64, PolyExpr, Rational};
use crate::polymat::PolyMatrix;

/// Ordered, named coordinates `z = (z_1, …, z_N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSpace {
    names: Arc<[String]>,
}

impl PhaseSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, DiracError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(DiracError::InvalidSpace("no variables".into()));
        }
        let mut seen = HashSet::new();
        for n in &names {
            let valid = n.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid {
                return Err(DiracError::InvalidSpace(format!("`{n}` is not an identifier")));
            }
            if !seen.insert(n.as_str()) {
                return Err(DiracError::InvalidSpace(format!("duplicate variable `{n}`")));
            }
        }
        Ok(PhaseSpace { names: names.into() })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn parse(&self, src: &str) -> Result<PolyExpr, crate::poly::ParseError> {
        parse_poly(src, &self.names)
    }

    pub fn var(&self, index: usize) -> PolyExpr {
        PolyExpr::var(self.dim(), index)
    }

    pub fn fmt_poly(&self, p: &PolyExpr) -> String {
        p.to_string_with(&self.names)
    }
}

/// Antisymmetric matrix field `J(z)` with polynomial entries.
///
/// Jacobi is deliberately not an invariant: see [`symbolic_jacobiator`].
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonStructure {
    space: PhaseSpace,
    entries: PolyMatrix,
}

impl PoissonStructure {
    /// Builds `J` from its strict upper triangle (0-based `(i, j)`, `i < j`);
    /// omitted entries are zero.
    pub fn build<S: AsRef<str>>(
        space: PhaseSpace,
        upper: impl IntoIterator<Item = ((usize, usize), S)>,
    ) -> Result<Self, DiracError> {
        let n = space.dim();
        let mut rows = vec![vec![PolyExpr::zero(n); n]; n];
        for ((i, j), src) in upper {
            if i >= j || j >= n {
                return Err(DiracError::Shape(format!(
                    "upper-triangle entry ({},{}) out of range for N = {n}",
                    i + 1,
                    j + 1
                )));
            }
            let p = space.parse(src.as_ref()).map_err(|e| DiracError::Parse {
                location: format!("poisson entry ({},{})", i + 1, j + 1),
                source: e,
            })?;
            rows[j][i] = -&p;
            rows[i][j] = p;
        }
        let entries = PolyMatrix::from_rows(n, rows)?;
        Ok(PoissonStructure { space, entries })
    }

    /// Wraps a full matrix, rejecting it unless it is structurally antisymmetric.
    pub fn from_matrix(space: PhaseSpace, entries: PolyMatrix) -> Result<Self, DiracError> {
        let n = space.dim();
        if entries.shape() != (n, n) || entries.nvars() != n {
            return Err(DiracError::Shape(format!("expected {n}x{n} matrix over {n} variables")));
        }
        if let Some((row, col)) = entries.antisymmetry_violation() {
            return Err(DiracError::Antisymmetry { row, col });
        }
        Ok(PoissonStructure { space, entries })
    }

    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &PolyMatrix {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> &PolyExpr {
        &self.entries[(i, j)]
    }

    /// `{F, G} = ∇F · J ∇G`.
    pub fn bracket(&self, f: &PolyExpr, g: &PolyExpr) -> Result<PolyExpr, DiracError> {
        let n = self.dim();
        if f.nvars() != n || g.nvars() != n {
            return Err(DiracError::SpaceMismatch);
        }
        let df = f.gradient();
        let dg = g.gradient();
        let mut acc = PolyExpr::zero(n);
        for (i, dfi) in df.iter().enumerate() {
            if dfi.is_zero() {
                continue;
            }
            for (j, dgj) in dg.iter().enumerate() {
                let jij = self.entry(i, j);
                if dgj.is_zero() || jij.is_zero() {
                    continue;
                }
                acc = &acc + &(&(dfi * jij) * dgj);
            }
        }
        Ok(acc)
    }
}

/// Constraint functions `Φ_n` and their Jacobian `Q̂_ni = ∂Φ_n/∂z_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    space: PhaseSpace,
    phis: Vec<PolyExpr>,
    gradients: PolyMatrix,
}

impl ConstraintSet {
    pub fn new(space: PhaseSpace, phis: Vec<PolyExpr>) -> Result<Self, DiracError> {
        let n = space.dim();
        if phis.iter().any(|p| p.nvars() != n) {
            return Err(DiracError::SpaceMismatch);
        }
        let gradients = PolyMatrix::from_fn(phis.len(), n, n, |m, i| phis[m].diff(i).expect("index in range"));
        Ok(ConstraintSet { space, phis, gradients })
    }

    pub fn parse<S: AsRef<str>>(space: PhaseSpace, sources: &[S]) -> Result<Self, DiracError> {
        let phis = sources
            .iter()
            .enumerate()
            .map(|(k, s)| {
                space.parse(s.as_ref()).map_err(|e| DiracError::Parse {
                    location: format!("constraint {}", k + 1),
                    source: e,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(space, phis)
    }

    pub fn empty(space: PhaseSpace) -> Self {
        Self::new(space, Vec::new()).expect("empty set is valid")
    }

    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phis.is_empty()
    }

    pub fn phis(&self) -> &[PolyExpr] {
        &self.phis
    }

    /// The Jacobian `Q̂` (M×N).
    pub fn jacobian(&self) -> &PolyMatrix {
        &self.gradients
    }

    pub fn values_f64(&self, z: &[f64]) -> Result<Vec<f64>, DiracError> {
        Ok(self.phis.iter().map(|p| p.eval_f64(z)).collect::<Result<_, _>>()?)
    }

    /// The construction only uses `M ≤ N`; the classical bound is `M < N − 2`.
    pub fn dimension_warning(&self) -> Option<String> {
        let (m, n) = (self.len(), self.space.dim());
        (m > 0 && m + 2 >= n)
            .then(|| format!("{m} constraints on a {n}-dimensional phase space (M < N - 2 does not hold)"))
    }
}

/// Totally antisymmetric rank-3 tensor stored by its `i < j < k` components.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobiator<T> {
    dim: usize,
    components: Vec<((usize, usize, usize), T)>,
}

impl<T> Jacobiator<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Independent components `(i, j, k)` with `i < j < k`.
    pub fn components(&self) -> &[((usize, usize, usize), T)] {
        &self.components
    }

    fn position(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        self.components.iter().position(|(idx, _)| *idx == (i, j, k))
    }
}

impl<T: Clone + std::ops::Neg<Output = T>> Jacobiator<T> {
    /// Component for any index order; `None` when two indices coincide.
    pub fn get(&self, i: usize, j: usize, k: usize) -> Option<T> {
        if i == j || j == k || i == k {
            return None;
        }
        let mut idx = [i, j, k];
        let mut sign = false;
        // bubble sort tracking parity
        for a in 0..3 {
            for b in 0..2 - a {
                if idx[b] > idx[b + 1] {
                    idx.swap(b, b + 1);
                    sign = !sign;
                }
            }
        }
        let v = self.components[self.position(idx[0], idx[1], idx[2])?].1.clone();
        Some(if sign { -v } else { v })
    }
}

impl Jacobiator<PolyExpr> {
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|(_, p)| p.is_zero())
    }

    pub fn first_nonzero(&self) -> Option<&((usize, usize, usize), PolyExpr)> {
        self.components.iter().find(|(_, p)| !p.is_zero())
    }

    pub fn eval_f64(&self, z: &[f64]) -> Result<Jacobiator<f64>, DiracError> {
        let components = self
            .components
            .iter()
            .map(|(idx, p)| Ok((*idx, p.eval_f64(z)?)))
            .collect::<Result<_, DiracError>>()?;
        Ok(Jacobiator {
            dim: self.dim,
            components,
        })
    }
}

impl Jacobiator<f64> {
    /// Largest magnitude component and its indices.
    pub fn max_abs(&self) -> (f64, Option<(usize, usize, usize)>) {
        self.components.iter().fold((0.0, None), |(best, at), (idx, v)| {
            if v.abs() > best || v.is_nan() {
                (v.abs(), Some(*idx))
            } else {
                (best, at)
            }
        })
    }
}

fn triples(n: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).flat_map(move |j| (j + 1..n).map(move |k| (i, j, k))))
}

/// `T_ijk = Σ_l J_il ∂_l J_jk + J_jl ∂_l J_ki + J_kl ∂_l J_ij`, exactly.
pub fn symbolic_jacobiator(j: &PoissonStructure) -> Jacobiator<PolyExpr> {
    let n = j.dim();
    let m = j.matrix();
    // d[l][(a, b)] = ∂_l J_ab
    let d: Vec<PolyMatrix> = (0..n)
        .map(|l| PolyMatrix::from_fn(n, n, n, |a, b| m[(a, b)].diff(l).expect("in range")))
        .collect();
    let components = triples(n)
        .map(|(i, jj, k)| {
            let mut acc = PolyExpr::zero(n);
            for (l, dl) in d.iter().enumerate() {
                for (a, b, c) in [(i, jj, k), (jj, k, i), (k, i, jj)] {
                    let jal = &m[(a, l)];
                    let dbc = &dl[(b, c)];
                    if !jal.is_zero() && !dbc.is_zero() {
                        acc = &acc + &(jal * dbc);
                    }
                }
            }
            ((i, jj, k), acc)
        })
        .collect();
    Jacobiator { dim: n, components }
}

/// A matrix-valued function of the phase-space point that can be evaluated
/// exactly at rational points.
pub trait MatrixField {
    fn dim(&self) -> usize;
    fn eval_exact(&self, z: &[Rational]) -> Result<RatMatrix, DiracError>;
}

impl MatrixField for PoissonStructure {
    fn dim(&self) -> usize {
        PoissonStructure::dim(self)
    }

    fn eval_exact(&self, z: &[Rational]) -> Result<RatMatrix, DiracError> {
        Ok(self.entries.eval_exact(z)?)
    }
}

/// Default central-difference step `ε^(1/3)`.
pub fn default_step() -> f64 {
    f64::EPSILON.cbrt()
}

/// Jacobiator of a pointwise field by second-order central differences,
/// `∂_l J ≈ (J(z + h_l e_l) − J(z − h_l e_l)) / 2h_l` with
/// `h_l = step · max(1, |z_l|)`.
///
/// The point is taken as the exact value of its floats and `step` as its
/// shortest decimal, so `1e-5` means `1/100000`. The field is evaluated and
/// differenced in exact arithmetic, so the result carries only truncation
/// error.
pub fn numeric_jacobiator(field: &dyn MatrixField, point: &[f64], step: f64) -> Result<Jacobiator<f64>, DiracError> {
    let n = field.dim();
    if point.len() != n {
        return Err(DiracError::Shape(format!(
            "point has dimension {}, field has {n}",
            point.len()
        )));
    }
    if point.iter().any(|v| !v.is_finite()) {
        return Err(DiracError::NonFinite {
            what: "sample point".into(),
            point: point.to_vec(),
        });
    }
    let z: Vec<Rational> = point.iter().map(|&v| rational_from_f64(v)).collect();
    let step_q = if step.is_finite() && step > 0.0 {
        rational_from_decimal(step)
    } else {
        return Err(DiracError::StepUnderflow { step, index: 0 });
    };
    let j0 = field.eval_exact(&z)?;
    let mut derivs = Vec::with_capacity(n);
    for l in 0..n {
        let scale = point[l].abs().max(1.0);
        let h = step * scale;
        if !(h.is_finite() && h >= f64::EPSILON * scale) {
            return Err(DiracError::StepUnderflow { step, index: l });
        }
        let hq = if z[l].abs() > Rational::one() {
            &step_q * z[l].abs()
        } else {
            step_q.clone()
        };
        let mut zp = z.clone();
        zp[l] += &hq;
        let mut zm = z.clone();
        zm[l] -= &hq;
        let diff = field.eval_exact(&zp)?.sub(&field.eval_exact(&zm)?);
        derivs.push(diff.scale(&(Rational::from_integer(2.into()) * hq).recip()));
    }
    let components = triples(n)
        .map(|(i, j, k)| {
            let mut acc = Rational::zero();
            for (l, dl) in derivs.iter().enumerate() {
                for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                    let jal = &j0[(a, l)];
                    let dbc = &dl[(b, c)];
                    if !jal.is_zero() && !dbc.is_zero() {
                        acc += jal * dbc;
                    }
                }
            }
            ((i, j, k), rational_to_f64(&acc))
        })
        .collect();
    Ok(Jacobiator { dim: n, components })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example1_space() -> PhaseSpace {
        PhaseSpace::new(["z1", "z2", "z3", "w1", "w2"]).unwrap()
    }

    pub(crate) fn example1_j() -> PoissonStructure {
        PoissonStructure::build(
            example1_space(),
            [((0, 1), "-z3"), ((0, 2), "z2"), ((1, 2), "-z1"), ((3, 4), "-1")],
        )
        .unwrap()
    }

    #[test]
    fn phase_space_validation() {
        assert!(PhaseSpace::new(Vec::<String>::new()).is_err());
        assert!(PhaseSpace::new(["x", "x"]).is_err());
        assert!(PhaseSpace::new(["1x"]).is_err());
        assert_eq!(PhaseSpace::new(["q", "p"]).unwrap().dim(), 2);
    }

    #[test]
    fn example1_structure_matches_printed_matrix() {
        let j = example1_j();
        let s = j.space().clone();
        let rows = j.matrix().to_strings(s.names());
        assert_eq!(rows[0], ["0", "-z3", "z2", "0", "0"]);
        assert_eq!(rows[1], ["z3", "0", "-z1", "0", "0"]);
        assert_eq!(rows[2], ["-z2", "z1", "0", "0", "0"]);
        assert_eq!(rows[3], ["0", "0", "0", "0", "-1"]);
        assert_eq!(rows[4], ["0", "0", "0", "1", "0"]);
    }

    #[test]
    fn trivial_structures() {
        let s = PhaseSpace::new(["q", "p"]).unwrap();
        let j = PoissonStructure::build(s.clone(), [((0, 1), "1")]).unwrap();
        assert_eq!(j.matrix().to_strings(s.names()), [["0", "1"], ["-1", "0"]]);
        let zero = PoissonStructure::build(s, Vec::<((usize, usize), &str)>::new()).unwrap();
        assert!(zero.matrix().is_zero());
        assert!(symbolic_jacobiator(&zero).is_zero());
    }

    #[test]
    fn build_rejects_bad_entries() {
        let s = example1_space();
        let err = PoissonStructure::build(s.clone(), [((1, 2), "z1 +")]).unwrap_err();
        assert!(err.to_string().starts_with("poisson entry (2,3)"), "{err}");
        assert!(PoissonStructure::build(s.clone(), [((2, 1), "z1")]).is_err());
        assert!(PoissonStructure::build(s, [((0, 5), "z1")]).is_err());
    }

    #[test]
    fn example1_brackets() {
        let j = example1_j();
        let s = j.space().clone();
        let b = j.bracket(&s.var(0), &s.var(1)).unwrap();
        assert_eq!(b, s.parse("-z3").unwrap());
        let b = j.bracket(&s.var(3), &s.var(4)).unwrap();
        assert_eq!(b, s.parse("-1").unwrap());
        let f = s.parse("z1^2*w2 + 3*z2 - w1").unwrap();
        assert!(j.bracket(&f, &f).unwrap().is_zero());
    }

    #[test]
    fn example1_jacobiator_vanishes() {
        let t = symbolic_jacobiator(&example1_j());
        assert_eq!(t.components().len(), 10);
        assert!(t.is_zero());
    }

    #[test]
    fn example1_jacobiator_oracle_by_direct_expansion() {
        // Independent route: expand each component as the cyclic sum of
        // brackets {z_i, {z_j, z_k}}.
        let j = example1_j();
        let s = j.space().clone();
        for (i, jj, k) in triples(5) {
            let (zi, zj, zk) = (s.var(i), s.var(jj), s.var(k));
            let cyc = &(&j.bracket(&zi, &j.bracket(&zj, &zk).unwrap()).unwrap()
                + &j.bracket(&zj, &j.bracket(&zk, &zi).unwrap()).unwrap())
                + &j.bracket(&zk, &j.bracket(&zi, &zj).unwrap()).unwrap();
            assert!(cyc.is_zero(), "({i},{jj},{k})");
        }
    }

    #[test]
    fn broken_structure_jacobiator() {
        let s = PhaseSpace::new(["z1", "z2", "z3"]).unwrap();
        let j = PoissonStructure::build(s.clone(), [((0, 1), "z2"), ((1, 2), "z3")]).unwrap();
        let t = symbolic_jacobiator(&j);
        assert_eq!(t.get(0, 1, 2).unwrap(), s.parse("-z3").unwrap());
        assert_eq!(t.get(2, 1, 0).unwrap(), s.parse("z3").unwrap());
        assert_eq!(t.get(1, 2, 0).unwrap(), s.parse("-z3").unwrap());
        assert!(t.get(0, 0, 1).is_none());
    }

    #[test]
    fn constant_structures_satisfy_jacobi() {
        let s = PhaseSpace::new(["a", "b", "c", "d"]).unwrap();
        let j = PoissonStructure::build(s, [((0, 1), "3"), ((0, 3), "-1/2"), ((1, 2), "7"), ((2, 3), "1")]).unwrap();
        assert!(symbolic_jacobiator(&j).is_zero());
        let t = numeric_jacobiator(&j, &[0.3, -1.0, 2.0, 0.0], 1e-5).unwrap();
        assert_eq!(t.max_abs().0, 0.0);
    }

    #[test]
    fn numeric_matches_symbolic_to_step_squared() {
        let s = PhaseSpace::new(["x", "y", "z"]).unwrap();
        let j = PoissonStructure::build(s, [((0, 1), "x^2*z + y"), ((0, 2), "y^3 - z"), ((1, 2), "x*y*z")]).unwrap();
        let sym = symbolic_jacobiator(&j);
        let pt = [0.7, -1.3, 0.4];
        let step = 1e-3;
        let num = numeric_jacobiator(&j, &pt, step).unwrap();
        let exact = sym.eval_f64(&pt).unwrap();
        for ((idx, a), (_, b)) in num.components().iter().zip(exact.components()) {
            let scale = b.abs().max(1.0);
            assert!((a - b).abs() <= 10.0 * step * step * scale, "{idx:?}: {a} vs {b}");
        }
    }

    #[test]
    fn numeric_jacobiator_errors() {
        let j = example1_j();
        assert!(matches!(
            numeric_jacobiator(&j, &[f64::NAN, 0.0, 0.0, 0.0, 0.0], 1e-5),
            Err(DiracError::NonFinite { .. })
        ));
        assert!(matches!(
            numeric_jacobiator(&j, &[0.0; 5], 1e-30),
            Err(DiracError::StepUnderflow { .. })
        ));
        assert!(matches!(
            numeric_jacobiator(&j, &[0.0; 4], 1e-5),
            Err(DiracError::Shape(_))
        ));
    }

    #[test]
    fn constraint_set_gradients() {
        let s = example1_space();
        let c = ConstraintSet::parse(s.clone(), &["z1^2 + w2", "w1"]).unwrap();
        assert_eq!(c.jacobian()[(0, 0)], s.parse("2*z1").unwrap());
        assert_eq!(c.jacobian()[(0, 4)], s.parse("1").unwrap());
        assert_eq!(c.jacobian()[(1, 3)], s.parse("1").unwrap());
        assert!(c.dimension_warning().is_none());
        let three = ConstraintSet::parse(s.clone(), &["z1", "z2", "z3"]).unwrap();
        assert!(three.dimension_warning().is_some());
        let err = ConstraintSet::parse(s, &["z1", "bogus"]).unwrap_err();
        assert!(err.to_string().starts_with("constraint 2"), "{err}");
    }
}
