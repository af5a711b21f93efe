//! Constraint matrix, solvability of the Casimir condition, the matrix `D`,
//! and assembly of the Dirac bracket `J*` and projector `P`.
//!
//! Notation: `A = J Q̂ᵀ` (N×M, column `m` is the Hamiltonian vector field of
//! `Φ_m`) and `C = Q̂ J Q̂ᵀ = Q̂ A`. Because `Q̂ J = −Aᵀ`,
//!
//! ```text
//! J* = J − J Q̂ᵀ D Q̂ J = J + A D Aᵀ,    P = 1 − A D Q̂.
//! ```
//!
//! The Casimir condition is `A (1 − D C) = 0`.

use nalgebra::DMatrix;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::DiracError;
use crate::linalg::{self, null_space, Pinv, RatMatrix, RANK_RTOL};
use crate::phase::{ConstraintSet, MatrixField, PhaseSpace, PoissonStructure};
use crate::poly::{rational_from_f64, rational_to_f64, PolyExpr, Rational};
use crate::polymat::PolyMatrix;

/// Default absolute tolerance on `‖A v‖` for `v ∈ Ker C`.
pub const KERNEL_TOL: f64 = 1e-8;

/// `C_nm = {Φ_n, Φ_m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix(PolyMatrix);

impl CMatrix {
    pub fn entries(&self) -> &PolyMatrix {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn eval_f64(&self, z: &[f64]) -> Result<DMatrix<f64>, DiracError> {
        Ok(self.0.eval_f64(z)?)
    }

    pub fn eval_exact(&self, z: &[Rational]) -> Result<RatMatrix, DiracError> {
        Ok(self.0.eval_exact(z)?)
    }
}

/// A Poisson structure together with constraints, plus the derived `A` and `C`.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    j: PoissonStructure,
    constraints: ConstraintSet,
    a: PolyMatrix,
    c: CMatrix,
}

pub fn compute_c(j: &PoissonStructure, constraints: &ConstraintSet) -> Result<CMatrix, DiracError> {
    Ok(ConstrainedSystem::new(j.clone(), constraints.clone())?.c)
}

impl ConstrainedSystem {
    pub fn new(j: PoissonStructure, constraints: ConstraintSet) -> Result<Self, DiracError> {
        if j.space() != constraints.space() {
            return Err(DiracError::SpaceMismatch);
        }
        let q = constraints.jacobian();
        let a = j.matrix().mul(&q.transpose());
        let c = q.mul(&a);
        debug_assert!(c.antisymmetry_violation().is_none());
        Ok(ConstrainedSystem {
            j,
            constraints,
            a,
            c: CMatrix(c),
        })
    }

    pub fn space(&self) -> &PhaseSpace {
        self.j.space()
    }

    pub fn dim(&self) -> usize {
        self.j.dim()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn poisson(&self) -> &PoissonStructure {
        &self.j
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    /// `A = J Q̂ᵀ`.
    pub fn flows(&self) -> &PolyMatrix {
        &self.a
    }

    pub fn c(&self) -> &CMatrix {
        &self.c
    }

    fn check_point(&self, z: &[f64]) -> Result<(), DiracError> {
        if z.len() != self.dim() {
            return Err(DiracError::Shape(format!(
                "point has dimension {}, phase space has {}",
                z.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Tests `Ker C(z) ⊂ Ker A(z)` numerically. On failure the witness is a
    /// unit vector `v` with `C v ≈ 0` and `‖A v‖ > tol`.
    pub fn kernel_condition(&self, z: &[f64], tol: f64) -> Result<KernelReport, DiracError> {
        self.check_point(z)?;
        let c = self.c.eval_f64(z)?;
        let a = self.a.eval_f64(z)?;
        if c.iter().chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(DiracError::NonFinite {
                what: "C or J Q^T".into(),
                point: z.to_vec(),
            });
        }
        let m = self.num_constraints();
        if m == 0 {
            return Ok(KernelReport {
                condition: KernelCondition::Holds,
                residual: 0.0,
                rank: 0,
                rank_ambiguous: false,
                singular_values: Vec::new(),
            });
        }
        let p = linalg::pinv(&c, RANK_RTOL);
        let kernel = null_space(&c, RANK_RTOL);
        let mut residual = 0.0;
        let condition = if kernel.ncols() == 0 {
            KernelCondition::Holds
        } else {
            let av = &a * &kernel;
            let svd = av.clone().svd(false, true);
            let v_t = svd.v_t.expect("v_t requested");
            let (k, &s) = svd
                .singular_values
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(y.1))
                .expect("nonempty kernel");
            residual = s;
            if s > tol {
                let mut witness: Vec<f64> = (&kernel * v_t.row(k).transpose()).iter().copied().collect();
                canonical_sign(&mut witness);
                KernelCondition::Violated { witness, residual: s }
            } else {
                KernelCondition::Holds
            }
        };
        Ok(KernelReport {
            condition,
            residual,
            rank: p.rank,
            rank_ambiguous: p.rank_ambiguous,
            singular_values: p.singular_values,
        })
    }

    /// Pointwise `D(z) = C(z)⁺`, antisymmetrized; fails with
    /// [`DiracError::Obstruction`] where the kernel condition does not hold.
    pub fn pseudoinverse_d(&self, z: &[f64]) -> Result<PointwiseD, DiracError> {
        let report = self.kernel_condition(z, KERNEL_TOL)?;
        if let KernelCondition::Violated { witness, residual } = report.condition {
            return Err(DiracError::Obstruction {
                point: z.to_vec(),
                witness,
                residual,
            });
        }
        let c = self.c.eval_f64(z)?;
        let Pinv {
            matrix,
            rank,
            rank_ambiguous,
            singular_values,
        } = linalg::pinv(&c, RANK_RTOL);
        Ok(PointwiseD {
            d: linalg::antisymmetrize(&matrix),
            rank,
            rank_ambiguous,
            singular_values,
        })
    }

    /// Exact `C(z)⁺` at a rational point. The kernel condition is checked
    /// exactly.
    pub fn pseudoinverse_d_exact(&self, z: &[Rational]) -> Result<RatMatrix, DiracError> {
        let c = self.c.eval_exact(z)?;
        let d = c.pinv();
        let a = self.a.eval_exact(z)?;
        let m = self.num_constraints();
        let resid = a.mul(&RatMatrix::identity(m).sub(&d.mul(&c)));
        if !resid.is_zero() {
            let ns = c.nullspace();
            let point: Vec<f64> = z.iter().map(rational_to_f64).collect();
            let (witness, residual) = ns
                .iter()
                .map(|v| {
                    let vm = RatMatrix::from_fn(m, 1, |i, _| v[i].clone());
                    let mut w: Vec<f64> = v.iter().map(rational_to_f64).collect();
                    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                    w.iter_mut().for_each(|x| *x /= norm);
                    let av = a.mul(&vm).to_f64();
                    (w, av.norm() / norm)
                })
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("nonzero residual implies a kernel");
            let mut witness = witness;
            canonical_sign(&mut witness);
            return Err(DiracError::Obstruction {
                point,
                witness,
                residual,
            });
        }
        Ok(d)
    }

    /// `R = A (1 − D C)` symbolically.
    pub fn residual_symbolic(&self, d: &PolyMatrix) -> Result<PolyMatrix, DiracError> {
        let m = self.num_constraints();
        self.check_d_shape(d)?;
        let eye = PolyMatrix::identity(m, self.dim());
        Ok(self.a.mul(&eye.sub(&d.mul(self.c.entries()))))
    }

    /// `R(z) = A(z) (1 − D C(z))` for a numeric `D`.
    pub fn residual_at(&self, d: &DMatrix<f64>, z: &[f64]) -> Result<DMatrix<f64>, DiracError> {
        self.check_point(z)?;
        let m = self.num_constraints();
        if d.shape() != (m, m) {
            return Err(DiracError::Shape(format!("D must be {m}x{m}")));
        }
        let c = self.c.eval_f64(z)?;
        let a = self.a.eval_f64(z)?;
        Ok(&a * (DMatrix::identity(m, m) - d * c))
    }

    fn check_d_shape(&self, d: &PolyMatrix) -> Result<(), DiracError> {
        let m = self.num_constraints();
        if d.shape() != (m, m) || d.nvars() != self.dim() {
            return Err(DiracError::Shape(format!(
                "D must be {m}x{m} over {} variables",
                self.dim()
            )));
        }
        Ok(())
    }

    /// Accepts a user-supplied symbolic `D` if it is structurally
    /// antisymmetric and the Casimir residual vanishes identically.
    pub fn verify_user_d(&self, d: PolyMatrix) -> Result<DSolution, DiracError> {
        self.check_d_shape(&d)?;
        if let Some((row, col)) = d.antisymmetry_violation() {
            return Err(DiracError::Antisymmetry { row, col });
        }
        let r = self.residual_symbolic(&d)?;
        if let Some((row, col)) = r.first_nonzero() {
            return Err(DiracError::Residual {
                row,
                col,
                poly: self.space().fmt_poly(&r[(row, col)]),
            });
        }
        Ok(DSolution {
            kind: DKind::Symbolic(d),
            provenance: Provenance::UserSupplied,
        })
    }

    /// Exact `J*(z)` for a pointwise `D`. Any `D` solving the Casimir
    /// condition gives the same `J*`; this uses the inverse of the principal
    /// block of `C` on its pivot columns, which is nonsingular for
    /// antisymmetric `C`, and falls back to the pseudoinverse only to build an
    /// obstruction witness.
    pub fn jstar_exact(&self, z: &[Rational]) -> Result<RatMatrix, DiracError> {
        let j = self.j.matrix().eval_exact(z)?;
        if self.num_constraints() == 0 {
            return Ok(j);
        }
        let c = self.c.eval_exact(z)?;
        let a = self.a.eval_exact(z)?;
        let (_, pivots) = c.rref();
        if pivots.is_empty() {
            if a.is_zero() {
                return Ok(j);
            }
            return self
                .pseudoinverse_d_exact(z)
                .map(|_| unreachable!("nonzero A with C = 0"));
        }
        let block = c.select_rows(&pivots).select_columns(&pivots);
        let inv = block
            .inverse()
            .expect("principal pivot block of an antisymmetric matrix");
        let a_i = a.select_columns(&pivots);
        let ad = a_i.mul(&inv);
        if !ad.mul(&c.select_rows(&pivots)).sub(&a).is_zero() {
            self.pseudoinverse_d_exact(z)?;
            unreachable!("the block inverse and pseudoinverse agree on solvability");
        }
        Ok(j.add(&ad.mul(&a_i.transpose())))
    }

    /// Basis of constant antisymmetric `Δ` with `A Δ C ≡ 0`.
    ///
    /// Unknowns are the entries `Δ_ab`, `a < b`; each polynomial coefficient
    /// of each entry of `A Δ C` gives one linear equation over Q.
    pub fn delta_space(&self) -> Vec<RatMatrix> {
        let m = self.num_constraints();
        let n = self.dim();
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
        if pairs.is_empty() {
            return Vec::new();
        }
        let c = self.c.entries();
        // (A Δ C)_im = Σ_{a<b} δ_ab (A_ia C_bm − A_ib C_am)
        let mut rows: std::collections::BTreeMap<(usize, usize, crate::poly::Monomial), Vec<Rational>> =
            Default::default();
        for (k, &(a, b)) in pairs.iter().enumerate() {
            for i in 0..n {
                for mm in 0..m {
                    let p = &(&self.a[(i, a)] * &c[(b, mm)]) - &(&self.a[(i, b)] * &c[(a, mm)]);
                    for (mono, coef) in p.terms() {
                        rows.entry((i, mm, mono.clone()))
                            .or_insert_with(|| vec![Rational::zero(); pairs.len()])[k] = coef.clone();
                    }
                }
            }
        }
        let system = RatMatrix::from_rows(if rows.is_empty() {
            vec![vec![Rational::zero(); pairs.len()]]
        } else {
            rows.into_values().collect()
        });
        system
            .nullspace()
            .into_iter()
            .map(|v| antisym_from_upper(m, &pairs, &v))
            .collect()
    }

    /// Numeric basis of antisymmetric `Δ` with `A(z) Δ C(z) = 0` at one point.
    pub fn delta_space_at(&self, z: &[f64]) -> Result<Vec<DMatrix<f64>>, DiracError> {
        self.check_point(z)?;
        let m = self.num_constraints();
        let n = self.dim();
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let a = self.a.eval_f64(z)?;
        let c = self.c.eval_f64(z)?;
        let mut lin = DMatrix::zeros(n * m, pairs.len());
        for (k, &(p, q)) in pairs.iter().enumerate() {
            let mut e = DMatrix::zeros(m, m);
            e[(p, q)] = 1.0;
            e[(q, p)] = -1.0;
            let img = &a * e * &c;
            for (r, v) in img.iter().enumerate() {
                lin[(r, k)] = *v;
            }
        }
        let ns = null_space(&lin, 1e-9);
        Ok(ns
            .column_iter()
            .map(|col| {
                let mut d = DMatrix::zeros(m, m);
                for (k, &(p, q)) in pairs.iter().enumerate() {
                    d[(p, q)] = col[k];
                    d[(q, p)] = -col[k];
                }
                d
            })
            .collect())
    }
}

fn antisym_from_upper(m: usize, pairs: &[(usize, usize)], v: &[Rational]) -> RatMatrix {
    let mut d = RatMatrix::zeros(m, m);
    for (k, &(a, b)) in pairs.iter().enumerate() {
        d[(a, b)] = v[k].clone();
        d[(b, a)] = -v[k].clone();
    }
    d
}

/// Flips `v` so its largest-magnitude entry is positive.
fn canonical_sign(v: &mut [f64]) {
    if let Some(big) = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())) {
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelCondition {
    Holds,
    Violated { witness: Vec<f64>, residual: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub condition: KernelCondition,
    /// Largest `‖A v‖` over unit `v` in the numerical kernel of `C`.
    pub residual: f64,
    pub rank: usize,
    pub rank_ambiguous: bool,
    pub singular_values: Vec<f64>,
}

impl KernelReport {
    pub fn holds(&self) -> bool {
        self.condition == KernelCondition::Holds
    }
}

pub fn check_kernel_condition(
    j: &PoissonStructure,
    constraints: &ConstraintSet,
    point: &[f64],
    tol: f64,
) -> Result<KernelReport, DiracError> {
    ConstrainedSystem::new(j.clone(), constraints.clone())?.kernel_condition(point, tol)
}

#[derive(Debug, Clone)]
pub struct PointwiseD {
    pub d: DMatrix<f64>,
    pub rank: usize,
    pub rank_ambiguous: bool,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DKind {
    Symbolic(PolyMatrix),
    /// `D(z) = C(z)⁺`, evaluated on demand.
    Pointwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    UserSupplied,
    Pseudoinverse,
    /// A verified `D` shifted by a constant `Δ` with `A Δ C = 0`.
    Perturbed,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::UserSupplied => "user_supplied",
            Provenance::Pseudoinverse => "pseudoinverse",
            Provenance::Perturbed => "perturbed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DSolution {
    kind: DKind,
    provenance: Provenance,
}

impl DSolution {
    pub fn pseudoinverse() -> Self {
        DSolution {
            kind: DKind::Pointwise,
            provenance: Provenance::Pseudoinverse,
        }
    }

    /// Unverified symbolic `D`, for [`DiracSystem::build_relaxed`].
    pub fn unchecked(d: PolyMatrix) -> Self {
        DSolution {
            kind: DKind::Symbolic(d),
            provenance: Provenance::UserSupplied,
        }
    }

    pub fn kind(&self) -> &DKind {
        &self.kind
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn symbolic(&self) -> Option<&PolyMatrix> {
        match &self.kind {
            DKind::Symbolic(d) => Some(d),
            DKind::Pointwise => None,
        }
    }
}

/// Either solve for `D` pointwise or verify a user-supplied symbolic one.
#[derive(Debug, Clone)]
pub enum SolveMode {
    Pointwise,
    VerifyUser(PolyMatrix),
}

pub fn solve_d(j: &PoissonStructure, constraints: &ConstraintSet, mode: SolveMode) -> Result<DSolution, DiracError> {
    let sys = ConstrainedSystem::new(j.clone(), constraints.clone())?;
    match mode {
        SolveMode::Pointwise => Ok(DSolution::pseudoinverse()),
        SolveMode::VerifyUser(d) => sys.verify_user_d(d),
    }
}

#[derive(Debug, Clone)]
pub enum Perturbation {
    Perturbed {
        d: DSolution,
        delta: RatMatrix,
    },
    /// Only `Δ = 0` keeps the Casimir condition.
    Rigid,
}

/// Shifts a symbolic `D` by a random nonzero constant `Δ` with `A Δ C ≡ 0`.
pub fn perturb_d(sys: &ConstrainedSystem, d: &DSolution, seed: u64) -> Result<Perturbation, DiracError> {
    let Some(dm) = d.symbolic() else {
        return Err(DiracError::Shape("perturbation needs a symbolic D".into()));
    };
    let basis = sys.delta_space();
    if basis.is_empty() {
        return Ok(Perturbation::Rigid);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = sys.num_constraints();
    let mut delta = RatMatrix::zeros(m, m);
    for b in &basis {
        let mut k: i64 = 0;
        while k == 0 {
            k = rng.gen_range(-3..=3);
        }
        delta = delta.add(&b.scale(&Rational::from_integer(k.into())));
    }
    let shifted = dm.add(&PolyMatrix::from_rational(&delta, sys.dim()));
    Ok(Perturbation::Perturbed {
        d: DSolution {
            kind: DKind::Symbolic(shifted),
            provenance: Provenance::Perturbed,
        },
        delta,
    })
}

/// The assembled Dirac bracket.
#[derive(Debug, Clone)]
pub struct DiracSystem {
    base: ConstrainedSystem,
    d: DSolution,
    jstar: Option<PolyMatrix>,
    projector: Option<PolyMatrix>,
    relaxed: bool,
}

pub fn build_dirac_matrix(
    j: &PoissonStructure,
    constraints: &ConstraintSet,
    d: DSolution,
) -> Result<DiracSystem, DiracError> {
    DiracSystem::build(ConstrainedSystem::new(j.clone(), constraints.clone())?, d)
}

impl DiracSystem {
    /// Assembles `J*` and `P`, refusing a symbolic `D` that is not
    /// antisymmetric or fails the Casimir condition.
    pub fn build(base: ConstrainedSystem, d: DSolution) -> Result<Self, DiracError> {
        let d = match d.kind {
            DKind::Symbolic(dm) => {
                let provenance = d.provenance;
                let mut checked = base.verify_user_d(dm)?;
                checked.provenance = provenance;
                checked
            }
            DKind::Pointwise => d,
        };
        Ok(Self::assemble(base, d, false))
    }

    /// Like [`build`](Self::build) but skips the Casimir residual check, so
    /// that invalid choices of `D` can be examined. Antisymmetry is still
    /// required.
    pub fn build_relaxed(base: ConstrainedSystem, d: DSolution) -> Result<Self, DiracError> {
        if let Some(dm) = d.symbolic() {
            base.check_d_shape(dm)?;
            if let Some((row, col)) = dm.antisymmetry_violation() {
                return Err(DiracError::Antisymmetry { row, col });
            }
        }
        Ok(Self::assemble(base, d, true))
    }

    fn assemble(base: ConstrainedSystem, d: DSolution, relaxed: bool) -> Self {
        // Without constraints every D is the empty matrix.
        let d = if base.num_constraints() == 0 && d.kind == DKind::Pointwise {
            DSolution {
                kind: DKind::Symbolic(PolyMatrix::zeros(0, 0, base.dim())),
                provenance: d.provenance,
            }
        } else {
            d
        };
        let (jstar, projector) = match d.symbolic() {
            Some(dm) => {
                let ad = base.a.mul(dm);
                let jstar = base.j.matrix().add(&ad.mul(&base.a.transpose()));
                let n = base.dim();
                let p = PolyMatrix::identity(n, n).sub(&ad.mul(base.constraints.jacobian()));
                (Some(jstar), Some(p))
            }
            None => (None, None),
        };
        DiracSystem {
            base,
            d,
            jstar,
            projector,
            relaxed,
        }
    }

    pub fn base(&self) -> &ConstrainedSystem {
        &self.base
    }

    pub fn d(&self) -> &DSolution {
        &self.d
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn jstar_symbolic(&self) -> Option<&PolyMatrix> {
        self.jstar.as_ref()
    }

    pub fn projector_symbolic(&self) -> Option<&PolyMatrix> {
        self.projector.as_ref()
    }

    /// `J*` as a Poisson-structure value, when symbolic.
    pub fn jstar_structure(&self) -> Option<PoissonStructure> {
        self.jstar.as_ref().map(|m| {
            PoissonStructure::from_matrix(self.base.space().clone(), m.clone())
                .expect("J* is antisymmetric by construction")
        })
    }

    /// `D(z)`; for pointwise systems this may fail with an obstruction.
    pub fn d_at(&self, z: &[f64]) -> Result<DMatrix<f64>, DiracError> {
        match &self.d.kind {
            DKind::Symbolic(d) => Ok(d.eval_f64(z)?),
            DKind::Pointwise => Ok(self.base.pseudoinverse_d(z)?.d),
        }
    }

    pub fn jstar_at(&self, z: &[f64]) -> Result<DMatrix<f64>, DiracError> {
        if let Some(js) = &self.jstar {
            return Ok(js.eval_f64(z)?);
        }
        let d = self.d_at(z)?;
        let a = self.base.a.eval_f64(z)?;
        let j = self.base.j.matrix().eval_f64(z)?;
        Ok(j + &a * d * a.transpose())
    }

    pub fn projector_at(&self, z: &[f64]) -> Result<DMatrix<f64>, DiracError> {
        if let Some(p) = &self.projector {
            return Ok(p.eval_f64(z)?);
        }
        let d = self.d_at(z)?;
        let a = self.base.a.eval_f64(z)?;
        let q = self.base.constraints.jacobian().eval_f64(z)?;
        let n = self.dim();
        Ok(DMatrix::identity(n, n) - a * d * q)
    }

    /// Exact `D` at a rational point.
    pub fn d_exact(&self, z: &[Rational]) -> Result<RatMatrix, DiracError> {
        match &self.d.kind {
            DKind::Symbolic(d) => Ok(d.eval_exact(z)?),
            DKind::Pointwise => self.base.pseudoinverse_d_exact(z),
        }
    }

    /// Largest entry of `J*(z) Q̂(z)ᵀ`, the Casimir residual.
    pub fn casimir_residual_at(&self, z: &[f64]) -> Result<DMatrix<f64>, DiracError> {
        let q = self.base.constraints.jacobian().eval_f64(z)?;
        Ok(self.jstar_at(z)? * q.transpose())
    }

    /// `J* Q̂ᵀ` symbolically, when available.
    pub fn casimir_residual_symbolic(&self) -> Option<PolyMatrix> {
        self.jstar
            .as_ref()
            .map(|js| js.mul(&self.base.constraints.jacobian().transpose()))
    }
}

impl MatrixField for DiracSystem {
    fn dim(&self) -> usize {
        DiracSystem::dim(self)
    }

    fn eval_exact(&self, z: &[Rational]) -> Result<RatMatrix, DiracError> {
        if let Some(js) = &self.jstar {
            return Ok(js.eval_exact(z)?);
        }
        self.base.jstar_exact(z)
    }
}

/// Converts a float point to exact rationals.
pub fn exact_point(z: &[f64]) -> Vec<Rational> {
    z.iter().map(|&v| rational_from_f64(v)).collect()
}

/// Polynomial matrix of constants from integer rows; handy for fixtures.
pub fn constant_matrix(nvars: usize, rows: &[&[i64]]) -> PolyMatrix {
    PolyMatrix::from_fn(rows.len(), rows.first().map_or(0, |r| r.len()), nvars, |i, j| {
        PolyExpr::from_int(nvars, rows[i][j])
    })
}
