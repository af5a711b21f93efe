//! Verification battery for an assembled [`DiracSystem`].
//!
//! Every check produces a [`CheckResult`]; [`verify`] runs them all on a
//! seeded sample of points and collects a [`VerificationReport`]. Witness
//! indices in results are 1-based.

use std::thread;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::dirac::{perturb_d, DiracSystem, KernelCondition, Perturbation};
use crate::error::DiracError;
use crate::linalg::{argmax_abs, max_abs};
use crate::phase::{numeric_jacobiator, symbolic_jacobiator, MatrixField, PoissonStructure};
use crate::polymat::PolyMatrix;

mod sample;

pub use sample::{sample_points, Exclusion, SampleConfig, SamplePoint, SampleSet};

pub const CHECK_ANTISYMMETRY: &str = "antisymmetry";
pub const CHECK_CASIMIR: &str = "casimir";
pub const CHECK_D_RESIDUAL: &str = "d_residual";
pub const CHECK_JACOBI: &str = "jacobi";
pub const CHECK_JACOBI_CONVERGENCE: &str = "jacobi_convergence";
pub const CHECK_KERNEL: &str = "kernel_condition";
pub const CHECK_PROJECTOR_CONJUGATION: &str = "projector_conjugation";
pub const CHECK_PROJECTOR_FLOWS: &str = "projector_flows";
pub const CHECK_PROJECTOR_IDEMPOTENT: &str = "projector_idempotent";
pub const CHECK_UNIQUENESS: &str = "uniqueness";

/// Named tolerances. Field order is alphabetical so the serialized map is
/// sorted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub antisymmetry: f64,
    pub casimir: f64,
    /// Jacobi residuals at or below this are too small to test convergence.
    pub convergence_floor: f64,
    /// Sample points are kept this far from loci where `rank C` drops.
    pub exclusion_radius: f64,
    pub jacobi: f64,
    /// Largest admissible ratio `r(h/2) / r(h)` of numeric Jacobi residuals.
    pub jacobi_convergence: f64,
    pub kernel: f64,
    pub projector: f64,
    pub step: f64,
    pub uniqueness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            antisymmetry: 1e-14,
            casimir: 1e-10,
            convergence_floor: 1e-12,
            exclusion_radius: 1e-3,
            jacobi: 1e-6,
            jacobi_convergence: 1.0 / 3.0,
            kernel: crate::dirac::KERNEL_TOL,
            projector: 1e-10,
            step: 1e-5,
            uniqueness: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Residual {
    /// Symbolic check with an identically vanishing result.
    ExactZero,
    Value(f64),
}

impl Residual {
    pub fn value(self) -> f64 {
        match self {
            Residual::ExactZero => 0.0,
            Residual::Value(v) => v,
        }
    }
}

impl Serialize for Residual {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Residual::ExactZero => s.serialize_str("exact-zero"),
            Residual::Value(v) => s.serialize_f64(*v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    /// 1-based component indices.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub indices: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub max_residual: Option<Residual>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    fn skipped(name: &str, note: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            status: Status::Skipped,
            max_residual: None,
            witness: None,
            note: Some(note.into()),
        }
    }

    fn exact_zero(name: &str) -> Self {
        CheckResult {
            name: name.into(),
            status: Status::Pass,
            max_residual: Some(Residual::ExactZero),
            witness: None,
            note: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    JacobiAndCasimir,
    JacobiOnly,
    CasimirOnly,
    Neither,
}

/// Joint outcome of the Jacobi and Casimir checks. With no constraints the
/// Casimir check passes vacuously and does not count as holding.
pub fn classify(jacobi: &CheckResult, casimir: &CheckResult, num_constraints: usize) -> Classification {
    let j = jacobi.passed();
    let c = casimir.passed() && num_constraints > 0;
    match (j, c) {
        (true, true) => Classification::JacobiAndCasimir,
        (true, false) => Classification::JacobiOnly,
        (false, true) => Classification::CasimirOnly,
        (false, false) => Classification::Neither,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    /// Sorted by name.
    pub checks: Vec<CheckResult>,
    pub classification: Classification,
    pub sample_points: Vec<Vec<f64>>,
    pub excluded_points: Vec<Exclusion>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub warnings: Vec<String>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn obstructed(&self) -> bool {
        self.check(CHECK_KERNEL).is_some_and(|c| c.status == Status::Fail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub points: usize,
    pub perturbations: usize,
    pub tolerances: Tolerances,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            points: 100,
            perturbations: 3,
            tolerances: Tolerances::default(),
        }
    }
}

impl VerifyConfig {
    pub fn sample_config(&self) -> SampleConfig {
        SampleConfig {
            count: self.points,
            exclusion_radius: self.tolerances.exclusion_radius,
            ..Default::default()
        }
    }
}

/// Runs the full battery on a fresh seeded sample.
pub fn verify(sys: &DiracSystem, cfg: &VerifyConfig) -> Result<VerificationReport, DiracError> {
    let samples = sample_points(sys.base(), &cfg.sample_config(), cfg.seed)?;
    Ok(verify_at(sys, cfg, &samples))
}

/// Runs the full battery on given samples.
pub fn verify_at(sys: &DiracSystem, cfg: &VerifyConfig, samples: &SampleSet) -> VerificationReport {
    let tol = &cfg.tolerances;
    let points = samples.coords();
    let mut checks = vec![
        check_antisymmetry(sys, &points, tol.antisymmetry),
        check_casimir(sys, &points, tol.casimir),
        check_d_residual(sys, &points, tol.casimir),
        check_kernel(sys, &points, tol.kernel),
        check_uniqueness(sys, cfg.perturbations, cfg.seed, &points, tol.uniqueness),
    ];
    checks.extend(check_projector(sys, &points, tol.projector));
    let (jacobi, convergence) = check_jacobi(sys, &points, tol);
    checks.push(jacobi);
    checks.push(convergence);
    checks.sort_by(|a, b| a.name.cmp(&b.name));

    let find = |name: &str| checks.iter().find(|c| c.name == name).expect("check present");
    let classification = classify(find(CHECK_JACOBI), find(CHECK_CASIMIR), sys.base().num_constraints());
    let mut warnings = samples.warnings.clone();
    if let Some(w) = sys.base().constraints().dimension_warning() {
        warnings.push(w);
    }
    if sys.is_relaxed() {
        warnings.push("system assembled without enforcing the Casimir condition on D".into());
    }
    VerificationReport {
        checks,
        classification,
        sample_points: points,
        excluded_points: samples.excluded.clone(),
        seed: cfg.seed,
        tolerances: *tol,
        warnings,
    }
}

/// Runs only the Jacobi and Casimir checks and classifies the outcome.
pub fn check_counterexample_semantics(sys: &DiracSystem, cfg: &VerifyConfig) -> Result<Classification, DiracError> {
    let samples = sample_points(sys.base(), &cfg.sample_config(), cfg.seed)?;
    let points = samples.coords();
    let casimir = check_casimir(sys, &points, cfg.tolerances.casimir);
    let (jacobi, _) = check_jacobi(sys, &points, &cfg.tolerances);
    Ok(classify(&jacobi, &casimir, sys.base().num_constraints()))
}

/// Worst value of a per-point matrix residual, with the point and entry.
struct Worst {
    value: f64,
    point: Vec<f64>,
    entry: (usize, usize),
}

/// Evaluates `f` at each point and keeps the largest entry in absolute value.
/// Points where `f` fails are counted and reported in a note.
fn pointwise_max(
    name: &str,
    points: &[Vec<f64>],
    tol: f64,
    mut f: impl FnMut(&[f64]) -> Result<DMatrix<f64>, DiracError>,
) -> CheckResult {
    let mut worst: Option<Worst> = None;
    let mut skipped = 0;
    let mut first_error = None;
    for z in points {
        match f(z) {
            Ok(r) => {
                let Some((i, j, v)) = argmax_abs(&r) else {
                    worst.get_or_insert(Worst {
                        value: 0.0,
                        point: z.clone(),
                        entry: (0, 0),
                    });
                    continue;
                };
                let v = if v.is_nan() { f64::INFINITY } else { v };
                if worst.as_ref().is_none_or(|w| v > w.value) {
                    worst = Some(Worst {
                        value: v,
                        point: z.clone(),
                        entry: (i, j),
                    });
                }
            }
            Err(e) => {
                skipped += 1;
                first_error.get_or_insert(e.to_string());
            }
        }
    }
    let note = first_error.map(|e| format!("{skipped} point(s) skipped: {e}"));
    let Some(w) = worst else {
        return CheckResult::skipped(name, note.unwrap_or_else(|| "no sample points".into()));
    };
    let pass = w.value <= tol;
    CheckResult {
        name: name.into(),
        status: if pass { Status::Pass } else { Status::Fail },
        max_residual: Some(Residual::Value(w.value)),
        witness: (!pass).then(|| Witness {
            point: Some(w.point),
            indices: vec![w.entry.0 + 1, w.entry.1 + 1],
            ..Default::default()
        }),
        note,
    }
}

/// Exact-zero for a vanishing symbolic matrix; otherwise a failure with the
/// first nonzero entry as witness and the largest sampled value as residual.
fn symbolic_zero(name: &str, sys: &DiracSystem, m: &PolyMatrix, points: &[Vec<f64>]) -> CheckResult {
    let Some((i, j)) = m.first_nonzero() else {
        return CheckResult::exact_zero(name);
    };
    let mut best = (0.0, points.first().cloned());
    for z in points {
        if let Ok(v) = m.eval_f64(z) {
            let a = max_abs(&v);
            if a > best.0 || best.1.is_none() {
                best = (a, Some(z.clone()));
            }
        }
    }
    CheckResult {
        name: name.into(),
        status: Status::Fail,
        max_residual: Some(Residual::Value(best.0)),
        witness: Some(Witness {
            point: best.1,
            indices: vec![i + 1, j + 1],
            expression: Some(sys.base().space().fmt_poly(&m[(i, j)])),
            ..Default::default()
        }),
        note: Some("symbolic residual is not identically zero".into()),
    }
}

/// `D` and `J*` antisymmetric.
pub fn check_antisymmetry(sys: &DiracSystem, points: &[Vec<f64>], tol: f64) -> CheckResult {
    if let (Some(d), Some(js)) = (sys.d().symbolic(), sys.jstar_symbolic()) {
        let viol = d.antisymmetry_violation().or(js.antisymmetry_violation());
        return match viol {
            None => CheckResult::exact_zero(CHECK_ANTISYMMETRY),
            Some((i, j)) => CheckResult {
                name: CHECK_ANTISYMMETRY.into(),
                status: Status::Fail,
                max_residual: None,
                witness: Some(Witness {
                    indices: vec![i + 1, j + 1],
                    ..Default::default()
                }),
                note: None,
            },
        };
    }
    pointwise_max(CHECK_ANTISYMMETRY, points, tol, |z| {
        let d = sys.d_at(z)?;
        Ok(&d + d.transpose())
    })
}

/// `J* Q̂ᵀ = 0`: every constraint is a Casimir of the Dirac bracket.
pub fn check_casimir(sys: &DiracSystem, points: &[Vec<f64>], tol: f64) -> CheckResult {
    if sys.base().num_constraints() == 0 {
        return CheckResult::exact_zero(CHECK_CASIMIR).with_note("vacuous: no constraints");
    }
    if let Some(r) = sys.casimir_residual_symbolic() {
        return symbolic_zero(CHECK_CASIMIR, sys, &r, points);
    }
    pointwise_max(CHECK_CASIMIR, points, tol, |z| sys.casimir_residual_at(z))
}

/// `A (1 − D C) = 0` for the chosen `D`.
pub fn check_d_residual(sys: &DiracSystem, points: &[Vec<f64>], tol: f64) -> CheckResult {
    let base = sys.base();
    if base.num_constraints() == 0 {
        return CheckResult::exact_zero(CHECK_D_RESIDUAL).with_note("vacuous: no constraints");
    }
    if let Some(d) = sys.d().symbolic() {
        return match base.residual_symbolic(d) {
            Ok(r) => symbolic_zero(CHECK_D_RESIDUAL, sys, &r, points),
            Err(e) => CheckResult::skipped(CHECK_D_RESIDUAL, e.to_string()),
        };
    }
    pointwise_max(CHECK_D_RESIDUAL, points, tol, |z| base.residual_at(&sys.d_at(z)?, z))
}

/// `Ker C(z) ⊂ Ker A(z)` at every sample point.
pub fn check_kernel(sys: &DiracSystem, points: &[Vec<f64>], tol: f64) -> CheckResult {
    let mut worst = 0.0_f64;
    let mut witness = None;
    let mut evaluated = 0;
    let mut first_error = None;
    for z in points {
        match sys.base().kernel_condition(z, tol) {
            Ok(report) => {
                evaluated += 1;
                if let KernelCondition::Violated { witness: v, residual } = report.condition {
                    if witness.is_none() {
                        witness = Some(Witness {
                            point: Some(z.clone()),
                            vector: Some(v),
                            ..Default::default()
                        });
                    }
                    worst = worst.max(residual);
                } else {
                    worst = worst.max(report.residual);
                }
            }
            Err(e) => {
                first_error.get_or_insert(e.to_string());
            }
        }
    }
    if evaluated == 0 {
        return CheckResult::skipped(CHECK_KERNEL, first_error.unwrap_or_else(|| "no sample points".into()));
    }
    CheckResult {
        name: CHECK_KERNEL.into(),
        status: if witness.is_some() { Status::Fail } else { Status::Pass },
        max_residual: Some(Residual::Value(worst)),
        note: witness
            .is_some()
            .then(|| "no antisymmetric D solves the Casimir condition at the witness point".into()),
        witness,
    }
}

/// Idempotence of `P`, `P J Q̂ᵀ = 0` and `J* = P J Pᵀ`.
pub fn check_projector(sys: &DiracSystem, points: &[Vec<f64>], tol: f64) -> Vec<CheckResult> {
    let base = sys.base();
    let j = base.poisson().matrix();
    if let (Some(p), Some(js)) = (sys.projector_symbolic(), sys.jstar_symbolic()) {
        let idem = p.mul(p).sub(p);
        let flows = p.mul(base.flows());
        let conj = js.sub(&p.mul(j).mul(&p.transpose()));
        return vec![
            symbolic_zero(CHECK_PROJECTOR_CONJUGATION, sys, &conj, points),
            symbolic_zero(CHECK_PROJECTOR_FLOWS, sys, &flows, points),
            symbolic_zero(CHECK_PROJECTOR_IDEMPOTENT, sys, &idem, points),
        ];
    }
    vec![
        pointwise_max(CHECK_PROJECTOR_CONJUGATION, points, tol, |z| {
            let p = sys.projector_at(z)?;
            Ok(sys.jstar_at(z)? - &p * j.eval_f64(z)? * p.transpose())
        }),
        pointwise_max(CHECK_PROJECTOR_FLOWS, points, tol, |z| {
            Ok(sys.projector_at(z)? * base.flows().eval_f64(z)?)
        }),
        pointwise_max(CHECK_PROJECTOR_IDEMPOTENT, points, tol, |z| {
            let p = sys.projector_at(z)?;
            Ok(&p * &p - p)
        }),
    ]
}

/// Jacobi identity for `J*`: symbolic when `J*` is polynomial, otherwise by
/// central differences at steps `h` and `h/2`. Returns the Jacobi check and
/// the convergence check.
pub fn check_jacobi(sys: &DiracSystem, points: &[Vec<f64>], tol: &Tolerances) -> (CheckResult, CheckResult) {
    match sys.jstar_structure() {
        Some(js) => (
            check_jacobi_symbolic(&js, points),
            CheckResult::skipped(CHECK_JACOBI_CONVERGENCE, "symbolic Jacobi check"),
        ),
        None => check_jacobi_numeric(sys, points, tol),
    }
}

/// Symbolic Jacobiator of a polynomial structure.
pub fn check_jacobi_symbolic(j: &PoissonStructure, points: &[Vec<f64>]) -> CheckResult {
    let t = symbolic_jacobiator(j);
    let Some(((a, b, c), first)) = t.first_nonzero() else {
        return CheckResult::exact_zero(CHECK_JACOBI);
    };
    let mut best: (f64, Option<Vec<f64>>, (usize, usize, usize)) = (0.0, points.first().cloned(), (*a, *b, *c));
    for z in points {
        if let Ok(tz) = t.eval_f64(z) {
            let (v, idx) = tz.max_abs();
            if let Some(idx) = idx {
                if v > best.0 {
                    best = (v, Some(z.clone()), idx);
                }
            }
        }
    }
    let (i, jj, k) = best.2;
    let expr = if (i, jj, k) == (*a, *b, *c) {
        first.clone()
    } else {
        t.get(i, jj, k).expect("in range")
    };
    CheckResult {
        name: CHECK_JACOBI.into(),
        status: Status::Fail,
        max_residual: Some(Residual::Value(best.0)),
        witness: Some(Witness {
            point: best.1,
            indices: vec![i + 1, jj + 1, k + 1],
            expression: Some(j.space().fmt_poly(&expr)),
            ..Default::default()
        }),
        note: Some("symbolic Jacobiator is not identically zero".into()),
    }
}

/// Per-point numeric Jacobi residuals at steps `h` and `h/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiSample {
    pub residual: f64,
    pub indices: Option<(usize, usize, usize)>,
    pub half_step_residual: f64,
}

/// Evaluates the numeric Jacobiator at every point, spreading the points over
/// the available cores. Output order matches `points`.
pub fn jacobi_samples<F: MatrixField + Sync>(
    field: &F,
    points: &[Vec<f64>],
    step: f64,
) -> Vec<Result<JacobiSample, DiracError>> {
    let eval = |z: &Vec<f64>| -> Result<JacobiSample, DiracError> {
        let (residual, indices) = numeric_jacobiator(field, z, step)?.max_abs();
        let (half_step_residual, _) = numeric_jacobiator(field, z, step / 2.0)?.max_abs();
        Ok(JacobiSample {
            residual,
            indices,
            half_step_residual,
        })
    };
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(points.len().max(1));
    if workers <= 1 {
        return points.iter().map(eval).collect();
    }
    let chunk = points.len().div_ceil(workers);
    thread::scope(|s| {
        let handles: Vec<_> = points
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(eval).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("jacobi worker panicked"))
            .collect()
    })
}

/// Numeric Jacobi and convergence checks for any matrix field.
pub fn check_jacobi_numeric<F: MatrixField + Sync>(
    field: &F,
    points: &[Vec<f64>],
    tol: &Tolerances,
) -> (CheckResult, CheckResult) {
    let samples = jacobi_samples(field, points, tol.step);
    jacobi_checks(points, &samples, tol)
}

/// Builds the Jacobi and convergence checks from precomputed samples.
pub fn jacobi_checks(
    points: &[Vec<f64>],
    samples: &[Result<JacobiSample, DiracError>],
    tol: &Tolerances,
) -> (CheckResult, CheckResult) {
    // (residual, point index, component)
    type Worst = (f64, usize, Option<(usize, usize, usize)>);
    let mut worst: Option<Worst> = None;
    let mut worst_ratio: Option<(f64, usize)> = None;
    let mut skipped = 0;
    let mut first_error = None;
    for (k, s) in samples.iter().enumerate() {
        let s = match s {
            Ok(s) => s,
            Err(e) => {
                skipped += 1;
                first_error.get_or_insert(e.to_string());
                continue;
            }
        };
        let r = if s.residual.is_nan() { f64::INFINITY } else { s.residual };
        if worst.is_none_or(|w| r > w.0) {
            worst = Some((r, k, s.indices));
        }
        if r > tol.convergence_floor {
            let ratio = s.half_step_residual / r;
            let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
            if worst_ratio.is_none_or(|w| ratio > w.0) {
                worst_ratio = Some((ratio, k));
            }
        }
    }
    let note = format!("finite-difference step h = {:e}", tol.step);
    let note = match first_error {
        Some(e) => format!("{note}; {skipped} point(s) skipped: {e}"),
        None => note,
    };
    let Some((r, k, idx)) = worst else {
        return (
            CheckResult::skipped(CHECK_JACOBI, note.clone()),
            CheckResult::skipped(CHECK_JACOBI_CONVERGENCE, note),
        );
    };
    let pass = r <= tol.jacobi;
    let jacobi = CheckResult {
        name: CHECK_JACOBI.into(),
        status: if pass { Status::Pass } else { Status::Fail },
        max_residual: Some(Residual::Value(r)),
        witness: (!pass).then(|| Witness {
            point: Some(points[k].clone()),
            indices: idx.map_or(Vec::new(), |(a, b, c)| vec![a + 1, b + 1, c + 1]),
            ..Default::default()
        }),
        note: Some(note.clone()),
    };
    let convergence = match worst_ratio {
        None => CheckResult::skipped(
            CHECK_JACOBI_CONVERGENCE,
            format!("no residual above {:e}", tol.convergence_floor),
        ),
        Some((ratio, k)) => {
            let pass = ratio <= tol.jacobi_convergence;
            CheckResult {
                name: CHECK_JACOBI_CONVERGENCE.into(),
                status: if pass { Status::Pass } else { Status::Fail },
                max_residual: Some(Residual::Value(ratio)),
                witness: (!pass).then(|| Witness {
                    point: Some(points[k].clone()),
                    ..Default::default()
                }),
                note: Some(format!("largest ratio r(h/2)/r(h); {note}")),
            }
        }
    };
    (jacobi, convergence)
}

/// Shifts `D` by admissible `Δ` and checks that `J*` does not change.
///
/// A symbolic `D` is perturbed by constant `Δ` with `A Δ C ≡ 0` and the
/// rebuilt `J*` compared structurally. A pointwise `D` is perturbed at each
/// sample point by a random element of the numerical solution space of
/// `A(z) Δ C(z) = 0`.
pub fn check_uniqueness(
    sys: &DiracSystem,
    n_perturbations: usize,
    seed: u64,
    points: &[Vec<f64>],
    tol: f64,
) -> CheckResult {
    let base = sys.base();
    if base.num_constraints() < 2 {
        return CheckResult::exact_zero(CHECK_UNIQUENESS).with_note("rigid: fewer than two constraints");
    }
    if let Some(js) = sys.jstar_symbolic() {
        for k in 0..n_perturbations {
            let other = match perturb_d(base, sys.d(), seed.wrapping_add(k as u64)) {
                Ok(Perturbation::Rigid) => {
                    return CheckResult::exact_zero(CHECK_UNIQUENESS)
                        .with_note("rigid: no admissible constant perturbation");
                }
                Ok(Perturbation::Perturbed { d, .. }) => {
                    let rebuilt = if sys.is_relaxed() {
                        DiracSystem::build_relaxed(base.clone(), d)
                    } else {
                        DiracSystem::build(base.clone(), d)
                    };
                    match rebuilt {
                        Ok(s) => s,
                        Err(e) => return CheckResult::skipped(CHECK_UNIQUENESS, e.to_string()),
                    }
                }
                Err(e) => return CheckResult::skipped(CHECK_UNIQUENESS, e.to_string()),
            };
            let diff = other.jstar_symbolic().expect("symbolic D").sub(js);
            if !diff.is_zero() {
                return symbolic_zero(CHECK_UNIQUENESS, sys, &diff, points)
                    .with_note(format!("perturbation {k} changes J*"));
            }
        }
        return CheckResult::exact_zero(CHECK_UNIQUENESS)
            .with_note(format!("{n_perturbations} constant perturbation(s)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = Vec::new();
    let result = pointwise_max(CHECK_UNIQUENESS, points, tol, |z| {
        let basis = base.delta_space_at(z)?;
        dims.push(basis.len());
        let jstar = sys.jstar_at(z)?;
        let d = sys.d_at(z)?;
        let a = base.flows().eval_f64(z)?;
        let j = base.poisson().matrix().eval_f64(z)?;
        let n = sys.dim();
        let mut worst = DMatrix::zeros(n, n);
        for _ in 0..n_perturbations {
            let mut dt = d.clone();
            for b in &basis {
                dt += b * rng.gen_range(-1.0..1.0);
            }
            let diff = &j + &a * dt * a.transpose() - &jstar;
            if max_abs(&diff) > max_abs(&worst) {
                worst = diff;
            }
        }
        Ok(worst)
    });
    let max_dim = dims.iter().copied().max().unwrap_or(0);
    let note = format!("pointwise perturbations; solution space dimension up to {max_dim}");
    match result.note {
        Some(ref n) => {
            let combined = format!("{note}; {n}");
            result.with_note(combined)
        }
        None => result.with_note(note),
    }
}
