//! JSON problem files.
//!
//! ```json
//! {
//!   "variables": ["q", "p"],
//!   "poisson": {"1,2": "1"},
//!   "constraints": [],
//!   "hamiltonian": "1/2*p^2 + 1/2*q^2"
//! }
//! ```
//!
//! Poisson entries are keyed by 1-based `"i,j"` with `i < j`; the lower
//! triangle follows by antisymmetry.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dirac::{ConstrainedSystem, DSolution, DiracSystem};
use crate::error::DiracError;
use crate::phase::{ConstraintSet, PhaseSpace, PoissonStructure};
use crate::poly::PolyExpr;
use crate::polymat::PolyMatrix;
use crate::verify::{Tolerances, VerifyConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub variables: Vec<String>,
    #[serde(default)]
    pub poisson: BTreeMap<String, String>,
    #[serde(default)]
    pub constraints: Vec<String>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    /// Accept a `D` that fails the Casimir condition.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub relaxed: bool,
    /// Initial state for `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    /// Output of `build`; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assembled: Option<Assembled>,
}

/// Matrices written by `build`, as polynomial strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assembled {
    #[serde(rename = "C")]
    pub c: Vec<Vec<String>>,
    pub d_provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jstar: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projector: Option<Vec<Vec<String>>>,
    pub relaxed: bool,
}

/// Malformed problem input. `location` names the offending field.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct InputError {
    pub location: String,
    pub message: String,
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl InputError {
    fn new(location: impl Into<String>, message: impl fmt::Display) -> Self {
        InputError {
            location: location.into(),
            message: message.to_string(),
        }
    }

    fn from_dirac(location: &str, e: DiracError) -> Self {
        match e {
            DiracError::Parse { location, source } => InputError::new(location, source),
            other => InputError::new(location, other),
        }
    }
}

/// A parsed and checked problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub file: ProblemFile,
    pub system: ConstrainedSystem,
    pub d: Option<PolyMatrix>,
    pub hamiltonian: Option<PolyExpr>,
}

impl Problem {
    pub fn load(path: &Path) -> Result<Self, InputError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| InputError::new(&name, e))?;
        Self::from_json(&text).map_err(|e| InputError::new(format!("{name}: {}", e.location), e.message))
    }

    pub fn from_json(text: &str) -> Result<Self, InputError> {
        let file: ProblemFile = serde_json::from_str(text)
            .map_err(|e| InputError::new(format!("line {} column {}", e.line(), e.column()), e))?;
        Self::from_file(file)
    }

    pub fn from_file(file: ProblemFile) -> Result<Self, InputError> {
        let space =
            PhaseSpace::new(file.variables.iter().cloned()).map_err(|e| InputError::from_dirac("variables", e))?;
        let n = space.dim();

        let mut upper = Vec::with_capacity(file.poisson.len());
        for (key, src) in &file.poisson {
            let loc = format!("poisson[\"{key}\"]");
            let (i, j) = parse_index_pair(key).ok_or_else(|| InputError::new(&loc, "expected key \"i,j\""))?;
            if !(1 <= i && i < j && j <= n) {
                return Err(InputError::new(&loc, format!("need 1 <= i < j <= {n}")));
            }
            upper.push(((i - 1, j - 1), src.as_str()));
        }
        let j = PoissonStructure::build(space.clone(), upper).map_err(|e| InputError::from_dirac("poisson", e))?;

        let mut phis = Vec::with_capacity(file.constraints.len());
        for (k, src) in file.constraints.iter().enumerate() {
            phis.push(parse_at(&space, src, &format!("constraints[{k}]"))?);
        }
        let constraints =
            ConstraintSet::new(space.clone(), phis).map_err(|e| InputError::from_dirac("constraints", e))?;
        let m = constraints.len();
        let system = ConstrainedSystem::new(j, constraints).map_err(|e| InputError::from_dirac("constraints", e))?;

        let d = match &file.d {
            None => None,
            Some(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(InputError::new("D", format!("must be {m}x{m}, one row per constraint")));
                }
                let mut parsed = Vec::with_capacity(m);
                for (r, row) in rows.iter().enumerate() {
                    let mut out = Vec::with_capacity(m);
                    for (c, src) in row.iter().enumerate() {
                        out.push(parse_at(&space, src, &format!("D[{r}][{c}]"))?);
                    }
                    parsed.push(out);
                }
                let dm = PolyMatrix::from_rows(n, parsed).map_err(|e| InputError::new("D", e))?;
                if let Some((r, c)) = dm.antisymmetry_violation() {
                    return Err(InputError::new(format!("D[{r}][{c}]"), "D must be antisymmetric"));
                }
                Some(dm)
            }
        };

        let hamiltonian = match &file.hamiltonian {
            Some(src) => Some(parse_at(&space, src, "hamiltonian")?),
            None => None,
        };
        if let Some(z0) = &file.initial {
            if z0.len() != n {
                return Err(InputError::new(
                    "initial",
                    format!("expected {n} values, got {}", z0.len()),
                ));
            }
        }
        if file.points == Some(0) {
            return Err(InputError::new("points", "must be positive"));
        }
        Ok(Problem {
            file,
            system,
            d,
            hamiltonian,
        })
    }

    pub fn space(&self) -> &PhaseSpace {
        self.system.space()
    }

    /// Assembles `J*`. Without `D` the pointwise pseudoinverse is used. A
    /// `D` failing the Casimir condition is kept in relaxed mode, where the
    /// residual check reports it.
    pub fn dirac_system(&self) -> Result<DiracSystem, DiracError> {
        let Some(d) = &self.d else {
            return DiracSystem::build(self.system.clone(), DSolution::pseudoinverse());
        };
        let sol = DSolution::unchecked(d.clone());
        if self.file.relaxed {
            return DiracSystem::build_relaxed(self.system.clone(), sol);
        }
        match DiracSystem::build(self.system.clone(), sol.clone()) {
            Err(DiracError::Residual { .. }) => DiracSystem::build_relaxed(self.system.clone(), sol),
            other => other,
        }
    }

    /// Settings from the file, falling back to the defaults.
    pub fn verify_config(&self) -> VerifyConfig {
        let d = VerifyConfig::default();
        VerifyConfig {
            seed: self.file.seed.unwrap_or(d.seed),
            points: self.file.points.unwrap_or(d.points),
            tolerances: self.file.tolerances.unwrap_or(d.tolerances),
            ..d
        }
    }

    /// The file with `seed`, `points` and `tolerances` resolved from `cfg`
    /// and the assembled matrices attached.
    pub fn normalized(&self, sys: &DiracSystem, cfg: &VerifyConfig) -> ProblemFile {
        let names = self.space().names();
        let mut file = self.file.clone();
        file.seed = Some(cfg.seed);
        file.points = Some(cfg.points);
        file.tolerances = Some(cfg.tolerances);
        file.assembled = Some(Assembled {
            c: self.system.c().entries().to_strings(names),
            d_provenance: sys.d().provenance().as_str().into(),
            jstar: sys.jstar_symbolic().map(|m| m.to_strings(names)),
            projector: sys.projector_symbolic().map(|m| m.to_strings(names)),
            relaxed: sys.is_relaxed(),
        });
        file
    }
}

fn parse_index_pair(key: &str) -> Option<(usize, usize)> {
    let (a, b) = key.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_at(space: &PhaseSpace, src: &str, location: &str) -> Result<PolyExpr, InputError> {
    space.parse(src).map_err(|e| InputError::new(location, e))
}
