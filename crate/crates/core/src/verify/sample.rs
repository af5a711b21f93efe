//! Sample points for the pointwise checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dirac::ConstrainedSystem;
use crate::error::DiracError;
use crate::linalg::{self, RANK_RTOL};

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub count: usize,
    /// Points are drawn from `[-half_width, half_width]^N`.
    pub half_width: f64,
    /// Off-surface points satisfy `‖Φ(z)‖∞ > off_surface_norm`.
    pub off_surface_norm: f64,
    /// Points closer than this to a locus where `rank C` drops are
    /// excluded. The distance is estimated as `σ_r / ‖∇σ_r‖`, with `σ_r` the
    /// smallest generically nonzero singular value of `C`.
    pub exclusion_radius: f64,
    /// Fraction of points projected onto the constraint surface.
    pub on_surface_fraction: f64,
    /// Coordinates are rounded to multiples of this power of two, which
    /// keeps exact evaluation at the points cheap.
    pub grid: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            count: 100,
            half_width: 2.0,
            off_surface_norm: 0.5,
            exclusion_radius: 1e-3,
            on_surface_fraction: 0.5,
            grid: GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub z: Vec<f64>,
    pub on_surface: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub point: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub points: Vec<SamplePoint>,
    pub excluded: Vec<Exclusion>,
    /// Largest rank of `C` seen while probing.
    pub generic_rank: usize,
    pub warnings: Vec<String>,
}

impl SampleSet {
    pub fn coords(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.z.clone()).collect()
    }

    pub fn on_surface(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .filter(|p| p.on_surface)
            .map(|p| p.z.clone())
            .collect()
    }

    pub fn off_surface(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .filter(|p| !p.on_surface)
            .map(|p| p.z.clone())
            .collect()
    }
}

pub const GRID: f64 = 1.0 / (1u64 << 20) as f64;
/// `‖Φ‖∞` bound for projected points after rounding to the grid.
pub const SURFACE_TOL: f64 = 1e-4;
const NEWTON_TOL: f64 = 1e-13;
const GRADIENT_STEP: f64 = 1e-6;
const RANK_PROBES: usize = 32;
const NEWTON_ITERS: usize = 50;
const ON_SURFACE_GIVE_UP: usize = 20;

struct Sampler<'a> {
    sys: &'a ConstrainedSystem,
    cfg: &'a SampleConfig,
    rng: ChaCha8Rng,
    generic_rank: usize,
}

impl Sampler<'_> {
    fn uniform(&mut self) -> Vec<f64> {
        let w = self.cfg.half_width;
        let z: Vec<f64> = (0..self.sys.dim()).map(|_| self.rng.gen_range(-w..=w)).collect();
        self.snap(z)
    }

    fn snap(&self, z: Vec<f64>) -> Vec<f64> {
        let g = self.cfg.grid;
        if g > 0.0 {
            z.into_iter().map(|v| (v / g).round() * g).collect()
        } else {
            z
        }
    }

    fn phi_norm(&self, z: &[f64]) -> Result<f64, DiracError> {
        Ok(self
            .sys
            .constraints()
            .values_f64(z)?
            .iter()
            .fold(0.0, |m, v| m.max(v.abs())))
    }

    fn rank(&self, z: &[f64]) -> Result<usize, DiracError> {
        Ok(linalg::pinv(&self.sys.c().eval_f64(z)?, RANK_RTOL).rank)
    }

    /// Reason to exclude `z`, if any.
    fn exclusion(&self, z: &[f64]) -> Result<Option<String>, DiracError> {
        if z.iter().any(|v| !v.is_finite()) {
            return Ok(Some("non-finite coordinates".into()));
        }
        let c = self.sys.c().eval_f64(z)?;
        if c.iter().any(|v| !v.is_finite()) {
            return Ok(Some("non-finite C".into()));
        }
        let p = linalg::pinv(&c, RANK_RTOL);
        if p.rank < self.generic_rank {
            return Ok(Some(format!(
                "rank drop: rank C = {} < generic rank {}",
                p.rank, self.generic_rank
            )));
        }
        if p.rank_ambiguous {
            return Ok(Some("rank of C is numerically ambiguous".into()));
        }
        if self.generic_rank > 0 {
            let d = self.transition_distance(z)?;
            if d.is_nan() || d < self.cfg.exclusion_radius {
                return Ok(Some(format!("within {d:e} of a rank transition")));
            }
        }
        Ok(None)
    }

    fn sigma_r(&self, z: &[f64]) -> Result<f64, DiracError> {
        let sv = linalg::singular_values(&self.sys.c().eval_f64(z)?);
        Ok(sv[self.generic_rank - 1])
    }

    /// First-order distance `σ_r / ‖∇σ_r‖` to the set where `σ_r = 0`,
    /// with the gradient by central differences.
    fn transition_distance(&self, z: &[f64]) -> Result<f64, DiracError> {
        let s = self.sigma_r(z)?;
        let mut grad2 = 0.0;
        let mut w = z.to_vec();
        for l in 0..z.len() {
            let h = GRADIENT_STEP * z[l].abs().max(1.0);
            w[l] = z[l] + h;
            let up = self.sigma_r(&w)?;
            w[l] = z[l] - h;
            let down = self.sigma_r(&w)?;
            w[l] = z[l];
            grad2 += ((up - down) / (2.0 * h)).powi(2);
        }
        let g = grad2.sqrt();
        Ok(if g > 0.0 { s / g } else { f64::INFINITY })
    }

    /// Newton projection onto `Φ = 0` with minimum-norm steps.
    fn project(&self, mut z: Vec<f64>) -> Result<Option<Vec<f64>>, DiracError> {
        let cons = self.sys.constraints();
        for _ in 0..NEWTON_ITERS {
            let phi = cons.values_f64(&z)?;
            let norm = phi.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            if !norm.is_finite() {
                return Ok(None);
            }
            if norm <= NEWTON_TOL {
                break;
            }
            let q = cons.jacobian().eval_f64(&z)?;
            let step = linalg::pinv(&q, RANK_RTOL).matrix * nalgebra::DVector::from_vec(phi);
            for (zi, si) in z.iter_mut().zip(step.iter()) {
                *zi -= si;
            }
        }
        let z = self.snap(z);
        let norm = self.phi_norm(&z)?;
        Ok((norm <= SURFACE_TOL).then_some(z))
    }
}

/// Draws `cfg.count` points, a share of them projected onto the constraint
/// surface and the rest uniform with `‖Φ‖∞ > cfg.off_surface_norm`.
/// Points near loci where `rank C` drops are excluded and logged.
pub fn sample_points(sys: &ConstrainedSystem, cfg: &SampleConfig, seed: u64) -> Result<SampleSet, DiracError> {
    let mut s = Sampler {
        sys,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(seed),
        generic_rank: 0,
    };
    let mut out = SampleSet::default();
    for _ in 0..RANK_PROBES {
        let z = s.uniform();
        s.generic_rank = s.generic_rank.max(s.rank(&z)?);
    }
    out.generic_rank = s.generic_rank;

    let m = sys.num_constraints();
    let want_on = if m == 0 {
        0
    } else {
        (cfg.count as f64 * cfg.on_surface_fraction).round() as usize
    };
    let mut failures = 0;
    let mut on = Vec::new();
    while on.len() < want_on {
        if failures >= ON_SURFACE_GIVE_UP {
            out.warnings.push(format!(
                "gave up on on-surface sampling after {failures} consecutive failures; {} of {want_on} found",
                on.len()
            ));
            break;
        }
        let start = s.uniform();
        let Some(z) = s.project(start)? else {
            failures += 1;
            continue;
        };
        match s.exclusion(&z)? {
            Some(reason) => {
                failures += 1;
                out.excluded.push(Exclusion { point: z, reason });
            }
            None => {
                failures = 0;
                on.push(z);
            }
        }
    }

    let want_off = cfg.count - on.len();
    let mut off = Vec::new();
    let max_draws = 1000 * cfg.count.max(1);
    let mut draws = 0;
    while off.len() < want_off && draws < max_draws {
        draws += 1;
        let z = s.uniform();
        if m > 0 && s.phi_norm(&z)? <= cfg.off_surface_norm {
            continue;
        }
        match s.exclusion(&z)? {
            Some(reason) => out.excluded.push(Exclusion { point: z, reason }),
            None => off.push(z),
        }
    }
    if off.len() < want_off {
        out.warnings.push(format!(
            "only {} of {want_off} off-surface points found in {max_draws} draws",
            off.len()
        ));
    }

    out.points
        .extend(on.into_iter().map(|z| SamplePoint { z, on_surface: true }));
    out.points
        .extend(off.into_iter().map(|z| SamplePoint { z, on_surface: m == 0 }));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn deterministic_and_in_box() {
        let sys = fixtures::first_class().system();
        let cfg = SampleConfig {
            count: 20,
            ..Default::default()
        };
        let a = sample_points(&sys, &cfg, 7).unwrap();
        let b = sample_points(&sys, &cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 20);
        assert_ne!(a, sample_points(&sys, &cfg, 8).unwrap());
        for p in a.off_surface() {
            assert!(p.iter().all(|v| v.abs() <= 2.0));
            let phi = sys.constraints().values_f64(&p).unwrap();
            assert!(phi.iter().any(|v| v.abs() > 0.5));
        }
    }

    #[test]
    fn projected_points_satisfy_constraints() {
        let sys = fixtures::dependent().system();
        let set = sample_points(&sys, &SampleConfig::default(), 3).unwrap();
        let on = set.on_surface();
        assert_eq!(on.len(), 50, "{:?}", set.warnings);
        for z in on {
            let phi = sys.constraints().values_f64(&z).unwrap();
            assert!(phi.iter().all(|v| v.abs() <= SURFACE_TOL));
        }
    }

    #[test]
    fn example1_surface_lies_in_rank_transition_locus() {
        // Φ = (z1, z2, z3) vanishes exactly where C does.
        let sys = fixtures::example1().system();
        let set = sample_points(&sys, &SampleConfig::default(), 0).unwrap();
        assert_eq!(set.generic_rank, 2);
        assert!(set.on_surface().is_empty());
        assert_eq!(set.points.len(), 100);
        assert_eq!(set.warnings.len(), 1);
        assert!(set.excluded.iter().all(|e| e.reason.starts_with("rank drop")));
    }

    #[test]
    fn no_constraints_uses_uniform_points() {
        let sys = fixtures::broken_jacobi().system();
        let set = sample_points(&sys, &SampleConfig::default(), 0).unwrap();
        assert_eq!(set.points.len(), 100);
        assert_eq!(set.generic_rank, 0);
        assert!(set.excluded.is_empty());
    }
}
