//! Hamiltonian flow `ż = J*(z) ∇H(z)` by classical RK4.

use std::io::{self, Write};

use nalgebra::DVector;

use crate::dirac::DiracSystem;
use crate::error::DiracError;
use crate::poly::PolyExpr;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `max_n |Φ_n(z(t)) − Φ_n(z(0))|` per recorded state.
    pub drift_phi: Vec<f64>,
    /// `|H(z(t)) − H(z(0))|` per recorded state.
    pub drift_h: Vec<f64>,
    /// Why integration stopped early, if it did.
    pub diagnostic: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    pub fn max_constraint_drift(&self) -> f64 {
        self.drift_phi.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.drift_h.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with header `t,<names>,drift_phi_max,drift_H`, one row per state.
    pub fn write_csv<W: Write, S: AsRef<str>>(&self, names: &[S], mut out: W) -> io::Result<()> {
        write!(out, "t")?;
        for n in names {
            write!(out, ",{}", n.as_ref())?;
        }
        writeln!(out, ",drift_phi_max,drift_H")?;
        for (k, t) in self.times.iter().enumerate() {
            write!(out, "{t}")?;
            for v in &self.states[k] {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{},{}", self.drift_phi[k], self.drift_h[k])?;
        }
        Ok(())
    }
}

struct Flow<'a> {
    sys: &'a DiracSystem,
    grad: Vec<PolyExpr>,
}

impl Flow<'_> {
    fn rate(&self, z: &[f64]) -> Result<DVector<f64>, DiracError> {
        let g = self.grad.iter().map(|p| p.eval_f64(z)).collect::<Result<Vec<_>, _>>()?;
        Ok(self.sys.jstar_at(z)? * DVector::from_vec(g))
    }
}

/// Integrates `n_steps` RK4 steps of size `dt` from `z0`.
///
/// A non-finite state ends the trajectory early with a diagnostic. Leaving
/// the region where a pointwise `D` exists is an error.
pub fn integrate(
    sys: &DiracSystem,
    hamiltonian: &PolyExpr,
    z0: &[f64],
    dt: f64,
    n_steps: usize,
) -> Result<Trajectory, DiracError> {
    let n = sys.dim();
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DiracError::Shape(format!("time step must be positive, got {dt}")));
    }
    if z0.len() != n {
        return Err(DiracError::Shape(format!(
            "initial state has dimension {}, phase space has {n}",
            z0.len()
        )));
    }
    if hamiltonian.nvars() != n {
        return Err(DiracError::Shape(format!(
            "Hamiltonian has {} variables, phase space has {n}",
            hamiltonian.nvars()
        )));
    }
    if z0.iter().any(|v| !v.is_finite()) {
        return Err(DiracError::NonFinite {
            what: "initial state".into(),
            point: z0.to_vec(),
        });
    }
    let flow = Flow {
        sys,
        grad: hamiltonian.gradient(),
    };
    let cons = sys.base().constraints();
    let phi0 = cons.values_f64(z0)?;
    let h0 = hamiltonian.eval_f64(z0)?;
    let drift = |z: &[f64]| -> Result<(f64, f64), DiracError> {
        let phi = cons.values_f64(z)?;
        let dphi = phi.iter().zip(&phi0).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        Ok((dphi, (hamiltonian.eval_f64(z)? - h0).abs()))
    };

    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        drift_phi: Vec::with_capacity(n_steps + 1),
        drift_h: Vec::with_capacity(n_steps + 1),
        diagnostic: None,
    };
    traj.times.push(0.0);
    traj.states.push(z0.to_vec());
    traj.drift_phi.push(0.0);
    traj.drift_h.push(0.0);

    let mut z = DVector::from_column_slice(z0);
    for step in 1..=n_steps {
        let k1 = flow.rate(z.as_slice())?;
        let k2 = flow.rate((&z + &k1 * (dt / 2.0)).as_slice())?;
        let k3 = flow.rate((&z + &k2 * (dt / 2.0)).as_slice())?;
        let k4 = flow.rate((&z + &k3 * dt).as_slice())?;
        let next = &z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let t = step as f64 * dt;
        if next.iter().any(|v| !v.is_finite()) {
            traj.diagnostic = Some(format!("non-finite state at step {step} (t = {t})"));
            break;
        }
        z = next;
        let (dphi, dh) = drift(z.as_slice())?;
        traj.times.push(t);
        traj.states.push(z.iter().copied().collect());
        traj.drift_phi.push(dphi);
        traj.drift_h.push(dh);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::dirac::DSolution;
    use crate::fixtures;

    fn pinv(f: &fixtures::Fixture) -> DiracSystem {
        DiracSystem::build(f.system(), DSolution::pseudoinverse()).unwrap()
    }

    #[test]
    fn example1_oscillates_with_period_two_pi() {
        let f = fixtures::example1();
        let sys = pinv(&f);
        let h = f.hamiltonian.clone().unwrap();
        let steps = 2000;
        let traj = integrate(&sys, &h, &[1.0, 2.0, 3.0, 1.0, 0.0], 2.0 * PI / steps as f64, steps).unwrap();
        assert_eq!(traj.len(), steps + 1);
        for (t, z) in traj.times.iter().zip(&traj.states) {
            assert!((z[0] - 1.0).abs() < 1e-12 && (z[1] - 2.0).abs() < 1e-12 && (z[2] - 3.0).abs() < 1e-12);
            assert!((z[3] - t.cos()).abs() < 1e-9, "{t} {z:?}");
            assert!((z[4] - t.sin()).abs() < 1e-9, "{t} {z:?}");
        }
        let end = traj.final_state();
        assert!((end[3] - 1.0).abs() < 1e-9 && end[4].abs() < 1e-9);
    }

    #[test]
    fn constant_hamiltonian_freezes_state() {
        let f = fixtures::example1();
        let sys = pinv(&f);
        let h = PolyExpr::from_int(5, 7);
        let z0 = [0.5, -1.0, 2.0, 0.3, 0.1];
        let traj = integrate(&sys, &h, &z0, 1e-2, 100).unwrap();
        assert!(traj.states.iter().all(|z| z == &z0));
        assert_eq!(traj.max_constraint_drift(), 0.0);
        assert_eq!(traj.max_energy_drift(), 0.0);
    }

    #[test]
    fn rigid_body_conserves_casimir() {
        let f = fixtures::asymmetric_rigid_body();
        let sys = pinv(&f);
        let h = f.hamiltonian.clone().unwrap();
        let z0 = [0.6, 0.8, 0.5];
        let traj = integrate(&sys, &h, &z0, 1e-3, 10_000).unwrap();
        let casimir = |z: &[f64]| z.iter().map(|v| v * v).sum::<f64>();
        let c0 = casimir(&z0);
        let drift = traj.states.iter().map(|z| (casimir(z) - c0).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-8, "{drift:e}");
        assert!(traj.max_energy_drift() <= 1e-8);
        // the motion is not trivial
        assert!((traj.final_state()[0] - z0[0]).abs() > 1e-3);
    }

    #[test]
    fn energy_drift_scales_as_dt_to_the_fourth() {
        let f = fixtures::asymmetric_rigid_body();
        let sys = pinv(&f);
        let h = f.hamiltonian.clone().unwrap();
        let z0 = [0.6, 0.8, 0.5];
        let horizon = 4.0;
        let drift = |dt: f64| {
            let n = (horizon / dt).round() as usize;
            integrate(&sys, &h, &z0, dt, n).unwrap().max_energy_drift()
        };
        let ratio = drift(0.1) / drift(0.05);
        assert!((4.0..=64.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn blow_up_truncates_with_diagnostic() {
        let s = crate::phase::PhaseSpace::new(["q", "p"]).unwrap();
        let j = crate::phase::PoissonStructure::build(s.clone(), [((0, 1), "1")]).unwrap();
        let sys = DiracSystem::build(
            crate::dirac::ConstrainedSystem::new(j, crate::phase::ConstraintSet::empty(s.clone())).unwrap(),
            DSolution::pseudoinverse(),
        )
        .unwrap();
        // q' = q^4 blows up at t = 1/3
        let h = s.parse("q^4*p").unwrap();
        let traj = integrate(&sys, &h, &[1.0, 1.0], 0.5, 200).unwrap();
        assert!(traj.diagnostic.is_some(), "{:?}", traj.final_state());
        assert!(traj.len() < 201);
    }

    #[test]
    fn obstruction_is_an_error() {
        let f = fixtures::obstructed();
        let sys = pinv(&f);
        let h = f.space().parse("q2*p2").unwrap();
        assert!(matches!(
            integrate(&sys, &h, &[0.1, 0.2, 0.3, 0.4], 1e-3, 3),
            Err(DiracError::Obstruction { .. })
        ));
    }

    #[test]
    fn csv_layout() {
        let f = fixtures::example1();
        let sys = pinv(&f);
        let h = f.hamiltonian.clone().unwrap();
        let traj = integrate(&sys, &h, &[1.0, 2.0, 3.0, 1.0, 0.0], 1e-3, 3).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(f.space().names(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,z1,z2,z3,w1,w2,drift_phi_max,drift_H");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,1,2,3,1,0,0,0"));
    }

    #[test]
    fn input_validation() {
        let f = fixtures::example1();
        let sys = pinv(&f);
        let h = f.hamiltonian.clone().unwrap();
        assert!(integrate(&sys, &h, &[0.0; 5], 0.0, 1).is_err());
        assert!(integrate(&sys, &h, &[0.0; 4], 1e-3, 1).is_err());
        assert!(integrate(&sys, &h, &[f64::NAN, 0.0, 0.0, 0.0, 0.0], 1e-3, 1).is_err());
        assert!(integrate(&sys, &PolyExpr::zero(3), &[0.0; 5], 1e-3, 1).is_err());
    }
}
