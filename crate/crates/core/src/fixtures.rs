//! Reference systems and random fixture generators.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dirac::{constant_matrix, ConstrainedSystem};
use crate::error::DiracError;
use crate::phase::{ConstraintSet, PhaseSpace, PoissonStructure};
use crate::poly::{Monomial, PolyExpr, Rational};
use crate::polymat::PolyMatrix;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub j: PoissonStructure,
    pub constraints: ConstraintSet,
    /// Symbolic `D`, when one is known.
    pub d: Option<PolyMatrix>,
    pub hamiltonian: Option<PolyExpr>,
}

impl Fixture {
    pub fn space(&self) -> &PhaseSpace {
        self.j.space()
    }

    pub fn system(&self) -> ConstrainedSystem {
        ConstrainedSystem::new(self.j.clone(), self.constraints.clone()).expect("fixture parts share a phase space")
    }

    fn parse(&self, src: &str) -> PolyExpr {
        self.space().parse(src).expect("fixture polynomial")
    }
}

fn structure(names: &[&str], upper: &[((usize, usize), &str)]) -> PoissonStructure {
    let space = PhaseSpace::new(names.iter().copied()).expect("fixture space");
    PoissonStructure::build(space, upper.iter().map(|&(ij, s)| (ij, s))).expect("fixture structure")
}

fn constraints(j: &PoissonStructure, phis: &[&str]) -> ConstraintSet {
    ConstraintSet::parse(j.space().clone(), phis).expect("fixture constraints")
}

const SO3_UPPER: [((usize, usize), &str); 3] = [((0, 1), "-z3"), ((0, 2), "z2"), ((1, 2), "-z1")];

/// Rigid-body bracket on `(z1, z2, z3)` plus a canonical pair `(w1, w2)`
/// with `{w1, w2} = −1`, and constraints `Φ_k = z_k`.
pub fn example1() -> Fixture {
    let mut upper = SO3_UPPER.to_vec();
    upper.push(((3, 4), "-1"));
    let j = structure(&["z1", "z2", "z3", "w1", "w2"], &upper);
    let constraints = constraints(&j, &["z1", "z2", "z3"]);
    let mut f = Fixture {
        name: "example1".into(),
        j,
        constraints,
        d: None,
        hamiltonian: None,
    };
    f.hamiltonian = Some(f.parse("1/2*w1^2 + 1/2*w2^2"));
    f
}

/// The constant `D` printed alongside [`example1`]:
/// `[[0,0,0],[0,0,1],[0,−1,0]]`.
pub fn example1_printed_d() -> PolyMatrix {
    constant_matrix(5, &[&[0, 0, 0], &[0, 0, 1], &[0, -1, 0]])
}

/// `J = diag(C, J̄)` with `C = J̄ = [[0,1],[−1,0]]`, `Φ = (x1, x2)` and
/// `D = C⁻¹ (1 − λ)`. The bracket is Poisson for every `λ`, but the
/// constraints are Casimirs only for `λ = 0`.
pub fn counterexample(lambda: i64) -> Fixture {
    let j = structure(&["x1", "x2", "y1", "y2"], &[((0, 1), "1"), ((2, 3), "1")]);
    let constraints = constraints(&j, &["x1", "x2"]);
    let s = 1 - lambda;
    let d = constant_matrix(4, &[&[0, -s], &[s, 0]]);
    Fixture {
        name: format!("counterexample(lambda={lambda})"),
        j,
        constraints,
        d: Some(d),
        hamiltonian: None,
    }
}

/// Canonical `(q1, p1, q2, p2)` with `Φ = (q1, p1, q2)`: `q2` is in the
/// kernel of `C` but generates a nonzero flow.
pub fn obstructed() -> Fixture {
    let j = structure(&["q1", "p1", "q2", "p2"], &[((0, 1), "1"), ((2, 3), "1")]);
    let constraints = constraints(&j, &["q1", "p1", "q2"]);
    Fixture {
        name: "obstructed".into(),
        j,
        constraints,
        d: None,
        hamiltonian: None,
    }
}

/// Rigid body plus a canonical pair, constrained by the Casimir
/// `z1² + z2² + z3²` and by `w1, w2`.
pub fn first_class() -> Fixture {
    let mut upper = SO3_UPPER.to_vec();
    upper.push(((3, 4), "-1"));
    let j = structure(&["z1", "z2", "z3", "w1", "w2"], &upper);
    let constraints = constraints(&j, &["z1^2 + z2^2 + z3^2", "w1", "w2"]);
    Fixture {
        name: "firstclass".into(),
        j,
        constraints,
        d: None,
        hamiltonian: None,
    }
}

/// Canonical `(q1, p1, q2, p2)` with `Φ = (q1·p1, q1, p1)`; the first
/// constraint is a function of the other two.
pub fn dependent() -> Fixture {
    let j = structure(&["q1", "p1", "q2", "p2"], &[((0, 1), "1"), ((2, 3), "1")]);
    let constraints = constraints(&j, &["q1*p1", "q1", "p1"]);
    Fixture {
        name: "dependent".into(),
        j,
        constraints,
        d: None,
        hamiltonian: None,
    }
}

/// `D = [[0, −dᵀ], [d, C̃⁻¹]]` with `d = ∂f/∂(Φ2, Φ3) = (p1, q1)` for
/// [`dependent`].
pub fn dependent_block_d() -> PolyMatrix {
    let f = dependent();
    let p = |s: &str| f.parse(s);
    PolyMatrix::from_rows(
        4,
        vec![
            vec![p("0"), p("-p1"), p("-q1")],
            vec![p("p1"), p("0"), p("-1")],
            vec![p("q1"), p("1"), p("0")],
        ],
    )
    .expect("same space")
}

/// `J12 = z2, J23 = z3`: antisymmetric but not Poisson.
pub fn broken_jacobi() -> Fixture {
    let j = structure(&["z1", "z2", "z3"], &[((0, 1), "z2"), ((1, 2), "z3")]);
    let constraints = ConstraintSet::empty(j.space().clone());
    Fixture {
        name: "broken-jacobi".into(),
        j,
        constraints,
        d: None,
        hamiltonian: None,
    }
}

/// Free rigid body: `so(3)*` bracket, no constraints, `H = |z|²/2`.
pub fn rigid_body() -> Fixture {
    let j = structure(&["z1", "z2", "z3"], &SO3_UPPER);
    let constraints = ConstraintSet::empty(j.space().clone());
    let mut f = Fixture {
        name: "rigid-body".into(),
        j,
        constraints,
        d: None,
        hamiltonian: None,
    };
    f.hamiltonian = Some(f.parse("1/2*z1^2 + 1/2*z2^2 + 1/2*z3^2"));
    f
}

/// Rigid body with unequal moments of inertia, `H = z1²/2 + z2²/4 + z3²/6`.
pub fn asymmetric_rigid_body() -> Fixture {
    let mut f = rigid_body();
    f.name = "asymmetric-rigid-body".into();
    f.hamiltonian = Some(f.parse("1/2*z1^2 + 1/4*z2^2 + 1/6*z3^2"));
    f
}

/// Variable names `z1..z3, q1, p1, …, qk, pk`.
fn lie_canonical(pairs: usize) -> PoissonStructure {
    let mut names: Vec<String> = vec!["z1".into(), "z2".into(), "z3".into()];
    let mut upper: Vec<((usize, usize), String)> = SO3_UPPER.iter().map(|&(ij, s)| (ij, s.to_string())).collect();
    for k in 0..pairs {
        names.push(format!("q{}", k + 1));
        names.push(format!("p{}", k + 1));
        upper.push(((3 + 2 * k, 4 + 2 * k), "1".into()));
    }
    let space = PhaseSpace::new(names).expect("valid names");
    PoissonStructure::build(space, upper).expect("valid structure")
}

fn small_rational<R: Rng>(rng: &mut R) -> Rational {
    let num: i64 = *[-2, -1, 1, 2].choose(rng).expect("nonempty");
    let den: i64 = *[1, 1, 2].choose(rng).expect("nonempty");
    Rational::new(num.into(), den.into())
}

/// Random polynomial of degree ≤ `max_deg` in the listed variables, with
/// `terms` distinct nonconstant monomials and an optional constant.
pub fn random_poly<R: Rng>(rng: &mut R, nvars: usize, vars: &[usize], max_deg: u32, terms: usize) -> PolyExpr {
    let mut monos: Vec<Vec<u32>> = Vec::new();
    for &i in vars {
        let mut e = vec![0; nvars];
        e[i] = 1;
        monos.push(e);
    }
    if max_deg >= 2 {
        for (a, &i) in vars.iter().enumerate() {
            for &k in &vars[a..] {
                let mut e = vec![0; nvars];
                e[i] += 1;
                e[k] += 1;
                monos.push(e);
            }
        }
    }
    monos.shuffle(rng);
    let mut p = PolyExpr::zero(nvars);
    for e in monos.into_iter().take(terms.max(1)) {
        let t = PolyExpr::from_terms(nvars, [(e, small_rational(rng))]).expect("length nvars");
        p = &p + &t;
    }
    if rng.gen_bool(0.5) {
        p = &p + &PolyExpr::constant(nvars, small_rational(rng));
    }
    debug_assert!(p.terms().any(|(m, _)| !Monomial::is_one(m)));
    p
}

/// Lie–Poisson `so(3)` block plus one or two canonical pairs, constrained by
/// two random polynomials of degree ≤ 2 and, half of the time, a Casimir
/// `|z|² − r²` of the rigid-body block (which makes `C` singular).
pub fn random_theorem_fixture<R: Rng>(rng: &mut R, index: usize) -> Fixture {
    let pairs = rng.gen_range(1..=2);
    let j = lie_canonical(pairs);
    let n = j.dim();
    let all: Vec<usize> = (0..n).collect();
    let mut phis = Vec::new();
    if rng.gen_bool(0.5) {
        let r2 = Rational::new(rng.gen_range(1..=6).into(), 2.into());
        let cas = j.space().parse("z1^2 + z2^2 + z3^2").expect("valid");
        phis.push(&cas - &PolyExpr::constant(n, r2));
    }
    for _ in 0..2 {
        let terms = rng.gen_range(2..=4);
        phis.push(random_poly(rng, n, &all, 2, terms));
    }
    let constraints = ConstraintSet::new(j.space().clone(), phis).expect("same space");
    Fixture {
        name: format!("random-theorem-{index}"),
        j,
        constraints,
        d: None,
        hamiltonian: None,
    }
}

/// Fixture with a known polynomial `D`: on `z1..z3, q1, p1, q2, p2`,
/// `Φ = (|z|² − r², q1 + f(z), p1 + g(q2, p2))`. `C` is constant with a
/// first-class row, so `D = [[0, a, b], [−a, 0, −1], [−b, 1, 0]]` is valid
/// for any polynomials `a, b`.
pub fn random_symbolic_fixture<R: Rng>(rng: &mut R, index: usize) -> Fixture {
    let j = lie_canonical(2);
    let n = j.dim();
    let s = j.space().clone();
    let r2 = Rational::new(rng.gen_range(1..=6).into(), 2.into());
    let cas = &s.parse("z1^2 + z2^2 + z3^2").expect("valid") - &PolyExpr::constant(n, r2);
    let terms = rng.gen_range(2..=4);
    let phi1 = &s.var(3) + &random_poly(rng, n, &[0, 1, 2], 2, terms);
    let terms = rng.gen_range(1..=3);
    let phi2 = &s.var(4) + &random_poly(rng, n, &[5, 6], 2, terms);
    let constraints = ConstraintSet::new(s, vec![cas, phi1, phi2]).expect("same space");
    let all: Vec<usize> = (0..n).collect();
    let t = rng.gen_range(1..=3);
    let a = random_poly(rng, n, &all, 1, t);
    let t = rng.gen_range(1..=3);
    let b = random_poly(rng, n, &all, 1, t);
    let zero = PolyExpr::zero(n);
    let one = PolyExpr::one(n);
    let d = PolyMatrix::from_rows(
        n,
        vec![
            vec![zero.clone(), a.clone(), b.clone()],
            vec![-&a, zero.clone(), -&one],
            vec![-&b, one, zero],
        ],
    )
    .expect("same space");
    Fixture {
        name: format!("random-symbolic-{index}"),
        j,
        constraints,
        d: Some(d),
        hamiltonian: None,
    }
}

/// Checks that a fixture's symbolic `D`, if any, passes verification.
pub fn verify_fixture_d(f: &Fixture) -> Result<(), DiracError> {
    if let Some(d) = &f.d {
        f.system().verify_user_d(d.clone())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_symbolic_fixtures_carry_valid_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..10 {
            let f = random_symbolic_fixture(&mut rng, k);
            verify_fixture_d(&f).unwrap();
        }
    }

    #[test]
    fn dependent_block_d_is_valid() {
        let f = dependent();
        f.system().verify_user_d(dependent_block_d()).unwrap();
    }

    #[test]
    fn random_poly_respects_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = random_poly(&mut rng, 5, &[0, 2, 4], 2, 3);
            assert!(p.total_degree().unwrap() <= 2);
            assert!(!p.is_constant());
            for (m, _) in p.terms() {
                assert_eq!(m.exponents()[1], 0);
                assert_eq!(m.exponents()[3], 0);
            }
        }
    }
}
