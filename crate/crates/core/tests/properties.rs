use dirac_core::phase::symbolic_jacobiator;
use dirac_core::{parse_poly, PhaseSpace, PoissonStructure, PolyExpr, Rational};
use proptest::prelude::*;

const N: usize = 3;
const NAMES: [&str; N] = ["x", "y", "z"];

fn rational() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| Rational::new(n.into(), d.into()))
}

fn poly() -> impl Strategy<Value = PolyExpr> {
    prop::collection::vec((prop::collection::vec(0u32..=3, N), rational()), 0..5)
        .prop_map(|terms| PolyExpr::from_terms(N, terms).unwrap())
}

fn point() -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(rational(), N)
}

fn structure() -> impl Strategy<Value = PoissonStructure> {
    prop::collection::vec(poly(), 3).prop_map(|e| {
        let space = PhaseSpace::new(NAMES).unwrap();
        let src: Vec<String> = e.iter().map(|p| p.to_string_with(&NAMES)).collect();
        PoissonStructure::build(space, [((0, 1), &src[0]), ((0, 2), &src[1]), ((1, 2), &src[2])]).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(a in poly(), b in poly(), c in poly()) {
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert!((&a - &a).is_zero());
        prop_assert_eq!(&a * &PolyExpr::one(N), a.clone());
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism(a in poly(), b in poly(), z in point()) {
        let ea = a.eval_exact(&z).unwrap();
        let eb = b.eval_exact(&z).unwrap();
        prop_assert_eq!((&a + &b).eval_exact(&z).unwrap(), &ea + &eb);
        prop_assert_eq!((&a * &b).eval_exact(&z).unwrap(), &ea * &eb);
        prop_assert_eq!((-&a).eval_exact(&z).unwrap(), -ea);
    }

    #[test]
    fn derivative_obeys_leibniz(a in poly(), b in poly(), l in 0..N) {
        let lhs = (&a * &b).diff(l).unwrap();
        let rhs = &(&a.diff(l).unwrap() * &b) + &(&a * &b.diff(l).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn partial_derivatives_commute(a in poly(), i in 0..N, j in 0..N) {
        prop_assert_eq!(a.diff(i).unwrap().diff(j).unwrap(), a.diff(j).unwrap().diff(i).unwrap());
    }

    #[test]
    fn print_parse_round_trip(a in poly()) {
        let text = a.to_string_with(&NAMES);
        prop_assert_eq!(parse_poly(&text, &NAMES).unwrap(), a);
    }

    #[test]
    fn bracket_is_antisymmetric_and_leibniz(j in structure(), f in poly(), g in poly(), h in poly()) {
        let fg = j.bracket(&f, &g).unwrap();
        prop_assert_eq!(j.bracket(&g, &f).unwrap(), -&fg);
        let lhs = j.bracket(&f, &(&g * &h)).unwrap();
        let rhs = &(&fg * &h) + &(&g * &j.bracket(&f, &h).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn jacobiator_matches_cyclic_brackets(j in structure()) {
        let t = symbolic_jacobiator(&j);
        let v: Vec<PolyExpr> = (0..N).map(|i| PolyExpr::var(N, i)).collect();
        let nested = |a: usize, b: usize, c: usize| {
            j.bracket(&v[a], &j.bracket(&v[b], &v[c]).unwrap()).unwrap()
        };
        let cyclic = &(&nested(0, 1, 2) + &nested(1, 2, 0)) + &nested(2, 0, 1);
        prop_assert_eq!(t.get(0, 1, 2).unwrap(), cyclic);
        // totally antisymmetric
        prop_assert_eq!(t.get(1, 0, 2).unwrap(), -t.get(0, 1, 2).unwrap());
        prop_assert_eq!(t.get(2, 1, 0).unwrap(), -t.get(0, 1, 2).unwrap());
        prop_assert_eq!(t.get(1, 2, 0).unwrap(), t.get(0, 1, 2).unwrap());
    }
}
