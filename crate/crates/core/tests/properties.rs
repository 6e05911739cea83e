use std::collections::HashMap;

use num_integer::Integer;
use painleve::algebra::matrix::{standard_j, EigenOutcome};
use painleve::algebra::rational::{rat, ratio};
use painleve::algebra::{solve_affine, AffineSolution, MultiPoly, RatMatrix, Rational, Symbol};
use painleve::hamiltonian::is_symplectic;
use painleve::model::{parse_expr, parse_file, ModelFile};
use painleve::series::TruncatedSeries;
use proptest::prelude::*;

fn small() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| ratio(n, d))
}

fn int_matrix(n: usize) -> impl Strategy<Value = RatMatrix> {
    proptest::collection::vec(-4i64..=4, n * n).prop_map(move |v| {
        RatMatrix::from_rows(v.chunks(n).map(|r| r.iter().map(|&x| rat(x)).collect()).collect())
    })
}

/// Polynomials in x, y, z with small coefficients and degrees.
fn poly() -> impl Strategy<Value = MultiPoly> {
    proptest::collection::vec((small(), 0u32..3, 0u32..3, 0u32..2), 0..5).prop_map(|terms| {
        let (x, y, z) = (MultiPoly::var("x"), MultiPoly::var("y"), MultiPoly::var("z"));
        terms
            .into_iter()
            .map(|(c, a, b, e)| (&(&x.pow(a) * &y.pow(b)) * &z.pow(e)).scale(&c))
            .sum()
    })
}

fn series(var: &Symbol) -> impl Strategy<Value = TruncatedSeries> {
    let var = var.clone();
    (proptest::collection::vec(small(), 1..6), 3i64..8).prop_map(move |(tail, trunc)| {
        let mut terms = vec![(1, MultiPoly::one())];
        terms.extend(tail.iter().enumerate().map(|(i, c)| (i as i64 + 2, MultiPoly::constant(c.clone()))));
        TruncatedSeries::from_terms(var.clone(), terms).truncate(trunc)
    })
}

const CORPUS: &[&str] = &[
    include_str!("../data/riccati.ode"),
    include_str!("../data/cubic.ode"),
    include_str!("../data/weierstrass.ode"),
    include_str!("../data/modified.ode"),
    include_str!("../data/inconsistent.ode"),
    include_str!("../data/painleve1.ode"),
    include_str!("../data/cubic_oscillator.ode"),
    include_str!("../data/gelfand_dikii.ode"),
];

#[test]
fn corpus_round_trips_through_text() {
    for text in CORPUS {
        let m = parse_file(text).unwrap();
        let again = match &m {
            ModelFile::System(s) => parse_file(&s.to_text()).unwrap(),
            ModelFile::Hamiltonian(h) => parse_file(&h.to_text()).unwrap(),
        };
        assert_eq!(m, again);
    }
}

#[test]
fn corpus_hamiltonians_have_symmetric_mixed_partials() {
    for text in CORPUS {
        if let ModelFile::Hamiltonian(h) = parse_file(text).unwrap() {
            let vars = h.vars();
            for a in &vars {
                for b in &vars {
                    let ab = h.h.partial_derivative(a).partial_derivative(b);
                    let ba = h.h.partial_derivative(b).partial_derivative(a);
                    assert_eq!(ab, ba);
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn rationals_stay_in_lowest_terms(n in -1000i64..1000, d in 1i64..1000, m in -50i64..50, e in 1i64..50) {
        let r = &ratio(n, d) * &ratio(m, e) + ratio(1, d);
        prop_assert!(r.denom() > &0.into());
        prop_assert!(r.numer().gcd(r.denom()) == 1.into() || *r.numer() == 0.into());
    }

    #[test]
    fn cayley_hamilton(a in int_matrix(3)) {
        let c = a.char_poly_coeffs().unwrap();
        let mut acc = RatMatrix::zeros(3, 3);
        let mut power = RatMatrix::identity(3);
        for ci in &c {
            acc = acc.add(&power.scale(ci));
            power = power.mul(&a).unwrap();
        }
        prop_assert!(acc.is_zero());
    }

    #[test]
    fn solve_affine_recovers_solution(a in int_matrix(3), x in proptest::collection::vec(small(), 3)) {
        prop_assume!(a.determinant().unwrap() != rat(0));
        let b: Vec<MultiPoly> = a.mul_vec(&x).into_iter().map(MultiPoly::constant).collect();
        match solve_affine(&a, &b).unwrap() {
            AffineSolution::Solved { particular, nullspace } => {
                prop_assert!(nullspace.is_empty());
                let want: Vec<MultiPoly> = x.into_iter().map(MultiPoly::constant).collect();
                prop_assert_eq!(particular, want);
            }
            AffineSolution::Inconsistent { .. } => prop_assert!(false, "invertible system reported inconsistent"),
        }
    }

    #[test]
    fn triangular_eigenvalues_are_the_diagonal(diag in proptest::collection::vec(-5i64..=5, 3), upper in proptest::collection::vec(-3i64..=3, 3)) {
        let m = RatMatrix::from_i64(&[
            &[diag[0], upper[0], upper[1]],
            &[0, diag[1], upper[2]],
            &[0, 0, diag[2]],
        ]);
        let EigenOutcome::Integer(data) = m.integer_eigen_data().unwrap() else {
            return Err(TestCaseError::fail("triangular integer matrix has integer spectrum"));
        };
        let mut got: Vec<i64> = data.iter().flat_map(|d| std::iter::repeat_n(d.eigenvalue, d.algebraic_multiplicity)).collect();
        let mut want = diag.clone();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
        for d in &data {
            prop_assert!(d.geometric_multiplicity >= 1 && d.geometric_multiplicity <= d.algebraic_multiplicity);
            for v in &d.basis {
                let mv = m.mul_vec(v);
                let lv: Vec<Rational> = v.iter().map(|x| x * rat(d.eigenvalue)).collect();
                prop_assert_eq!(mv, lv);
            }
        }
    }

    #[test]
    fn compose_after_revert_is_identity(s in series(&Symbol::new("x"))) {
        let x = Symbol::new("x");
        let id = TruncatedSeries::monomial(x, 1, MultiPoly::one());
        let inv = s.revert().unwrap();
        prop_assert!(s.compose(&inv).unwrap().agrees_with(&id));
        prop_assert!(inv.compose(&s).unwrap().agrees_with(&id));
    }

    #[test]
    fn series_inverse(s in series(&Symbol::new("x"))) {
        let inv = s.inverse().unwrap();
        let one = s.checked_mul(&inv).unwrap();
        prop_assert!(one.agrees_with(&TruncatedSeries::constant(Symbol::new("x"), MultiPoly::one())));
    }

    #[test]
    fn substitution_is_multiplicative(f in poly(), g in poly(), h in poly()) {
        let mut b = HashMap::new();
        b.insert(Symbol::new("x"), h);
        b.insert(Symbol::new("y"), MultiPoly::var("z") + MultiPoly::int(1));
        let lhs = (&f * &g).substitute(&b);
        let rhs = &f.substitute(&b) * &g.substitute(&b);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn polynomial_text_round_trip(f in poly()) {
        prop_assert_eq!(parse_expr(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn mixed_partials_commute(f in poly()) {
        let (x, z) = (Symbol::new("x"), Symbol::new("z"));
        prop_assert_eq!(
            f.partial_derivative(&x).partial_derivative(&z),
            f.partial_derivative(&z).partial_derivative(&x)
        );
    }

    #[test]
    fn symplectic_products_are_symplectic(a in small(), b in small(), c in small()) {
        // shears [[I, B], [0, I]] with B symmetric, and their products with J
        let shear = RatMatrix::from_rows(vec![
            vec![rat(1), rat(0), a.clone(), b.clone()],
            vec![rat(0), rat(1), b.clone(), c.clone()],
            vec![rat(0), rat(0), rat(1), rat(0)],
            vec![rat(0), rat(0), rat(0), rat(1)],
        ]);
        let j = standard_j(2);
        prop_assert!(is_symplectic(&shear));
        prop_assert!(is_symplectic(&shear.mul(&j).unwrap().mul(&shear.transpose()).unwrap()));
        let bad = shear.scale(&rat(2));
        prop_assert!(!is_symplectic(&bad));
    }
}
