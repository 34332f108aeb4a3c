use proptest::prelude::*;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex;
use whl_core::action::{action, agmon_length, segment_actions, segment_agmon, PathDisc};
use whl_core::exterior::{berezin, c_op, chat_op, exp_doubleform, lf_endo, supertrace, DoubleForm, Endo};
use whl_core::parse::{parse_complex, parse_real};
use whl_core::poly::{ComplexRational, MultiPoly, Rational};
use whl_core::potential::Potential;

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j]).determinant()
}

fn symmetric(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(-3.0f64..3.0, n * n).prop_map(move |v| {
        (0..n)
            .map(|i| (0..n).map(|j| if i <= j { v[i * n + j] } else { v[j * n + i] }).collect())
            .collect()
    })
}

/// Random operator preserving the parity of form degree.
fn even_endo(n: usize) -> impl Strategy<Value = Endo> {
    let d = 1usize << n;
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |v| {
        let m = DMatrix::from_fn(d, d, |r, c| {
            if (r.count_ones() + c.count_ones()) % 2 == 0 {
                v[r * d + c]
            } else {
                0.0
            }
        });
        Endo::from_matrix(n, m)
    })
}

fn real_poly(n: usize) -> impl Strategy<Value = MultiPoly<Rational>> {
    prop::collection::vec((prop::collection::vec(0u32..4, n), -9i64..10, 1i64..7), 0..6)
        .prop_map(move |terms| MultiPoly::from_terms(n, terms.into_iter().map(|(e, a, b)| (e, rat(a, b)))))
}

fn complex_poly(n: usize) -> impl Strategy<Value = MultiPoly<ComplexRational>> {
    prop::collection::vec((prop::collection::vec(0u32..4, n), -5i64..6, -5i64..6, 1i64..5), 0..5).prop_map(
        move |terms| {
            MultiPoly::from_terms(
                n,
                terms.into_iter().map(|(e, a, b, d)| (e, Complex::new(rat(a, d), rat(b, d)))),
            )
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn berezin_of_hessian_exponential_is_signed_determinant(h in (1usize..=4).prop_flat_map(symmetric)) {
        let n = h.len();
        let w = exp_doubleform(&DoubleForm::hessian_form(&h).scale(-1.0)).unwrap();
        let top = berezin(&w)[(1 << n) - 1];
        let neg: Vec<Vec<f64>> = h.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let want = sign * det(&neg);
        prop_assert!((top - want).abs() < 1e-9 * (1.0 + want.abs()));
    }

    #[test]
    fn supertrace_is_cyclic_on_even_operators((a, b) in (1usize..=3).prop_flat_map(|n| (even_endo(n), even_endo(n)))) {
        let ab = supertrace(&(&a * &b));
        let ba = supertrace(&(&b * &a));
        prop_assert!((ab - ba).abs() < 1e-9 * (1.0 + ab.abs()));
    }

    #[test]
    fn clifford_relations(n in 1usize..=4, i in 1usize..=4, j in 1usize..=4) {
        prop_assume!(i <= n && j <= n);
        let id = Endo::identity(n);
        let delta = if i == j { 2.0 } else { 0.0 };
        let (ci, cj) = (c_op(n, i).unwrap(), c_op(n, j).unwrap());
        let (hi, hj) = (chat_op(n, i).unwrap(), chat_op(n, j).unwrap());
        prop_assert_eq!(&(&ci * &cj) + &(&cj * &ci), id.scale(-delta));
        prop_assert_eq!(&(&hi * &hj) + &(&hj * &hi), id.scale(delta));
        prop_assert_eq!(&(&ci * &hj) + &(&hj * &ci), Endo::zero(n));
    }

    #[test]
    fn bracket_operator_is_symmetric_and_degree_preserving(h in (1usize..=3).prop_flat_map(symmetric)) {
        let n = h.len();
        let a = lf_endo(&h);
        prop_assert!(a.preserves_degree());
        prop_assert!((a.matrix() - a.matrix().transpose()).amax() < 1e-12);
        let tr: f64 = (0..n).map(|i| h[i][i]).sum();
        let top = (1 << n) - 1;
        prop_assert!((a.get(0, 0) + tr).abs() < 1e-12);
        prop_assert!((a.get(top, top) - tr).abs() < 1e-12);
    }

    #[test]
    fn print_parse_roundtrip_real(p in (1usize..=3).prop_flat_map(real_poly)) {
        let n = p.nvars();
        let back = parse_real(&p.render("x"), n).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.render("x"), p.render("x"));
    }

    #[test]
    fn print_parse_roundtrip_complex(p in (1usize..=2).prop_flat_map(complex_poly)) {
        let n = p.nvars();
        let back = parse_complex(&p.render("z"), n).unwrap();
        prop_assert_eq!(&back, &p);
    }

    #[test]
    fn action_dominates_agmon_length(
        t in 0.05f64..2.0,
        coupling in 0.1f64..3.0,
        pts in prop::collection::vec(-2.0f64..2.0, 10),
    ) {
        let pot = Potential::new(&parse_real("x1^3/3 + x1*x2^2 - x2", 2).unwrap());
        let path = PathDisc {
            points: pts.chunks(2).map(|c| c.to_vec()).collect(),
            total_time: t,
        };
        let seg_a = segment_actions(&path, &pot, coupling);
        let seg_l = segment_agmon(&path, &pot, 0.0);
        for (a, l) in seg_a.iter().zip(&seg_l) {
            prop_assert!(*a >= coupling * l - 1e-12 * (1.0 + a.abs()));
        }
        prop_assert!(action(&path, &pot, coupling) >= coupling * agmon_length(&path, &pot, 0.0) - 1e-9);
    }
}
