use num_traits::Zero;
use proptest::prelude::*;

use super::*;
use crate::syntax::parse_formula;

fn f(s: &str) -> Formula {
    parse_formula(s).unwrap()
}

fn verdict(hyps: &[&str], goal: &str) -> ArithVerdict {
    let hs: Vec<Formula> = hyps.iter().map(|h| f(h)).collect();
    prove_arith(&hs, &f(goal)).unwrap()
}

fn proved(hyps: &[&str], goal: &str) -> bool {
    matches!(verdict(hyps, goal), ArithVerdict::Proved(_))
}

#[test]
fn equal_positions_from_chained_equalities() {
    assert!(proved(&["0 = x", "x = x#", "0 < v", "v = v#", "0 < a", "a < a#"], "x = x#"));
}

#[test]
fn rational_goal_with_positive_denominator() {
    assert!(proved(&["v > 0", "v# > 1", "v# <= v"], "-(v#^2)*(v/v#) < -v"));
}

#[test]
fn equality_refuted_at_origin() {
    match verdict(&["v = v#"], "v < v#") {
        ArithVerdict::Refuted(s) => {
            assert_eq!(s.len(), 2);
            assert!(s.values().all(Zero::is_zero));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn linear_and_product_tiers() {
    assert_eq!(verdict(&["x > 1", "y >= x"], "y > 0"), ArithVerdict::Proved("linear".into()));
    assert_eq!(verdict(&["x > 1", "y > 1"], "x*y > 1"), ArithVerdict::Proved("products".into()));
    assert!(proved(&[], "x^2 >= 0"));
    assert!(proved(&["x > 0"], "x^3 + x > 0"));
}

#[test]
fn stretched_acceleration_leaf() {
    // a·a#·(v# - v) ≥ 0 needs a triple product.
    assert!(proved(&["0 < a", "a < a#", "v > 0", "v# - v >= 0"], "a# * a - a * (a# * v / v#) >= 0"));
    assert!(proved(&["v > 0", "v# > 1", "v# <= v"], "v * v# - v > 0"));
}

#[test]
fn nonnegative_denominator_is_positive() {
    assert!(proved(&["v >= 0", "a > 0", "V >= 1"], "a * V / v > 0"));
}

#[test]
fn disjunctive_goals_and_hypotheses() {
    assert!(proved(&["x > 0 | x < 0"], "!(x = 0)"));
    assert!(proved(&["x >= 0"], "x > 0 | x = 0"));
    assert!(proved(&["x = 1 -> y = 2", "x = 1"], "y = 2"));
}

#[test]
fn false_hypotheses_prove_anything() {
    assert!(proved(&["x > 1", "x < 0"], "y = 7"));
    assert!(proved(&["false"], "false"));
}

#[test]
fn unknown_when_neither() {
    // True but beyond the product tiers: x^4 - 2x^2 + 1 = (x^2-1)^2.
    assert_eq!(verdict(&[], "x^4 - 2*x^2 + 1 >= 0"), ArithVerdict::Unknown);
}

#[test]
fn refutation_is_exact_witness() {
    match verdict(&["x > 2"], "x^2 < 9") {
        ArithVerdict::Refuted(s) => {
            let x = &s["x"];
            assert!(x * x >= BigRational::from_integer(9.into()));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn modal_input_rejected() {
    let err = prove_arith(&[], &f("[{x'=1}] x > 0")).unwrap_err();
    assert!(matches!(err, ArithError::NonArithmeticInput(_)));
}

#[test]
fn ledger_dedupes_by_normalized_text() {
    let mut l = ObligationLedger::new();
    let a = l.record(&[f("x > 0 & y > 0")], &f("x*y > 0"));
    let b = l.record(&[f("y > 0"), f("x > 0"), f("x > 0")], &f("x*y > 0"));
    let c = l.record(&[f("y > 0")], &f("x*y > 0"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(l.len(), 2);
    assert_eq!(l.iter().next().unwrap().text, "x > 0, y > 0 |- x*y > 0");
}

fn small_linear() -> impl Strategy<Value = String> {
    let atom = (-3i32..=3, -3i32..=3, -4i32..=4, prop::sample::select(vec![">", ">=", "=", "<", "<="]))
        .prop_map(|(a, b, c, op)| format!("{a}*x + {b}*y + {c} {op} 0"));
    atom
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Proved claims hold on a grid of rational points; refutations are genuine.
    #[test]
    fn verdicts_are_sound(hyps in prop::collection::vec(small_linear(), 0..3), goal in small_linear()) {
        let hs: Vec<Formula> = hyps.iter().map(|h| f(h)).collect();
        let g = f(&goal);
        match prove_arith(&hs, &g).unwrap() {
            ArithVerdict::Proved(_) => {
                for xi in -8..=8 {
                    for yi in -8..=8 {
                        let mut env = ExactState::new();
                        env.insert("x".into(), BigRational::new(xi.into(), 2.into()));
                        env.insert("y".into(), BigRational::new(yi.into(), 2.into()));
                        if hs.iter().all(|h| holds_exact(h, &env) == Some(true)) {
                            prop_assert_eq!(holds_exact(&g, &env), Some(true));
                        }
                    }
                }
            }
            ArithVerdict::Refuted(env) => {
                prop_assert!(hs.iter().all(|h| holds_exact(h, &env) == Some(true)));
                prop_assert_eq!(holds_exact(&g, &env), Some(false));
            }
            ArithVerdict::Unknown => {}
        }
    }
}
