use std::collections::BTreeSet;

use num_rational::BigRational;
use proptest::prelude::*;

use super::*;

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[test]
fn dynamics_body_parses() {
    let d = parse_dynamics("x' = v, v' = 1").unwrap();
    assert_eq!(d.odes, vec![("x".into(), Term::var("v")), ("v".into(), Term::int(1))]);
    assert_eq!(d.constraint, Formula::True);
}

#[test]
fn test_construct_parses() {
    assert_eq!(parse_program("?true").unwrap(), Program::Test(Formula::True));
}

#[test]
fn rdd_with_domain_parses() {
    let a = parse_rdd("rdd { x'=v, v'=a & v>0 || x#'=v#, v#'=a# } exit x = x# post v <= v#").unwrap();
    assert_eq!(a.left().constraint, parse_formula("v > 0").unwrap());
    assert_eq!(a.right().odes.len(), 2);
    assert_eq!(a.exit(), &parse_formula("x = x#").unwrap());
    assert_eq!(a.post(), &parse_formula("v <= v#").unwrap());
}

#[test]
fn rdd_rejects_shared_state() {
    let err = parse_rdd("rdd { x'=v, v'=1 || x#'=v, v#'=2 } exit x = x# post true").unwrap_err();
    assert!(matches!(err, ParseError::Disjointness(ref e) if e.shared == vec!["v".to_string()]));
}

#[test]
fn rdd_allows_shared_parameters() {
    assert!(parse_rdd("rdd { v'=a*V/v || v#'=a#*V/v# } exit v = v# post true").is_ok());
}

#[test]
fn syntax_error_reports_position_and_expectation() {
    let err = parse_formula("x + > 1").unwrap_err();
    match err {
        ParseError::Syntax { position, expected, .. } => {
            assert_eq!(position, 4);
            assert!(expected.contains(&"term".to_string()));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(parse_term("x^1.5").is_err());
}

#[test]
fn chained_comparisons_split() {
    assert_eq!(parse_formula("0 = x = x#").unwrap(), parse_formula("0 = x & x = x#").unwrap());
    assert_eq!(parse_formula("0 < a < a#").unwrap(), parse_formula("0 < a & a < a#").unwrap());
}

#[test]
fn derived_connectives_normalize() {
    let f = parse_formula("v# <= v | v# <= 1").unwrap();
    assert_eq!(f, parse_formula("!(v# > v & v# > 1)").unwrap());
    let g = parse_formula("v# > 1 -> v# <= v").unwrap();
    assert_eq!(g, parse_formula("!(v# > 1 & v# > v)").unwrap());
    assert_eq!(parse_formula("!(x > 0)").unwrap(), parse_formula("x <= 0").unwrap());
    assert_eq!(parse_formula("!!(x = 0)").unwrap(), parse_formula("x = 0").unwrap());
}

#[test]
fn desugar_example_collision() {
    let a = parse_rdd("rdd { x'=v, v'=1 || x#'=v#, v#'=2 } exit x = x# = 1 post v <= v#").unwrap();
    let expected =
        parse_formula("[ {x'=v,v'=1}; {x#'=v#,v#'=2}; ?(x=x# & x#=1) ] v <= v#").unwrap();
    assert_eq!(desugar_rdd(&a), expected);
}

#[test]
fn desugar_vacuous() {
    let a = parse_rdd("rdd { x'=1 || y#'=1 } exit true post true").unwrap();
    assert_eq!(desugar_rdd(&a).to_string(), "[{x' = 1}; {y#' = 1}; ?true]true");
}

#[test]
fn desugar_single_trailing_test() {
    let a = parse_rdd("rdd { x'=v, v'=a & v>0 || x#'=v#, v#'=a# } exit x = x# post v <= v#").unwrap();
    let Formula::Box(p, _) = desugar_rdd(&a) else { panic!() };
    let Program::Seq(parts) = *p else { panic!() };
    let tests: Vec<usize> = parts
        .iter()
        .enumerate()
        .filter(|(_, p)| matches!(p, Program::Test(_)))
        .map(|(i, _)| i)
        .collect();
    assert_eq!(tests, vec![parts.len() - 1]);
}

#[test]
fn rdd_keyword_inside_formulas_desugars() {
    let f = parse_formula("rdd { x'=1 || x#'=1 } exit x = x# post x >= 0").unwrap();
    assert!(RddFormula::from_formula(&f).is_some());
}

#[test]
fn free_variable_examples() {
    assert_eq!(parse_term("a# * v / v#").unwrap().free_variables(), set(&["a#", "v", "v#"]));
    assert!(parse_formula("forall x. x >= 0").unwrap().free_variables().is_empty());
    assert_eq!(parse_program("{x'=v, v'=a & v>0}").unwrap().free_variables(), set(&["x", "v", "a"]));
}

#[test]
fn diamond_with_test_round_trips() {
    let f = parse_formula("<?(x > 0)> x >= 0").unwrap();
    assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
    let g = parse_formula("<{x'=1}; ?x > 2>(x > 0 & y < 1)");
    assert!(g.is_err() || parse_formula(&g.unwrap().to_string()).is_ok());
}

#[test]
fn parenthesised_terms_and_formulas() {
    assert_eq!(parse_formula("(x + 1)*2 > 0").unwrap().to_string(), "(x + 1)*2 > 0");
    assert_eq!(parse_formula("(x > 0) & (y > 0)").unwrap().to_string(), "x > 0 & y > 0");
    assert_eq!(parse_formula("(x) > 0").unwrap().to_string(), "x > 0");
}

#[test]
fn printer_examples() {
    let t = parse_term("-(v#^2)*(v/v#)").unwrap();
    assert_eq!(t.to_string(), "-v#^2*(v/v#)");
    assert_eq!(parse_term(&t.to_string()).unwrap(), t);
    assert_eq!(parse_term("a - (b - c)").unwrap().to_string(), "a - (b - c)");
    assert_eq!(parse_term("a + -b").unwrap().to_string(), "a + (-b)");
    assert_eq!(parse_term("(x^2)^3").unwrap().to_string(), "x^2^3");
}

// Round-trip property over generated ASTs.

fn arb_var() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("x".to_string()),
        Just("v".to_string()),
        Just("x#".to_string()),
        Just("a_1".to_string()),
    ]
}

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        arb_var().prop_map(Term::Var),
        (0u32..2000, prop_oneof![Just(1u32), Just(10), Just(100)])
            .prop_map(|(n, d)| Term::Const(BigRational::new(n.into(), d.into()))),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Term::neg),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::mul(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::div(a, b)),
            (inner, 0u32..4).prop_map(|(a, n)| Term::pow(a, n)),
        ]
    })
}

fn arb_op() -> impl Strategy<Value = CmpOp> {
    prop_oneof![Just(CmpOp::Eq), Just(CmpOp::Le), Just(CmpOp::Lt), Just(CmpOp::Ge), Just(CmpOp::Gt)]
}

fn arb_first_order() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        (arb_term(), arb_op(), arb_term()).prop_map(|(a, op, b)| Formula::Cmp(a, op, b)),
    ];
    leaf.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::and),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (arb_var(), inner).prop_map(|(v, f)| Formula::Forall(v, Box::new(f))),
        ]
    })
}

fn arb_dynamics() -> impl Strategy<Value = Dynamics> {
    (
        prop::collection::btree_map(arb_var(), arb_term(), 1..3),
        arb_first_order().prop_filter("first-order domain", |f| !f.contains_forall()),
    )
        .prop_map(|(odes, q)| Dynamics::new(odes.into_iter().collect(), q))
}

fn arb_program() -> impl Strategy<Value = Program> {
    let leaf = prop_oneof![
        arb_first_order().prop_map(Program::Test),
        arb_dynamics().prop_map(Program::Dyn),
    ];
    leaf.prop_recursive(3, 8, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Program::seq),
            (inner.clone(), inner).prop_map(|(a, b)| Program::choice(a, b)),
        ]
    })
}

fn arb_formula() -> impl Strategy<Value = Formula> {
    prop_oneof![
        arb_first_order(),
        (arb_program(), arb_first_order()).prop_map(|(p, f)| Formula::boxed(p, f)),
        (arb_program(), arb_first_order()).prop_map(|(p, f)| Formula::diamond(p, f)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn term_round_trip(t in arb_term()) {
        prop_assert_eq!(parse_term(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn formula_round_trip(f in arb_formula()) {
        let printed = f.to_string();
        let reparsed = parse_formula(&printed);
        prop_assert!(reparsed.is_ok(), "{} failed: {:?}", printed, reparsed);
        prop_assert_eq!(reparsed.unwrap(), f.normalized());
    }

    #[test]
    fn program_round_trip(p in arb_program()) {
        prop_assert_eq!(parse_program(&p.to_string()).unwrap(), p.map_terms(&|t| t.clone()));
    }
}
