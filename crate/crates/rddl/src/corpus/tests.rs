use super::*;
use crate::kernel::{check_proof, same_formula, KernelError};
use crate::syntax::{parse_formula, Formula};

fn entry(name: &str) -> ManifestEntry {
    corpus_manifest().into_iter().find(|e| e.name == name).unwrap()
}

fn script(name: &str) -> Script {
    parse_script(entry(name).source).unwrap()
}

fn certificate(name: &str) -> Certificate {
    let s = script(name);
    check_proof(&s.sequent, &s.proof, &KernelConfig::default()).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn f(s: &str) -> Formula {
    parse_formula(s).unwrap()
}

fn histogram(c: &Certificate) -> String {
    c.rules.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

#[test]
fn manifest_pins_hold() {
    for run in run_manifest(&KernelConfig::default()) {
        assert!(run.as_expected(), "{}: {:?}", run.entry.name, run.result.as_ref().map(|c| c.render_stable()));
    }
}

#[test]
fn manifest_order_is_preserved() {
    let names: Vec<_> = run_manifest(&KernelConfig::default()).iter().map(|r| r.entry.name).collect();
    let expected: Vec<_> = corpus_manifest().iter().map(|e| e.name).collect();
    assert_eq!(names, expected);
}

#[test]
fn constant_acceleration_certificate() {
    let c = certificate("phi_C");
    assert_eq!(histogram(&c), "ARITH=11 DC=3 DI=3 DII=1 DW=6 TEST=1 TS=1 WEAKEN=1");
    assert_eq!(c.side_conditions.iter().collect::<Vec<_>>(), ["v# != 0"]);
    assert!(c.experimental.is_empty());
}

#[test]
fn drag_certificate() {
    let c = certificate("drag");
    assert_eq!(
        histogram(&c),
        "ARITH=15 DBX-GT=4 DC=3 DCC=1 DI=1 DII=1 DW=4 SPLIT=1 TEST=1 TS=1 WEAKEN=1"
    );
}

#[test]
fn decaying_certificates() {
    assert_eq!(histogram(&certificate("decay_8")), "ARITH=3 DC=1 DII=1 DW=4 TEST=2");
    let c7 = certificate("decay_7");
    assert_eq!(c7.rules["SCC-BOX"], 6);
    assert_eq!(c7.rules["ECP"], 1);
    let c9 = certificate("decay_9");
    assert_eq!(c9.rules["RDC"], 1);
    assert_eq!(c9.rules["MCS"], 1);
}

#[test]
fn root_sequents() {
    let s = script("phi_C");
    assert_eq!(s.sequent.context, f("0 = x & x = x# & 0 < v & v = v# & 0 < a & a < a#").conjuncts());
    assert!(script("phi_C_mcs").sequent.context.contains(&f("a <= a#")));
    let Formula::Box(_, post) = script("drag").sequent.goal.clone() else { panic!() };
    assert!(same_formula(&post, &f("v# <= v | v# <= 1")), "{post}");
}

#[test]
fn certificates_are_deterministic() {
    for name in ["phi_C", "drag", "decay_9"] {
        assert_eq!(certificate(name).render_stable(), certificate(name).render_stable());
    }
}

#[test]
fn broken_cut_is_refuted_at_its_premise() {
    let s = script("phi_C_broken");
    let e = check_proof(&s.sequent, &s.proof, &KernelConfig::default()).unwrap_err();
    assert_eq!(e.path, "/0/0");
    assert!(matches!(e.error, KernelError::ProofRefuted { .. }), "{e}");
}

const HEADER: &str = "sequent { assume x = 0 goal [{x' = 1}] x >= 0 }\n";

#[test]
fn unknown_rule() {
    let e = parse_script(&format!("{HEADER}(DIX (ARITH))")).unwrap_err();
    assert!(matches!(e, ScriptError::UnknownRule { ref name, .. } if name == "DIX"), "{e}");
}

#[test]
fn hyphenated_rule_names() {
    let e = parse_script(&format!("{HEADER}(SCC-BOXX at=0 (ARITH))")).unwrap_err();
    assert!(matches!(e, ScriptError::UnknownRule { ref name, .. } if name == "SCC-BOXX"), "{e}");
}

#[test]
fn arity_checked_at_load() {
    let e = parse_script(&format!("{HEADER}(DI (ARITH))")).unwrap_err();
    assert!(matches!(e, ScriptError::ArityMismatch { expected: 2, found: 1, .. }), "{e}");
}

#[test]
fn unknown_parameter() {
    let e = parse_script(&format!("{HEADER}(DI cut=x>0 (ARITH) (DW (ARITH)))")).unwrap_err();
    assert!(matches!(e, ScriptError::UnknownParam { ref key, .. } if key == "cut"), "{e}");
}

#[test]
fn unresolved_identifier() {
    let e = parse_script("sequent { assume x = b goal [{x' = 1}] x >= 0 }\n(ARITH)").unwrap_err();
    assert_eq!(e, ScriptError::Unresolved(vec!["b".into()]));
}

#[test]
fn declared_value_is_substituted() {
    let s = parse_script("param b = 1.5\nsequent { assume x = b goal [{x' = 1}] x >= 0 }\n(ARITH)").unwrap();
    assert_eq!(s.sequent.context, vec![f("x = 1.5")]);
    let e = parse_script("param b\nparam b\nsequent { assume x = b goal x >= 0 }\n(ARITH)").unwrap_err();
    assert_eq!(e, ScriptError::DuplicateParam("b".into()));
}

#[test]
fn syntax_errors_carry_position() {
    let e = parse_script("sequent { assume x = goal x >= 0 }\n(ARITH)").unwrap_err();
    assert!(matches!(e, ScriptError::Syntax(_)));
    assert!(e.to_string().contains("goal") || e.to_string().contains("byte"), "{e}");
}

#[test]
fn shipped_models_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/models");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        load_model(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}

#[test]
fn model_initial_state_and_params() {
    let m = parse_model("param a = 2\nassume 0 = x = x#; v = a & v# = v + 1\nrdd { x' = v, v' = a || x#' = v#, v#' = 1 } exit x = x# post v <= v#").unwrap();
    let init = m.initial_state();
    assert_eq!(init["x"], 0.0);
    assert_eq!(init["x#"], 0.0);
    assert_eq!(init["v"], 2.0);
    assert_eq!(init["v#"], 3.0);
    let ModelBody::Pair(a) = &m.body else { panic!() };
    assert_eq!(a.left().odes[1].1.to_string(), "2");
}

#[test]
fn single_side_model() {
    let m = parse_model("{ x' = v, v' = 1 } exit x = 1").unwrap();
    assert_eq!(m.assumptions, Formula::True);
    let ModelBody::Single { exit, .. } = m.body else { panic!() };
    assert_eq!(exit, Some(f("x = 1")));
}

#[test]
fn missing_file_is_io_error() {
    let e = load_script(std::path::Path::new("/nonexistent/x.rdl")).unwrap_err();
    assert!(matches!(e, LoadError::Io(_)));
}
