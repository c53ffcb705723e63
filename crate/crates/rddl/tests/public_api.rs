use rddl::corpus::{parse_script, run_manifest};
use rddl::kernel::{check_proof, KernelConfig, Status};
use rddl::syntax::{parse_formula, parse_rdd};

#[test]
fn manifest_runs_as_pinned() {
    for run in run_manifest(&KernelConfig::default()) {
        assert!(run.as_expected(), "{}: {:?}", run.entry.name, run.result);
    }
}

#[test]
fn inline_script_checks() {
    let text = "sequent { assume x >= 0 goal [{x' = 2}] x >= 0 }\n(DI (ARITH) (DW (ARITH)))\n";
    let s = parse_script(text).unwrap();
    let cert = check_proof(&s.sequent, &s.proof, &KernelConfig::default()).unwrap();
    assert_eq!(cert.status, Status::Unconditional);
    assert!(cert.render().starts_with("status: unconditional\n"));
}

#[test]
fn printed_formulas_parse_back() {
    for src in ["x^2 + 2*x*y <= y# | !(x = 0)", "[{x' = v, v' = -v & v >= 0}; ?x = 1] v <= 1"] {
        let f = parse_formula(src).unwrap();
        assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
    }
    let a = parse_rdd("rdd { x' = v, v' = 1 || x#' = v#, v#' = 2 } exit x = 1 & x# = 1 post v <= v#").unwrap();
    assert_eq!(parse_rdd(&a.to_string()).unwrap(), a);
}
