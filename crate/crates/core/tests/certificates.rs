mod common;

use astprove::certificates::{
    check_lpf, check_smap, replay_witness, scale_certificate, BoxDomain, CertError, Certificate, CheckReport, Condition,
    Domain, LinearProgressFunction, Status, SupermartingaleMap, Verdict,
};
use astprove::lang::{parse_value_expr, SingleWhileLoop, ValueExpr};
use astprove::rational::{int, ratio, Rational};
use astprove::synthesis::{synth_lpf, synth_smap_bounded, synth_smap_linear, SynthError};
use common::{single_loop, SINGLE_LOOP_FIXTURES};
use proptest::prelude::*;

fn smap(l: &SingleWhileLoop, h: &str, delta: Rational, zeta: Option<Rational>) -> SupermartingaleMap {
    SupermartingaleMap::new(parse_value_expr(h, &l.pvars).unwrap(), delta, zeta).unwrap()
}

fn default_box(l: &SingleWhileLoop) -> BoxDomain {
    BoxDomain::uniform(l.pvars.len(), -100, 100)
}

fn assert_witnesses_replay(l: &SingleWhileLoop, cert: &Certificate, report: &CheckReport) {
    if report.verdict == Verdict::Refuted {
        assert!(!report.witnesses.is_empty());
    }
    for w in &report.witnesses {
        assert!(replay_witness(l, cert, w).unwrap(), "witness does not replay: {w}");
    }
}

#[test]
fn walk_certificate_is_certified() {
    let l = single_loop("walk.pwhile");
    let r = check_smap(&l, &smap(&l, "x + 1", int(1), Some(int(1))), &Domain::Symbolic).unwrap();
    assert_eq!(r.verdict, Verdict::Certified);
    for c in [Condition::D2i, Condition::D2ii, Condition::D31, Condition::D32, Condition::D4] {
        assert_eq!(r.status(c), Some(&Status::Holds), "{c}");
    }
}

#[test]
fn zero_candidate_is_refuted_with_replayable_witness() {
    let l = single_loop("walk.pwhile");
    let cand = smap(&l, "0", int(1), None);
    let r = check_smap(&l, &cand, &Domain::Symbolic).unwrap();
    assert_eq!(r.verdict, Verdict::Refuted);
    assert_eq!(r.status(Condition::D2i), Some(&Status::Violated));
    assert_witnesses_replay(&l, &Certificate::Smap(cand), &r);
}

#[test]
fn countdown_needs_positive_constant() {
    let l = single_loop("countdown.pwhile");
    let bare = smap(&l, "x", int(1), Some(int(1)));
    let r = check_smap(&l, &bare, &Domain::Symbolic).unwrap();
    assert_eq!(r.verdict, Verdict::Refuted);
    assert_eq!(r.status(Condition::D2ii), Some(&Status::Violated));
    assert_witnesses_replay(&l, &Certificate::Smap(bare), &r);
    let shifted = smap(&l, "x + 1", int(1), Some(int(1)));
    assert_eq!(check_smap(&l, &shifted, &Domain::Symbolic).unwrap().verdict, Verdict::Certified);
}

#[test]
fn isqrt_walk_on_box_and_not_difference_bounded() {
    let l = single_loop("isqrt_walk.pwhile");
    let b = BoxDomain { ranges: vec![(1, 10_000)] };
    let general = smap(&l, "x + 1", int(1), None);
    let r = check_smap(&l, &general, &Domain::Box(b.clone())).unwrap();
    assert_eq!(r.verdict, Verdict::CertifiedOnBox);
    let bounded = smap(&l, "x + 1", int(1), Some(int(1)));
    let cert = Certificate::Smap(bounded.clone());
    let r = check_smap(&l, &bounded, &Domain::Box(b)).unwrap();
    assert_eq!(r.verdict, Verdict::Refuted);
    assert_eq!(r.status(Condition::D4), Some(&Status::Violated));
    assert_witnesses_replay(&l, &cert, &r);
    // direct evaluation at x = 9, r = 1: g = 3
    let w = r.witnesses.iter().find(|w| w.condition == Condition::D4).unwrap();
    assert!(w.pv.as_ref().unwrap()[0] >= 4);
    let probe = astprove::certificates::Witness {
        condition: Condition::D4,
        pv: Some(vec![9]),
        rv: Some(vec![1]),
        detail: String::new(),
    };
    assert!(replay_witness(&l, &cert, &probe).unwrap());
    assert_eq!(l.apply(&[9], &[1]).unwrap(), vec![12]);
}

#[test]
fn geometric_walk_linear_progress() {
    let l = single_loop("geometric_walk.pwhile");
    let f = LinearProgressFunction { a: vec![int(1)], c: int(0) };
    let r = check_lpf(&l, &f, &Domain::Symbolic).unwrap();
    assert_eq!(r.verdict, Verdict::Certified);
    let s = synth_lpf(&l).unwrap();
    assert!(s.cert.a[0] > int(0));
    assert_eq!(s.cert.c, int(0));
}

#[test]
fn parabola_linear_progress_on_box() {
    let l = single_loop("parabola.pwhile");
    let f = LinearProgressFunction { a: vec![int(-1), int(1)], c: ratio(1, 4) };
    let r = check_lpf(&l, &f, &Domain::Box(BoxDomain::uniform(2, -30, 30))).unwrap();
    assert_eq!(r.verdict, Verdict::CertifiedOnBox);
    assert_eq!(r.status(Condition::L3), Some(&Status::Holds));
    assert!(matches!(synth_lpf(&l), Err(SynthError::SymbolicUnsupported(_))));
    assert!(matches!(synth_smap_linear(&l), Err(SynthError::SymbolicUnsupported(_))));
    let flat = LinearProgressFunction { a: vec![int(0), int(0)], c: int(1) };
    let r = check_lpf(&l, &flat, &Domain::Box(BoxDomain::uniform(2, -5, 5))).unwrap();
    assert_eq!(r.verdict, Verdict::Refuted);
    assert_witnesses_replay(&l, &Certificate::Lpf(flat), &r);
}

#[test]
fn lpf_rejects_non_incremental_loops() {
    let l = single_loop("isqrt_walk.pwhile");
    let f = LinearProgressFunction { a: vec![int(1)], c: int(0) };
    assert!(matches!(check_lpf(&l, &f, &Domain::Symbolic), Err(CertError::NotIncremental)));
}

#[test]
fn negative_controls_are_not_found() {
    for name in ["biased_walk.pwhile", "drift_up.pwhile"] {
        let l = single_loop(name);
        assert!(matches!(synth_smap_linear(&l), Err(SynthError::NotFound(_))), "{name}");
        assert!(matches!(synth_lpf(&l), Err(SynthError::NotFound(_))), "{name}");
        assert!(matches!(synth_smap_bounded(&l, &default_box(&l)), Err(SynthError::NotFound(_))), "{name}");
    }
}

/// Everything any synthesizer returns passes the checker it was meant for.
#[test]
fn synthesis_check_closure_over_fixtures() {
    let mut certified = 0;
    for name in SINGLE_LOOP_FIXTURES {
        let l = single_loop(name);
        if let Ok(s) = synth_smap_linear(&l) {
            let r = check_smap(&l, &s.cert, &Domain::Symbolic).unwrap();
            assert_eq!(r.verdict, Verdict::Certified, "{name}");
            certified += 1;
        }
        if let Ok(s) = synth_lpf(&l) {
            let r = check_lpf(&l, &s.cert, &Domain::Symbolic).unwrap();
            assert_eq!(r.verdict, Verdict::Certified, "{name}");
            certified += 1;
        }
        let b = default_box(&l);
        if let Ok(s) = synth_smap_bounded(&l, &b) {
            let r = check_smap(&l, &s.cert, &Domain::Box(b)).unwrap();
            assert_eq!(r.verdict, Verdict::CertifiedOnBox, "{name} {}", s.cert.h);
            certified += 1;
        }
    }
    assert!(certified >= 5);
}

#[test]
fn scaling_preserves_verdicts() {
    let cases: Vec<(&str, &str, Option<i64>)> =
        vec![("walk.pwhile", "x + 1", Some(1)), ("countdown.pwhile", "x + 1", Some(1)), ("walk.pwhile", "0", None), ("isqrt_walk.pwhile", "x + 1", Some(1))];
    for (name, h, zeta) in cases {
        let l = single_loop(name);
        let base = smap(&l, h, int(1), zeta.map(int));
        let domain = if l.incremental.is_some() { Domain::Symbolic } else { Domain::Box(BoxDomain { ranges: vec![(1, 500)] }) };
        let v0 = check_smap(&l, &base, &domain).unwrap().verdict;
        for lambda in [ratio(1, 3), int(2), int(7)] {
            let scaled = scale_certificate(&base, &lambda).unwrap();
            assert_eq!(check_smap(&l, &scaled, &domain).unwrap().verdict, v0, "{name} {h} x {lambda}");
        }
    }
    let l = single_loop("geometric_walk.pwhile");
    let base = LinearProgressFunction { a: vec![int(1)], c: int(0) };
    for lambda in [ratio(1, 3), int(2), int(7)] {
        let scaled = LinearProgressFunction { a: vec![&base.a[0] * &lambda], c: &base.c * &lambda };
        assert_eq!(check_lpf(&l, &scaled, &Domain::Symbolic).unwrap().verdict, Verdict::Certified);
    }
}

#[test]
fn certificate_files_round_trip() {
    let l = single_loop("walk.pwhile");
    let c = Certificate::from_json(r#"{"kind":"smap","h":"x + 1","delta":"1","zeta":"1"}"#, &l.pvars).unwrap();
    let back = Certificate::from_json(&c.to_json(), &l.pvars).unwrap();
    assert_eq!(c, back);
    let f = Certificate::from_json(r#"{"kind":"lpf","a":["-1","1"],"c":"1/4"}"#, &["x".into(), "y".into()]).unwrap();
    assert_eq!(Certificate::from_json(&f.to_json(), &["x".into(), "y".into()]).unwrap(), f);
    assert!(Certificate::from_json(r#"{"kind":"smap","h":"z"}"#, &l.pvars).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Symbolic verdicts agree with brute-force evaluation of the
    /// conditions on a box, and refutations replay.
    #[test]
    fn symbolic_check_agrees_with_pointwise_evaluation(a in -4i64..=4, c in -4i64..=4, d in 1i64..=3, z in prop::option::of(1i64..=6)) {
        let l = single_loop("walk.pwhile");
        let mut h = ValueExpr { constant: int(c), ..ValueExpr::default() };
        if a != 0 {
            h.linear.insert("x".into(), int(a));
        }
        let cand = SupermartingaleMap::new(h, int(d), z.map(int)).unwrap();
        let r = check_smap(&l, &cand, &Domain::Symbolic).unwrap();
        assert_witnesses_replay(&l, &Certificate::Smap(cand.clone()), &r);
        let rb = check_smap(&l, &cand, &Domain::Box(BoxDomain { ranges: vec![(-60, 60)] })).unwrap();
        match r.verdict {
            Verdict::Certified => prop_assert_eq!(rb.verdict, Verdict::CertifiedOnBox),
            Verdict::Refuted => prop_assert_eq!(rb.verdict, Verdict::Refuted),
            v => prop_assert!(false, "unexpected {:?}", v),
        }
    }
}
