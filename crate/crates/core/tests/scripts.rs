use std::collections::BTreeMap;

use cqt_core::hilbert::{AtomRegister, AtomSite, LevelPair, C64};
use cqt_core::protocols::{prepare_bell, trial_rng, BellKind, ProtocolParams, SEPARATION_TOL};
use cqt_core::script::ast::{BinOp, Func};
use cqt_core::script::{
    execute_script, execute_script_with_state, parse_script, print_script, Event, Expr,
};
use proptest::prelude::*;
use rand::Rng;

const BELL: &str = include_str!("../examples/bell_phi_plus.cqp");
const TELEPORT: &str = include_str!("../examples/teleport.cqp");

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[test]
fn bell_script_has_the_preparation_sequence() {
    let s = parse_script(BELL).unwrap();
    let ops: Vec<_> = s.operations().map(|o| o.keyword()).collect();
    assert_eq!(
        ops,
        [
            "rotate",
            "dispersive",
            "rotate",
            "rotate",
            "dispersive",
            "rotate",
            "inject",
            "jc",
            "postselect",
            "expect",
            "report"
        ]
    );
}

#[test]
fn bell_script_matches_prepare_bell() {
    let s = parse_script(BELL).unwrap();
    let (report, state) = execute_script_with_state(&s, &params(&[("alpha", 2.0)]), 0).unwrap();
    assert!(report.passed);
    let p = match &report.events[0] {
        Event::Postselect { probability, .. } => *probability,
        other => panic!("{other:?}"),
    };
    let prep = prepare_bell(&ProtocolParams::new(2.0), BellKind::PhiPlus).unwrap();
    assert!((p - prep.success_probability).abs() < 1e-12);
    let (atoms, _) = state.remove_atom("P", SEPARATION_TOL).unwrap();
    let (reg, _) = atoms.split_cavity(SEPARATION_TOL).unwrap();
    assert!(reg.fidelity(&prep.state).unwrap() >= 1.0 - 1e-12);
}

#[test]
fn teleport_script_basis_state() {
    let s = parse_script(TELEPORT).unwrap();
    for sign in [1.0, -1.0] {
        for seed in 0..4 {
            let r = execute_script(
                &s,
                &params(&[("alpha", 2.0), ("zeta", 1.0), ("xi", 0.0), ("sign", sign)]),
                seed,
            )
            .unwrap();
            assert!(r.passed);
            let achieved = r
                .events
                .iter()
                .filter_map(|e| match e {
                    Event::Expect { achieved, .. } => Some(*achieved),
                    _ => None,
                })
                .next_back()
                .unwrap();
            assert!((achieved - 1.0).abs() < 1e-12, "{achieved}");
            assert_eq!(r.variables.len(), 2);
        }
    }
}

#[test]
fn teleport_script_random_inputs() {
    let s = parse_script(TELEPORT).unwrap();
    let mut rng = trial_rng(3, 0);
    for seed in 0..6 {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let (zeta, xi) = (theta.cos(), theta.sin());
        let sign = if seed % 2 == 0 { 1.0 } else { -1.0 };
        let (r, state) = execute_script_with_state(
            &s,
            &params(&[("alpha", 2.0), ("zeta", zeta), ("xi", xi), ("sign", sign)]),
            seed,
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
        let rho = state.reduced_density(&["A4"]).unwrap();
        let target = AtomRegister::product(&[(
            AtomSite::new("A4", LevelPair::Fg),
            [C64::new(zeta, 0.0), C64::new(xi, 0.0)],
        )])
        .unwrap();
        let t = target.amplitudes();
        let f = (t[0].conj() * rho[(0, 0)] * t[0]
            + t[0].conj() * rho[(0, 1)] * t[1]
            + t[1].conj() * rho[(1, 0)] * t[0]
            + t[1].conj() * rho[(1, 1)] * t[1])
            .re;
        assert!(f >= 1.0 - 1e-12, "{f}");
    }
}

#[test]
fn shipped_scripts_are_canonical_fixed_points() {
    for text in [BELL, TELEPORT] {
        let a = parse_script(text).unwrap();
        let printed = print_script(&a);
        let b = parse_script(&printed).unwrap();
        assert_eq!(a.statements, b.statements);
        assert_eq!(printed, print_script(&b));
    }
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0..1e3f64).prop_map(Expr::real),
        prop::sample::select(vec![0.0, 1.0, 1e-9, 2.5e-17, 12345.678]).prop_map(Expr::real),
        prop::sample::select(vec!["alpha", "zeta", "x_1"]).prop_map(|s| Expr::Param(s.into())),
        Just(Expr::Pi),
        Just(Expr::I),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
            (prop::sample::select(vec![Func::Sqrt, Func::Conj]), inner)
                .prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
        ]
    })
}

fn line_strategy() -> impl Strategy<Value = String> {
    let e = expr_strategy;
    prop_oneof![
        e().prop_map(|x| format!("inject {x}")),
        e().prop_map(|x| format!("dispersive A phi={x}")),
        e().prop_map(|x| format!("jc P gt={x}")),
        prop::sample::select(vec![
            "R_H", "K", "R5", "Z_CORR", "X_CORR", "XZ_CORR", "IDENTITY"
        ])
        .prop_map(|g| format!("rotate B {g}")),
        (e(), e(), e(), e()).prop_map(|(a, b, c, d)| format!("rotate A [[{a}, {b}], [{c}, {d}]]")),
        Just("postselect P e".to_string()),
        e().prop_map(|x| format!("expect fidelity bell psi- A B >= {x}")),
        (e(), e(), e()).prop_map(|(a, b, c)| format!("expect fidelity ket B ({a}, {b}) >= {c}")),
        e().prop_map(|x| format!("reset coherent {x}")),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_print_parse_is_a_fixed_point(alpha in expr_strategy(), body in prop::collection::vec(line_strategy(), 0..8)) {
        let mut text = format!("cavity coherent {alpha}\natom A levels (f,g) init g\natom B levels (f,g) init f\n");
        text.push_str("atom P levels (f,e) init f\n");
        for l in &body {
            text.push_str(l);
            text.push('\n');
        }
        text.push_str("measure A as m\nmeasure B as n\ncorrect B from m, n, -1\nreport m, n\n");
        // constant sub-expressions may fold to inf/NaN or a non-unitary matrix
        let first = match parse_script(&text) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        let printed = print_script(&first);
        let second = parse_script(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
        prop_assert_eq!(&first.statements, &second.statements);
        prop_assert_eq!(printed, print_script(&second));
    }
}
