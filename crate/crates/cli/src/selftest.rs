//! `cqt selftest`: the fast path against the oracle, runnable in the field.

use cqt_core::hilbert::{
    cat_norm_sqr, cat_state, AtomSite, CompositeState, FockCutoff, InputQubit, LevelPair, Parity,
    C64,
};
use cqt_core::oracle::{self, dense_unitary, Primitive};
use cqt_core::protocols::{prepare_bell, trial_rng, BellKind, InjectionSign, ProtocolParams};
use cqt_core::qops::{apply_gate, dispersive_gate, jc_evolve, Displacement, Gate2, GatePreset};
use rand::Rng;
use serde::Serialize;

use crate::{csv_text, Failure, Output};

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    bound: String,
    passed: bool,
}

fn check(name: impl Into<String>, value: f64, bound: &str, passed: bool) -> Check {
    Check {
        name: name.into(),
        value,
        bound: bound.into(),
        passed,
    }
}

fn random_state(rng: &mut impl Rng, n_max: usize) -> CompositeState {
    let sites = vec![
        AtomSite::new("A", LevelPair::Fg),
        AtomSite::new("B", LevelPair::Fg),
        AtomSite::new("P", LevelPair::Fe),
    ];
    let d = n_max + 1;
    let mut amp: Vec<C64> = (0..8 * d)
        .map(|i| {
            if i % d + 2 >= d {
                C64::new(0.0, 0.0)
            } else {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            }
        })
        .collect();
    let n = amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amp.iter_mut().for_each(|a| *a /= n);
    CompositeState::from_amplitudes(sites, FockCutoff::new(n_max).expect("positive"), amp)
        .expect("consistent")
}

pub(crate) fn run(seed: u64) -> Result<Output, Failure> {
    let mut checks = Vec::new();
    let p = ProtocolParams::new(2.0);

    let probe = oracle::probe_success_probability(-2.0 * p.alpha, p.gt_probe, p.n_max)?;
    checks.push(check(
        "probe excitation probability (oracle)",
        probe,
        ">= 0.95",
        probe >= 0.95,
    ));
    for kind in BellKind::ALL {
        let prep = prepare_bell(&p, kind)?;
        let f = prep.state.fidelity(&kind.register("A1", "A2"))?;
        checks.push(check(
            format!("{kind} fidelity"),
            f,
            ">= 1 - 1e-9",
            f >= 1.0 - 1e-9,
        ));
        let gap = (prep.success_probability - probe / 2.0).abs();
        checks.push(check(
            format!("{kind} success probability - oracle/2"),
            gap,
            "<= 1e-9",
            gap <= 1e-9,
        ));
    }

    let cutoff = FockCutoff::new(64).expect("positive");
    for alpha in [0.5, 1.0, 2.0] {
        let even = cat_state(alpha, Parity::Even, cutoff, false)?;
        let gap = (even.norm_sqr() - cat_norm_sqr(alpha, Parity::Even)).abs();
        checks.push(check(
            format!("even cat norm, alpha={alpha}"),
            gap,
            "<= 1e-10",
            gap <= 1e-10,
        ));
    }

    let mut rng = trial_rng(seed, 0);
    let mut worst = [0.0f64; 4];
    for _ in 0..10 {
        let s = random_state(&mut rng, 12);
        let beta = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let phi = rng.random_range(-4.0..4.0);
        let gt = rng.random_range(0.0..3.0);
        let k = Gate2::preset(GatePreset::K);
        let cases = [
            (
                apply_gate(&s, "A", &k)?,
                Primitive::Gate {
                    atom: "A".into(),
                    gate: k,
                },
            ),
            (
                dispersive_gate(&s, "B", phi)?,
                Primitive::Dispersive {
                    atom: "B".into(),
                    phi,
                },
            ),
            (
                Displacement::new(beta, s.cutoff()).apply(&s)?,
                Primitive::Displace { beta },
            ),
            (
                jc_evolve(&s, "P", gt)?,
                Primitive::Jc {
                    probe: "P".into(),
                    gt,
                },
            ),
        ];
        for (i, (fast, prim)) in cases.into_iter().enumerate() {
            let dense = dense_unitary(&prim, s.sites(), s.cutoff())?.apply_vec(s.amplitudes())?;
            let diff = fast
                .amplitudes()
                .iter()
                .zip(&dense)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst[i] = worst[i].max(diff);
        }
    }
    for (name, w) in ["gate", "dispersive", "displace", "jc"].iter().zip(worst) {
        checks.push(check(
            format!("{name} vs dense unitary"),
            w,
            "<= 1e-10",
            w <= 1e-10,
        ));
    }

    let input = InputQubit::haar_random(&mut rng);
    for sign in [InjectionSign::Plus, InjectionSign::Minus] {
        let branches = oracle::teleport_branches(&input, &p, sign)?;
        let purity = oracle::purity(&oracle::bob_average_state(&branches));
        let gap = (purity - 0.5).abs();
        checks.push(check(
            format!("no-signaling purity ({sign})"),
            purity,
            "|x - 1/2| <= 1e-9",
            gap <= 1e-9,
        ));
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(Output {
        json: serde_json::json!({ "command": "selftest", "seed": seed, "passed": passed, "checks": checks }),
        csv: Some(csv_text(&checks)?),
        failed: (!passed).then(|| "selftest check failed".to_string()),
    })
}
