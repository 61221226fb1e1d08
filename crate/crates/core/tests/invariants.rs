use cqt_core::hilbert::{
    cat_norm_sqr, cat_state, coherent_state, fidelity, inner_product, AtomSite, CompositeState,
    FockCutoff, Level, LevelPair, Parity, C64,
};
use cqt_core::qops::{
    apply_gate, dispersive_gate, displace, jc_evolve, postselect, Displacement, Gate2, GatePreset,
};
use proptest::prelude::*;

fn sites(atoms: usize) -> Vec<AtomSite> {
    (0..atoms)
        .map(|i| {
            let basis = if i + 1 == atoms {
                LevelPair::Fe
            } else {
                LevelPair::Fg
            };
            AtomSite::new(format!("A{i}"), basis)
        })
        .collect()
}

/// Normalized state with empty top two Fock levels.
fn state_from(atoms: usize, n_max: usize, raw: &[(f64, f64)]) -> CompositeState {
    let cutoff = FockCutoff::new(n_max).unwrap();
    let d = cutoff.dim();
    let mut amp: Vec<C64> = raw
        .iter()
        .cycle()
        .take((1 << atoms) * d)
        .enumerate()
        .map(|(i, &(re, im))| {
            if i % d + 2 >= d {
                C64::new(0.0, 0.0)
            } else {
                C64::new(re, im)
            }
        })
        .collect();
    let norm = amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amp {
        *a /= norm;
    }
    CompositeState::from_amplitudes(sites(atoms), cutoff, amp).unwrap()
}

fn raw() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 8..40).prop_filter("non-zero", |v| {
        v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3)
    })
}

proptest! {
    #[test]
    fn index_round_trip(atoms in 0usize..5, n_max in 1usize..20, seed in any::<u64>()) {
        let s = state_from(atoms.max(1), n_max, &[(1.0, 0.0)]);
        let idx = (seed as usize) % s.dim();
        let (bits, n) = s.decompose(idx);
        prop_assert_eq!(s.index(&bits, n), idx);
        prop_assert!(n <= n_max);
    }

    #[test]
    fn primitives_preserve_norm(atoms in 2usize..=3, n_max in 3usize..=16, r in raw(),
                                phi in -7.0..7.0f64, gt in 0.0..4.0f64, b in -1.0..1.0f64) {
        let s = state_from(atoms, n_max, &r);
        let k = Gate2::preset(GatePreset::K);
        let ops = [
            apply_gate(&s, "A0", &k).unwrap(),
            dispersive_gate(&s, "A0", phi).unwrap(),
            jc_evolve(&s, &format!("A{}", atoms - 1), gt).unwrap(),
            Displacement::new(C64::new(b, 0.3 * b), s.cutoff()).apply(&s).unwrap(),
        ];
        for t in &ops {
            prop_assert!((t.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dispersive_phases_compose(r in raw(), a in -4.0..4.0f64, b in -4.0..4.0f64) {
        let s = state_from(2, 10, &r);
        let two = dispersive_gate(&dispersive_gate(&s, "A0", a).unwrap(), "A0", b).unwrap();
        let one = dispersive_gate(&s, "A0", a + b).unwrap();
        prop_assert!(fidelity(&one, &two).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn k_squared_is_r5(r in raw()) {
        let s = state_from(2, 6, &r);
        let k = Gate2::preset(GatePreset::K);
        let kk = apply_gate(&apply_gate(&s, "A0", &k).unwrap(), "A0", &k).unwrap();
        let r5 = apply_gate(&s, "A0", &Gate2::preset(GatePreset::R5)).unwrap();
        let overlap = inner_product(&kk, &r5).unwrap();
        prop_assert!((overlap - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn displacement_inverse(re in -1.5..1.5f64, im in -1.5..1.5f64) {
        let cutoff = FockCutoff::new(40).unwrap();
        let s = CompositeState::from_amplitudes(
            sites(1),
            cutoff,
            [coherent_state(C64::new(0.5, -0.2), cutoff).amps, vec![C64::new(0.0, 0.0); 41]].concat(),
        ).unwrap();
        let beta = C64::new(re, im);
        let t = displace(&displace(&s, beta, 1e-12).unwrap(), -beta, 1e-12).unwrap();
        prop_assert!(fidelity(&s, &t).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn branch_probabilities_sum_to_one(atoms in 1usize..=3, r in raw()) {
        let s = state_from(atoms, 5, &r);
        let label = format!("A{}", atoms - 1);
        let site = s.site(&label).unwrap().clone();
        let total: f64 = site.basis().levels().iter()
            .filter_map(|&l| postselect(&s, &label, l).ok().map(|(p, _)| p))
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cat_norms_follow_closed_form(alpha in 0.1..2.0f64) {
        let cutoff = FockCutoff::new(64).unwrap();
        for parity in [Parity::Even, Parity::Odd] {
            let c = cat_state(alpha, parity, cutoff, false).unwrap();
            prop_assert!((c.norm_sqr() - cat_norm_sqr(alpha, parity)).abs() < 1e-10);
        }
        let even = cat_state(alpha, Parity::Even, cutoff, true).unwrap().amps;
        let odd = cat_state(alpha, Parity::Odd, cutoff, true).unwrap().amps;
        let overlap: C64 = even.iter().zip(&odd).map(|(a, b)| a.conj() * b).sum();
        prop_assert!(overlap.norm() < 1e-12);
    }
}

#[test]
fn probe_in_f_with_vacuum_never_excites() {
    let cutoff = FockCutoff::new(4).unwrap();
    let mut amp = vec![C64::new(0.0, 0.0); 10];
    amp[0] = C64::new(1.0, 0.0);
    let s = CompositeState::from_amplitudes(vec![AtomSite::new("P", LevelPair::Fe)], cutoff, amp)
        .unwrap();
    let t = jc_evolve(&s, "P", 1.234).unwrap();
    assert!(postselect(&t, "P", Level::E).is_err());
}
