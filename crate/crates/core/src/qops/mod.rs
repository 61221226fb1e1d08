//! Primitive operations on a [`CompositeState`]: Ramsey rotations, the
//! dispersive phase gate, coherent injection, resonant Jaynes–Cummings
//! exchange with a probe atom and projective atomic detection.
//!
//! Every operation returns a new state; inputs are never mutated.

mod displace;
mod measure;

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{bit_at, CompositeState, LevelPair, C64};

pub use displace::{displace, edge_mass, Displacement, EDGE_LEVELS};
pub use measure::{
    measure_atom, postselect, postselect_with_threshold, MeasurementOutcome, DEFAULT_POSTSELECT_MIN,
};

/// Unitarity tolerance for single-atom gates.
pub const UNITARY_TOL: f64 = 1e-12;

/// Largest amplitude tolerated on the frozen `(e, n_max)` corner in
/// [`jc_evolve`].
pub const JC_EDGE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GatePreset {
    #[serde(rename = "R_H")]
    RH,
    #[serde(rename = "K")]
    K,
    #[serde(rename = "R5")]
    R5,
    #[serde(rename = "Z_CORR")]
    ZCorr,
    #[serde(rename = "X_CORR")]
    XCorr,
    #[serde(rename = "XZ_CORR")]
    XZCorr,
    #[serde(rename = "IDENTITY")]
    Identity,
}

impl GatePreset {
    pub const ALL: [GatePreset; 7] = [
        GatePreset::RH,
        GatePreset::K,
        GatePreset::R5,
        GatePreset::ZCorr,
        GatePreset::XCorr,
        GatePreset::XZCorr,
        GatePreset::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GatePreset::RH => "R_H",
            GatePreset::K => "K",
            GatePreset::R5 => "R5",
            GatePreset::ZCorr => "Z_CORR",
            GatePreset::XCorr => "X_CORR",
            GatePreset::XZCorr => "XZ_CORR",
            GatePreset::Identity => "IDENTITY",
        }
    }

    /// Row-major matrix of the preset.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let r = |x: f64| C64::new(x, 0.0);
        let h = FRAC_1_SQRT_2;
        match self {
            GatePreset::RH => [[r(h), r(h)], [r(-h), r(h)]],
            GatePreset::K => [[r(h), r(-h)], [r(h), r(h)]],
            GatePreset::R5 => [[r(0.0), r(-1.0)], [r(1.0), r(0.0)]],
            GatePreset::ZCorr => [[r(1.0), r(0.0)], [r(0.0), r(-1.0)]],
            GatePreset::XCorr => [[r(0.0), r(1.0)], [r(1.0), r(0.0)]],
            GatePreset::XZCorr => [[r(0.0), r(1.0)], [r(-1.0), r(0.0)]],
            GatePreset::Identity => [[r(1.0), r(0.0)], [r(0.0), r(1.0)]],
        }
    }
}

impl fmt::Display for GatePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GatePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GatePreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown gate preset `{s}`")))
    }
}

/// A 2×2 unitary acting on one atom.
///
/// Rows and columns follow the atom's level order; column `j` is the image
/// of basis state `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate2 {
    matrix: [[C64; 2]; 2],
    preset: Option<GatePreset>,
}

impl Gate2 {
    pub fn new(matrix: [[C64; 2]; 2]) -> Result<Self> {
        let deviation = unitarity_deviation(&matrix);
        if deviation.is_nan() || deviation > UNITARY_TOL {
            return Err(Error::NonUnitary { deviation });
        }
        Ok(Self {
            matrix,
            preset: None,
        })
    }

    pub fn preset(preset: GatePreset) -> Self {
        Self {
            matrix: preset.matrix(),
            preset: Some(preset),
        }
    }

    pub fn matrix(&self) -> &[[C64; 2]; 2] {
        &self.matrix
    }

    pub fn preset_name(&self) -> Option<GatePreset> {
        self.preset
    }

    pub fn apply_to(&self, amps: [C64; 2]) -> [C64; 2] {
        let m = &self.matrix;
        [
            m[0][0] * amps[0] + m[0][1] * amps[1],
            m[1][0] * amps[0] + m[1][1] * amps[1],
        ]
    }
}

impl From<GatePreset> for Gate2 {
    fn from(p: GatePreset) -> Self {
        Gate2::preset(p)
    }
}

fn unitarity_deviation(m: &[[C64; 2]; 2]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let entry: C64 = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((entry - target).norm());
        }
    }
    worst
}

/// Applies `gate` to one atom.
pub fn apply_gate(state: &CompositeState, atom: &str, gate: &Gate2) -> Result<CompositeState> {
    let stride = state.atom_stride(state.atom_position(atom)?);
    let mut amp = state.amplitudes().to_vec();
    for i0 in (0..amp.len()).filter(|&i| bit_at(i, stride) == 0) {
        let i1 = i0 + stride;
        let [a0, a1] = gate.apply_to([amp[i0], amp[i1]]);
        amp[i0] = a0;
        amp[i1] = a1;
    }
    Ok(state.with_amplitudes(amp))
}

/// `U = exp(i phi a^dag a) |f><f| + |g><g|` on a dispersively coupled atom.
pub fn dispersive_gate(state: &CompositeState, atom: &str, phi: f64) -> Result<CompositeState> {
    let pos = state.atom_position(atom)?;
    let site = &state.sites()[pos];
    if site.basis() != LevelPair::Fg {
        return Err(Error::Usage(format!(
            "dispersive gate needs an (f,g) atom, `{atom}` has levels {}",
            site.basis()
        )));
    }
    let stride = state.atom_stride(pos);
    let d = state.cutoff().dim();
    let phases: Vec<C64> = (0..d)
        .map(|n| C64::from_polar(1.0, phi * n as f64))
        .collect();
    let amp = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            if bit_at(i, stride) == 0 {
                a * phases[i % d]
            } else {
                a
            }
        })
        .collect();
    Ok(state.with_amplitudes(amp))
}

/// Resonant exchange between probe level pair `(f, e)` and the cavity.
///
/// Each block `{(f, n), (e, n-1)}` rotates by `gt * sqrt(n)`; `(f, 0)` is
/// dark and `(e, n_max)` is frozen, with an error if it is populated beyond
/// [`JC_EDGE_TOL`].
pub fn jc_evolve(state: &CompositeState, probe: &str, gt: f64) -> Result<CompositeState> {
    let pos = state.atom_position(probe)?;
    let site = &state.sites()[pos];
    if site.basis() != LevelPair::Fe {
        return Err(Error::Usage(format!(
            "Jaynes-Cummings probe needs an (f,e) atom, `{probe}` has levels {}",
            site.basis()
        )));
    }
    let stride = state.atom_stride(pos);
    let d = state.cutoff().dim();
    let n_max = state.cutoff().n_max();
    let src = state.amplitudes();

    let edge = (0..src.len())
        .filter(|&i| bit_at(i, stride) == 1 && i % d == n_max)
        .map(|i| src[i].norm())
        .fold(0.0, f64::max);
    if edge > JC_EDGE_TOL {
        return Err(Error::Truncation {
            what: "probe (e, n_max) amplitude",
            mass: edge,
            tol: JC_EDGE_TOL,
        });
    }

    let rot: Vec<(f64, f64)> = (0..=n_max)
        .map(|n| {
            let theta = gt * (n as f64).sqrt();
            (theta.cos(), theta.sin())
        })
        .collect();
    let minus_i = C64::new(0.0, -1.0);
    let mut amp = src.to_vec();
    for base in (0..src.len())
        .step_by(d)
        .filter(|&b| bit_at(b, stride) == 0)
    {
        for (n, &(c, s)) in rot.iter().enumerate().skip(1) {
            let i_f = base + n;
            let i_e = base + stride + n - 1;
            amp[i_f] = src[i_f] * c + minus_i * s * src[i_e];
            amp[i_e] = src[i_e] * c + minus_i * s * src[i_f];
        }
    }
    Ok(state.with_amplitudes(amp))
}

/// `<sigma_x ⊗ sigma_x>` for two `(f,g)` atoms.
pub fn expectation_sigma_xx(state: &CompositeState, a1: &str, a2: &str) -> Result<f64> {
    let mut strides = [0; 2];
    for (slot, label) in strides.iter_mut().zip([a1, a2]) {
        let pos = state.atom_position(label)?;
        if state.sites()[pos].basis() != LevelPair::Fg {
            return Err(Error::Usage(format!(
                "sigma_x needs (f,g) atoms, `{label}` has levels {}",
                state.sites()[pos].basis()
            )));
        }
        *slot = state.atom_stride(pos);
    }
    if a1 == a2 {
        return Err(Error::Usage(
            "sigma_x sigma_x needs two distinct atoms".into(),
        ));
    }
    let flip = |i: usize, stride: usize| {
        if bit_at(i, stride) == 0 {
            i + stride
        } else {
            i - stride
        }
    };
    let amp = state.amplitudes();
    let value: C64 = amp
        .iter()
        .enumerate()
        .map(|(i, a)| a.conj() * amp[flip(flip(i, strides[0]), strides[1])])
        .sum();
    Ok(value.re / state.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{
        coherent_state, compose, fidelity, AtomRegister, AtomSite, FockCutoff, Level,
    };
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn one_atom(amps: [C64; 2], cav: &[C64], n_max: usize) -> CompositeState {
        compose(
            &[(AtomSite::new("A1", LevelPair::Fg), amps)],
            cav,
            FockCutoff::new(n_max).unwrap(),
        )
        .unwrap()
    }

    fn vac(n_max: usize) -> Vec<C64> {
        coherent_state(c(0.0), FockCutoff::new(n_max).unwrap()).amps
    }

    #[test]
    fn presets_are_unitary() {
        for p in GatePreset::ALL {
            assert!(unitarity_deviation(&p.matrix()) < 1e-15, "{p}");
            assert_eq!(p.name().parse::<GatePreset>().unwrap(), p);
        }
    }

    #[test]
    fn non_unitary_rejected() {
        let m = [[c(1.0), c(1.0)], [c(0.0), c(1.0)]];
        assert!(matches!(Gate2::new(m), Err(Error::NonUnitary { .. })));
    }

    #[test]
    fn ramsey_rotation_of_ground_state() {
        let s = one_atom([c(0.0), c(1.0)], &vac(2), 2);
        let t = apply_gate(&s, "A1", &GatePreset::RH.into()).unwrap();
        let h = FRAC_1_SQRT_2;
        let want = one_atom([c(h), c(h)], &vac(2), 2);
        assert_abs_diff_eq!(fidelity(&t, &want).unwrap(), 1.0, epsilon = 1e-15);

        let k = apply_gate(&want, "A1", &GatePreset::K.into()).unwrap();
        let g = one_atom([c(0.0), c(1.0)], &vac(2), 2);
        assert_abs_diff_eq!(fidelity(&k, &g).unwrap(), 1.0, epsilon = 1e-15);

        let same = apply_gate(&want, "A1", &GatePreset::Identity.into()).unwrap();
        assert_eq!(same, want);
    }

    #[test]
    fn gate_on_unknown_atom() {
        let s = one_atom([c(1.0), c(0.0)], &vac(1), 1);
        assert!(matches!(
            apply_gate(&s, "A9", &GatePreset::K.into()),
            Err(Error::UnknownAtom(_))
        ));
    }

    #[test]
    fn dispersive_pi_flips_coherent_amplitude() {
        let cut = FockCutoff::new(64).unwrap();
        let s = one_atom([c(1.0), c(0.0)], &coherent_state(c(2.0), cut).amps, 64);
        let t = dispersive_gate(&s, "A1", PI).unwrap();
        let want = one_atom([c(1.0), c(0.0)], &coherent_state(c(-2.0), cut).amps, 64);
        assert!(fidelity(&t, &want).unwrap() >= 1.0 - 1e-10);

        let g = one_atom([c(0.0), c(1.0)], &coherent_state(c(2.0), cut).amps, 64);
        assert_eq!(dispersive_gate(&g, "A1", PI).unwrap(), g);
        assert_eq!(dispersive_gate(&s, "A1", 0.0).unwrap(), s);
    }

    #[test]
    fn dispersive_refuses_probe_atom() {
        let s = compose(
            &[(AtomSite::new("P", LevelPair::Fe), [c(1.0), c(0.0)])],
            &vac(2),
            FockCutoff::new(2).unwrap(),
        )
        .unwrap();
        assert!(matches!(dispersive_gate(&s, "P", PI), Err(Error::Usage(_))));
    }

    fn probe_state(cav: &[C64], n_max: usize) -> CompositeState {
        compose(
            &[(AtomSite::new("P", LevelPair::Fe), [c(1.0), c(0.0)])],
            cav,
            FockCutoff::new(n_max).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn jc_dark_state_and_single_photon() {
        let s = probe_state(&vac(4), 4);
        assert_eq!(jc_evolve(&s, "P", 0.7).unwrap(), s);

        let mut one = vec![c(0.0); 5];
        one[1] = c(1.0);
        let s = probe_state(&one, 4);
        let t = jc_evolve(&s, "P", PI / 2.0).unwrap();
        let e0 = t.index(&[1], 0);
        assert_abs_diff_eq!(t.amplitudes()[e0].im, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.norm_sqr(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn jc_guards_top_of_space() {
        let s = compose(
            &[(AtomSite::new("P", LevelPair::Fe), [c(0.0), c(1.0)])],
            &{
                let mut v = vec![c(0.0); 3];
                v[2] = c(1.0);
                v
            },
            FockCutoff::new(2).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            jc_evolve(&s, "P", 0.3),
            Err(Error::Truncation { .. })
        ));
        let reg = one_atom([c(1.0), c(0.0)], &vac(2), 2);
        assert!(matches!(jc_evolve(&reg, "A1", 0.3), Err(Error::Usage(_))));
    }

    #[test]
    fn sigma_xx_on_bell_and_product() {
        let h = FRAC_1_SQRT_2;
        let sites = vec![
            AtomSite::new("A1", LevelPair::Fg),
            AtomSite::new("A2", LevelPair::Fg),
        ];
        let make = |amp: Vec<C64>| {
            let reg = AtomRegister::new(sites.clone(), amp).unwrap();
            CompositeState::from_register(&reg, &[c(1.0), c(0.0)], FockCutoff::new(1).unwrap())
                .unwrap()
        };
        let phi_p = make(vec![c(h), c(0.0), c(0.0), c(h)]);
        let phi_m = make(vec![c(h), c(0.0), c(0.0), c(-h)]);
        let psi_p = make(vec![c(0.0), c(h), c(h), c(0.0)]);
        let ff = make(vec![c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_abs_diff_eq!(
            expectation_sigma_xx(&phi_p, "A1", "A2").unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            expectation_sigma_xx(&psi_p, "A1", "A2").unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            expectation_sigma_xx(&phi_m, "A1", "A2").unwrap(),
            -1.0,
            epsilon = 1e-15
        );
        assert_eq!(expectation_sigma_xx(&ff, "A1", "A2").unwrap(), 0.0);
        assert!(expectation_sigma_xx(&ff, "A1", "A3").is_err());
    }

    #[test]
    fn basis_ket_respects_level_pair() {
        let p = AtomSite::new("P", LevelPair::Fe);
        assert_eq!(p.basis_ket(Level::E).unwrap(), [c(0.0), c(1.0)]);
        assert!(p.basis_ket(Level::G).is_err());
    }
}
