//! Bell-pair preparation, Bell-state discrimination and teleportation,
//! built only from the [`qops`](crate::qops) primitives.
//!
//! The cavity always starts in `|-alpha>`. Register atoms pass through it
//! dispersively with phase `phi` (π by default), a coherent field `±alpha`
//! is injected, and a resonant probe atom sent in `f` is post-selected (or
//! sampled) in `e` to disentangle the cavity from the atoms.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    coherent_state, AtomRegister, AtomSite, CompositeState, FockCutoff, InputQubit, Level,
    LevelPair, C64,
};
use crate::qops::{
    apply_gate, dispersive_gate, displace, jc_evolve, measure_atom, postselect_with_threshold,
    Gate2, GatePreset,
};

/// Label of the resonant probe atom inside protocol states.
pub const PROBE: &str = "probe";

/// Residual allowed when splitting a disentangled factor off a state.
pub const SEPARATION_TOL: f64 = 1e-9;

/// Fidelity threshold above which an atom counts as sitting in a basis state.
pub const BASIS_STATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Amplitude of the initial field `|-alpha>` and of the injections.
    pub alpha: f64,
    pub n_max: usize,
    /// Dispersive phase `g^2 tau / Delta`.
    pub phi: f64,
    /// Probe pulse area `g tau`.
    pub gt_probe: f64,
    /// Largest truncation mass tolerated for prepared or displaced fields.
    pub tail_tol: f64,
    pub postselect_min: f64,
    pub seed: u64,
}

impl ProtocolParams {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            n_max: 64,
            phi: PI,
            gt_probe: Self::default_gt(alpha),
            tail_tol: 1e-12,
            postselect_min: 1e-14,
            seed: 0,
        }
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_gt(mut self, gt: f64) -> Self {
        self.gt_probe = gt;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Photon number the probe pulse is tuned to: the integer nearest the
    /// mean `4 alpha^2` of `|±2 alpha>`, rounding halves up, at least 1.
    pub fn nbar(alpha: f64) -> u64 {
        ((4.0 * alpha * alpha + 0.5).floor() as u64).max(1)
    }

    /// True when `4 alpha^2` is not an integer and [`ProtocolParams::nbar`]
    /// had to round.
    pub fn nbar_rounded(&self) -> bool {
        let mean = 4.0 * self.alpha * self.alpha;
        (mean - Self::nbar(self.alpha) as f64).abs() > 1e-9
    }

    /// `gt` with `sqrt(nbar) * gt = pi / 2`.
    pub fn default_gt(alpha: f64) -> f64 {
        PI / (2.0 * (Self::nbar(alpha) as f64).sqrt())
    }

    pub fn cutoff(&self) -> Result<FockCutoff> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.phi.is_finite() && self.gt_probe.is_finite()) {
            return Err(Error::InvalidParams("phi and gt must be finite".into()));
        }
        if !(self.tail_tol > 0.0 && self.postselect_min >= 0.0) {
            return Err(Error::InvalidParams("tolerances must be positive".into()));
        }
        FockCutoff::new(self.n_max)
    }

    /// Cavity vector `|amplitude>`, rejected if truncation drops more than
    /// `tail_tol`.
    pub fn coherent_field(&self, amplitude: f64) -> Result<Vec<C64>> {
        let ket = coherent_state(C64::new(amplitude, 0.0), self.cutoff()?);
        if ket.tail_mass > self.tail_tol {
            return Err(Error::Truncation {
                what: "coherent-state tail mass",
                mass: ket.tail_mass,
                tol: self.tail_tol,
            });
        }
        Ok(ket.amps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InjectionSign {
    #[serde(rename = "plus")]
    Plus,
    #[serde(rename = "minus")]
    Minus,
}

impl InjectionSign {
    pub fn sign(self) -> f64 {
        match self {
            InjectionSign::Plus => 1.0,
            InjectionSign::Minus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InjectionSign::Plus => "plus",
            InjectionSign::Minus => "minus",
        }
    }
}

impl fmt::Display for InjectionSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InjectionSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" | "+alpha" => Ok(InjectionSign::Plus),
            "minus" | "-" | "-alpha" => Ok(InjectionSign::Minus),
            other => Err(Error::Usage(format!(
                "injection must be plus or minus, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellKind {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "phi+",
            BellKind::PhiMinus => "phi-",
            BellKind::PsiPlus => "psi+",
            BellKind::PsiMinus => "psi-",
        }
    }

    /// Amplitudes on `|ff>, |fg>, |gf>, |gg>`.
    pub fn amplitudes(self) -> [C64; 4] {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        match self {
            BellKind::PhiPlus => [h, z, z, h],
            BellKind::PhiMinus => [h, z, z, -h],
            BellKind::PsiPlus => [z, h, h, z],
            BellKind::PsiMinus => [z, h, -h, z],
        }
    }

    pub fn register(self, first: &str, second: &str) -> AtomRegister {
        AtomRegister::new(
            vec![
                AtomSite::new(first, LevelPair::Fg),
                AtomSite::new(second, LevelPair::Fg),
            ],
            self.amplitudes().to_vec(),
        )
        .expect("two distinct labels")
    }

    /// Eigenvalue of `sigma_x ⊗ sigma_x`.
    pub fn sigma_xx(self) -> i8 {
        match self {
            BellKind::PhiPlus | BellKind::PsiPlus => 1,
            BellKind::PhiMinus | BellKind::PsiMinus => -1,
        }
    }

    /// Field injected by [`prepare_bell`]; the Ψ kinds add an R5 rotation.
    pub fn preparation_injection(self) -> InjectionSign {
        match self {
            BellKind::PhiPlus | BellKind::PsiMinus => InjectionSign::Minus,
            BellKind::PhiMinus | BellKind::PsiPlus => InjectionSign::Plus,
        }
    }

    /// Injection under which [`discriminate_bell`] identifies this kind.
    pub fn discrimination_injection(self) -> InjectionSign {
        match self {
            BellKind::PhiPlus | BellKind::PsiPlus => InjectionSign::Plus,
            BellKind::PhiMinus | BellKind::PsiMinus => InjectionSign::Minus,
        }
    }

    /// Detection pair that identifies this kind in [`discriminate_bell`].
    pub fn discrimination_outcome(self) -> (Level, Level) {
        match self {
            BellKind::PhiPlus => (Level::G, Level::F),
            BellKind::PhiMinus => (Level::F, Level::G),
            BellKind::PsiPlus => (Level::F, Level::F),
            BellKind::PsiMinus => (Level::G, Level::G),
        }
    }

    pub fn from_outcomes(outcomes: (Level, Level)) -> Option<BellKind> {
        BellKind::ALL
            .into_iter()
            .find(|k| k.discrimination_outcome() == outcomes)
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BellKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Usage(format!("unknown Bell state `{s}` (phi+, phi-, psi+, psi-)"))
            })
    }
}

/// What Alice tells Bob: the field she injected and her two detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub injected: InjectionSign,
    pub outcome1: Level,
    pub outcome2: Level,
}

/// Bob's Ramsey rotation for a given message.
pub fn bob_correction(message: &ClassicalMessage) -> Gate2 {
    let same = message.outcome1 == message.outcome2;
    let preset = match (message.injected, same) {
        (InjectionSign::Minus, true) => GatePreset::Identity,
        (InjectionSign::Minus, false) => GatePreset::ZCorr,
        (InjectionSign::Plus, true) => GatePreset::XCorr,
        (InjectionSign::Plus, false) => GatePreset::XZCorr,
    };
    Gate2::preset(preset)
}

/// Independent generator for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellPreparation {
    pub kind: BellKind,
    /// Two-atom state labelled `A1`, `A2`.
    pub state: AtomRegister,
    /// Probability that the probe is found in `e`.
    pub success_probability: f64,
}

fn send_probe(state: &CompositeState, params: &ProtocolParams) -> Result<CompositeState> {
    let site = AtomSite::new(PROBE, LevelPair::Fe);
    let ket = site.basis_ket(Level::F)?;
    jc_evolve(&state.with_atom(site, ket)?, PROBE, params.gt_probe)
}

/// Conditions on the probe in `e` and drops it from the state.
fn detect_probe_excited(
    state: &CompositeState,
    params: &ProtocolParams,
) -> Result<(f64, CompositeState)> {
    let (p, post) = match postselect_with_threshold(state, PROBE, Level::E, params.postselect_min) {
        Ok(v) => v,
        Err(Error::ImpossiblePostselection { probability, .. }) => {
            return Err(Error::ProtocolAbort { probability })
        }
        Err(e) => return Err(e),
    };
    let (rest, _) = post.remove_atom(PROBE, SEPARATION_TOL)?;
    Ok((p, rest))
}

/// Prepares one of the four Bell states of atoms `A1`, `A2`.
///
/// Sequence: R on A1, dispersive A1, R on A1, R on A2, dispersive A2, R on
/// A2, inject `∓alpha`, probe, condition on `e`, then R5 on A2 for the Ψ
/// kinds.
pub fn prepare_bell(params: &ProtocolParams, kind: BellKind) -> Result<BellPreparation> {
    let cutoff = params.cutoff()?;
    let rh = Gate2::preset(GatePreset::RH);
    let a1 = AtomSite::new("A1", LevelPair::Fg);
    let a2 = AtomSite::new("A2", LevelPair::Fg);
    let atoms = AtomRegister::product(&[
        (a1.clone(), a1.basis_ket(Level::G)?),
        (a2.clone(), a2.basis_ket(Level::G)?),
    ])?;
    let mut s =
        CompositeState::from_register(&atoms, &params.coherent_field(-params.alpha)?, cutoff)?;

    s = apply_gate(&s, "A1", &rh)?;
    s = dispersive_gate(&s, "A1", params.phi)?;
    s = apply_gate(&s, "A1", &rh)?;
    s = apply_gate(&s, "A2", &rh)?;
    s = dispersive_gate(&s, "A2", params.phi)?;
    s = apply_gate(&s, "A2", &rh)?;
    let beta = kind.preparation_injection().sign() * params.alpha;
    s = displace(&s, C64::new(beta, 0.0), params.tail_tol)?;
    s = send_probe(&s, params)?;
    let (p, mut s) = detect_probe_excited(&s, params)?;
    if matches!(kind, BellKind::PsiPlus | BellKind::PsiMinus) {
        s = apply_gate(&s, "A2", &Gate2::preset(GatePreset::R5))?;
    }
    let (reg, _) = s.split_cavity(SEPARATION_TOL)?;
    Ok(BellPreparation {
        kind,
        state: reg,
        success_probability: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaXxOutcome {
    pub eigenvalue: i8,
    pub outcomes: (Level, Level),
}

fn check_pair(reg: &AtomRegister) -> Result<(String, String)> {
    match reg.sites() {
        [a, b] if a.basis() == LevelPair::Fg && b.basis() == LevelPair::Fg => {
            Ok((a.label().to_string(), b.label().to_string()))
        }
        _ => Err(Error::Usage(
            "expected a register of two (f,g) atoms".into(),
        )),
    }
}

/// Measures `sigma_x ⊗ sigma_x` by rotating both atoms with K and detecting.
/// Equal detections mean +1, different ones −1.
pub fn sigma_xx_procedure<R: Rng + ?Sized>(
    reg: &AtomRegister,
    rng: &mut R,
) -> Result<SigmaXxOutcome> {
    let (l1, l2) = check_pair(reg)?;
    let vacuum = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let mut s = CompositeState::from_register(reg, &vacuum, FockCutoff::new(1)?)?;
    let k = Gate2::preset(GatePreset::K);
    s = apply_gate(&s, &l1, &k)?;
    s = apply_gate(&s, &l2, &k)?;
    let m1 = measure_atom(&s, &l1, rng)?;
    let m2 = measure_atom(&m1.post_state, &l2, rng)?;
    let eigenvalue = if m1.level == m2.level { 1 } else { -1 };
    Ok(SigmaXxOutcome {
        eigenvalue,
        outcomes: (m1.level, m2.level),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrimination {
    pub outcomes: (Level, Level),
    pub inferred: BellKind,
    /// Probability of the probe `e` detection the run was conditioned on.
    pub probe_probability: f64,
}

/// Bell-state discrimination: K on the first atom, dispersive pass and R on
/// the second, inject `±alpha`, probe (conditioned on `e`), K on both atoms,
/// detect. The detected pair is mapped to a Bell kind by
/// [`BellKind::from_outcomes`].
pub fn discriminate_bell<R: Rng + ?Sized>(
    reg: &AtomRegister,
    params: &ProtocolParams,
    injected: InjectionSign,
    rng: &mut R,
) -> Result<Discrimination> {
    let (l1, l2) = check_pair(reg)?;
    let cutoff = params.cutoff()?;
    let k = Gate2::preset(GatePreset::K);
    let mut s = CompositeState::from_register(reg, &params.coherent_field(-params.alpha)?, cutoff)?;
    s = apply_gate(&s, &l1, &k)?;
    s = dispersive_gate(&s, &l2, params.phi)?;
    s = apply_gate(&s, &l2, &Gate2::preset(GatePreset::RH))?;
    s = displace(
        &s,
        C64::new(injected.sign() * params.alpha, 0.0),
        params.tail_tol,
    )?;
    s = send_probe(&s, params)?;
    let (p, mut s) = detect_probe_excited(&s, params)?;
    s = apply_gate(&s, &l1, &k)?;
    s = apply_gate(&s, &l2, &k)?;
    let m1 = measure_atom(&s, &l1, rng)?;
    let m2 = measure_atom(&m1.post_state, &l2, rng)?;
    let outcomes = (m1.level, m2.level);
    let inferred = BellKind::from_outcomes(outcomes).expect("every (f,g) pair maps to a Bell kind");
    Ok(Discrimination {
        outcomes,
        inferred,
        probe_probability: p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleportRecord {
    /// The probe was detected in `e`.
    pub success: bool,
    pub injected: InjectionSign,
    /// Probability of the probe `e` detection.
    pub probe_probability: f64,
    /// Probability of Alice's detection pair given the probe in `e`.
    pub bell_branch_probability: f64,
    pub message: Option<ClassicalMessage>,
    /// Fidelity of Bob's corrected atom to the input (0 when unsuccessful).
    pub fidelity: f64,
    pub bob_gate: Option<GatePreset>,
    /// Atom A1 ended in `f` or `g`.
    pub source_collapsed: bool,
}

/// Teleportation state up to (not including) Alice's detections.
///
/// Atoms `A1` (input), `A2`, `A4` (Bell pair Φ⁺ from [`prepare_bell`]) and
/// the probe, after the dispersive passes of A1 and A2, the injection and
/// the probe's resonant passage.
pub fn teleport_pre_measurement(
    input: &InputQubit,
    params: &ProtocolParams,
    injected: InjectionSign,
) -> Result<CompositeState> {
    let cutoff = params.cutoff()?;
    let pair = prepare_bell(params, BellKind::PhiPlus)?
        .state
        .relabel(&["A2", "A4"])?;
    let source =
        AtomRegister::product(&[(AtomSite::new("A1", LevelPair::Fg), input.amplitudes())])?;
    let atoms = source.tensor(&pair)?;
    let mut s =
        CompositeState::from_register(&atoms, &params.coherent_field(-params.alpha)?, cutoff)?;
    s = dispersive_gate(&s, "A1", params.phi)?;
    s = dispersive_gate(&s, "A2", params.phi)?;
    s = displace(
        &s,
        C64::new(injected.sign() * params.alpha, 0.0),
        params.tail_tol,
    )?;
    send_probe(&s, params)
}

/// Fidelity of one atom's reduced state to `target`.
pub fn atom_fidelity(state: &CompositeState, atom: &str, target: [C64; 2]) -> Result<f64> {
    let rho = state.reduced_density(&[atom])?;
    let norm = rho[(0, 0)].re + rho[(1, 1)].re;
    let mut f = C64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            f += target[i].conj() * rho[(i, j)] * target[j];
        }
    }
    Ok(f.re / norm)
}

/// Runs the full teleportation of `input` from A1 to Bob's atom A4.
///
/// The probe is sampled; if it is found in `f` the record has
/// `success = false` and no message.
pub fn teleport<R: Rng + ?Sized>(
    input: &InputQubit,
    params: &ProtocolParams,
    injected: InjectionSign,
    rng: &mut R,
) -> Result<TeleportRecord> {
    let s = teleport_pre_measurement(input, params, injected)?;
    let probe = measure_atom(&s, PROBE, rng)?;
    let probe_probability = if probe.level == Level::E {
        probe.probability
    } else {
        1.0 - probe.probability
    };
    if probe.level != Level::E {
        return Ok(TeleportRecord {
            success: false,
            injected,
            probe_probability,
            bell_branch_probability: 0.0,
            message: None,
            fidelity: 0.0,
            bob_gate: None,
            source_collapsed: false,
        });
    }
    let (s, _) = probe.post_state.remove_atom(PROBE, SEPARATION_TOL)?;
    let k = Gate2::preset(GatePreset::K);
    let s = apply_gate(&apply_gate(&s, "A1", &k)?, "A2", &k)?;
    let m1 = measure_atom(&s, "A1", rng)?;
    let m2 = measure_atom(&m1.post_state, "A2", rng)?;
    let message = ClassicalMessage {
        injected,
        outcome1: m1.level,
        outcome2: m2.level,
    };
    let gate = bob_correction(&message);
    let fin = apply_gate(&m2.post_state, "A4", &gate)?;
    let fidelity = atom_fidelity(&fin, "A4", input.amplitudes())?;
    let source_population = atom_fidelity(&fin, "A1", fin.site("A1")?.basis_ket(m1.level)?)?;
    Ok(TeleportRecord {
        success: true,
        injected,
        probe_probability,
        bell_branch_probability: m1.probability * m2.probability,
        message: Some(message),
        fidelity,
        bob_gate: gate.preset_name(),
        source_collapsed: source_population >= 1.0 - BASIS_STATE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params() -> ProtocolParams {
        ProtocolParams::new(2.0)
    }

    #[test]
    fn default_probe_area() {
        let p = params();
        assert_eq!(ProtocolParams::nbar(2.0), 16);
        assert!(!p.nbar_rounded());
        assert_abs_diff_eq!(
            (4.0f64 * 4.0).sqrt() * p.gt_probe,
            PI / 2.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(p.gt_probe, PI / 8.0, epsilon = 1e-15);
        let q = ProtocolParams::new(1.3);
        assert!(q.nbar_rounded());
        assert_eq!(ProtocolParams::nbar(1.3), 7);
        assert_eq!(ProtocolParams::nbar(0.1), 1);
        // 4 * 0.25^2 = 0.25 rounds to 0 and is clamped to 1; 4 * 0.75^2 = 2.25 -> 2
        assert_eq!(ProtocolParams::nbar(0.75), 2);
    }

    #[test]
    fn bob_correction_table() {
        let msg = |injected, o1, o2| ClassicalMessage {
            injected,
            outcome1: o1,
            outcome2: o2,
        };
        use InjectionSign::*;
        use Level::*;
        let cases = [
            (Minus, F, F, GatePreset::Identity),
            (Minus, G, G, GatePreset::Identity),
            (Minus, F, G, GatePreset::ZCorr),
            (Minus, G, F, GatePreset::ZCorr),
            (Plus, F, F, GatePreset::XCorr),
            (Plus, G, G, GatePreset::XCorr),
            (Plus, F, G, GatePreset::XZCorr),
            (Plus, G, F, GatePreset::XZCorr),
        ];
        for (inj, o1, o2, want) in cases {
            assert_eq!(bob_correction(&msg(inj, o1, o2)).preset_name(), Some(want));
        }
    }

    #[test]
    fn outcome_map_is_a_bijection() {
        for k in BellKind::ALL {
            assert_eq!(BellKind::from_outcomes(k.discrimination_outcome()), Some(k));
            assert_eq!(k.name().parse::<BellKind>().unwrap(), k);
        }
    }

    #[test]
    fn names_parse() {
        assert_eq!("-".parse::<InjectionSign>().unwrap(), InjectionSign::Minus);
        assert!("sideways".parse::<InjectionSign>().is_err());
        assert!("phi".parse::<BellKind>().is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = params();
        p.alpha = -1.0;
        assert!(matches!(
            prepare_bell(&p, BellKind::PhiPlus),
            Err(Error::InvalidParams(_))
        ));
        let small = params().with_n_max(20);
        assert!(matches!(
            prepare_bell(&small, BellKind::PhiPlus),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn trial_streams_differ() {
        let a: u64 = trial_rng(5, 0).random();
        let b: u64 = trial_rng(5, 1).random();
        let c: u64 = trial_rng(5, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn prepared_states_match_targets() {
        let p = params();
        for kind in BellKind::ALL {
            let prep = prepare_bell(&p, kind).unwrap();
            let f = prep.state.fidelity(&kind.register("A1", "A2")).unwrap();
            assert!(f >= 1.0 - 1e-10, "{kind}: fidelity {f}");
            assert_abs_diff_eq!(
                prep.success_probability,
                0.4809401184849507,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn sigma_xx_eigenvalues_are_deterministic() {
        let mut rng = trial_rng(11, 0);
        for kind in BellKind::ALL {
            for _ in 0..20 {
                let o = sigma_xx_procedure(&kind.register("A1", "A2"), &mut rng).unwrap();
                assert_eq!(o.eigenvalue, kind.sigma_xx());
            }
        }
    }

    #[test]
    fn matched_discrimination_is_deterministic() {
        let p = params();
        let mut rng = trial_rng(3, 0);
        for kind in BellKind::ALL {
            let reg = kind.register("A1", "A2");
            for _ in 0..5 {
                let d =
                    discriminate_bell(&reg, &p, kind.discrimination_injection(), &mut rng).unwrap();
                assert_eq!(d.inferred, kind);
                assert_abs_diff_eq!(d.probe_probability, 0.4809401184849507, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn teleport_reaches_unit_fidelity() {
        let p = params();
        let input = InputQubit::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8)).unwrap();
        let mut rng = trial_rng(7, 0);
        let mut successes = 0;
        for sign in [InjectionSign::Plus, InjectionSign::Minus] {
            for _ in 0..12 {
                let r = teleport(&input, &p, sign, &mut rng).unwrap();
                assert_abs_diff_eq!(r.probe_probability, 0.4809401184849507, epsilon = 1e-9);
                if r.success {
                    successes += 1;
                    assert!(r.fidelity >= 1.0 - 1e-10, "{:?}", r);
                    assert!(r.source_collapsed);
                    assert_abs_diff_eq!(r.bell_branch_probability, 0.25, epsilon = 1e-9);
                }
            }
        }
        assert!(successes > 0);
    }

    #[test]
    fn sigma_xx_requires_two_fg_atoms() {
        let reg = AtomRegister::product(&[(
            AtomSite::new("A", LevelPair::Fg),
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        )])
        .unwrap();
        let mut rng = trial_rng(0, 0);
        assert!(sigma_xx_procedure(&reg, &mut rng).is_err());
    }
}
