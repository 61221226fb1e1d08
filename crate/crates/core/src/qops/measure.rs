use rand::Rng;

use crate::error::{Error, Result};
use crate::hilbert::{bit_at, CompositeState, Level};

/// Smallest branch probability [`postselect`] accepts.
pub const DEFAULT_POSTSELECT_MIN: f64 = 1e-14;

const NORMALIZED_TOL: f64 = 1e-10;

/// Result of a projective detection of one atom.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub atom: String,
    pub level: Level,
    /// Born probability of `level` before the collapse.
    pub probability: f64,
    pub post_state: CompositeState,
}

fn branch_probabilities(state: &CompositeState, stride: usize) -> Result<[f64; 2]> {
    let mut p = [0.0; 2];
    for (i, a) in state.amplitudes().iter().enumerate() {
        p[bit_at(i, stride)] += a.norm_sqr();
    }
    let total = p[0] + p[1];
    if total < 1e-14 {
        return Err(Error::DegenerateNorm(total.sqrt()));
    }
    if (total - 1.0).abs() > NORMALIZED_TOL {
        return Err(Error::NotNormalized { norm_sqr: total });
    }
    Ok([p[0] / total, p[1] / total])
}

fn project(state: &CompositeState, stride: usize, bit: usize, probability: f64) -> CompositeState {
    let scale = 1.0 / (probability * state.norm_sqr()).sqrt();
    let amp = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            if bit_at(i, stride) == bit {
                a * scale
            } else {
                a * 0.0
            }
        })
        .collect();
    state.with_amplitudes(amp)
}

/// Samples the level of `atom` with Born probabilities and collapses the
/// state onto the observed branch.
pub fn measure_atom<R: Rng + ?Sized>(
    state: &CompositeState,
    atom: &str,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    let pos = state.atom_position(atom)?;
    let stride = state.atom_stride(pos);
    let p = branch_probabilities(state, stride)?;
    let u: f64 = rng.random();
    let bit = if u < p[0] { 0 } else { 1 };
    Ok(MeasurementOutcome {
        atom: atom.to_string(),
        level: state.sites()[pos].level(bit),
        probability: p[bit],
        post_state: project(state, stride, bit, p[bit]),
    })
}

/// Conditions the state on `atom` being found in `level`.
///
/// Returns the branch probability and the renormalized post-selected state.
pub fn postselect(
    state: &CompositeState,
    atom: &str,
    level: Level,
) -> Result<(f64, CompositeState)> {
    postselect_with_threshold(state, atom, level, DEFAULT_POSTSELECT_MIN)
}

/// [`postselect`] with an explicit minimum branch probability.
pub fn postselect_with_threshold(
    state: &CompositeState,
    atom: &str,
    level: Level,
    min_probability: f64,
) -> Result<(f64, CompositeState)> {
    let pos = state.atom_position(atom)?;
    let bit = state.sites()[pos].index_of(level)?;
    let stride = state.atom_stride(pos);
    let p = branch_probabilities(state, stride)?[bit];
    if p < min_probability {
        return Err(Error::ImpossiblePostselection {
            atom: atom.to_string(),
            level: level.to_string(),
            probability: p,
        });
    }
    Ok((p, project(state, stride, bit, p)))
}
