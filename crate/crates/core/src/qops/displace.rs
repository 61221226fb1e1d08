use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::hilbert::{CompositeState, FockCutoff, C64};

/// Number of top Fock levels whose population is reported by [`edge_mass`].
pub const EDGE_LEVELS: usize = 2;

const CACHE_LIMIT: usize = 256;

type CacheKey = (u64, u64, usize);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<Vec<C64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<Vec<C64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Truncated displacement `exp(beta a^dag - beta* a)` on the cavity factor.
///
/// The matrix is the exponential of the generator restricted to
/// `n <= n_max`, so it is unitary on the retained space; the textbook
/// identity `D(beta)|alpha> = |alpha + beta>` then holds up to truncation.
#[derive(Debug, Clone)]
pub struct Displacement {
    beta: C64,
    cutoff: FockCutoff,
    matrix: Arc<Vec<C64>>,
}

impl Displacement {
    pub fn new(beta: C64, cutoff: FockCutoff) -> Self {
        let key = (beta.re.to_bits(), beta.im.to_bits(), cutoff.n_max());
        let mut guard = cache().lock().unwrap_or_else(|e| e.into_inner());
        let matrix = match guard.get(&key) {
            Some(m) => Arc::clone(m),
            None => {
                let m = Arc::new(expm(&generator(beta, cutoff.dim()), cutoff.dim()));
                if guard.len() >= CACHE_LIMIT {
                    guard.clear();
                }
                guard.insert(key, Arc::clone(&m));
                m
            }
        };
        Self {
            beta,
            cutoff,
            matrix,
        }
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    /// Matrix element `<row| D |col>`.
    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[row * self.cutoff.dim() + col]
    }

    /// Applies the displacement without any truncation check.
    pub fn apply(&self, state: &CompositeState) -> Result<CompositeState> {
        if state.cutoff() != self.cutoff {
            return Err(Error::Dimension(format!(
                "displacement built for n_max {}, state has n_max {}",
                self.cutoff.n_max(),
                state.cutoff().n_max()
            )));
        }
        let d = self.cutoff.dim();
        let mut out = Vec::with_capacity(state.dim());
        for block in state.amplitudes().chunks(d) {
            for row in self.matrix.chunks(d) {
                out.push(row.iter().zip(block).map(|(m, a)| m * a).sum());
            }
        }
        Ok(state.with_amplitudes(out))
    }
}

/// Population of the highest [`EDGE_LEVELS`] Fock levels, relative to the
/// state norm.
pub fn edge_mass(state: &CompositeState) -> f64 {
    let p = state.photon_distribution();
    let from = p.len().saturating_sub(EDGE_LEVELS);
    p[from..].iter().sum::<f64>() / state.norm_sqr()
}

/// Coherent injection of amplitude `beta`.
///
/// Fails with [`Error::Truncation`] when the displaced state puts more than
/// `tail_tol` of its population on the top Fock levels.
pub fn displace(state: &CompositeState, beta: C64, tail_tol: f64) -> Result<CompositeState> {
    let out = Displacement::new(beta, state.cutoff()).apply(state)?;
    let mass = edge_mass(&out);
    if mass > tail_tol {
        return Err(Error::Truncation {
            what: "post-displacement edge mass",
            mass,
            tol: tail_tol,
        });
    }
    Ok(out)
}

fn generator(beta: C64, d: usize) -> Vec<C64> {
    let mut g = vec![C64::new(0.0, 0.0); d * d];
    for n in 1..d {
        let s = (n as f64).sqrt();
        // a^dag |n-1> = sqrt(n) |n>,  a |n> = sqrt(n) |n-1>
        g[n * d + (n - 1)] = beta * s;
        g[(n - 1) * d + n] = -beta.conj() * s;
    }
    g
}

fn matmul(a: &[C64], b: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        let row = &mut out[i * d..(i + 1) * d];
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, &bkj) in row.iter_mut().zip(&b[k * d..(k + 1) * d]) {
                *o += aik * bkj;
            }
        }
    }
    out
}

fn one_norm(a: &[C64], d: usize) -> f64 {
    (0..d)
        .map(|j| (0..d).map(|i| a[i * d + j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Scaling and squaring with a Taylor series on the scaled matrix.
fn expm(a: &[C64], d: usize) -> Vec<C64> {
    let norm = one_norm(a, d);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings);
    let b: Vec<C64> = a.iter().map(|x| x * scale).collect();

    let mut identity = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        identity[i * d + i] = C64::new(1.0, 0.0);
    }
    let mut result = identity.clone();
    let mut term = identity;
    for k in 1..=40 {
        term = matmul(&term, &b, d);
        let inv_k = 1.0 / k as f64;
        term.iter_mut().for_each(|t| *t *= inv_k);
        result.iter_mut().zip(&term).for_each(|(r, t)| *r += t);
        if one_norm(&term, d) < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result, d);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_state, compose, fidelity, AtomSite, LevelPair};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn cavity_only(amps: Vec<C64>, cut: FockCutoff) -> CompositeState {
        compose(&[], &amps, cut).unwrap()
    }

    #[test]
    fn returns_coherent_state_to_vacuum() {
        let cut = FockCutoff::new(64).unwrap();
        let s = cavity_only(coherent_state(c(2.0), cut).amps, cut);
        let t = displace(&s, c(-2.0), 1e-12).unwrap();
        let vac = cavity_only(coherent_state(c(0.0), cut).amps, cut);
        assert!(fidelity(&t, &vac).unwrap() >= 1.0 - 1e-10);
    }

    #[test]
    fn doubles_negative_amplitude() {
        let cut = FockCutoff::new(64).unwrap();
        let s = cavity_only(coherent_state(c(-2.0), cut).amps, cut);
        let t = displace(&s, c(-2.0), 1e-12).unwrap();
        let want = cavity_only(coherent_state(c(-4.0), cut).amps, cut);
        assert!(fidelity(&t, &want).unwrap() >= 1.0 - 1e-10);
    }

    #[test]
    fn zero_displacement_is_identity() {
        let cut = FockCutoff::new(12).unwrap();
        let s = compose(
            &[(
                AtomSite::new("A1", LevelPair::Fg),
                [c(0.6), C64::new(0.0, 0.8)],
            )],
            &coherent_state(C64::new(0.3, 0.4), cut).amps,
            cut,
        )
        .unwrap();
        let t = Displacement::new(c(0.0), cut).apply(&s).unwrap();
        for (a, b) in s.amplitudes().iter().zip(t.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn complex_displacement_phase_convention() {
        // D(beta)|alpha> = exp(i Im(beta conj(alpha))) |alpha + beta>
        let cut = FockCutoff::new(60).unwrap();
        let alpha = C64::new(1.0, 0.5);
        let beta = C64::new(-0.5, 1.0);
        let s = cavity_only(coherent_state(alpha, cut).amps, cut);
        let t = displace(&s, beta, 1e-12).unwrap();
        let want = coherent_state(alpha + beta, cut).amps;
        let phase = C64::from_polar(1.0, (beta * alpha.conj()).im);
        for (a, w) in t.amplitudes().iter().zip(&want) {
            assert!((a - phase * w).norm() < 1e-10);
        }
    }

    #[test]
    fn overflowing_displacement_is_reported() {
        let cut = FockCutoff::new(10).unwrap();
        let s = cavity_only(coherent_state(c(0.0), cut).amps, cut);
        match displace(&s, c(3.0), 1e-12) {
            Err(Error::Truncation { mass, .. }) => assert!(mass > 1e-12),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn cutoff_mismatch() {
        let d = Displacement::new(c(1.0), FockCutoff::new(4).unwrap());
        let cut = FockCutoff::new(5).unwrap();
        let s = cavity_only(coherent_state(c(0.0), cut).amps, cut);
        assert!(matches!(d.apply(&s), Err(Error::Dimension(_))));
    }
}
