//! Slow, independent reference implementations used to check the fast path:
//! explicit dense matrices for every primitive, exact branch enumeration for
//! the protocols, and a scalar sum for the probe excitation probability.
//!
//! Nothing here calls into [`qops`](crate::qops) kernels; index arithmetic,
//! the displacement exponential and projections are all redone from scratch.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{
    AtomRegister, AtomSite, CompositeState, FockCutoff, InputQubit, Level, LevelPair, C64,
};
use crate::protocols::{BellKind, InjectionSign, ProtocolParams};
use crate::qops::{Gate2, GatePreset};

/// Largest composite dimension [`dense_unitary`] will build.
pub const DENSE_DIM_CAP: usize = 4096;

/// Tail mass above which [`probe_success_probability`] refuses the cutoff.
pub const ORACLE_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Gate { atom: String, gate: Gate2 },
    Dispersive { atom: String, phi: f64 },
    Displace { beta: C64 },
    Jc { probe: String, gt: f64 },
}

impl Primitive {
    fn describe(&self) -> String {
        match self {
            Primitive::Gate { atom, gate } => match gate.preset_name() {
                Some(p) => format!("gate {p} on {atom}"),
                None => format!("gate {:?} on {atom}", gate.matrix()),
            },
            Primitive::Dispersive { atom, phi } => format!("dispersive phi={phi} on {atom}"),
            Primitive::Displace { beta } => format!("displace beta={beta}"),
            Primitive::Jc { probe, gt } => format!("jc gt={gt} on {probe}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseUnitary {
    pub matrix: DMatrix<C64>,
    pub provenance: String,
}

impl DenseUnitary {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |U^dag U - I|`.
    pub fn deviation(&self) -> f64 {
        let g = self.matrix.adjoint() * &self.matrix;
        let mut worst = 0.0f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn apply_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "vector {} vs operator {}",
                v.len(),
                self.dim()
            )));
        }
        Ok((&self.matrix * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect())
    }

    pub fn apply(&self, state: &CompositeState) -> Result<CompositeState> {
        Ok(state.with_amplitudes(self.apply_vec(state.amplitudes())?))
    }

    pub fn compose(&self, after: &DenseUnitary) -> DenseUnitary {
        DenseUnitary {
            matrix: &after.matrix * &self.matrix,
            provenance: format!("{} ; {}", self.provenance, after.provenance),
        }
    }
}

/// Index bookkeeping independent of [`CompositeState`]'s own helpers.
struct Layout {
    atoms: usize,
    fock: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        (1usize << self.atoms) * self.fock
    }

    /// (bits, n) with `bits[0]` the first listed atom.
    fn split(&self, index: usize) -> (Vec<usize>, usize) {
        let n = index % self.fock;
        let mut word = index / self.fock;
        let mut bits = vec![0; self.atoms];
        for k in (0..self.atoms).rev() {
            bits[k] = word % 2;
            word /= 2;
        }
        (bits, n)
    }

    fn join(&self, bits: &[usize], n: usize) -> usize {
        bits.iter().fold(0, |w, &b| 2 * w + b) * self.fock + n
    }
}

fn position(sites: &[AtomSite], label: &str) -> Result<usize> {
    sites
        .iter()
        .position(|s| s.label() == label)
        .ok_or_else(|| Error::UnknownAtom(label.to_string()))
}

/// `exp(beta a^dag - conj(beta) a)` on the truncated space, via the
/// eigendecomposition of the Hermitian matrix `i (beta a^dag - conj(beta) a)`.
pub fn displacement_matrix(beta: C64, cutoff: FockCutoff) -> DMatrix<C64> {
    let d = cutoff.dim();
    let mut h = DMatrix::<C64>::zeros(d, d);
    let i = C64::new(0.0, 1.0);
    for n in 0..d - 1 {
        let s = ((n + 1) as f64).sqrt();
        // a^dag |n> = sqrt(n+1) |n+1>, a |n+1> = sqrt(n+1) |n>
        h[(n + 1, n)] = i * beta * s;
        h[(n, n + 1)] = -i * beta.conj() * s;
    }
    let eig = h.symmetric_eigen();
    let v = eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        d,
        eig.eigenvalues.iter().map(|&l| C64::new(0.0, -l).exp()),
    ));
    &v * phases * v.adjoint()
}

/// Explicit matrix of `primitive` on the space of `sites` ⊗ cavity.
pub fn dense_unitary(
    primitive: &Primitive,
    sites: &[AtomSite],
    cutoff: FockCutoff,
) -> Result<DenseUnitary> {
    let layout = Layout {
        atoms: sites.len(),
        fock: cutoff.dim(),
    };
    let dim = layout.dim();
    if dim > DENSE_DIM_CAP {
        return Err(Error::DimensionCap {
            dim,
            cap: DENSE_DIM_CAP,
        });
    }
    let mut u = DMatrix::<C64>::zeros(dim, dim);
    let zero = C64::new(0.0, 0.0);
    match primitive {
        Primitive::Gate { atom, gate } => {
            let k = position(sites, atom)?;
            let m = gate.matrix();
            for col in 0..dim {
                let (mut bits, n) = layout.split(col);
                let b = bits[k];
                for (out, row) in m.iter().enumerate() {
                    bits[k] = out;
                    u[(layout.join(&bits, n), col)] = row[b];
                }
            }
        }
        Primitive::Dispersive { atom, phi } => {
            let k = position(sites, atom)?;
            if sites[k].basis() != LevelPair::Fg {
                return Err(Error::Usage(format!(
                    "dispersive pass needs an (f,g) atom, `{atom}` is (f,e)"
                )));
            }
            for col in 0..dim {
                let (bits, n) = layout.split(col);
                u[(col, col)] = if bits[k] == 0 {
                    C64::from_polar(1.0, phi * n as f64)
                } else {
                    C64::new(1.0, 0.0)
                };
            }
        }
        Primitive::Displace { beta } => {
            let d = displacement_matrix(*beta, cutoff);
            for col in 0..dim {
                let (bits, n) = layout.split(col);
                for m in 0..layout.fock {
                    let v = d[(m, n)];
                    if v != zero {
                        u[(layout.join(&bits, m), col)] = v;
                    }
                }
            }
        }
        Primitive::Jc { probe, gt } => {
            let k = position(sites, probe)?;
            if sites[k].basis() != LevelPair::Fe {
                return Err(Error::Usage(format!(
                    "resonant pass needs an (f,e) atom, `{probe}` is (f,g)"
                )));
            }
            let top = cutoff.n_max();
            for col in 0..dim {
                let (mut bits, n) = layout.split(col);
                let excited = bits[k] == 1;
                // (f,n) pairs with (e,n-1) at Rabi angle gt*sqrt(n)
                let (partner_bit, partner_n, rabi) = if excited {
                    (0, n + 1, ((n + 1) as f64).sqrt())
                } else {
                    (1, n.wrapping_sub(1), (n as f64).sqrt())
                };
                let paired = if excited { n < top } else { n > 0 };
                if !paired {
                    u[(col, col)] = C64::new(1.0, 0.0);
                    continue;
                }
                let (s, c) = (gt * rabi).sin_cos();
                u[(col, col)] = C64::new(c, 0.0);
                bits[k] = partner_bit;
                u[(layout.join(&bits, partner_n), col)] = C64::new(0.0, -s);
            }
        }
    }
    Ok(DenseUnitary {
        matrix: u,
        provenance: format!(
            "{} [{} atoms, n_max={}]",
            primitive.describe(),
            sites.len(),
            cutoff.n_max()
        ),
    })
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for t in terms {
        let s = sum + t;
        comp += if sum.abs() >= t.abs() {
            (sum - s) + t
        } else {
            (t - s) + sum
        };
        sum = s;
    }
    sum + comp
}

fn ln_factorial(n: u64) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn poisson(mean: f64, n: u64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * mean.ln() - mean - ln_factorial(n)).exp()
}

/// Probability that a probe sent in `f` through `|alpha_eff>` exits in `e`:
/// `sum_{n=0}^{n_max-1} |C_{n+1}|^2 sin^2(gt sqrt(n+1))`.
pub fn probe_success_probability(alpha_eff: f64, gt: f64, n_max: usize) -> Result<f64> {
    let mean = alpha_eff * alpha_eff;
    let n_max = n_max as u64;
    let mut tail = Vec::new();
    let mut n = n_max + 1;
    loop {
        let p = poisson(mean, n);
        tail.push(p);
        if (n as f64 > mean && p < 1e-30) || p == 0.0 {
            break;
        }
        n += 1;
    }
    let tail = compensated_sum(tail);
    if tail >= ORACLE_TAIL_TOL {
        return Err(Error::Truncation {
            what: "oracle coherent-state tail mass",
            mass: tail,
            tol: ORACLE_TAIL_TOL,
        });
    }
    Ok(compensated_sum((1..=n_max).map(|m| {
        poisson(mean, m) * (gt * (m as f64).sqrt()).sin().powi(2)
    })))
}

fn coherent_column(alpha: f64, cutoff: FockCutoff) -> Vec<C64> {
    let mean = alpha * alpha;
    (0..cutoff.dim() as u64)
        .map(|n| {
            let mag = poisson(mean, n).sqrt();
            let sign = if alpha < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
            C64::new(sign * mag, 0.0)
        })
        .collect()
}

/// Projects atom `k` (listed position) onto local index `bit`, in place.
fn project(layout: &Layout, v: &mut [C64], k: usize, bit: usize) -> f64 {
    let mut p = 0.0;
    for (i, a) in v.iter_mut().enumerate() {
        if layout.split(i).0[k] == bit {
            p += a.norm_sqr();
        } else {
            *a = C64::new(0.0, 0.0);
        }
    }
    p
}

/// Reduced density matrix of atom `k` from an unnormalized vector.
fn atom_density(layout: &Layout, v: &[C64], k: usize) -> DMatrix<C64> {
    let mut rho = DMatrix::<C64>::zeros(2, 2);
    for (i, a) in v.iter().enumerate() {
        let (bits, n) = layout.split(i);
        for b in 0..2 {
            let mut other = bits.clone();
            other[k] = b;
            let j = layout.join(&other, n);
            rho[(bits[k], b)] += a * v[j].conj();
        }
    }
    rho
}

fn product_vector(atoms: &[[C64; 2]], cavity: &[C64]) -> Vec<C64> {
    let mut v = vec![C64::new(1.0, 0.0)];
    for a in atoms {
        v = v
            .iter()
            .flat_map(|x| a.iter().map(move |y| x * y))
            .collect();
    }
    v.iter()
        .flat_map(|x| cavity.iter().map(move |y| x * y))
        .collect()
}

/// One of Alice's branches in the teleportation protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TeleportBranch {
    pub probe: Level,
    pub outcome1: Level,
    pub outcome2: Level,
    pub probability: f64,
    /// Bob's atom A4 before correction, normalized.
    pub bob_state: DMatrix<C64>,
}

/// Exact enumeration of every (probe, A1, A2) detection branch of the
/// teleportation protocol, built on an ideal Φ⁺ pair and dense operators.
pub fn teleport_branches(
    input: &InputQubit,
    params: &ProtocolParams,
    injected: InjectionSign,
) -> Result<Vec<TeleportBranch>> {
    let cutoff = params.cutoff()?;
    let sites = vec![
        AtomSite::new("A1", LevelPair::Fg),
        AtomSite::new("A2", LevelPair::Fg),
        AtomSite::new("A4", LevelPair::Fg),
        AtomSite::new("probe", LevelPair::Fe),
    ];
    let layout = Layout {
        atoms: 4,
        fock: cutoff.dim(),
    };
    let bell = BellKind::PhiPlus.amplitudes();
    let cavity = coherent_column(-params.alpha, cutoff);
    let f = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let mut v = vec![C64::new(0.0, 0.0); layout.dim()];
    for (pair, amp) in bell.iter().enumerate() {
        let a2 = [pair >> 1, pair & 1];
        let mut atoms = [input.amplitudes(), f, f, f];
        atoms[1] = if a2[0] == 0 { f } else { [f[1], f[0]] };
        atoms[2] = if a2[1] == 0 { f } else { [f[1], f[0]] };
        for (x, y) in v.iter_mut().zip(product_vector(&atoms, &cavity)) {
            *x += amp * y;
        }
    }
    let steps = [
        Primitive::Dispersive {
            atom: "A1".into(),
            phi: params.phi,
        },
        Primitive::Dispersive {
            atom: "A2".into(),
            phi: params.phi,
        },
        Primitive::Displace {
            beta: C64::new(injected.sign() * params.alpha, 0.0),
        },
        Primitive::Jc {
            probe: "probe".into(),
            gt: params.gt_probe,
        },
        Primitive::Gate {
            atom: "A1".into(),
            gate: Gate2::preset(GatePreset::K),
        },
        Primitive::Gate {
            atom: "A2".into(),
            gate: Gate2::preset(GatePreset::K),
        },
    ];
    for step in &steps {
        v = dense_unitary(step, &sites, cutoff)?.apply_vec(&v)?;
    }
    let mut branches = Vec::with_capacity(8);
    for probe in [Level::F, Level::E] {
        for o1 in [Level::F, Level::G] {
            for o2 in [Level::F, Level::G] {
                let mut w = v.clone();
                project(&layout, &mut w, 3, if probe == Level::F { 0 } else { 1 });
                project(&layout, &mut w, 0, if o1 == Level::F { 0 } else { 1 });
                let p = project(&layout, &mut w, 1, if o2 == Level::F { 0 } else { 1 });
                let mut rho = atom_density(&layout, &w, 2);
                if p > 0.0 {
                    rho /= C64::new(p, 0.0);
                }
                branches.push(TeleportBranch {
                    probe,
                    outcome1: o1,
                    outcome2: o2,
                    probability: p,
                    bob_state: rho,
                });
            }
        }
    }
    Ok(branches)
}

/// Bob's pre-correction state averaged over all of Alice's branches.
pub fn bob_average_state(branches: &[TeleportBranch]) -> DMatrix<C64> {
    branches.iter().fold(DMatrix::zeros(2, 2), |acc, b| {
        acc + &b.bob_state * C64::new(b.probability, 0.0)
    })
}

pub fn purity(rho: &DMatrix<C64>) -> f64 {
    (rho * rho).trace().re
}

/// Probe probability and `(o1, o2, p)` triples.
pub type OutcomeDistribution = (f64, Vec<(Level, Level, f64)>);

/// Outcome distribution of Bell discrimination, conditioned on the probe in
/// `e`: returns `(probe probability, [(o1, o2, p)])`.
pub fn discrimination_distribution(
    reg: &AtomRegister,
    params: &ProtocolParams,
    injected: InjectionSign,
) -> Result<OutcomeDistribution> {
    let cutoff = params.cutoff()?;
    if reg.sites().len() != 2 {
        return Err(Error::Usage("expected two atoms".into()));
    }
    let sites = vec![
        AtomSite::new("A1", LevelPair::Fg),
        AtomSite::new("A2", LevelPair::Fg),
        AtomSite::new("probe", LevelPair::Fe),
    ];
    let layout = Layout {
        atoms: 3,
        fock: cutoff.dim(),
    };
    let cavity = coherent_column(-params.alpha, cutoff);
    let mut v = Vec::with_capacity(layout.dim());
    for amp in reg.amplitudes() {
        for probe in [C64::new(1.0, 0.0), C64::new(0.0, 0.0)] {
            v.extend(cavity.iter().map(|c| amp * probe * c));
        }
    }
    let k = Gate2::preset(GatePreset::K);
    let steps = [
        Primitive::Gate {
            atom: "A1".into(),
            gate: k,
        },
        Primitive::Dispersive {
            atom: "A2".into(),
            phi: params.phi,
        },
        Primitive::Gate {
            atom: "A2".into(),
            gate: Gate2::preset(GatePreset::RH),
        },
        Primitive::Displace {
            beta: C64::new(injected.sign() * params.alpha, 0.0),
        },
        Primitive::Jc {
            probe: "probe".into(),
            gt: params.gt_probe,
        },
        Primitive::Gate {
            atom: "A1".into(),
            gate: k,
        },
        Primitive::Gate {
            atom: "A2".into(),
            gate: k,
        },
    ];
    for step in &steps {
        v = dense_unitary(step, &sites, cutoff)?.apply_vec(&v)?;
    }
    let p_probe = project(&layout, &mut v, 2, 1);
    let mut out = Vec::with_capacity(4);
    for o1 in [Level::F, Level::G] {
        for o2 in [Level::F, Level::G] {
            let mut w = v.clone();
            project(&layout, &mut w, 0, if o1 == Level::F { 0 } else { 1 });
            let p = project(&layout, &mut w, 1, if o2 == Level::F { 0 } else { 1 });
            out.push((o1, o2, p / p_probe));
        }
    }
    Ok((p_probe, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn cut(n: usize) -> FockCutoff {
        FockCutoff::new(n).unwrap()
    }

    #[test]
    fn dispersive_is_diagonal_phase() {
        let sites = [AtomSite::new("A", LevelPair::Fg)];
        let u = dense_unitary(
            &Primitive::Dispersive {
                atom: "A".into(),
                phi: PI,
            },
            &sites,
            cut(3),
        )
        .unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i != j {
                    0.0
                } else if i < 4 {
                    if i % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    1.0
                };
                assert_abs_diff_eq!(u.matrix[(i, j)].re, want, epsilon = 1e-15);
                assert_abs_diff_eq!(u.matrix[(i, j)].im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn jc_block_rotation() {
        let sites = [AtomSite::new("P", LevelPair::Fe)];
        let gt = 0.37;
        let u = dense_unitary(
            &Primitive::Jc {
                probe: "P".into(),
                gt,
            },
            &sites,
            cut(2),
        )
        .unwrap();
        // rows/cols: f0 f1 f2 e0 e1 e2
        let (s1, c1) = gt.sin_cos();
        let (s2, c2) = (gt * 2f64.sqrt()).sin_cos();
        assert_abs_diff_eq!(u.matrix[(0, 0)].re, 1.0);
        assert_abs_diff_eq!(u.matrix[(1, 1)].re, c1);
        assert_abs_diff_eq!(u.matrix[(3, 1)].im, -s1);
        assert_abs_diff_eq!(u.matrix[(2, 2)].re, c2);
        assert_abs_diff_eq!(u.matrix[(4, 2)].im, -s2);
        assert_abs_diff_eq!(u.matrix[(1, 3)].im, -s1);
        assert_abs_diff_eq!(u.matrix[(5, 5)].re, 1.0);
        assert!(u.deviation() < 1e-14);
    }

    #[test]
    fn displacement_inverse_pair() {
        let sites = [AtomSite::new("A", LevelPair::Fg)];
        let b = C64::new(0.7, -0.3);
        let d1 = dense_unitary(&Primitive::Displace { beta: b }, &sites, cut(12)).unwrap();
        let d2 = dense_unitary(&Primitive::Displace { beta: -b }, &sites, cut(12)).unwrap();
        let id = d1.compose(&d2);
        assert!(id.deviation() < 1e-10);
        assert!((&id.matrix - DMatrix::<C64>::identity(26, 26)).camax() < 1e-10);
    }

    #[test]
    fn dimension_cap() {
        let sites: Vec<_> = (0..7)
            .map(|i| AtomSite::new(format!("A{i}"), LevelPair::Fg))
            .collect();
        assert!(matches!(
            dense_unitary(
                &Primitive::Displace {
                    beta: C64::new(1.0, 0.0)
                },
                &sites,
                cut(63)
            ),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn probe_probability_values() {
        assert_eq!(probe_success_probability(-4.0, 0.0, 64).unwrap(), 0.0);
        assert_eq!(probe_success_probability(0.0, 1.0, 64).unwrap(), 0.0);
        let p = probe_success_probability(-4.0, PI / 8.0, 64).unwrap();
        assert_abs_diff_eq!(p, 0.9618802369699014, epsilon = 1e-12);
        assert!(matches!(
            probe_success_probability(4.0, PI / 8.0, 30),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn poisson_tail_matches_reference() {
        let tail = compensated_sum((64..200).map(|n| poisson(16.0, n)));
        assert!((tail / 1.360134316631902e-19 - 1.0).abs() < 1e-9);
    }
}
