//! Pure states of `k` two-level atoms and one truncated cavity mode.
//!
//! Amplitudes are stored densely with the atoms most significant in the
//! order they were listed and the photon number least significant:
//!
//! ```text
//! index = ((b_1 * 2 + b_2) * 2 + ... + b_k) * (n_max + 1) + n
//! ```
//!
//! where `b_i` is the basis index of atom `i` within its level pair.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Norm tolerance for states the engine considers normalized.
pub const NORM_TOL: f64 = 1e-12;

/// Norm tolerance applied to caller-supplied factors in [`compose`].
pub const INPUT_NORM_TOL: f64 = 1e-10;

/// Highest photon number kept in the cavity basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockCutoff {
    n_max: usize,
}

impl FockCutoff {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidParams(format!(
                "n_max must be at least 1, got {n_max}"
            )));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(self) -> usize {
        self.n_max
    }

    /// Cavity dimension, `n_max + 1`.
    pub fn dim(self) -> usize {
        self.n_max + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    F,
    G,
    E,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::F => "f",
            Level::G => "g",
            Level::E => "e",
        })
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f" => Ok(Level::F),
            "g" => Ok(Level::G),
            "e" => Ok(Level::E),
            other => Err(Error::Usage(format!("unknown atomic level `{other}`"))),
        }
    }
}

/// The two levels an atom is restricted to.
///
/// `Fg` is the dispersively coupled register atom, `Fe` the resonant probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LevelPair {
    Fg,
    Fe,
}

impl LevelPair {
    pub fn levels(self) -> [Level; 2] {
        match self {
            LevelPair::Fg => [Level::F, Level::G],
            LevelPair::Fe => [Level::F, Level::E],
        }
    }

    pub fn index_of(self, level: Level) -> Option<usize> {
        self.levels().iter().position(|&l| l == level)
    }
}

impl fmt::Display for LevelPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b] = self.levels();
        write!(f, "({a},{b})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AtomSite {
    label: String,
    basis: LevelPair,
}

impl AtomSite {
    pub fn new(label: impl Into<String>, basis: LevelPair) -> Self {
        Self {
            label: label.into(),
            basis,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn basis(&self) -> LevelPair {
        self.basis
    }

    pub fn level(&self, index: usize) -> Level {
        self.basis.levels()[index]
    }

    pub fn index_of(&self, level: Level) -> Result<usize> {
        self.basis.index_of(level).ok_or_else(|| {
            Error::Usage(format!(
                "atom `{}` has levels {} and no level `{level}`",
                self.label, self.basis
            ))
        })
    }

    /// Single-atom amplitudes of a basis state.
    pub fn basis_ket(&self, level: Level) -> Result<[C64; 2]> {
        let mut amps = [C64::new(0.0, 0.0); 2];
        amps[self.index_of(level)?] = C64::new(1.0, 0.0);
        Ok(amps)
    }
}

/// A cavity amplitude vector together with the probability mass that the
/// truncation discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityKet {
    pub amps: Vec<C64>,
    pub tail_mass: f64,
}

impl CavityKet {
    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }
}

/// Truncated coherent state `|alpha>` with coefficients
/// `exp(-|alpha|^2/2) alpha^n / sqrt(n!)`.
pub fn coherent_state(alpha: C64, cutoff: FockCutoff) -> CavityKet {
    let mut amps = Vec::with_capacity(cutoff.dim());
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps.push(c);
    for n in 1..=cutoff.n_max() {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    let last = amps[cutoff.n_max()].norm_sqr();
    let tail_mass = poisson_tail(alpha.norm_sqr(), cutoff.n_max(), last, |_| true);
    CavityKet { amps, tail_mass }
}

/// Sum of `p_n` for `n > n_max`, where `p_n` follows the Poisson recurrence
/// `p_n = p_{n-1} * mean / n` starting from `p_{n_max} = last`.
fn poisson_tail(mean: f64, n_max: usize, last: f64, keep: impl Fn(usize) -> bool) -> f64 {
    let mut p = last;
    let mut sum = 0.0;
    let mut n = n_max;
    loop {
        n += 1;
        p *= mean / n as f64;
        if keep(n) {
            sum += p;
        }
        if (n as f64) > mean && (p == 0.0 || p < sum * 1e-18) {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Analytic squared norm of `|alpha> +- |-alpha>`: `2 (1 +- exp(-2 alpha^2))`.
pub fn cat_norm_sqr(alpha: f64, parity: Parity) -> f64 {
    let overlap = (-2.0 * alpha * alpha).exp();
    match parity {
        Parity::Even => 2.0 * (1.0 + overlap),
        Parity::Odd => 2.0 * (1.0 - overlap),
    }
}

/// Even (`|alpha> + |-alpha>`) or odd (`|alpha> - |-alpha>`) cat state.
///
/// With `normalize` the vector is divided by the analytic `sqrt(N)`; without
/// it the raw superposition is returned. `tail_mass` is relative to the
/// returned vector's exact (untruncated) norm.
pub fn cat_state(
    alpha: f64,
    parity: Parity,
    cutoff: FockCutoff,
    normalize: bool,
) -> Result<CavityKet> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParams(format!(
            "cat amplitude must be positive, got {alpha}"
        )));
    }
    let plus = coherent_state(C64::new(alpha, 0.0), cutoff);
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    // <n|-alpha> = (-1)^n <n|alpha>, so the sum keeps one parity class.
    let scale = if normalize {
        1.0 / cat_norm_sqr(alpha, parity).sqrt()
    } else {
        1.0
    };
    let keeps_n = |n: usize| n.is_multiple_of(2) == (parity == Parity::Even);
    let amps = plus
        .amps
        .iter()
        .enumerate()
        .map(|(n, &c)| {
            let alt = if n % 2 == 0 { 1.0 } else { -1.0 };
            c * (1.0 + sign * alt) * scale
        })
        .collect();
    let last = plus.amps[cutoff.n_max()].norm_sqr();
    let tail = 4.0 * poisson_tail(alpha * alpha, cutoff.n_max(), last, keeps_n);
    Ok(CavityKet {
        amps,
        tail_mass: tail * scale * scale,
    })
}

/// An unknown qubit `zeta |f> + xi |g>` to be teleported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputQubit {
    zeta: C64,
    xi: C64,
}

impl InputQubit {
    pub fn new(zeta: C64, xi: C64) -> Result<Self> {
        let n = zeta.norm_sqr() + xi.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr: n });
        }
        Ok(Self { zeta, xi })
    }

    /// Haar-distributed pure qubit.
    pub fn haar_random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                return Self {
                    zeta: C64::new(v[0], v[1]) / n,
                    xi: C64::new(v[2], v[3]) / n,
                };
            }
        }
    }

    pub fn zeta(&self) -> C64 {
        self.zeta
    }

    pub fn xi(&self) -> C64 {
        self.xi
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        [self.zeta, self.xi]
    }
}

/// Pure state of atoms only (no cavity), index convention as
/// [`CompositeState`] without the photon factor.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomRegister {
    sites: Vec<AtomSite>,
    amp: Vec<C64>,
}

impl AtomRegister {
    pub fn new(sites: Vec<AtomSite>, amp: Vec<C64>) -> Result<Self> {
        check_labels(&sites)?;
        let expected = 1usize << sites.len();
        if amp.len() != expected {
            return Err(Error::Dimension(format!(
                "{} atoms need {expected} amplitudes, got {}",
                sites.len(),
                amp.len()
            )));
        }
        Ok(Self { sites, amp })
    }

    /// Product state of single-atom factors.
    pub fn product(atoms: &[(AtomSite, [C64; 2])]) -> Result<Self> {
        let sites = atoms.iter().map(|(s, _)| s.clone()).collect();
        let amp = atoms
            .iter()
            .fold(vec![C64::new(1.0, 0.0)], |acc, (_, a)| kron(&acc, a));
        Self::new(sites, amp)
    }

    pub fn sites(&self) -> &[AtomSite] {
        &self.sites
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amp
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amp)
    }

    /// `self ⊗ other`, with `other`'s atoms listed after `self`'s.
    pub fn tensor(&self, other: &AtomRegister) -> Result<Self> {
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().cloned());
        Self::new(sites, kron(&self.amp, &other.amp))
    }

    /// Renames the atoms in order; level pairs are kept.
    pub fn relabel(&self, labels: &[&str]) -> Result<Self> {
        if labels.len() != self.sites.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} atoms",
                labels.len(),
                self.sites.len()
            )));
        }
        let sites = self
            .sites
            .iter()
            .zip(labels)
            .map(|(s, l)| AtomSite::new(*l, s.basis()))
            .collect();
        Self::new(sites, self.amp.clone())
    }

    pub fn inner_product(&self, other: &AtomRegister) -> Result<C64> {
        if self.sites != other.sites {
            return Err(Error::Dimension("registers have different atoms".into()));
        }
        Ok(dot(&self.amp, &other.amp))
    }

    pub fn fidelity(&self, other: &AtomRegister) -> Result<f64> {
        Ok(self.inner_product(other)?.norm_sqr())
    }

    pub fn reduced_density(&self, labels: &[&str]) -> Result<DMatrix<C64>> {
        let positions = positions_of(&self.sites, labels)?;
        Ok(reduced_density_impl(
            &self.amp,
            self.sites.len(),
            1,
            &positions,
        ))
    }
}

/// Joint pure state of the listed atoms and the cavity.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    sites: Vec<AtomSite>,
    cutoff: FockCutoff,
    amp: Vec<C64>,
}

impl CompositeState {
    /// Wraps raw amplitudes. The vector need not be normalized; use
    /// [`CompositeState::is_normalized`] to tell the two apart.
    pub fn from_amplitudes(
        sites: Vec<AtomSite>,
        cutoff: FockCutoff,
        amp: Vec<C64>,
    ) -> Result<Self> {
        check_labels(&sites)?;
        let expected = (1usize << sites.len()) * cutoff.dim();
        if amp.len() != expected {
            return Err(Error::Dimension(format!(
                "{} atoms with n_max {} need {expected} amplitudes, got {}",
                sites.len(),
                cutoff.n_max(),
                amp.len()
            )));
        }
        Ok(Self { sites, cutoff, amp })
    }

    /// Atom register tensored with a cavity vector.
    pub fn from_register(reg: &AtomRegister, cavity: &[C64], cutoff: FockCutoff) -> Result<Self> {
        if cavity.len() != cutoff.dim() {
            return Err(Error::Dimension(format!(
                "cavity vector has {} entries, cutoff needs {}",
                cavity.len(),
                cutoff.dim()
            )));
        }
        Self::from_amplitudes(reg.sites.clone(), cutoff, kron(&reg.amp, cavity))
    }

    pub(crate) fn with_amplitudes(&self, amp: Vec<C64>) -> Self {
        debug_assert_eq!(amp.len(), self.amp.len());
        Self {
            sites: self.sites.clone(),
            cutoff: self.cutoff,
            amp,
        }
    }

    pub fn sites(&self) -> &[AtomSite] {
        &self.sites
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amp
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amp
    }

    pub fn num_atoms(&self) -> usize {
        self.sites.len()
    }

    pub fn dim(&self) -> usize {
        self.amp.len()
    }

    /// Flat index of the basis ket `|b_1 ... b_k> |n>`.
    pub fn index(&self, atom_bits: &[usize], n: usize) -> usize {
        debug_assert_eq!(atom_bits.len(), self.sites.len());
        debug_assert!(n <= self.cutoff.n_max());
        let atoms = atom_bits.iter().fold(0, |acc, &b| {
            debug_assert!(b < 2);
            acc * 2 + b
        });
        atoms * self.cutoff.dim() + n
    }

    /// Inverse of [`CompositeState::index`].
    pub fn decompose(&self, index: usize) -> (Vec<usize>, usize) {
        let d = self.cutoff.dim();
        let n = index % d;
        let mut atoms = index / d;
        let mut bits = vec![0; self.sites.len()];
        for b in bits.iter_mut().rev() {
            *b = atoms & 1;
            atoms >>= 1;
        }
        (bits, n)
    }

    pub fn atom_position(&self, label: &str) -> Result<usize> {
        self.sites
            .iter()
            .position(|s| s.label() == label)
            .ok_or_else(|| Error::UnknownAtom(label.to_string()))
    }

    pub fn site(&self, label: &str) -> Result<&AtomSite> {
        Ok(&self.sites[self.atom_position(label)?])
    }

    /// Distance in the flat vector between `b = 0` and `b = 1` of one atom.
    pub fn atom_stride(&self, position: usize) -> usize {
        self.cutoff.dim() << (self.sites.len() - 1 - position)
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amp)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    /// Photon-number distribution with the atoms traced out.
    pub fn photon_distribution(&self) -> Vec<f64> {
        let d = self.cutoff.dim();
        let mut p = vec![0.0; d];
        for (i, a) in self.amp.iter().enumerate() {
            p[i % d] += a.norm_sqr();
        }
        p
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.photon_distribution()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Appends a new atom as the least significant atomic factor.
    pub fn with_atom(&self, site: AtomSite, amps: [C64; 2]) -> Result<Self> {
        if self.sites.iter().any(|s| s.label() == site.label()) {
            return Err(Error::DuplicateAtom(site.label().to_string()));
        }
        let d = self.cutoff.dim();
        let mut amp = Vec::with_capacity(self.amp.len() * 2);
        for block in self.amp.chunks(d) {
            for a in amps {
                amp.extend(block.iter().map(|&x| x * a));
            }
        }
        let mut sites = self.sites.clone();
        sites.push(site);
        Ok(Self {
            sites,
            cutoff: self.cutoff,
            amp,
        })
    }

    /// Removes an atom that is in a product state with everything else.
    ///
    /// Returns the remaining state (carrying the full norm) and the
    /// normalized single-atom amplitudes. Fails with
    /// [`Error::NotSeparable`] if the residual exceeds `tol`.
    pub fn remove_atom(&self, label: &str, tol: f64) -> Result<(Self, [C64; 2])> {
        let pos = self.atom_position(label)?;
        let stride = self.atom_stride(pos);
        let (v0, v1): (Vec<C64>, Vec<C64>) = (0..self.amp.len())
            .filter(|&i| bit_at(i, stride) == 0)
            .map(|i| (self.amp[i], self.amp[i + stride]))
            .unzip();
        let (rest, atom) = factor_rank_one(&[v0, v1], tol, label)?;
        let mut sites = self.sites.clone();
        sites.remove(pos);
        let atom_amps = [atom[0], atom[1]];
        Ok((
            Self {
                sites,
                cutoff: self.cutoff,
                amp: rest,
            },
            atom_amps,
        ))
    }

    /// Splits off the cavity when it is disentangled from the atoms.
    ///
    /// The register carries the full norm; the cavity vector is unit length.
    pub fn split_cavity(&self, tol: f64) -> Result<(AtomRegister, Vec<C64>)> {
        let rows: Vec<Vec<C64>> = self
            .amp
            .chunks(self.cutoff.dim())
            .map(<[C64]>::to_vec)
            .collect();
        // rows are atom configurations, so the "rest" is the cavity here
        let (cavity, atoms) = factor_rank_one(&rows, tol, "cavity")?;
        let n = norm_sqr(&cavity).sqrt();
        let cavity: Vec<C64> = cavity.iter().map(|c| c / n).collect();
        let atoms: Vec<C64> = atoms.iter().map(|a| a * n).collect();
        Ok((AtomRegister::new(self.sites.clone(), atoms)?, cavity))
    }

    /// Reduced density matrix of the listed atoms (in the given order), with
    /// every other atom and the cavity traced out.
    pub fn reduced_density(&self, labels: &[&str]) -> Result<DMatrix<C64>> {
        let positions = positions_of(&self.sites, labels)?;
        Ok(reduced_density_impl(
            &self.amp,
            self.sites.len(),
            self.cutoff.dim(),
            &positions,
        ))
    }
}

/// Tensor product of single-atom states with a cavity vector.
pub fn compose(
    atoms: &[(AtomSite, [C64; 2])],
    cavity: &[C64],
    cutoff: FockCutoff,
) -> Result<CompositeState> {
    for (site, a) in atoms {
        let n = norm_sqr(a);
        if (n - 1.0).abs() > INPUT_NORM_TOL {
            return Err(Error::Dimension(format!(
                "atom `{}` amplitudes have norm^2 {n}",
                site.label()
            )));
        }
    }
    let n = norm_sqr(cavity);
    if (n - 1.0).abs() > INPUT_NORM_TOL {
        return Err(Error::Dimension(format!("cavity vector has norm^2 {n}")));
    }
    CompositeState::from_register(&AtomRegister::product(atoms)?, cavity, cutoff)
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner_product(a: &CompositeState, b: &CompositeState) -> Result<C64> {
    if a.sites != b.sites || a.cutoff != b.cutoff {
        return Err(Error::Dimension(
            "states live on different sites or cutoffs".into(),
        ));
    }
    Ok(dot(&a.amp, &b.amp))
}

/// `|<a|b>|^2`, insensitive to global phase.
pub fn fidelity(a: &CompositeState, b: &CompositeState) -> Result<f64> {
    Ok(inner_product(a, b)?.norm_sqr())
}

/// Basis index (0 or 1) of the atom whose flat-index stride is `stride`.
pub(crate) fn bit_at(index: usize, stride: usize) -> usize {
    (index / stride) & 1
}

pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

fn check_labels(sites: &[AtomSite]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in sites {
        if !seen.insert(s.label()) {
            return Err(Error::DuplicateAtom(s.label().to_string()));
        }
    }
    Ok(())
}

fn positions_of(sites: &[AtomSite], labels: &[&str]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(labels.len());
    for l in labels {
        let p = sites
            .iter()
            .position(|s| s.label() == *l)
            .ok_or_else(|| Error::UnknownAtom(l.to_string()))?;
        if out.contains(&p) {
            return Err(Error::DuplicateAtom(l.to_string()));
        }
        out.push(p);
    }
    Ok(out)
}

fn reduced_density_impl(amp: &[C64], k: usize, d: usize, positions: &[usize]) -> DMatrix<C64> {
    let stride = |p: usize| d << (k - 1 - p);
    let m = positions.len();
    let dim = 1usize << m;
    let offsets: Vec<usize> = (0..dim)
        .map(|s| {
            positions
                .iter()
                .enumerate()
                .filter(|(j, _)| (s >> (m - 1 - j)) & 1 == 1)
                .map(|(_, &p)| stride(p))
                .sum()
        })
        .collect();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for base in (0..amp.len()).filter(|&i| positions.iter().all(|&p| bit_at(i, stride(p)) == 0)) {
        for (r, &or) in offsets.iter().enumerate() {
            let ar = amp[base + or];
            if ar == C64::new(0.0, 0.0) {
                continue;
            }
            for (c, &oc) in offsets.iter().enumerate() {
                rho[(r, c)] += ar * amp[base + oc].conj();
            }
        }
    }
    rho
}

/// Factors a matrix given by rows `M[r][j]` as `M ≈ u_r * v_j`.
///
/// Returns `(v, u)` with `v` taken from the heaviest row, scaled so that
/// `|v|` equals the Frobenius norm of `M` and `u` is unit length.
fn factor_rank_one(rows: &[Vec<C64>], tol: f64, what: &str) -> Result<(Vec<C64>, Vec<C64>)> {
    let (heavy, heavy_norm) =
        rows.iter()
            .map(|r| norm_sqr(r))
            .enumerate()
            .fold(
                (0, 0.0),
                |best, (i, n)| if n > best.1 { (i, n) } else { best },
            );
    if heavy_norm < 1e-300 {
        return Err(Error::DegenerateNorm(heavy_norm.sqrt()));
    }
    let v: Vec<C64> = rows[heavy].iter().map(|x| x / heavy_norm.sqrt()).collect();
    let u: Vec<C64> = rows.iter().map(|r| dot(&v, r)).collect();
    let residual: f64 = rows
        .iter()
        .zip(&u)
        .map(|(r, &ui)| {
            r.iter()
                .zip(&v)
                .map(|(x, vj)| (x - ui * vj).norm_sqr())
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt();
    if residual > tol {
        return Err(Error::NotSeparable(what.to_string(), residual));
    }
    let total = norm_sqr(&u).sqrt();
    let rest = v.iter().map(|x| x * total).collect();
    let factor = u.iter().map(|x| x / total).collect();
    Ok((rest, factor))
}
