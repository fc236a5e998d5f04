//! State vectors, operators and reduced states on the composite basis of two
//! three-level atoms, each in its own cavity mode truncated at one photon.
//!
//! Basis ordering is `((atom1·2 + n1)·3 + atom2)·2 + n2`, i.e. the tensor
//! product `(atom1 ⊗ cavity1) ⊗ (atom2 ⊗ cavity2)` with each atom-cavity site
//! laid out as `level·2 + n`.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SMatrix, SVector, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, EPS_NUM};

/// Dimension of the composite space.
pub const DIM: usize = 36;
/// Dimension of one atom-cavity site (three levels × two photon numbers).
pub const SITE_DIM: usize = 6;

pub type Amplitudes = SVector<C64, DIM>;
pub type Matrix36 = SMatrix<C64, DIM, DIM>;
pub type SiteMatrix = SMatrix<C64, SITE_DIM, SITE_DIM>;
/// Pure state of atom 2 in `{f, g, e}` order.
pub type Atom2Ket = Vector3<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Atomic level. `f` is not coupled to the cavity; `g ↔ e` is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    F = 0,
    G = 1,
    E = 2,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::F, Level::G, Level::E];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Self::ALL.get(i).copied()
    }
}

/// One of the two atom-cavity sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Site {
    One,
    Two,
}

impl Site {
    pub const BOTH: [Site; 2] = [Site::One, Site::Two];
}

/// Index of `(level, photons)` within a single site.
pub fn site_index(level: Level, photons: u8) -> usize {
    debug_assert!(photons <= 1);
    level.index() * 2 + photons as usize
}

/// A product basis ket `|atom1, n1⟩ ⊗ |atom2, n2⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    pub atom1: Level,
    pub n1: u8,
    pub atom2: Level,
    pub n2: u8,
}

impl BasisLabel {
    /// Panics if a photon count exceeds one.
    pub fn new(atom1: Level, n1: u8, atom2: Level, n2: u8) -> Self {
        assert!(n1 <= 1 && n2 <= 1, "photon number truncated at 1");
        Self { atom1, n1, atom2, n2 }
    }

    pub fn index(self) -> usize {
        flat_index(self)
    }

    pub fn from_index(index: usize) -> Option<Self> {
        if index >= DIM {
            return None;
        }
        let (s1, s2) = (index / SITE_DIM, index % SITE_DIM);
        Some(Self {
            atom1: Level::from_index(s1 / 2)?,
            n1: (s1 % 2) as u8,
            atom2: Level::from_index(s2 / 2)?,
            n2: (s2 % 2) as u8,
        })
    }

    pub fn level(self, site: Site) -> Level {
        match site {
            Site::One => self.atom1,
            Site::Two => self.atom2,
        }
    }

    pub fn photons(self, site: Site) -> u8 {
        match site {
            Site::One => self.n1,
            Site::Two => self.n2,
        }
    }

    pub fn all() -> impl Iterator<Item = BasisLabel> {
        (0..DIM).filter_map(BasisLabel::from_index)
    }
}

pub fn flat_index(label: BasisLabel) -> usize {
    ((label.atom1.index() * 2 + label.n1 as usize) * 3 + label.atom2.index()) * 2
        + label.n2 as usize
}

/// Complex amplitudes over the composite basis. Conditional states are
/// allowed to be sub-normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Amplitudes,
}

impl StateVector {
    pub fn zeros() -> Self {
        Self { amps: Amplitudes::zeros() }
    }

    pub fn basis(label: BasisLabel) -> Self {
        let mut amps = Amplitudes::zeros();
        amps[label.index()] = ONE;
        Self { amps }
    }

    pub fn from_amplitudes(amps: Amplitudes) -> Self {
        Self { amps }
    }

    pub fn from_fn(mut f: impl FnMut(BasisLabel) -> C64) -> Self {
        Self {
            amps: Amplitudes::from_fn(|i, _| f(BasisLabel::from_index(i).unwrap())),
        }
    }

    /// `site1 ⊗ site2` from two single-site kets in `level·2 + n` order.
    pub fn product(site1: &SVector<C64, SITE_DIM>, site2: &SVector<C64, SITE_DIM>) -> Self {
        Self {
            amps: Amplitudes::from_fn(|i, _| site1[i / SITE_DIM] * site2[i % SITE_DIM]),
        }
    }

    pub fn amplitudes(&self) -> &Amplitudes {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut Amplitudes {
        &mut self.amps
    }

    pub fn amplitude(&self, label: BasisLabel) -> C64 {
        self.amps[label.index()]
    }

    pub fn set_amplitude(&mut self, label: BasisLabel, value: C64) {
        self.amps[label.index()] = value;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm_sqr();
        if n > 0.0 && n.is_finite() {
            Some(self.scaled(C64::from(1.0 / n.sqrt())))
        } else {
            None
        }
    }

    pub fn normalize_in_place(&mut self) -> f64 {
        let n = self.norm_sqr();
        if n > 0.0 {
            self.amps.unscale_mut(n.sqrt());
        }
        n
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { amps: self.amps * c }
    }

    /// Phase-free overlap `|⟨a|b⟩|² / (‖a‖²‖b‖²)`.
    pub fn fidelity_with(&self, other: &StateVector) -> f64 {
        let denom = self.norm_sqr() * other.norm_sqr();
        if denom == 0.0 {
            return 0.0;
        }
        (inner(self, other).norm_sqr() / denom).min(1.0)
    }

    /// Squared norm of the component on basis kets selected by `keep`.
    pub fn weight_where(&self, mut keep: impl FnMut(BasisLabel) -> bool) -> f64 {
        BasisLabel::all()
            .filter(|l| keep(*l))
            .map(|l| self.amps[l.index()].norm_sqr())
            .sum()
    }
}

impl Add for StateVector {
    type Output = StateVector;
    fn add(self, rhs: StateVector) -> StateVector {
        StateVector { amps: self.amps + rhs.amps }
    }
}

impl Sub for StateVector {
    type Output = StateVector;
    fn sub(self, rhs: StateVector) -> StateVector {
        StateVector { amps: self.amps - rhs.amps }
    }
}

impl Mul<StateVector> for C64 {
    type Output = StateVector;
    fn mul(self, rhs: StateVector) -> StateVector {
        rhs.scaled(self)
    }
}

/// `⟨ψ|φ⟩`, conjugate-linear in `psi`.
pub fn inner(psi: &StateVector, phi: &StateVector) -> C64 {
    psi.amps.dotc(&phi.amps)
}

/// Which structural properties an operator was constructed to have.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OperatorFlags {
    pub hermitian: bool,
    pub unitary: bool,
}

/// Dense operator on the composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: Box<Matrix36>,
    flags: OperatorFlags,
}

impl Operator {
    pub fn from_matrix(matrix: Matrix36) -> Self {
        Self { matrix: Box::new(matrix), flags: OperatorFlags::default() }
    }

    pub fn with_flags(mut self, flags: OperatorFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn flags(&self) -> OperatorFlags {
        self.flags
    }

    pub fn zeros() -> Self {
        Self::from_matrix(Matrix36::zeros())
    }

    pub fn identity() -> Self {
        Self::from_matrix(Matrix36::identity())
            .with_flags(OperatorFlags { hermitian: true, unitary: true })
    }

    /// Builds `Σ |to⟩⟨from| · f(from)` over basis kets, where `f` returns
    /// the target label and coefficient (or `None` to annihilate).
    pub fn from_basis_map(mut f: impl FnMut(BasisLabel) -> Option<(BasisLabel, C64)>) -> Self {
        let mut m = Matrix36::zeros();
        for from in BasisLabel::all() {
            if let Some((to, c)) = f(from) {
                m[(to.index(), from.index())] += c;
            }
        }
        Self::from_matrix(m)
    }

    /// Cavity annihilation operator `a_j` (truncated at one photon).
    pub fn annihilation(site: Site) -> Self {
        Self::from_basis_map(|l| {
            (l.photons(site) == 1).then(|| (with_photons(l, site, 0), ONE))
        })
    }

    /// Cavity creation operator `a_j†`; kets already holding a photon are
    /// mapped to zero by the truncation.
    pub fn creation(site: Site) -> Self {
        Self::annihilation(site).adjoint()
    }

    /// Atomic transition `|to⟩⟨from|` on the atom at `site`.
    pub fn transition(site: Site, from: Level, to: Level) -> Self {
        Self::from_basis_map(|l| (l.level(site) == from).then(|| (with_level(l, site, to), ONE)))
    }

    /// `S⁻ = |g⟩⟨e|`.
    pub fn lowering(site: Site) -> Self {
        Self::transition(site, Level::E, Level::G)
    }

    /// `S⁺ = |e⟩⟨g|`.
    pub fn raising(site: Site) -> Self {
        Self::transition(site, Level::G, Level::E)
    }

    pub fn projector(site: Site, level: Level) -> Self {
        Self::transition(site, level, level)
            .with_flags(OperatorFlags { hermitian: true, unitary: false })
    }

    pub fn number(site: Site) -> Self {
        Self::from_basis_map(|l| (l.photons(site) == 1).then_some((l, ONE)))
            .with_flags(OperatorFlags { hermitian: true, unitary: false })
    }

    /// Projector onto kets with both cavities empty and neither atom excited.
    /// These are exactly the kets left untouched by the conditional evolution.
    pub fn frozen_projector() -> Self {
        Self::from_basis_map(|l| {
            let frozen = l.n1 == 0 && l.n2 == 0 && l.atom1 != Level::E && l.atom2 != Level::E;
            frozen.then_some((l, ONE))
        })
        .with_flags(OperatorFlags { hermitian: true, unitary: false })
    }

    pub fn matrix(&self) -> &Matrix36 {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: Box::new(self.matrix.adjoint()),
            flags: self.flags,
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self::from_matrix(*self.matrix * c)
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        StateVector { amps: &*self.matrix * &psi.amps }
    }

    /// `self · rhs`.
    pub fn compose(&self, rhs: &Operator) -> Self {
        let flags = OperatorFlags {
            hermitian: false,
            unitary: self.flags.unitary && rhs.flags.unitary,
        };
        Self::from_matrix(&*self.matrix * &*rhs.matrix).with_flags(flags)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.adjoint().compose(self).max_abs_diff(&Operator::identity()) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator::from_matrix(&*self.matrix + &*rhs.matrix)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator::from_matrix(&*self.matrix - &*rhs.matrix)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.compose(rhs)
    }
}

fn with_photons(mut l: BasisLabel, site: Site, n: u8) -> BasisLabel {
    match site {
        Site::One => l.n1 = n,
        Site::Two => l.n2 = n,
    }
    l
}

fn with_level(mut l: BasisLabel, site: Site, level: Level) -> BasisLabel {
    match site {
        Site::One => l.atom1 = level,
        Site::Two => l.atom2 = level,
    }
    l
}

/// An operator acting on a single atom-cavity site and as the identity on
/// the other. Applying it costs `O(DIM · SITE_DIM)` instead of a dense
/// 36×36 product.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteOperator {
    pub site: Site,
    pub matrix: SiteMatrix,
}

impl SiteOperator {
    pub fn new(site: Site, matrix: SiteMatrix) -> Self {
        Self { site, matrix }
    }

    /// Lifts a 3×3 atomic matrix (in `f, g, e` order) to the site, acting
    /// as the identity on the cavity mode.
    pub fn from_atomic(site: Site, atomic: &nalgebra::Matrix3<C64>) -> Self {
        let matrix = SiteMatrix::from_fn(|r, c| {
            if r % 2 == c % 2 {
                atomic[(r / 2, c / 2)]
            } else {
                ZERO
            }
        });
        Self { site, matrix }
    }

    pub fn apply_in_place(&self, psi: &mut StateVector) {
        let src = psi.amps;
        let m = &self.matrix;
        for r in 0..SITE_DIM {
            for other in 0..SITE_DIM {
                let mut acc = ZERO;
                for c in 0..SITE_DIM {
                    let v = m[(r, c)];
                    if v.re == 0.0 && v.im == 0.0 {
                        continue;
                    }
                    let src_idx = match self.site {
                        Site::One => c * SITE_DIM + other,
                        Site::Two => other * SITE_DIM + c,
                    };
                    acc += v * src[src_idx];
                }
                let dst = match self.site {
                    Site::One => r * SITE_DIM + other,
                    Site::Two => other * SITE_DIM + r,
                };
                psi.amps[dst] = acc;
            }
        }
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        let mut out = psi.clone();
        self.apply_in_place(&mut out);
        out
    }

    /// Dense embedding on the composite space.
    pub fn to_operator(&self) -> Operator {
        let m = Matrix36::from_fn(|r, c| {
            let (r1, r2) = (r / SITE_DIM, r % SITE_DIM);
            let (c1, c2) = (c / SITE_DIM, c % SITE_DIM);
            match self.site {
                Site::One if r2 == c2 => self.matrix[(r1, c1)],
                Site::Two if r1 == c1 => self.matrix[(r2, c2)],
                _ => ZERO,
            }
        });
        Operator::from_matrix(m)
    }
}

/// Sub-basis a density matrix is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subspace {
    /// The 36-dimensional composite basis.
    Full,
    /// Atom 2 alone, `{f, g, e}`.
    Atom2,
}

impl Subspace {
    pub fn dim(self) -> usize {
        match self {
            Subspace::Full => DIM,
            Subspace::Atom2 => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<C64>,
    subspace: Subspace,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<C64>, subspace: Subspace) -> Result<Self> {
        let d = subspace.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "density matrix must be {d}×{d}, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, subspace })
    }

    /// `|ψ⟩⟨ψ|` on the full space (not renormalized).
    pub fn pure(psi: &StateVector) -> Self {
        let v = DMatrix::from_column_slice(DIM, 1, psi.amps.as_slice());
        Self { matrix: &v * v.adjoint(), subspace: Subspace::Full }
    }

    pub fn atom2_pure(ket: &Atom2Ket) -> Self {
        let v = DMatrix::from_column_slice(3, 1, ket.as_slice());
        Self { matrix: &v * v.adjoint(), subspace: Subspace::Atom2 }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn subspace(&self) -> Subspace {
        self.subspace
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr.abs() <= f64::MIN_POSITIVE {
            return Err(Error::ZeroTrace);
        }
        Ok(Self { matrix: &self.matrix / C64::from(tr), subspace: self.subspace })
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let adj = self.matrix.adjoint();
        self.matrix.iter().zip(adj.iter()).all(|(a, b)| (a - b).norm() <= tol)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::from(0.5);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `ρ` in `{f, g, e}` basis element `(row, col)`; only for [`Subspace::Atom2`].
    pub fn atom2_element(&self, row: Level, col: Level) -> C64 {
        debug_assert_eq!(self.subspace, Subspace::Atom2);
        self.matrix[(row.index(), col.index())]
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { matrix: &self.matrix * C64::from(s), subspace: self.subspace }
    }

    /// Sum of two matrices on the same subspace.
    pub fn plus(&self, other: &DensityMatrix) -> Result<Self> {
        if self.subspace != other.subspace {
            return Err(Error::WrongSubspace { expected: "matching subspaces" });
        }
        Ok(Self { matrix: &self.matrix + &other.matrix, subspace: self.subspace })
    }
}

/// Anything whose atom-2 marginal can be taken.
pub trait Atom2Marginal {
    fn atom2_marginal(&self) -> Result<DensityMatrix>;
}

impl Atom2Marginal for StateVector {
    fn atom2_marginal(&self) -> Result<DensityMatrix> {
        let mut rho = DMatrix::<C64>::zeros(3, 3);
        for a1 in 0..3 {
            for n1 in 0..2 {
                for n2 in 0..2 {
                    let idx = |a2: usize| ((a1 * 2 + n1) * 3 + a2) * 2 + n2;
                    for r in 0..3 {
                        let ar = self.amps[idx(r)];
                        if ar == ZERO {
                            continue;
                        }
                        for c in 0..3 {
                            rho[(r, c)] += ar * self.amps[idx(c)].conj();
                        }
                    }
                }
            }
        }
        DensityMatrix::new(rho, Subspace::Atom2)
    }
}

impl Atom2Marginal for DensityMatrix {
    fn atom2_marginal(&self) -> Result<DensityMatrix> {
        match self.subspace {
            Subspace::Atom2 => Ok(self.clone()),
            Subspace::Full => {
                let mut rho = DMatrix::<C64>::zeros(3, 3);
                for a1 in 0..3 {
                    for n1 in 0..2 {
                        for n2 in 0..2 {
                            let idx = |a2: usize| ((a1 * 2 + n1) * 3 + a2) * 2 + n2;
                            for r in 0..3 {
                                for c in 0..3 {
                                    rho[(r, c)] += self.matrix[(idx(r), idx(c))];
                                }
                            }
                        }
                    }
                }
                DensityMatrix::new(rho, Subspace::Atom2)
            }
        }
    }
}

/// Partial trace over atom 1 and both cavity modes.
pub fn reduce_to_atom2<S: Atom2Marginal + ?Sized>(state: &S) -> Result<DensityMatrix> {
    state.atom2_marginal()
}

/// `⟨target|ρ|target⟩ / tr ρ` for a normalized atom-2 target.
pub fn fidelity(target: &Atom2Ket, rho: &DensityMatrix) -> Result<f64> {
    if rho.subspace != Subspace::Atom2 {
        return Err(Error::WrongSubspace { expected: "atom 2" });
    }
    let n = target.norm_squared();
    if (n - 1.0).abs() > EPS_NUM {
        return Err(Error::Unnormalized(n));
    }
    let tr = rho.trace();
    if tr.abs() <= f64::MIN_POSITIVE {
        return Err(Error::ZeroTrace);
    }
    let t = nalgebra::DVector::from_column_slice(target.as_slice());
    let overlap = t.dotc(&(&rho.matrix * &t)).re / tr;
    Ok(overlap.clamp(0.0, 1.0))
}
