//! Conditional (no-detection) evolution of the two atom-cavity sites, the
//! closed-form damped vacuum-Rabi solution, and the jump channels that
//! unravel the cavity and atomic decay.
//!
//! Under no detection each site evolves with
//! `H = g(a S⁺ + a† S⁻) − i(κ/2) a†a − i(Γ/2)|e⟩⟨e|`. Within a site the only
//! coupled pair is `{|e,0⟩, |g,1⟩}`; every other ket picks up a scalar decay
//! factor, so the propagator is built in closed form per 2×2 block.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::hilbert::{site_index, Level, Operator, Site, SiteMatrix, SiteOperator, StateVector};
use crate::{Error, Result};

const I: C64 = C64::new(0.0, 1.0);

/// Physical rates. All rates are angular frequencies in rad/μs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    g: f64,
    kappa: f64,
    gamma: f64,
    eta: f64,
    omega_raman: f64,
    delta_raman: f64,
}

impl SystemParams {
    pub fn new(
        g: f64,
        kappa: f64,
        gamma: f64,
        eta: f64,
        omega_raman: f64,
        delta_raman: f64,
    ) -> Result<Self> {
        let all = [g, kappa, gamma, eta, omega_raman, delta_raman];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("rates must be finite".into()));
        }
        if g <= 0.0 {
            return Err(Error::InvalidParameter(format!("g must be positive, got {g}")));
        }
        if kappa < 0.0 || gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "decay rates must be nonnegative, got κ={kappa}, Γ={gamma}"
            )));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("η must lie in [0, 1], got {eta}")));
        }
        beta_from_rates(g, kappa, gamma)?;
        Ok(Self { g, kappa, gamma, eta, omega_raman, delta_raman })
    }

    /// Builds parameters from ordinary frequencies in MHz (multiplied by 2π)
    /// and dimensionless Raman ratios `Ω/g` and `δ/Ω`.
    pub fn from_mhz(
        g_mhz: f64,
        kappa_mhz: f64,
        gamma_mhz: f64,
        eta: f64,
        omega_over_g: f64,
        delta_over_omega: f64,
    ) -> Result<Self> {
        let g = TAU * g_mhz;
        let omega = omega_over_g * g;
        Self::new(g, TAU * kappa_mhz, TAU * gamma_mhz, eta, omega, delta_over_omega * omega)
    }

    /// Cs reference set: g = 2π·34 MHz, κ = 2π·4.1 MHz, Γ = 2π·2.6 MHz,
    /// η = 0.6, Ω = 300g, δ = 10Ω.
    pub fn cesium() -> Self {
        Self::from_mhz(34.0, 4.1, 2.6, 0.6, 300.0, 10.0).expect("reference set is valid")
    }

    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn omega_raman(&self) -> f64 {
        self.omega_raman
    }
    pub fn delta_raman(&self) -> f64 {
        self.delta_raman
    }

    /// Damped vacuum-Rabi frequency `√(g² − (κ−Γ)²/16)`.
    pub fn beta(&self) -> f64 {
        beta_from_rates(self.g, self.kappa, self.gamma).expect("validated at construction")
    }

    pub fn with_eta(self, eta: f64) -> Result<Self> {
        Self::new(self.g, self.kappa, self.gamma, eta, self.omega_raman, self.delta_raman)
    }

    pub fn with_rates(self, kappa: f64, gamma: f64) -> Result<Self> {
        Self::new(self.g, kappa, gamma, self.eta, self.omega_raman, self.delta_raman)
    }

    /// `(κ+Γ)/4`, the envelope decay rate of the coupled block.
    fn envelope_rate(&self) -> f64 {
        (self.kappa + self.gamma) / 4.0
    }

    /// `(κ−Γ)/4`.
    fn asymmetry(&self) -> f64 {
        (self.kappa - self.gamma) / 4.0
    }
}

/// `β = √(g² − (κ−Γ)²/16)`; fails outside the underdamped regime.
pub fn beta_from_rates(g: f64, kappa: f64, gamma: f64) -> Result<f64> {
    let threshold = (kappa - gamma).powi(2) / 16.0;
    let g_sq = g * g;
    if g_sq <= threshold {
        return Err(Error::Overdamped { g_sq, threshold });
    }
    Ok((g_sq - threshold).sqrt())
}

pub fn beta(params: &SystemParams) -> f64 {
    params.beta()
}

/// Non-Hermitian generator of the no-detection evolution on the composite
/// space, assembled from ladder operators.
pub fn conditional_hamiltonian(params: &SystemParams) -> Operator {
    let mut h = Operator::zeros();
    let g = C64::from(params.g);
    for site in Site::BOTH {
        let a = Operator::annihilation(site);
        let ad = Operator::creation(site);
        let sp = Operator::raising(site);
        let sm = Operator::lowering(site);
        let coupling = &a.compose(&sp) + &ad.compose(&sm);
        let damping = &Operator::number(site).scaled(-I * params.kappa / 2.0)
            + &Operator::projector(site, Level::E).scaled(-I * params.gamma / 2.0);
        h = &h + &(&coupling.scaled(g) + &damping);
    }
    let hermitian = params.kappa == 0.0 && params.gamma == 0.0;
    h.with_flags(crate::hilbert::OperatorFlags { hermitian, unitary: false })
}

/// `exp(−i H t)` for the conditional Hamiltonian, stored per site.
#[derive(Clone, Debug, PartialEq)]
pub struct NoJumpPropagator {
    t: f64,
    site: SiteMatrix,
}

impl NoJumpPropagator {
    pub fn new(params: &SystemParams, t: f64) -> Result<Self> {
        check_duration(t)?;
        let (e0e0, g1e0, g1g1) = block_entries(params, t);
        let mut m = SiteMatrix::zeros();
        let f0 = site_index(Level::F, 0);
        let f1 = site_index(Level::F, 1);
        let g0 = site_index(Level::G, 0);
        let g1 = site_index(Level::G, 1);
        let e0 = site_index(Level::E, 0);
        let e1 = site_index(Level::E, 1);
        m[(f0, f0)] = C64::from(1.0);
        m[(g0, g0)] = C64::from(1.0);
        m[(f1, f1)] = C64::from((-params.kappa * t / 2.0).exp());
        // |e,1⟩ would couple to |g,2⟩, which the truncation removes.
        m[(e1, e1)] = C64::from((-(params.kappa + params.gamma) * t / 2.0).exp());
        m[(e0, e0)] = e0e0;
        m[(g1, e0)] = g1e0;
        m[(e0, g1)] = g1e0;
        m[(g1, g1)] = g1g1;
        Ok(Self { t, site: m })
    }

    pub fn duration(&self) -> f64 {
        self.t
    }

    pub fn site_matrix(&self) -> &SiteMatrix {
        &self.site
    }

    pub fn apply_in_place(&self, psi: &mut StateVector) {
        SiteOperator::new(Site::One, self.site).apply_in_place(psi);
        SiteOperator::new(Site::Two, self.site).apply_in_place(psi);
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        let mut out = psi.clone();
        self.apply_in_place(&mut out);
        out
    }

    pub fn to_operator(&self) -> Operator {
        let u1 = SiteOperator::new(Site::One, self.site).to_operator();
        let u2 = SiteOperator::new(Site::Two, self.site).to_operator();
        u1.compose(&u2)
    }
}

fn check_duration(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if !t.is_finite() {
        return Err(Error::InvalidParameter("propagation time must be finite".into()));
    }
    Ok(())
}

/// Entries of the `{|e,0⟩, |g,1⟩}` block: `(⟨e0|U|e0⟩, ⟨g1|U|e0⟩, ⟨g1|U|g1⟩)`.
fn block_entries(params: &SystemParams, t: f64) -> (C64, C64, C64) {
    let b = params.beta();
    let d = params.asymmetry();
    let env = (-params.envelope_rate() * t).exp();
    let (s, c) = (b * t).sin_cos();
    (
        C64::from(env * (c + d / b * s)),
        -I * (params.g / b * env * s),
        C64::from(env * (c - d / b * s)),
    )
}

pub fn no_jump_propagator(params: &SystemParams, t: f64) -> Result<Operator> {
    Ok(NoJumpPropagator::new(params, t)?.to_operator())
}

/// Amplitudes of `|e,0⟩` and `|g,1⟩` after evolving `|e,0⟩` for time `t`
/// without detection.
pub fn rabi_e0(params: &SystemParams, t: f64) -> Result<(C64, C64)> {
    check_duration(t)?;
    let b = params.beta();
    let env = (-(params.kappa + params.gamma) * t / 4.0).exp();
    let bracket = (b * t).cos() + (params.kappa - params.gamma) / (4.0 * b) * (b * t).sin();
    let amp_e0 = C64::from(env * bracket);
    let amp_g1 = C64::new(0.0, -params.g / b * env * (b * t).sin());
    Ok((amp_e0, amp_g1))
}

/// Bisection tolerance on the interaction time, μs.
pub const T1_TOLERANCE: f64 = 1e-12;

/// Smallest positive time at which the `|e,0⟩` amplitude vanishes, i.e. the
/// root of `cos βt + ((κ−Γ)/4β) sin βt` in `(0, π/β]`.
pub fn solve_t1(params: &SystemParams) -> f64 {
    let b = params.beta();
    let ratio = params.asymmetry() / b;
    let bracket = |t: f64| (b * t).cos() + ratio * (b * t).sin();
    // bracket(0) = 1 > 0 and bracket(π/β) = −1 < 0, with a single sign change.
    let (mut lo, mut hi) = (0.0_f64, PI / b);
    while hi - lo > T1_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if bracket(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Photodetector behind the beam splitter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    Plus,
    Minus,
}

impl Detector {
    pub const BOTH: [Detector; 2] = [Detector::Plus, Detector::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Detector::Plus => 1.0,
            Detector::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Detector::Plus => '+',
            Detector::Minus => '-',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelLabel {
    Dplus,
    Dminus,
    Spont1,
    Spont2,
}

impl ChannelLabel {
    pub const ALL: [ChannelLabel; 4] =
        [ChannelLabel::Dplus, ChannelLabel::Dminus, ChannelLabel::Spont1, ChannelLabel::Spont2];

    /// Detector port the photon reaches; `None` for free-space emission.
    pub fn detector(self) -> Option<Detector> {
        match self {
            ChannelLabel::Dplus => Some(Detector::Plus),
            ChannelLabel::Dminus => Some(Detector::Minus),
            _ => None,
        }
    }

    pub fn for_detector(detector: Detector) -> Self {
        match detector {
            Detector::Plus => ChannelLabel::Dplus,
            Detector::Minus => ChannelLabel::Dminus,
        }
    }
}

/// A decay channel. `collapse` carries the rate weight (`√κ (a1±a2)/√2` or
/// `√Γ S⁻`); `bare` is the same operator without it.
#[derive(Clone, Debug)]
pub struct JumpChannel {
    pub label: ChannelLabel,
    pub collapse: Operator,
    pub bare: Operator,
    // nonzero entries of `collapse` as (row, col, value)
    entries: Vec<(usize, usize, C64)>,
}

impl JumpChannel {
    pub fn new(label: ChannelLabel, params: &SystemParams) -> Self {
        let (bare, rate) = match label {
            ChannelLabel::Dplus | ChannelLabel::Dminus => {
                let sign = if label == ChannelLabel::Dplus { 1.0 } else { -1.0 };
                let a1 = Operator::annihilation(Site::One);
                let a2 = Operator::annihilation(Site::Two).scaled(C64::from(sign));
                ((&a1 + &a2).scaled(C64::from(FRAC_1_SQRT_2)), params.kappa)
            }
            ChannelLabel::Spont1 => (Operator::lowering(Site::One), params.gamma),
            ChannelLabel::Spont2 => (Operator::lowering(Site::Two), params.gamma),
        };
        let collapse = bare.scaled(C64::from(rate.sqrt()));
        let m = collapse.matrix();
        let entries = (0..m.ncols())
            .flat_map(|c| (0..m.nrows()).map(move |r| (r, c)))
            .filter(|&(r, c)| m[(r, c)] != C64::new(0.0, 0.0))
            .map(|(r, c)| (r, c, m[(r, c)]))
            .collect();
        Self { label, collapse, bare, entries }
    }

    /// `C ψ` using the sparse structure of the collapse operator.
    pub fn apply(&self, psi: &StateVector) -> StateVector {
        let src = psi.amplitudes();
        let mut out = StateVector::zeros();
        let dst = out.amplitudes_mut();
        for &(r, c, v) in &self.entries {
            dst[r] += v * src[c];
        }
        out
    }

    pub fn all(params: &SystemParams) -> [JumpChannel; 4] {
        ChannelLabel::ALL.map(|l| JumpChannel::new(l, params))
    }

    /// Instantaneous rate `‖C ψ‖²` for a normalized `ψ`.
    pub fn rate(&self, psi: &StateVector) -> f64 {
        self.apply(psi).norm_sqr()
    }
}

/// Applies the rate-weighted collapse operator (result not renormalized).
pub fn jump(channel: &JumpChannel, psi: &StateVector) -> StateVector {
    channel.apply(psi)
}
