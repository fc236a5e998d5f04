//! Closed-form figures of merit: success probability, the mixed state left
//! by a mistimed first interaction and its fidelity, and the time budget.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Detector, SystemParams};
use crate::hilbert::{fidelity, DensityMatrix, Subspace};
use crate::protocol::{InputState, ProtocolSchedule};
use crate::pulses::raman_model;
use crate::{Error, Result};

const I: C64 = C64::new(0.0, 1.0);

/// Below this value of `exp(−(κ+Γ)t_d/2)` the long-window limit is used.
pub const LONG_WINDOW: f64 = 1e-6;

/// Success probability with ideal detectors:
///
/// `P = ½ e^{−(κ+Γ)t1/2} {1 − e^{−(κ+Γ)t_d/2} [cos² βt_d
///   + ((κ−Γ)² + 4g²)/(4β²) sin² βt_d + (κ−Γ)/(4β) sin 2βt_d]}`
///
/// evaluated with the nominal `t1`. An infinite or long `t_d` gives
/// `e^{−(κ+Γ)t1/2}/2`.
pub fn success_probability(params: &SystemParams, schedule: &ProtocolSchedule) -> Result<f64> {
    let (g, k, gm) = (params.g(), params.kappa(), params.gamma());
    let b = crate::dynamics::beta_from_rates(g, k, gm)?;
    let t1 = schedule.t1;
    let td = schedule.t_d;
    if t1.is_nan() || t1 < 0.0 || td.is_nan() || td < 0.0 {
        return Err(Error::InvalidSchedule(format!("t1={t1}, t_d={td} must be nonnegative")));
    }
    let prefactor = 0.5 * (-(k + gm) * t1 / 2.0).exp();
    let tail = (-(k + gm) * td / 2.0).exp();
    if td.is_infinite() || tail < LONG_WINDOW {
        return Ok(prefactor);
    }
    let (s, c) = (b * td).sin_cos();
    let bracket = c * c
        + ((k - gm).powi(2) + 4.0 * g * g) / (4.0 * b * b) * s * s
        + (k - gm) / (4.0 * b) * (2.0 * b * td).sin();
    Ok(prefactor * (1.0 - tail * bracket))
}

/// `η² P`.
pub fn success_with_detector(params: &SystemParams, schedule: &ProtocolSchedule) -> Result<f64> {
    Ok(params.eta().powi(2) * success_probability(params, schedule)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MistimedCoefficients {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
    pub e: C64,
    pub eps1: C64,
    pub eps2_plus: C64,
    pub eps2_minus: C64,
    pub eps3_plus: C64,
    pub eps3_minus: C64,
}

impl MistimedCoefficients {
    pub fn eps2(&self, branch: Detector) -> C64 {
        match branch {
            Detector::Plus => self.eps2_plus,
            Detector::Minus => self.eps2_minus,
        }
    }

    pub fn eps3(&self, branch: Detector) -> C64 {
        match branch {
            Detector::Plus => self.eps3_plus,
            Detector::Minus => self.eps3_minus,
        }
    }
}

pub fn mistimed_coefficients(
    params: &SystemParams,
    schedule: &ProtocolSchedule,
    input: &InputState,
) -> Result<MistimedCoefficients> {
    let (g, k, gm) = (params.g(), params.kappa(), params.gamma());
    let beta = crate::dynamics::beta_from_rates(g, k, gm)?;
    let env = |t: f64| (-(k + gm) * t / 4.0).exp();
    let stay = |t: f64| C64::from(env(t) * ((beta * t).cos() + (k - gm) / (4.0 * beta) * (beta * t).sin()));
    let emit = |t: f64| g / beta * env(t) * (beta * t).sin();

    let t1 = schedule.interaction_time();
    let a = stay(t1);
    let b = I * emit(t1);
    let c = -I * emit(schedule.tau1);
    let d = stay(schedule.t2);
    let e = -I * emit(schedule.t2);

    let eps1 = b * e * (-k * schedule.tau1 / 2.0).exp();
    let (cf, cg) = (input.c_f(), input.c_g());
    let acd_e = a * c * d * e;
    let ac_e2 = a * c * e * e;
    Ok(MistimedCoefficients {
        a,
        b,
        c,
        d,
        e,
        eps1,
        eps2_plus: (cg + cf) * acd_e,
        eps2_minus: (cg - cf) * acd_e,
        eps3_plus: (cg + cf) * ac_e2,
        eps3_minus: (cg - cf) * ac_e2,
    })
}

/// Fidelity after a mistimed first interaction, for the branch selected by
/// the first-cycle detector, together with the corrected atom-2 state
/// `ρ ∝ |v⟩⟨v| + (|ε2|² + 2|ε3|²)|g⟩⟨g|`, `v = ε1(c_f|f⟩ + c_g|g⟩) + ε2|e⟩`.
pub fn fidelity_mistimed(
    params: &SystemParams,
    schedule: &ProtocolSchedule,
    input: &InputState,
    branch: Detector,
) -> Result<(f64, DensityMatrix)> {
    let m = mistimed_coefficients(params, schedule, input)?;
    let (e1, e2, e3) = (m.eps1, m.eps2(branch), m.eps3(branch));
    let (n1, n2, n3) = (e1.norm_sqr(), e2.norm_sqr(), e3.norm_sqr());
    let denom = n1 + 2.0 * n2 + 2.0 * n3;
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::ZeroTrace);
    }
    let cg2 = input.c_g().norm_sqr();
    let f = (n1 + (n2 + 2.0 * n3) * cg2) / denom;

    let v = [e1 * input.c_f(), e1 * input.c_g(), e2];
    let mut rho = DMatrix::<C64>::from_fn(3, 3, |r, c| v[r] * v[c].conj());
    rho[(1, 1)] += C64::from(n2 + 2.0 * n3);
    let rho = DensityMatrix::new(rho / C64::from(denom), Subspace::Atom2)?;
    debug_assert!((fidelity(&input.target(), &rho).unwrap_or(f) - f).abs() < 1e-9);
    Ok((f.clamp(0.0, 1.0), rho))
}

/// One row of the timing budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub stage: String,
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingBudget {
    pub entries: Vec<BudgetEntry>,
    pub total: f64,
}

/// Wall-clock duration of one attempt: first interaction, first swap (both
/// atoms at once), first window, purge, the remapping Raman pulse, and the
/// second window. The second interaction runs inside the second window and
/// is not counted again. Optical π pulses are treated as instantaneous.
pub fn timing_budget(
    params: &SystemParams,
    schedule: &ProtocolSchedule,
    include_raman: bool,
) -> Result<TimingBudget> {
    let mut entries = vec![BudgetEntry { stage: "interaction t1+dt1".into(), duration: schedule.interaction_time() }];
    let raman = if include_raman { Some(raman_model(params)?.duration) } else { None };
    if let Some(d) = raman {
        entries.push(BudgetEntry { stage: "raman swap".into(), duration: d });
    }
    entries.push(BudgetEntry { stage: "window tau1".into(), duration: schedule.tau1 });
    entries.push(BudgetEntry { stage: "purge tau2".into(), duration: schedule.tau2 });
    if let Some(d) = raman {
        entries.push(BudgetEntry { stage: "raman remap".into(), duration: d });
    }
    entries.push(BudgetEntry { stage: "window t_d".into(), duration: schedule.t_d });
    let total = entries.iter().map(|e| e.duration).sum();
    if !f64::is_finite(total) {
        return Err(Error::InvalidSchedule("timing budget needs finite windows".into()));
    }
    Ok(TimingBudget { entries, total })
}

/// `F` for both branches at one schedule point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub tau1: f64,
    pub t2: f64,
    pub f_plus: f64,
    pub f_minus: f64,
}

/// Fidelity over a `τ1 × t2` grid, `n` points per axis, endpoints included.
pub fn scan_tau1_t2(
    params: &SystemParams,
    schedule: &ProtocolSchedule,
    input: &InputState,
    tau1_range: (f64, f64),
    t2_range: (f64, f64),
    n: usize,
) -> Result<Vec<ScanPoint>> {
    let grid = |(lo, hi): (f64, f64), i: usize| {
        if n <= 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let s = ProtocolSchedule { tau1: grid(tau1_range, i), t2: grid(t2_range, j), ..*schedule };
            let (f_plus, _) = fidelity_mistimed(params, &s, input, Detector::Plus)?;
            let (f_minus, _) = fidelity_mistimed(params, &s, input, Detector::Minus)?;
            out.push(ScanPoint { tau1: s.tau1, t2: s.t2, f_plus, f_minus });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::rabi_e0;
    use approx::assert_relative_eq;

    fn cs() -> (SystemParams, ProtocolSchedule) {
        let p = SystemParams::cesium();
        (p, ProtocolSchedule::default_for(&p))
    }

    #[test]
    fn lossless_limit_is_half() {
        let p = SystemParams::new(100.0, 0.0, 0.0, 1.0, 3e4, 3e5).unwrap();
        let s = ProtocolSchedule::default_for(&p);
        assert!(s.t_d.is_infinite());
        assert_eq!(success_probability(&p, &s).unwrap(), 0.5);
    }

    #[test]
    fn cesium_long_window() {
        let (p, s) = cs();
        let expected = 0.5 * (-(p.kappa() + p.gamma()) * s.t1 / 2.0).exp();
        let long = ProtocolSchedule { t_d: 1e3, ..s };
        assert_eq!(success_probability(&p, &long).unwrap(), expected);
        assert!((expected - 0.4278).abs() < 1e-3);
        let pp = success_with_detector(&p, &long).unwrap();
        assert!((pp - 0.15).abs() < 0.01, "{pp}");
    }

    #[test]
    fn empty_window_gives_zero() {
        let (p, s) = cs();
        let z = ProtocolSchedule { t_d: 0.0, ..s };
        assert!(success_probability(&p, &z).unwrap().abs() < 1e-15);
    }

    #[test]
    fn detector_scaling() {
        let (p, s) = cs();
        let one = p.with_eta(1.0).unwrap();
        assert_eq!(success_with_detector(&one, &s).unwrap(), success_probability(&p, &s).unwrap());
        assert_eq!(success_with_detector(&p.with_eta(0.0).unwrap(), &s).unwrap(), 0.0);
    }

    #[test]
    fn exact_timing_kills_a() {
        let (p, s) = cs();
        let m = mistimed_coefficients(&p, &s, &InputState::balanced()).unwrap();
        assert!(m.a.norm() < 1e-9);
        let (f, _) = fidelity_mistimed(&p, &s, &InputState::balanced(), Detector::Plus).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn antisymmetric_input_immune_on_plus() {
        let (p, s) = cs();
        let s = s.with_dt1_frac(0.05);
        let input = InputState::new(C64::from(-std::f64::consts::FRAC_1_SQRT_2), C64::from(std::f64::consts::FRAC_1_SQRT_2)).unwrap();
        let m = mistimed_coefficients(&p, &s, &input).unwrap();
        assert_eq!(m.eps2_plus, C64::from(0.0));
        assert_eq!(m.eps3_plus, C64::from(0.0));
    }

    #[test]
    fn a_matches_rabi_amplitude() {
        let (p, s) = cs();
        let s = s.with_dt1_frac(0.05);
        let m = mistimed_coefficients(&p, &s, &InputState::balanced()).unwrap();
        let (amp_e0, amp_g1) = rabi_e0(&p, s.interaction_time()).unwrap();
        assert_relative_eq!(m.a.re, amp_e0.re, max_relative = 1e-12);
        assert_relative_eq!(m.b.im, -amp_g1.im, max_relative = 1e-12);
    }

    #[test]
    fn formula_matches_density_matrix_fidelity() {
        let (p, s) = cs();
        let s = s.with_dt1_frac(0.08);
        let input = InputState::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8)).unwrap();
        for branch in Detector::BOTH {
            let (f, rho) = fidelity_mistimed(&p, &s, &input, branch).unwrap();
            let direct = fidelity(&input.target(), &rho).unwrap();
            assert!((f - direct).abs() < 1e-12);
            assert!((rho.trace() - 1.0).abs() < 1e-12);
            assert!(rho.min_eigenvalue() > -1e-14);
        }
    }

    #[test]
    fn budget_totals() {
        let (p, s) = cs();
        let b = timing_budget(&p, &s, true).unwrap();
        assert!((b.total - 1.35).abs() < 0.05 * 1.35, "{}", b.total);
        let bare = timing_budget(&p, &s, false).unwrap();
        let sum = s.t1 + s.tau1 + s.tau2 + s.t_d;
        assert_relative_eq!(bare.total, sum, max_relative = 1e-14);
        let faster = p.with_rates(2.0 * p.kappa(), p.gamma()).unwrap();
        let s2 = ProtocolSchedule::default_for(&faster);
        assert_relative_eq!(s2.tau1, s.tau1 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(s2.tau2, s.tau2 / 2.0, max_relative = 1e-14);
    }
}
