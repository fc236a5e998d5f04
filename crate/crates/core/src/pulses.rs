//! Instantaneous single-atom transformations applied between the interaction
//! and waiting stages, and the Raman-drive model that justifies treating
//! them as instantaneous.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemParams;
use crate::hilbert::{Level, Operator, OperatorFlags, Site, SiteOperator, StateVector};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseKind {
    /// Raman swap of the ground doublet: `f → g`, `g → −f`, `e → e`.
    RamanSwap,
    /// π pulse on the optical transition: `g → e`, `e → −g`, `f → f`.
    ExciteGtoE,
    /// `f → g`, `g → −f` on atom 1 during remapping (same unitary as
    /// [`PulseKind::RamanSwap`]).
    MapFtoG,
    /// `g → e`, `e → −g` on atom 1 during remapping (same unitary as
    /// [`PulseKind::ExciteGtoE`]).
    MapGtoE,
    /// Sign flip `f → −f`.
    PhaseFixF,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PulseSpec {
    pub kind: PulseKind,
    pub atom: Site,
}

impl PulseSpec {
    pub fn new(kind: PulseKind, atom: Site) -> Self {
        Self { kind, atom }
    }
    pub fn raman_swap(atom: Site) -> Self {
        Self::new(PulseKind::RamanSwap, atom)
    }
    pub fn excite_g_to_e(atom: Site) -> Self {
        Self::new(PulseKind::ExciteGtoE, atom)
    }
    pub fn map_f_to_g_1() -> Self {
        Self::new(PulseKind::MapFtoG, Site::One)
    }
    pub fn map_g_to_e_1() -> Self {
        Self::new(PulseKind::MapGtoE, Site::One)
    }
    pub fn phase_fix_f2() -> Self {
        Self::new(PulseKind::PhaseFixF, Site::Two)
    }

    /// 3×3 atomic unitary in `f, g, e` order (columns are images).
    pub fn atomic_matrix(&self) -> Matrix3<C64> {
        let one = C64::from(1.0);
        let zero = C64::from(0.0);
        let f = Level::F.index();
        let g = Level::G.index();
        let e = Level::E.index();
        let mut m = Matrix3::<C64>::zeros();
        match self.kind {
            PulseKind::RamanSwap | PulseKind::MapFtoG => {
                m[(g, f)] = one;
                m[(f, g)] = -one;
                m[(e, e)] = one;
            }
            PulseKind::ExciteGtoE | PulseKind::MapGtoE => {
                m[(e, g)] = one;
                m[(g, e)] = -one;
                m[(f, f)] = one;
            }
            PulseKind::PhaseFixF => {
                m[(f, f)] = -one;
                m[(g, g)] = one;
                m[(e, e)] = one;
            }
        }
        debug_assert!(m.iter().all(|c| *c == zero || c.norm() == 1.0));
        m
    }

    pub fn site_operator(&self) -> SiteOperator {
        SiteOperator::from_atomic(self.atom, &self.atomic_matrix())
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        self.site_operator().apply(psi)
    }

    pub fn apply_in_place(&self, psi: &mut StateVector) {
        self.site_operator().apply_in_place(psi)
    }
}

/// Dense unitary of a pulse on the composite space.
pub fn pulse_unitary(spec: PulseSpec) -> Operator {
    spec.site_operator()
        .to_operator()
        .with_flags(OperatorFlags { hermitian: false, unitary: true })
}

/// The swap applied to both atoms right after the first interaction.
pub fn first_swap() -> [PulseSpec; 2] {
    [PulseSpec::raman_swap(Site::One), PulseSpec::raman_swap(Site::Two)]
}

/// Remapping before the second interaction, in application order: atom 1
/// `g → e` then `f → g`; atom 2 `g → e`.
pub fn remap_sequence() -> [PulseSpec; 3] {
    [PulseSpec::map_g_to_e_1(), PulseSpec::map_f_to_g_1(), PulseSpec::excite_g_to_e(Site::Two)]
}

pub fn apply_sequence(pulses: &[PulseSpec], psi: &mut StateVector) {
    for p in pulses {
        p.apply_in_place(psi);
    }
}

/// Effective two-photon Raman drive between the ground states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamanModel {
    /// Coupling strength `Ω²/δ`, rad/μs.
    pub lambda: f64,
    /// Swap duration `π/(2λ)`, μs.
    pub duration: f64,
    /// Probability of an atom-cavity exchange during the swap, `(gπ/2λ)²`.
    pub leakage: f64,
    pub warnings: Vec<String>,
}

/// Minimum ratio for `δ ≫ Ω` and `λ ≫ g` before a warning is raised.
pub const RAMAN_SEPARATION: f64 = 10.0;

pub fn raman_model(params: &SystemParams) -> Result<RamanModel> {
    let omega = params.omega_raman();
    let delta = params.delta_raman();
    if omega <= 0.0 || delta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Raman drive needs positive Ω and δ, got Ω={omega}, δ={delta}"
        )));
    }
    let lambda = omega * omega / delta;
    let duration = PI / (2.0 * lambda);
    let leakage = (params.g() * duration).powi(2);
    let mut warnings = Vec::new();
    if delta / omega < RAMAN_SEPARATION {
        warnings.push(format!(
            "δ/Ω = {:.3} < {RAMAN_SEPARATION}; adiabatic elimination is questionable",
            delta / omega
        ));
    }
    if lambda / params.g() < RAMAN_SEPARATION {
        warnings.push(format!(
            "λ/g = {:.3} < {RAMAN_SEPARATION}; cavity exchange during the swap is not negligible",
            lambda / params.g()
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(RamanModel { lambda, duration, leakage, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{BasisLabel, Level::*};
    use approx::assert_relative_eq;

    const ALL_KINDS: [PulseKind; 5] = [
        PulseKind::RamanSwap,
        PulseKind::ExciteGtoE,
        PulseKind::MapFtoG,
        PulseKind::MapGtoE,
        PulseKind::PhaseFixF,
    ];

    fn ket(a1: Level, n1: u8, a2: Level, n2: u8) -> StateVector {
        StateVector::basis(BasisLabel::new(a1, n1, a2, n2))
    }

    #[test]
    fn raman_swap_on_superposition() {
        let cf = C64::new(0.6, 0.1);
        let cg = C64::new(-0.2, 0.7);
        let psi = ket(F, 0, G, 0).scaled(cf) + ket(G, 0, G, 0).scaled(cg);
        let out = PulseSpec::raman_swap(Site::One).apply(&psi);
        let expected = ket(G, 0, G, 0).scaled(cf) - ket(F, 0, G, 0).scaled(cg);
        assert!((out - expected).norm_sqr() < 1e-30);
    }

    #[test]
    fn every_pulse_is_unitary() {
        for kind in ALL_KINDS {
            for atom in Site::BOTH {
                let u = pulse_unitary(PulseSpec::new(kind, atom));
                assert!(u.is_unitary(crate::EPS_NUM), "{kind:?} on {atom:?}");
                assert!(u.flags().unitary);
            }
        }
    }

    #[test]
    fn pulses_commute_with_photon_number() {
        for kind in ALL_KINDS {
            for atom in Site::BOTH {
                let u = pulse_unitary(PulseSpec::new(kind, atom));
                for site in Site::BOTH {
                    let n = Operator::number(site);
                    let comm = &u.compose(&n) - &n.compose(&u);
                    assert!(comm.max_abs_diff(&Operator::zeros()) < 1e-15);
                }
            }
        }
    }

    #[test]
    fn double_swap_is_minus_identity_on_ground_doublet() {
        let m = PulseSpec::raman_swap(Site::Two).atomic_matrix();
        let sq = m * m;
        let expected = Matrix3::from_diagonal(&nalgebra::Vector3::new(
            C64::from(-1.0),
            C64::from(-1.0),
            C64::from(1.0),
        ));
        assert_eq!(sq, expected);
    }

    #[test]
    fn phase_fix_is_self_inverse() {
        let u = pulse_unitary(PulseSpec::phase_fix_f2());
        assert!(u.compose(&u).max_abs_diff(&Operator::identity()) < 1e-15);
    }

    #[test]
    fn remap_sends_purged_state_to_second_interaction() {
        let cf = C64::new(0.3, 0.4);
        let cg = C64::new(0.0, -0.866_025_403_784_438_6);
        // c_g |f1 g2⟩ + c_f |g1 f2⟩ (cavities empty)
        let mut psi = ket(F, 0, G, 0).scaled(cg) + ket(G, 0, F, 0).scaled(cf);
        apply_sequence(&remap_sequence(), &mut psi);
        let expected = ket(G, 0, E, 0).scaled(cg) + ket(E, 0, F, 0).scaled(cf);
        assert!((psi - expected).norm_sqr() < 1e-30);
    }

    #[test]
    fn raman_model_reference_values() {
        let p = SystemParams::cesium();
        let r = raman_model(&p).unwrap();
        assert_relative_eq!(r.lambda, 30.0 * p.g(), max_relative = 1e-12);
        // (π/60)²
        assert_relative_eq!(r.leakage, (PI / 60.0).powi(2), max_relative = 1e-12);
        assert!((r.leakage - 2.74e-3).abs() < 1e-5);
        let g = 213.628;
        let p = SystemParams::new(g, 0.0, 0.0, 1.0, 300.0 * g, 3000.0 * g).unwrap();
        let r = raman_model(&p).unwrap();
        assert_relative_eq!(r.duration, PI / (60.0 * g), max_relative = 1e-12);
        assert!((r.duration - 2.45e-4).abs() < 1e-6);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn raman_scaling_with_drive() {
        let g = 100.0;
        let base = SystemParams::new(g, 1.0, 1.0, 1.0, 300.0 * g, 3000.0 * g).unwrap();
        let doubled = SystemParams::new(g, 1.0, 1.0, 1.0, 600.0 * g, 3000.0 * g).unwrap();
        let (a, b) = (raman_model(&base).unwrap(), raman_model(&doubled).unwrap());
        assert_relative_eq!(b.lambda / a.lambda, 4.0, max_relative = 1e-12);
        assert_relative_eq!(a.leakage / b.leakage, 16.0, max_relative = 1e-12);
    }

    #[test]
    fn raman_model_errors_and_warnings() {
        let g = 100.0;
        let p = SystemParams::new(g, 1.0, 1.0, 1.0, 0.0, 10.0).unwrap();
        assert!(raman_model(&p).is_err());
        let weak = SystemParams::new(g, 1.0, 1.0, 1.0, 20.0 * g, 60.0 * g).unwrap();
        let r = raman_model(&weak).unwrap();
        assert_eq!(r.warnings.len(), 2);
    }
}
