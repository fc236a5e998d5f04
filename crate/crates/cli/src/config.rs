//! Run configuration: a flat JSON object with frequencies in MHz.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use cavity_teleport::dynamics::SystemParams;
use cavity_teleport::protocol::{InputState, ProtocolSchedule};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

use crate::Failure;

/// Every field has a default, so `{}` is a valid configuration (the Cs
/// reference set with perfect timing and a balanced input).
///
/// Optional schedule entries fall back to `t1` from the root solver,
/// `τ1 = 2/κ`, `τ2 = 20/κ`, `t2 = t1` and `t_d = 20/(κ+Γ)`; `null` means
/// "use the default". Windows whose defining rate is zero default to
/// infinity and must be given explicitly for pipelines that step through
/// them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub g_mhz: f64,
    pub kappa_mhz: f64,
    pub gamma_mhz: f64,
    pub eta: f64,
    pub omega_over_g: f64,
    pub delta_over_omega: f64,
    pub cf_re: f64,
    pub cf_im: f64,
    pub cg_re: f64,
    pub cg_im: f64,
    pub t1_us: Option<f64>,
    /// Timing error as a fraction of `t1`.
    pub dt1_frac: f64,
    pub tau1_us: Option<f64>,
    pub tau2_us: Option<f64>,
    pub t2_us: Option<f64>,
    pub td_us: Option<f64>,
    pub seed: u64,
    pub n_traj: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            g_mhz: 34.0,
            kappa_mhz: 4.1,
            gamma_mhz: 2.6,
            eta: 0.6,
            omega_over_g: 300.0,
            delta_over_omega: 10.0,
            cf_re: FRAC_1_SQRT_2,
            cf_im: 0.0,
            cg_re: FRAC_1_SQRT_2,
            cg_im: 0.0,
            t1_us: None,
            dt1_frac: 0.0,
            tau1_us: None,
            tau2_us: None,
            t2_us: None,
            td_us: None,
            seed: 1,
            n_traj: 10_000,
        }
    }
}

/// Parameters, schedule and input derived from a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Resolved {
    pub params: SystemParams,
    pub schedule: ProtocolSchedule,
    pub input: InputState,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }

    /// Sets one field by name. `cg` is a shorthand for a real input with
    /// `c_g = value` and `c_f = √(1 − value²)`.
    pub fn set(&self, key: &str, value: f64) -> Result<Self, Failure> {
        if key == "cg" {
            if !(-1.0..=1.0).contains(&value) {
                return Err(Failure::Config(format!("cg must lie in [-1, 1], got {value}")));
            }
            return Ok(Self {
                cf_re: (1.0 - value * value).sqrt(),
                cf_im: 0.0,
                cg_re: value,
                cg_im: 0.0,
                ..self.clone()
            });
        }
        self.with_value(key, number(value)?)
    }

    /// Applies a `KEY=VALUE` override; the value is parsed as JSON so
    /// integers, floats and `null` all work.
    pub fn set_str(&self, assignment: &str) -> Result<Self, Failure> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("override `{assignment}` is not KEY=VALUE")))?;
        let (key, raw) = (key.trim(), raw.trim());
        if key == "cg" {
            let v = raw
                .parse::<f64>()
                .map_err(|_| Failure::Config(format!("cg: `{raw}` is not a number")))?;
            return self.set("cg", v);
        }
        let value: Value = serde_json::from_str(raw)
            .map_err(|_| Failure::Config(format!("{key}: `{raw}` is not a JSON value")))?;
        self.with_value(key, value)
    }

    fn with_value(&self, key: &str, value: Value) -> Result<Self, Failure> {
        let Value::Object(mut map) = serde_json::to_value(self).expect("config serializes") else {
            unreachable!("config is an object")
        };
        let slot = map
            .get_mut(key)
            .ok_or_else(|| Failure::Config(format!("unknown config key `{key}`")))?;
        *slot = value;
        serde_json::from_value(Value::Object(map)).map_err(|e| Failure::Config(format!("{key}: {e}")))
    }

    pub fn resolve(&self) -> Result<Resolved, Failure> {
        let params = SystemParams::from_mhz(
            self.g_mhz,
            self.kappa_mhz,
            self.gamma_mhz,
            self.eta,
            self.omega_over_g,
            self.delta_over_omega,
        )?;
        let mut schedule = ProtocolSchedule::default_for(&params);
        if let Some(t1) = self.t1_us {
            schedule.t1 = t1;
            schedule.t2 = t1;
        }
        schedule = schedule.with_dt1_frac(self.dt1_frac);
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut schedule.tau1, self.tau1_us);
        set(&mut schedule.tau2, self.tau2_us);
        set(&mut schedule.t2, self.t2_us);
        set(&mut schedule.t_d, self.td_us);
        let input = InputState::new(C64::new(self.cf_re, self.cf_im), C64::new(self.cg_re, self.cg_im))?;
        Ok(Resolved { params, schedule, input })
    }

    /// The configuration with every defaulted schedule entry written out.
    /// Infinite windows stay `None`.
    pub fn effective(&self, schedule: &ProtocolSchedule) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        Self {
            t1_us: finite(schedule.t1),
            tau1_us: finite(schedule.tau1),
            tau2_us: finite(schedule.tau2),
            t2_us: finite(schedule.t2),
            td_us: finite(schedule.t_d),
            ..self.clone()
        }
    }
}

fn number(value: f64) -> Result<Value, Failure> {
    // integral values go in as integers so u64 fields accept them
    if value.fract() == 0.0 && value >= 0.0 && value < u64::MAX as f64 {
        return Ok(Value::Number(Number::from(value as u64)));
    }
    Number::from_f64(value)
        .map(Value::Number)
        .ok_or_else(|| Failure::Config(format!("{value} is not a finite number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(RunConfig::parse("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_is_rejected_with_its_name() {
        let err = RunConfig::parse("{\n  \"g_mhz\": 34,\n  \"kapa_mhz\": 4.1\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kapa_mhz") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn round_trip_is_lossless() {
        let cfg = RunConfig {
            g_mhz: 33.999999999999986,
            cf_re: 0.1 + 0.2,
            t1_us: Some(7.405022345e-3),
            td_us: None,
            seed: u64::MAX,
            ..RunConfig::default()
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn set_by_name() {
        let cfg = RunConfig::default().set("dt1_frac", 0.05).unwrap().set("n_traj", 20.0).unwrap();
        assert_eq!(cfg.dt1_frac, 0.05);
        assert_eq!(cfg.n_traj, 20);
        assert!(matches!(cfg.set("n_traj", 2.5), Err(Failure::Config(_))));
        assert!(matches!(cfg.set("bogus", 1.0), Err(Failure::Config(_))));
        let cfg = cfg.set_str("td_us=null").unwrap().set_str("tau1_us = 0.1").unwrap();
        assert_eq!((cfg.td_us, cfg.tau1_us), (None, Some(0.1)));
    }

    #[test]
    fn cg_keeps_the_input_normalized() {
        let cfg = RunConfig::default().set("cg", 0.6).unwrap();
        assert_eq!((cfg.cf_re, cfg.cg_re, cfg.cf_im, cfg.cg_im), (0.8, 0.6, 0.0, 0.0));
        assert!(cfg.resolve().is_ok());
        assert!(RunConfig::default().set("cg", 1.5).is_err());
    }

    #[test]
    fn schedule_overrides() {
        let cfg = RunConfig { t1_us: Some(0.01), dt1_frac: 0.1, tau2_us: Some(2.0), ..RunConfig::default() };
        let s = cfg.resolve().unwrap().schedule;
        assert_eq!((s.t1, s.t2, s.tau2), (0.01, 0.01, 2.0));
        assert!((s.dt1 - 1e-3).abs() < 1e-18);
        let eff = cfg.effective(&s);
        assert_eq!(eff.resolve().unwrap().schedule, s);
    }

    #[test]
    fn lossless_windows_stay_unset() {
        let cfg = RunConfig { kappa_mhz: 0.0, gamma_mhz: 0.0, ..RunConfig::default() };
        let s = cfg.resolve().unwrap().schedule;
        let eff = cfg.effective(&s);
        assert_eq!((eff.tau1_us, eff.td_us), (None, None));
        assert!(eff.t1_us.is_some());
    }
}
