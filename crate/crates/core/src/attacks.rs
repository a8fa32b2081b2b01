//! Static and dynamic load-altering attack agents.
//!
//! A static attack steps the vulnerable load portion at its start time and
//! holds it. A dynamic attack closes a proportional loop on a sensed
//! frequency: `ε = −K·Δω` on the target buses, saturated at each bus's
//! vulnerable capacity, tolerating measurement loss by holding the last
//! injection.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::case::{CaseIndex, GridCase};
use crate::error::{Error, Result};
use crate::grid::{critical_gain_bisect, CriticalGain, ReducedSystem};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SlaaSpec {
    /// (bus id, load increase as a fraction of that bus's nominal load).
    pub targets: Vec<(usize, f64)>,
    pub start_s: f64,
}

impl SlaaSpec {
    pub fn validate(&self, idx: &CaseIndex) -> Result<()> {
        for &(bus, frac) in &self.targets {
            if !idx.load_of_bus.contains_key(&bus) {
                return Err(Error::Config(format!(
                    "slaa: target bus {bus} is not a load bus"
                )));
            }
            if !(frac.is_finite() && frac >= 0.0) {
                return Err(Error::Config(format!(
                    "slaa: fraction for bus {bus} must be >= 0"
                )));
            }
        }
        if !(self.start_s.is_finite() && self.start_s >= 0.0) {
            return Err(Error::Config("slaa: start time must be >= 0".into()));
        }
        Ok(())
    }
}

/// Step injection: `fraction·nominal` on each target from the start time on.
pub fn slaa_inject(
    spec: &SlaaSpec,
    time_s: f64,
    idx: &CaseIndex,
) -> Result<DVector<f64>> {
    spec.validate(idx)?;
    let mut eps = DVector::zeros(idx.n_load());
    if time_s < spec.start_s {
        return Ok(eps);
    }
    for &(bus, frac) in &spec.targets {
        let li = idx.load_of_bus[&bus];
        eps[li] = frac * idx.nominal_load[li];
    }
    Ok(eps)
}

/// Where the dynamic attacker takes its frequency measurement from.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum FreqSource {
    /// Inertia-weighted average over all generators.
    SystemAverage,
    /// A single generator, by bus id.
    Generator(usize),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case")]
pub enum GainUnit {
    /// Gains in pu per Hz of frequency deviation (default).
    #[default]
    PuPerHz,
    /// Gains in pu per rad/s; converted internally by 2π.
    PuPerRadS,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DlaaSpec {
    /// (bus id, feedback gain K^LG > 0).
    pub targets: Vec<(usize, f64)>,
    pub sensor: FreqSource,
    pub start_s: f64,
    #[serde(default)]
    pub gain_unit: GainUnit,
}

impl DlaaSpec {
    pub fn validate(&self, idx: &CaseIndex) -> Result<()> {
        for &(bus, gain) in &self.targets {
            if !idx.load_of_bus.contains_key(&bus) {
                return Err(Error::Config(format!(
                    "dlaa: target bus {bus} is not a load bus"
                )));
            }
            if !(gain.is_finite() && gain > 0.0) {
                return Err(Error::Config(format!(
                    "dlaa: gain for bus {bus} must be > 0 (K^LG > 0 indicates manipulation)"
                )));
            }
        }
        if let FreqSource::Generator(bus) = self.sensor {
            if !idx.gen_of_bus.contains_key(&bus) {
                return Err(Error::Config(format!(
                    "dlaa: sensed bus {bus} is not a generator bus"
                )));
            }
        }
        if !(self.start_s.is_finite() && self.start_s >= 0.0) {
            return Err(Error::Config("dlaa: start time must be >= 0".into()));
        }
        Ok(())
    }

    /// Per-load-bus gains in internal units (pu per Hz).
    pub fn gain_vector(&self, idx: &CaseIndex) -> DVector<f64> {
        let scale = match self.gain_unit {
            GainUnit::PuPerHz => 1.0,
            GainUnit::PuPerRadS => 2.0 * std::f64::consts::PI,
        };
        let mut g = DVector::zeros(idx.n_load());
        for &(bus, gain) in &self.targets {
            g[idx.load_of_bus[&bus]] = gain * scale;
        }
        g
    }

    /// Sensing weights over generators (one-hot or inertia weights).
    pub fn sensing_weights(&self, idx: &CaseIndex, red: &ReducedSystem) -> DVector<f64> {
        match self.sensor {
            FreqSource::SystemAverage => red.inertia_weights(),
            FreqSource::Generator(bus) => {
                let mut w = DVector::zeros(idx.n_gen());
                w[idx.gen_of_bus[&bus]] = 1.0;
                w
            }
        }
    }
}

/// Time-domain dynamic attack agent. Holds its last injection when the
/// measurement path loses frames.
#[derive(Debug, Clone)]
pub struct DlaaAgent {
    gains: DVector<f64>,
    start_s: f64,
    last_meas_hz: Option<f64>,
    last_injection: DVector<f64>,
}

impl DlaaAgent {
    pub fn new(spec: &DlaaSpec, idx: &CaseIndex) -> Result<Self> {
        spec.validate(idx)?;
        Ok(DlaaAgent {
            gains: spec.gain_vector(idx),
            start_s: spec.start_s,
            last_meas_hz: None,
            last_injection: DVector::zeros(idx.n_load()),
        })
    }

    pub fn on_measurement(&mut self, freq_dev_hz: f64) {
        self.last_meas_hz = Some(freq_dev_hz);
    }

    /// Injection at `time_s` given the current saturation bounds:
    /// `ε_i ∈ [−min(vuln_cap_i, current_load_i), +vuln_cap_i]`.
    pub fn inject(
        &mut self,
        time_s: f64,
        vulnerable_cap: &DVector<f64>,
        current_load: &DVector<f64>,
    ) -> DVector<f64> {
        if time_s < self.start_s {
            return DVector::zeros(self.gains.len());
        }
        let Some(df) = self.last_meas_hz else {
            // missing measurement: the attacker tolerates loss
            return self.last_injection.clone();
        };
        let mut eps = &self.gains * (-df);
        for i in 0..eps.len() {
            let hi = vulnerable_cap[i];
            let lo = -vulnerable_cap[i].min(current_load[i]);
            eps[i] = eps[i].clamp(lo, hi);
        }
        self.last_injection = eps.clone();
        eps
    }
}

#[derive(Debug, Clone)]
pub struct CriticalGainReport {
    pub result: CriticalGain,
    pub bisect_tol: f64,
}

/// Bisection on the spectral abscissa of the closed loop over a symmetric
/// gain applied at `target_buses`, sensing per `sensor`.
pub fn predict_critical_gain(
    case: &GridCase,
    red: &ReducedSystem,
    idx: &CaseIndex,
    target_buses: &[usize],
    sensor: FreqSource,
    max_gain: f64,
    tol: f64,
) -> Result<CriticalGainReport> {
    let _ = case;
    let mut mask = DVector::zeros(idx.n_load());
    for &bus in target_buses {
        let li = *idx
            .load_of_bus
            .get(&bus)
            .ok_or_else(|| Error::Config(format!("target bus {bus} is not a load bus")))?;
        mask[li] = 1.0;
    }
    let spec_probe = DlaaSpec {
        targets: target_buses.iter().map(|&b| (b, 1.0)).collect(),
        sensor,
        start_s: 0.0,
        gain_unit: GainUnit::PuPerHz,
    };
    let weights = spec_probe.sensing_weights(idx, red);
    let result = critical_gain_bisect(red, &mask, &weights, max_gain, tol)?;
    Ok(CriticalGainReport {
        result,
        bisect_tol: tol,
    })
}
