//! Per-area secondary frequency control driven by networked measurements.
//!
//! Each area controller consumes `Measurement` frames delivered through the
//! channel, computes the area control error `ACE = ΔP_tie + β·Δf`, integrates
//! it, and dispatches setpoint levels `−K_s·∫ACE·α_ij` to its participating
//! generators. Output is held (with a logged event) when the freshest
//! measurement is older than the staleness budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ControllerConfig {
    pub enabled: bool,
    /// Secondary gain K_s (1/s on the ACE integral).
    pub gain_ks: f64,
    /// Frequency bias β, pu/Hz. `None` selects the classical default
    /// Σ(droop_gain + damping) over the area's generators.
    pub bias_beta: Option<f64>,
    /// Dispatch period, ms.
    pub period_ms: u64,
    /// Hold output when the freshest measurement is older than this.
    pub staleness_s: f64,
    /// Anti-windup clamp on the ACE integral accumulator, pu·s.
    pub windup_limit: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            enabled: false,
            gain_ks: 0.06,
            bias_beta: None,
            period_ms: 100,
            staleness_s: 5.0,
            windup_limit: 10.0,
        }
    }
}

/// Payload of the measurement protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub source_area: usize,
    pub freq_dev_hz: f64,
    pub tie_dev_pu: f64,
    pub timestamp_s: f64,
    pub seq: u64,
}

/// `ACE = ΔP_tie + β·Δf`.
pub fn compute_ace(meas: &Measurement, beta: f64) -> f64 {
    meas.tie_dev_pu + beta * meas.freq_dev_hz
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LfcEvent {
    StaleMeasurement { area: usize, age_s: f64 },
    WindupClamp { area: usize, accumulator: f64 },
}

#[derive(Debug, Clone)]
pub struct AreaController {
    pub area: usize,
    pub beta: f64,
    gain_ks: f64,
    staleness_s: f64,
    windup_limit: f64,
    /// (generator index, participation factor), α > 0 only.
    participation: Vec<(usize, f64)>,
    /// ACE integral accumulator, pu·s.
    pub accumulator: f64,
    latest: Option<Measurement>,
    last_deltas: Vec<(usize, f64)>,
}

impl AreaController {
    pub fn new(
        area: usize,
        beta: f64,
        cfg: &ControllerConfig,
        participation: Vec<(usize, f64)>,
    ) -> Self {
        let last_deltas = participation.iter().map(|&(g, _)| (g, 0.0)).collect();
        AreaController {
            area,
            beta,
            gain_ks: cfg.gain_ks,
            staleness_s: cfg.staleness_s,
            windup_limit: cfg.windup_limit,
            participation,
            accumulator: 0.0,
            latest: None,
            last_deltas,
        }
    }

    /// Accept a delivered measurement; out-of-order frames (by sequence) are
    /// dropped.
    pub fn on_measurement(&mut self, meas: Measurement) {
        match &self.latest {
            Some(prev) if meas.seq <= prev.seq => {}
            _ => self.latest = Some(meas),
        }
    }

    /// One dispatch: integrate ACE over `dt` and return the per-generator
    /// setpoint levels. A stale or missing measurement holds the last output.
    pub fn lfc_step(&mut self, now_s: f64, dt: f64, events: &mut Vec<LfcEvent>) -> &[(usize, f64)] {
        debug_assert!(dt > 0.0);
        let fresh = match &self.latest {
            Some(m) if now_s - m.timestamp_s <= self.staleness_s => Some(*m),
            Some(m) => {
                events.push(LfcEvent::StaleMeasurement {
                    area: self.area,
                    age_s: now_s - m.timestamp_s,
                });
                None
            }
            None => None,
        };
        let Some(meas) = fresh else {
            return &self.last_deltas;
        };
        debug_assert!(meas.timestamp_s <= now_s);

        let ace = compute_ace(&meas, self.beta);
        self.accumulator += ace * dt;
        if self.accumulator.abs() > self.windup_limit {
            self.accumulator = self.accumulator.clamp(-self.windup_limit, self.windup_limit);
            events.push(LfcEvent::WindupClamp {
                area: self.area,
                accumulator: self.accumulator,
            });
        }
        for (slot, &(g, alpha)) in self.last_deltas.iter_mut().zip(&self.participation) {
            *slot = (g, -self.gain_ks * self.accumulator * alpha);
        }
        &self.last_deltas
    }
}

/// Write setpoint levels into the plant's generator input register.
/// Dispatching to a generator with zero participation is a contract error.
pub fn apply_setpoints(
    register: &mut nalgebra::DVector<f64>,
    deltas: &[(usize, f64)],
    participation: &[f64],
) -> Result<()> {
    for &(g, v) in deltas {
        if !v.is_finite() {
            return Err(Error::Parameter(format!(
                "setpoint for generator {g} is not finite"
            )));
        }
        if g >= register.len() {
            return Err(Error::Parameter(format!("generator index {g} out of range")));
        }
        if participation[g] <= 0.0 && v != 0.0 {
            return Err(Error::Parameter(format!(
                "generator {g} does not participate in LFC (α = 0)"
            )));
        }
    }
    for &(g, v) in deltas {
        register[g] = v;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn meas(area: usize, df: f64, tie: f64, t: f64, seq: u64) -> Measurement {
        Measurement {
            source_area: area,
            freq_dev_hz: df,
            tie_dev_pu: tie,
            timestamp_s: t,
            seq,
        }
    }

    #[test]
    fn ace_values() {
        assert_eq!(compute_ace(&meas(1, 0.0, 0.0, 0.0, 0), 20.0), 0.0);
        assert_eq!(compute_ace(&meas(1, -0.1, 0.0, 0.0, 0), 20.0), -2.0);
        assert_eq!(compute_ace(&meas(1, -0.05, 0.5, 0.0, 0), 20.0), -0.5);
    }

    #[test]
    fn zero_ace_keeps_zero_output() {
        let cfg = ControllerConfig::default();
        let mut c = AreaController::new(1, 20.0, &cfg, vec![(0, 0.6), (1, 0.4)]);
        let mut ev = Vec::new();
        for k in 0..100 {
            c.on_measurement(meas(1, 0.0, 0.0, k as f64 * 0.1, k));
            let out = c.lfc_step(k as f64 * 0.1, 0.1, &mut ev);
            assert!(out.iter().all(|&(_, v)| v == 0.0));
        }
        assert!(ev.is_empty());
    }

    #[test]
    fn constant_ace_closed_form_integral() {
        // ACE = 1 for 10 s, K_s = 0.1, α = [0.6, 0.4] -> deltas [−0.6, −0.4]
        let cfg = ControllerConfig {
            gain_ks: 0.1,
            ..ControllerConfig::default()
        };
        let mut c = AreaController::new(1, 1.0, &cfg, vec![(0, 0.6), (1, 0.4)]);
        let mut ev = Vec::new();
        let dt = 0.1;
        let mut out = Vec::new();
        for k in 0..100 {
            let t = (k + 1) as f64 * dt;
            c.on_measurement(meas(1, 1.0, 0.0, t, k as u64));
            out = c.lfc_step(t, dt, &mut ev).to_vec();
        }
        assert!((out[0].1 - (-0.6)).abs() < 1e-9, "{out:?}");
        assert!((out[1].1 - (-0.4)).abs() < 1e-9);
        // Σα = 1 ⇒ total equals −K_s·accumulator exactly
        let total: f64 = out.iter().map(|&(_, v)| v).sum();
        assert!((total - (-0.1 * c.accumulator)).abs() < 1e-12);
    }

    #[test]
    fn stale_measurement_holds_output() {
        let cfg = ControllerConfig {
            gain_ks: 0.1,
            staleness_s: 5.0,
            ..ControllerConfig::default()
        };
        let mut c = AreaController::new(2, 10.0, &cfg, vec![(0, 1.0)]);
        let mut ev = Vec::new();
        c.on_measurement(meas(2, -0.2, 0.0, 1.0, 0));
        let v1 = c.lfc_step(1.0, 0.1, &mut ev)[0].1;
        assert!(v1 > 0.0);
        // no new measurement for > 5 s: output held, stale event emitted
        let v2 = c.lfc_step(7.0, 0.1, &mut ev)[0].1;
        assert_eq!(v1, v2);
        assert!(matches!(ev[0], LfcEvent::StaleMeasurement { area: 2, .. }));
    }

    #[test]
    fn windup_clamp_is_recorded() {
        let cfg = ControllerConfig {
            gain_ks: 0.1,
            windup_limit: 1.0,
            ..ControllerConfig::default()
        };
        let mut c = AreaController::new(1, 1.0, &cfg, vec![(0, 1.0)]);
        let mut ev = Vec::new();
        for k in 0..200 {
            let t = (k + 1) as f64 * 0.1;
            c.on_measurement(meas(1, 1.0, 0.0, t, k as u64));
            c.lfc_step(t, 0.1, &mut ev);
        }
        assert!(c.accumulator <= 1.0 + 1e-12);
        assert!(ev
            .iter()
            .any(|e| matches!(e, LfcEvent::WindupClamp { .. })));
    }

    #[test]
    fn out_of_order_measurements_dropped() {
        let cfg = ControllerConfig::default();
        let mut c = AreaController::new(1, 1.0, &cfg, vec![(0, 1.0)]);
        c.on_measurement(meas(1, -0.5, 0.0, 2.0, 5));
        c.on_measurement(meas(1, -9.9, 0.0, 1.0, 3)); // late, stale seq
        assert_eq!(c.latest.unwrap().freq_dev_hz, -0.5);
    }

    #[test]
    fn setpoint_register_rules() {
        let mut reg = DVector::zeros(2);
        let alpha = vec![1.0, 0.0];
        apply_setpoints(&mut reg, &[(0, 0.5)], &alpha).unwrap();
        assert_eq!(reg[0], 0.5);
        // zero deltas leave the register unchanged
        apply_setpoints(&mut reg, &[], &alpha).unwrap();
        assert_eq!(reg[0], 0.5);
        // dispatch to a non-participating generator is rejected
        let err = apply_setpoints(&mut reg, &[(1, 0.1)], &alpha).unwrap_err();
        assert!(err.to_string().contains("participate"));
    }
}
