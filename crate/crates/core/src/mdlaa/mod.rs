//! Measurement-based dynamic load-altering attack: offline data collection
//! with persistent excitation, a block-Hankel behavioral predictor, and the
//! receding-horizon attack optimization.

mod agent;
mod hankel;
mod qp;

pub use agent::{MdlaaAgent, MdlaaEvent, MdlaaPhase};
pub use hankel::{check_persistent_excitation, hankel_matrix, PeCheck};
pub use qp::{AttackQp, HankelBlocks, PredictorSolution, KKT_TOL, LAMBDA_REL, MAX_ITERS};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offline excitation: a per-bus multi-sine shaped toward the swing-mode
/// band plus a small seeded dither component that guarantees excitation
/// richness at high orders.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExcitationSpec {
    /// Sine amplitude per bus, as a fraction of that bus's attack bound.
    pub scale: f64,
    pub sines_per_bus: usize,
    pub freq_lo_hz: f64,
    pub freq_hi_hz: f64,
    /// Uniform dither amplitude as a fraction of the sine amplitude.
    pub dither: f64,
    pub seed: u64,
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        ExcitationSpec {
            scale: 0.35,
            sines_per_bus: 3,
            freq_lo_hz: 0.05,
            freq_hi_hz: 1.2,
            dither: 0.2,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MdlaaConfig {
    /// Offline samples to collect (T^a).
    pub t_a: usize,
    /// Initialization window (T^ini).
    pub t_ini: usize,
    /// Prediction horizon (N^ap).
    pub n_ap: usize,
    /// Apply horizon (N^ac ≤ N^ap − 1).
    pub n_ac: usize,
    /// Target frequency deviation, Hz.
    pub omega_r_hz: f64,
    /// Attacker budget: per-bus bound as a fraction of that bus's nominal
    /// load (capped by the bus's vulnerable capacity).
    pub budget_fraction: f64,
    /// Output tracking weight (Q = q·I).
    pub q_weight: f64,
    /// Input effort weight (R = r·I).
    pub r_weight: f64,
    /// Replanning loop bound on the sample counter k^a.
    pub k_a_max: usize,
    pub sample_period_s: f64,
    pub excitation: ExcitationSpec,
    /// Attack (offline phase) start, s.
    pub start_s: f64,
    /// Samples between computing a plan and its first application.
    pub plan_latency_samples: usize,
    /// Keep replanning while the target holds even past k^a_max (the
    /// non-terminating reading of the loop condition).
    pub literal_loop_condition: bool,
    /// Reuse a persisted offline record instead of collecting one.
    pub replay_offline: bool,
    /// Where to persist/load the offline record (CSV).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offline_record_path: Option<String>,
}

impl Default for MdlaaConfig {
    fn default() -> Self {
        MdlaaConfig {
            t_a: 1100,
            t_ini: 5,
            n_ap: 10,
            n_ac: 5,
            omega_r_hz: -1.5,
            budget_fraction: 0.3,
            q_weight: 1.0,
            r_weight: 1e-3,
            k_a_max: 4000,
            sample_period_s: 0.1,
            excitation: ExcitationSpec::default(),
            start_s: 30.0,
            plan_latency_samples: 1,
            literal_loop_condition: false,
            replay_offline: false,
            offline_record_path: None,
        }
    }
}

impl MdlaaConfig {
    /// `n` is the state dimension of the reduced plant (2·|G|); `n_load` the
    /// number of attackable channels.
    pub fn validate(&self, n_load: usize, n_state: usize) -> Result<()> {
        let bound = (n_load + 1) * (self.t_ini + self.n_ap + n_state) - 1;
        if self.t_a < bound {
            return Err(Error::Config(format!(
                "mdlaa: T^a = {} violates T^a >= (|L|+1)(T^ini+N^ap+n)-1 = ({}+1)({}+{}+{})-1 = {}",
                self.t_a, n_load, self.t_ini, self.n_ap, n_state, bound
            )));
        }
        if self.n_ac < 1 || self.n_ac > self.n_ap.saturating_sub(1) {
            return Err(Error::Config(format!(
                "mdlaa: N^ac = {} must satisfy 1 <= N^ac <= N^ap - 1 = {}",
                self.n_ac,
                self.n_ap.saturating_sub(1)
            )));
        }
        if self.plan_latency_samples + self.n_ac > self.n_ap {
            return Err(Error::Config(
                "mdlaa: plan latency + N^ac must not exceed N^ap".into(),
            ));
        }
        if !(self.budget_fraction > 0.0) {
            return Err(Error::Config("mdlaa: budget fraction must be > 0".into()));
        }
        if self.q_weight < 0.0 || self.r_weight < 0.0 {
            return Err(Error::Config("mdlaa: Q and R must be non-negative".into()));
        }
        if !(self.sample_period_s > 0.0) {
            return Err(Error::Config("mdlaa: sample period must be > 0".into()));
        }
        if !(self.excitation.scale > 0.0) {
            return Err(Error::Config("mdlaa: excitation scale must be > 0".into()));
        }
        Ok(())
    }

    /// Persistent-excitation order required of the offline attack record.
    pub fn pe_order(&self, n_state: usize) -> usize {
        self.n_ap + self.t_ini + n_state
    }
}

/// Offline data record: applied attack inputs and sensed frequencies at the
/// sample instants (`channels × T^a`).
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineRecord {
    pub p: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

impl OfflineRecord {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("sample");
        for i in 0..self.p.nrows() {
            out.push_str(&format!(",p{i}"));
        }
        for i in 0..self.w.nrows() {
            out.push_str(&format!(",w{i}"));
        }
        out.push('\n');
        for k in 0..self.p.ncols() {
            out.push_str(&k.to_string());
            for i in 0..self.p.nrows() {
                out.push_str(&format!(",{}", self.p[(i, k)]));
            }
            for i in 0..self.w.nrows() {
                out.push_str(&format!(",{}", self.w[(i, k)]));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, n_load: usize, n_sensor: usize) -> Result<Self> {
        let mut rows: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 1 + n_load + n_sensor {
                return Err(Error::Config(format!(
                    "offline record line {}: expected {} fields, got {}",
                    lineno + 1,
                    1 + n_load + n_sensor,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::Config(format!("offline record line {}: bad number {s:?}", lineno + 1)))
            };
            let p: Vec<f64> = fields[1..1 + n_load]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_>>()?;
            let w: Vec<f64> = fields[1 + n_load..]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_>>()?;
            rows.push((p, w));
        }
        let t = rows.len();
        if t == 0 {
            return Err(Error::Config("offline record is empty".into()));
        }
        let p = DMatrix::from_fn(n_load, t, |i, k| rows[k].0[i]);
        let w = DMatrix::from_fn(n_sensor, t, |i, k| rows[k].1[i]);
        Ok(OfflineRecord { p, w })
    }
}
