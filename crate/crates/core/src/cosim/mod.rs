//! Lockstep logical-time orchestrator coupling grid, channels, controllers,
//! protection, and attackers, plus the built-in scenario catalog, parameter
//! sweeps, and result reports.
//!
//! Per logical step the runner: (1) polls the channels, (2) lets the
//! controller/protection/attacker state machines consume due frames,
//! (3) moves commands into the plant inputs, (4) steps the grid by `dt`, and
//! (5) publishes plant measurements on their cadence. Everything is seeded,
//! so identical scenarios produce bit-identical results.

mod catalog;
mod report;
mod runner;
mod scenario;
mod sweep;

pub use catalog::{catalog_variant, scenario_catalog, CatalogEntry, DLAA_REFERENCE_GAIN};
pub use report::{events_json, frequency_svg, trace_csv};
pub use runner::run;
pub use scenario::{
    AttackConfig, GridCodeScenarioConfig, OutputConfig, Scenario, ScenarioNet, Timing,
};
pub use sweep::{sweep, SweepPoint, SweepReport};

use serde::Serialize;

use crate::netem::ChannelStats;
use crate::protection::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    /// No grid-code violation and the steady-state deviation settled inside
    /// the nominal band.
    Stable,
    /// No violation, but a persistent off-nominal frequency error remains.
    OffNominalStable,
    /// Grid-code violation (or numeric divergence) at the given time.
    Destabilized { time_s: f64 },
}

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    AttackPhase {
        time_s: f64,
        phase: String,
    },
    UflsStage {
        time_s: f64,
        stage: usize,
        threshold_hz: f64,
        shed_pu: f64,
    },
    UflsNothingToShed {
        time_s: f64,
        stage: usize,
    },
    GridCodeViolation {
        time_s: f64,
        band_low_hz: f64,
        band_high_hz: f64,
    },
    StaleMeasurement {
        time_s: f64,
        area: usize,
        age_s: f64,
    },
    WindupClamp {
        time_s: f64,
        area: usize,
        accumulator_pu_s: f64,
    },
    FrameDropped {
        time_s: f64,
        link: String,
        kind: String,
    },
    MdlaaOnlineStart {
        time_s: f64,
    },
    MdlaaTargetReached {
        time_s: f64,
    },
    MdlaaLoopExhausted {
        time_s: f64,
        k_a: usize,
    },
    MdlaaRelaxedSolve {
        time_s: f64,
        eq_residual: f64,
    },
    Divergence {
        time_s: f64,
    },
}

impl Event {
    pub fn time_s(&self) -> f64 {
        match self {
            Event::AttackPhase { time_s, .. }
            | Event::UflsStage { time_s, .. }
            | Event::UflsNothingToShed { time_s, .. }
            | Event::GridCodeViolation { time_s, .. }
            | Event::StaleMeasurement { time_s, .. }
            | Event::WindupClamp { time_s, .. }
            | Event::FrameDropped { time_s, .. }
            | Event::MdlaaOnlineStart { time_s }
            | Event::MdlaaTargetReached { time_s }
            | Event::MdlaaLoopExhausted { time_s, .. }
            | Event::MdlaaRelaxedSolve { time_s, .. }
            | Event::Divergence { time_s } => *time_s,
        }
    }
}

/// One trace sample, taken each control period.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub time_s: f64,
    pub f_sys_hz: f64,
    pub f_gen_hz: Vec<f64>,
    pub load_total_pu: f64,
    pub attack_total_pu: f64,
    pub shed_total_pu: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkStats {
    pub plant_to_controller: ChannelStats,
    pub controller_to_plant: ChannelStats,
    pub plant_to_attacker: ChannelStats,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub scenario_name: String,
    pub outcome: Outcome,
    pub verdict: Verdict,
    pub samples: Vec<TraceSample>,
    pub events: Vec<Event>,
    pub links: LinkStats,
    /// Bus ids of the generators, in trace column order.
    pub gen_buses: Vec<usize>,
    /// Mean |Δf_sys| over the final 10% of the run (transient excluded).
    pub steady_state_dev_hz: f64,
    pub nominal_hz: f64,
    /// Offline record collected by a measurement-based attack, when one ran.
    pub offline_record: Option<crate::mdlaa::OfflineRecord>,
}

impl ScenarioResult {
    pub fn time_to_violation_s(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Destabilized { time_s } => Some(time_s),
            _ => None,
        }
    }
}
