//! Grid case description and validation.
//!
//! A case is a static, JSON-serializable description of the network: buses
//! with their LFC-area assignment, branches with per-unit susceptance,
//! generators with inertia and control gains, and load buses with their
//! baseline demand and the fraction of it an attacker can manipulate.
//!
//! Unit conventions, used consistently across the crate:
//! - power in per-unit on `base_mva`;
//! - frequency deviation `ω` in Hz from `nominal_hz`;
//! - generator gains (`damping`, `droop_gain`, `primary_gain`,
//!   `integral_gain`) in pu per Hz of deviation;
//! - bus angles and branch susceptances in the per-unit system scaled so
//!   that `δ̇ = Δf` holds with identity coupling (the 2π factor is folded
//!   into the susceptances).
//!
//! `droop_gain` multiplies the frequency deviation (a pu/Hz gain), matching
//! the gain convention of the area block diagram. With the conventional
//! dividing droop `R` in Hz/pu, set `droop_gain = 1/R`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusDef {
    pub id: usize,
    pub area: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Line susceptance, pu. Parallel branches accumulate.
    pub susceptance_pu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    /// Inertia M, s·pu.
    pub inertia: f64,
    /// Damping D^G, pu/Hz.
    pub damping: f64,
    /// Primary droop gain R (multiplies Δf), pu/Hz.
    #[serde(default)]
    pub droop_gain: f64,
    /// Proportional control gain K^P, pu/Hz.
    #[serde(default)]
    pub primary_gain: f64,
    /// Integral control gain K^I (acts on the in-matrix angle integral).
    #[serde(default)]
    pub integral_gain: f64,
    /// LFC participation factor α within the generator's area.
    #[serde(default)]
    pub participation: f64,
    /// Optional first-order governor lag, s. Disabled when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub governor_lag_s: Option<f64>,
    /// Optional first-order turbine lag, s. Disabled when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turbine_lag_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Load {
    pub bus: usize,
    /// Baseline (secure) demand P^LS, pu.
    pub load_pu: f64,
    /// Attackable add-on capacity as a fraction of `load_pu`, in [0, 1].
    pub vulnerable_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCase {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub nominal_hz: f64,
    pub base_mva: f64,
    pub buses: Vec<BusDef>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
}

/// Index structures derived from a validated case.
///
/// Generator buses are the buses hosting a generator, in generator-list
/// order; every other bus is a load bus (possibly with zero demand), in
/// bus-list order.
#[derive(Debug, Clone)]
pub struct CaseIndex {
    pub gen_buses: Vec<usize>,
    pub load_buses: Vec<usize>,
    pub gen_of_bus: BTreeMap<usize, usize>,
    pub load_of_bus: BTreeMap<usize, usize>,
    pub area_of_bus: BTreeMap<usize, usize>,
    pub areas: Vec<usize>,
    /// Baseline demand per load bus, pu.
    pub nominal_load: DVector<f64>,
    /// Attackable capacity per load bus, pu (`vulnerable_fraction · load_pu`).
    pub vulnerable_cap: DVector<f64>,
}

impl CaseIndex {
    pub fn n_gen(&self) -> usize {
        self.gen_buses.len()
    }

    pub fn n_load(&self) -> usize {
        self.load_buses.len()
    }

    pub fn total_load(&self) -> f64 {
        self.nominal_load.sum()
    }

    /// Generators belonging to `area`, as indices into the generator list.
    pub fn area_generators(&self, case: &GridCase, area: usize) -> Vec<usize> {
        case.generators
            .iter()
            .enumerate()
            .filter(|(_, g)| self.area_of_bus[&g.bus] == area)
            .map(|(i, _)| i)
            .collect()
    }
}

impl GridCase {
    /// Parse a case from JSON, reporting parse errors with line/column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::CaseParse(format!("line {}, column {}: {}", e.line(), e.column(), e))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }

    /// Validate every case invariant and build the index in one pass.
    ///
    /// Violations are reported with the position of the offending entry.
    pub fn validate(&self) -> Result<CaseIndex> {
        let mut violations: Vec<String> = Vec::new();

        if !(self.nominal_hz.is_finite() && self.nominal_hz > 0.0) {
            violations.push("nominal_hz must be positive and finite".into());
        }
        if !(self.base_mva.is_finite() && self.base_mva > 0.0) {
            violations.push("base_mva must be positive and finite".into());
        }

        let mut area_of_bus = BTreeMap::new();
        for (i, b) in self.buses.iter().enumerate() {
            if area_of_bus.insert(b.id, b.area).is_some() {
                violations.push(format!("buses[{i}]: bus {} defined more than once", b.id));
            }
        }

        let mut gen_of_bus = BTreeMap::new();
        for (i, g) in self.generators.iter().enumerate() {
            if !area_of_bus.contains_key(&g.bus) {
                violations.push(format!("generators[{i}]: bus {} not defined", g.bus));
            }
            if gen_of_bus.insert(g.bus, i).is_some() {
                violations.push(format!(
                    "generators[{i}]: bus {} already hosts a generator",
                    g.bus
                ));
            }
            if !(g.inertia.is_finite() && g.inertia > 0.0) {
                violations.push(format!("generators[{i}]: inertia must be > 0"));
            }
            for (v, name) in [
                (g.damping, "damping"),
                (g.droop_gain, "droop_gain"),
                (g.primary_gain, "primary_gain"),
                (g.integral_gain, "integral_gain"),
                (g.participation, "participation"),
            ] {
                if !v.is_finite() || v < 0.0 {
                    violations.push(format!("generators[{i}]: {name} must be finite and >= 0"));
                }
            }
            for (lag, name) in [
                (g.governor_lag_s, "governor_lag_s"),
                (g.turbine_lag_s, "turbine_lag_s"),
            ] {
                if let Some(t) = lag {
                    if !(t.is_finite() && t > 0.0) {
                        violations.push(format!("generators[{i}]: {name} must be > 0"));
                    }
                }
            }
        }

        let gen_buses: Vec<usize> = self.generators.iter().map(|g| g.bus).collect();
        let load_buses: Vec<usize> = self
            .buses
            .iter()
            .map(|b| b.id)
            .filter(|id| !gen_of_bus.contains_key(id))
            .collect();
        let load_of_bus: BTreeMap<usize, usize> = load_buses
            .iter()
            .enumerate()
            .map(|(i, &b)| (b, i))
            .collect();

        let mut nominal_load = DVector::zeros(load_buses.len());
        let mut vulnerable_cap = DVector::zeros(load_buses.len());
        let mut seen_load_bus = BTreeSet::new();
        for (i, l) in self.loads.iter().enumerate() {
            if !area_of_bus.contains_key(&l.bus) {
                violations.push(format!("loads[{i}]: bus {} not defined", l.bus));
                continue;
            }
            if gen_of_bus.contains_key(&l.bus) {
                violations.push(format!(
                    "loads[{i}]: bus {} is a generator bus; the model carries load only on load buses",
                    l.bus
                ));
                continue;
            }
            if !seen_load_bus.insert(l.bus) {
                violations.push(format!("loads[{i}]: bus {} listed more than once", l.bus));
                continue;
            }
            if !l.load_pu.is_finite() || l.load_pu < 0.0 {
                violations.push(format!("loads[{i}]: load_pu must be finite and >= 0"));
                continue;
            }
            if !(0.0..=1.0).contains(&l.vulnerable_fraction) {
                violations.push(format!("loads[{i}]: vulnerable_fraction must be in [0, 1]"));
                continue;
            }
            let li = load_of_bus[&l.bus];
            nominal_load[li] = l.load_pu;
            vulnerable_cap[li] = l.load_pu * l.vulnerable_fraction;
        }

        for (i, br) in self.branches.iter().enumerate() {
            for end in [br.from, br.to] {
                if !area_of_bus.contains_key(&end) {
                    violations.push(format!("branches[{i}]: endpoint bus {end} not defined"));
                }
            }
            if br.from == br.to {
                violations.push(format!("branches[{i}]: self-loop on bus {}", br.from));
            }
            if !br.susceptance_pu.is_finite() {
                violations.push(format!("branches[{i}]: susceptance must be finite"));
            }
        }

        // Participation factors sum to 1 over each area's generators.
        let areas: Vec<usize> = {
            let mut a: Vec<usize> = area_of_bus.values().copied().collect();
            a.sort_unstable();
            a.dedup();
            a
        };
        for &area in &areas {
            let gens: Vec<&Generator> = self
                .generators
                .iter()
                .filter(|g| area_of_bus.get(&g.bus) == Some(&area))
                .collect();
            if gens.is_empty() {
                continue;
            }
            let alpha_sum: f64 = gens.iter().map(|g| g.participation).sum();
            if (alpha_sum - 1.0).abs() > 1e-6 {
                violations.push(format!(
                    "area {area}: participation factors sum to {alpha_sum} (expected 1)"
                ));
            }
        }

        if self.generators.is_empty() {
            violations.push("case must define at least one generator".into());
        }

        if !violations.is_empty() {
            return Err(Error::CaseValidation(violations.join("; ")));
        }

        Ok(CaseIndex {
            gen_buses,
            load_buses,
            gen_of_bus,
            load_of_bus,
            area_of_bus,
            areas,
            nominal_load,
            vulnerable_cap,
        })
    }
}

/// Names understood by [`builtin`]; also accepted by the CLI as
/// `builtin:<name>`.
pub const BUILTIN_CASES: &[&str] = &["two_bus", "three_bus", "ieee39"];

/// Fetch one of the builtin cases by name.
pub fn builtin(name: &str) -> Result<GridCase> {
    match name {
        "two_bus" => Ok(two_bus()),
        "three_bus" => Ok(three_bus()),
        "ieee39" => GridCase::from_json(IEEE39_JSON),
        other => Err(Error::Config(format!(
            "unknown builtin case {other:?}; known: {}",
            BUILTIN_CASES.join(", ")
        ))),
    }
}

pub const IEEE39_JSON: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/ieee39.json"));

/// One generator (M=10, D=1, K^P=1, K^I=0.5), one load bus, one 5 pu line.
pub fn two_bus() -> GridCase {
    GridCase {
        name: "two_bus".into(),
        description: "single generator and single load bus joined by one line".into(),
        nominal_hz: 60.0,
        base_mva: 100.0,
        buses: vec![BusDef { id: 1, area: 1 }, BusDef { id: 2, area: 1 }],
        branches: vec![Branch {
            from: 1,
            to: 2,
            susceptance_pu: 5.0,
        }],
        generators: vec![Generator {
            bus: 1,
            inertia: 10.0,
            damping: 1.0,
            droop_gain: 0.0,
            primary_gain: 1.0,
            integral_gain: 0.5,
            participation: 1.0,
            governor_lag_s: None,
            turbine_lag_s: None,
        }],
        loads: vec![Load {
            bus: 2,
            load_pu: 1.0,
            vulnerable_fraction: 1.0,
        }],
    }
}

/// Two generators and one shared load bus; two areas exercising tie flows.
pub fn three_bus() -> GridCase {
    GridCase {
        name: "three_bus".into(),
        description: "two generators in separate areas feeding one load bus".into(),
        nominal_hz: 60.0,
        base_mva: 100.0,
        buses: vec![
            BusDef { id: 1, area: 1 },
            BusDef { id: 2, area: 2 },
            BusDef { id: 3, area: 1 },
        ],
        branches: vec![
            Branch {
                from: 1,
                to: 3,
                susceptance_pu: 5.0,
            },
            Branch {
                from: 2,
                to: 3,
                susceptance_pu: 8.0,
            },
        ],
        generators: vec![
            Generator {
                bus: 1,
                inertia: 10.0,
                damping: 1.0,
                droop_gain: 0.5,
                primary_gain: 1.0,
                integral_gain: 0.5,
                participation: 1.0,
                governor_lag_s: None,
                turbine_lag_s: None,
            },
            Generator {
                bus: 2,
                inertia: 12.0,
                damping: 1.2,
                droop_gain: 0.4,
                primary_gain: 0.8,
                integral_gain: 0.4,
                participation: 1.0,
                governor_lag_s: None,
                turbine_lag_s: None,
            },
        ],
        loads: vec![Load {
            bus: 3,
            load_pu: 1.0,
            vulnerable_fraction: 1.0,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_cases_validate() {
        for name in BUILTIN_CASES {
            let case = builtin(name).unwrap();
            let idx = case.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(idx.n_gen() > 0);
        }
    }

    #[test]
    fn ieee39_dimensions() {
        let case = builtin("ieee39").unwrap();
        let idx = case.validate().unwrap();
        assert_eq!(idx.n_gen(), 10);
        assert_eq!(idx.n_load(), 29);
        assert_eq!(case.branches.len(), 46);
        assert_eq!(idx.areas.len(), 3);
    }

    #[test]
    fn dangling_branch_rejected() {
        let mut case = two_bus();
        case.branches.push(Branch {
            from: 1,
            to: 99,
            susceptance_pu: 1.0,
        });
        let err = case.validate().unwrap_err();
        assert!(err.to_string().contains("branches[1]"));
        assert!(err.to_string().contains("99"));
    }

    #[test]
    fn participation_sum_enforced() {
        let mut case = three_bus();
        case.generators[0].participation = 0.9;
        let err = case.validate().unwrap_err();
        assert!(err.to_string().contains("participation"));
    }

    #[test]
    fn vulnerable_fraction_range_enforced() {
        let mut case = two_bus();
        case.loads[0].vulnerable_fraction = 1.5;
        assert!(case.validate().is_err());
    }

    #[test]
    fn parse_error_reports_position() {
        let err = GridCase::from_json("{ not json").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn json_round_trip() {
        let case = three_bus();
        let text = case.to_json();
        let back = GridCase::from_json(&text).unwrap();
        assert_eq!(back.buses.len(), case.buses.len());
        assert_eq!(back.generators.len(), case.generators.len());
    }
}
