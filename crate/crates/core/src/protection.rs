//! Four-stage under-frequency load shedding and the grid-code compliance
//! monitor that adjudicates attack success.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct UflsStage {
    pub threshold_hz: f64,
    /// Fraction of the initial total system load shed by this stage.
    pub shed_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UflsConfig {
    pub enabled: bool,
    pub stages: Vec<UflsStage>,
}

impl Default for UflsConfig {
    fn default() -> Self {
        UflsConfig {
            enabled: false,
            stages: default_stages(),
        }
    }
}

/// Stage ladder: 59.5/59.3/59.1/58.9 Hz, 7% of initial load each
/// (28% cumulative).
pub fn default_stages() -> Vec<UflsStage> {
    [59.5, 59.3, 59.1, 58.9]
        .iter()
        .map(|&threshold_hz| UflsStage {
            threshold_hz,
            shed_fraction: 0.07,
        })
        .collect()
}

impl UflsConfig {
    pub fn validate(&self) -> Result<()> {
        for w in self.stages.windows(2) {
            if w[1].threshold_hz >= w[0].threshold_hz {
                return Err(Error::Config(
                    "ufls: stage thresholds must be strictly decreasing".into(),
                ));
            }
        }
        for s in &self.stages {
            if !(s.shed_fraction > 0.0 && s.shed_fraction < 1.0) {
                return Err(Error::Config("ufls: shed fractions must be in (0,1)".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShedCommand {
    pub stage: usize,
    pub fraction_of_initial: f64,
    pub issued_at_s: f64,
}

/// Latched stage relay. Each stage trips at most once; several stages may
/// latch in a single evaluation when the frequency has fallen past several
/// thresholds.
#[derive(Debug, Clone)]
pub struct UflsRelay {
    cfg: UflsConfig,
    latched: Vec<bool>,
}

impl UflsRelay {
    pub fn new(cfg: UflsConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.stages.len();
        Ok(UflsRelay {
            cfg,
            latched: vec![false; n],
        })
    }

    pub fn evaluate(&mut self, freq_hz: f64, now_s: f64) -> Vec<ShedCommand> {
        if !freq_hz.is_finite() {
            return Vec::new();
        }
        let mut cmds = Vec::new();
        for (i, stage) in self.cfg.stages.iter().enumerate() {
            if !self.latched[i] && freq_hz <= stage.threshold_hz {
                self.latched[i] = true;
                cmds.push(ShedCommand {
                    stage: i + 1,
                    fraction_of_initial: stage.shed_fraction,
                    issued_at_s: now_s,
                });
            }
        }
        cmds
    }

    pub fn latched(&self) -> &[bool] {
        &self.latched
    }

    pub fn cumulative_fraction(&self) -> f64 {
        self.cfg
            .stages
            .iter()
            .zip(&self.latched)
            .filter(|(_, &l)| l)
            .map(|(s, _)| s.shed_fraction)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShedOutcome {
    Applied { amount_pu: f64 },
    /// Nothing left to shed; the command is ignored and logged.
    NothingToShed,
}

/// Remove `fraction_of_initial · initial_total` from the current loads,
/// allocated proportionally across all load buses. Shedding is permanent.
pub fn apply_shed(
    loads_pu: &mut DVector<f64>,
    cmd: &ShedCommand,
    initial_total_pu: f64,
) -> ShedOutcome {
    let current_total: f64 = loads_pu.sum();
    if current_total <= 0.0 {
        return ShedOutcome::NothingToShed;
    }
    let amount = (cmd.fraction_of_initial * initial_total_pu).min(current_total);
    let scale = 1.0 - amount / current_total;
    *loads_pu *= scale;
    ShedOutcome::Applied { amount_pu: amount }
}

/// One dwell-limited operating band.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GridCodeBand {
    pub low_hz: f64,
    pub high_hz: f64,
    /// `None` = continuous operation allowed.
    pub max_dwell_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridCodeConfig {
    /// Ordered outward from nominal; frequencies outside every band violate
    /// immediately.
    pub bands: Vec<GridCodeBand>,
}

impl Default for GridCodeConfig {
    fn default() -> Self {
        GridCodeConfig {
            bands: default_bands(1.0),
        }
    }
}

/// Band table (low, high, dwell): continuous 58.8–60.5; 30 min for
/// 57.5–58.7 and 60.6–61.5; 30 s for 57.0–57.4 and 61.6–62.5; outside
/// 57.0–62.5 violates immediately. `dwell_scale` shrinks the dwell limits
/// for desk-scale runs that exercise the long bands.
pub fn default_bands(dwell_scale: f64) -> Vec<GridCodeBand> {
    vec![
        GridCodeBand {
            low_hz: 58.8,
            high_hz: 60.5,
            max_dwell_s: None,
        },
        GridCodeBand {
            low_hz: 57.5,
            high_hz: 58.8,
            max_dwell_s: Some(1800.0 * dwell_scale),
        },
        GridCodeBand {
            low_hz: 60.5,
            high_hz: 61.5,
            max_dwell_s: Some(1800.0 * dwell_scale),
        },
        GridCodeBand {
            low_hz: 57.0,
            high_hz: 57.5,
            max_dwell_s: Some(30.0),
        },
        GridCodeBand {
            low_hz: 61.5,
            high_hz: 62.5,
            max_dwell_s: Some(30.0),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Compliant,
    Violated {
        time_s: f64,
        band_low_hz: f64,
        band_high_hz: f64,
    },
}

/// Dwell-timer state machine over the frequency trace. The verdict is a pure
/// function of the trace and the dt discretization; timers reset whenever the
/// frequency leaves a band.
#[derive(Debug, Clone)]
pub struct GridCodeMonitor {
    cfg: GridCodeConfig,
    current_band: Option<usize>,
    dwell_s: f64,
    verdict: Verdict,
    elapsed_s: f64,
}

impl GridCodeMonitor {
    pub fn new(cfg: GridCodeConfig) -> Self {
        GridCodeMonitor {
            cfg,
            current_band: None,
            dwell_s: 0.0,
            verdict: Verdict::Compliant,
            elapsed_s: 0.0,
        }
    }

    fn band_of(&self, f_hz: f64) -> Option<usize> {
        // Innermost (first-listed) band containing f wins; bands are ordered
        // outward from nominal.
        self.cfg
            .bands
            .iter()
            .position(|b| f_hz >= b.low_hz && f_hz <= b.high_hz)
    }

    /// Advance the monitor by one sample of duration `dt`.
    pub fn step(&mut self, freq_hz: f64, dt: f64) -> Verdict {
        debug_assert!(dt > 0.0);
        if matches!(self.verdict, Verdict::Violated { .. }) {
            return self.verdict;
        }
        self.elapsed_s += dt;
        let band = self.band_of(freq_hz);
        match band {
            None => {
                self.verdict = Verdict::Violated {
                    time_s: self.elapsed_s,
                    band_low_hz: f64::NEG_INFINITY,
                    band_high_hz: f64::INFINITY,
                };
            }
            Some(i) => {
                if self.current_band == Some(i) {
                    self.dwell_s += dt;
                } else {
                    self.current_band = Some(i);
                    self.dwell_s = dt;
                }
                let b = self.cfg.bands[i];
                if let Some(limit) = b.max_dwell_s {
                    if self.dwell_s > limit {
                        self.verdict = Verdict::Violated {
                            time_s: self.elapsed_s,
                            band_low_hz: b.low_hz,
                            band_high_hz: b.high_hz,
                        };
                    }
                }
            }
        }
        self.verdict
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }
}
