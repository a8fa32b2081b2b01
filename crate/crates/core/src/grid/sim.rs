//! Time integration: classical 4th-order fixed-step scheme for the reduced
//! form, and an index-1 DAE scheme for the descriptor form (the equivalence
//! oracle; production stepping always uses the reduced form).

use nalgebra::{DMatrix, DVector};

use crate::case::GridCase;
use crate::error::{Error, Result};
use crate::grid::build::{DescriptorSystem, ReducedSystem};

/// Dynamic simulation state. Angles are deviations from the pre-disturbance
/// equilibrium; `omega` is the per-generator frequency deviation in Hz;
/// `load_pu` is the absolute effective demand per load bus.
#[derive(Debug, Clone)]
pub struct SimState {
    pub delta: DVector<f64>,
    pub theta: DVector<f64>,
    pub omega: DVector<f64>,
    pub load_pu: DVector<f64>,
    pub time_s: f64,
}

impl SimState {
    /// Zero-deviation state at the case's nominal loads.
    pub fn at_equilibrium(n_gen: usize, n_load: usize, nominal_load: &DVector<f64>) -> Self {
        SimState {
            delta: DVector::zeros(n_gen),
            theta: DVector::zeros(n_load),
            omega: DVector::zeros(n_gen),
            load_pu: nominal_load.clone(),
            time_s: 0.0,
        }
    }

    fn pack(&self) -> DVector<f64> {
        let ng = self.delta.len();
        let mut x = DVector::zeros(2 * ng);
        x.rows_mut(0, ng).copy_from(&self.delta);
        x.rows_mut(ng, ng).copy_from(&self.omega);
        x
    }
}

/// Plant inputs for one integration step.
pub enum GridInput<'a> {
    /// Absolute per-load-bus demand and per-generator setpoints, held
    /// constant over the step (zero-order hold).
    Zoh {
        loads_pu: &'a DVector<f64>,
        setpoints_pu: &'a DVector<f64>,
    },
    /// Demand closes on the instantaneous generator frequencies inside each
    /// integration stage: `loads(x) = base − gain·ω(x)`. This is the
    /// continuous-sensing form used to validate the attack-in-the-matrix
    /// assembly against the time-domain agent.
    OmegaFeedback {
        base_loads_pu: &'a DVector<f64>,
        setpoints_pu: &'a DVector<f64>,
        /// |L|×|G| feedback gain, pu per Hz.
        gain: &'a DMatrix<f64>,
    },
}

fn check_finite(x: &DVector<f64>, time_s: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && v.abs() < 1e9) {
        Ok(())
    } else {
        Err(Error::Divergence { time_s })
    }
}

/// Advance the reduced system by `dt` with a classical 4th-order step.
pub fn rk4_step(
    sys: &ReducedSystem,
    state: &SimState,
    nominal_load: &DVector<f64>,
    input: &GridInput,
    dt: f64,
) -> Result<SimState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("dt must be > 0, got {dt}")));
    }
    let ng = sys.n_gen;

    let load_dev = |x: &DVector<f64>| -> DVector<f64> {
        match input {
            GridInput::Zoh { loads_pu, .. } => *loads_pu - nominal_load,
            GridInput::OmegaFeedback {
                base_loads_pu,
                gain,
                ..
            } => {
                let omega = x.rows(ng, ng);
                *base_loads_pu - nominal_load - *gain * omega
            }
        }
    };
    let setpoints = match input {
        GridInput::Zoh { setpoints_pu, .. } => *setpoints_pu,
        GridInput::OmegaFeedback { setpoints_pu, .. } => *setpoints_pu,
    };
    if setpoints.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("non-finite setpoint input".into()));
    }

    let deriv = |x: &DVector<f64>| -> DVector<f64> {
        &sys.a * x + &sys.b_load * load_dev(x) + &sys.b_gen * setpoints
    };

    let x0 = state.pack();
    let k1 = deriv(&x0);
    let k2 = deriv(&(&x0 + &k1 * (dt / 2.0)));
    let k3 = deriv(&(&x0 + &k2 * (dt / 2.0)));
    let k4 = deriv(&(&x0 + &k3 * dt));
    let x1 = &x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

    let time_s = state.time_s + dt;
    check_finite(&x1, time_s)?;

    let delta = x1.rows(0, ng).into_owned();
    let omega = x1.rows(ng, ng).into_owned();
    let dp = load_dev(&x1);
    let theta = sys.theta_from(&delta, &dp);
    Ok(SimState {
        delta,
        theta,
        omega,
        load_pu: nominal_load + dp,
        time_s,
    })
}

/// Index-1 DAE integration of the descriptor form: the algebraic load-bus
/// angle rows are solved at every stage from the descriptor blocks (LU
/// factored once), independently of the cached reduced-form algebra.
pub struct DescriptorSim {
    a_theta_delta: DMatrix<f64>,
    core_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    a_omega_delta: DMatrix<f64>,
    a_omega_theta: DMatrix<f64>,
    a_omega_omega: DMatrix<f64>,
    m_inv: DVector<f64>,
    n_gen: usize,
    n_load: usize,
}

impl DescriptorSim {
    pub fn new(desc: &DescriptorSystem) -> Result<Self> {
        let ng = desc.n_gen;
        let nl = desc.n_load;
        let core = desc.a.view((ng, ng), (nl, nl)).into_owned();
        let core_lu = core.lu();
        if !core_lu.is_invertible() {
            return Err(Error::Reduction {
                buses: vec![],
                reason: "load-bus angle block is singular".into(),
            });
        }
        let m = -desc
            .e
            .view((ng + nl, ng + nl), (ng, ng))
            .diagonal()
            .into_owned();
        Ok(DescriptorSim {
            a_theta_delta: desc.a.view((ng, 0), (nl, ng)).into_owned(),
            core_lu,
            a_omega_delta: desc.a.view((ng + nl, 0), (ng, ng)).into_owned(),
            a_omega_theta: desc.a.view((ng + nl, ng), (ng, nl)).into_owned(),
            a_omega_omega: desc.a.view((ng + nl, ng + nl), (ng, ng)).into_owned(),
            m_inv: m.map(|v| 1.0 / v),
            n_gen: ng,
            n_load: nl,
        })
    }

    pub fn theta_of(&self, delta: &DVector<f64>, dp_load: &DVector<f64>) -> DVector<f64> {
        // algebraic row: a_θδ·δ + core·θ + ΔP = 0
        let rhs = -(&self.a_theta_delta * delta) - dp_load;
        self.core_lu.solve(&rhs).expect("factored")
    }

    pub fn step(
        &self,
        state: &SimState,
        nominal_load: &DVector<f64>,
        loads_pu: &DVector<f64>,
        setpoints_pu: &DVector<f64>,
        dt: f64,
    ) -> Result<SimState> {
        let ng = self.n_gen;
        let dp = loads_pu - nominal_load;

        let deriv = |x: &DVector<f64>| -> DVector<f64> {
            let delta = x.rows(0, ng).into_owned();
            let omega = x.rows(ng, ng).into_owned();
            let theta = self.theta_of(&delta, &dp);
            // -M·ω̇ = a_ωδ·δ + a_ωθ·θ + a_ωω·ω − u_set
            let rhs = &self.a_omega_delta * &delta
                + &self.a_omega_theta * &theta
                + &self.a_omega_omega * &omega
                - setpoints_pu;
            let mut dx = DVector::zeros(2 * ng);
            dx.rows_mut(0, ng).copy_from(&omega);
            dx.rows_mut(ng, ng)
                .copy_from(&rhs.component_mul(&self.m_inv).map(|v| -v));
            dx
        };

        let x0 = state.pack();
        let k1 = deriv(&x0);
        let k2 = deriv(&(&x0 + &k1 * (dt / 2.0)));
        let k3 = deriv(&(&x0 + &k2 * (dt / 2.0)));
        let k4 = deriv(&(&x0 + &k3 * dt));
        let x1 = &x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

        let time_s = state.time_s + dt;
        check_finite(&x1, time_s)?;
        let delta = x1.rows(0, ng).into_owned();
        let omega = x1.rows(ng, ng).into_owned();
        let theta = self.theta_of(&delta, &dp);
        Ok(SimState {
            delta,
            theta,
            omega,
            load_pu: loads_pu.clone(),
            time_s,
        })
    }

    pub fn n_load(&self) -> usize {
        self.n_load
    }
}

/// Reduced stepping with optional first-order governor/turbine lags on the
/// generator control channel. With no lags configured this reproduces
/// [`rk4_step`] exactly; the lag states start at the control equilibrium.
pub struct LaggedSim {
    sync: DMatrix<f64>,
    kp_eff: DVector<f64>,
    ki: DVector<f64>,
    damping: DVector<f64>,
    m_inv: DVector<f64>,
    b_load_omega: DMatrix<f64>,
    gov_t: Vec<Option<f64>>,
    turb_t: Vec<Option<f64>>,
    n_gen: usize,
}

impl LaggedSim {
    pub fn new(case: &GridCase, red: &ReducedSystem) -> Self {
        let ng = red.n_gen;
        let ki = DVector::from_iterator(ng, case.generators.iter().map(|g| g.integral_gain));
        // red.a lower-left = M⁻¹(S_net − K^I): recover the pure network part.
        let m = &red.inertia;
        let mut sync = red.a.view((ng, 0), (ng, ng)).into_owned();
        for i in 0..ng {
            for j in 0..ng {
                sync[(i, j)] *= m[i];
            }
            sync[(i, i)] += ki[i];
        }
        LaggedSim {
            sync,
            kp_eff: DVector::from_iterator(
                ng,
                case.generators.iter().map(|g| g.primary_gain + g.droop_gain),
            ),
            ki,
            damping: DVector::from_iterator(ng, case.generators.iter().map(|g| g.damping)),
            m_inv: m.map(|v| 1.0 / v),
            b_load_omega: red.b_load.view((ng, 0), (ng, red.n_load)).into_owned(),
            gov_t: case.generators.iter().map(|g| g.governor_lag_s).collect(),
            turb_t: case.generators.iter().map(|g| g.turbine_lag_s).collect(),
            n_gen: ng,
        }
    }

    pub fn has_lags(&self) -> bool {
        self.gov_t.iter().any(Option::is_some) || self.turb_t.iter().any(Option::is_some)
    }

    /// Lag-state dimension: one per configured filter.
    pub fn n_lag(&self) -> usize {
        self.gov_t.iter().flatten().count() + self.turb_t.iter().flatten().count()
    }

    pub fn initial_lag_states(&self) -> DVector<f64> {
        DVector::zeros(self.n_lag())
    }

    /// Advance `(state, lag_states)` by `dt` under zero-order-hold inputs.
    pub fn step(
        &self,
        state: &SimState,
        lag: &DVector<f64>,
        nominal_load: &DVector<f64>,
        loads_pu: &DVector<f64>,
        setpoints_pu: &DVector<f64>,
        dt: f64,
        theta_recon: &ReducedSystem,
    ) -> Result<(SimState, DVector<f64>)> {
        let ng = self.n_gen;
        let nz = self.n_lag();
        let dp = loads_pu - nominal_load;
        let load_term = &self.b_load_omega * &dp;

        let deriv = |x: &DVector<f64>| -> DVector<f64> {
            let delta = x.rows(0, ng);
            let omega = x.rows(ng, ng);
            let z = x.rows(2 * ng, nz);
            let mut dx = DVector::zeros(2 * ng + nz);
            dx.rows_mut(0, ng).copy_from(&omega);
            let mut zi = 0usize;
            for i in 0..ng {
                let cmd =
                    -self.kp_eff[i] * omega[i] - self.ki[i] * delta[i] + setpoints_pu[i];
                let gov_out = match self.gov_t[i] {
                    Some(t) => {
                        dx[2 * ng + zi] = (cmd - z[zi]) / t;
                        let out = z[zi];
                        zi += 1;
                        out
                    }
                    None => cmd,
                };
                let p_mech = match self.turb_t[i] {
                    Some(t) => {
                        dx[2 * ng + zi] = (gov_out - z[zi]) / t;
                        let out = z[zi];
                        zi += 1;
                        out
                    }
                    None => gov_out,
                };
                let sync_i: f64 = (0..ng).map(|j| self.sync[(i, j)] * delta[j]).sum();
                dx[ng + i] = self.m_inv[i] * (sync_i - self.damping[i] * omega[i] + p_mech)
                    + load_term[i];
            }
            dx
        };

        let mut x0 = DVector::zeros(2 * ng + nz);
        x0.rows_mut(0, ng).copy_from(&state.delta);
        x0.rows_mut(ng, ng).copy_from(&state.omega);
        x0.rows_mut(2 * ng, nz).copy_from(lag);

        let k1 = deriv(&x0);
        let k2 = deriv(&(&x0 + &k1 * (dt / 2.0)));
        let k3 = deriv(&(&x0 + &k2 * (dt / 2.0)));
        let k4 = deriv(&(&x0 + &k3 * dt));
        let x1 = &x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

        let time_s = state.time_s + dt;
        check_finite(&x1, time_s)?;
        let delta = x1.rows(0, ng).into_owned();
        let omega = x1.rows(ng, ng).into_owned();
        let theta = theta_recon.theta_from(&delta, &dp);
        Ok((
            SimState {
                delta,
                theta,
                omega,
                load_pu: loads_pu.clone(),
                time_s,
            },
            x1.rows(2 * ng, nz).into_owned(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{builtin, two_bus};
    use crate::grid::build::{build_admittance, build_descriptor, reduce};

    fn setup(case: &GridCase) -> (crate::case::CaseIndex, DescriptorSystem, ReducedSystem) {
        let idx = case.validate().unwrap();
        let adm = build_admittance(case, &idx).unwrap();
        let desc = build_descriptor(case, &idx, &adm).unwrap();
        let red = reduce(&desc, &idx.load_buses).unwrap();
        (idx, desc, red)
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let case = two_bus();
        let (idx, _, red) = setup(&case);
        let state = SimState::at_equilibrium(1, 1, &idx.nominal_load);
        let set = DVector::zeros(1);
        let next = rk4_step(
            &red,
            &state,
            &idx.nominal_load,
            &GridInput::Zoh {
                loads_pu: &idx.nominal_load,
                setpoints_pu: &set,
            },
            0.01,
        )
        .unwrap();
        assert!(next.delta.abs().max() <= 1e-12);
        assert!(next.omega.abs().max() <= 1e-12);
        assert!(next.theta.abs().max() <= 1e-12);
    }

    #[test]
    fn droop_only_steady_state_offset() {
        // With K^I = 0, a step ΔP settles at ω = -ΔP / (R + D^G + K^P).
        let mut case = two_bus();
        case.generators[0].integral_gain = 0.0;
        let (idx, _, red) = setup(&case);
        let dp = 0.2;
        let loads = DVector::from_vec(vec![idx.nominal_load[0] + dp]);
        let set = DVector::zeros(1);
        let mut state = SimState::at_equilibrium(1, 1, &idx.nominal_load);
        for _ in 0..8000 {
            state = rk4_step(
                &red,
                &state,
                &idx.nominal_load,
                &GridInput::Zoh {
                    loads_pu: &loads,
                    setpoints_pu: &set,
                },
                0.01,
            )
            .unwrap();
        }
        let g = &case.generators[0];
        let expected = -dp / (g.droop_gain + g.damping + g.primary_gain);
        assert!(
            (state.omega[0] - expected).abs() <= 1e-6,
            "got {}, want {}",
            state.omega[0],
            expected
        );
    }

    #[test]
    fn fourth_order_self_convergence() {
        let case = builtin("three_bus").unwrap();
        let (idx, _, red) = setup(&case);
        let loads = DVector::from_vec(vec![idx.nominal_load[0] + 0.3]);
        let set = DVector::zeros(2);
        let run = |dt: f64| -> DVector<f64> {
            let mut state = SimState::at_equilibrium(2, 1, &idx.nominal_load);
            let steps = (10.0 / dt).round() as usize;
            for _ in 0..steps {
                state = rk4_step(
                    &red,
                    &state,
                    &idx.nominal_load,
                    &GridInput::Zoh {
                        loads_pu: &loads,
                        setpoints_pu: &set,
                    },
                    dt,
                )
                .unwrap();
            }
            state.pack()
        };
        let coarse = run(0.1);
        let mid = run(0.05);
        let fine = run(0.025);
        let e1 = (&coarse - &mid).abs().max();
        let e2 = (&mid - &fine).abs().max();
        let ratio = e1 / e2;
        assert!(
            (8.0..=32.0).contains(&ratio),
            "convergence ratio {ratio} outside [8, 32]"
        );
    }

    #[test]
    fn descriptor_and_reduced_agree() {
        let case = builtin("three_bus").unwrap();
        let (idx, desc, red) = setup(&case);
        let oracle = DescriptorSim::new(&desc).unwrap();
        let loads = DVector::from_vec(vec![idx.nominal_load[0] + 0.25]);
        let set = DVector::zeros(2);
        let mut a = SimState::at_equilibrium(2, 1, &idx.nominal_load);
        let mut b = a.clone();
        for _ in 0..1000 {
            a = rk4_step(
                &red,
                &a,
                &idx.nominal_load,
                &GridInput::Zoh {
                    loads_pu: &loads,
                    setpoints_pu: &set,
                },
                0.01,
            )
            .unwrap();
            b = oracle
                .step(&b, &idx.nominal_load, &loads, &set, 0.01)
                .unwrap();
        }
        assert!((&a.omega - &b.omega).abs().max() <= 1e-6);
        assert!((&a.delta - &b.delta).abs().max() <= 1e-6);
    }

    #[test]
    fn non_finite_state_reports_divergence() {
        let case = two_bus();
        let (idx, _, red) = setup(&case);
        let mut state = SimState::at_equilibrium(1, 1, &idx.nominal_load);
        state.omega[0] = f64::NAN;
        let set = DVector::zeros(1);
        let err = rk4_step(
            &red,
            &state,
            &idx.nominal_load,
            &GridInput::Zoh {
                loads_pu: &idx.nominal_load,
                setpoints_pu: &set,
            },
            0.01,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn lags_preserve_steady_state_and_slow_transient() {
        let mut case = two_bus();
        case.generators[0].integral_gain = 0.0;
        let plain = {
            let (idx, _, red) = setup(&case);
            (idx, red)
        };
        case.generators[0].governor_lag_s = Some(0.2);
        case.generators[0].turbine_lag_s = Some(0.5);
        let (idx, _, red) = setup(&case);
        let lagged = LaggedSim::new(&case, &red);
        assert!(lagged.has_lags());
        assert_eq!(lagged.n_lag(), 2);

        let dp = 0.2;
        let loads = DVector::from_vec(vec![idx.nominal_load[0] + dp]);
        let set = DVector::zeros(1);

        let mut s_lag = SimState::at_equilibrium(1, 1, &idx.nominal_load);
        let mut z = lagged.initial_lag_states();
        let mut s_plain = SimState::at_equilibrium(1, 1, &plain.0.nominal_load);
        let mut lag_deeper = false;
        for k in 0..12000 {
            let (ns, nz) = lagged
                .step(&s_lag, &z, &idx.nominal_load, &loads, &set, 0.01, &red)
                .unwrap();
            s_lag = ns;
            z = nz;
            s_plain = rk4_step(
                &plain.1,
                &s_plain,
                &plain.0.nominal_load,
                &GridInput::Zoh {
                    loads_pu: &loads,
                    setpoints_pu: &set,
                },
                0.01,
            )
            .unwrap();
            if k == 100 && s_lag.omega[0] < s_plain.omega[0] {
                // lagged primary response lets frequency dip deeper early on
                lag_deeper = true;
            }
        }
        assert!(lag_deeper);
        let g = &case.generators[0];
        let expected = -dp / (g.droop_gain + g.damping + g.primary_gain);
        assert!((s_lag.omega[0] - expected).abs() <= 1e-5);
        assert!((s_plain.omega[0] - expected).abs() <= 1e-5);
    }
}
