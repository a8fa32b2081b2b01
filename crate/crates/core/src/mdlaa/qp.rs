//! The receding-horizon attack optimization.
//!
//! Decision variables are the future attack inputs `p_f`; the predictor
//! vector `g` is eliminated as the min-norm least-squares solution of the
//! stacked past/future-input rows (rank-truncated pseudo-inverse, cutoff
//! `σ_max·1e-10`), which makes the predicted outputs affine in `p_f`. The
//! remaining box-constrained quadratic program is solved by projected
//! gradient with Nesterov acceleration, stopping at a scaled KKT residual of
//! 1e-6 or 10k iterations. A `λ‖g‖²` term with `λ = 1e-6·σ_max²` regularizes
//! the predictor against simulation noise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdlaa::hankel::hankel_matrix;

pub const LAMBDA_REL: f64 = 1e-6;
pub const KKT_TOL: f64 = 1e-6;
pub const MAX_ITERS: usize = 10_000;

/// The four data blocks: past/future splits of the input and output Hankel
/// matrices, all over the same column windows.
#[derive(Debug, Clone)]
pub struct HankelBlocks {
    pub p_past: DMatrix<f64>,
    pub p_future: DMatrix<f64>,
    pub w_past: DMatrix<f64>,
    pub w_future: DMatrix<f64>,
    pub n_load: usize,
    pub n_sensor: usize,
    pub t_ini: usize,
    pub n_ap: usize,
}

impl HankelBlocks {
    /// Split the depth-`(t_ini + n_ap)` Hankel matrices of the recorded
    /// attack inputs (`n_load × T`) and sensed frequencies (`n_sensor × T`)
    /// into past (first `t_ini` block rows) and future (last `n_ap` block
    /// rows) parts.
    pub fn build(
        p_record: &DMatrix<f64>,
        w_record: &DMatrix<f64>,
        t_ini: usize,
        n_ap: usize,
    ) -> Result<Self> {
        if p_record.ncols() != w_record.ncols() {
            return Err(Error::Parameter(
                "input and output records must have the same length".into(),
            ));
        }
        let depth = t_ini + n_ap;
        let hp = hankel_matrix(p_record, depth)?;
        let hw = hankel_matrix(w_record, depth)?;
        let nl = p_record.nrows();
        let ns = w_record.nrows();
        Ok(HankelBlocks {
            p_past: hp.rows(0, t_ini * nl).into_owned(),
            p_future: hp.rows(t_ini * nl, n_ap * nl).into_owned(),
            w_past: hw.rows(0, t_ini * ns).into_owned(),
            w_future: hw.rows(t_ini * ns, n_ap * ns).into_owned(),
            n_load: nl,
            n_sensor: ns,
            t_ini,
            n_ap,
        })
    }

    pub fn n_cols(&self) -> usize {
        self.p_past.ncols()
    }
}

/// Solution of one horizon problem.
#[derive(Debug, Clone)]
pub struct PredictorSolution {
    /// Predictor vector, length `T_a − T_ini − N_ap + 1`.
    pub g: DVector<f64>,
    /// Planned attack over the horizon, `n_ap` blocks of `n_load`.
    pub p_future: DVector<f64>,
    /// Predicted sensed frequencies, `n_ap` blocks of `n_sensor`.
    pub w_future: DVector<f64>,
    pub objective: f64,
    /// Scaled projected-gradient stationarity residual at the solution.
    pub kkt_residual: f64,
    /// Scaled data-consistency residual of the stacked equality rows.
    pub eq_residual: f64,
    /// True when the ini rows were only satisfiable in the least-squares
    /// sense (inconsistent window); logged by the caller.
    pub relaxed: bool,
    pub iterations: usize,
}

/// Assembled quadratic program, reusable across receding-horizon iterations
/// (the data blocks are fixed; only the ini windows move).
pub struct AttackQp {
    /// Min-norm solution operator for `[p_ini; w_ini]` (ini columns).
    g_of_ini: DMatrix<f64>,
    /// Min-norm solution operator for `p_f` (future-input columns).
    g_of_pf: DMatrix<f64>,
    w_future: DMatrix<f64>,
    /// `Ω_f · g_of_pf`: predicted outputs per unit future input.
    c_map: DMatrix<f64>,
    /// Stacked equality matrix `[P_p; Ω_p; P_f]` kept for residual reporting.
    m_stack: DMatrix<f64>,
    hessian: DMatrix<f64>,
    lipschitz: f64,
    q_weight: f64,
    r_weight: f64,
    lambda: f64,
    pub n_rows_ini: usize,
    pub n_pf: usize,
}

impl AttackQp {
    pub fn new(blocks: &HankelBlocks, q_weight: f64, r_weight: f64) -> Result<Self> {
        if q_weight < 0.0 || r_weight < 0.0 {
            return Err(Error::Config(
                "mdlaa: Q and R weights must be non-negative".into(),
            ));
        }
        let n_ini_p = blocks.t_ini * blocks.n_load;
        let n_ini_w = blocks.t_ini * blocks.n_sensor;
        let n_pf = blocks.n_ap * blocks.n_load;
        let n_rows_ini = n_ini_p + n_ini_w;
        let n_cols = blocks.n_cols();

        let mut m_stack = DMatrix::zeros(n_rows_ini + n_pf, n_cols);
        m_stack.rows_mut(0, n_ini_p).copy_from(&blocks.p_past);
        m_stack
            .rows_mut(n_ini_p, n_ini_w)
            .copy_from(&blocks.w_past);
        m_stack
            .rows_mut(n_rows_ini, n_pf)
            .copy_from(&blocks.p_future);

        // Rank-truncated pseudo-inverse of the stacked rows. The stack is
        // structurally rank-deficient for exact trajectory data (the output
        // rows add only n independent rows), so a plain normal solve is not
        // an option.
        let svd = m_stack.clone().svd(true, true);
        let u = svd.u.as_ref().expect("u computed");
        let v_t = svd.v_t.as_ref().expect("v_t computed");
        let sigma_max = svd.singular_values.max();
        if !(sigma_max > 0.0) {
            return Err(Error::Parameter("mdlaa: zero data matrix".into()));
        }
        let tol = sigma_max * 1e-10;
        let mut s_inv = svd.singular_values.clone();
        for v in s_inv.iter_mut() {
            *v = if *v > tol { 1.0 / *v } else { 0.0 };
        }
        // pinv = Vᵀᵀ · Σ⁺ · Uᵀ, columns split below by rhs block
        let mut ut = u.transpose();
        for (i, s) in s_inv.iter().enumerate() {
            ut.row_mut(i).scale_mut(*s);
        }
        let pinv = v_t.transpose() * ut;
        let g_of_ini = pinv.columns(0, n_rows_ini).into_owned();
        let g_of_pf = pinv.columns(n_rows_ini, n_pf).into_owned();

        let c_map = &blocks.w_future * &g_of_pf;
        let lambda = LAMBDA_REL * sigma_max * sigma_max;

        // Hessian/2 = q·CᵀC + r·I + λ·GᵀG
        let mut hessian = c_map.transpose() * &c_map * q_weight;
        hessian += g_of_pf.transpose() * &g_of_pf * lambda;
        for i in 0..n_pf {
            hessian[(i, i)] += r_weight;
        }
        hessian *= 2.0;

        let lipschitz = hessian
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0f64, |a, &b| a.max(b));

        Ok(AttackQp {
            g_of_ini,
            g_of_pf,
            w_future: blocks.w_future.clone(),
            c_map,
            m_stack,
            hessian,
            lipschitz: lipschitz.max(1e-12),
            q_weight,
            r_weight,
            lambda,
            n_rows_ini,
            n_pf,
        })
    }

    /// Solve one horizon problem.
    ///
    /// `p_ini`/`w_ini` are the latest true windows (stacked time-major,
    /// channel-major within each step); `w_ref` is the stacked target for
    /// the predicted outputs; `p_bound` gives the per-entry box `|p| ≤ p_bound`.
    pub fn solve(
        &self,
        p_ini: &DVector<f64>,
        w_ini: &DVector<f64>,
        w_ref: &DVector<f64>,
        p_bound: &DVector<f64>,
        warm_start: Option<&DVector<f64>>,
    ) -> Result<PredictorSolution> {
        let n = self.n_pf;
        if p_bound.len() != n {
            return Err(Error::Parameter(format!(
                "p bound length {} != horizon inputs {n}",
                p_bound.len()
            )));
        }
        if p_bound.iter().any(|b| *b < 0.0) {
            return Err(Error::Parameter("mdlaa: p^max must be >= 0".into()));
        }
        let mut b_ini = DVector::zeros(self.n_rows_ini);
        b_ini.rows_mut(0, p_ini.len()).copy_from(p_ini);
        b_ini.rows_mut(p_ini.len(), w_ini.len()).copy_from(w_ini);

        let g0 = &self.g_of_ini * &b_ini;
        let c0 = &self.w_future * &g0;

        // gradient: H·p + lin
        let lin = self.c_map.transpose() * (&c0 - w_ref) * (2.0 * self.q_weight)
            + self.g_of_pf.transpose() * &g0 * (2.0 * self.lambda);
        let scale = lin.abs().max().max(1.0);

        let project = |p: &mut DVector<f64>| {
            for i in 0..n {
                p[i] = p[i].clamp(-p_bound[i], p_bound[i]);
            }
        };
        let grad = |p: &DVector<f64>| -> DVector<f64> { &self.hessian * p + &lin };

        let mut p = warm_start
            .map(|w| w.clone())
            .unwrap_or_else(|| DVector::zeros(n));
        project(&mut p);
        let mut y = p.clone();
        let mut t_acc = 1.0f64;
        let step = 1.0 / self.lipschitz;

        let mut kkt = f64::INFINITY;
        let mut iterations = 0;
        for it in 0..MAX_ITERS {
            iterations = it + 1;
            let g_y = grad(&y);
            let mut p_next = &y - &g_y * step;
            project(&mut p_next);

            // scaled stationarity residual at the new iterate
            let g_p = grad(&p_next);
            let mut probe = &p_next - &g_p * step;
            project(&mut probe);
            kkt = (&p_next - &probe).abs().max() * self.lipschitz / scale;

            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_acc * t_acc).sqrt());
            let momentum = (t_acc - 1.0) / t_next;
            y = &p_next + (&p_next - &p) * momentum;
            // keep the extrapolation from leaving the box too far behind
            let regressed = (&p_next - &p).dot(&g_y) > 0.0;
            p = p_next;
            t_acc = if regressed { 1.0 } else { t_next };
            if regressed {
                y = p.clone();
            }

            if kkt <= KKT_TOL {
                break;
            }
        }

        let g = &g0 + &self.g_of_pf * &p;
        let w_future = &c0 + &self.c_map * &p;

        // Eq-residual over the stacked rows; the predicted-output rows are
        // exact by construction.
        let mut rhs = DVector::zeros(self.n_rows_ini + n);
        rhs.rows_mut(0, self.n_rows_ini).copy_from(&b_ini);
        rhs.rows_mut(self.n_rows_ini, n).copy_from(&p);
        let resid = &self.m_stack * &g - &rhs;
        let eq_residual = resid.abs().max() / rhs.abs().max().max(1.0);

        let diff = &w_future - w_ref;
        let objective = self.q_weight * diff.norm_squared()
            + self.r_weight * p.norm_squared()
            + self.lambda * g.norm_squared();

        Ok(PredictorSolution {
            g,
            p_future: p,
            w_future,
            objective,
            kkt_residual: kkt,
            eq_residual,
            relaxed: eq_residual > 1e-6,
            iterations,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// Exact discrete simulation of a small LTI system for consistent data.
    pub(crate) struct TinyLti {
        pub a: DMatrix<f64>,
        pub b: DMatrix<f64>,
        pub c: DMatrix<f64>,
    }

    impl TinyLti {
        pub fn spring() -> Self {
            // lightly damped two-state system, one input, one output
            TinyLti {
                a: DMatrix::from_row_slice(2, 2, &[0.95, 0.10, -0.10, 0.93]),
                b: DMatrix::from_row_slice(2, 1, &[0.0, 0.1]),
                c: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            }
        }

        pub fn run(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
            let t = u.ncols();
            let mut x = DVector::zeros(self.a.nrows());
            let mut y = DMatrix::zeros(self.c.nrows(), t);
            for k in 0..t {
                y.set_column(k, &(&self.c * &x));
                x = &self.a * &x + &self.b * u.column(k);
            }
            y
        }
    }

    pub(crate) fn random_pe_input(nl: usize, t: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        DMatrix::from_fn(nl, t, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn zero_attack_is_optimal_when_target_is_the_free_trajectory() {
        let sys = TinyLti::spring();
        let t_a = 60;
        let u = random_pe_input(1, t_a, 3);
        let y = sys.run(&u);
        let blocks = HankelBlocks::build(&u, &y, 2, 3).unwrap();
        let qp = AttackQp::new(&blocks, 1.0, 1e6).unwrap();

        // ini from a fresh zero run; target = the trajectory with no input
        let p_ini = DVector::zeros(2);
        let w_ini = DVector::zeros(2);
        let w_ref = DVector::zeros(3);
        let bound = DVector::from_element(3, 10.0);
        let sol = qp.solve(&p_ini, &w_ini, &w_ref, &bound, None).unwrap();
        assert!(sol.p_future.abs().max() < 1e-6, "{:?}", sol.p_future);
        assert!(sol.objective < 1e-9);
    }

    #[test]
    fn degenerate_box_pins_attack_to_zero() {
        let sys = TinyLti::spring();
        let u = random_pe_input(1, 60, 4);
        let y = sys.run(&u);
        let blocks = HankelBlocks::build(&u, &y, 2, 3).unwrap();
        let qp = AttackQp::new(&blocks, 1.0, 1e-3).unwrap();
        let p_ini = DVector::from_column_slice(&[u[(0, 56)], u[(0, 57)]]);
        let w_ini = DVector::from_column_slice(&[y[(0, 56)], y[(0, 57)]]);
        let w_ref = DVector::from_element(3, -5.0);
        let bound = DVector::zeros(3);
        let sol = qp.solve(&p_ini, &w_ini, &w_ref, &bound, None).unwrap();
        assert_eq!(sol.p_future.abs().max(), 0.0);
    }

    #[test]
    fn consistent_windows_meet_equality_tolerance() {
        let sys = TinyLti::spring();
        let t_a = 80;
        let u = random_pe_input(1, t_a, 5);
        let y = sys.run(&u);
        let t_ini = 3;
        let n_ap = 4;
        let blocks = HankelBlocks::build(&u, &y, t_ini, n_ap).unwrap();
        let qp = AttackQp::new(&blocks, 1.0, 1e-3).unwrap();
        // true windows straight out of the record
        let k = 50;
        let p_ini = DVector::from_fn(t_ini, |i, _| u[(0, k - t_ini + i)]);
        let w_ini = DVector::from_fn(t_ini, |i, _| y[(0, k - t_ini + i)]);
        let w_ref = DVector::from_element(n_ap, -0.5);
        let bound = DVector::from_element(n_ap, 2.0);
        let sol = qp.solve(&p_ini, &w_ini, &w_ref, &bound, None).unwrap();
        assert!(sol.eq_residual <= 1e-6, "residual {}", sol.eq_residual);
        assert!(!sol.relaxed);
        // box feasibility is exact
        assert!(sol.p_future.iter().all(|p| p.abs() <= 2.0));
        assert!(sol.kkt_residual <= KKT_TOL);
    }

    #[test]
    fn predictions_match_the_true_plant() {
        // the data-driven predictor must reproduce the actual response to a
        // planned input sequence
        let sys = TinyLti::spring();
        let u = random_pe_input(1, 100, 6);
        let y = sys.run(&u);
        let t_ini = 4;
        let n_ap = 5;
        let blocks = HankelBlocks::build(&u, &y, t_ini, n_ap).unwrap();
        let qp = AttackQp::new(&blocks, 1.0, 1e-2).unwrap();

        let k = 70;
        let p_ini = DVector::from_fn(t_ini, |i, _| u[(0, k - t_ini + i)]);
        let w_ini = DVector::from_fn(t_ini, |i, _| y[(0, k - t_ini + i)]);
        let w_ref = DVector::from_element(n_ap, -0.8);
        let bound = DVector::from_element(n_ap, 1.5);
        let sol = qp.solve(&p_ini, &w_ini, &w_ref, &bound, None).unwrap();

        // replay the plan on the true system from the true state at k
        let mut x = DVector::zeros(2);
        for j in 0..k {
            x = &sys.a * &x + &sys.b * u.column(j);
        }
        let mut predicted_err: f64 = 0.0;
        for j in 0..n_ap {
            let y_true = (&sys.c * &x)[0];
            predicted_err = predicted_err.max((y_true - sol.w_future[j]).abs());
            x = &sys.a * &x + &sys.b * DVector::from_element(1, sol.p_future[j]);
        }
        assert!(predicted_err < 1e-6, "prediction error {predicted_err}");
    }
}
