//! Spectral analysis of the closed attack loop and the power-flow
//! consistency diagnostic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::build::{AdmittancePartition, ReducedSystem};

/// Eigenvalues with |Re| below this are treated as marginal (the uniform
/// angle-shift mode sits exactly at zero).
pub const MARGINAL_RE_EPS: f64 = 1e-6;

/// Largest real part over the eigenvalues of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Closed-loop system matrix with the dynamic load-altering feedback folded
/// in: `A* = A' + B'·[0, −K]`, where `K[i][j] = gains[i]·weights[j]` maps the
/// sensed generator frequencies to per-load-bus injections.
///
/// `gains` are pu/Hz and must be non-negative; `weights` select the sensed
/// source (one-hot for a single generator, inertia weights for the system
/// average).
pub fn dlaa_system_matrix(
    red: &ReducedSystem,
    gains: &DVector<f64>,
    weights: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if gains.len() != red.n_load {
        return Err(Error::Parameter(format!(
            "gain vector length {} != |L| = {}",
            gains.len(),
            red.n_load
        )));
    }
    if weights.len() != red.n_gen {
        return Err(Error::Parameter(format!(
            "sensing weight length {} != |G| = {}",
            weights.len(),
            red.n_gen
        )));
    }
    if let Some(bad) = gains.iter().find(|g| **g < 0.0 || !g.is_finite()) {
        return Err(Error::Parameter(format!(
            "feedback gains must be finite and >= 0, got {bad}"
        )));
    }
    let ng = red.n_gen;
    let k_mat = gains * weights.transpose();
    let mut a_star = red.a.clone();
    let bk = &red.b_load * k_mat;
    let mut right = a_star.view_mut((0, ng), (2 * ng, ng));
    right -= bk;
    Ok(a_star)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CriticalGain {
    /// Smallest gain (within the bisection tolerance) whose closed loop has
    /// an eigenvalue with real part above the marginal band.
    Critical { gain: f64, abscissa: f64 },
    /// No gain in `[0, max_gain]` destabilizes the system.
    StableThroughout { max_gain: f64, abscissa: f64 },
}

/// Bisect the spectral abscissa of the closed attack loop over a scalar gain
/// applied through `target_mask` (per-load-bus direction, typically 1.0 on
/// attacked buses).
pub fn critical_gain_bisect(
    red: &ReducedSystem,
    target_mask: &DVector<f64>,
    weights: &DVector<f64>,
    max_gain: f64,
    tol: f64,
) -> Result<CriticalGain> {
    let abscissa_at = |k: f64| -> Result<f64> {
        let gains = target_mask * k;
        Ok(spectral_abscissa(&dlaa_system_matrix(red, &gains, weights)?))
    };
    let unstable = |a: f64| a > MARGINAL_RE_EPS;

    let top = abscissa_at(max_gain)?;
    if !unstable(top) {
        return Ok(CriticalGain::StableThroughout {
            max_gain,
            abscissa: top,
        });
    }
    if unstable(abscissa_at(0.0)?) {
        let abscissa = abscissa_at(0.0)?;
        return Ok(CriticalGain::Critical {
            gain: 0.0,
            abscissa,
        });
    }

    let (mut lo, mut hi) = (0.0f64, max_gain);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if unstable(abscissa_at(mid)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let abscissa = abscissa_at(hi)?;
    Ok(CriticalGain::Critical { gain: hi, abscissa })
}

/// Spectral abscissa at each of the given gain values.
pub fn abscissa_sweep(
    red: &ReducedSystem,
    target_mask: &DVector<f64>,
    weights: &DVector<f64>,
    gains: &[f64],
) -> Result<Vec<(f64, f64)>> {
    gains
        .iter()
        .map(|&k| {
            let g = target_mask * k;
            Ok((k, spectral_abscissa(&dlaa_system_matrix(red, &g, weights)?)))
        })
        .collect()
}

/// Power-balance residual at every load bus (lossless network, import
/// convention):
///
/// `residual_i = P_i + d_i − U_i·Σ_j U_j·b_ij·sin(ang_j − ang_i)`
///
/// where the sum runs over buses adjacent to `i`. A pure diagnostic — it
/// evaluates consistency, it does not solve anything. Voltage magnitudes
/// default to a flat 1.0 pu profile.
pub fn power_flow_residual(
    adm: &AdmittancePartition,
    delta: &DVector<f64>,
    theta: &DVector<f64>,
    p_load: &DVector<f64>,
    d: &DVector<f64>,
    voltages: Option<(&DVector<f64>, &DVector<f64>)>,
) -> DVector<f64> {
    let ng = adm.gg.nrows();
    let nl = adm.ll.nrows();
    let flat_g = DVector::from_element(ng, 1.0);
    let flat_l = DVector::from_element(nl, 1.0);
    let (u_gen, u_load) = voltages.unwrap_or((&flat_g, &flat_l));

    DVector::from_fn(nl, |i, _| {
        let mut import = 0.0;
        for g in 0..ng {
            let b = adm.lg[(i, g)];
            if b != 0.0 {
                import += u_load[i] * u_gen[g] * b * (delta[g] - theta[i]).sin();
            }
        }
        for l in 0..nl {
            let b = adm.ll[(i, l)];
            if b != 0.0 {
                import += u_load[i] * u_load[l] * b * (theta[l] - theta[i]).sin();
            }
        }
        p_load[i] + d[i] - import
    })
}
