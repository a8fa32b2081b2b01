//! Block-Hankel construction and the persistent-excitation rank check.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Block-Hankel matrix of a multichannel signal (`channels × T` layout).
///
/// Block row `t ∈ 0..order` holds all channels at time offset `t`
/// (channel-major within the block), so entry `(t·nc + c, j) = x_c(t + j)`.
/// For a single channel this is the familiar pattern with `order` rows and
/// `T − order + 1` columns of shifted windows.
pub fn hankel_matrix(signal: &DMatrix<f64>, order: usize) -> Result<DMatrix<f64>> {
    let nc = signal.nrows();
    let t_len = signal.ncols();
    if order == 0 {
        return Err(Error::Parameter("hankel order must be >= 1".into()));
    }
    if order > t_len {
        return Err(Error::Parameter(format!(
            "hankel order {order} exceeds signal length {t_len}"
        )));
    }
    let cols = t_len - order + 1;
    Ok(DMatrix::from_fn(order * nc, cols, |r, j| {
        let t = r / nc;
        let c = r % nc;
        signal[(c, t + j)]
    }))
}

#[derive(Debug, Clone)]
pub struct PeCheck {
    pub order: usize,
    pub rank: usize,
    pub required_rank: usize,
    pub sigma_max: f64,
    /// Smallest singular value counted toward the rank.
    pub sigma_min_kept: f64,
    pub is_pe: bool,
}

/// Rank of the order-`L` block Hankel via singular values, with tolerance
/// `σ_max·1e-10`. Full row rank certifies persistent excitation of order `L`.
pub fn check_persistent_excitation(signal: &DMatrix<f64>, order: usize) -> Result<PeCheck> {
    let h = hankel_matrix(signal, order)?;
    let required_rank = h.nrows();
    let svals = h.singular_values();
    let sigma_max = svals.max();
    let tol = sigma_max * 1e-10;
    let kept: Vec<f64> = svals.iter().copied().filter(|s| *s > tol).collect();
    let rank = kept.len();
    let sigma_min_kept = kept.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PeCheck {
        order,
        rank,
        required_rank,
        sigma_max,
        sigma_min_kept: if rank == 0 { 0.0 } else { sigma_min_kept },
        is_pe: rank == required_rank,
    })
}
