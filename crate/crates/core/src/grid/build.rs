//! Assembly of the admittance partition, descriptor system, and reduced form.

use nalgebra::{DMatrix, DVector};

use crate::case::{CaseIndex, GridCase};
use crate::error::{Error, Result};

/// Dense susceptance blocks split by generator/load bus class.
#[derive(Debug, Clone)]
pub struct AdmittancePartition {
    /// generator-to-generator, |G|×|G|
    pub gg: DMatrix<f64>,
    /// generator-to-load, |G|×|L|
    pub gl: DMatrix<f64>,
    /// load-to-generator, |L|×|G|
    pub lg: DMatrix<f64>,
    /// load-to-load, |L|×|L|
    pub ll: DMatrix<f64>,
}

impl AdmittancePartition {
    /// Assemble the full bus matrix `[[GG, GL], [LG, LL]]`.
    pub fn assemble(&self) -> DMatrix<f64> {
        let ng = self.gg.nrows();
        let nl = self.ll.nrows();
        let mut h = DMatrix::zeros(ng + nl, ng + nl);
        h.view_mut((0, 0), (ng, ng)).copy_from(&self.gg);
        h.view_mut((0, ng), (ng, nl)).copy_from(&self.gl);
        h.view_mut((ng, 0), (nl, ng)).copy_from(&self.lg);
        h.view_mut((ng, ng), (nl, nl)).copy_from(&self.ll);
        h
    }
}

/// diag(X·1): diagonal matrix of row sums.
pub fn row_sum_diag(x: &DMatrix<f64>) -> DMatrix<f64> {
    let ones = DVector::from_element(x.ncols(), 1.0);
    DMatrix::from_diagonal(&(x * ones))
}

/// Build the four admittance blocks from the branch list.
pub fn build_admittance(case: &GridCase, idx: &CaseIndex) -> Result<AdmittancePartition> {
    let ng = idx.n_gen();
    let nl = idx.n_load();
    let mut gg = DMatrix::zeros(ng, ng);
    let mut gl = DMatrix::zeros(ng, nl);
    let mut lg = DMatrix::zeros(nl, ng);
    let mut ll = DMatrix::zeros(nl, nl);

    for (k, br) in case.branches.iter().enumerate() {
        let class = |bus: usize| -> Result<(bool, usize)> {
            if let Some(&g) = idx.gen_of_bus.get(&bus) {
                Ok((true, g))
            } else if let Some(&l) = idx.load_of_bus.get(&bus) {
                Ok((false, l))
            } else {
                Err(Error::CaseValidation(format!(
                    "branches[{k}]: endpoint bus {bus} not defined"
                )))
            }
        };
        let (fg, fi) = class(br.from)?;
        let (tg, ti) = class(br.to)?;
        let b = br.susceptance_pu;
        match (fg, tg) {
            (true, true) => {
                gg[(fi, ti)] += b;
                gg[(ti, fi)] += b;
            }
            (true, false) => {
                gl[(fi, ti)] += b;
                lg[(ti, fi)] += b;
            }
            (false, true) => {
                lg[(fi, ti)] += b;
                gl[(ti, fi)] += b;
            }
            (false, false) => {
                ll[(fi, ti)] += b;
                ll[(ti, fi)] += b;
            }
        }
    }

    Ok(AdmittancePartition { gg, gl, lg, ll })
}

/// Descriptor form `E·ẋ = A·x + B_load·(P^LS + ε^L) + B_gen·u_set`
/// with state ordering `(δ | θ | ω)`.
#[derive(Debug, Clone)]
pub struct DescriptorSystem {
    pub e: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b_load: DMatrix<f64>,
    pub b_gen: DMatrix<f64>,
    pub n_gen: usize,
    pub n_load: usize,
}

impl DescriptorSystem {
    pub fn dim(&self) -> usize {
        2 * self.n_gen + self.n_load
    }
}

/// Assemble the descriptor matrices:
///
/// ```text
///     [ 0                          0                  I        ]
/// A = [ -H^LG                      H^LG¹+H^LL¹-H^LL   0        ]
///     [ K^I+H^GG¹-H^GG+H^GL¹       -H^GL              K^P+D^G  ]
///
/// E = blockdiag(I, 0, -M),   B_load selects the θ rows.
/// ```
///
/// The proportional diagonal folds the droop gain: `K^P := K^P + R`.
pub fn build_descriptor(
    case: &GridCase,
    idx: &CaseIndex,
    adm: &AdmittancePartition,
) -> Result<DescriptorSystem> {
    let ng = idx.n_gen();
    let nl = idx.n_load();
    let n = 2 * ng + nl;

    for (i, g) in case.generators.iter().enumerate() {
        if g.inertia <= 0.0 {
            return Err(Error::Model(format!(
                "generators[{i}] (bus {}): singular inertia",
                g.bus
            )));
        }
    }

    let m = DMatrix::from_diagonal(&DVector::from_iterator(
        ng,
        case.generators.iter().map(|g| g.inertia),
    ));
    let ki = DMatrix::from_diagonal(&DVector::from_iterator(
        ng,
        case.generators.iter().map(|g| g.integral_gain),
    ));
    let kp_eff = DMatrix::from_diagonal(&DVector::from_iterator(
        ng,
        case.generators.iter().map(|g| g.primary_gain + g.droop_gain),
    ));
    let dg = DMatrix::from_diagonal(&DVector::from_iterator(
        ng,
        case.generators.iter().map(|g| g.damping),
    ));

    let mut a = DMatrix::zeros(n, n);
    // δ̇ row: identity on ω.
    a.view_mut((0, ng + nl), (ng, ng))
        .copy_from(&DMatrix::identity(ng, ng));
    // θ (algebraic) rows.
    a.view_mut((ng, 0), (nl, ng)).copy_from(&(-&adm.lg));
    a.view_mut((ng, ng), (nl, nl))
        .copy_from(&(row_sum_diag(&adm.lg) + row_sum_diag(&adm.ll) - &adm.ll));
    // ω rows.
    a.view_mut((ng + nl, 0), (ng, ng))
        .copy_from(&(&ki + row_sum_diag(&adm.gg) - &adm.gg + row_sum_diag(&adm.gl)));
    a.view_mut((ng + nl, ng), (ng, nl)).copy_from(&(-&adm.gl));
    a.view_mut((ng + nl, ng + nl), (ng, ng))
        .copy_from(&(&kp_eff + &dg));

    let mut e = DMatrix::zeros(n, n);
    e.view_mut((0, 0), (ng, ng))
        .copy_from(&DMatrix::identity(ng, ng));
    e.view_mut((ng + nl, ng + nl), (ng, ng)).copy_from(&(-&m));

    let mut b_load = DMatrix::zeros(n, nl);
    b_load
        .view_mut((ng, 0), (nl, nl))
        .copy_from(&DMatrix::identity(nl, nl));

    // Setpoint channel: a positive setpoint raises frequency. With the -M
    // mass on the ω rows this needs -I there.
    let mut b_gen = DMatrix::zeros(n, ng);
    b_gen
        .view_mut((ng + nl, 0), (ng, ng))
        .copy_from(&(-DMatrix::identity(ng, ng)));

    Ok(DescriptorSystem {
        e,
        a,
        b_load,
        b_gen,
        n_gen: ng,
        n_load: nl,
    })
}

/// Reduced (non-descriptor) form on `(δ | ω)`:
/// `ẋ = A'·x + B'_load·ΔP^L + B'_gen·u_set`, with the load-bus angles
/// recoverable as `θ = H^inv·(H^LG·δ − ΔP^L)`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub a: DMatrix<f64>,
    /// `-M⁻¹·H^GL·H^inv` on the ω rows: a load increase lowers frequency.
    pub b_load: DMatrix<f64>,
    /// `M⁻¹` on the ω rows.
    pub b_gen: DMatrix<f64>,
    /// Cached `(H^LG¹ + H^LL¹ − H^LL)⁻¹`.
    pub h_inv: DMatrix<f64>,
    pub h_lg: DMatrix<f64>,
    pub inertia: DVector<f64>,
    pub n_gen: usize,
    pub n_load: usize,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        2 * self.n_gen
    }

    /// Inertia-weighted average of a per-generator quantity.
    pub fn inertia_weighted(&self, per_gen: &DVector<f64>) -> f64 {
        self.inertia.dot(per_gen) / self.inertia.sum()
    }

    /// Normalized inertia weights (sum to 1).
    pub fn inertia_weights(&self) -> DVector<f64> {
        &self.inertia / self.inertia.sum()
    }

    /// Reconstruct load-bus angles from `(δ, ΔP^L)`.
    pub fn theta_from(&self, delta: &DVector<f64>, dp_load: &DVector<f64>) -> DVector<f64> {
        &self.h_inv * (&self.h_lg * delta - dp_load)
    }
}

/// Eliminate the algebraic load-bus rows of the descriptor system.
///
/// Fails when the load-bus block is singular; islanded load buses (all-zero
/// rows) are named explicitly.
pub fn reduce(desc: &DescriptorSystem, load_buses: &[usize]) -> Result<ReducedSystem> {
    let ng = desc.n_gen;
    let nl = desc.n_load;

    let h_core = desc.a.view((ng, ng), (nl, nl)).into_owned();
    // a_θδ = -H^LG
    let h_lg = -desc.a.view((ng, 0), (nl, ng)).into_owned();
    // a_ωθ = -H^GL
    let h_gl = -desc.a.view((ng + nl, ng), (ng, nl)).into_owned();
    let a_omega_delta = desc.a.view((ng + nl, 0), (ng, ng)).into_owned();
    let a_omega_omega = desc.a.view((ng + nl, ng + nl), (ng, ng)).into_owned();

    let islanded: Vec<usize> = (0..nl)
        .filter(|&i| h_core.row(i).iter().all(|v| v.abs() < 1e-14))
        .map(|i| load_buses.get(i).copied().unwrap_or(i))
        .collect();
    if !islanded.is_empty() {
        return Err(Error::Reduction {
            buses: islanded,
            reason: "load bus has no network connections".into(),
        });
    }

    let h_inv = h_core.clone().try_inverse().ok_or_else(|| Error::Reduction {
        buses: vec![],
        reason: "load-bus angle block is singular".into(),
    })?;

    let residual = (&h_inv * &h_core - DMatrix::identity(nl, nl)).abs().max();
    if residual > 1e-10 {
        return Err(Error::Reduction {
            buses: vec![],
            reason: format!("inverse residual {residual:.3e} exceeds 1e-10"),
        });
    }

    let inertia = -desc
        .e
        .view((ng + nl, ng + nl), (ng, ng))
        .diagonal()
        .into_owned();
    let m_inv = DMatrix::from_diagonal(&inertia.map(|m| 1.0 / m));

    let mut a = DMatrix::zeros(2 * ng, 2 * ng);
    a.view_mut((0, ng), (ng, ng))
        .copy_from(&DMatrix::identity(ng, ng));
    a.view_mut((ng, 0), (ng, ng))
        .copy_from(&(&m_inv * (-&a_omega_delta + &h_gl * &h_inv * &h_lg)));
    a.view_mut((ng, ng), (ng, ng))
        .copy_from(&(-&m_inv * &a_omega_omega));

    let mut b_load = DMatrix::zeros(2 * ng, nl);
    b_load
        .view_mut((ng, 0), (ng, nl))
        .copy_from(&(-&m_inv * &h_gl * &h_inv));

    let mut b_gen = DMatrix::zeros(2 * ng, ng);
    b_gen.view_mut((ng, 0), (ng, ng)).copy_from(&m_inv);

    Ok(ReducedSystem {
        a,
        b_load,
        b_gen,
        h_inv,
        h_lg,
        inertia,
        n_gen: ng,
        n_load: nl,
    })
}
