//! One-round aggregation of site summaries.
//!
//! `β_DSE = (Σ Ψ_k)⁻¹ Σ Ψ_k β_k` and `Ω_DSE = (Σ Ψ_k)⁻¹ (Σ Γ_k) (Σ Ψ_k)⁻¹`.
//! Only [`SiteSummary`] values cross the site boundary.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stats::normal_quantile;
use crate::subsample::SiteSummary;

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedEstimate {
    pub beta_dse: Vec<f64>,
    pub omega_dse: Matrix,
    /// Number of sites.
    pub k: usize,
    pub per_site: Vec<SiteSummary>,
    /// `Σ r_k`.
    pub total_r: usize,
}

impl DistributedEstimate {
    pub fn standard_errors(&self) -> Vec<f64> {
        self.omega_dse.diag().into_iter().map(|v| libm::sqrt(v.max(0.0))).collect()
    }

    /// Distances of the combined and per-site estimates from `reference`.
    pub fn spread(&self, reference: &[f64]) -> Spread {
        let site: Vec<f64> = self.per_site.iter().map(|s| distance(&s.beta, reference)).collect();
        Spread {
            combined: distance(&self.beta_dse, reference),
            site_sum: site.iter().sum(),
            site_max: site.iter().copied().fold(0.0, f64::max),
            k: self.k,
        }
    }
}

/// `‖β_DSE − b‖` against the per-site distances `‖β_k − b‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub combined: f64,
    pub site_sum: f64,
    pub site_max: f64,
    pub k: usize,
}

impl Spread {
    /// `‖β_DSE − b‖ ≤ K · max_k ‖β_k − b‖`, with relative slack for rounding.
    pub fn within_k_max(&self) -> bool {
        self.combined <= self.k as f64 * self.site_max * (1.0 + 1e-12)
    }

    /// `‖β_DSE − b‖ ≤ Σ_k ‖β_k − b‖`, with relative slack for rounding.
    pub fn within_sum(&self) -> bool {
        self.combined <= self.site_sum * (1.0 + 1e-12)
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub coefficient: usize,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

pub fn aggregate(summaries: &[SiteSummary]) -> Result<DistributedEstimate> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::invalid("aggregation needs at least one site summary"))?;
    let p = first.p();
    let mut psi_sum = Matrix::zeros(p);
    let mut gamma_sum = Matrix::zeros(p);
    // Solve for the offset from the first site's estimate: identical summaries then
    // aggregate to that estimate exactly, and the right-hand side stays small.
    let mut weighted = alloc::vec![0.0; p];
    for s in summaries {
        if s.p() != p || s.psi.dim() != p || s.gamma.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: s.p(),
            });
        }
        if s.schema_version != first.schema_version {
            return Err(Error::invalid(alloc::format!(
                "schema version mismatch: {} vs {}",
                s.schema_version,
                first.schema_version
            )));
        }
        psi_sum.add_scaled(1.0, &s.psi);
        gamma_sum.add_scaled(1.0, &s.gamma);
        let centered: Vec<f64> = s.beta.iter().zip(&first.beta).map(|(b, b1)| b - b1).collect();
        for (w, v) in weighted.iter_mut().zip(s.psi.mul_vec(&centered)) {
            *w += v;
        }
    }
    let chol = psi_sum.cholesky(1e-12, None)?;
    Ok(DistributedEstimate {
        beta_dse: chol.solve(&weighted).iter().zip(&first.beta).map(|(d, b1)| b1 + d).collect(),
        omega_dse: chol.sandwich(&gamma_sum),
        k: summaries.len(),
        per_site: summaries.to_vec(),
        total_r: summaries.iter().map(|s| s.r).sum(),
    })
}

/// Wald intervals `β_j ± z_{(1+level)/2} √Ω_jj`.
pub fn wald_interval(est: &DistributedEstimate, level: f64) -> Result<Vec<ConfidenceInterval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(alloc::format!("level must lie in (0, 1), got {level}")));
    }
    let z = normal_quantile(0.5 * (1.0 + level));
    est.beta_dse
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let var = est.omega_dse[(j, j)];
            if !(var > 0.0) {
                return Err(Error::invalid(alloc::format!(
                    "variance of coefficient {j} is not positive ({var})"
                )));
            }
            let half = z * libm::sqrt(var);
            Ok(ConfidenceInterval {
                coefficient: j,
                lower: b - half,
                upper: b + half,
                level,
            })
        })
        .collect()
}
