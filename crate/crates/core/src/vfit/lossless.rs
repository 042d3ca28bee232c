//! Projection of a general rational fit onto the lossless partial-fraction form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::relocate::{units, Unit};
use super::{FitConfig, GeneralRational};
use crate::error::{Error, Result};
use crate::linalg;
use crate::netcore::{Mode, RationalImpedance};

/// A rank-1 residue component discarded by the projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedComponent {
    pub omega_rad_s: f64,
    pub eigenvalue: f64,
    pub largest_eigenvalue: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosslessProjection {
    pub model: RationalImpedance,
    pub dropped: Vec<DroppedComponent>,
}

pub fn enforce_lossless(gr: &GeneralRational, cfg: &FitConfig) -> Result<RationalImpedance> {
    enforce_lossless_detailed(gr, cfg).map(|p| p.model)
}

/// Real poles and poles inside the DC capture radius go to s = 0; the rest move to
/// i|Im p| with the real symmetric part of their residue split into rank-1 rows.
pub fn enforce_lossless_detailed(gr: &GeneralRational, cfg: &FitConfig) -> Result<LosslessProjection> {
    let n = gr.n_ports();
    let radius = cfg.dc_radius();
    let mut r0 = DMatrix::zeros(n, n);
    let mut resonant: Vec<(f64, DMatrix<f64>)> = Vec::new();
    let us = units(&gr.poles)?;
    let mut idx = 0;
    for u in &us {
        let res = gr.residues[idx].map(|z| z.re);
        match *u {
            Unit::Real(_) => {
                r0 += res;
                idx += 1;
            }
            Unit::Pair(p) => {
                // R/(s−p) + R̄/(s−p̄) → 2 Re(R) s/(s² + ω²)
                let two_re = linalg::symmetrize(&(res * 2.0));
                if p.norm() < radius {
                    r0 += two_re;
                } else {
                    resonant.push((p.im.abs(), two_re));
                }
                idx += 2;
            }
        }
    }
    let top = resonant.iter().map(|(w, _)| *w).fold(0.0, f64::max);
    let mut modes = Vec::new();
    let mut dropped = Vec::new();
    for (omega, res) in resonant {
        let (vals, vecs) = linalg::sym_eigen(&res);
        let lmax = vals.iter().cloned().fold(0.0, f64::max);
        let keep_two = cfg.allow_degenerate_hf_pole && omega == top;
        for k in (0..n).rev() {
            let lam = vals[k];
            let rank = n - 1 - k;
            let kept = lam > 0.0 && (lam >= cfg.rank1_eig_threshold * lmax || (keep_two && rank == 1));
            if kept {
                let row: DVector<f64> = vecs.column(k) * lam.sqrt();
                modes.push(Mode { omega, r_row: row });
                continue;
            }
            if lam == 0.0 {
                continue;
            }
            let reason = if lam < 0.0 { "negative eigenvalue" } else { "below rank-1 threshold" };
            if lam < 0.0 && lam.abs() >= cfg.rank1_eig_threshold * lmax {
                log::warn!(
                    "dropping negative residue component {lam:e} (largest {lmax:e}) at {:.6e} Hz",
                    omega / (2.0 * std::f64::consts::PI)
                );
            }
            dropped.push(DroppedComponent { omega_rad_s: omega, eigenvalue: lam, largest_eigenvalue: lmax, reason: reason.into() });
        }
    }
    let r0 = linalg::symmetrize(&r0);
    if n > 0 && r0.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite {
            what: "DC residue after lossless projection (widen the DC capture radius)".into(),
            min_eigenvalue: linalg::min_eigenvalue(&r0),
        });
    }
    let mut model = RationalImpedance::new(gr.port_names.clone(), r0, modes)?;
    model.normalize_signs();
    Ok(LosslessProjection { model, dropped })
}
