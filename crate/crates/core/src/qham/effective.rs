//! Second-order Schrieffer-Wolff effective parameters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{hz, hz_rows, HamiltonianParams};
use crate::error::{Error, Result};

/// Effective Hamiltonian parameters, rad/s. Qubits are the non-coupler junctions;
/// modes are the couplers followed by the resonators.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveParams {
    pub qubit_names: Vec<String>,
    pub mode_names: Vec<String>,
    pub omega_j_eff: DVector<f64>,
    pub omega_r_eff: DVector<f64>,
    pub g_eff_qq: DMatrix<f64>,
    pub g_eff_rr: DMatrix<f64>,
    /// Qubit × mode coefficient of b†b a†a.
    pub chi: DMatrix<f64>,
    pub beta_eff: DVector<f64>,
    pub alpha_eff: DVector<f64>,
    /// Qubit × qubit coefficient of b†b b'†b' (zero diagonal).
    pub cross_kerr: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub max_g_over_delta: f64,
}

/// Moves the named couplers from the qubit block into the mode block, where their
/// anharmonicity becomes α.
pub fn regroup(hp: &HamiltonianParams, couplers: &[String]) -> Result<HamiltonianParams> {
    let mut is_coupler = vec![false; hp.n_qubits()];
    for c in couplers {
        is_coupler[hp.qubit_index(c)?] = true;
    }
    let n = hp.n_qubits();
    let m = hp.n_modes();
    let q: Vec<usize> = (0..n).filter(|&i| !is_coupler[i]).collect();
    // global branch order of the regrouped mode block: couplers, then resonators
    let r: Vec<usize> = (0..n).filter(|&i| is_coupler[i]).chain(n..n + m).collect();
    let (nq, nr) = (q.len(), r.len());
    let omega = |a: usize| if a < n { hp.omega_j[a] } else { hp.omega_r[a - n] };
    let anh = |a: usize| if a < n { hp.beta_j[a] } else { hp.alpha_r[a - n] };
    let g = |a: usize, b: usize| match (a < n, b < n) {
        (true, true) => hp.g_qq[(a, b)],
        (true, false) => hp.g_qr[(a, b - n)],
        (false, true) => hp.g_qr[(b, a - n)],
        (false, false) => hp.g_rr[(a - n, b - n)],
    };
    let name = |a: usize| if a < n { hp.qubit_names[a].clone() } else { hp.mode_names[a - n].clone() };
    let mut eff_c = DVector::zeros(nq + nr);
    for (dst, &src) in q.iter().chain(&r).enumerate() {
        eff_c[dst] = hp.eff_c[src];
    }
    Ok(HamiltonianParams {
        qubit_names: q.iter().map(|&a| name(a)).collect(),
        mode_names: r.iter().map(|&a| name(a)).collect(),
        omega_j: DVector::from_iterator(nq, q.iter().map(|&a| omega(a))),
        beta_j: DVector::from_iterator(nq, q.iter().map(|&a| anh(a))),
        omega_r: DVector::from_iterator(nr, r.iter().map(|&a| omega(a))),
        alpha_r: DVector::from_iterator(nr, r.iter().map(|&a| anh(a))),
        g_qq: DMatrix::from_fn(nq, nq, |i, j| if i == j { 0.0 } else { g(q[i], q[j]) }),
        g_qr: DMatrix::from_fn(nq, nr, |i, k| g(q[i], r[k])),
        g_rr: DMatrix::from_fn(nr, nr, |k, l| if k == l { 0.0 } else { g(r[k], r[l]) }),
        eff_c,
        e_j: DVector::from_iterator(nq, q.iter().map(|&a| hp.e_j[a])),
        e_l: DVector::zeros(nr),
        couplers: Vec::new(),
    })
}

pub fn effective_params(hp: &HamiltonianParams, couplers: &[String]) -> Result<EffectiveParams> {
    let h = regroup(hp, couplers)?;
    let (n, m) = (h.n_qubits(), h.n_modes());
    let delta = DMatrix::from_fn(n, m, |i, k| h.omega_j[i] - h.omega_r[k]);
    let sigma = DMatrix::from_fn(n, m, |i, k| h.omega_j[i] + h.omega_r[k]);
    for i in 0..n {
        for k in 0..m {
            if delta[(i, k)] == 0.0 && h.g_qr[(i, k)] != 0.0 {
                return Err(Error::ResonantDegeneracy(h.qubit_names[i].clone(), h.mode_names[k].clone()));
            }
        }
    }
    // uncoupled pairs contribute nothing even when degenerate
    let inv = |x: f64| if x == 0.0 { 0.0 } else { 1.0 / x };
    let g = &h.g_qr;
    let (b, a) = (&h.beta_j, &h.alpha_r);
    let mut omega_j_eff = h.omega_j.clone();
    let mut beta_eff = b.clone();
    for i in 0..n {
        let mut ratio = 0.0;
        for k in 0..m {
            let (g2, d, s) = (g[(i, k)] * g[(i, k)], delta[(i, k)], sigma[(i, k)]);
            omega_j_eff[i] += g2 * (inv(d) - 1.0 / s) + 2.0 * b[i] * g2 / (s * s);
            ratio += g2 * inv(d) * inv(d);
        }
        beta_eff[i] = b[i] * (1.0 - 2.0 * ratio);
    }
    let mut omega_r_eff = h.omega_r.clone();
    let mut alpha_eff = a.clone();
    for k in 0..m {
        let mut ratio = 0.0;
        for i in 0..n {
            let (g2, d, s) = (g[(i, k)] * g[(i, k)], delta[(i, k)], sigma[(i, k)]);
            omega_r_eff[k] += -g2 * (inv(d) + 1.0 / s) + 2.0 * a[k] * g2 / (s * s);
            ratio += g2 * inv(d) * inv(d);
        }
        alpha_eff[k] = a[k] * (1.0 - 2.0 * ratio);
    }
    let mut g_eff_qq = h.g_qq.clone();
    let mut cross_kerr = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for k in 0..m {
                let p = g[(i, k)] * g[(j, k)];
                g_eff_qq[(i, j)] +=
                    0.5 * p * (inv(delta[(i, k)]) + inv(delta[(j, k)]) - 1.0 / sigma[(i, k)] - 1.0 / sigma[(j, k)]);
                let x = p * inv(delta[(i, k)]) * inv(delta[(j, k)]);
                cross_kerr[(i, j)] += 0.5 * x * x * (b[i] + b[j] + 4.0 * a[k]);
            }
        }
    }
    let mut g_eff_rr = h.g_rr.clone();
    for k in 0..m {
        for l in 0..m {
            if k == l {
                continue;
            }
            for i in 0..n {
                g_eff_rr[(k, l)] -= 0.5
                    * g[(i, k)]
                    * g[(i, l)]
                    * (inv(delta[(i, k)]) + inv(delta[(i, l)]) + 1.0 / sigma[(i, k)] + 1.0 / sigma[(i, l)]);
            }
        }
    }
    let chi = DMatrix::from_fn(n, m, |i, k| {
        let (d, s) = (delta[(i, k)], sigma[(i, k)]);
        2.0 * g[(i, k)] * g[(i, k)] * (b[i] + a[k]) * (inv(d) * inv(d) + 1.0 / (s * s))
    });
    let max_g_over_delta = h.max_g_over_delta();
    Ok(EffectiveParams {
        qubit_names: h.qubit_names,
        mode_names: h.mode_names,
        omega_j_eff,
        omega_r_eff,
        g_eff_qq,
        g_eff_rr,
        chi,
        beta_eff,
        alpha_eff,
        cross_kerr,
        delta,
        sigma,
        max_g_over_delta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveJson {
    pub schema: String,
    pub qubits: Vec<String>,
    pub modes: Vec<String>,
    pub omega_j_eff_hz: Vec<f64>,
    pub omega_r_eff_hz: Vec<f64>,
    pub g_eff_qq_hz: Vec<Vec<f64>>,
    pub g_eff_rr_hz: Vec<Vec<f64>>,
    pub chi_hz: Vec<Vec<f64>>,
    pub beta_eff_hz: Vec<f64>,
    pub alpha_eff_hz: Vec<f64>,
    pub cross_kerr_hz: Vec<Vec<f64>>,
    pub max_g_over_delta: f64,
}

impl From<&EffectiveParams> for EffectiveJson {
    fn from(e: &EffectiveParams) -> Self {
        EffectiveJson {
            schema: "effective.v1".into(),
            qubits: e.qubit_names.clone(),
            modes: e.mode_names.clone(),
            omega_j_eff_hz: hz(&e.omega_j_eff),
            omega_r_eff_hz: hz(&e.omega_r_eff),
            g_eff_qq_hz: hz_rows(&e.g_eff_qq),
            g_eff_rr_hz: hz_rows(&e.g_eff_rr),
            chi_hz: hz_rows(&e.chi),
            beta_eff_hz: hz(&e.beta_eff),
            alpha_eff_hz: hz(&e.alpha_eff),
            cross_kerr_hz: hz_rows(&e.cross_kerr),
            max_g_over_delta: e.max_g_over_delta,
        }
    }
}
