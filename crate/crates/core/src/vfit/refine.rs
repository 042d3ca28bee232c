//! Levenberg-Marquardt refinement of a lossless model on log-magnitudes of Z and S.

use nalgebra::{DMatrix, DVector};

use super::{fit_entries, FitConfig};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::netcore::{z_to_s_matrix, Mode, ParamKind, RationalImpedance, SampledNetwork};

const FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub model: RationalImpedance,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub evals: usize,
    /// False when no step lowered the cost.
    pub improved: bool,
}

/// Parametrization: upper Cholesky factor of R0, every r_k row and log ω_k, each
/// scaled to order one around the starting model.
struct Params {
    n: usize,
    m: usize,
    r0_scale: f64,
    row_scale: Vec<f64>,
    omega0: Vec<f64>,
    names: Vec<String>,
}

impl Params {
    fn len(&self) -> usize {
        self.n * (self.n + 1) / 2 + self.m * self.n + self.m
    }

    fn pack(&self, z: &RationalImpedance) -> Result<DVector<f64>> {
        let chol = z
            .dc_residue
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite { what: "DC residue".into(), min_eigenvalue: crate::linalg::min_eigenvalue(&z.dc_residue) })?;
        let u = chol.l().transpose();
        let mut x = Vec::with_capacity(self.len());
        for i in 0..self.n {
            for j in i..self.n {
                x.push(u[(i, j)] / self.r0_scale);
            }
        }
        for (k, md) in z.modes.iter().enumerate() {
            x.extend(md.r_row.iter().map(|v| v / self.row_scale[k]));
        }
        x.extend(z.modes.iter().enumerate().map(|(k, md)| (md.omega / self.omega0[k]).ln()));
        Ok(DVector::from_vec(x))
    }

    fn unpack(&self, x: &DVector<f64>) -> (DMatrix<f64>, Vec<Mode>) {
        let mut u = DMatrix::zeros(self.n, self.n);
        let mut q = 0;
        for i in 0..self.n {
            for j in i..self.n {
                u[(i, j)] = x[q] * self.r0_scale;
                q += 1;
            }
        }
        let r0 = u.transpose() * &u;
        let mut modes = Vec::with_capacity(self.m);
        for k in 0..self.m {
            let row = DVector::from_fn(self.n, |i, _| x[q + k * self.n + i] * self.row_scale[k]);
            let omega = self.omega0[k] * x[q + self.m * self.n + k].exp();
            modes.push(Mode { omega, r_row: row });
        }
        (r0, modes)
    }

    fn model(&self, x: &DVector<f64>) -> Result<RationalImpedance> {
        let (r0, modes) = self.unpack(x);
        let mut z = RationalImpedance::new(self.names.clone(), r0, modes)?;
        z.normalize_signs();
        Ok(z)
    }
}

/// Direct evaluation without validation, for the inner loop.
fn eval_raw(r0: &DMatrix<f64>, modes: &[Mode], s: C64) -> CMat {
    let n = r0.nrows();
    let mut z = CMat::from_fn(n, n, |i, j| C64::new(r0[(i, j)], 0.0) / s);
    for m in modes {
        let w = s / (s * s + m.omega * m.omega);
        for i in 0..n {
            for j in 0..n {
                z[(i, j)] += w * (m.r_row[i] * m.r_row[j]);
            }
        }
    }
    z
}

struct Objective<'a> {
    p: &'a Params,
    s: Vec<C64>,
    entries: Vec<(usize, usize)>,
    target_z: Vec<CMat>,
    target_s: Vec<CMat>,
    z0: f64,
    evals: usize,
}

impl Objective<'_> {
    fn residuals(&mut self, x: &DVector<f64>) -> DVector<f64> {
        self.evals += 1;
        let (r0, modes) = self.p.unpack(x);
        let ne = self.entries.len();
        let mut out = DVector::zeros(2 * ne * self.s.len());
        for (k, &s) in self.s.iter().enumerate() {
            let z = eval_raw(&r0, &modes, s);
            let sm = z_to_s_matrix(&z, self.z0);
            for (e, &(i, j)) in self.entries.iter().enumerate() {
                out[2 * ne * k + e] = z[(i, j)].norm().log10() - self.target_z[k][(i, j)].norm().log10();
                out[2 * ne * k + ne + e] = match &sm {
                    Some(sm) => sm[(i, j)].norm().log10() - self.target_s[k][(i, j)].norm().log10(),
                    None => f64::INFINITY,
                };
            }
        }
        out.map(|v| if v.is_finite() { v } else { 1e6 })
    }

    fn jacobian(&mut self, x: &DVector<f64>, r: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(r.len(), x.len());
        for q in 0..x.len() {
            let h = FD_STEP * x[q].abs().max(1.0);
            let mut xp = x.clone();
            xp[q] += h;
            let rp = self.residuals(&xp);
            jac.set_column(q, &((rp - r) / h));
        }
        jac
    }
}

/// Nonlinear least squares on stacked log10|Z_ij| and log10|S_ij| residuals.
pub fn refine_lossless(z0: &RationalImpedance, data: &SampledNetwork, cfg: &FitConfig) -> Result<Refinement> {
    if data.kind != ParamKind::Z {
        return Err(Error::Invalid(format!("refinement expects Z data, got {:?}", data.kind)));
    }
    if data.port_names.len() != z0.n_ports() {
        return Err(Error::Shape(format!("{}-port model for {}-port data", z0.n_ports(), data.n_ports())));
    }
    let zref = data.uniform_z0()?;
    let params = Params {
        n: z0.n_ports(),
        m: z0.n_modes(),
        r0_scale: (0..z0.n_ports()).map(|i| z0.dc_residue[(i, i)]).fold(0.0, f64::max).sqrt().max(f64::MIN_POSITIVE),
        row_scale: z0.modes.iter().map(|m| m.r_row.amax().max(f64::MIN_POSITIVE)).collect(),
        omega0: z0.omegas(),
        names: z0.port_names.clone(),
    };
    let target_s = data
        .data
        .iter()
        .enumerate()
        .map(|(k, m)| z_to_s_matrix(m, zref).ok_or(Error::SingularAt { what: "Z + Z0·I".into(), index: k }))
        .collect::<Result<Vec<_>>>()?;
    let mut obj = Objective {
        p: &params,
        s: data.freqs.iter().map(|f| C64::new(0.0, 2.0 * std::f64::consts::PI * f)).collect(),
        entries: fit_entries(data),
        target_z: data.data.clone(),
        target_s,
        z0: zref,
        evals: 0,
    };
    let mut x = params.pack(z0)?;
    let mut r = obj.residuals(&x);
    let initial_cost = r.norm_squared();
    let mut cost = initial_cost;
    let mut improved = false;
    let mut lambda = 1e-3;
    let budget = cfg.refine_max_evals;
    'outer: while obj.evals + x.len() < budget && cost > 0.0 {
        let jac = obj.jacobian(&x, &r);
        let g = jac.transpose() * &r;
        if g.amax() <= 1e-15 * cost.max(1e-300) {
            break;
        }
        let jtj = jac.transpose() * &jac;
        loop {
            if obj.evals >= budget {
                break 'outer;
            }
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let xn = &x + &step;
            let rn = obj.residuals(&xn);
            let cn = rn.norm_squared();
            if cn < cost {
                let rel = (cost - cn) / cost;
                x = xn;
                r = rn;
                cost = cn;
                improved = true;
                lambda = (lambda / 3.0).max(1e-12);
                if rel < 1e-12 || step.amax() < 1e-14 {
                    break 'outer;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e12 {
                break 'outer;
            }
        }
    }
    let evals = obj.evals;
    if !improved {
        return Ok(Refinement { model: z0.clone(), initial_cost, final_cost: initial_cost, evals, improved });
    }
    Ok(Refinement { model: params.model(&x)?, initial_cost, final_cost: cost, evals, improved })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    fn truth() -> RationalImpedance {
        RationalImpedance::with_default_names(
            DMatrix::from_row_slice(2, 2, &[2e13, 1e12, 1e12, 3e13]),
            vec![
                Mode { omega: TWO_PI * 3e9, r_row: DVector::from_row_slice(&[1e5, -4e4]) },
                Mode { omega: TWO_PI * 6e9, r_row: DVector::from_row_slice(&[7e4, 9e4]) },
            ],
        )
        .unwrap()
    }

    fn freqs() -> Vec<f64> {
        (0..300).map(|k| 1e9 + 7e9 * k as f64 / 299.0).collect()
    }

    #[test]
    fn exact_model_is_fixed_point() {
        let z = truth();
        let data = z.sample_z(&freqs()).unwrap();
        let r = refine_lossless(&z, &data, &FitConfig::new(3, (1e9, 8e9))).unwrap();
        assert!(r.initial_cost < 1e-20);
        for (a, b) in r.model.modes.iter().zip(&z.modes) {
            assert!((a.omega / b.omega - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_frequency_is_recovered() {
        let z = truth();
        let data = z.sample_z(&freqs()).unwrap();
        let mut start = z.clone();
        start.modes[0].omega *= 1.001;
        let r = refine_lossless(&start, &data, &FitConfig::new(3, (1e9, 8e9))).unwrap();
        assert!(r.improved && r.final_cost < r.initial_cost);
        for (a, b) in r.model.modes.iter().zip(&z.modes) {
            assert!((a.omega / b.omega - 1.0).abs() < 1e-6, "{} vs {}", a.omega, b.omega);
        }
    }

    #[test]
    fn zero_budget_returns_input() {
        let z = truth();
        let data = z.sample_z(&freqs()).unwrap();
        let mut start = z.clone();
        start.modes[1].omega *= 0.99;
        let mut cfg = FitConfig::new(3, (1e9, 8e9));
        cfg.refine_max_evals = 0;
        let r = refine_lossless(&start, &data, &cfg).unwrap();
        assert!(!r.improved);
        assert_eq!(r.model, start);
    }
}
