use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sampled::{ParamKind, SampledNetwork};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// Relative tolerance under which two mode frequencies count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// One resonant term `s·rᵀr / (s² + ω²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    /// rad/s, > 0.
    pub omega: f64,
    /// Turns-ratio row r_k, one entry per port.
    pub r_row: DVector<f64>,
}

impl Mode {
    pub fn residue(&self) -> DMatrix<f64> {
        &self.r_row * self.r_row.transpose()
    }
}

/// Lossless reciprocal impedance `Z(s) = R0/s + Σ_k s r_kᵀ r_k / (s² + ω_k²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalImpedance {
    pub port_names: Vec<String>,
    pub dc_residue: DMatrix<f64>,
    /// Sorted ascending by `omega`.
    pub modes: Vec<Mode>,
}

/// `R0 = U C0⁻¹ Uᵀ` plus the normalized resonator stage (`C_R = 1 F`, `L_Rk = 1/ω_k²`).
#[derive(Debug, Clone, PartialEq)]
pub struct CauerFactorization {
    pub u: DMatrix<f64>,
    pub c0: DVector<f64>,
    pub l_r: DVector<f64>,
    pub c_r: DVector<f64>,
}

impl RationalImpedance {
    pub fn new(port_names: Vec<String>, dc_residue: DMatrix<f64>, mut modes: Vec<Mode>) -> Result<Self> {
        let n = port_names.len();
        if dc_residue.nrows() != n || dc_residue.ncols() != n {
            return Err(Error::Shape(format!(
                "DC residue is {}x{}, expected {n}x{n}",
                dc_residue.nrows(),
                dc_residue.ncols()
            )));
        }
        linalg::check_symmetric(&dc_residue, "DC residue")?;
        let dc_residue = linalg::spd_check(&dc_residue, "DC residue")?;
        for (k, m) in modes.iter().enumerate() {
            if !(m.omega > 0.0 && m.omega.is_finite()) {
                return Err(Error::Invalid(format!("mode {k} has non-positive frequency {}", m.omega)));
            }
            if m.r_row.len() != n {
                return Err(Error::Shape(format!("mode {k} row has {} entries for {n} ports", m.r_row.len())));
            }
        }
        let mut seen = port_names.clone();
        seen.sort();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Invalid(format!("duplicate port name `{}`", w[0])));
        }
        modes.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        Ok(RationalImpedance { port_names, dc_residue, modes })
    }

    pub fn with_default_names(dc_residue: DMatrix<f64>, modes: Vec<Mode>) -> Result<Self> {
        let names = (1..=dc_residue.nrows()).map(|i| format!("P{i}")).collect();
        Self::new(names, dc_residue, modes)
    }

    pub fn n_ports(&self) -> usize {
        self.port_names.len()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.omega).collect()
    }

    pub fn port_index(&self, name: &str) -> Result<usize> {
        self.port_names.iter().position(|n| n == name).ok_or_else(|| Error::unknown(name, &self.port_names))
    }

    /// Turns-ratio matrix R (modes × ports), rows r_k.
    pub fn turns_ratio(&self) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.n_modes(), self.n_ports());
        for (k, m) in self.modes.iter().enumerate() {
            r.set_row(k, &m.r_row.transpose());
        }
        r
    }

    /// Exact partial-fraction evaluation.
    pub fn eval(&self, s: C64) -> Result<CMat> {
        if s.norm() == 0.0 {
            return Err(Error::Numerical("evaluation at s = 0 hits the DC pole".into()));
        }
        let mut z = linalg::to_complex(&self.dc_residue) / s;
        for (k, m) in self.modes.iter().enumerate() {
            let den = s * s + m.omega * m.omega;
            if den.norm() <= 1e-14 * m.omega * m.omega {
                return Err(Error::PoleHit { mode: k });
            }
            let w = s / den;
            let r = &m.r_row;
            for i in 0..r.len() {
                for j in 0..r.len() {
                    z[(i, j)] += w * (r[i] * r[j]);
                }
            }
        }
        Ok(z)
    }

    /// Z sampled at `freqs` (Hz) on the imaginary axis.
    pub fn sample_z(&self, freqs: &[f64]) -> Result<SampledNetwork> {
        let data = freqs
            .iter()
            .map(|&f| self.eval(C64::new(0.0, 2.0 * std::f64::consts::PI * f)))
            .collect::<Result<Vec<_>>>()?;
        let mut net = SampledNetwork::new(
            ParamKind::Z,
            freqs.to_vec(),
            data,
            vec![50.0; self.n_ports()],
            self.port_names.clone(),
        )?;
        net.reciprocal = true;
        Ok(net)
    }

    /// Leave the named ports open: delete their rows and columns from every residue.
    pub fn remove_ports(&self, names: &[String]) -> Result<RationalImpedance> {
        let drop: Vec<usize> = names.iter().map(|n| self.port_index(n)).collect::<Result<_>>()?;
        let keep: Vec<usize> = (0..self.n_ports()).filter(|i| !drop.contains(i)).collect();
        if keep.is_empty() {
            return Err(Error::Invalid("leaving every port open yields an empty network".into()));
        }
        let r0 = linalg::select(&self.dc_residue, &keep, &keep);
        let modes = self
            .modes
            .iter()
            .map(|m| Mode { omega: m.omega, r_row: DVector::from_iterator(keep.len(), keep.iter().map(|&i| m.r_row[i])) })
            .filter(|m| m.r_row.iter().any(|&x| x != 0.0))
            .collect();
        RationalImpedance::new(keep.iter().map(|&i| self.port_names[i].clone()).collect(), r0, modes)
    }

    /// Sign-normalize every row so its largest-magnitude entry is positive.
    pub fn normalize_signs(&mut self) {
        for m in &mut self.modes {
            linalg::sign_normalize(&mut m.r_row);
        }
    }

    pub fn cauer_factorization(&self) -> CauerFactorization {
        let (vals, vecs) = linalg::sym_eigen(&self.dc_residue);
        CauerFactorization {
            u: vecs,
            c0: vals.map(|v| 1.0 / v),
            l_r: DVector::from_iterator(self.n_modes(), self.modes.iter().map(|m| 1.0 / (m.omega * m.omega))),
            c_r: DVector::from_element(self.n_modes(), 1.0),
        }
    }

    /// Groups of mode indices whose frequencies agree to [`DEGENERACY_TOL`].
    pub fn degenerate_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (k, m) in self.modes.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if (m.omega - self.modes[g[0]].omega).abs() <= DEGENERACY_TOL * m.omega => g.push(k),
                _ => groups.push(vec![k]),
            }
        }
        groups
    }
}

impl CauerFactorization {
    /// `U C0⁻¹ Uᵀ`.
    pub fn dc_residue(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&self.c0.map(|c| 1.0 / c));
        &self.u * d * self.u.transpose()
    }
}

/// `rational_impedance.v1` file layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RationalJson {
    #[serde(default = "rational_schema")]
    pub schema: String,
    pub ports: usize,
    pub port_names: Vec<String>,
    /// Row-major.
    pub dc_residue: Vec<f64>,
    pub modes: Vec<ModeJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeJson {
    pub omega_rad_s: f64,
    pub r_row: Vec<f64>,
}

fn rational_schema() -> String {
    "rational_impedance.v1".into()
}

impl From<&RationalImpedance> for RationalJson {
    fn from(z: &RationalImpedance) -> Self {
        let n = z.n_ports();
        RationalJson {
            schema: rational_schema(),
            ports: n,
            port_names: z.port_names.clone(),
            dc_residue: (0..n * n).map(|k| z.dc_residue[(k / n, k % n)]).collect(),
            modes: z
                .modes
                .iter()
                .map(|m| ModeJson { omega_rad_s: m.omega, r_row: m.r_row.iter().cloned().collect() })
                .collect(),
        }
    }
}

impl TryFrom<RationalJson> for RationalImpedance {
    type Error = Error;
    fn try_from(j: RationalJson) -> Result<Self> {
        if j.schema != rational_schema() {
            return Err(Error::Parse(format!("expected schema rational_impedance.v1, found `{}`", j.schema)));
        }
        let n = j.ports;
        if j.port_names.len() != n || j.dc_residue.len() != n * n {
            return Err(Error::Shape(format!(
                "rational_impedance.v1: {} names and {} residue entries for {n} ports",
                j.port_names.len(),
                j.dc_residue.len()
            )));
        }
        let modes =
            j.modes.into_iter().map(|m| Mode { omega: m.omega_rad_s, r_row: DVector::from_vec(m.r_row) }).collect();
        RationalImpedance::new(j.port_names, DMatrix::from_row_slice(n, n, &j.dc_residue), modes)
    }
}
