//! Transmon-network Hamiltonians built from lossless impedance models.

mod effective;
mod fock;

pub use effective::{effective_params, regroup, EffectiveJson, EffectiveParams};
pub use fock::{fock_hamiltonian, fock_spectrum, oracle_effective_coupling, oracle_effective_coupling_tuned, oracle_pair_shift, FockModel, DEFAULT_FOCK_CAP};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::netcore::constants::{ej_from_lj, E_CHARGE, H_BAR, PHI0};
use crate::netcore::RationalImpedance;
use crate::synthesis::{hamiltonian_cap_inverse, CLCascade};

/// Junction strength at one port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JunctionValue {
    /// J.
    EJ(f64),
    /// H.
    LJ(f64),
    /// Hz; E_J is chosen so the bare transmon frequency hits this target.
    TargetFreq(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionPort {
    pub port: String,
    #[serde(flatten)]
    pub value: JunctionValue,
}

/// `transmon_spec.v1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmonSpec {
    #[serde(default = "spec_schema")]
    pub schema: String,
    pub junctions: Vec<JunctionPort>,
    #[serde(default)]
    pub couplers: Vec<String>,
    /// Ports without junctions. Ports named nowhere in the spec are treated as open too.
    #[serde(default)]
    pub open_ports: Vec<String>,
}

fn spec_schema() -> String {
    "transmon_spec.v1".into()
}

impl TransmonSpec {
    pub fn new(junctions: Vec<(&str, JunctionValue)>) -> Self {
        TransmonSpec {
            schema: spec_schema(),
            junctions: junctions.into_iter().map(|(p, value)| JunctionPort { port: p.into(), value }).collect(),
            couplers: Vec::new(),
            open_ports: Vec::new(),
        }
    }

    pub fn with_couplers(mut self, couplers: &[&str]) -> Self {
        self.couplers = couplers.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn validate(&self, ports: &[String]) -> Result<()> {
        if self.schema != "transmon_spec.v1" {
            return Err(Error::Invalid(format!("unsupported schema `{}`", self.schema)));
        }
        let mut seen = Vec::new();
        for j in &self.junctions {
            if !ports.contains(&j.port) {
                return Err(Error::unknown(&j.port, ports));
            }
            if seen.contains(&&j.port) {
                return Err(Error::Invalid(format!("port `{}` has two junctions", j.port)));
            }
            seen.push(&j.port);
            let v = match j.value {
                JunctionValue::EJ(v) | JunctionValue::LJ(v) | JunctionValue::TargetFreq(v) => v,
            };
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!("junction value {v} at `{}` must be positive", j.port)));
            }
        }
        for c in &self.couplers {
            if !self.junctions.iter().any(|j| &j.port == c) {
                return Err(Error::Invalid(format!("coupler `{c}` is not a junction port")));
            }
        }
        for o in &self.open_ports {
            if !ports.contains(o) {
                return Err(Error::unknown(o, ports));
            }
            if self.junctions.iter().any(|j| &j.port == o) {
                return Err(Error::Invalid(format!("port `{o}` is both open and a junction port")));
            }
        }
        Ok(())
    }
}

/// Parameters of the Duffing-oscillator network Hamiltonian, ħ = 1, all rates in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianParams {
    pub qubit_names: Vec<String>,
    pub mode_names: Vec<String>,
    pub omega_j: DVector<f64>,
    pub beta_j: DVector<f64>,
    pub omega_r: DVector<f64>,
    pub alpha_r: DVector<f64>,
    pub g_qq: DMatrix<f64>,
    pub g_qr: DMatrix<f64>,
    pub g_rr: DMatrix<f64>,
    /// F, qubits then modes; resonators of a rational model carry the unit normalization.
    pub eff_c: DVector<f64>,
    /// J per qubit.
    pub e_j: DVector<f64>,
    /// J per mode.
    pub e_l: DVector<f64>,
    /// Couplers named by the spec, carried to the effective stage.
    pub couplers: Vec<String>,
}

impl HamiltonianParams {
    pub fn n_qubits(&self) -> usize {
        self.omega_j.len()
    }

    pub fn n_modes(&self) -> usize {
        self.omega_r.len()
    }

    pub fn qubit_index(&self, name: &str) -> Result<usize> {
        self.qubit_names.iter().position(|n| n == name).ok_or_else(|| Error::unknown(name, &self.qubit_names))
    }

    /// Bare parameters with explicit values, for synthetic systems.
    pub fn from_parts(
        omega_j: DVector<f64>,
        beta_j: DVector<f64>,
        omega_r: DVector<f64>,
        g_qq: DMatrix<f64>,
        g_qr: DMatrix<f64>,
    ) -> Result<Self> {
        let (n, m) = (omega_j.len(), omega_r.len());
        if beta_j.len() != n || g_qq.shape() != (n, n) || g_qr.shape() != (n, m) {
            return Err(Error::Shape("inconsistent Hamiltonian parameter sizes".into()));
        }
        linalg::check_symmetric(&g_qq, "g_qq")?;
        Ok(HamiltonianParams {
            qubit_names: (1..=n).map(|i| format!("Q{i}")).collect(),
            mode_names: (1..=m).map(|k| format!("R{k}")).collect(),
            omega_j,
            beta_j,
            omega_r,
            alpha_r: DVector::zeros(m),
            g_qq,
            g_qr,
            g_rr: DMatrix::zeros(m, m),
            eff_c: DVector::zeros(n + m),
            e_j: DVector::zeros(n),
            e_l: DVector::zeros(m),
            couplers: Vec::new(),
        })
    }

    /// Largest |g_{i,Rk} / Δ_{i,Rk}|.
    pub fn max_g_over_delta(&self) -> f64 {
        let mut out: f64 = 0.0;
        for i in 0..self.n_qubits() {
            for k in 0..self.n_modes() {
                out = out.max((self.g_qr[(i, k)] / (self.omega_j[i] - self.omega_r[k])).abs());
            }
        }
        out
    }
}

/// Charging energy e²/2C̃.
pub fn charging_energy(eff_c: f64) -> f64 {
    E_CHARGE * E_CHARGE / (2.0 * eff_c)
}

/// Inductive energy Φ0²/(4π²L).
pub fn inductive_energy(l: f64) -> f64 {
    ej_from_lj(l)
}

/// Transmon frequency (rad/s) including the −E_C anharmonic shift.
pub fn transmon_omega(e_j: f64, e_c: f64) -> f64 {
    ((8.0 * e_j * e_c).sqrt() - e_c) / H_BAR
}

/// E_J giving bare transmon frequency `omega` (rad/s): positive root of
/// ħω = √(8 E_J E_C) − E_C.
pub fn ej_for_frequency(omega: f64, e_c: f64) -> Result<f64> {
    if !(omega > 0.0 && e_c > 0.0) {
        return Err(Error::Invalid(format!("target {omega} rad/s with E_C {e_c} J")));
    }
    let x = H_BAR * omega + e_c;
    Ok(x * x / (8.0 * e_c))
}

/// ħ g between two branches with inverse-capacitance entry `cinv_ij`.
fn coupling(cinv_ij: f64, e_i: f64, e_j: f64, ec_i: f64, ec_j: f64) -> f64 {
    E_CHARGE * E_CHARGE * cinv_ij * (e_i * e_j / (4.0 * ec_i * ec_j)).powf(0.25) / H_BAR
}

/// Inverse capacitance over (ports, resonators) and the resonator inductances.
struct Branches {
    names: Vec<String>,
    n_ports: usize,
    cinv: DMatrix<f64>,
    l_r: Vec<f64>,
    /// True when the resonator block of `cinv` is exactly the identity.
    rational: bool,
}

pub fn hamiltonian_params(z: &RationalImpedance, spec: &TransmonSpec) -> Result<HamiltonianParams> {
    let mut names = z.port_names.clone();
    names.extend((1..=z.n_modes()).map(|k| format!("R{k}")));
    let b = Branches {
        names,
        n_ports: z.n_ports(),
        cinv: hamiltonian_cap_inverse(z),
        l_r: z.modes.iter().map(|m| 1.0 / (m.omega * m.omega)).collect(),
        rational: true,
    };
    build(b, spec)
}

pub fn hamiltonian_params_cascade(c: &CLCascade, spec: &TransmonSpec) -> Result<HamiltonianParams> {
    let b = Branches {
        names: c.capacitance.node_names.clone(),
        n_ports: c.n_ports,
        cinv: linalg::spd_inverse(&c.capacitance.matrix, "cascade capacitance")?,
        l_r: c.shunt_inductors.iter().cloned().collect(),
        rational: false,
    };
    build(b, spec)
}

fn build(b: Branches, spec: &TransmonSpec) -> Result<HamiltonianParams> {
    let ports = b.names[..b.n_ports].to_vec();
    spec.validate(&ports)?;
    let q_idx: Vec<usize> = spec.junctions.iter().map(|j| ports.iter().position(|p| p == &j.port).unwrap()).collect();
    let m = b.l_r.len();
    let r_idx: Vec<usize> = (b.n_ports..b.n_ports + m).collect();
    let keep: Vec<usize> = q_idx.iter().chain(&r_idx).cloned().collect();
    // charges on open ports vanish, so their rows and columns of C⁻¹ drop out
    let cinv = DMatrix::from_fn(keep.len(), keep.len(), |a, c| b.cinv[(keep[a], keep[c])]);
    let n = q_idx.len();
    let eff_c = DVector::from_fn(n + m, |a, _| 1.0 / cinv[(a, a)]);
    if eff_c.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::NotPositiveDefinite { what: "inverse capacitance diagonal".into(), min_eigenvalue: linalg::min_eigenvalue(&cinv) });
    }
    let ec = eff_c.map(charging_energy);
    let mut e_j = DVector::zeros(n);
    for (i, j) in spec.junctions.iter().enumerate() {
        e_j[i] = match j.value {
            JunctionValue::EJ(v) => v,
            JunctionValue::LJ(l) => ej_from_lj(l),
            JunctionValue::TargetFreq(f) => ej_for_frequency(2.0 * std::f64::consts::PI * f, ec[i])?,
        };
    }
    let e_l = DVector::from_iterator(m, b.l_r.iter().map(|l| inductive_energy(*l)));
    let energy = |a: usize| if a < n { e_j[a] } else { e_l[a - n] };
    let omega_j = DVector::from_fn(n, |i, _| transmon_omega(e_j[i], ec[i]));
    let beta_j = DVector::from_fn(n, |i, _| -ec[i] / H_BAR);
    let omega_r = DVector::from_fn(m, |k, _| (8.0 * e_l[k] * ec[n + k]).sqrt() / H_BAR);
    let g = |a: usize, c: usize| coupling(cinv[(a, c)], energy(a), energy(c), ec[a], ec[c]);
    let g_qq = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { g(i, j) });
    let g_qr = DMatrix::from_fn(n, m, |i, k| g(i, n + k));
    let g_rr = if b.rational { DMatrix::zeros(m, m) } else { DMatrix::from_fn(m, m, |k, l| if k == l { 0.0 } else { g(n + k, n + l) }) };
    let mode_names = r_idx.iter().map(|&a| b.names[a].clone()).collect();
    let hp = HamiltonianParams {
        qubit_names: spec.junctions.iter().map(|j| j.port.clone()).collect(),
        mode_names,
        omega_j,
        beta_j,
        omega_r,
        alpha_r: DVector::zeros(m),
        g_qq: linalg::symmetrize(&g_qq),
        g_qr,
        g_rr: linalg::symmetrize(&g_rr),
        eff_c,
        e_j,
        e_l,
        couplers: spec.couplers.clone(),
    };
    if hp.omega_j.iter().chain(hp.omega_r.iter()).any(|w| !(*w > 0.0)) {
        return Err(Error::Numerical("nonpositive bare frequency (E_J too small for its E_C)".into()));
    }
    Ok(hp)
}

/// Tabular view with Hz columns for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianJson {
    pub schema: String,
    pub qubits: Vec<String>,
    pub modes: Vec<String>,
    pub omega_j_hz: Vec<f64>,
    pub beta_j_hz: Vec<f64>,
    pub omega_r_hz: Vec<f64>,
    pub alpha_r_hz: Vec<f64>,
    pub g_qq_hz: Vec<Vec<f64>>,
    pub g_qr_hz: Vec<Vec<f64>>,
    pub g_rr_hz: Vec<Vec<f64>>,
    pub eff_c_f: Vec<f64>,
    pub e_j_j: Vec<f64>,
    pub e_l_j: Vec<f64>,
    pub max_g_over_delta: f64,
}

pub(crate) fn hz(v: &DVector<f64>) -> Vec<f64> {
    v.iter().map(|x| x / (2.0 * std::f64::consts::PI)).collect()
}

pub(crate) fn hz_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().map(|x| x / (2.0 * std::f64::consts::PI)).collect()).collect()
}

impl From<&HamiltonianParams> for HamiltonianJson {
    fn from(hp: &HamiltonianParams) -> Self {
        HamiltonianJson {
            schema: "hamiltonian.v1".into(),
            qubits: hp.qubit_names.clone(),
            modes: hp.mode_names.clone(),
            omega_j_hz: hz(&hp.omega_j),
            beta_j_hz: hz(&hp.beta_j),
            omega_r_hz: hz(&hp.omega_r),
            alpha_r_hz: hz(&hp.alpha_r),
            g_qq_hz: hz_rows(&hp.g_qq),
            g_qr_hz: hz_rows(&hp.g_qr),
            g_rr_hz: hz_rows(&hp.g_rr),
            eff_c_f: hp.eff_c.iter().cloned().collect(),
            e_j_j: hp.e_j.iter().cloned().collect(),
            e_l_j: hp.e_l.iter().cloned().collect(),
            max_g_over_delta: hp.max_g_over_delta(),
        }
    }
}

/// Flux quantum helper for callers that quote L_J.
pub fn lj_for_frequency(omega: f64, eff_c: f64) -> Result<f64> {
    let ej = ej_for_frequency(omega, charging_energy(eff_c))?;
    Ok(PHI0 * PHI0 / (4.0 * std::f64::consts::PI.powi(2) * ej))
}
