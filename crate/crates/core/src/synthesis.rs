//! Rational impedance ⇄ CL cascade.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::netcore::{MaxwellCapacitance, Mode, RationalImpedance};

/// Capacitive multiport over port nodes followed by resonator nodes, each resonator
/// node shunted to ground by an inductor.
#[derive(Debug, Clone, PartialEq)]
pub struct CLCascade {
    pub capacitance: MaxwellCapacitance,
    pub n_ports: usize,
    /// H, one per resonator node.
    pub shunt_inductors: DVector<f64>,
}

/// Simultaneous diagonalization of `(C⁻¹)_R` and `M_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransform {
    pub s: DMatrix<f64>,
    /// rad/s, ascending.
    pub omega: DVector<f64>,
}

/// Numerical rank of a matrix together with its singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct RankCertificate {
    pub size: usize,
    pub rank: usize,
    pub singular_values: DVector<f64>,
}

impl RankCertificate {
    pub fn deficiency(&self) -> usize {
        self.size - self.rank
    }
}

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-12;

impl CLCascade {
    pub fn new(capacitance: MaxwellCapacitance, n_ports: usize, shunt_inductors: DVector<f64>) -> Result<Self> {
        let total = capacitance.len();
        if n_ports == 0 || n_ports > total {
            return Err(Error::Shape(format!("{n_ports} ports in a {total}-node cascade")));
        }
        if shunt_inductors.len() != total - n_ports {
            return Err(Error::Shape(format!(
                "{} inductors for {} resonator nodes",
                shunt_inductors.len(),
                total - n_ports
            )));
        }
        if let Some(l) = shunt_inductors.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Invalid(format!("shunt inductance {l} must be positive and finite")));
        }
        if !capacitance.is_positive_definite() {
            return Err(Error::NotPositiveDefinite {
                what: "cascade capacitance".into(),
                min_eigenvalue: linalg::min_eigenvalue(&capacitance.matrix),
            });
        }
        Ok(CLCascade { capacitance, n_ports, shunt_inductors })
    }

    pub fn n_resonators(&self) -> usize {
        self.shunt_inductors.len()
    }

    pub fn port_names(&self) -> &[String] {
        &self.capacitance.node_names[..self.n_ports]
    }

    pub fn resonator_names(&self) -> &[String] {
        &self.capacitance.node_names[self.n_ports..]
    }

    /// Diagonal inverse-inductance matrix over all nodes (zero at ports).
    pub fn inductance_matrix(&self) -> DMatrix<f64> {
        let n = self.capacitance.len();
        let mut m = DMatrix::zeros(n, n);
        for (k, l) in self.shunt_inductors.iter().enumerate() {
            m[(self.n_ports + k, self.n_ports + k)] = 1.0 / l;
        }
        m
    }
}

fn resonator_names(ports: &[String], m: usize) -> Vec<String> {
    (1..=m)
        .map(|k| {
            let mut name = format!("R{k}");
            while ports.contains(&name) {
                name.push('\'');
            }
            name
        })
        .collect()
}

/// Block capacitance `[[R0⁻¹, −R0⁻¹Rᵀ], [−R R0⁻¹, I + R R0⁻¹ Rᵀ]]` with `L_Rk = 1/ω_k²`.
pub fn synthesize_cascade(z: &RationalImpedance) -> Result<CLCascade> {
    let n = z.n_ports();
    let m = z.n_modes();
    let r0_inv = linalg::spd_inverse(&z.dc_residue, "DC residue")?;
    let r = z.turns_ratio();
    let coupling = -(&r * &r0_inv);
    let res_block = DMatrix::identity(m, m) + &r * &r0_inv * r.transpose();
    let mut c = DMatrix::zeros(n + m, n + m);
    c.view_mut((0, 0), (n, n)).copy_from(&r0_inv);
    c.view_mut((n, 0), (m, n)).copy_from(&coupling);
    c.view_mut((0, n), (n, m)).copy_from(&coupling.transpose());
    c.view_mut((n, n), (m, m)).copy_from(&res_block);
    let mut names = z.port_names.clone();
    names.extend(resonator_names(&z.port_names, m));
    let inductors = DVector::from_iterator(m, z.modes.iter().map(|md| 1.0 / (md.omega * md.omega)));
    CLCascade::new(MaxwellCapacitance::new(linalg::symmetrize(&c), names)?, n, inductors)
}

/// Poles and residues of a CL cascade by simultaneous diagonalization.
pub fn cascade_to_rational(c: &CLCascade) -> Result<(RationalImpedance, ModeTransform)> {
    let n = c.n_ports;
    let m = c.n_resonators();
    let ports: Vec<usize> = (0..n).collect();
    let res: Vec<usize> = (n..n + m).collect();
    let cmat = &c.capacitance.matrix;
    let cp = linalg::select(cmat, &ports, &ports);
    let r0 = linalg::spd_inverse(&cp, "port capacitance block")?;
    let port_names = c.port_names().to_vec();
    if m == 0 {
        let z = RationalImpedance::new(port_names, r0, vec![])?;
        return Ok((z, ModeTransform { s: DMatrix::zeros(0, 0), omega: DVector::zeros(0) }));
    }
    let cinv = linalg::spd_inverse(cmat, "cascade capacitance")?;
    let cinv_r = linalg::select(&cinv, &res, &res);
    // (C⁻¹)_R = O_C D O_Cᵀ, T = O_C D^{1/2}
    let (d, o_c) = linalg::sym_eigen(&cinv_r);
    if d[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite { what: "resonator block of C⁻¹".into(), min_eigenvalue: d[0] });
    }
    let t = &o_c * DMatrix::from_diagonal(&d.map(f64::sqrt));
    let m_r = DMatrix::from_diagonal(&c.shunt_inductors.map(|l| 1.0 / l));
    // Tᵀ M_R T = O_M Ω² O_Mᵀ, S = T O_M
    let (omega2, o_m) = linalg::sym_eigen(&(t.transpose() * &m_r * &t));
    let mut s = t * o_m;
    let omega = omega2.map(|w2| w2.max(0.0).sqrt());
    let cpr = linalg::select(cmat, &ports, &res);
    // R = −Sᵀ C_PRᵀ C_P⁻¹
    let r = -(s.transpose() * cpr.transpose() * &r0);
    let mut modes = Vec::with_capacity(m);
    for k in 0..m {
        let mut row: DVector<f64> = r.row(k).transpose();
        let before = row.clone();
        linalg::sign_normalize(&mut row);
        if row != before {
            s.column_mut(k).neg_mut();
        }
        modes.push(Mode { omega: omega[k], r_row: row });
    }
    let z = RationalImpedance::new(port_names, r0, modes)?;
    Ok((z, ModeTransform { s, omega }))
}

/// Closed-form `C⁻¹ = [[R0 + RᵀR, Rᵀ], [R, I]]`.
pub fn hamiltonian_cap_inverse(z: &RationalImpedance) -> DMatrix<f64> {
    let n = z.n_ports();
    let m = z.n_modes();
    let r = z.turns_ratio();
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(&(&z.dc_residue + r.transpose() * &r));
    out.view_mut((0, n), (n, m)).copy_from(&r.transpose());
    out.view_mut((n, 0), (m, n)).copy_from(&r);
    out.view_mut((n, n), (m, m)).fill_with_identity();
    out
}

/// Capacitance of the Lagrangian that keeps the infinite-frequency stage with turns
/// ratios `t_rows` (K×N), over (ports, resonators, inductive branches).
///
/// The rank is counted on the diagonally equilibrated matrix so fF and 1 F entries
/// do not mask each other.
pub fn full_lagrangian_capacitance(z: &RationalImpedance, t_rows: &DMatrix<f64>) -> Result<(DMatrix<f64>, RankCertificate)> {
    let n = z.n_ports();
    let m = z.n_modes();
    if t_rows.ncols() != n {
        return Err(Error::Shape(format!("T has {} columns for {n} ports", t_rows.ncols())));
    }
    let k = t_rows.nrows();
    let r0_inv = linalg::spd_inverse(&z.dc_residue, "DC residue")?;
    // C = Bᵀ R0⁻¹ B + blockdiag(0, C_R, 0), B = [I, −Rᵀ, −Tᵀ]
    let mut b = DMatrix::zeros(n, n + m + k);
    b.view_mut((0, 0), (n, n)).fill_with_identity();
    b.view_mut((0, n), (n, m)).copy_from(&(-z.turns_ratio().transpose()));
    b.view_mut((0, n + m), (n, k)).copy_from(&(-t_rows.transpose()));
    let mut c = b.transpose() * r0_inv * &b;
    for i in n..n + m {
        c[(i, i)] += 1.0;
    }
    let c = linalg::symmetrize(&c);
    let (scaled, _) = linalg::equilibrate(&c);
    let (rank, sv) = linalg::numerical_rank(&scaled, RANK_TOL);
    Ok((c, RankCertificate { size: n + m + k, rank, singular_values: sv }))
}

/// `cl_cascade.v1` file layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CascadeJson {
    #[serde(default = "cascade_schema")]
    pub schema: String,
    pub ports: Vec<String>,
    pub resonators: Vec<String>,
    /// Row-major, farads.
    pub maxwell: Vec<f64>,
    pub inductors_h: Vec<f64>,
}

fn cascade_schema() -> String {
    "cl_cascade.v1".into()
}

impl From<&CLCascade> for CascadeJson {
    fn from(c: &CLCascade) -> Self {
        let n = c.capacitance.len();
        CascadeJson {
            schema: cascade_schema(),
            ports: c.port_names().to_vec(),
            resonators: c.resonator_names().to_vec(),
            maxwell: (0..n * n).map(|k| c.capacitance.matrix[(k / n, k % n)]).collect(),
            inductors_h: c.shunt_inductors.iter().cloned().collect(),
        }
    }
}

impl TryFrom<CascadeJson> for CLCascade {
    type Error = Error;
    fn try_from(j: CascadeJson) -> Result<Self> {
        if j.schema != cascade_schema() {
            return Err(Error::Parse(format!("expected schema cl_cascade.v1, found `{}`", j.schema)));
        }
        let n = j.ports.len() + j.resonators.len();
        if j.maxwell.len() != n * n {
            return Err(Error::Shape(format!("cl_cascade.v1: {} matrix entries for {n} nodes", j.maxwell.len())));
        }
        let n_ports = j.ports.len();
        let mut names = j.ports;
        names.extend(j.resonators);
        let cap = MaxwellCapacitance::new(DMatrix::from_row_slice(n, n, &j.maxwell), names)?;
        CLCascade::new(cap, n_ports, DVector::from_vec(j.inductors_h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const FF: f64 = 1e-15;

    fn example_one(c1: f64, c2: f64, w: f64) -> RationalImpedance {
        // Z = diag(1/C1, 1/C2)/s + s (1,−1)ᵀ(1,−1)/(s² + ω²)
        RationalImpedance::with_default_names(
            DMatrix::from_row_slice(2, 2, &[1.0 / c1, 0.0, 0.0, 1.0 / c2]),
            vec![Mode { omega: w, r_row: DVector::from_vec(vec![1.0, -1.0]) }],
        )
        .unwrap()
    }

    #[test]
    fn synthesized_example_matrix() {
        let (c1, c2) = (2.0, 3.0);
        let c = synthesize_cascade(&example_one(c1, c2, 1.0)).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[c1, 0.0, -c1, 0.0, c2, c2, -c1, c2, 1.0 + c1 + c2]);
        assert!((&c.capacitance.matrix - expected).abs().max() < 1e-14);
        assert_eq!(c.shunt_inductors[0], 1.0);
    }

    #[test]
    fn zero_mode_cascade_is_port_capacitance() {
        let r0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let z = RationalImpedance::with_default_names(r0.clone(), vec![]).unwrap();
        let c = synthesize_cascade(&z).unwrap();
        assert_eq!(c.n_resonators(), 0);
        assert!((&c.capacitance.matrix * &r0 - DMatrix::identity(2, 2)).abs().max() < 1e-14);
        assert_eq!(hamiltonian_cap_inverse(&z), r0);
    }

    #[test]
    fn closed_form_inverse_matches_numeric() {
        let z = example_one(70.0 * FF, 72.0 * FF, 2.0 * PI * 5e9);
        let c = synthesize_cascade(&z).unwrap();
        let numeric = linalg::spd_inverse(&c.capacitance.matrix, "test").unwrap();
        let closed = hamiltonian_cap_inverse(&z);
        for i in 0..3 {
            for j in 0..3 {
                let scale = (closed[(i, i)] * closed[(j, j)]).sqrt();
                assert!((numeric[(i, j)] - closed[(i, j)]).abs() < 1e-8 * scale, "({i},{j})");
            }
        }
        assert_eq!(closed[(2, 2)], 1.0);
    }

    #[test]
    fn single_resonator_closed_form() {
        // Port (100 fF) coupled by 10 fF to a 1 F resonator node with 1 nH.
        let (cp, cc, cr, l) = (100.0 * FF, 10.0 * FF, 1.0, 1e-9);
        let cap = DMatrix::from_row_slice(2, 2, &[cp + cc, -cc, -cc, cr + cc]);
        let casc = CLCascade::new(
            MaxwellCapacitance::new(cap.clone(), vec!["P".into(), "R".into()]).unwrap(),
            1,
            DVector::from_element(1, l),
        )
        .unwrap();
        let (z, t) = cascade_to_rational(&casc).unwrap();
        // Port open: resonator sees C_R − C_c²/C_P in parallel with L.
        let c_eff = (cr + cc) - cc * cc / (cp + cc);
        let w = 1.0 / (l * c_eff).sqrt();
        assert!((z.modes[0].omega - w).abs() < 1e-12 * w);
        assert!((z.dc_residue[(0, 0)] * (cp + cc) - 1.0).abs() < 1e-14);
        // Z_PP = (s² c_RR L + 1) / (s (s² det L + c_PP)); its s/(s²+ω²) residue is cc²/(det c_PP).
        let det = (cp + cc) * (cr + cc) - cc * cc;
        let r_expected = (cc * cc / (det * (cp + cc))).sqrt();
        assert!((z.modes[0].r_row[0] - r_expected).abs() < 1e-9 * r_expected);
        assert!(((&t.s * t.s.transpose())[(0, 0)] - (cp + cc) / det).abs() < 1e-8 * (cp + cc) / det);
    }

    #[test]
    fn transform_invariants() {
        let z = example_one(70.0 * FF, 72.0 * FF, 2.0 * PI * 5e9);
        let casc = synthesize_cascade(&z).unwrap();
        let (_, t) = cascade_to_rational(&casc).unwrap();
        let m_r = DMatrix::from_diagonal(&casc.shunt_inductors.map(|l| 1.0 / l));
        let diag = t.s.transpose() * m_r * &t.s;
        assert!((diag[(0, 0)] / t.omega[0].powi(2) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rank_deficiency_equals_t_rows() {
        let z = example_one(70.0 * FF, 72.0 * FF, 2.0 * PI * 5e9);
        let t = DMatrix::from_row_slice(2, 2, &[1e6, 0.3e6, -0.2e6, 0.7e6]);
        let (_, cert) = full_lagrangian_capacitance(&z, &t).unwrap();
        assert_eq!(cert.deficiency(), 2);
        let one = RationalImpedance::with_default_names(DMatrix::from_element(1, 1, 1.0 / (70.0 * FF)), vec![]).unwrap();
        let (_, cert) = full_lagrangian_capacitance(&one, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        let sv = &cert.singular_values;
        assert!(sv.min() < 1e-12 * sv.max());
        let (c, cert) = full_lagrangian_capacitance(&z, &DMatrix::zeros(0, 2)).unwrap();
        assert_eq!(cert.deficiency(), 0);
        assert!(c.cholesky().is_some());
    }

    #[test]
    fn json_roundtrip() {
        let casc = synthesize_cascade(&example_one(1.0, 2.0, 3.0)).unwrap();
        let text = serde_json::to_string(&CascadeJson::from(&casc)).unwrap();
        let back: CLCascade = serde_json::from_str::<CascadeJson>(&text).unwrap().try_into().unwrap();
        assert_eq!(back, casc);
    }

    fn random_rational(v: &[f64], n: usize, m: usize) -> RationalImpedance {
        let a = DMatrix::from_fn(n, n, |i, j| v[i * n + j]);
        let r0 = (&a * a.transpose() + DMatrix::identity(n, n)) * 1e13;
        let modes = (0..m)
            .map(|k| Mode {
                omega: 2.0 * PI * 1e9 * (1.0 + 2.0 * k as f64 + v[n * n + k].abs()),
                r_row: DVector::from_fn(n, |i, _| v[n * n + m + k * n + i] * 3e6),
            })
            .collect();
        RationalImpedance::with_default_names(r0, modes).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn function_roundtrip(v in proptest::collection::vec(-1.0f64..1.0, 9 + 4 + 12)) {
            let z = random_rational(&v, 3, 4);
            let (back, _) = cascade_to_rational(&synthesize_cascade(&z).unwrap()).unwrap();
            for (a, b) in z.modes.iter().zip(&back.modes) {
                prop_assert!((a.omega - b.omega).abs() <= 1e-9 * a.omega);
            }
            for (k, md) in back.modes.iter().enumerate() {
                let sv = md.residue().svd(false, false).singular_values;
                let mut s: Vec<f64> = sv.iter().cloned().collect();
                s.sort_by(|a, b| b.total_cmp(a));
                prop_assert!(s[1] < 1e-10 * s[0], "mode {k}");
            }
            let mut checked = 0;
            for i in 0..200 {
                let w = 2.0 * PI * (0.5e9 + i as f64 * 0.05e9);
                if z.omegas().iter().any(|&p| (w - p).abs() < 1e-3 * p) {
                    continue;
                }
                let s = C64::new(0.0, w);
                let za = z.eval(s).unwrap();
                let zb = back.eval(s).unwrap();
                let scale = za.iter().fold(0.0_f64, |a, x| a.max(x.norm()));
                prop_assert!((&za - &zb).iter().all(|d| d.norm() <= 1e-8 * scale));
                checked += 1;
            }
            prop_assert!(checked > 100);
        }

        #[test]
        fn frequency_scaling_law(v in proptest::collection::vec(-1.0f64..1.0, 4 + 2 + 4)) {
            // Unit-scale cascade; multiplying C by 1e-15 and L by 1e-9 scales ω by 1e12.
            let z = random_rational(&v, 2, 2);
            let casc = synthesize_cascade(&z).unwrap();
            let unit = CLCascade::new(
                MaxwellCapacitance::new(casc.capacitance.matrix.clone(), casc.capacitance.node_names.clone()).unwrap(),
                2,
                casc.shunt_inductors.clone(),
            ).unwrap();
            let scaled = CLCascade::new(
                MaxwellCapacitance::new(&unit.capacitance.matrix * 1e-15, unit.capacitance.node_names.clone()).unwrap(),
                2,
                &unit.shunt_inductors * 1e-9,
            ).unwrap();
            let (a, _) = cascade_to_rational(&unit).unwrap();
            let (b, _) = cascade_to_rational(&scaled).unwrap();
            for (x, y) in a.modes.iter().zip(&b.modes) {
                prop_assert!((y.omega / x.omega / 1e12 - 1.0).abs() < 1e-9);
            }
        }
    }
}
