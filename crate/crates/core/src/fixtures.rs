//! Reference circuits used by tests, the acceptance suite and `--fixture` CLI inputs.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::decay::LossSpec;
use crate::distributed::{Element, TwoPortChain};
use crate::error::Result;
use crate::netcore::{mutual_to_maxwell, MaxwellCapacitance, Mode, MutualCapacitance, RationalImpedance};
use crate::synthesis::CLCascade;

const FF: f64 = 1e-15;
const NH: f64 = 1e-9;

/// Two qubit pads coupled through series capacitors to the ends of a 12 mm line.
pub fn tl_coupler_chain() -> TwoPortChain {
    TwoPortChain::new(vec![
        Element::shunt_capacitor(70.0 * FF),
        Element::SeriesCapacitor { c: 6.5 * FF },
        Element::tline(0.438e-6, 0.159e-9, 12e-3),
        Element::SeriesCapacitor { c: 6.5 * FF },
        Element::shunt_capacitor(72.0 * FF),
    ])
    .expect("fixture values are valid")
}

pub const TL_COUPLER_BAND: (f64, f64) = (1e9, 22.5e9);

/// Resonances of the TL coupler in Hz.
pub const TL_COUPLER_POLES_HZ: [f64; 4] = [4.965470e9, 9.931947e9, 14.896434e9, 19.8619404e9];
/// g/2π of qubit 1 and qubit 2 to each resonance, Hz, both qubits at 4 GHz.
pub const TL_COUPLER_G1_HZ: [f64; 4] = [-55.113e6, -77.924e6, -95.422e6, -110.154e6];
pub const TL_COUPLER_G2_HZ: [f64; 4] = [54.367e6, -76.869e6, 94.130e6, -108.662e6];
pub const TL_COUPLER_G12_HZ: f64 = 0.652e6;

fn mutual(names: &[&str], ground: &[f64], edges: &[(&str, &str, f64)]) -> Result<MaxwellCapacitance> {
    let n = names.len();
    let mut m = DMatrix::from_diagonal(&DVector::from_row_slice(ground));
    let idx = |s: &str| names.iter().position(|x| *x == s).expect("fixture node");
    for &(a, b, c) in edges {
        let (i, j) = (idx(a), idx(b));
        m[(i, j)] += c;
        m[(j, i)] += c;
    }
    let c = mutual_to_maxwell(&MutualCapacitance::new(m, names.iter().map(|s| s.to_string()).collect())?)?;
    debug_assert_eq!(c.len(), n);
    MaxwellCapacitance::new(c.matrix, c.node_names)
}

/// Three grounded transmon pads Q1, Q2 and coupler C.
pub fn tc_capacitance() -> MaxwellCapacitance {
    mutual(
        &["Q1", "Q2", "C"],
        &[70.0 * FF, 72.0 * FF, 200.0 * FF],
        &[("Q1", "C", 4.0 * FF), ("Q2", "C", 4.2 * FF), ("Q1", "Q2", 0.1 * FF)],
    )
    .expect("fixture values are valid")
}

/// Purely capacitive model: R0 = C⁻¹ and no resonances.
pub fn tc_rational() -> RationalImpedance {
    let c = tc_capacitance();
    let r0 = c.matrix.clone().try_inverse().expect("positive definite");
    RationalImpedance::new(c.node_names, crate::linalg::symmetrize(&r0), Vec::new()).expect("valid model")
}

/// Node order of [`decay_circuit`].
pub const DECAY_PORTS: [&str; 6] = ["J1", "J2", "D1", "D2", "RO1", "RO2"];
pub const DECAY_RESONATORS: [&str; 3] = ["R1", "RC", "R2"];

fn decay_edges() -> Vec<(&'static str, &'static str, f64)> {
    let cr = 10.0 * FF;
    let cd = 0.15 * FF;
    vec![
        ("RO1", "R1", cr),
        ("R1", "J1", cr),
        ("J1", "RC", cr),
        ("RC", "J2", cr),
        ("J2", "R2", cr),
        ("R2", "RO2", cr),
        ("J1", "D1", cd),
        ("J2", "D2", cd),
    ]
}

fn decay_cascade(extra: f64) -> CLCascade {
    let names: Vec<&str> = DECAY_PORTS.iter().chain(DECAY_RESONATORS.iter()).cloned().collect();
    let (cs, cc) = (100.0 * FF, 300.0 * FF);
    let ground = [70.0 * FF, 75.0 * FF, cs, cs, cs, cs, cc, cc, cc];
    let mut edges = decay_edges();
    if extra > 0.0 {
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                let present = edges.iter().any(|(x, y, _)| (x == a && y == b) || (x == b && y == a));
                if !present {
                    edges.push((a, b, extra));
                }
            }
        }
    }
    let c = mutual(&names, &ground, &edges).expect("fixture values are valid");
    CLCascade::new(c, DECAY_PORTS.len(), DVector::from_row_slice(&[2.1 * NH, 3.25 * NH, 1.6 * NH])).expect("valid cascade")
}

/// Two transmons coupled through a center resonator, each with a readout resonator
/// and a weakly coupled drive line.
pub fn decay_circuit() -> CLCascade {
    decay_cascade(0.0)
}

/// [`decay_circuit`] with 1 fF added between every pair of nodes not already coupled.
pub fn decay_circuit_all_to_all() -> CLCascade {
    decay_cascade(1.0 * FF)
}

/// Junction inductors at J1, J2 and 50 Ω at the four external ports.
pub fn decay_loss(l_j1: f64, l_j2: f64) -> LossSpec {
    LossSpec::new(&[("J1", l_j1), ("J2", l_j2)], &[("D1", 50.0), ("D2", 50.0), ("RO1", 50.0), ("RO2", 50.0)])
}

/// Three ports and three resonators, each resonator coupled to two of the ports.
pub fn tetrahedral(c: f64, cc: f64, l_r: f64) -> CLCascade {
    let mut m = DMatrix::from_diagonal_element(6, 6, c);
    for (i, j) in [(0, 3), (0, 4), (1, 4), (1, 5), (2, 3), (2, 5)] {
        m[(i, j)] = -cc;
        m[(j, i)] = -cc;
    }
    let names = ["P1", "P2", "P3", "R1", "R2", "R3"].iter().map(|s| s.to_string()).collect();
    CLCascade::new(MaxwellCapacitance::new(m, names).expect("positive definite"), 3, DVector::from_element(3, l_r))
        .expect("valid cascade")
}

/// Diagonal and off-diagonal entries of the resonator block of C⁻¹ for [`tetrahedral`].
pub fn tetrahedral_closed_form(c: f64, cc: f64) -> (f64, f64) {
    let den = c.powi(4) - 5.0 * c * c * cc * cc + 4.0 * cc.powi(4);
    ((c.powi(3) - 3.0 * c * cc * cc) / den, c * cc * cc / den)
}

/// Random CL cascade: node shunts in 100–200 fF, all pairwise couplings in 0–10 fF,
/// resonator inductors in 0.4–5 nH.
pub fn random_cascade(rng: &mut ChaCha8Rng, n_ports: usize, n_modes: usize) -> CLCascade {
    let n = n_ports + n_modes;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = rng.random_range(100.0..200.0) * FF;
        for j in i + 1..n {
            let c = rng.random_range(0.0..10.0) * FF;
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    let mut names: Vec<String> = (1..=n_ports).map(|k| format!("P{k}")).collect();
    names.extend((1..=n_modes).map(|k| format!("R{k}")));
    let c = mutual_to_maxwell(&MutualCapacitance::new(m, names).expect("symmetric")).expect("symmetric");
    let c = MaxwellCapacitance::new(c.matrix, c.node_names).expect("diagonally dominant");
    let l = DVector::from_fn(n_modes, |_, _| rng.random_range(0.4..5.0) * NH);
    CLCascade::new(c, n_ports, l).expect("valid cascade")
}

/// Random lossless model with R0 ~ 1e13 F⁻¹ scale and the given resonances in GHz.
pub fn random_lossless(rng: &mut ChaCha8Rng, n_ports: usize, freqs_ghz: &[f64]) -> RationalImpedance {
    let a = DMatrix::from_fn(n_ports, n_ports, |_, _| rng.random_range(-1.0..1.0));
    let r0 = (&a * a.transpose() + DMatrix::identity(n_ports, n_ports) * 0.5) * 1.0e13;
    let modes = freqs_ghz
        .iter()
        .map(|f| Mode { omega: 2.0 * PI * f * 1e9, r_row: DVector::from_fn(n_ports, |_, _| rng.random_range(-1.0..1.0) * 3e6) })
        .collect();
    RationalImpedance::with_default_names(r0, modes).expect("valid model")
}
