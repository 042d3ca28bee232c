//! ABCD two-port chains of lumped elements and ideal lines, and the closed-form
//! partial-fraction model of a capacitor-terminated ideal line.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::netcore::{maxwell_to_mutual, Mode, ParamKind, RationalImpedance, SampledNetwork};
use crate::synthesis::synthesize_cascade;

pub type Abcd = Matrix2<C64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Element {
    SeriesCapacitor {
        c: f64,
    },
    /// Parallel combination of whichever of C, L, R are present, from the line to ground.
    ShuntBranch {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<f64>,
    },
    /// Ideal TEM line; `z0 = √(L/C)` when omitted.
    Tline {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z0: Option<f64>,
        l_per_m: f64,
        c_per_m: f64,
        length: f64,
    },
}

impl Element {
    pub fn shunt_capacitor(c: f64) -> Element {
        Element::ShuntBranch { c: Some(c), l: None, r: None }
    }

    pub fn tline(l_per_m: f64, c_per_m: f64, length: f64) -> Element {
        Element::Tline { z0: None, l_per_m, c_per_m, length }
    }

    fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{what} must be positive, got {v}")))
            }
        };
        match *self {
            Element::SeriesCapacitor { c } => positive("series capacitance", c),
            Element::ShuntBranch { c, l, r } => {
                if c.is_none() && l.is_none() && r.is_none() {
                    return Err(Error::Invalid("shunt branch has no elements".into()));
                }
                c.map_or(Ok(()), |v| positive("shunt capacitance", v))?;
                l.map_or(Ok(()), |v| positive("shunt inductance", v))?;
                r.map_or(Ok(()), |v| positive("shunt resistance", v))
            }
            Element::Tline { z0, l_per_m, c_per_m, length } => {
                positive("line inductance", l_per_m)?;
                positive("line capacitance", c_per_m)?;
                if !(length >= 0.0 && length.is_finite()) {
                    return Err(Error::Invalid(format!("line length must be non-negative, got {length}")));
                }
                if let Some(z) = z0 {
                    positive("line impedance", z)?;
                    let derived = (l_per_m / c_per_m).sqrt();
                    if (z - derived).abs() > 1e-6 * derived {
                        return Err(Error::Invalid(format!("z0 = {z} Ω disagrees with √(L/C) = {derived} Ω")));
                    }
                }
                Ok(())
            }
        }
    }

    /// ABCD matrix at angular frequency `w`.
    pub fn abcd(&self, w: f64) -> Abcd {
        let s = C64::new(0.0, w);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        match *self {
            Element::SeriesCapacitor { c } => Abcd::new(one, one / (s * c), zero, one),
            Element::ShuntBranch { c, l, r } => {
                let mut y = zero;
                if let Some(c) = c {
                    y += s * c;
                }
                if let Some(l) = l {
                    y += one / (s * l);
                }
                if let Some(r) = r {
                    y += C64::new(1.0 / r, 0.0);
                }
                Abcd::new(one, zero, y, one)
            }
            Element::Tline { l_per_m, c_per_m, length, .. } => {
                let z0 = (l_per_m / c_per_m).sqrt();
                let bl = w * (l_per_m * c_per_m).sqrt() * length;
                let (sn, cs) = bl.sin_cos();
                Abcd::new(
                    C64::new(cs, 0.0),
                    C64::new(0.0, z0 * sn),
                    C64::new(0.0, sn / z0),
                    C64::new(cs, 0.0),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPortChain {
    pub elements: Vec<Element>,
}

impl TwoPortChain {
    pub fn new(elements: Vec<Element>) -> Result<Self> {
        let chain = TwoPortChain { elements };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::Invalid("chain has no elements".into()));
        }
        self.elements.iter().try_for_each(Element::validate)
    }

    /// Ordered product of the element ABCD matrices.
    pub fn abcd(&self, w: f64) -> Abcd {
        self.elements.iter().fold(Abcd::identity(), |acc, e| acc * e.abcd(w))
    }
}

/// `chain.v1` file layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainJson {
    #[serde(default = "chain_schema")]
    pub schema: String,
    pub elements: Vec<Element>,
}

fn chain_schema() -> String {
    "chain.v1".into()
}

impl From<&TwoPortChain> for ChainJson {
    fn from(c: &TwoPortChain) -> Self {
        ChainJson { schema: chain_schema(), elements: c.elements.clone() }
    }
}

impl TryFrom<ChainJson> for TwoPortChain {
    type Error = Error;
    fn try_from(j: ChainJson) -> Result<Self> {
        if j.schema != chain_schema() {
            return Err(Error::Parse(format!("expected schema chain.v1, found `{}`", j.schema)));
        }
        TwoPortChain::new(j.elements)
    }
}

/// Z parameters of a two-port from its ABCD matrix; `None` when C = 0.
pub fn abcd_to_z(m: &Abcd) -> Option<CMat> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let scale = a.norm() + d.norm() + b.norm() * c.norm();
    if c.norm() == 0.0 || !(c.norm() > 1e-300 * scale) {
        return None;
    }
    let z = CMat::from_row_slice(2, 2, &[a / c, (a * d - b * c) / c, C64::new(1.0, 0.0) / c, d / c]);
    z.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(z)
}

/// S parameters directly from ABCD with uniform reference `z0`.
pub fn abcd_to_s(m: &Abcd, z0: f64) -> CMat {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let den = a + b / z0 + c * z0 + d;
    CMat::from_row_slice(
        2,
        2,
        &[
            (a + b / z0 - c * z0 - d) / den,
            C64::new(2.0, 0.0) * (a * d - b * c) / den,
            C64::new(2.0, 0.0) / den,
            (-a + b / z0 - c * z0 + d) / den,
        ],
    )
}

/// Z-parameter sweep of a chain at `freqs` (Hz).
pub fn sweep_chain(chain: &TwoPortChain, freqs: &[f64]) -> Result<SampledNetwork> {
    chain.validate()?;
    if let Some(f) = freqs.iter().find(|f| !(**f > 0.0)) {
        return Err(Error::Invalid(format!("sweep frequency {f} must be positive")));
    }
    let data = freqs
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            abcd_to_z(&chain.abcd(2.0 * PI * f)).ok_or(Error::SingularAt { what: "ABCD to Z conversion (C = 0)".into(), index: k })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut net =
        SampledNetwork::new(ParamKind::Z, freqs.to_vec(), data, vec![50.0; 2], vec!["P1".into(), "P2".into()])?;
    net.reciprocal = true;
    Ok(net)
}

/// S-parameter sweep through the direct ABCD→S route.
pub fn sweep_chain_s(chain: &TwoPortChain, freqs: &[f64], z0: f64) -> Result<SampledNetwork> {
    chain.validate()?;
    let data = freqs.iter().map(|&f| abcd_to_s(&chain.abcd(2.0 * PI * f), z0)).collect();
    SampledNetwork::new(ParamKind::S, freqs.to_vec(), data, vec![z0; 2], vec!["P1".into(), "P2".into()])
}

/// Ideal line of length ℓ between series capacitors `c1` and `c2`, truncated to K modes.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticTLModel {
    pub c1: f64,
    pub c2: f64,
    /// Total line capacitance ℓ·C.
    pub c_t: f64,
    /// ω_k = kπ/(ℓ√(LC)), k = 1..K.
    pub omegas: Vec<f64>,
}

impl AnalyticTLModel {
    pub fn new(c1: f64, c2: f64, l_per_m: f64, c_per_m: f64, length: f64, k: usize) -> Result<Self> {
        for (what, v) in [("c1", c1), ("c2", c2), ("L", l_per_m), ("C", c_per_m), ("length", length)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{what} must be positive, got {v}")));
            }
        }
        let delay = length * (l_per_m * c_per_m).sqrt();
        Ok(AnalyticTLModel {
            c1,
            c2,
            c_t: length * c_per_m,
            omegas: (1..=k).map(|k| k as f64 * PI / delay).collect(),
        })
    }

    pub fn truncated(&self, k: usize) -> AnalyticTLModel {
        AnalyticTLModel { omegas: self.omegas[..k.min(self.omegas.len())].to_vec(), ..self.clone() }
    }

    /// Matching series-capacitor / line / series-capacitor chain.
    pub fn chain(&self, l_per_m: f64, c_per_m: f64) -> TwoPortChain {
        TwoPortChain {
            elements: vec![
                Element::SeriesCapacitor { c: self.c1 },
                Element::tline(l_per_m, c_per_m, self.c_t / c_per_m),
                Element::SeriesCapacitor { c: self.c2 },
            ],
        }
    }
}

/// `R0 = [[1/C1 + 1/C_T, 1/C_T], [1/C_T, 1/C2 + 1/C_T]]`, rows `√(2/C_T)(1, (−1)^k)`.
pub fn analytic_tl_rational(model: &AnalyticTLModel) -> Result<RationalImpedance> {
    let it = 1.0 / model.c_t;
    let r0 = DMatrix::from_row_slice(2, 2, &[1.0 / model.c1 + it, it, it, 1.0 / model.c2 + it]);
    let amp = (2.0 * it).sqrt();
    let modes = model
        .omegas
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
            Mode { omega: w, r_row: DVector::from_vec(vec![amp, amp * sign]) }
        })
        .collect();
    RationalImpedance::new(vec!["P1".into(), "P2".into()], r0, modes)
}

/// Port-shunt (mutual-form) capacitances of the synthesized cascade for truncation
/// orders 1..=k_max, one `[port 1, port 2]` pair per order.
pub fn tl_cascade_divergence(model: &AnalyticTLModel, k_max: usize) -> Result<Vec<[f64; 2]>> {
    if k_max == 0 || k_max > model.omegas.len() {
        return Err(Error::Invalid(format!("k_max must be in 1..={}", model.omegas.len())));
    }
    (1..=k_max)
        .map(|k| {
            let casc = synthesize_cascade(&analytic_tl_rational(&model.truncated(k))?)?;
            let mutual = maxwell_to_mutual(&casc.capacitance)?;
            Ok([mutual.matrix[(0, 0)], mutual.matrix[(1, 1)]])
        })
        .collect()
}
