use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    S,
    Z,
    Y,
}

/// Frequency-sampled multiport parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledNetwork {
    pub kind: ParamKind,
    /// Hz, strictly increasing.
    pub freqs: Vec<f64>,
    pub data: Vec<CMat>,
    /// Reference impedance per port, Ω.
    pub z_ref: Vec<f64>,
    pub port_names: Vec<String>,
    pub reciprocal: bool,
}

impl SampledNetwork {
    pub fn new(kind: ParamKind, freqs: Vec<f64>, data: Vec<CMat>, z_ref: Vec<f64>, port_names: Vec<String>) -> Result<Self> {
        if freqs.len() != data.len() {
            return Err(Error::Shape(format!("{} frequencies but {} matrices", freqs.len(), data.len())));
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("frequencies must be strictly increasing".into()));
        }
        let n = port_names.len();
        if let Some((i, m)) = data.iter().enumerate().find(|(_, m)| m.nrows() != n || m.ncols() != n) {
            return Err(Error::Shape(format!("sample {i} is {}x{}, expected {n}x{n}", m.nrows(), m.ncols())));
        }
        if z_ref.len() != n {
            return Err(Error::Shape(format!("{} reference impedances for {n} ports", z_ref.len())));
        }
        Ok(SampledNetwork { kind, freqs, data, z_ref, port_names, reciprocal: false })
    }

    pub fn with_default_names(kind: ParamKind, freqs: Vec<f64>, data: Vec<CMat>, z0: f64) -> Result<Self> {
        let n = data.first().map(|m| m.nrows()).unwrap_or(0);
        let names = (1..=n).map(|i| format!("P{i}")).collect();
        Self::new(kind, freqs, data, vec![z0; n], names)
    }

    pub fn n_ports(&self) -> usize {
        self.port_names.len()
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn port_index(&self, name: &str) -> Result<usize> {
        self.port_names.iter().position(|n| n == name).ok_or_else(|| Error::unknown(name, &self.port_names))
    }

    /// Largest relative asymmetry over all samples.
    pub fn max_asymmetry(&self) -> f64 {
        self.data
            .iter()
            .map(|m| {
                let scale = m.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
                if scale == 0.0 {
                    0.0
                } else {
                    (m - m.transpose()).iter().fold(0.0_f64, |a, z| a.max(z.norm())) / scale
                }
            })
            .fold(0.0, f64::max)
    }

    /// Checks reciprocity when the `reciprocal` flag is set.
    pub fn validate(&self) -> Result<()> {
        if self.reciprocal && self.max_asymmetry() > 1e-9 {
            return Err(Error::Invalid("network flagged reciprocal but data are not symmetric".into()));
        }
        Ok(())
    }

    pub fn uniform_z0(&self) -> Result<f64> {
        let z0 = *self.z_ref.first().ok_or_else(|| Error::Invalid("network has no ports".into()))?;
        if self.z_ref.iter().any(|&z| (z - z0).abs() > 1e-12 * z0.abs()) {
            return Err(Error::Invalid("S/Z conversion needs a uniform reference impedance".into()));
        }
        Ok(z0)
    }

    /// Keep only the samples whose frequency lies in `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> SampledNetwork {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.freqs[i] >= lo && self.freqs[i] <= hi).collect();
        SampledNetwork {
            kind: self.kind,
            freqs: keep.iter().map(|&i| self.freqs[i]).collect(),
            data: keep.iter().map(|&i| self.data[i].clone()).collect(),
            z_ref: self.z_ref.clone(),
            port_names: self.port_names.clone(),
            reciprocal: self.reciprocal,
        }
    }

    /// Block-diagonal embedding of disjoint networks sampled on a common grid.
    pub fn block_diag(nets: &[&SampledNetwork]) -> Result<SampledNetwork> {
        let first = nets.first().ok_or_else(|| Error::Invalid("no networks to combine".into()))?;
        let n: usize = nets.iter().map(|s| s.n_ports()).sum();
        for s in nets {
            if s.kind != first.kind || s.freqs != first.freqs {
                return Err(Error::Invalid("networks must share kind and frequency grid".into()));
            }
        }
        let mut data = Vec::with_capacity(first.len());
        for f in 0..first.len() {
            let mut m = CMat::zeros(n, n);
            let mut off = 0;
            for s in nets {
                let k = s.n_ports();
                m.view_mut((off, off), (k, k)).copy_from(&s.data[f]);
                off += k;
            }
            data.push(m);
        }
        let mut out = SampledNetwork::new(
            first.kind,
            first.freqs.clone(),
            data,
            nets.iter().flat_map(|s| s.z_ref.iter().cloned()).collect(),
            nets.iter().flat_map(|s| s.port_names.iter().cloned()).collect(),
        )?;
        out.reciprocal = nets.iter().all(|s| s.reciprocal);
        Ok(out)
    }
}

fn expect_kind(net: &SampledNetwork, kind: ParamKind) -> Result<()> {
    if net.kind != kind {
        return Err(Error::Invalid(format!("expected {kind:?} parameters, got {:?}", net.kind)));
    }
    Ok(())
}

fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// S = (Z + Z0)⁻¹ (Z − Z0) for a single matrix.
pub fn z_to_s_matrix(z: &CMat, z0: f64) -> Option<CMat> {
    let i = identity(z.nrows()) * C64::new(z0, 0.0);
    linalg::checked_inverse(&(z + &i)).map(|inv| inv * (z - i))
}

/// Z = Z0 (I − S)⁻¹ (I + S) for a single matrix.
pub fn s_to_z_matrix(s: &CMat, z0: f64) -> Option<CMat> {
    let i = identity(s.nrows());
    linalg::checked_inverse(&(&i - s)).map(|inv| inv * (i + s) * C64::new(z0, 0.0))
}

pub fn z_to_s(z: &SampledNetwork, z0: f64) -> Result<SampledNetwork> {
    expect_kind(z, ParamKind::Z)?;
    if !(z0 > 0.0) {
        return Err(Error::Invalid("reference impedance must be positive".into()));
    }
    let data = z
        .data
        .iter()
        .enumerate()
        .map(|(k, m)| z_to_s_matrix(m, z0).ok_or(Error::SingularAt { what: "Z + Z0·I".into(), index: k }))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampledNetwork { kind: ParamKind::S, data, z_ref: vec![z0; z.n_ports()], ..z.clone() })
}

pub fn s_to_z(s: &SampledNetwork, z0: f64) -> Result<SampledNetwork> {
    expect_kind(s, ParamKind::S)?;
    if !(z0 > 0.0) {
        return Err(Error::Invalid("reference impedance must be positive".into()));
    }
    let data = s
        .data
        .iter()
        .enumerate()
        .map(|(k, m)| s_to_z_matrix(m, z0).ok_or(Error::SingularAt { what: "I − S".into(), index: k }))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampledNetwork { kind: ParamKind::Z, data, z_ref: vec![z0; s.n_ports()], ..s.clone() })
}

fn invert_all(net: &SampledNetwork, what: &str, kind: ParamKind) -> Result<SampledNetwork> {
    let data = net
        .data
        .iter()
        .enumerate()
        .map(|(k, m)| linalg::checked_inverse(m).ok_or(Error::SingularAt { what: what.into(), index: k }))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampledNetwork { kind, data, ..net.clone() })
}

pub fn z_to_y(z: &SampledNetwork) -> Result<SampledNetwork> {
    expect_kind(z, ParamKind::Z)?;
    invert_all(z, "Z", ParamKind::Y)
}

pub fn y_to_z(y: &SampledNetwork) -> Result<SampledNetwork> {
    expect_kind(y, ParamKind::Y)?;
    invert_all(y, "Y", ParamKind::Z)
}

/// Converts any parameter kind to Z (S needs the network's uniform reference impedance).
pub fn to_z(net: &SampledNetwork) -> Result<SampledNetwork> {
    match net.kind {
        ParamKind::Z => Ok(net.clone()),
        ParamKind::Y => y_to_z(net),
        ParamKind::S => s_to_z(net, net.uniform_z0()?),
    }
}

/// Converts any parameter kind to S with reference impedance `z0`.
pub fn to_s(net: &SampledNetwork, z0: f64) -> Result<SampledNetwork> {
    match net.kind {
        ParamKind::S if (net.uniform_z0()? - z0).abs() <= 1e-12 * z0 => Ok(net.clone()),
        _ => z_to_s(&to_z(net)?, z0),
    }
}

/// Real-valued helper used by tests: Re/Im split of a complex matrix.
pub fn split_re_im(m: &CMat) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_port(values: &[C64], kind: ParamKind) -> SampledNetwork {
        let freqs = (1..=values.len()).map(|k| k as f64 * 1e9).collect();
        let data = values.iter().map(|&v| CMat::from_element(1, 1, v)).collect();
        SampledNetwork::with_default_names(kind, freqs, data, 50.0).unwrap()
    }

    #[test]
    fn matched_load_reflects_nothing() {
        let z = one_port(&[C64::new(50.0, 0.0); 3], ParamKind::Z);
        let s = z_to_s(&z, 50.0).unwrap();
        assert!(s.data.iter().all(|m| m[(0, 0)].norm() < 1e-15));
    }

    #[test]
    fn reactive_load_reflects_fully() {
        let z = one_port(&[C64::new(0.0, 37.0)], ParamKind::Z);
        let s = z_to_s(&z, 50.0).unwrap();
        assert!((s.data[0][(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn s_zero_is_reference_impedance() {
        let s = one_port(&[C64::new(0.0, 0.0)], ParamKind::S);
        let z = s_to_z(&s, 50.0).unwrap();
        assert!((z.data[0][(0, 0)] - C64::new(50.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn s_minus_one_is_short() {
        let s = one_port(&[C64::new(-1.0, 0.0)], ParamKind::S);
        let z = s_to_z(&s, 50.0).unwrap();
        assert!(z.data[0][(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn s_plus_one_is_flagged() {
        let s = one_port(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], ParamKind::S);
        match s_to_z(&s, 50.0) {
            Err(Error::SingularAt { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn diagonal_z_inverts_elementwise() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(2.0, 1.0), C64::new(0.0, -4.0)]));
        let z = SampledNetwork::with_default_names(ParamKind::Z, vec![1e9], vec![m.clone()], 50.0).unwrap();
        let y = z_to_y(&z).unwrap();
        assert!((y.data[0][(0, 0)] - C64::new(1.0, 0.0) / m[(0, 0)]).norm() < 1e-15);
        assert!((y.data[0][(1, 1)] - C64::new(1.0, 0.0) / m[(1, 1)]).norm() < 1e-15);
        assert!((&y.data[0] * &m - CMat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        let r = SampledNetwork::new(ParamKind::Z, vec![1.0, 2.0], vec![CMat::zeros(2, 2)], vec![50.0; 2], vec!["a".into(), "b".into()]);
        assert!(matches!(r, Err(Error::Shape(_))));
        let r = SampledNetwork::new(ParamKind::Z, vec![2.0, 1.0], vec![CMat::zeros(1, 1); 2], vec![50.0], vec!["a".into()]);
        assert!(matches!(r, Err(Error::Invalid(_))));
    }

    #[test]
    fn reciprocal_flag_is_checked() {
        let m = CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0), C64::new(1.0, 0.0)]);
        let mut z = SampledNetwork::with_default_names(ParamKind::Z, vec![1e9], vec![m], 50.0).unwrap();
        assert!(z.validate().is_ok());
        z.reciprocal = true;
        assert!(z.validate().is_err());
    }

    fn passive_s(vals: &[f64]) -> CMat {
        // Random contraction: scale a random complex matrix below unit norm.
        let m = CMat::from_fn(3, 3, |i, j| C64::new(vals[3 * i + j], vals[9 + 3 * i + j]));
        let norm = m.clone().svd(false, false).singular_values.max();
        if norm > 0.0 {
            m * C64::new(0.9 / norm, 0.0)
        } else {
            m
        }
    }

    proptest! {
        #[test]
        fn s_z_roundtrip(vals in proptest::collection::vec(-1.0f64..1.0, 18)) {
            let s = passive_s(&vals);
            let i_minus_s = CMat::identity(3, 3) - &s;
            let sv = i_minus_s.svd(false, false).singular_values;
            prop_assume!(sv.max() / sv.min() < 1e8);
            let net = SampledNetwork::with_default_names(ParamKind::S, vec![1e9], vec![s.clone()], 50.0).unwrap();
            let back = z_to_s(&s_to_z(&net, 50.0).unwrap(), 50.0).unwrap();
            prop_assert!((&back.data[0] - &s).norm() <= 1e-10 * s.norm().max(1.0));
        }
    }
}
