//! Complex poles and relaxation-time estimates of a resistor-loaded network whose
//! junctions are replaced by linear inductors.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::netcore::{maxwell_to_mutual, ParamKind, RationalImpedance, SampledNetwork};
use crate::qham::HamiltonianParams;
use crate::synthesis::{synthesize_cascade, CLCascade};

/// Share of the capacitance-weighted flux norm above which a mode belongs to a junction.
pub const JUNCTION_SHARE: f64 = 0.5;
/// Successive-overlap level below which a tracked mode is marked discontinuous.
pub const TRACK_OVERLAP: f64 = 0.5;
/// Second-best overlap within this margin of the best makes an assignment ambiguous.
pub const TRACK_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPort {
    pub port_name: String,
    /// Ω.
    pub resistance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionInductor {
    pub port_name: String,
    /// H.
    pub l_j: f64,
}

/// `loss_spec.v1`. Ports named nowhere are left open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    #[serde(default = "loss_schema")]
    pub schema: String,
    #[serde(default)]
    pub external_ports: Vec<ExternalPort>,
    #[serde(default)]
    pub junction_ports: Vec<JunctionInductor>,
}

fn loss_schema() -> String {
    "loss_spec.v1".into()
}

impl LossSpec {
    pub fn new(junctions: &[(&str, f64)], externals: &[(&str, f64)]) -> Self {
        LossSpec {
            schema: loss_schema(),
            external_ports: externals.iter().map(|&(p, r)| ExternalPort { port_name: p.into(), resistance: r }).collect(),
            junction_ports: junctions.iter().map(|&(p, l)| JunctionInductor { port_name: p.into(), l_j: l }).collect(),
        }
    }

    pub fn junction_names(&self) -> Vec<String> {
        self.junction_ports.iter().map(|j| j.port_name.clone()).collect()
    }

    /// Copy with the inductance at `port` replaced.
    pub fn with_inductance(&self, port: &str, l_j: f64) -> Result<LossSpec> {
        let mut out = self.clone();
        match out.junction_ports.iter_mut().find(|j| j.port_name == port) {
            Some(j) => j.l_j = l_j,
            None => return Err(Error::unknown(port, &self.junction_names())),
        }
        Ok(out)
    }

    pub fn validate(&self, ports: &[String]) -> Result<()> {
        if self.schema != "loss_spec.v1" {
            return Err(Error::Invalid(format!("unsupported schema `{}`", self.schema)));
        }
        let mut seen: Vec<&String> = Vec::new();
        let named = self
            .junction_ports
            .iter()
            .map(|j| (&j.port_name, j.l_j, "inductance"))
            .chain(self.external_ports.iter().map(|e| (&e.port_name, e.resistance, "resistance")));
        for (name, v, what) in named {
            if !ports.contains(name) {
                return Err(Error::unknown(name, ports));
            }
            if seen.contains(&name) {
                return Err(Error::Invalid(format!("port `{name}` appears twice in the loss spec")));
            }
            seen.push(name);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!("{what} {v} at `{name}` must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Junction,
    External,
    Resonator,
}

/// Reduced network over junction, external and resonator branches.
#[derive(Debug, Clone)]
struct Branches {
    names: Vec<String>,
    kinds: Vec<Kind>,
    c: DMatrix<f64>,
    /// Inverse inductance per branch.
    m: DVector<f64>,
    /// Conductance per branch.
    g: DVector<f64>,
}

fn branches(c: &CLCascade, loss: &LossSpec) -> Result<Branches> {
    let ports = c.port_names().to_vec();
    loss.validate(&ports)?;
    let names_all = &c.capacitance.node_names;
    let pos = |p: &str| names_all.iter().position(|n| n == p).unwrap();
    let mut keep = Vec::new();
    let mut names = Vec::new();
    let mut kinds = Vec::new();
    let mut m = Vec::new();
    let mut g = Vec::new();
    for j in &loss.junction_ports {
        keep.push(pos(&j.port_name));
        names.push(j.port_name.clone());
        kinds.push(Kind::Junction);
        m.push(1.0 / j.l_j);
        g.push(0.0);
    }
    for e in &loss.external_ports {
        keep.push(pos(&e.port_name));
        names.push(e.port_name.clone());
        kinds.push(Kind::External);
        m.push(0.0);
        g.push(1.0 / e.resistance);
    }
    for (k, l) in c.shunt_inductors.iter().enumerate() {
        keep.push(c.n_ports + k);
        names.push(names_all[c.n_ports + k].clone());
        kinds.push(Kind::Resonator);
        m.push(1.0 / l);
        g.push(0.0);
    }
    // open ports carry no charge: drop them from C⁻¹ and invert back
    let cmat = if keep.len() == names_all.len() {
        linalg::select(&c.capacitance.matrix, &keep, &keep)
    } else {
        let inv = linalg::spd_inverse(&c.capacitance.matrix, "cascade capacitance")?;
        linalg::spd_inverse(&linalg::select(&inv, &keep, &keep), "reduced inverse capacitance")?
    };
    Ok(Branches { names, kinds, c: cmat, m: DVector::from_vec(m), g: DVector::from_vec(g) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossyMode {
    /// rad/s, upper half plane; the conjugate is implied.
    pub pole: C64,
    /// rad/s.
    pub omega: f64,
    /// 1/s, −2 Re(pole).
    pub kappa: f64,
    /// Φ†GΦ / Φ†CΦ from the eigenvector.
    pub kappa_sum_rule: f64,
    pub attribution: String,
    /// Fraction of Φ†diag(C)Φ on the attributed branch.
    pub share: f64,
    /// Branch fluxes, normalized to Φ†CΦ = 1.
    pub flux: DVector<C64>,
    /// Cholesky coordinates LᵀΦ, unit norm.
    coords: DVector<C64>,
    pub track: usize,
    pub discontinuity: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossyModeSet {
    pub branch_names: Vec<String>,
    /// Ascending in ω.
    pub modes: Vec<LossyMode>,
}

impl LossyModeSet {
    /// Conjugate-closed pole list.
    pub fn poles(&self) -> Vec<C64> {
        self.modes.iter().flat_map(|m| [m.pole, m.pole.conj()]).collect()
    }

    /// The mode attributed to `branch` with the largest share.
    pub fn mode_of(&self, branch: &str) -> Option<&LossyMode> {
        self.modes
            .iter()
            .filter(|m| m.attribution == branch)
            .max_by(|a, b| a.share.total_cmp(&b.share))
    }
}

fn solve(b: &Branches) -> Result<LossyModeSet> {
    let d = b.names.len();
    let chol = b.c.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite {
        what: "branch capacitance".into(),
        min_eigenvalue: linalg::min_eigenvalue(&b.c),
    })?;
    let l = chol.l();
    let l_inv = l.solve_lower_triangular(&DMatrix::identity(d, d)).ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let k = linalg::symmetrize(&(&l_inv * DMatrix::from_diagonal(&b.m) * l_inv.transpose()));
    let gam = linalg::symmetrize(&(&l_inv * DMatrix::from_diagonal(&b.g) * l_inv.transpose()));
    let w0 = (0..d).map(|i| k[(i, i)]).fold(0.0, f64::max).sqrt();
    if !(w0 > 0.0) {
        return Ok(LossyModeSet { branch_names: b.names.clone(), modes: Vec::new() });
    }
    // first-order form in σ = s/ω0
    let mut a = DMatrix::zeros(2 * d, 2 * d);
    a.view_mut((0, d), (d, d)).fill_with_identity();
    a.view_mut((d, 0), (d, d)).copy_from(&(-&k / (w0 * w0)));
    a.view_mut((d, d), (d, d)).copy_from(&(-&gam / w0));
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let eig = schur.complex_eigenvalues();
    let mut sig: Vec<C64> = eig.iter().cloned().filter(|z| z.norm() > 1e-8 && z.im > 1e-3 * z.norm()).collect();
    sig.sort_by(|x, y| x.im.total_cmp(&y.im));
    for w in sig.windows(2) {
        if (w[1] - w[0]).norm() < 1e-9 * w[1].norm() {
            log::warn!("nearly defective pole pair at σ = {}; eigenvectors span an invariant subspace", w[0]);
        }
    }
    let expected = b.m.iter().filter(|v| **v > 0.0).count();
    if sig.len() != expected {
        log::warn!("{} oscillating modes for {expected} inductive branches (overdamped modes are excluded)", sig.len());
    }
    let ac = linalg::to_complex(&a);
    let lt_inv = l_inv.transpose();
    let cdiag = DVector::from_fn(d, |i, _| b.c[(i, i)]);
    let mut modes = Vec::with_capacity(sig.len());
    for s in sig {
        let mut shifted = ac.clone();
        for i in 0..2 * d {
            shifted[(i, i)] -= s;
        }
        let v = linalg::null_vector(&shifted);
        let mut x: DVector<C64> = v.rows(0, d).into_owned();
        let xn = x.norm();
        if xn == 0.0 {
            return Err(Error::Numerical(format!("zero flux eigenvector at σ = {s}")));
        }
        x /= C64::new(xn, 0.0);
        let flux = linalg::to_complex(&lt_inv) * &x;
        let pole = s * w0;
        let kappa_sum_rule: f64 = (0..d).map(|i| b.g[i] * flux[i].norm_sqr()).sum();
        let weights: Vec<f64> = (0..d).map(|i| cdiag[i] * flux[i].norm_sqr()).collect();
        let total: f64 = weights.iter().sum();
        let (attribution, share) = attribute(b, &weights, total);
        modes.push(LossyMode {
            pole,
            omega: pole.im,
            kappa: -2.0 * pole.re,
            kappa_sum_rule,
            attribution,
            share,
            flux,
            coords: x,
            track: 0,
            discontinuity: false,
        });
    }
    for (i, md) in modes.iter_mut().enumerate() {
        md.track = i;
    }
    Ok(LossyModeSet { branch_names: b.names.clone(), modes })
}

fn attribute(b: &Branches, w: &[f64], total: f64) -> (String, f64) {
    let best = |kind: Option<Kind>| {
        (0..w.len())
            .filter(|&i| kind.is_none_or(|k| b.kinds[i] == k))
            .max_by(|&i, &j| w[i].total_cmp(&w[j]))
    };
    if let Some(j) = best(Some(Kind::Junction)) {
        if w[j] > JUNCTION_SHARE * total {
            return (b.names[j].clone(), w[j] / total);
        }
    }
    let i = best(Some(Kind::Resonator)).or_else(|| best(None)).expect("nonempty network");
    (b.names[i].clone(), w[i] / total)
}

/// Poles of `C Φ̈ + G Φ̇ + M Φ = 0` from the first-order system `[[0, I], [−C⁻¹M, −C⁻¹G]]`.
pub fn lossy_mode_poles(c: &CLCascade, loss: &LossSpec) -> Result<LossyModeSet> {
    solve(&branches(c, loss)?)
}

pub fn lossy_mode_poles_rational(z: &RationalImpedance, loss: &LossSpec) -> Result<LossyModeSet> {
    lossy_mode_poles(&synthesize_cascade(z)?, loss)
}

/// Junction-port admittance of the loaded network, with every other node eliminated.
pub fn lossy_port_admittance(c: &CLCascade, loss: &LossSpec, omit_junction_inductors: bool, freqs: &[f64]) -> Result<SampledNetwork> {
    let b = branches(c, loss)?;
    let nj = loss.junction_ports.len();
    if nj == 0 {
        return Err(Error::Invalid("admittance needs at least one junction port".into()));
    }
    let m = DVector::from_fn(b.m.len(), |i, _| if omit_junction_inductors && b.kinds[i] == Kind::Junction { 0.0 } else { b.m[i] });
    let d = b.names.len();
    let scale = DVector::from_fn(d, |i, _| 1.0 / b.c[(i, i)].sqrt());
    let jj: Vec<usize> = (0..nj).collect();
    let ii: Vec<usize> = (nj..d).collect();
    let mut data = Vec::with_capacity(freqs.len());
    for (idx, &f) in freqs.iter().enumerate() {
        if !(f > 0.0) {
            return Err(Error::Invalid(format!("admittance frequency {f} must be positive")));
        }
        let w = 2.0 * PI * f;
        let y = CMat::from_fn(d, d, |i, j| {
            let mut v = C64::new(0.0, w * b.c[(i, j)]);
            if i == j {
                v += C64::new(b.g[i], -m[i] / w);
            }
            v * (scale[i] * scale[j])
        });
        let yj = if ii.is_empty() {
            y
        } else {
            let inv = linalg::checked_inverse(&linalg::select(&y, &ii, &ii)).ok_or(Error::SingularAt { what: "internal admittance block".into(), index: idx })?;
            linalg::select(&y, &jj, &jj) - linalg::select(&y, &jj, &ii) * inv * linalg::select(&y, &ii, &jj)
        };
        data.push(CMat::from_fn(nj, nj, |i, j| yj[(i, j)] / (scale[i] * scale[j])));
    }
    SampledNetwork::new(ParamKind::Y, freqs.to_vec(), data, vec![50.0; nj], loss.junction_names())
}

pub fn lossy_port_admittance_rational(z: &RationalImpedance, loss: &LossSpec, omit_junction_inductors: bool, freqs: &[f64]) -> Result<SampledNetwork> {
    lossy_port_admittance(&synthesize_cascade(z)?, loss, omit_junction_inductors, freqs)
}

/// `1/(Y⁻¹)_ii`: the admittance seen at port `i` with the other ports open.
pub fn driving_point(y: &CMat, i: usize) -> Option<C64> {
    if y.nrows() == 1 {
        return Some(y[(0, 0)]);
    }
    let z = y.clone().lu().try_inverse()?;
    Some(C64::new(1.0, 0.0) / z[(i, i)])
}

/// `T1 = C / Re y(ω)` with `y` the driving-point admittance, linearly interpolated in Re.
pub fn t1_at(y: &SampledNetwork, port: &str, omega: f64, cap: f64) -> Result<f64> {
    if y.kind != ParamKind::Y {
        return Err(Error::Invalid(format!("T1 needs Y data, got {:?}", y.kind)));
    }
    let p = y.port_index(port)?;
    let f = omega / (2.0 * PI);
    let re = |k: usize| driving_point(&y.data[k], p).map(|v| v.re).ok_or(Error::SingularAt { what: "port admittance".into(), index: k });
    let n = y.freqs.len();
    let val = if n == 1 && y.freqs[0] == f {
        re(0)?
    } else {
        let k = y.freqs.windows(2).position(|w| w[0] <= f && f <= w[1]).ok_or_else(|| {
            Error::Invalid(format!("{f:e} Hz lies outside the admittance grid"))
        })?;
        let t = (f - y.freqs[k]) / (y.freqs[k + 1] - y.freqs[k]);
        (1.0 - t) * re(k)? + t * re(k + 1)?
    };
    if !(val > 0.0) {
        return Err(Error::Numerical(format!("nonphysical admittance Re Y = {val:e} S at `{port}`, {f:e} Hz")));
    }
    Ok(cap / val)
}

/// T1 per qubit of `hp` at its bare frequency, using `caps` (C̃ or the plain shunt capacitance).
pub fn t1_estimates(hp: &HamiltonianParams, y: &SampledNetwork, caps: &[f64]) -> Result<Vec<f64>> {
    if caps.len() != hp.n_qubits() {
        return Err(Error::Shape(format!("{} capacitances for {} qubits", caps.len(), hp.n_qubits())));
    }
    hp.qubit_names.iter().zip(hp.omega_j.iter()).zip(caps).map(|((q, &w), &c)| t1_at(y, q, w, c)).collect()
}

/// `1/(C⁻¹)_ii` per junction port, with every non-junction port dropped as open.
pub fn effective_capacitance(c: &CLCascade, loss: &LossSpec) -> Result<Vec<f64>> {
    loss.validate(c.port_names())?;
    let inv = linalg::spd_inverse(&c.capacitance.matrix, "cascade capacitance")?;
    let nodes = &c.capacitance.node_names;
    let keep: Vec<usize> = loss
        .junction_ports
        .iter()
        .map(|j| nodes.iter().position(|n| n == &j.port_name).unwrap())
        .chain(c.n_ports..nodes.len())
        .collect();
    let reduced = linalg::select(&inv, &keep, &keep);
    Ok((0..loss.junction_ports.len()).map(|i| 1.0 / reduced[(i, i)]).collect())
}

/// Ground capacitance of each junction port.
pub fn shunt_capacitance(c: &CLCascade, loss: &LossSpec) -> Result<Vec<f64>> {
    loss.validate(c.port_names())?;
    let mutual = maxwell_to_mutual(&c.capacitance)?;
    Ok(loss.junction_ports.iter().map(|j| {
        let i = c.capacitance.node_names.iter().position(|n| n == &j.port_name).unwrap();
        mutual.matrix[(i, i)]
    }).collect())
}

/// Impedance of the cascade ports with junction ports shunted by their inductors and
/// external ports by their resistors, evaluated at complex `s`.
pub fn shunted_impedance(z: &RationalImpedance, loss: &LossSpec, s: C64) -> Result<CMat> {
    loss.validate(&z.port_names)?;
    let n = z.n_ports();
    let zs = z.eval(s)?;
    let mut y = zs.lu().try_inverse().ok_or_else(|| Error::Numerical(format!("singular impedance at s = {s}")))?;
    for j in &loss.junction_ports {
        let i = z.port_index(&j.port_name)?;
        y[(i, i)] += C64::new(1.0, 0.0) / (s * j.l_j);
    }
    for e in &loss.external_ports {
        let i = z.port_index(&e.port_name)?;
        y[(i, i)] += C64::new(1.0 / e.resistance, 0.0);
    }
    let out = y.lu().try_inverse().ok_or_else(|| Error::Numerical(format!("shunted network singular at s = {s}")))?;
    debug_assert_eq!(out.nrows(), n);
    Ok(out)
}

/// Location of the largest `‖Z‖_F` of the shunted impedance on an `n × n` grid of
/// complex frequencies spanning `center ± half_width` in both directions, with the
/// grid spacing.
pub fn impedance_peak(z: &RationalImpedance, loss: &LossSpec, center: C64, half_width: f64, n: usize) -> Result<(C64, f64)> {
    if n < 2 || !(half_width > 0.0) {
        return Err(Error::Invalid("grid needs n ≥ 2 and a positive width".into()));
    }
    let h = 2.0 * half_width / (n - 1) as f64;
    let mut best = (center, f64::NEG_INFINITY);
    for a in 0..n {
        for b in 0..n {
            let s = center + C64::new(-half_width + a as f64 * h, -half_width + b as f64 * h);
            let v = shunted_impedance(z, loss, s)?.norm();
            if v > best.1 {
                best = (s, v);
            }
        }
    }
    Ok((best.0, h))
}

fn overlap(a: &LossyMode, b: &LossyMode) -> f64 {
    a.coords.dotc(&b.coords).norm()
}

/// Relabel `cur` so track ids follow maximal overlap with `prev`.
pub fn track_modes(prev: &LossyModeSet, cur: &mut LossyModeSet) {
    let mut pairs = Vec::new();
    for (i, p) in prev.modes.iter().enumerate() {
        for (j, c) in cur.modes.iter().enumerate() {
            pairs.push((overlap(p, c), i, j));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_p = vec![false; prev.modes.len()];
    let mut assigned: Vec<Option<(usize, f64)>> = vec![None; cur.modes.len()];
    for &(o, i, j) in &pairs {
        if !used_p[i] && assigned[j].is_none() {
            used_p[i] = true;
            assigned[j] = Some((i, o));
        }
    }
    let mut next = prev.modes.iter().map(|m| m.track + 1).max().unwrap_or(0);
    for (j, a) in assigned.into_iter().enumerate() {
        match a {
            Some((i, o)) => {
                let runner_up = prev
                    .modes
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i)
                    .map(|(_, p)| overlap(p, &cur.modes[j]))
                    .fold(0.0, f64::max);
                cur.modes[j].track = prev.modes[i].track;
                cur.modes[j].discontinuity = o < TRACK_OVERLAP || runner_up > o - TRACK_MARGIN;
            }
            None => {
                cur.modes[j].track = next;
                cur.modes[j].discontinuity = true;
                next += 1;
            }
        }
    }
}

/// Poles at each junction inductance value, computed concurrently, then tracked.
pub fn sweep_junction_inductance(c: &CLCascade, loss: &LossSpec, port: &str, l_values: &[f64]) -> Result<Vec<LossyModeSet>> {
    loss.validate(c.port_names())?;
    loss.with_inductance(port, 1.0)?;
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(l_values.len().max(1));
    let chunk = l_values.len().div_ceil(workers.max(1)).max(1);
    let mut results: Vec<Result<LossyModeSet>> = Vec::with_capacity(l_values.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = l_values
            .chunks(chunk)
            .map(|ls| scope.spawn(move || ls.iter().map(|&l| lossy_mode_poles(c, &loss.with_inductance(port, l)?)).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            results.extend(h.join().expect("sweep worker panicked"));
        }
    });
    let mut sets = results.into_iter().collect::<Result<Vec<_>>>()?;
    for k in 1..sets.len() {
        let (head, tail) = sets.split_at_mut(k);
        track_modes(&head[k - 1], &mut tail[0]);
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::netcore::MaxwellCapacitance;
    use crate::synthesis::cascade_to_rational;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FF: f64 = 1e-15;
    const NH: f64 = 1e-9;

    fn single(c: f64, l: f64, r: f64) -> Branches {
        Branches {
            names: vec!["J".into()],
            kinds: vec![Kind::Junction],
            c: DMatrix::from_element(1, 1, c),
            m: DVector::from_element(1, 1.0 / l),
            g: DVector::from_element(1, 1.0 / r),
        }
    }

    #[test]
    fn parallel_rlc_closed_form() {
        let (c, l, r) = (80.0 * FF, 12.0 * NH, 2e4);
        let set = solve(&single(c, l, r)).unwrap();
        assert_eq!(set.modes.len(), 1);
        let s = set.modes[0].pole;
        let re = -1.0 / (2.0 * r * c);
        let im = (1.0 / (l * c) - re * re).sqrt();
        assert!((s.re / re - 1.0).abs() < 1e-9, "{} vs {re}", s.re);
        assert!((s.im / im - 1.0).abs() < 1e-12);
        assert_eq!(set.poles().len(), 2);
        assert_eq!(set.modes[0].attribution, "J");
    }

    #[test]
    fn lossless_limit_matches_cascade_frequencies() {
        let c = fixtures::decay_circuit();
        let (l1, l2) = (18.0 * NH, 15.5 * NH);
        let set = lossy_mode_poles(&c, &LossSpec::new(&[("J1", l1), ("J2", l2)], &[])).unwrap();
        // the junctions become inductively shunted nodes of a plain cascade
        let order = [2, 3, 4, 5, 0, 1, 6, 7, 8];
        let names: Vec<String> = order.iter().map(|&i| c.capacitance.node_names[i].clone()).collect();
        let m = linalg::select(&c.capacitance.matrix, &order, &order);
        let ind = DVector::from_row_slice(&[l1, l2, 2.1 * NH, 3.25 * NH, 1.6 * NH]);
        let oracle = CLCascade::new(MaxwellCapacitance::new(m, names).unwrap(), 4, ind).unwrap();
        let (_, t) = cascade_to_rational(&oracle).unwrap();
        assert_eq!(set.modes.len(), 5);
        for (md, w) in set.modes.iter().zip(t.omega.iter()) {
            assert!((md.omega / w - 1.0).abs() < 1e-10, "{} vs {w}", md.omega);
            assert!(md.kappa.abs() < 1e-9 * w);
        }
        let weak = lossy_mode_poles(&c, &LossSpec::new(&[("J1", l1), ("J2", l2)], &[("RO1", 1e12), ("RO2", 1e12)])).unwrap();
        for (md, w) in weak.modes.iter().zip(t.omega.iter()) {
            assert!((md.omega / w - 1.0).abs() < 1e-6);
            assert!(md.kappa > 0.0);
        }
    }

    #[test]
    fn decay_circuit_modes_and_sum_rule() {
        let set = lossy_mode_poles(&fixtures::decay_circuit(), &fixtures::decay_loss(18.0 * NH, 15.5 * NH)).unwrap();
        assert_eq!(set.modes.len(), 5);
        assert_eq!(set.poles().len(), 10);
        for b in ["J1", "J2", "R1", "RC", "R2"] {
            assert!(set.modes.iter().any(|m| m.attribution == b), "no mode for {b}: {:?}", set.modes.iter().map(|m| &m.attribution).collect::<Vec<_>>());
        }
        for m in &set.modes {
            assert!(m.kappa > 0.0);
            assert!((m.kappa_sum_rule / m.kappa - 1.0).abs() < 1e-6, "{} vs {}", m.kappa_sum_rule, m.kappa);
        }
    }

    #[test]
    fn rational_route_agrees() {
        let c = fixtures::decay_circuit();
        let loss = fixtures::decay_loss(18.0 * NH, 15.5 * NH);
        let (z, _) = cascade_to_rational(&c).unwrap();
        let a = lossy_mode_poles(&c, &loss).unwrap();
        let b = lossy_mode_poles_rational(&z, &loss).unwrap();
        for (x, y) in a.modes.iter().zip(&b.modes) {
            assert!((x.omega / y.omega - 1.0).abs() < 1e-9);
            assert!((x.kappa / y.kappa - 1.0).abs() < 1e-5, "{} vs {}", x.kappa, y.kappa);
        }
        let j1 = |s: &LossyModeSet| s.mode_of("J1").map(|m| m.omega);
        assert_eq!(j1(&a).is_some(), j1(&b).is_some());
    }

    #[test]
    fn pole_is_impedance_peak() {
        let c = fixtures::decay_circuit();
        let loss = fixtures::decay_loss(18.0 * NH, 15.5 * NH);
        let set = lossy_mode_poles(&c, &loss).unwrap();
        let (z, _) = cascade_to_rational(&c).unwrap();
        let m = set.mode_of("J1").unwrap();
        let (peak, h) = impedance_peak(&z, &loss, m.pole, 5.0 * m.kappa, 40).unwrap();
        assert!((peak.re - m.pole.re).abs() <= h && (peak.im - m.pole.im).abs() <= h);
    }

    #[test]
    fn admittance_is_symmetric_and_rc_divider_is_lossy() {
        let c = fixtures::decay_circuit();
        let loss = fixtures::decay_loss(18.0 * NH, 15.5 * NH);
        let freqs: Vec<f64> = (1..40).map(|k| k as f64 * 0.2e9).collect();
        let y = lossy_port_admittance(&c, &loss, false, &freqs).unwrap();
        assert_eq!(y.kind, ParamKind::Y);
        for m in &y.data {
            assert!((m - m.transpose()).norm() <= 1e-12 * m.norm());
        }
        let cap = MaxwellCapacitance::new(
            DMatrix::from_row_slice(2, 2, &[80.0 * FF, -2.0 * FF, -2.0 * FF, 52.0 * FF]),
            vec!["Q".into(), "E".into()],
        )
        .unwrap();
        let rc = CLCascade::new(cap, 2, DVector::zeros(0)).unwrap();
        let spec = LossSpec::new(&[("Q", 10.0 * NH)], &[("E", 50.0)]);
        for omit in [false, true] {
            let y = lossy_port_admittance(&rc, &spec, omit, &freqs).unwrap();
            assert!(y.data.iter().all(|m| m[(0, 0)].re > 0.0));
        }
    }

    #[test]
    fn single_qubit_t1() {
        let y = SampledNetwork::new(
            ParamKind::Y,
            vec![4e9, 5e9],
            vec![CMat::from_element(1, 1, C64::new(1e-9, 0.1)), CMat::from_element(1, 1, C64::new(3e-9, 0.1))],
            vec![50.0],
            vec!["Q".into()],
        )
        .unwrap();
        let t1 = t1_at(&y, "Q", 2.0 * PI * 4.5e9, 80.0 * FF).unwrap();
        assert!((t1 - 80.0 * FF / 2e-9).abs() < 1e-18);
        let bad = SampledNetwork::new(ParamKind::Y, vec![4e9], vec![CMat::from_element(1, 1, C64::new(-1e-9, 0.0))], vec![50.0], vec!["Q".into()]).unwrap();
        assert!(matches!(t1_at(&bad, "Q", 2.0 * PI * 4e9, 1e-13), Err(Error::Numerical(_))));
        assert!(t1_at(&y, "Q", 2.0 * PI * 6e9, 1e-13).is_err());
    }

    #[test]
    fn isolated_transmon_follows_lc() {
        let c = fixtures::decay_circuit();
        let loss = fixtures::decay_loss(24.0 * NH, 15.5 * NH);
        let ls: Vec<f64> = (0..8).map(|k| (24.0 + k as f64) * NH).collect();
        let sets = sweep_junction_inductance(&c, &loss, "J1", &ls).unwrap();
        let ct = effective_capacitance(&c, &loss).unwrap()[0];
        let start = sets[0].mode_of("J1").unwrap().track;
        for (set, l) in sets.iter().zip(&ls) {
            let m = set.modes.iter().find(|m| m.track == start).unwrap();
            assert_eq!(m.attribution, "J1");
            assert!(!m.discontinuity);
            let w = 1.0 / (l * ct).sqrt();
            assert!((m.omega / w - 1.0).abs() < 0.01, "{} vs {w}", m.omega);
        }
    }

    #[test]
    fn single_mode_tracking_is_constant() {
        let cap = MaxwellCapacitance::new(DMatrix::from_element(1, 1, 80.0 * FF), vec!["Q".into()]).unwrap();
        let c = CLCascade::new(cap, 1, DVector::zeros(0)).unwrap();
        let loss = LossSpec::new(&[("Q", 10.0 * NH)], &[]);
        let sets = sweep_junction_inductance(&c, &loss, "Q", &[8.0 * NH, 9.0 * NH, 10.0 * NH]).unwrap();
        assert!(sets.iter().all(|s| s.modes.len() == 1 && s.modes[0].track == 0 && !s.modes[0].discontinuity));
    }

    #[test]
    fn spec_validation() {
        let ports: Vec<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        assert!(LossSpec::new(&[("A", 1e-8)], &[("B", 50.0)]).validate(&ports).is_ok());
        assert!(LossSpec::new(&[("A", 1e-8)], &[("A", 50.0)]).validate(&ports).is_err());
        assert!(LossSpec::new(&[("A", -1e-8)], &[]).validate(&ports).is_err());
        assert!(matches!(LossSpec::new(&[("Z", 1e-8)], &[]).validate(&ports), Err(Error::UnknownName { .. })));
        let s = LossSpec::new(&[("A", 1e-8)], &[("B", 50.0)]);
        let back: LossSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn poles_are_passive(seed in 0u64..1000, r in 10.0f64..1e4) {
            let c = fixtures::random_cascade(&mut ChaCha8Rng::seed_from_u64(seed), 3, 4);
            let loss = LossSpec::new(&[("P1", 10.0 * NH)], &[("P2", r), ("P3", 2.0 * r)]);
            let set = lossy_mode_poles(&c, &loss).unwrap();
            for p in set.poles() {
                prop_assert!(p.re <= 1e-9 * p.norm());
            }
            for m in &set.modes {
                prop_assert!((m.kappa_sum_rule - m.kappa).abs() <= 1e-6 * m.kappa.max(1e-12 * m.omega));
            }
        }
    }
}
