//! Interconnection of rational impedances (capacitance merging) and of sampled
//! S-parameters.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::netcore::{MaxwellCapacitance, ParamKind, RationalImpedance, SampledNetwork};
use crate::synthesis::{cascade_to_rational, synthesize_cascade, CLCascade};

/// Denominator magnitude below which a Filipsson join is reported as singular.
pub const JOIN_DEN_TOL: f64 = 1e-12;

/// Which ports of which networks are wired together.
///
/// Port references are `"<network id>.<port>"`; a bare port name is accepted when it
/// is unique across all networks. A joined node is called `"a⊕b"`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConnectionPlan {
    pub networks: Vec<String>,
    pub joins: Vec<(String, String)>,
    pub leave_open: Vec<String>,
}

/// Plan with every reference resolved to a qualified port name.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPlan {
    pub ports: Vec<String>,
    pub joins: Vec<(String, String)>,
    pub leave_open: Vec<String>,
}

pub fn joined_name(a: &str, b: &str) -> String {
    format!("{a}⊕{b}")
}

impl ConnectionPlan {
    /// Checks the plan against the port lists of its networks (same order as `networks`).
    pub fn resolve(&self, port_lists: &[Vec<String>]) -> Result<ResolvedPlan> {
        if port_lists.len() != self.networks.len() {
            return Err(Error::Shape(format!(
                "plan names {} networks, {} supplied",
                self.networks.len(),
                port_lists.len()
            )));
        }
        let mut seen = HashSet::new();
        for id in &self.networks {
            if !seen.insert(id) {
                return Err(Error::Invalid(format!("duplicate network id `{id}`")));
            }
        }
        let ports: Vec<String> = self
            .networks
            .iter()
            .zip(port_lists)
            .flat_map(|(id, ps)| ps.iter().map(move |p| format!("{id}.{p}")))
            .collect();
        let lookup = |name: &str| -> Result<String> {
            if ports.iter().any(|p| p == name) {
                return Ok(name.to_string());
            }
            let suffix = format!(".{name}");
            let hits: Vec<&String> = ports.iter().filter(|p| p.ends_with(&suffix)).collect();
            match hits.len() {
                1 => Ok(hits[0].clone()),
                0 => Err(Error::unknown(name, &ports)),
                _ => Err(Error::Invalid(format!("port `{name}` is ambiguous; qualify it with a network id"))),
            }
        };
        let mut used = HashSet::new();
        let mut joins = Vec::with_capacity(self.joins.len());
        for (a, b) in &self.joins {
            let (a, b) = (lookup(a)?, lookup(b)?);
            if a == b {
                return Err(Error::Invalid(format!("port `{a}` joined to itself")));
            }
            for p in [&a, &b] {
                if !used.insert(p.clone()) {
                    return Err(Error::Invalid(format!("port `{p}` appears in more than one join")));
                }
            }
            joins.push((a, b));
        }
        let merged: Vec<String> = joins.iter().map(|(a, b)| joined_name(a, b)).collect();
        let mut leave_open = Vec::with_capacity(self.leave_open.len());
        for name in &self.leave_open {
            let q = if merged.contains(name) { name.clone() } else { lookup(name)? };
            if used.contains(&q) {
                return Err(Error::Invalid(format!(
                    "port `{q}` is both joined and left open; name the joined node `a⊕b` instead"
                )));
            }
            if leave_open.contains(&q) {
                return Err(Error::Invalid(format!("port `{q}` listed twice in leave_open")));
            }
            leave_open.push(q);
        }
        Ok(ResolvedPlan { ports, joins, leave_open })
    }
}

/// Shorts node `k` onto node `j`: row and column `k` are added into `j` and then
/// deleted. The surviving node keeps the name of `j`.
pub fn merge_capacitance_ports(c: &MaxwellCapacitance, j: &str, k: &str) -> Result<MaxwellCapacitance> {
    let (jj, kk) = (c.index_of(j)?, c.index_of(k)?);
    if jj == kk {
        return Err(Error::Invalid(format!("cannot merge node `{j}` with itself")));
    }
    let mut m = c.matrix.clone();
    let row_k = m.row(kk).clone_owned();
    let mut row_j = m.row_mut(jj);
    row_j += row_k;
    let col_k = m.column(kk).clone_owned();
    let mut col_j = m.column_mut(jj);
    col_j += col_k;
    let m = m.remove_row(kk).remove_column(kk);
    let mut names = c.node_names.clone();
    names.remove(kk);
    MaxwellCapacitance::new_unchecked(linalg::symmetrize(&m), names)
}

/// Block-diagonal capacitance of disjoint cascades: all ports first, then all
/// resonators. Node names are qualified by network id.
fn disjoint_cascade(ids: &[String], cascades: &[CLCascade]) -> Result<CLCascade> {
    let n: usize = cascades.iter().map(|c| c.n_ports).sum();
    let m: usize = cascades.iter().map(|c| c.n_resonators()).sum();
    let mut big = DMatrix::zeros(n + m, n + m);
    let mut names = vec![String::new(); n + m];
    let mut inductors = DVector::zeros(m);
    let (mut po, mut ro) = (0, n);
    for (id, c) in ids.iter().zip(cascades) {
        let (np, nr) = (c.n_ports, c.n_resonators());
        let place = |i: usize| if i < np { po + i } else { ro + i - np };
        for a in 0..np + nr {
            names[place(a)] = format!("{id}.{}", c.capacitance.node_names[a]);
            for b in 0..np + nr {
                big[(place(a), place(b))] = c.capacitance.matrix[(a, b)];
            }
        }
        for r in 0..nr {
            inductors[ro - n + r] = c.shunt_inductors[r];
        }
        po += np;
        ro += nr;
    }
    CLCascade::new(MaxwellCapacitance::new_unchecked(big, names)?, n, inductors)
}

/// Interconnects rational impedances through their synthesized CL cascades.
pub fn connect_rational(zs: &[RationalImpedance], plan: &ConnectionPlan) -> Result<RationalImpedance> {
    let lists: Vec<Vec<String>> = zs.iter().map(|z| z.port_names.clone()).collect();
    let rp = plan.resolve(&lists)?;
    let cascades = zs
        .iter()
        .map(synthesize_cascade)
        .collect::<Result<Vec<_>>>()
        .map_err(Error::stage("synthesis"))?;
    let joined = disjoint_cascade(&plan.networks, &cascades)?;
    let mut cap = joined.capacitance.clone();
    // canonical order makes the result independent of how the joins are listed
    let mut joins = rp.joins.clone();
    joins.sort();
    for (a, b) in &joins {
        cap = merge_capacitance_ports(&cap, a, b)?;
        let j = cap.index_of(a)?;
        cap.node_names[j] = joined_name(a, b);
    }
    if !cap.is_positive_definite() {
        return Err(Error::NotPositiveDefinite {
            what: "interconnected capacitance".into(),
            min_eigenvalue: linalg::min_eigenvalue(&cap.matrix),
        });
    }
    let n_ports = joined.n_ports - rp.joins.len();
    let cascade = CLCascade::new(cap, n_ports, joined.shunt_inductors.clone())?;
    let (z, _) = cascade_to_rational(&cascade).map_err(Error::stage("cascade analysis"))?;
    if rp.leave_open.is_empty() {
        Ok(z)
    } else {
        z.remove_ports(&rp.leave_open)
    }
}

/// `Σ11 + Σ12 (I − S_ℓ Σ22)⁻¹ S_ℓ Σ21`, with the last `M` ports of `sigma` terminated
/// by `s_load`. `None` when `I − S_ℓ Σ22` is singular.
pub fn cascade_load_s(sigma: &CMat, s_load: &CMat) -> Option<CMat> {
    let total = sigma.nrows();
    let m = s_load.nrows();
    if sigma.ncols() != total || s_load.ncols() != m || m > total {
        return None;
    }
    let n = total - m;
    let s11 = sigma.view((0, 0), (n, n));
    let s12 = sigma.view((0, n), (n, m));
    let s21 = sigma.view((n, 0), (m, n));
    let s22 = sigma.view((n, n), (m, m));
    let inner = CMat::identity(m, m) - s_load * s22;
    let inv = linalg::checked_inverse(&inner)?;
    Some(s11 + s12 * inv * s_load * s21)
}

/// Frequency-by-frequency [`cascade_load_s`] on sampled S-parameters.
pub fn cascade_load_sampled(sigma: &SampledNetwork, load: &SampledNetwork) -> Result<SampledNetwork> {
    if sigma.kind != ParamKind::S || load.kind != ParamKind::S {
        return Err(Error::Invalid("cascade loading needs S-parameters".into()));
    }
    if sigma.freqs != load.freqs {
        return Err(Error::Invalid("network and load must share a frequency grid".into()));
    }
    let m = load.n_ports();
    if m > sigma.n_ports() {
        return Err(Error::Shape(format!("{m}-port load on a {}-port network", sigma.n_ports())));
    }
    let n = sigma.n_ports() - m;
    let data = sigma
        .data
        .iter()
        .zip(&load.data)
        .enumerate()
        .map(|(i, (s, l))| {
            cascade_load_s(s, l).ok_or(Error::SingularAt { what: "I − S_load Σ22".into(), index: i })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = SampledNetwork::new(
        ParamKind::S,
        sigma.freqs.clone(),
        data,
        sigma.z_ref[..n].to_vec(),
        sigma.port_names[..n].to_vec(),
    )?;
    out.reciprocal = sigma.reciprocal && load.reciprocal;
    Ok(out)
}

/// Connects ports `k` and `l` of one S-matrix; `None` if the denominator vanishes.
pub fn filipsson_matrix(s: &CMat, k: usize, l: usize) -> Option<CMat> {
    let one = C64::new(1.0, 0.0);
    let den = one - s[(k, l)] - s[(l, k)] + s[(k, l)] * s[(l, k)] - s[(k, k)] * s[(l, l)];
    if den.norm() <= JOIN_DEN_TOL {
        return None;
    }
    let keep: Vec<usize> = (0..s.nrows()).filter(|&i| i != k && i != l).collect();
    Some(CMat::from_fn(keep.len(), keep.len(), |a, b| {
        let (i, j) = (keep[a], keep[b]);
        let num = s[(i, l)] * s[(k, j)] * (one - s[(l, k)])
            + s[(i, l)] * s[(k, k)] * s[(l, j)]
            + s[(i, k)] * s[(l, j)] * (one - s[(k, l)])
            + s[(i, k)] * s[(l, l)] * s[(k, j)];
        s[(i, j)] + num / den
    }))
}

/// Wires port `port_k` to port `port_l` of a sampled S-parameter network.
pub fn filipsson_connect(s: &SampledNetwork, port_k: &str, port_l: &str) -> Result<SampledNetwork> {
    if s.kind != ParamKind::S {
        return Err(Error::Invalid(format!("expected S parameters, got {:?}", s.kind)));
    }
    let (k, l) = (s.port_index(port_k)?, s.port_index(port_l)?);
    if k == l {
        return Err(Error::Invalid(format!("port `{port_k}` joined to itself")));
    }
    if (s.z_ref[k] - s.z_ref[l]).abs() > 1e-12 * s.z_ref[k] {
        return Err(Error::Invalid("joined ports must share a reference impedance".into()));
    }
    let data = s
        .data
        .iter()
        .enumerate()
        .map(|(i, m)| filipsson_matrix(m, k, l).ok_or(Error::SingularAt { what: "port join denominator".into(), index: i }))
        .collect::<Result<Vec<_>>>()?;
    let keep: Vec<usize> = (0..s.n_ports()).filter(|&i| i != k && i != l).collect();
    let mut out = SampledNetwork::new(
        ParamKind::S,
        s.freqs.clone(),
        data,
        keep.iter().map(|&i| s.z_ref[i]).collect(),
        keep.iter().map(|&i| s.port_names[i].clone()).collect(),
    )?;
    out.reciprocal = s.reciprocal;
    Ok(out)
}

/// `connection_plan.v1` file layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectionPlanJson {
    #[serde(default = "plan_schema")]
    pub schema: String,
    pub networks: Vec<NetworkRef>,
    #[serde(default)]
    pub joins: Vec<[String; 2]>,
    #[serde(default)]
    pub leave_open: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkRef {
    pub id: String,
    pub path: String,
}

fn plan_schema() -> String {
    "connection_plan.v1".into()
}

impl ConnectionPlanJson {
    pub fn plan(&self) -> Result<ConnectionPlan> {
        if self.schema != plan_schema() {
            return Err(Error::Parse(format!("expected schema connection_plan.v1, got `{}`", self.schema)));
        }
        Ok(ConnectionPlan {
            networks: self.networks.iter().map(|n| n.id.clone()).collect(),
            joins: self.joins.iter().map(|[a, b]| (a.clone(), b.clone())).collect(),
            leave_open: self.leave_open.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{z_to_s_matrix, Mode};
    use proptest::prelude::*;

    const FF: f64 = 1e-15;

    fn maxwell(m: &[f64], n: usize, names: &[&str]) -> MaxwellCapacitance {
        MaxwellCapacitance::new(
            DMatrix::from_row_slice(n, n, m),
            names.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn parallel_capacitors() {
        let c = maxwell(&[1.0, 0.0, 0.0, 2.0], 2, &["a", "b"]);
        let m = merge_capacitance_ports(&c, "a", "b").unwrap();
        assert_eq!(m.node_names, vec!["a"]);
        assert_eq!(m.matrix[(0, 0)], 3.0);
    }

    /// Node voltages with a and b tied: charges on a, b add, so the reduced matrix
    /// is obtained from Q = C V with V_a = V_b.
    fn shorted_oracle(c: &DMatrix<f64>, a: usize, b: usize) -> DMatrix<f64> {
        let n = c.nrows();
        let keep: Vec<usize> = (0..n).filter(|&i| i != b).collect();
        let mut p = DMatrix::zeros(n, n - 1);
        for (col, &i) in keep.iter().enumerate() {
            p[(i, col)] = 1.0;
            if i == a {
                p[(b, col)] = 1.0;
            }
        }
        p.transpose() * c * p
    }

    #[test]
    fn three_node_merge() {
        let (c1, c2, c12, c13, c23, c3) = (10.0 * FF, 20.0 * FF, 5.0 * FF, 3.0 * FF, 4.0 * FF, 8.0 * FF);
        let m = [
            c1 + c12 + c13, -c12, -c13,
            -c12, c2 + c12 + c23, -c23,
            -c13, -c23, c3 + c13 + c23,
        ];
        let c = maxwell(&m, 3, &["a", "b", "x"]);
        let merged = merge_capacitance_ports(&c, "a", "b").unwrap();
        let mutual = crate::netcore::maxwell_to_mutual(&merged).unwrap();
        assert!((mutual.matrix[(0, 0)] - 30.0 * FF).abs() < 1e-27);
        assert!((mutual.matrix[(0, 1)] - 7.0 * FF).abs() < 1e-27);
        let oracle = shorted_oracle(&c.matrix, 0, 1);
        assert!((merged.matrix - oracle).abs().max() < 1e-28);
    }

    #[test]
    fn merge_order_is_naming_only() {
        let c = maxwell(&[3.0, -1.0, -0.5, -1.0, 4.0, -0.2, -0.5, -0.2, 2.0], 3, &["a", "b", "x"]);
        let ab = merge_capacitance_ports(&c, "a", "b").unwrap();
        let ba = merge_capacitance_ports(&c, "b", "a").unwrap();
        assert_eq!(ba.node_names, vec!["b", "x"]);
        assert!((ab.matrix - ba.matrix).abs().max() < 1e-15);
        assert!(matches!(merge_capacitance_ports(&c, "a", "q"), Err(Error::UnknownName { .. })));
    }

    fn bare(c: f64, name: &str) -> RationalImpedance {
        RationalImpedance::new(vec![name.into()], DMatrix::from_element(1, 1, 1.0 / c), vec![]).unwrap()
    }

    fn plan(nets: &[&str], joins: &[(&str, &str)], open: &[&str]) -> ConnectionPlan {
        ConnectionPlan {
            networks: nets.iter().map(|s| s.to_string()).collect(),
            joins: joins.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            leave_open: open.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn two_capacitors() {
        let zs = [bare(10.0 * FF, "p"), bare(30.0 * FF, "p")];
        let kept = connect_rational(&zs, &plan(&["a", "b"], &[("a.p", "b.p")], &[])).unwrap();
        assert_eq!(kept.port_names, vec!["a.p⊕b.p"]);
        assert!((kept.dc_residue[(0, 0)] * 40.0 * FF - 1.0).abs() < 1e-12);
        let open = connect_rational(&zs, &plan(&["a", "b"], &[("a.p", "b.p")], &["a.p⊕b.p"]));
        assert!(matches!(open, Err(Error::Invalid(_))));
    }

    #[test]
    fn plan_validation() {
        let lists = vec![vec!["p".to_string(), "q".to_string()], vec!["p".to_string()]];
        assert!(plan(&["a", "b"], &[("a.p", "a.p")], &[]).resolve(&lists).is_err());
        assert!(plan(&["a", "b"], &[("a.p", "b.p"), ("a.p", "a.q")], &[]).resolve(&lists).is_err());
        assert!(plan(&["a", "b"], &[("a.p", "b.p")], &["a.p"]).resolve(&lists).is_err());
        assert!(plan(&["a", "b"], &[("p", "b.p")], &[]).resolve(&lists).is_err());
        assert!(matches!(plan(&["a", "b"], &[("a.z", "b.p")], &[]).resolve(&lists), Err(Error::UnknownName { .. })));
        let ok = plan(&["a", "b"], &[("q", "b.p")], &["a.p"]).resolve(&lists).unwrap();
        assert_eq!(ok.joins[0].0, "a.q");
    }

    fn one_mode(c: [f64; 4], w: f64, r: [f64; 2], names: [&str; 2]) -> RationalImpedance {
        RationalImpedance::new(
            names.iter().map(|s| s.to_string()).collect(),
            DMatrix::from_row_slice(2, 2, &c),
            vec![Mode { omega: w, r_row: DVector::from_row_slice(&r) }],
        )
        .unwrap()
    }

    #[test]
    fn two_internal_joins_match_sequential() {
        let z = RationalImpedance::new(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            DMatrix::from_fn(4, 4, |i, j| if i == j { 2.0 } else { 0.3 }),
            vec![
                Mode { omega: 1.0, r_row: DVector::from_row_slice(&[1.0, 0.2, -0.4, 0.1]) },
                Mode { omega: 1.7, r_row: DVector::from_row_slice(&[0.3, 0.9, 0.5, -0.2]) },
            ],
        )
        .unwrap();
        let both = connect_rational(std::slice::from_ref(&z), &plan(&["n"], &[("a", "b"), ("c", "d")], &[])).unwrap();
        let first = connect_rational(std::slice::from_ref(&z), &plan(&["n"], &[("a", "b")], &[])).unwrap();
        let second = connect_rational(&[first], &plan(&["m"], &[("n.c", "n.d")], &[])).unwrap();
        let s = C64::new(0.0, 0.8);
        let (e1, e2) = (both.eval(s).unwrap(), second.eval(s).unwrap());
        assert!((e1 - e2).norm() < 1e-12);
    }

    #[test]
    fn matched_load_and_through() {
        let sigma = CMat::from_fn(3, 3, |i, j| C64::new(0.1 * (i + j) as f64, 0.05 * i as f64));
        let zero = CMat::zeros(1, 1);
        let out = cascade_load_s(&sigma, &zero).unwrap();
        assert_eq!(out, sigma.view((0, 0), (2, 2)).clone_owned());
        let through = CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let sl = CMat::from_element(1, 1, C64::new(0.3, -0.4));
        assert!((cascade_load_s(&through, &sl).unwrap() - &sl).norm() < 1e-15);
        let through_net = SampledNetwork::with_default_names(ParamKind::S, vec![1.0], vec![through.clone()], 50.0).unwrap();
        let joined = filipsson_matrix(&block(&through, &sl), 1, 2).unwrap();
        assert!((joined - &sl).norm() < 1e-15);
        let open = SampledNetwork::with_default_names(ParamKind::S, vec![1.0], vec![CMat::from_element(1, 1, C64::new(1.0, 0.0))], 50.0).unwrap();
        let mirror = CMat::from_diagonal(&DVector::from_vec(vec![C64::new(0.5, 0.0), C64::new(1.0, 0.0)]));
        let mirror_net = SampledNetwork::with_default_names(ParamKind::S, vec![1.0], vec![mirror], 50.0).unwrap();
        assert!(cascade_load_sampled(&through_net, &open).is_ok());
        assert!(matches!(cascade_load_sampled(&mirror_net, &open), Err(Error::SingularAt { index: 0, .. })));
    }

    fn block(a: &CMat, b: &CMat) -> CMat {
        let (n, m) = (a.nrows(), b.nrows());
        let mut out = CMat::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(a);
        out.view_mut((n, n), (m, m)).copy_from(b);
        out
    }

    /// Solves the wave equations b = S a, a_k = b_l, a_l = b_k, a_i = e_j directly.
    fn wave_oracle(s: &CMat, k: usize, l: usize) -> CMat {
        let n = s.nrows();
        let keep: Vec<usize> = (0..n).filter(|&i| i != k && i != l).collect();
        let mut out = CMat::zeros(keep.len(), keep.len());
        for (col, &j) in keep.iter().enumerate() {
            // unknowns: a (n) and b (n)
            let mut sys = CMat::zeros(2 * n, 2 * n);
            let mut rhs = DVector::<C64>::zeros(2 * n);
            for i in 0..n {
                sys[(i, n + i)] = C64::new(1.0, 0.0);
                for q in 0..n {
                    sys[(i, q)] = -s[(i, q)];
                }
            }
            let mut row = n;
            for &i in &keep {
                sys[(row, i)] = C64::new(1.0, 0.0);
                rhs[row] = C64::new(if i == j { 1.0 } else { 0.0 }, 0.0);
                row += 1;
            }
            sys[(row, k)] = C64::new(1.0, 0.0);
            sys[(row, n + l)] = C64::new(-1.0, 0.0);
            sys[(row + 1, l)] = C64::new(1.0, 0.0);
            sys[(row + 1, n + k)] = C64::new(-1.0, 0.0);
            let x = sys.lu().solve(&rhs).unwrap();
            for (r, &i) in keep.iter().enumerate() {
                out[(r, col)] = x[n + i];
            }
        }
        out
    }

    #[test]
    fn filipsson_matches_wave_solve() {
        let s = CMat::from_fn(4, 4, |i, j| C64::new(0.1 + 0.07 * ((i * 3 + j * 5) % 7) as f64 - 0.2, 0.03 * (i as f64 - j as f64 + 0.5)));
        for (k, l) in [(0, 1), (2, 3), (3, 0), (1, 2)] {
            let f = filipsson_matrix(&s, k, l).unwrap();
            assert!((f - wave_oracle(&s, k, l)).norm() < 1e-12, "{k} {l}");
        }
    }

    fn s_at(z: &RationalImpedance, f: f64) -> CMat {
        let zm = z.eval(C64::new(0.0, 2.0 * std::f64::consts::PI * f)).unwrap();
        z_to_s_matrix(&zm, 50.0).unwrap()
    }

    #[test]
    fn filipsson_equals_cascade_load() {
        let a = one_mode([2e13, 1e12, 1e12, 3e13], 2.0 * std::f64::consts::PI * 5e9, [3e6, 1e6], ["p", "q"]);
        let b = bare(40.0 * FF, "x");
        let f = 4.2e9;
        let (sa, sb) = (s_at(&a, f), s_at(&b, f));
        let via_load = cascade_load_s(&sa, &sb);
        let joined = filipsson_matrix(&block(&sa, &sb), 1, 2).unwrap();
        assert!((joined - via_load.unwrap()).norm() < 1e-12);
    }

    #[test]
    fn capacitive_network_loaded_by_inductors() {
        // 2 ports and 2 inductively shunted nodes, fF and nH scale.
        let m = [
            80.0, -2.0, -6.0, -1.0,
            -2.0, 90.0, -1.5, -5.0,
            -6.0, -1.5, 300.0, -3.0,
            -1.0, -5.0, -3.0, 250.0,
        ];
        let names = ["p", "q", "a", "b"].iter().map(|s| s.to_string()).collect();
        let cap = MaxwellCapacitance::new(DMatrix::from_row_slice(4, 4, &m) * FF, names).unwrap();
        let cascade = CLCascade::new(cap, 2, DVector::from_row_slice(&[4.0e-9, 2.5e-9])).unwrap();
        let (z, _) = cascade_to_rational(&cascade).unwrap();
        let cinv = linalg::spd_inverse(&cascade.capacitance.matrix, "c").unwrap();
        for f in [1e9, 3.3e9, 5.1e9, 8e9, 15e9] {
            let s = C64::new(0.0, 2.0 * std::f64::consts::PI * f);
            let sigma = z_to_s_matrix(&(linalg::to_complex(&cinv) / s), 50.0).unwrap();
            let load = CMat::from_fn(2, 2, |i, j| {
                if i == j {
                    let zl = s * cascade.shunt_inductors[i];
                    (zl - 50.0) / (zl + 50.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            let loaded = cascade_load_s(&sigma, &load).unwrap();
            let direct = z_to_s_matrix(&z.eval(s).unwrap(), 50.0).unwrap();
            assert!((loaded - direct).norm() < 1e-9, "f={f}");
        }
    }

    #[test]
    fn plan_json() {
        let text = r#"{"networks":[{"id":"a","path":"a.json"},{"id":"b","path":"b.json"}],
            "joins":[["a.p","b.p"]],"leave_open":[]}"#;
        let j: ConnectionPlanJson = serde_json::from_str(text).unwrap();
        let p = j.plan().unwrap();
        assert_eq!(p.joins, vec![("a.p".to_string(), "b.p".to_string())]);
        assert_eq!(j.schema, "connection_plan.v1");
    }

    fn arb_network(ports: usize, tag: &'static str) -> impl Strategy<Value = RationalImpedance> {
        let modes = 1..3usize;
        (modes, proptest::collection::vec(-1.0f64..1.0, 64)).prop_map(move |(m, v)| {
            let mut it = v.into_iter();
            let a = DMatrix::from_fn(ports, ports, |_, _| it.next().unwrap());
            let r0 = (&a * a.transpose() + DMatrix::identity(ports, ports)) * 2e13;
            let modes = (0..m)
                .map(|k| Mode {
                    omega: 2.0 * std::f64::consts::PI * (3e9 + 2.5e9 * k as f64 + 0.5e9 * it.next().unwrap()),
                    r_row: DVector::from_fn(ports, |_, _| 3e6 * it.next().unwrap()),
                })
                .collect();
            let names = (1..=ports).map(|i| format!("{tag}{i}")).collect();
            RationalImpedance::new(names, r0, modes).unwrap()
        })
    }

    fn far_from_poles(z: &RationalImpedance, f: f64) -> bool {
        let w = 2.0 * std::f64::consts::PI * f;
        z.modes.iter().all(|m| (w - m.omega).abs() > 0.02 * m.omega)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rational_and_sampled_joins_agree(
            a in (2usize..4).prop_flat_map(|n| arb_network(n, "a")),
            b in (1usize..3).prop_flat_map(|n| arb_network(n, "b")),
            f in 1e9f64..1e10,
        ) {
            // A direct port-to-port wire is the joined node left open.
            let open = plan(&["x", "y"], &[("x.a1", "y.b1")], &["x.a1⊕y.b1"]);
            let z = connect_rational(&[a.clone(), b.clone()], &open).unwrap();
            prop_assume!(far_from_poles(&z, f) && far_from_poles(&a, f) && far_from_poles(&b, f));
            let want = s_at(&z, f);
            let sigma = block(&s_at(&a, f), &s_at(&b, f));
            let fil = filipsson_matrix(&sigma, 0, a.n_ports()).unwrap();
            prop_assert_eq!(want.nrows(), a.n_ports() + b.n_ports() - 2);
            prop_assert!((fil - &want).norm() < 1e-8 * want.norm().max(1.0));
        }

        #[test]
        fn disjoint_joins_commute(
            a in arb_network(2, "a"),
            b in arb_network(2, "b"),
        ) {
            let p1 = plan(&["x", "y"], &[("x.a1", "y.b1"), ("x.a2", "y.b2")], &[]);
            let p2 = plan(&["x", "y"], &[("x.a2", "y.b2"), ("x.a1", "y.b1")], &[]);
            let z1 = connect_rational(&[a.clone(), b.clone()], &p1).unwrap();
            let z2 = connect_rational(&[a, b], &p2).unwrap();
            let s = C64::new(0.0, 7.3e9);
            let (e1, e2) = (z1.eval(s).unwrap(), z2.eval(s).unwrap());
            prop_assert!((e1 - &e2).norm() <= 1e-9 * e2.norm());
        }
    }
}
