//! Pole relocation and residue identification.

use nalgebra::{DMatrix, DVector};

use super::{fit_entries, Asymptote, FitConfig, GeneralRational, WeightMode};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::netcore::{ParamKind, SampledNetwork};

/// Column-scaled singular values below this fraction of the largest make a
/// least-squares system rank deficient.
const LS_RCOND: f64 = 1e-15;

/// Iteration state of the weighted pole relocation.
#[derive(Debug, Clone, PartialEq)]
pub struct VFState {
    /// rad/s, conjugate-closed, Re ≤ 0.
    pub poles: Vec<C64>,
    /// c_n of σ(s), aligned with `poles`.
    pub sigma_residues: Vec<C64>,
    /// Constant term of σ(s) (1 unless relaxed).
    pub sigma_d: f64,
    pub iteration: usize,
    /// Largest pole movement in the last iteration, relative to the pole magnitude
    /// or the lowest band frequency, whichever is larger.
    pub last_change: f64,
}

impl VFState {
    pub fn new(poles: Vec<C64>) -> Self {
        let n = poles.len();
        VFState { poles, sigma_residues: vec![C64::new(0.0, 0.0); n], sigma_d: 1.0, iteration: 0, last_change: f64::INFINITY }
    }
}

/// Pole of a real-valued basis: a real pole or the upper member of a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Unit {
    Real(f64),
    Pair(C64),
}

impl Unit {
    fn width(self) -> usize {
        match self {
            Unit::Real(_) => 1,
            Unit::Pair(_) => 2,
        }
    }
}

pub(crate) fn units(poles: &[C64]) -> Result<Vec<Unit>> {
    let upper = poles.iter().filter(|p| p.im > 0.0).count();
    let lower = poles.iter().filter(|p| p.im < 0.0).count();
    if upper != lower {
        return Err(Error::Invalid("pole list is not closed under conjugation".into()));
    }
    Ok(poles
        .iter()
        .filter(|p| p.im >= 0.0)
        .map(|&p| if p.im == 0.0 { Unit::Real(p.re) } else { Unit::Pair(p) })
        .collect())
}

fn expand(units: &[Unit]) -> Vec<C64> {
    units
        .iter()
        .flat_map(|u| match *u {
            Unit::Real(a) => vec![C64::new(a, 0.0)],
            Unit::Pair(p) => vec![p, p.conj()],
        })
        .collect()
}

/// Complex coefficients aligned with `expand(units)` from real basis coefficients.
fn expand_coeffs<T: Copy>(units: &[Unit], c: &[T], mk: impl Fn(T, T) -> (C64, C64), real: impl Fn(T) -> C64) -> Vec<C64> {
    let mut out = Vec::new();
    let mut q = 0;
    for u in units {
        match u {
            Unit::Real(_) => {
                out.push(real(c[q]));
                q += 1;
            }
            Unit::Pair(_) => {
                let (a, b) = mk(c[q], c[q + 1]);
                out.push(a);
                out.push(b);
                q += 2;
            }
        }
    }
    out
}

/// Real-valued partial-fraction basis: `1/(s−a)` for a real pole, and
/// `1/(s−p) + 1/(s−p̄)`, `i/(s−p) − i/(s−p̄)` for a pair.
pub(crate) fn basis(units: &[Unit], s: &[C64]) -> CMat {
    let n: usize = units.iter().map(|u| u.width()).sum();
    let mut phi = CMat::zeros(s.len(), n);
    for (k, &sk) in s.iter().enumerate() {
        let mut q = 0;
        for u in units {
            match *u {
                Unit::Real(a) => {
                    phi[(k, q)] = C64::new(1.0, 0.0) / (sk - a);
                    q += 1;
                }
                Unit::Pair(p) => {
                    let (x, y) = (C64::new(1.0, 0.0) / (sk - p), C64::new(1.0, 0.0) / (sk - p.conj()));
                    phi[(k, q)] = x + y;
                    phi[(k, q + 1)] = C64::i() * (x - y);
                    q += 2;
                }
            }
        }
    }
    phi
}

/// Conjugate pairs with imaginary parts spread linearly over the band and real
/// parts at −Im/100.
pub fn initial_poles(cfg: &FitConfig) -> Result<Vec<C64>> {
    cfg.validate()?;
    let (lo, hi) = (cfg.band.0 * 2.0 * std::f64::consts::PI, cfg.band.1 * 2.0 * std::f64::consts::PI);
    let n = cfg.n_pole_pairs;
    let ims: Vec<f64> = if n == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    };
    Ok(ims.into_iter().flat_map(|w| [C64::new(-w / 100.0, w), C64::new(-w / 100.0, -w)]).collect())
}

fn sample_points(data: &SampledNetwork) -> Vec<C64> {
    data.freqs.iter().map(|f| C64::new(0.0, 2.0 * std::f64::consts::PI * f)).collect()
}

fn weights(data: &SampledNetwork, i: usize, j: usize, mode: WeightMode) -> Vec<f64> {
    data.data
        .iter()
        .map(|m| match mode {
            WeightMode::Uniform => 1.0,
            WeightMode::InverseMagnitude => 1.0 / m[(i, j)].norm().max(f64::MIN_POSITIVE),
        })
        .collect()
}

fn n_asymptote(a: Asymptote) -> usize {
    match a {
        Asymptote::None => 0,
        Asymptote::D => 1,
        Asymptote::DE => 2,
    }
}

/// Complex design rows (weighted) stacked as real rows: Re block over Im block.
fn realify(a: &CMat) -> DMatrix<f64> {
    let (r, c) = (a.nrows(), a.ncols());
    DMatrix::from_fn(2 * r, c, |i, j| if i < r { a[(i, j)].re } else { a[(i - r, j)].im })
}

fn realify_vec(b: &[C64]) -> DVector<f64> {
    let r = b.len();
    DVector::from_fn(2 * r, |i, _| if i < r { b[i].re } else { b[i - r].im })
}

/// Column-scaled least squares with an explicit rank check.
/// Column-scaled SVD least squares. With `truncate` the singular values below
/// `LS_RCOND` times the largest are discarded; otherwise they raise `Conditioning`.
fn solve_ls(a: &DMatrix<f64>, b: &DMatrix<f64>, truncate: bool) -> Result<DMatrix<f64>> {
    let scale = DVector::from_iterator(a.ncols(), a.column_iter().map(|c| {
        let n = c.norm();
        if n > 0.0 { n } else { 1.0 }
    }));
    let mut scaled = a.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= scale[j];
    }
    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(largest > 0.0) || (!truncate && !(smallest > LS_RCOND * largest)) {
        return Err(Error::Conditioning { smallest, largest });
    }
    let x = svd.solve(b, LS_RCOND * largest).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] / scale[i]))
}

/// One relocation step: fit σ(s)·H ≈ Σ r̄/(s−p̄) + d + s·e over all entries with a
/// shared σ, then take the zeros of σ as the new poles.
pub fn vf_relocate(data: &SampledNetwork, state: &VFState, cfg: &FitConfig) -> Result<VFState> {
    if data.kind != ParamKind::Z {
        return Err(Error::Invalid(format!("pole relocation expects Z data, got {:?}", data.kind)));
    }
    let us = units(&state.poles)?;
    let s = sample_points(data);
    let phi = basis(&us, &s);
    let n = phi.ncols();
    let na = n_asymptote(cfg.asymptote);
    let m = n + na;
    let ns = n + usize::from(cfg.relaxed);
    if 2 * s.len() < m + ns {
        return Err(Error::Shape(format!("{} samples cannot determine {} unknowns", s.len(), m + ns)));
    }
    let entries = fit_entries(data);
    let mut rows = DMatrix::zeros(entries.len() * ns, ns);
    let mut rhs = DMatrix::zeros(entries.len() * ns, 1);
    let mut data_norm2 = 0.0;
    for (e, &(i, j)) in entries.iter().enumerate() {
        let w = weights(data, i, j, cfg.weight_mode);
        let h: Vec<C64> = data.data.iter().map(|d| d[(i, j)]).collect();
        let mut a = CMat::zeros(s.len(), m + ns);
        let mut b = vec![C64::new(0.0, 0.0); s.len()];
        for k in 0..s.len() {
            let wk = w[k];
            for q in 0..n {
                a[(k, q)] = phi[(k, q)] * wk;
                a[(k, m + q)] = -h[k] * phi[(k, q)] * wk;
            }
            if na >= 1 {
                a[(k, n)] = C64::new(wk, 0.0);
            }
            if na == 2 {
                a[(k, n + 1)] = s[k] * wk;
            }
            if cfg.relaxed {
                a[(k, m + n)] = -h[k] * wk;
            } else {
                b[k] = h[k] * wk;
            }
            data_norm2 += (h[k] * wk).norm_sqr();
        }
        let qr = realify(&a).qr();
        let (q, r) = (qr.q(), qr.r());
        let qtb = q.transpose() * realify_vec(&b);
        rows.view_mut((e * ns, 0), (ns, ns)).copy_from(&r.view((m, m), (ns, ns)));
        rhs.view_mut((e * ns, 0), (ns, 1)).copy_from(&qtb.rows(m, ns));
    }
    if cfg.relaxed {
        let count = s.len() as f64;
        let weight = data_norm2.sqrt() / count;
        let mut extra = DMatrix::zeros(1, ns);
        for q in 0..n {
            extra[(0, q)] = weight * (0..s.len()).map(|k| phi[(k, q)].re).sum::<f64>();
        }
        extra[(0, n)] = weight * count;
        let last = rows.nrows();
        rows = rows.insert_row(last, 0.0);
        rows.row_mut(last).copy_from(&extra);
        let last = rhs.nrows();
        rhs = rhs.insert_row(last, weight * count);
    }
    let x = solve_ls(&rows, &rhs, true)?;
    let c: Vec<f64> = (0..n).map(|q| x[(q, 0)]).collect();
    let mut d_sigma = if cfg.relaxed { x[(n, 0)] } else { 1.0 };
    if d_sigma.abs() < 1e-8 {
        d_sigma = 1e-8_f64.copysign(d_sigma);
    }
    // zeros of σ: eig(A − b c̃ᵀ / d̃) in the real block form
    let mut am = DMatrix::zeros(n, n);
    let mut bv = DVector::zeros(n);
    let mut q = 0;
    for u in &us {
        match *u {
            Unit::Real(a) => {
                am[(q, q)] = a;
                bv[q] = 1.0;
                q += 1;
            }
            Unit::Pair(p) => {
                am[(q, q)] = p.re;
                am[(q, q + 1)] = p.im;
                am[(q + 1, q)] = -p.im;
                am[(q + 1, q + 1)] = p.re;
                bv[q] = 2.0;
                q += 2;
            }
        }
    }
    let cv = DVector::from_vec(c.clone());
    let zmat = am - bv * cv.transpose() / d_sigma;
    let eig = zmat.complex_eigenvalues();
    let mut new_units: Vec<Unit> = eig
        .iter()
        .filter(|z| z.im >= 0.0)
        .map(|z| {
            let re = if z.re > 0.0 { -z.re } else { z.re };
            if z.im == 0.0 { Unit::Real(re) } else { Unit::Pair(C64::new(re, z.im)) }
        })
        .collect();
    new_units.sort_by(|a, b| {
        let key = |u: &Unit| match *u {
            Unit::Real(x) => (0.0, x),
            Unit::Pair(p) => (p.im, p.re),
        };
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    let new_poles = expand(&new_units);
    let floor = 2.0 * std::f64::consts::PI * cfg.band.0;
    let change = if new_poles.len() == state.poles.len() {
        new_poles
            .iter()
            .zip(&state.poles)
            .map(|(a, b)| (a - b).norm() / a.norm().max(b.norm()).max(floor))
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let sigma_residues = expand_coeffs(&us, &c, |a, b| (C64::new(a, b), C64::new(a, -b)), |a| C64::new(a, 0.0));
    Ok(VFState {
        poles: new_poles,
        sigma_residues,
        sigma_d: d_sigma,
        iteration: state.iteration + 1,
        last_change: change,
    })
}

/// Residues (and `d`, `e`) for fixed poles by per-entry linear least squares.
pub fn vf_residues(data: &SampledNetwork, poles: &[C64], cfg: &FitConfig) -> Result<GeneralRational> {
    if data.kind != ParamKind::Z {
        return Err(Error::Invalid(format!("residue fit expects Z data, got {:?}", data.kind)));
    }
    let us = units(poles)?;
    let s = sample_points(data);
    let phi = basis(&us, &s);
    let n = phi.ncols();
    let na = n_asymptote(cfg.asymptote);
    let np = data.n_ports();
    let count = expand(&us).len();
    let mut residues = vec![CMat::zeros(np, np); count];
    let (mut d, mut e) = (DMatrix::zeros(np, np), DMatrix::zeros(np, np));
    for (i, j) in fit_entries(data) {
        let w = weights(data, i, j, cfg.weight_mode);
        let mut a = CMat::zeros(s.len(), n + na);
        let mut b = vec![C64::new(0.0, 0.0); s.len()];
        for k in 0..s.len() {
            for q in 0..n {
                a[(k, q)] = phi[(k, q)] * w[k];
            }
            if na >= 1 {
                a[(k, n)] = C64::new(w[k], 0.0);
            }
            if na == 2 {
                a[(k, n + 1)] = s[k] * w[k];
            }
            b[k] = data.data[k][(i, j)] * w[k];
        }
        let rhs = DMatrix::from_column_slice(2 * s.len(), 1, realify_vec(&b).as_slice());
        let x = solve_ls(&realify(&a), &rhs, false)?;
        let coeffs: Vec<f64> = (0..n).map(|q| x[(q, 0)]).collect();
        let rs = expand_coeffs(&us, &coeffs, |a, b| (C64::new(a, b), C64::new(a, -b)), |a| C64::new(a, 0.0));
        for (k, r) in rs.into_iter().enumerate() {
            residues[k][(i, j)] = r;
        }
        if na >= 1 {
            d[(i, j)] = x[(n, 0)];
        }
        if na == 2 {
            e[(i, j)] = x[(n + 1, 0)];
        }
    }
    let sym_c = |m: &CMat| (m + m.transpose()) * C64::new(0.5, 0.0);
    let sym_r = |m: &DMatrix<f64>| (m + m.transpose()) * 0.5;
    if data.reciprocal {
        let mirror_c = |m: &mut CMat| {
            for i in 0..np {
                for j in 0..i {
                    m[(i, j)] = m[(j, i)];
                }
            }
        };
        residues.iter_mut().for_each(mirror_c);
        for m in [&mut d, &mut e] {
            for i in 0..np {
                for j in 0..i {
                    m[(i, j)] = m[(j, i)];
                }
            }
        }
    } else {
        residues = residues.iter().map(sym_c).collect();
        d = sym_r(&d);
        e = sym_r(&e);
    }
    Ok(GeneralRational { port_names: data.port_names.clone(), poles: expand(&us), residues, d, e })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    fn scalar_data(freqs: &[f64], h: impl Fn(C64) -> C64) -> SampledNetwork {
        let data = freqs.iter().map(|f| CMat::from_element(1, 1, h(C64::new(0.0, TWO_PI * f)))).collect();
        let mut net = SampledNetwork::with_default_names(ParamKind::Z, freqs.to_vec(), data, 50.0).unwrap();
        net.reciprocal = true;
        net
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn starting_pole_placement() {
        let p = initial_poles(&FitConfig::new(1, (1e9, 2e9))).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p[0].im - TWO_PI * 1.5e9).abs() < 1e-3);
        assert!((p[0].re + TWO_PI * 1.5e7).abs() < 1e-3);
        assert_eq!(p[1], p[0].conj());
        let p = initial_poles(&FitConfig::new(4, (1e9, 9e9))).unwrap();
        let ims: Vec<f64> = p.iter().filter(|z| z.im > 0.0).map(|z| z.im / TWO_PI / 1e9).collect();
        for (got, want) in ims.iter().zip([1.0, 11.0 / 3.0, 19.0 / 3.0, 9.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(p.iter().all(|z| z.re < 0.0));
    }

    #[test]
    fn single_real_pole_in_one_step() {
        let a = 3.0e9;
        let data = scalar_data(&grid(1e8, 2e9, 50), |s| C64::new(1.0, 0.0) / (s + a));
        let st = VFState::new(vec![C64::new(-1.0e9, 0.0)]);
        let cfg = FitConfig::new(1, (1e8, 2e9));
        let next = vf_relocate(&data, &st, &cfg).unwrap();
        assert_eq!(next.poles.len(), 1);
        assert!((next.poles[0].re / -a - 1.0).abs() < 1e-10);
        assert!(next.poles[0].im == 0.0);
    }

    fn two_pair(s: C64) -> C64 {
        let p1 = C64::new(-2e7, TWO_PI * 3e9);
        let p2 = C64::new(-5e7, TWO_PI * 7e9);
        let (r1, r2) = (C64::new(1e9, 2e8), C64::new(-3e8, 5e8));
        r1 / (s - p1) + r1.conj() / (s - p1.conj()) + r2 / (s - p2) + r2.conj() / (s - p2.conj())
    }

    #[test]
    fn perturbed_poles_converge() {
        let data = scalar_data(&grid(1e9, 10e9, 200), two_pair);
        let start = vec![
            C64::new(-2e7, TWO_PI * 3e9) * 1.05,
            C64::new(-2e7, -TWO_PI * 3e9) * 1.05,
            C64::new(-5e7, TWO_PI * 7e9) * 0.95,
            C64::new(-5e7, -TWO_PI * 7e9) * 0.95,
        ];
        let mut cfg = FitConfig::new(2, (1e9, 10e9));
        cfg.asymptote = Asymptote::None;
        let mut st = VFState::new(start);
        for _ in 0..10 {
            st = vf_relocate(&data, &st, &cfg).unwrap();
        }
        assert!((st.poles[0] - C64::new(-2e7, TWO_PI * 3e9)).norm() / (TWO_PI * 3e9) < 1e-8);
        assert!((st.poles[2] - C64::new(-5e7, TWO_PI * 7e9)).norm() / (TWO_PI * 7e9) < 1e-8);
        let again = vf_relocate(&data, &st, &cfg).unwrap();
        assert!(again.last_change < 1e-6);
        assert!(again.poles.iter().all(|p| p.re <= 0.0));
        let gr = vf_residues(&data, &st.poles, &cfg).unwrap();
        assert!((gr.residues[0][(0, 0)] / C64::new(1e9, 2e8) - 1.0).norm() < 1e-8);
        assert_eq!(gr.residues[1][(0, 0)], gr.residues[0][(0, 0)].conj());
    }

    #[test]
    fn relaxed_variant_converges() {
        let data = scalar_data(&grid(1e9, 10e9, 200), two_pair);
        let mut cfg = FitConfig::new(2, (1e9, 10e9));
        cfg.relaxed = true;
        let mut st = VFState::new(initial_poles(&cfg).unwrap());
        for _ in 0..20 {
            st = vf_relocate(&data, &st, &cfg).unwrap();
        }
        assert!((st.poles[0] - C64::new(-2e7, TWO_PI * 3e9)).norm() / (TWO_PI * 3e9) < 1e-8);
    }

    #[test]
    fn unstable_poles_are_flipped() {
        // Data with a right-half-plane pair still yields stable relocated poles.
        let p = C64::new(3e8, TWO_PI * 4e9);
        let data = scalar_data(&grid(1e9, 8e9, 100), |s| C64::new(1e9, 0.0) / (s - p) + C64::new(1e9, 0.0) / (s - p.conj()));
        let cfg = FitConfig::new(1, (1e9, 8e9));
        let mut st = VFState::new(initial_poles(&cfg).unwrap());
        for _ in 0..5 {
            st = vf_relocate(&data, &st, &cfg).unwrap();
            assert!(st.poles.iter().all(|p| p.re <= 0.0));
        }
    }

    #[test]
    fn residues_of_zero_and_symmetric_data() {
        let freqs = grid(1e9, 5e9, 40);
        let data = freqs.iter().map(|_| CMat::zeros(2, 2)).collect();
        let mut zero = SampledNetwork::with_default_names(ParamKind::Z, freqs.clone(), data, 50.0).unwrap();
        zero.reciprocal = true;
        let cfg = FitConfig::new(2, (1e9, 5e9));
        let poles = initial_poles(&cfg).unwrap();
        let gr = vf_residues(&zero, &poles, &cfg).unwrap();
        assert!(gr.residues.iter().all(|r| r.norm() == 0.0));

        let sym = freqs
            .iter()
            .map(|f| {
                let s = C64::new(0.0, TWO_PI * f);
                CMat::from_fn(2, 2, |i, j| two_pair(s) * (1.0 + 0.3 * (i + j) as f64))
            })
            .collect();
        let net = SampledNetwork::with_default_names(ParamKind::Z, freqs, sym, 50.0).unwrap();
        let gr = vf_residues(&net, &poles, &cfg).unwrap();
        for r in &gr.residues {
            assert!((r - r.transpose()).norm() <= 1e-14 * r.norm());
        }
    }

    #[test]
    fn rank_deficient_system_reported() {
        let data = scalar_data(&grid(1e9, 2e9, 30), |s| C64::new(1.0, 0.0) / (s + 1e9));
        let dup = vec![C64::new(-1e8, 5e9), C64::new(-1e8, -5e9), C64::new(-1e8, 5e9), C64::new(-1e8, -5e9)];
        let cfg = FitConfig::new(2, (1e9, 2e9));
        assert!(matches!(vf_residues(&data, &dup, &cfg), Err(Error::Conditioning { .. })));
    }
}
