//! Truncated-Fock representation of the network Hamiltonian and eigenvalue oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::HamiltonianParams;
use crate::error::{Error, Result};

/// Largest Hilbert-space dimension built by default (3 levels on 7 branches).
pub const DEFAULT_FOCK_CAP: usize = 2187;

/// Overlap a dressed state needs with its bare state (or bare pair) to be identified.
const OVERLAP_THRESHOLD: f64 = 0.5;

/// Branches are the qubits followed by the modes; basis index is mixed radix with
/// the first branch most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct FockModel {
    pub levels_per_mode: usize,
    pub n_branches: usize,
    pub hamiltonian_dim: usize,
    pub hamiltonian: DMatrix<f64>,
}

impl FockModel {
    pub fn index(&self, occupation: &[usize]) -> usize {
        occupation.iter().fold(0, |acc, &n| acc * self.levels_per_mode + n)
    }

    pub fn occupation(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.n_branches];
        for slot in occ.iter_mut().rev() {
            *slot = index % self.levels_per_mode;
            index /= self.levels_per_mode;
        }
        occ
    }

    /// Index of the state with one quantum in `branch`.
    pub fn single(&self, branch: usize) -> usize {
        let mut occ = vec![0; self.n_branches];
        occ[branch] = 1;
        self.index(&occ)
    }
}

/// Dense matrix of Σ ω n + (anh/2) n(n−1) + Σ g (x†y + xy† − x†y† − xy), rad/s.
pub fn fock_hamiltonian(hp: &HamiltonianParams, levels: usize, cap: usize) -> Result<FockModel> {
    if levels < 2 {
        return Err(Error::Invalid(format!("{levels} levels per branch; at least 2 are needed")));
    }
    let (n, m) = (hp.n_qubits(), hp.n_modes());
    let nb = n + m;
    let dim = (0..nb).try_fold(1usize, |acc, _| acc.checked_mul(levels)).filter(|d| *d <= cap).ok_or_else(|| {
        Error::Invalid(format!("Fock dimension {levels}^{nb} exceeds the cap {cap}"))
    })?;
    let omega: Vec<f64> = hp.omega_j.iter().chain(hp.omega_r.iter()).cloned().collect();
    let anh: Vec<f64> = hp.beta_j.iter().chain(hp.alpha_r.iter()).cloned().collect();
    let mut pairs = Vec::new();
    for a in 0..nb {
        for b in a + 1..nb {
            let g = match (a < n, b < n) {
                (true, true) => hp.g_qq[(a, b)],
                (true, false) => hp.g_qr[(a, b - n)],
                _ => hp.g_rr[(a - n, b - n)],
            };
            if g != 0.0 {
                pairs.push((a, b, g));
            }
        }
    }
    let mut model = FockModel { levels_per_mode: levels, n_branches: nb, hamiltonian_dim: dim, hamiltonian: DMatrix::zeros(dim, dim) };
    let top = levels - 1;
    let mut h = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let occ = model.occupation(col);
        h[(col, col)] = (0..nb).map(|a| -> f64 {
            let k = occ[a] as f64;
            omega[a] * k + 0.5 * anh[a] * k * (k - 1.0)
        }).sum::<f64>();
        for &(a, b, g) in &pairs {
            let (na, nb_) = (occ[a], occ[b]);
            // (raise a?, raise b?, sign)
            for (ra, rb, sign) in [(true, false, 1.0), (false, true, 1.0), (true, true, -1.0), (false, false, -1.0)] {
                let amp_a = if ra { if na < top { ((na + 1) as f64).sqrt() } else { 0.0 } } else { (na as f64).sqrt() };
                let amp_b = if rb { if nb_ < top { ((nb_ + 1) as f64).sqrt() } else { 0.0 } } else { (nb_ as f64).sqrt() };
                if amp_a == 0.0 || amp_b == 0.0 {
                    continue;
                }
                let mut next = occ.clone();
                next[a] = if ra { na + 1 } else { na - 1 };
                next[b] = if rb { nb_ + 1 } else { nb_ - 1 };
                let row = model.index(&next);
                h[(row, col)] += sign * g * amp_a * amp_b;
            }
        }
    }
    let scale = h.amax().max(f64::MIN_POSITIVE);
    let asym = (&h - h.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::Numerical(format!("Fock Hamiltonian asymmetry {asym:e} at scale {scale:e}")));
    }
    model.hamiltonian = h;
    Ok(model)
}

fn spectrum(model: &FockModel) -> SymmetricEigen<f64, nalgebra::Dyn> {
    model.hamiltonian.clone().symmetric_eigen()
}

/// Eigenvalue of the dressed state with the largest overlap with bare state `bare`.
fn dressed_energy(eig: &SymmetricEigen<f64, nalgebra::Dyn>, bare: usize) -> Result<f64> {
    let (best, w) = (0..eig.eigenvalues.len())
        .map(|j| (j, eig.eigenvectors[(bare, j)].powi(2)))
        .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if w < OVERLAP_THRESHOLD {
        return Err(Error::Numerical(format!("bare state {bare} has overlap {w:.3} with every dressed state")));
    }
    Ok(eig.eigenvalues[best])
}

/// Symmetric/antisymmetric split of the single-excitation pair (a, b): returns
/// (E_sym, E_anti).
fn pair_energies(model: &FockModel, a: usize, b: usize) -> Result<(f64, f64)> {
    let eig = spectrum(model);
    let (ia, ib) = (model.single(a), model.single(b));
    let mut ranked: Vec<(usize, f64)> = (0..eig.eigenvalues.len())
        .map(|j| (j, eig.eigenvectors[(ia, j)].powi(2) + eig.eigenvectors[(ib, j)].powi(2)))
        .collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let (first, second) = (ranked[0], ranked[1]);
    if first.1 < OVERLAP_THRESHOLD || second.1 < OVERLAP_THRESHOLD {
        return Err(Error::Numerical(format!(
            "cannot identify the single-excitation pair: overlaps {:.3} and {:.3} (nondispersive regime)",
            first.1, second.1
        )));
    }
    let parity = |j: usize| eig.eigenvectors[(ia, j)] * eig.eigenvectors[(ib, j)];
    let (e1, e2) = (eig.eigenvalues[first.0], eig.eigenvalues[second.0]);
    if parity(first.0) >= parity(second.0) {
        Ok((e1, e2))
    } else {
        Ok((e2, e1))
    }
}

/// g̃ between branches `a` and `b` from half the single-excitation eigen-gap; the
/// caller puts the two branches on resonance.
pub fn oracle_effective_coupling(hp: &HamiltonianParams, a: usize, b: usize, levels: usize) -> Result<f64> {
    let model = fock_hamiltonian(hp, levels, DEFAULT_FOCK_CAP)?;
    let (es, ea) = pair_energies(&model, a, b)?;
    Ok(0.5 * (es - ea))
}

/// Like [`oracle_effective_coupling`], but first detunes branch `b` within ±`window`
/// rad/s to the point of minimal splitting, which cancels unequal dressing shifts.
pub fn oracle_effective_coupling_tuned(hp: &HamiltonianParams, a: usize, b: usize, levels: usize, window: f64) -> Result<f64> {
    let n = hp.n_qubits();
    let shifted = |d: f64| {
        let mut h = hp.clone();
        if b < n {
            h.omega_j[b] += d;
        } else {
            h.omega_r[b - n] += d;
        }
        h
    };
    let gap = |d: f64| -> Result<f64> {
        let model = fock_hamiltonian(&shifted(d), levels, DEFAULT_FOCK_CAP)?;
        let (es, ea) = pair_energies(&model, a, b)?;
        Ok((es - ea).abs())
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (-window, window);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (gap(x1)?, gap(x2)?);
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = gap(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = gap(x2)?;
        }
        if hi - lo <= 1e-12 * window.max(1.0) {
            break;
        }
    }
    let best = 0.5 * (lo + hi);
    let model = fock_hamiltonian(&shifted(best), levels, DEFAULT_FOCK_CAP)?;
    let (es, ea) = pair_energies(&model, a, b)?;
    Ok(0.5 * (es - ea))
}

/// E11 − E10 − E01 + E00 for branches `x` and `y`, each dressed level picked by
/// maximal overlap with its bare product state.
pub fn oracle_pair_shift(hp: &HamiltonianParams, x: usize, y: usize, levels: usize, cap: usize) -> Result<f64> {
    let model = fock_hamiltonian(hp, levels, cap)?;
    let eig = spectrum(&model);
    let mut occ = vec![0; model.n_branches];
    let e00 = dressed_energy(&eig, model.index(&occ))?;
    occ[x] = 1;
    let e10 = dressed_energy(&eig, model.index(&occ))?;
    occ[y] = 1;
    let e11 = dressed_energy(&eig, model.index(&occ))?;
    occ[x] = 0;
    let e01 = dressed_energy(&eig, model.index(&occ))?;
    Ok(e11 - e10 - e01 + e00)
}

/// Sorted eigenvalues, rad/s.
pub fn fock_spectrum(model: &FockModel) -> DVector<f64> {
    let mut v: Vec<f64> = spectrum(model).eigenvalues.iter().cloned().collect();
    v.sort_by(f64::total_cmp);
    DVector::from_vec(v)
}
