//! Vector fitting of sampled impedances and projection onto lossless models.

mod lossless;
mod refine;
mod relocate;

pub use lossless::{enforce_lossless, enforce_lossless_detailed, DroppedComponent, LosslessProjection};
pub use refine::{refine_lossless, Refinement};
pub use relocate::{initial_poles, vf_relocate, vf_residues, VFState};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::netcore::{to_z, ParamKind, RationalImpedance, SampledNetwork};

/// Final log-magnitude RMS (decades) above which a fit report carries a warning.
pub const HIGH_RMS_WARNING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Uniform,
    InverseMagnitude,
}

/// Non-pole terms carried by the fitted rational during vector fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Asymptote {
    None,
    /// Constant `d`.
    #[default]
    D,
    /// Constant `d` and proportional `s·e`.
    DE,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Includes the pair that collapses onto s = 0.
    pub n_pole_pairs: usize,
    /// Hz.
    pub band: (f64, f64),
    pub max_iterations: usize,
    pub pole_convergence_tol: f64,
    /// rad/s; `None` means half the lowest band frequency.
    pub dc_capture_radius: Option<f64>,
    pub rank1_eig_threshold: f64,
    /// Model evaluations allowed in the log-magnitude refinement (0 skips it).
    pub refine_max_evals: usize,
    pub weight_mode: WeightMode,
    pub asymptote: Asymptote,
    pub relaxed: bool,
    pub allow_degenerate_hf_pole: bool,
}

impl FitConfig {
    pub fn new(n_pole_pairs: usize, band: (f64, f64)) -> Self {
        FitConfig {
            n_pole_pairs,
            band,
            max_iterations: 30,
            pole_convergence_tol: 1e-6,
            dc_capture_radius: None,
            rank1_eig_threshold: 1e-4,
            refine_max_evals: 4000,
            weight_mode: WeightMode::Uniform,
            asymptote: Asymptote::D,
            relaxed: false,
            allow_degenerate_hf_pole: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Invalid(format!("band [{lo}, {hi}] Hz must be positive and nonempty")));
        }
        if self.n_pole_pairs == 0 {
            return Err(Error::Invalid("at least one pole pair is required".into()));
        }
        for (name, v) in [("pole_convergence_tol", self.pole_convergence_tol), ("rank1_eig_threshold", self.rank1_eig_threshold)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Invalid(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if let Some(r) = self.dc_capture_radius {
            if !(r >= 0.0) {
                return Err(Error::Invalid(format!("dc_capture_radius {r} must be nonnegative")));
            }
        }
        Ok(())
    }

    pub fn dc_radius(&self) -> f64 {
        self.dc_capture_radius.unwrap_or(0.5 * self.band.0 * 2.0 * std::f64::consts::PI)
    }
}

/// Output of plain vector fitting: conjugate-closed poles with complex symmetric
/// residues plus the asymptotic `d + s·e` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralRational {
    pub port_names: Vec<String>,
    /// rad/s, conjugate-closed; a complex pole is followed by its conjugate.
    pub poles: Vec<C64>,
    pub residues: Vec<CMat>,
    pub d: DMatrix<f64>,
    pub e: DMatrix<f64>,
}

impl GeneralRational {
    pub fn n_ports(&self) -> usize {
        self.port_names.len()
    }

    pub fn eval(&self, s: C64) -> CMat {
        let mut z = self.d.map(|x| C64::new(x, 0.0)) + self.e.map(|x| s * x);
        for (p, r) in self.poles.iter().zip(&self.residues) {
            z += r / (s - p);
        }
        z
    }
}

/// RMS over samples and fitted entries of `log10|model| − log10|data|`.
pub fn log_mag_rms(data: &SampledNetwork, mut model: impl FnMut(C64) -> Result<CMat>) -> Result<f64> {
    let entries = fit_entries(data);
    let mut acc = 0.0;
    let mut count = 0usize;
    for (f, d) in data.freqs.iter().zip(&data.data) {
        let m = model(C64::new(0.0, 2.0 * std::f64::consts::PI * f))?;
        for &(i, j) in &entries {
            let r = m[(i, j)].norm().log10() - d[(i, j)].norm().log10();
            acc += r * r;
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { (acc / count as f64).sqrt() })
}

/// Matrix entries that carry independent data: the upper triangle for reciprocal
/// networks, every entry otherwise.
pub(crate) fn fit_entries(data: &SampledNetwork) -> Vec<(usize, usize)> {
    let n = data.n_ports();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !data.reciprocal || i <= j)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRms {
    pub stage: String,
    pub log_mag_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleRow {
    pub freq_hz: f64,
    pub omega_rad_s: f64,
    pub r_row: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config: FitConfig,
    pub samples: usize,
    pub iterations: usize,
    pub converged: bool,
    pub last_pole_change: f64,
    pub stages: Vec<StageRms>,
    pub poles: Vec<PoleRow>,
    pub dropped: Vec<DroppedComponent>,
    pub refine_initial_cost: Option<f64>,
    pub refine_final_cost: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: RationalImpedance,
    pub general: GeneralRational,
    pub report: FitReport,
}

/// Vector fitting, lossless projection and log-magnitude refinement.
pub fn fit(data: &SampledNetwork, cfg: &FitConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let z = if data.kind == ParamKind::Z { data.clone() } else { to_z(data).map_err(Error::stage("S to Z"))? };
    let z = z.restrict(cfg.band.0, cfg.band.1);
    if z.is_empty() {
        return Err(Error::Invalid(format!("no samples inside the band {:?} Hz", cfg.band)));
    }
    let mut state = VFState::new(initial_poles(cfg)?);
    let mut converged = false;
    while state.iteration < cfg.max_iterations {
        state = vf_relocate(&z, &state, cfg).map_err(Error::stage("pole relocation"))?;
        if state.last_change < cfg.pole_convergence_tol {
            converged = true;
            break;
        }
    }
    let general = vf_residues(&z, &state.poles, cfg).map_err(Error::stage("residue fit"))?;
    let mut stages = vec![StageRms { stage: "vector_fit".into(), log_mag_rms: log_mag_rms(&z, |s| Ok(general.eval(s)))? }];
    let proj = enforce_lossless_detailed(&general, cfg).map_err(Error::stage("lossless projection"))?;
    stages.push(StageRms { stage: "lossless".into(), log_mag_rms: log_mag_rms(&z, |s| proj.model.eval(s))? });
    let mut model = proj.model;
    let (mut c0, mut c1) = (None, None);
    if cfg.refine_max_evals > 0 {
        let r = refine_lossless(&model, &z, cfg).map_err(Error::stage("refinement"))?;
        c0 = Some(r.initial_cost);
        c1 = Some(r.final_cost);
        model = r.model;
        stages.push(StageRms { stage: "refined".into(), log_mag_rms: log_mag_rms(&z, |s| model.eval(s))? });
    }
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!("pole relocation stopped after {} iterations without converging", state.iteration));
    }
    let last = stages.last().map(|s| s.log_mag_rms).unwrap_or(0.0);
    if last > HIGH_RMS_WARNING {
        warnings.push(format!("final log-magnitude RMS {last:.3e} is high; more pole pairs may be needed"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let poles = model
        .modes
        .iter()
        .map(|m| PoleRow {
            freq_hz: m.omega / (2.0 * std::f64::consts::PI),
            omega_rad_s: m.omega,
            r_row: m.r_row.iter().cloned().collect(),
        })
        .collect();
    let report = FitReport {
        config: cfg.clone(),
        samples: z.len(),
        iterations: state.iteration,
        converged,
        last_pole_change: state.last_change,
        stages,
        poles,
        dropped: proj.dropped,
        refine_initial_cost: c0,
        refine_final_cost: c1,
        warnings,
    };
    Ok(FitOutcome { model, general, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::Mode;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    pub(crate) fn random_lossless(rng: &mut ChaCha8Rng, n: usize, freqs_ghz: &[f64]) -> RationalImpedance {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let r0 = (&a * a.transpose() + DMatrix::identity(n, n) * 0.5) * 1.0e13;
        let modes = freqs_ghz
            .iter()
            .map(|f| Mode {
                omega: TWO_PI * f * 1e9,
                r_row: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0) * 3e6),
            })
            .collect();
        RationalImpedance::with_default_names(r0, modes).unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::new(2, (1e9, 2e9)).validate().is_ok());
        assert!(FitConfig::new(0, (1e9, 2e9)).validate().is_err());
        assert!(FitConfig::new(2, (2e9, 1e9)).validate().is_err());
        let mut c = FitConfig::new(2, (1e9, 2e9));
        c.rank1_eig_threshold = 1.5;
        assert!(c.validate().is_err());
        assert!((FitConfig::new(1, (1e9, 2e9)).dc_radius() - TWO_PI * 0.5e9).abs() < 1e-3);
    }

    #[test]
    fn noise_free_fit_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = random_lossless(&mut rng, 2, &[3.1, 5.7, 8.2]);
        let data = z.sample_z(&grid(1e9, 10e9, 300)).unwrap();
        let mut cfg = FitConfig::new(4, (1e9, 10e9));
        cfg.refine_max_evals = 0;
        let out = fit(&data, &cfg).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.model.n_modes(), 3);
        for (m, want) in out.model.modes.iter().zip(&z.modes) {
            assert!((m.omega / want.omega - 1.0).abs() < 1e-9);
        }
        let last = out.report.stages.last().unwrap().log_mag_rms;
        assert!(last < 1e-8, "rms {last}");
        assert!(out.report.warnings.is_empty());
    }

    #[test]
    fn underfit_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = random_lossless(&mut rng, 1, &[2.5, 4.5, 6.5, 8.5]);
        let data = z.sample_z(&grid(1e9, 10e9, 400)).unwrap();
        let mut cfg = FitConfig::new(3, (1e9, 10e9));
        cfg.refine_max_evals = 0;
        let out = fit(&data, &cfg).unwrap();
        assert!(out.report.warnings.iter().any(|w| w.contains("RMS")));
    }

    #[test]
    fn s_input_is_converted() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = random_lossless(&mut rng, 2, &[4.0]);
        let zs = z.sample_z(&grid(1e9, 8e9, 200)).unwrap();
        let s = crate::netcore::z_to_s(&zs, 50.0).unwrap();
        let mut cfg = FitConfig::new(2, (1e9, 8e9));
        cfg.refine_max_evals = 0;
        let out = fit(&s, &cfg).unwrap();
        assert!((out.model.modes[0].omega / z.modes[0].omega - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let z = random_lossless(&mut rng, 2, &[3.0, 6.0]);
        let data = z.sample_z(&grid(1e9, 8e9, 150)).unwrap();
        let mut cfg = FitConfig::new(3, (1e9, 8e9));
        cfg.refine_max_evals = 200;
        let a = fit(&data, &cfg).unwrap();
        let b = fit(&data, &cfg).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn noisy_three_port_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = random_lossless(&mut rng, 3, &[2.2, 4.1, 6.6, 8.3]);
        let mut data = z.sample_z(&grid(1e9, 10e9, 400)).unwrap();
        for m in &mut data.data {
            for i in 0..3 {
                for j in i..3 {
                    let eps = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 1e-8;
                    let v = m[(i, j)] * (C64::new(1.0, 0.0) + eps);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        let out = fit(&data, &FitConfig::new(5, (1e9, 10e9))).unwrap();
        assert_eq!(out.model.n_modes(), 4);
        for (m, want) in out.model.modes.iter().zip(&z.modes) {
            assert!((m.omega / want.omega - 1.0).abs() < 1e-6);
        }
        assert!(out.report.stages.last().unwrap().log_mag_rms < 1e-4);
    }
}
