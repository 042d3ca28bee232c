/// Planck constant, J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Elementary charge, C (exact SI value).
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant, J·s.
pub const H_BAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
/// Superconducting flux quantum h/2e, Wb.
pub const PHI0: f64 = PLANCK / (2.0 * E_CHARGE);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub h_bar: f64,
    pub e_charge: f64,
    pub phi0: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { h_bar: H_BAR, e_charge: E_CHARGE, phi0: PHI0 }
    }
}

/// Josephson energy of a junction with inductance `l_j`.
pub fn ej_from_lj(l_j: f64) -> f64 {
    PHI0 * PHI0 / (4.0 * std::f64::consts::PI.powi(2) * l_j)
}

/// Inverse of [`ej_from_lj`].
pub fn lj_from_ej(e_j: f64) -> f64 {
    PHI0 * PHI0 / (4.0 * std::f64::consts::PI.powi(2) * e_j)
}
