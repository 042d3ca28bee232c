pub mod capacitance;
pub mod constants;
pub mod rational;
pub mod sampled;
pub mod touchstone;

pub use capacitance::{
    grid_capacitance, maxwell_to_mutual, mutual_to_maxwell, MaxwellCapacitance, MaxwellJson, MutualCapacitance,
};
pub use constants::{ej_from_lj, lj_from_ej, PhysicalConstants, E_CHARGE, H_BAR, PHI0, PLANCK};
pub use rational::{CauerFactorization, Mode, RationalImpedance, RationalJson};
pub use sampled::{s_to_z, s_to_z_matrix, to_s, to_z, y_to_z, z_to_s, z_to_s_matrix, z_to_y, ParamKind, SampledNetwork};
