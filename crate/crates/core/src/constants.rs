//! Physical constants (SI).

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// One Debye in C m.
pub const DEBYE: f64 = 3.33564e-30;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
