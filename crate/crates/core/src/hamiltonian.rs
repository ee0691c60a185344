//! Rotating-frame Hamiltonians for one and two driven molecules, the
//! dipole–dipole interaction strength and its geometry factor.
//!
//! All drift matrices are in joules. Control generators are dimensionless;
//! the assembled Hamiltonian is `drift + (ħΩx/2)·Cx + (ħΩy/2)·Cy`, so a
//! single-quadrature drive of Rabi frequency Ω sets Ωx = Ω, Ωy = 0.
//! Constant energy offsets proportional to the identity are dropped
//! throughout: they contribute only a global phase.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;

use crate::constants::{EPSILON_0, HBAR};
use crate::error::{Error, Result};
use crate::linalg::{hermiticity_deviation, CMat};

/// Hermiticity tolerance for emitted matrices.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Trap geometry of the molecule pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleGeometry {
    /// Equilibrium trap separation, m.
    pub r_e: f64,
    /// Angle between the separation vector and the quantization (z) axis, rad.
    pub theta: f64,
}

impl DipoleGeometry {
    pub fn new(r_e: f64, theta: f64) -> Result<Self> {
        if r_e <= 0.0 {
            return Err(Error::Domain("separation r_e must be positive".into()));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::Domain("theta must lie in [0, pi]".into()));
        }
        Ok(Self { r_e, theta })
    }

    /// Signed DDI energy V = η(θ)·V_ddi for dipole moment `d10`, in J.
    pub fn ddi_energy(&self, d10: f64) -> Result<f64> {
        Ok(geometry_factor(self.theta) * vddi_point(d10, self.r_e)?)
    }
}

/// Drive parameters entering the rotating-frame Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveParams {
    /// Detuning Δ = ω_mol − ω_mw, rad/s (signed).
    pub delta: f64,
    /// X-quadrature Rabi amplitude, rad/s.
    pub omega_x: f64,
    /// Y-quadrature Rabi amplitude, rad/s.
    pub omega_y: f64,
    /// Signed dipole–dipole energy V, J.
    pub v: f64,
}

impl DriveParams {
    pub fn new(delta: f64, omega_x: f64, omega_y: f64, v: f64) -> Self {
        Self { delta, omega_x, omega_y, v }
    }

    /// Physical Rabi amplitude √(Ωx² + Ωy²), rad/s.
    pub fn rabi(&self) -> f64 {
        self.omega_x.hypot(self.omega_y)
    }
}

/// Basis in which a Hamiltonian or propagator is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisId {
    /// Single molecule {|1⟩, |0⟩}.
    Single,
    /// Symmetric two-molecule subspace {|11⟩, |Ψ+⟩, |00⟩}.
    Sym3,
    /// Two-molecule product basis {|11⟩, |10⟩, |01⟩, |00⟩}.
    Product4,
    /// Two-molecule Bell basis {|11⟩, |Ψ+⟩, |00⟩, |Ψ−⟩}.
    Bell4,
    /// Internal ⊗ motional space, motional blocks (0,0), (0,1), (1,0)
    /// each holding the Bell4 internal basis.
    Motional12,
}

impl BasisId {
    pub fn dim(&self) -> usize {
        match self {
            BasisId::Single => 2,
            BasisId::Sym3 => 3,
            BasisId::Product4 | BasisId::Bell4 => 4,
            BasisId::Motional12 => 12,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            BasisId::Single => "single",
            BasisId::Sym3 => "sym3",
            BasisId::Product4 => "product4",
            BasisId::Bell4 => "bell4",
            BasisId::Motional12 => "motional12",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(BasisId::Single),
            "sym3" => Ok(BasisId::Sym3),
            "product4" => Ok(BasisId::Product4),
            "bell4" => Ok(BasisId::Bell4),
            "motional12" => Ok(BasisId::Motional12),
            other => Err(Error::UnknownBasis(other.to_string())),
        }
    }
}

/// Drift + control structure of a Hamiltonian in a fixed basis.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub basis: BasisId,
    /// Drift Hamiltonian, J.
    pub drift: CMat,
    /// Dimensionless x-quadrature control generator (multiplied by ħΩx/2).
    pub control_x: CMat,
    /// Dimensionless y-quadrature control generator (multiplied by ħΩy/2).
    pub control_y: CMat,
}

impl HamiltonianSpec {
    fn checked(self) -> Result<Self> {
        for m in [&self.drift, &self.control_x, &self.control_y] {
            let dev = hermiticity_deviation(m);
            if dev >= HERMITICITY_TOL {
                return Err(Error::NotHermitian { dev, tol: HERMITICITY_TOL });
            }
            if m.nrows() != self.basis.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.basis.dim(),
                    got: m.nrows(),
                });
            }
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Full Hamiltonian at the given quadrature amplitudes (rad/s), in J.
    pub fn at(&self, omega_x: f64, omega_y: f64) -> CMat {
        let mut h = self.drift.clone();
        h += self.control_x.map(|z| z * C64::from(0.5 * HBAR * omega_x));
        h += self.control_y.map(|z| z * C64::from(0.5 * HBAR * omega_y));
        h
    }
}

/// Point-dipole DDI scale V_ddi = d10²/(4πε₀ r³), J.
pub fn vddi_point(d10: f64, r: f64) -> Result<f64> {
    if d10 < 0.0 {
        return Err(Error::Domain("dipole moment must be non-negative".into()));
    }
    if r <= 0.0 {
        return Err(Error::Domain("separation must be positive".into()));
    }
    Ok(d10 * d10 / (4.0 * PI * EPSILON_0 * r.powi(3)))
}

/// Geometry factor η(θ) = 1 − 3cos²θ; bounded by |η| ≤ 2.
pub fn geometry_factor(theta: f64) -> f64 {
    1.0 - 3.0 * theta.cos().powi(2)
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Complex drive coupling ⟨1|H_c|0⟩/(ħ/2) = Ωx − iΩy.
fn quadrature(omega_x: f64, omega_y: f64) -> C64 {
    C64::new(omega_x, -omega_y)
}

/// Single-molecule rotating-frame Hamiltonian, basis {|1⟩, |0⟩}.
pub fn h_single(drive: &DriveParams) -> HamiltonianSpec {
    let drift = CMat::from_row_slice(2, 2, &[
        c(0.5 * HBAR * drive.delta), c(0.0),
        c(0.0), c(-0.5 * HBAR * drive.delta),
    ]);
    // sigma_x and sigma_y
    let control_x = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    let control_y = CMat::from_row_slice(2, 2, &[
        c(0.0), C64::new(0.0, -1.0),
        C64::new(0.0, 1.0), c(0.0),
    ]);
    HamiltonianSpec { basis: BasisId::Single, drift, control_x, control_y }
        .checked()
        .expect("h_single is Hermitian by construction")
}

/// Change of basis from Product4 to Bell4: columns are the Bell4 basis
/// vectors {|11⟩, |Ψ+⟩, |00⟩, |Ψ−⟩} in Product4 coordinates
/// {|11⟩, |10⟩, |01⟩, |00⟩}.
pub fn bell_basis_in_product() -> CMat {
    let s = 1.0 / SQRT_2;
    CMat::from_row_slice(4, 4, &[
        c(1.0), c(0.0), c(0.0), c(0.0),
        c(0.0), c(s),   c(0.0), c(-s),
        c(0.0), c(s),   c(0.0), c(s),
        c(0.0), c(0.0), c(1.0), c(0.0),
    ])
}

/// Conjugate a Product4 matrix into Bell4 coordinates.
pub fn product_to_bell(m: &CMat) -> CMat {
    let b = bell_basis_in_product();
    b.adjoint() * m * b
}

/// Two-molecule rotating-frame Hamiltonian in Product4 or Bell4.
pub fn h_two(basis: BasisId, drive: &DriveParams) -> Result<HamiltonianSpec> {
    match basis {
        BasisId::Product4 => Ok(h_two_product(drive)),
        BasisId::Bell4 => {
            let p = h_two_product(drive);
            HamiltonianSpec {
                basis: BasisId::Bell4,
                drift: product_to_bell(&p.drift),
                control_x: product_to_bell(&p.control_x),
                control_y: product_to_bell(&p.control_y),
            }
            .checked()
        }
        other => Err(Error::UnknownBasis(format!(
            "h_two supports product4 and bell4, not {}",
            other.label()
        ))),
    }
}

fn h_two_product(drive: &DriveParams) -> HamiltonianSpec {
    let hd = HBAR * drive.delta;
    let v = drive.v;
    let z = c(0.0);
    // basis {|11>, |10>, |01>, |00>}; DDI is the exchange coupling |10><01| + h.c.
    let drift = CMat::from_row_slice(4, 4, &[
        c(hd), z,      z,      z,
        z,     z,      c(v),   z,
        z,     c(v),   z,      z,
        z,     z,      z,      c(-hd),
    ]);
    // sigma_x^A + sigma_x^B
    let one = c(1.0);
    let control_x = CMat::from_row_slice(4, 4, &[
        z, one, one, z,
        one, z, z, one,
        one, z, z, one,
        z, one, one, z,
    ]);
    // sigma_y^A + sigma_y^B
    let mi = C64::new(0.0, -1.0);
    let pi_ = C64::new(0.0, 1.0);
    let control_y = CMat::from_row_slice(4, 4, &[
        z, mi, mi, z,
        pi_, z, z, mi,
        pi_, z, z, mi,
        z, pi_, pi_, z,
    ]);
    HamiltonianSpec { basis: BasisId::Product4, drift, control_x, control_y }
        .checked()
        .expect("h_two_product is Hermitian by construction")
}

/// Symmetric-subspace Hamiltonian, basis {|11⟩, |Ψ+⟩, |00⟩}:
/// drift diag(ħΔ, V, −ħΔ), controls the spin-1 operators Ix, Iy
/// (scaled so that the assembled coupling is ħΩ/√2, matching Bell4).
pub fn h_sym3(drive: &DriveParams) -> HamiltonianSpec {
    let hd = HBAR * drive.delta;
    let z = c(0.0);
    let drift = CMat::from_row_slice(3, 3, &[
        c(hd), z, z,
        z, c(drive.v), z,
        z, z, c(-hd),
    ]);
    let r = c(SQRT_2);
    let control_x = CMat::from_row_slice(3, 3, &[
        z, r, z,
        r, z, r,
        z, r, z,
    ]);
    let iy = C64::new(0.0, SQRT_2);
    let control_y = CMat::from_row_slice(3, 3, &[
        z, -iy, z,
        iy, z, -iy,
        z, iy, z,
    ]);
    HamiltonianSpec { basis: BasisId::Sym3, drift, control_x, control_y }
        .checked()
        .expect("h_sym3 is Hermitian by construction")
}

/// Magnitude of the dressed-eigenstate EDM, |d| = d10·Ω/√(Δ² + Ω²).
pub fn dressed_edm(delta: f64, omega: f64, d10: f64) -> Result<f64> {
    if omega < 0.0 {
        return Err(Error::Domain("Rabi amplitude must be non-negative".into()));
    }
    if delta == 0.0 && omega == 0.0 {
        return Err(Error::Domain(
            "dressed EDM undefined at delta = omega = 0".into(),
        ));
    }
    Ok(d10 * omega / delta.hypot(omega))
}
