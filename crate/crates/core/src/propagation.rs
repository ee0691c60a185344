//! Time evolution under piecewise-constant Hamiltonians and gate fidelity
//! against the target entangling transformation.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::hamiltonian::{h_sym3, h_two, BasisId, DriveParams, HamiltonianSpec, HERMITICITY_TOL};
use crate::linalg::{eigh, unitarity_deviation, unitary_from_eigh, CMat};
use crate::pulse::{GaussianPulse, Pulse, GAUSSIAN_DT};

/// Unitarity tolerance ‖U†U − I‖_max for propagators.
pub const UNITARITY_TOL: f64 = 1e-10;

/// A unitary propagator tagged with its basis.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub matrix: CMat,
    pub basis: BasisId,
}

impl Propagator {
    pub fn new(matrix: CMat, basis: BasisId) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), got: matrix.nrows() });
        }
        let dev = unitarity_deviation(&matrix);
        if dev >= UNITARITY_TOL {
            return Err(Error::NotUnitary { dev, tol: UNITARITY_TOL });
        }
        Ok(Self { matrix, basis })
    }

    pub fn identity(basis: BasisId) -> Self {
        Self { matrix: CMat::identity(basis.dim(), basis.dim()), basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Conjugate a Product4 propagator into Bell4 coordinates.
    pub fn to_bell(&self) -> Result<Propagator> {
        match self.basis {
            BasisId::Bell4 => Ok(self.clone()),
            BasisId::Product4 => Propagator::new(
                crate::hamiltonian::product_to_bell(&self.matrix),
                BasisId::Bell4,
            ),
            other => Err(Error::UnknownBasis(format!(
                "cannot convert {} to bell4",
                other.label()
            ))),
        }
    }
}

/// Target transformation of Eq-style form: |11⟩ ↦ −|Ψ+⟩, |Ψ+⟩ ↦ |11⟩,
/// identity on |00⟩ and a free phase β on |Ψ−⟩
/// (basis {|11⟩, |Ψ+⟩, |00⟩, |Ψ−⟩}).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetGate {
    pub beta: f64,
}

impl TargetGate {
    pub fn new(beta: f64) -> Self {
        Self { beta }
    }

    /// Fixed symmetric-subspace block.
    pub fn matrix3() -> CMat {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        CMat::from_row_slice(3, 3, &[z, one, z, -one, z, z, z, z, one])
    }

    pub fn matrix(&self) -> CMat {
        let mut t = CMat::zeros(4, 4);
        let t3 = Self::matrix3();
        for i in 0..3 {
            for j in 0..3 {
                t[(i, j)] = t3[(i, j)];
            }
        }
        t[(3, 3)] = C64::from_polar(1.0, self.beta);
        t
    }
}

/// How the free antisymmetric phase β is treated when scoring a gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaPolicy {
    /// Score against the single member T(β).
    Fixed(f64),
    /// Score against the best member of the T(β) family, so the
    /// antisymmetric phase never penalizes the fidelity.
    Absorb,
}

/// System a pulse is propagated on: basis plus the drift parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub basis: BasisId,
    /// Detuning, rad/s.
    pub delta: f64,
    /// DDI energy, J (ignored for the single-molecule basis).
    pub v: f64,
}

impl SystemParams {
    pub fn new(basis: BasisId, delta: f64, v: f64) -> Self {
        Self { basis, delta, v }
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianSpec> {
        let drive = DriveParams::new(self.delta, 0.0, 0.0, self.v);
        match self.basis {
            BasisId::Single => Ok(crate::hamiltonian::h_single(&drive)),
            BasisId::Sym3 => Ok(h_sym3(&drive)),
            BasisId::Product4 | BasisId::Bell4 => h_two(self.basis, &drive),
            BasisId::Motional12 => Err(Error::UnknownBasis(
                "motional12 propagation lives in the motional module".into(),
            )),
        }
    }
}

/// Non-fatal conditions noticed while propagating.
#[derive(Debug, Clone, PartialEq)]
pub enum PropagationWarning {
    EmptyPulse,
    /// Pulse shorter than the 2πħ/|V| needed to resolve the two transitions.
    UnresolvedTransitions { tau_gate: f64, required: f64 },
}

/// Propagation result: the propagator plus any warnings.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub propagator: Propagator,
    pub warnings: Vec<PropagationWarning>,
}

/// Minimum gate duration 2πħ/|V| that resolves the |11⟩↔|Ψ+⟩ and
/// |00⟩↔|Ψ+⟩ transitions; infinite for V = 0.
pub fn resolvability_required_duration(v: f64) -> f64 {
    TAU * HBAR / v.abs()
}

fn resolvability_warning(tau_gate: f64, v: f64) -> Option<PropagationWarning> {
    let required = resolvability_required_duration(v);
    (tau_gate < required).then_some(PropagationWarning::UnresolvedTransitions { tau_gate, required })
}

/// Exact one-step propagator U = exp(−i H dt / ħ) via eigendecomposition.
pub fn expm_step(h: &CMat, dt: f64) -> Result<CMat> {
    if dt <= 0.0 {
        return Err(Error::Domain("step duration must be positive".into()));
    }
    let (values, vectors) = eigh(h, HERMITICITY_TOL)?;
    Ok(unitary_from_eigh(&values, &vectors, dt / HBAR))
}

/// Time-ordered product U = U_N ··· U_1 of the pulse steps on `system`.
pub fn propagate(pulse: &Pulse, system: &SystemParams) -> Result<Propagation> {
    let spec = system.hamiltonian()?;
    let dim = spec.dim();
    let mut warnings = Vec::new();
    if pulse.is_empty() {
        warnings.push(PropagationWarning::EmptyPulse);
    }
    if system.v != 0.0 && spec.dim() > 2 {
        if let Some(w) = resolvability_warning(pulse.duration(), system.v) {
            warnings.push(w);
        }
    }
    let mut u = CMat::identity(dim, dim);
    for step in &pulse.steps {
        let (ox, oy) = step.quadratures();
        u = expm_step(&spec.at(ox, oy), pulse.dt)? * u;
    }
    Ok(Propagation { propagator: Propagator::new(u, system.basis)?, warnings })
}

/// Propagate a Gaussian pulse (discretized at [`GAUSSIAN_DT`]) on a
/// two-molecule system with DDI energy `v`; the pulse's own constant
/// detuning is used.
pub fn propagate_gaussian(pulse: &GaussianPulse, basis: BasisId, v: f64) -> Result<Propagation> {
    propagate_gaussian_dt(pulse, basis, v, GAUSSIAN_DT)
}

/// As [`propagate_gaussian`] with an explicit discretization step.
pub fn propagate_gaussian_dt(
    pulse: &GaussianPulse,
    basis: BasisId,
    v: f64,
    dt: f64,
) -> Result<Propagation> {
    let steps = pulse.discretize(dt)?;
    propagate(&steps, &SystemParams::new(basis, pulse.delta, v))
}

/// Trace of T₃† times the upper-left 3×3 block of `u`.
fn symmetric_block_trace(u: &CMat) -> C64 {
    let t3 = TargetGate::matrix3();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            acc += t3[(i, j)].conj() * u[(i, j)];
        }
    }
    acc
}

/// The β realized by a Bell4 propagator under the absorb policy:
/// the antisymmetric phase relative to the symmetric-block trace.
pub fn absorbed_beta(u: &Propagator) -> Result<f64> {
    if u.basis != BasisId::Bell4 {
        return Err(Error::UnknownBasis(format!(
            "absorbed_beta needs bell4, got {}",
            u.basis.label()
        )));
    }
    let tr3 = symmetric_block_trace(&u.matrix);
    Ok(u.matrix[(3, 3)].arg() - tr3.arg())
}

/// Gate fidelity F = |tr(T(β)† U)|² / dim² against the target family.
///
/// Accepts a Bell4 propagator (full two-qubit space) or a Sym3 one, which is
/// scored against the fixed symmetric block T₃. Under [`BetaPolicy::Absorb`]
/// the best family member is used, i.e. the |Ψ−⟩ phase never penalizes F.
pub fn gate_fidelity(u: &Propagator, policy: BetaPolicy) -> Result<f64> {
    let dev = unitarity_deviation(&u.matrix);
    if dev >= UNITARITY_TOL {
        return Err(Error::NotUnitary { dev, tol: UNITARITY_TOL });
    }
    match u.basis {
        BasisId::Sym3 => {
            let tr3 = symmetric_block_trace(&u.matrix);
            Ok((tr3.norm() / 3.0).powi(2))
        }
        BasisId::Bell4 => {
            let tr3 = symmetric_block_trace(&u.matrix);
            let anti = u.matrix[(3, 3)];
            let total = match policy {
                BetaPolicy::Fixed(beta) => (tr3 + C64::from_polar(1.0, -beta) * anti).norm(),
                BetaPolicy::Absorb => tr3.norm() + anti.norm(),
            };
            Ok((total / 4.0).powi(2))
        }
        other => Err(Error::UnknownBasis(format!(
            "gate_fidelity needs bell4 or sym3, got {}",
            other.label()
        ))),
    }
}

/// Fidelity of a Gaussian pulse versus a constant detuning error grid
/// (ordinary Hz). Returns (error_hz, fidelity) pairs in grid order.
pub fn gaussian_error_scan(
    base: &GaussianPulse,
    v: f64,
    delta_error_grid_hz: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if delta_error_grid_hz.is_empty() {
        return Err(Error::Config("detuning error grid must be non-empty".into()));
    }
    delta_error_grid_hz
        .par_iter()
        .map(|&err| {
            let shifted = GaussianPulse { delta: base.delta + TAU * err, ..*base };
            let prop = propagate_gaussian(&shifted, BasisId::Bell4, v)?;
            Ok((err, gate_fidelity(&prop.propagator, BetaPolicy::Absorb)?))
        })
        .collect()
}
