//! Robustness-averaged BFGS-GRAPE optimization of piecewise-constant
//! controls, plus fidelity-landscape scans.
//!
//! Optimization runs in the 3×3 symmetric subspace; reported fidelities are
//! evaluated in the full 4×4 Bell basis. The objective averaged over the
//! robustness grid is `mean |tr(T† U)|²/d²` over Rabi multipliers f_Ω and
//! detuning offsets.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::hamiltonian::BasisId;
use crate::linalg::{eigh, trace_adjoint_product, CMat};
use crate::propagation::{gate_fidelity, propagate, BetaPolicy, SystemParams, TargetGate};
use crate::pulse::{Pulse, PulseStep};

/// GRAPE optimizer configuration. Frequencies are internal units:
/// `omega_cap` in rad/s, the detuning offsets in ordinary Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct GrapeConfig {
    pub n_steps: usize,
    /// Step duration, s.
    pub dt: f64,
    /// Maximum Rabi amplitude, rad/s.
    pub omega_cap: f64,
    /// Rabi-amplitude multipliers of the robustness grid; must contain 1.0.
    pub f_omega_grid: Vec<f64>,
    /// Detuning offsets of the robustness grid, ordinary Hz.
    pub delta_offset_grid_hz: Vec<f64>,
    pub rng_seed: u64,
    pub max_iters: usize,
    /// Convergence threshold on the scaled projected-gradient max-norm.
    pub grad_tol: f64,
}

impl Default for GrapeConfig {
    fn default() -> Self {
        Self {
            n_steps: 100,
            dt: 5e-6,
            omega_cap: TAU * 50e3,
            f_omega_grid: vec![0.9, 1.0, 1.1],
            delta_offset_grid_hz: vec![-1000.0, -500.0, 0.0, 500.0, 1000.0],
            rng_seed: 42,
            max_iters: 5000,
            grad_tol: 1e-8,
        }
    }
}

impl GrapeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be positive".into()));
        }
        if self.dt <= 0.0 {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.omega_cap <= 0.0 {
            return Err(Error::Config("omega_cap must be positive".into()));
        }
        if self.f_omega_grid.is_empty() || self.delta_offset_grid_hz.is_empty() {
            return Err(Error::Config("robustness grids must be non-empty".into()));
        }
        if !self.f_omega_grid.iter().any(|&f| (f - 1.0).abs() < 1e-12) {
            return Err(Error::Config("f_omega_grid must contain 1.0".into()));
        }
        Ok(())
    }

    pub fn tau_gate(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

/// One case of the robustness ensemble: a drift, control generators, a
/// target, the Rabi multiplier and its averaging weight.
#[derive(Debug, Clone)]
pub(crate) struct EnsembleMember {
    pub drift: CMat,
    pub control_x: CMat,
    pub control_y: CMat,
    pub target: CMat,
    pub f_scale: f64,
    pub weight: f64,
}

/// A set of ensemble members sharing the pulse discretization.
#[derive(Debug, Clone)]
pub(crate) struct ControlEnsemble {
    pub members: Vec<EnsembleMember>,
    pub dt: f64,
    pub n_steps: usize,
}

struct MemberEval {
    fidelity: f64,
    weight: f64,
    grad: Option<Vec<(f64, f64)>>,
}

impl ControlEnsemble {
    /// Weighted mean fidelity over the members.
    fn objective(&self, xy: &[(f64, f64)]) -> f64 {
        self.eval(xy, false).iter().map(|m| m.weight * m.fidelity).sum()
    }

    /// Weighted mean fidelity and its gradient with respect to the nominal
    /// quadratures (∂F/∂Ωx_j, ∂F/∂Ωy_j).
    fn objective_and_gradient(&self, xy: &[(f64, f64)]) -> (f64, Vec<(f64, f64)>) {
        let evals = self.eval(xy, true);
        let mut total = 0.0;
        let mut grad = vec![(0.0, 0.0); self.n_steps];
        for m in &evals {
            total += m.weight * m.fidelity;
            let g = m.grad.as_ref().expect("gradient requested");
            for (acc, &(gx, gy)) in grad.iter_mut().zip(g.iter()) {
                acc.0 += m.weight * gx;
                acc.1 += m.weight * gy;
            }
        }
        (total, grad)
    }

    fn eval(&self, xy: &[(f64, f64)], with_grad: bool) -> Vec<MemberEval> {
        // members evaluated in parallel, reduced in fixed order
        self.members
            .par_iter()
            .map(|m| self.eval_member(m, xy, with_grad))
            .collect()
    }

    fn eval_member(&self, m: &EnsembleMember, xy: &[(f64, f64)], with_grad: bool) -> MemberEval {
        let dim = m.drift.nrows();
        let tau = self.dt / HBAR;
        let mut eigs: Vec<(DVector<f64>, CMat)> = Vec::with_capacity(self.n_steps);
        let mut step_us: Vec<CMat> = Vec::with_capacity(self.n_steps);
        for &(ox, oy) in xy {
            let mut h = m.drift.clone();
            h += m.control_x.map(|z| z * C64::from(0.5 * HBAR * m.f_scale * ox));
            h += m.control_y.map(|z| z * C64::from(0.5 * HBAR * m.f_scale * oy));
            let (vals, vecs) = eigh(&h, crate::hamiltonian::HERMITICITY_TOL)
                .expect("ensemble Hamiltonians are Hermitian by construction");
            step_us.push(crate::linalg::unitary_from_eigh(&vals, &vecs, tau));
            eigs.push((vals, vecs));
        }

        // forward products P_k = U_k ... U_1 and suffixes S_k = U_N ... U_k
        let mut prefixes: Vec<CMat> = Vec::with_capacity(self.n_steps + 1);
        prefixes.push(CMat::identity(dim, dim));
        for u in &step_us {
            let last = prefixes.last().unwrap();
            prefixes.push(u * last);
        }
        let c = trace_adjoint_product(&m.target, &prefixes[self.n_steps]);
        let d2 = (dim * dim) as f64;
        let fidelity = c.norm_sqr() / d2;
        if !with_grad {
            return MemberEval { fidelity, weight: m.weight, grad: None };
        }

        let mut suffixes: Vec<CMat> = vec![CMat::identity(dim, dim); self.n_steps + 1];
        for k in (0..self.n_steps).rev() {
            suffixes[k] = &suffixes[k + 1] * &step_us[k];
        }

        let t_adj = m.target.adjoint();
        let mut grad = Vec::with_capacity(self.n_steps);
        for k in 0..self.n_steps {
            let (vals, vecs) = &eigs[k];
            // X = V† P_{k-1} T† S_{k+1} V
            let x = vecs.adjoint() * &prefixes[k] * &t_adj * &suffixes[k + 1] * vecs;
            let wx = vecs.adjoint() * m.control_x.map(|z| z * C64::from(0.5 * m.f_scale)) * vecs;
            let wy = vecs.adjoint() * m.control_y.map(|z| z * C64::from(0.5 * m.f_scale)) * vecs;
            // K_ab = -i tau e^{-i(la+lb)tau/2} sinc((la-lb)tau/2)
            let mut dcx = C64::new(0.0, 0.0);
            let mut dcy = C64::new(0.0, 0.0);
            for a in 0..dim {
                for b in 0..dim {
                    let half_sum = 0.5 * (vals[a] + vals[b]) * tau;
                    let half_diff = 0.5 * (vals[a] - vals[b]) * tau;
                    let sinc = if half_diff.abs() < 1e-30 {
                        1.0
                    } else {
                        half_diff.sin() / half_diff
                    };
                    let kab = C64::new(0.0, -tau)
                        * C64::from_polar(1.0, -half_sum)
                        * C64::from(sinc);
                    dcx += wx[(a, b)] * kab * x[(b, a)];
                    dcy += wy[(a, b)] * kab * x[(b, a)];
                }
            }
            // dF/dtheta = 2 Re(conj(c) dc)/d^2  (hbar cancels: dH/dOmega = hbar f C/2)
            grad.push((
                2.0 * (c.conj() * dcx).re / d2,
                2.0 * (c.conj() * dcy).re / d2,
            ));
        }
        MemberEval { fidelity, weight: m.weight, grad: Some(grad) }
    }
}

/// Build the symmetric-subspace robustness ensemble for a system.
fn sym3_ensemble(cfg: &GrapeConfig, sys: &SystemParams) -> Result<ControlEnsemble> {
    cfg.validate()?;
    if sys.basis != BasisId::Sym3 {
        return Err(Error::UnknownBasis(format!(
            "GRAPE optimizes on sym3, got {}",
            sys.basis.label()
        )));
    }
    let mut members = Vec::new();
    let weight = 1.0 / (cfg.f_omega_grid.len() * cfg.delta_offset_grid_hz.len()) as f64;
    for &f in &cfg.f_omega_grid {
        for &off in &cfg.delta_offset_grid_hz {
            let shifted = SystemParams::new(BasisId::Sym3, sys.delta + TAU * off, sys.v);
            let spec = shifted.hamiltonian()?;
            members.push(EnsembleMember {
                drift: spec.drift,
                control_x: spec.control_x,
                control_y: spec.control_y,
                target: TargetGate::matrix3(),
                f_scale: f,
                weight,
            });
        }
    }
    Ok(ControlEnsemble { members, dt: cfg.dt, n_steps: cfg.n_steps })
}

fn pulse_to_xy(pulse: &Pulse, n_steps: usize) -> Result<Vec<(f64, f64)>> {
    if pulse.len() != n_steps {
        return Err(Error::DimensionMismatch { expected: n_steps, got: pulse.len() });
    }
    Ok(pulse.steps.iter().map(|s| s.quadratures()).collect())
}

/// Mean gate fidelity of `pulse` over the robustness grid, evaluated in the
/// 3×3 optimization space.
pub fn ensemble_fidelity(pulse: &Pulse, cfg: &GrapeConfig, sys: &SystemParams) -> Result<f64> {
    let ens = sym3_ensemble(cfg, sys)?;
    Ok(ens.objective(&pulse_to_xy(pulse, cfg.n_steps)?))
}

/// Exact gradient of [`ensemble_fidelity`] with respect to the per-step
/// quadratures, as (∂F/∂Ωx_j, ∂F/∂Ωy_j) in fidelity per rad/s.
pub fn fidelity_gradient(
    pulse: &Pulse,
    cfg: &GrapeConfig,
    sys: &SystemParams,
) -> Result<Vec<(f64, f64)>> {
    let ens = sym3_ensemble(cfg, sys)?;
    Ok(ens.objective_and_gradient(&pulse_to_xy(pulse, cfg.n_steps)?).1)
}

/// Optimization diagnostics. Fidelity fields are evaluated in the full 4×4
/// Bell space; `objective_history` tracks the 3×3 ensemble objective of
/// accepted iterates, which is non-decreasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub iterations: usize,
    pub converged: bool,
    /// Final ensemble objective in the optimization space.
    pub ensemble_fidelity: f64,
    pub objective_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    /// Mean 4×4 fidelity over the robustness grid.
    pub final_average_fidelity: f64,
    /// 4×4 fidelity at the nominal grid point (f_Ω = 1, zero offset).
    pub nominal_fidelity: f64,
    pub grid_fidelities: Vec<GridPointFidelity>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPointFidelity {
    pub f_omega: f64,
    pub delta_err_hz: f64,
    pub fidelity: f64,
}

/// Outcome of the projected-BFGS loop before evaluation-space scoring.
struct BfgsOutcome {
    xy: Vec<(f64, f64)>,
    iterations: usize,
    converged: bool,
    objective_history: Vec<f64>,
    grad_norm_history: Vec<f64>,
}

/// Projected BFGS ascent of the ensemble objective. Variables are the
/// per-step quadratures scaled by `omega_cap`; the amplitude bound is the
/// per-step disk ‖(Ωx, Ωy)‖ ≤ omega_cap, enforced by radial projection.
/// Curvature pairs touching the active bound are skipped so the quasi-Newton
/// model stays consistent with exact interior gradients.
fn optimize_bfgs(
    ens: &ControlEnsemble,
    x0: &[(f64, f64)],
    omega_cap: f64,
    max_iters: usize,
    grad_tol: f64,
) -> BfgsOutcome {
    let n = ens.n_steps;
    let dim = 2 * n;
    let cap = omega_cap;

    let project = |u: &DVector<f64>| -> DVector<f64> {
        let mut p = u.clone();
        for j in 0..n {
            let r = p[2 * j].hypot(p[2 * j + 1]);
            if r > 1.0 {
                p[2 * j] /= r;
                p[2 * j + 1] /= r;
            }
        }
        p
    };
    let to_xy = |u: &DVector<f64>| -> Vec<(f64, f64)> {
        (0..n).map(|j| (cap * u[2 * j], cap * u[2 * j + 1])).collect()
    };
    // minimize phi = 1 - F; gradient in scaled units
    let eval = |u: &DVector<f64>| -> (f64, DVector<f64>) {
        let (f, grad) = ens.objective_and_gradient(&to_xy(u));
        let mut g = DVector::zeros(dim);
        for j in 0..n {
            g[2 * j] = -cap * grad[j].0;
            g[2 * j + 1] = -cap * grad[j].1;
        }
        (1.0 - f, g)
    };

    let mut u = project(&DVector::from_iterator(
        dim,
        x0.iter().flat_map(|&(x, y)| [x / cap, y / cap]),
    ));
    let (mut phi, mut g) = eval(&u);
    let mut h_inv: DMatrix<f64> = DMatrix::identity(dim, dim);
    let mut first_update = true;

    let mut objective_history = vec![1.0 - phi];
    let mut grad_norm_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iters {
        let pg = &u - &project(&(&u - &g));
        let pg_norm = pg.amax();
        grad_norm_history.push(pg_norm);
        if pg_norm < grad_tol {
            converged = true;
            break;
        }

        let mut dir = -(&h_inv * &g);
        if dir.dot(&g) >= 0.0 {
            h_inv = DMatrix::identity(dim, dim);
            first_update = true;
            dir = -g.clone();
        }

        // Armijo backtracking on the projected step
        let c1 = 1e-4;
        let mut alpha = 1.0;
        let mut accepted: Option<(DVector<f64>, f64)> = None;
        for _ in 0..60 {
            let trial = project(&(&u + alpha * &dir));
            let step = &trial - &u;
            if step.amax() == 0.0 {
                break;
            }
            let phi_trial = 1.0 - ens.objective(&to_xy(&trial));
            if phi_trial <= phi + c1 * g.dot(&step) {
                accepted = Some((trial, phi_trial));
                break;
            }
            alpha *= 0.5;
        }
        let Some((u_new, phi_new)) = accepted else {
            // try plain steepest descent once before giving up
            if first_update {
                break;
            }
            h_inv = DMatrix::identity(dim, dim);
            first_update = true;
            continue;
        };

        iterations += 1;
        let (_, g_new) = eval(&u_new);
        let s = &u_new - &u;
        let y = &g_new - &g;
        let sy = s.dot(&y);

        // skip the curvature pair when the projection clipped the step
        let unclipped = {
            let raw = &u + alpha * &dir;
            (0..dim).all(|i| (raw[i] - u_new[i]).abs() <= 1e-14 * raw[i].abs().max(1.0))
        };
        if unclipped && sy > 1e-12 * s.norm() * y.norm() {
            if first_update {
                let scale = sy / y.dot(&y);
                h_inv = DMatrix::identity(dim, dim) * scale;
                first_update = false;
            }
            let rho = 1.0 / sy;
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            let hys = &hy * s.transpose();
            h_inv = &h_inv - (&hys + hys.transpose()) * rho
                + (&s * s.transpose()) * (rho * rho * yhy + rho);
        }

        u = u_new;
        phi = phi_new;
        g = g_new;
        objective_history.push(1.0 - phi);
    }

    BfgsOutcome {
        xy: to_xy(&u),
        iterations,
        converged,
        objective_history,
        grad_norm_history,
    }
}

fn random_initial(cfg: &GrapeConfig) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    (0..cfg.n_steps)
        .map(|_| {
            let amp = rng.random::<f64>() * 0.1 * cfg.omega_cap;
            let phase = rng.random::<f64>() * TAU;
            (amp * phase.cos(), amp * phase.sin())
        })
        .collect()
}

/// Evaluate a pulse at one 4×4 grid point.
fn bell4_point_fidelity(pulse: &Pulse, sys: &SystemParams, f: f64, off_hz: f64) -> Result<f64> {
    let scaled = Pulse::new(
        pulse.dt,
        pulse
            .steps
            .iter()
            .map(|s| PulseStep { amplitude: f * s.amplitude, phase: s.phase })
            .collect(),
    )?;
    let shifted = SystemParams::new(BasisId::Bell4, sys.delta + TAU * off_hz, sys.v);
    let prop = propagate(&scaled, &shifted)?;
    gate_fidelity(&prop.propagator, BetaPolicy::Absorb)
}

/// Run BFGS-GRAPE on the symmetric subspace of `sys` (basis must be sym3).
///
/// Starts from `initial` or the seeded random guess, warms up on the nominal
/// grid point, then ascends the robustness-averaged objective. Returns the
/// optimized pulse and a report with 4×4-space fidelities.
pub fn grape_optimize(
    cfg: &GrapeConfig,
    sys: &SystemParams,
    initial: Option<&Pulse>,
) -> Result<(Pulse, OptimizationReport)> {
    cfg.validate()?;
    let ens = sym3_ensemble(cfg, sys)?;
    let x0 = match initial {
        Some(p) => pulse_to_xy(p, cfg.n_steps)?,
        None => random_initial(cfg),
    };

    // warm-up on the nominal member alone: cheap and moves the random start
    // into the basin where the ensemble objective is informative
    let nominal = ControlEnsemble {
        members: ens
            .members
            .iter()
            .filter(|m| (m.f_scale - 1.0).abs() < 1e-12)
            .take(1)
            .map(|m| EnsembleMember {
                drift: sym3_drift(sys),
                weight: 1.0,
                ..m.clone()
            })
            .collect(),
        dt: cfg.dt,
        n_steps: cfg.n_steps,
    };
    let warm_iters = (cfg.max_iters / 4).clamp(1, 600);
    let warm = optimize_bfgs(&nominal, &x0, cfg.omega_cap, warm_iters, cfg.grad_tol);

    let main = optimize_bfgs(&ens, &warm.xy, cfg.omega_cap, cfg.max_iters, cfg.grad_tol);

    let pulse = Pulse::from_quadratures(cfg.dt, &main.xy)?;
    let report = score_report(cfg, sys, &pulse, &main)?;
    Ok((pulse, report))
}

fn sym3_drift(sys: &SystemParams) -> CMat {
    SystemParams::new(BasisId::Sym3, sys.delta, sys.v)
        .hamiltonian()
        .expect("sym3 drift")
        .drift
}

fn score_report(
    cfg: &GrapeConfig,
    sys: &SystemParams,
    pulse: &Pulse,
    outcome: &BfgsOutcome,
) -> Result<OptimizationReport> {
    let mut grid_fidelities = Vec::new();
    for &f in &cfg.f_omega_grid {
        for &off in &cfg.delta_offset_grid_hz {
            grid_fidelities.push(GridPointFidelity {
                f_omega: f,
                delta_err_hz: off,
                fidelity: bell4_point_fidelity(pulse, sys, f, off)?,
            });
        }
    }
    let final_average_fidelity =
        grid_fidelities.iter().map(|p| p.fidelity).sum::<f64>() / grid_fidelities.len() as f64;
    let nominal_fidelity = bell4_point_fidelity(pulse, sys, 1.0, 0.0)?;
    Ok(OptimizationReport {
        iterations: outcome.iterations,
        converged: outcome.converged,
        ensemble_fidelity: *outcome.objective_history.last().unwrap(),
        objective_history: outcome.objective_history.clone(),
        grad_norm_history: outcome.grad_norm_history.clone(),
        final_average_fidelity,
        nominal_fidelity,
        grid_fidelities,
    })
}

/// 2-D fidelity map over (detuning error, Rabi multiplier).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityMap {
    pub delta_err_hz: Vec<f64>,
    pub f_omega: Vec<f64>,
    /// Row-major values\[i_delta\]\[j_f\].
    pub values: Vec<Vec<f64>>,
}

impl FidelityMap {
    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn at(&self, i_delta: usize, j_f: usize) -> f64 {
        self.values[i_delta][j_f]
    }

    /// CSV rows `delta_err_hz,f_omega,fidelity` (header included).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta_err_hz,f_omega,fidelity\n");
        for (i, &d) in self.delta_err_hz.iter().enumerate() {
            for (j, &f) in self.f_omega.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", d, f, self.values[i][j]));
            }
        }
        out
    }
}

/// Evaluate the 4×4 fidelity of `pulse` over a (detuning error, f_Ω) grid.
pub fn robustness_scan(
    pulse: &Pulse,
    sys: &SystemParams,
    delta_err_grid_hz: &[f64],
    f_omega_grid: &[f64],
) -> Result<FidelityMap> {
    if delta_err_grid_hz.is_empty() || f_omega_grid.is_empty() {
        return Err(Error::Config("scan grids must be non-empty".into()));
    }
    let points: Vec<(usize, usize)> = (0..delta_err_grid_hz.len())
        .flat_map(|i| (0..f_omega_grid.len()).map(move |j| (i, j)))
        .collect();
    let flat: Result<Vec<f64>> = points
        .par_iter()
        .map(|&(i, j)| bell4_point_fidelity(pulse, sys, f_omega_grid[j], delta_err_grid_hz[i]))
        .collect();
    let flat = flat?;
    let values = delta_err_grid_hz
        .iter()
        .enumerate()
        .map(|(i, _)| flat[i * f_omega_grid.len()..(i + 1) * f_omega_grid.len()].to_vec())
        .collect();
    Ok(FidelityMap {
        delta_err_hz: delta_err_grid_hz.to_vec(),
        f_omega: f_omega_grid.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::PLANCK;
    use approx::assert_relative_eq;

    fn test_sys() -> SystemParams {
        SystemParams::new(BasisId::Sym3, 0.0, -PLANCK * 1850.0)
    }

    fn small_cfg() -> GrapeConfig {
        GrapeConfig { n_steps: 10, max_iters: 200, ..GrapeConfig::default() }
    }

    fn random_pulse(cfg: &GrapeConfig, seed: u64) -> Pulse {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Pulse::new(
            cfg.dt,
            (0..cfg.n_steps)
                .map(|_| PulseStep {
                    amplitude: rng.random::<f64>() * 0.3 * cfg.omega_cap,
                    phase: rng.random::<f64>() * TAU,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(GrapeConfig::default().validate().is_ok());
        assert!(GrapeConfig { n_steps: 0, ..GrapeConfig::default() }.validate().is_err());
        assert!(GrapeConfig { f_omega_grid: vec![0.9, 1.1], ..GrapeConfig::default() }
            .validate()
            .is_err());
        assert!(GrapeConfig { delta_offset_grid_hz: vec![], ..GrapeConfig::default() }
            .validate()
            .is_err());
    }

    #[test]
    fn single_grid_point_reduces_to_gate_fidelity() {
        let cfg = GrapeConfig {
            f_omega_grid: vec![1.0],
            delta_offset_grid_hz: vec![0.0],
            ..small_cfg()
        };
        let sys = test_sys();
        let pulse = random_pulse(&cfg, 1);
        let ens = ensemble_fidelity(&pulse, &cfg, &sys).unwrap();
        let u = propagate(&pulse, &sys).unwrap().propagator;
        let direct = gate_fidelity(&u, BetaPolicy::Absorb).unwrap();
        assert_relative_eq!(ens, direct, epsilon = 1e-12);
    }

    #[test]
    fn zero_controls_give_analytic_identity_fidelity() {
        // diagonal drift evolution: only the |00> element survives the
        // symmetric-block trace, so F = 1/9 at every grid point
        let cfg = small_cfg();
        let sys = test_sys();
        let pulse = Pulse::new(
            cfg.dt,
            vec![PulseStep { amplitude: 0.0, phase: 0.0 }; cfg.n_steps],
        )
        .unwrap();
        let f = ensemble_fidelity(&pulse, &cfg, &sys).unwrap();
        assert_relative_eq!(f, 1.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_hamiltonian_has_zero_gradient() {
        let cfg = small_cfg();
        let ens = ControlEnsemble {
            members: vec![EnsembleMember {
                drift: CMat::zeros(3, 3),
                control_x: CMat::zeros(3, 3),
                control_y: CMat::zeros(3, 3),
                target: CMat::identity(3, 3),
                f_scale: 1.0,
                weight: 1.0,
            }],
            dt: cfg.dt,
            n_steps: cfg.n_steps,
        };
        let xy = vec![(TAU * 1e3, -TAU * 2e3); cfg.n_steps];
        let (f, grad) = ens.objective_and_gradient(&xy);
        assert_relative_eq!(f, 1.0, epsilon = 1e-12);
        for (gx, gy) in grad {
            assert_eq!(gx, 0.0);
            assert_eq!(gy, 0.0);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = small_cfg();
        let sys = test_sys();
        let pulse = random_pulse(&cfg, 2);
        let grad = fidelity_gradient(&pulse, &cfg, &sys).unwrap();
        let h = 1e-6 * cfg.omega_cap;
        let mut max_rel: f64 = 0.0;
        let mut xy = pulse.steps.iter().map(|s| s.quadratures()).collect::<Vec<_>>();
        let gnorm = grad
            .iter()
            .flat_map(|&(x, y)| [x.abs(), y.abs()])
            .fold(0.0, f64::max);
        for j in 0..cfg.n_steps {
            for q in 0..2 {
                let orig = if q == 0 { xy[j].0 } else { xy[j].1 };
                let set = |xy: &mut Vec<(f64, f64)>, v: f64| {
                    if q == 0 {
                        xy[j].0 = v
                    } else {
                        xy[j].1 = v
                    }
                };
                set(&mut xy, orig + h);
                let fp = ensemble_fidelity(&Pulse::from_quadratures(cfg.dt, &xy).unwrap(), &cfg, &sys)
                    .unwrap();
                set(&mut xy, orig - h);
                let fm = ensemble_fidelity(&Pulse::from_quadratures(cfg.dt, &xy).unwrap(), &cfg, &sys)
                    .unwrap();
                set(&mut xy, orig);
                let fd = (fp - fm) / (2.0 * h);
                let an = if q == 0 { grad[j].0 } else { grad[j].1 };
                max_rel = max_rel.max((an - fd).abs() / gnorm.max(1e-300));
            }
        }
        assert!(max_rel < 1e-6, "max relative gradient deviation {max_rel:e}");
    }

    #[test]
    fn toy_single_qubit_pi_pulse() {
        // dim 2, resonant drive, target sigma_x: optimizer must find an
        // area-pi pulse family with machine-level fidelity
        let n = 10;
        let dt = 5e-6;
        let cap = TAU * 50e3;
        let mut sx = CMat::zeros(2, 2);
        sx[(0, 1)] = C64::new(1.0, 0.0);
        sx[(1, 0)] = C64::new(1.0, 0.0);
        let mut sy = CMat::zeros(2, 2);
        sy[(0, 1)] = C64::new(0.0, -1.0);
        sy[(1, 0)] = C64::new(0.0, 1.0);
        let ens = ControlEnsemble {
            members: vec![EnsembleMember {
                drift: CMat::zeros(2, 2),
                control_x: sx.clone(),
                control_y: sy,
                target: sx,
                f_scale: 1.0,
                weight: 1.0,
            }],
            dt,
            n_steps: n,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x0: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let amp = rng.random::<f64>() * 0.1 * cap;
                let ph = rng.random::<f64>() * TAU;
                (amp * ph.cos(), amp * ph.sin())
            })
            .collect();
        let out = optimize_bfgs(&ens, &x0, cap, 2000, 1e-10);
        let f = ens.objective(&out.xy);
        assert!(f > 1.0 - 1e-8, "toy optimization reached only {f}");
        // stationarity at the optimum
        let (_, grad) = ens.objective_and_gradient(&out.xy);
        let gmax = grad.iter().flat_map(|&(x, y)| [x.abs(), y.abs()]).fold(0.0, f64::max);
        assert!(gmax * cap < 1e-6, "scaled gradient at optimum {:e}", gmax * cap);
        // amplitude bound respected exactly
        for (x, y) in &out.xy {
            assert!(x.hypot(*y) <= cap * (1.0 + 1e-12));
        }
    }

    #[test]
    fn accepted_objective_history_is_monotone() {
        let cfg = GrapeConfig { n_steps: 20, max_iters: 60, ..GrapeConfig::default() };
        let sys = test_sys();
        let (_, report) = grape_optimize(&cfg, &sys, None).unwrap();
        for w in report.objective_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-14, "objective decreased: {} -> {}", w[0], w[1]);
        }
        for p in &report.grid_fidelities {
            assert!((0.0..=1.0 + 1e-12).contains(&p.fidelity));
        }
    }

    #[test]
    fn optimizer_is_deterministic() {
        let cfg = GrapeConfig { n_steps: 15, max_iters: 40, ..GrapeConfig::default() };
        let sys = test_sys();
        let (p1, _) = grape_optimize(&cfg, &sys, None).unwrap();
        let (p2, _) = grape_optimize(&cfg, &sys, None).unwrap();
        assert_eq!(p1, p2, "same config and seed must give identical pulses");
    }

    #[test]
    fn bound_respected_with_tight_cap() {
        let cfg = GrapeConfig {
            n_steps: 15,
            max_iters: 80,
            omega_cap: TAU * 2e3,
            ..GrapeConfig::default()
        };
        let sys = test_sys();
        let (pulse, _) = grape_optimize(&cfg, &sys, None).unwrap();
        assert!(pulse.max_amplitude() <= cfg.omega_cap * (1.0 + 1e-12));
    }

    #[test]
    fn robustness_scan_consistent_with_point_evaluation() {
        let cfg = small_cfg();
        let sys = test_sys();
        let pulse = random_pulse(&cfg, 9);
        let map = robustness_scan(&pulse, &sys, &[-500.0, 0.0, 500.0], &[0.9, 1.0, 1.1]).unwrap();
        let direct = bell4_point_fidelity(&pulse, &sys, 1.0, 0.0).unwrap();
        assert_relative_eq!(map.at(1, 1), direct, epsilon = 1e-12);
        let csv = map.to_csv();
        assert!(csv.starts_with("delta_err_hz,f_omega,fidelity\n"));
        assert_eq!(csv.lines().count(), 1 + 9);
    }

    #[test]
    fn block_diagonal_bell4_reproduces_sym3_and_psi_minus() {
        // the 4x4 propagator splits into the 3x3 symmetric evolution and a
        // pure phase on |Psi->
        let cfg = small_cfg();
        let pulse = random_pulse(&cfg, 4);
        let (delta, v) = (TAU * 200.0, -PLANCK * 1850.0);
        let u4 = propagate(&pulse, &SystemParams::new(BasisId::Bell4, delta, v))
            .unwrap()
            .propagator
            .matrix;
        let u3 = propagate(&pulse, &SystemParams::new(BasisId::Sym3, delta, v))
            .unwrap()
            .propagator
            .matrix;
        for i in 0..3 {
            assert!(u4[(3, i)].norm() < 1e-10);
            assert!(u4[(i, 3)].norm() < 1e-10);
            for j in 0..3 {
                assert!((u4[(i, j)] - u3[(i, j)]).norm() < 1e-10);
            }
        }
        let expected = C64::from_polar(1.0, v / HBAR * pulse.duration());
        assert!((u4[(3, 3)] - expected).norm() < 1e-10);
    }
}
