//! Descent-based minimization of the fusion frame potential over
//! configurations with fixed subspace dimensions and weights.
//!
//! Each member moves on the manifold of `L_k`-dimensional subspaces: the
//! search direction is the potential gradient projected onto the horizontal
//! space at each basis, steps are chosen by Armijo backtracking, and the
//! iterate is pulled back to exact feasibility by QR re-orthonormalization.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::FrameScalar;
use crate::frame::{random_frame, DimProfile, FrameError, FusionFrame, Subspace};
use crate::spectral::{structure_report, StructureReport, DEFAULT_MEMBERSHIP_TOL};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer configuration: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Tuning knobs for [`minimize`] and [`multistart`].
#[derive(Debug, Clone, Serialize)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Step the line search starts from; `None` uses `1 / (1 + lambda_max)`
    /// with the operator norm estimated by `||S||_F`.
    pub initial_step: Option<f64>,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            grad_tol: 1e-10,
            initial_step: None,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            restarts: 20,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.max_iters == 0 {
            return Err(OptimizerError::BadConfig("max_iters must be positive"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(OptimizerError::BadConfig("grad_tol must be positive"));
        }
        if let Some(step) = self.initial_step {
            if !(step > 0.0) {
                return Err(OptimizerError::BadConfig("initial_step must be positive"));
            }
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(OptimizerError::BadConfig("armijo_c must be in (0, 1)"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(OptimizerError::BadConfig(
                "backtrack_factor must be in (0, 1)",
            ));
        }
        if self.restarts == 0 {
            return Err(OptimizerError::BadConfig("restarts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationStatus {
    GradientConverged,
    MaxIterations,
    LineSearchStalled,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub ffp: f64,
    pub grad_norm: f64,
}

/// Tightness and class membership of the frame a run ended at.
#[derive(Debug, Clone, Serialize)]
pub struct StructureSummary {
    pub tight_alpha: Option<f64>,
    pub report: Option<StructureReport>,
}

#[derive(Debug, Clone)]
pub struct OptimizerReport<T: FrameScalar> {
    pub frame: FusionFrame<T>,
    pub ffp: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub status: TerminationStatus,
    pub history: Vec<IterationRecord>,
    pub structure: StructureSummary,
    pub restart_index: Option<usize>,
}

impl<T: FrameScalar> OptimizerReport<T> {
    pub fn converged(&self) -> bool {
        self.status == TerminationStatus::GradientConverged
    }
}

/// The potential gradient in basis coordinates, projected onto the
/// horizontal space of each member:
/// `G_k = 4 w_k^2 (I - P_k) S B_k`, so `B_kᴴ G_k = 0`.
///
/// The constant 4 makes `<G_k, H>` equal the first derivative of the
/// potential along any admissible curve with direction matrix `H`.
pub fn riemannian_gradient<T: FrameScalar>(frame: &FusionFrame<T>) -> Vec<DMatrix<T>> {
    gradient_with_operator(frame, &frame.frame_operator())
}

fn gradient_with_operator<T: FrameScalar>(
    frame: &FusionFrame<T>,
    s: &DMatrix<T>,
) -> Vec<DMatrix<T>> {
    frame
        .members()
        .map(|(subspace, weight)| {
            let b = subspace.basis();
            let sb = s * b;
            let horizontal = &sb - b * (b.adjoint() * &sb);
            horizontal * T::from_real(4.0 * weight * weight)
        })
        .collect()
}

fn gradient_norm<T: FrameScalar>(grads: &[DMatrix<T>]) -> f64 {
    grads.iter().map(DMatrix::norm_squared).sum::<f64>().sqrt()
}

fn retract<T: FrameScalar>(
    frame: &FusionFrame<T>,
    grads: &[DMatrix<T>],
    step: f64,
) -> FusionFrame<T> {
    let members = frame
        .members()
        .zip(grads)
        .map(|((subspace, weight), grad)| {
            let moved = subspace.basis() - grad * T::from_real(step);
            let q = moved.qr().q();
            (
                Subspace::from_orthonormal(q).expect("QR factor has orthonormal columns"),
                weight,
            )
        })
        .collect();
    FusionFrame::new(frame.ambient_dim(), members).expect("retraction preserves frame validity")
}

/// Gradient descent from `start`. The potential never increases across
/// accepted steps; the run stops when the gradient norm drops below
/// `cfg.grad_tol`, the iteration budget is spent, or the line search cannot
/// make progress. Non-convergence is a report status, not an error.
pub fn minimize<T: FrameScalar>(
    start: &FusionFrame<T>,
    cfg: &OptimizerConfig,
) -> Result<OptimizerReport<T>, OptimizerError> {
    cfg.validate()?;
    let mut frame = start.clone();
    let mut s = frame.frame_operator();
    let mut ffp = s.norm_squared();
    let mut history = Vec::new();
    let mut status = TerminationStatus::MaxIterations;
    let mut iterations = 0;
    let mut grad_norm = f64::NAN;

    for iter in 0..=cfg.max_iters {
        let grads = gradient_with_operator(&frame, &s);
        grad_norm = gradient_norm(&grads);
        history.push(IterationRecord {
            iter,
            ffp,
            grad_norm,
        });
        if grad_norm <= cfg.grad_tol {
            status = TerminationStatus::GradientConverged;
            break;
        }
        if iter == cfg.max_iters {
            status = TerminationStatus::MaxIterations;
            break;
        }

        let mut step = cfg.initial_step.unwrap_or_else(|| 1.0 / (1.0 + s.norm()));
        let decrease = cfg.armijo_c * grad_norm * grad_norm;
        let mut accepted = false;
        while step > 1e-18 {
            let candidate = retract(&frame, &grads, step);
            let candidate_s = candidate.frame_operator();
            let candidate_ffp = candidate_s.norm_squared();
            if candidate_ffp <= ffp - step * decrease {
                frame = candidate;
                s = candidate_s;
                ffp = candidate_ffp;
                accepted = true;
                break;
            }
            step *= cfg.backtrack_factor;
        }
        if !accepted {
            status = TerminationStatus::LineSearchStalled;
            break;
        }
        iterations += 1;
    }

    let lower_bound = frame.profile().lower_bound();
    let structure = summarize_structure(&frame);
    Ok(OptimizerReport {
        gap: ffp - lower_bound,
        ffp,
        lower_bound,
        iterations,
        grad_norm,
        status,
        history,
        structure,
        frame,
        restart_index: None,
    })
}

fn summarize_structure<T: FrameScalar>(frame: &FusionFrame<T>) -> StructureSummary {
    let tight_alpha = frame.is_tight(1e-6);
    let report = structure_report(frame, DEFAULT_MEMBERSHIP_TOL, 1e-6).ok();
    StructureSummary {
        tight_alpha,
        report,
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for restart `r`; pure in `(seed, r)` so restarts can run in any
/// order on any number of threads.
pub fn restart_seed(seed: u64, restart: usize) -> u64 {
    splitmix64(seed ^ splitmix64(restart as u64))
}

/// Runs `cfg.restarts` independent descents from random frames with the
/// given profile and returns the best report (smallest final potential, ties
/// broken by the lowest restart index). Deterministic in `cfg.seed`;
/// restarts run in parallel.
pub fn multistart<T: FrameScalar>(
    profile: &DimProfile,
    cfg: &OptimizerConfig,
) -> Result<OptimizerReport<T>, OptimizerError> {
    cfg.validate()?;
    let reports: Vec<OptimizerReport<T>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = random_frame::<T>(profile, restart_seed(cfg.seed, r))?;
            let mut report = minimize(&start, cfg)?;
            report.restart_index = Some(r);
            Ok::<_, OptimizerError>(report)
        })
        .collect::<Result<_, _>>()?;
    Ok(reports
        .into_iter()
        .min_by(|a, b| {
            (a.ffp, a.restart_index)
                .partial_cmp(&(b.ffp, b.restart_index))
                .unwrap()
        })
        .expect("restarts >= 1"))
}
