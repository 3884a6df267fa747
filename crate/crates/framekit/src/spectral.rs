//! Eigenstructure of the frame operator and verification of the structural
//! properties that weighted subspace families with eigen-projection members
//! ("class E": `S P_k = lambda_j P_k` for every member) must satisfy.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::field::FrameScalar;
use crate::frame::FusionFrame;

/// Default gap threshold for grouping eigenvalues into clusters.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;
/// Default tolerance for membership tests and structure residuals.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-8;
/// Eigenvalues below `ZERO_EIGENVALUE_REL * lambda_1` count as zero.
pub const ZERO_EIGENVALUE_REL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix is not Hermitian: ||S - Sᴴ||_F = {residual:.3e} exceeds {threshold:.3e}")]
    NotHermitian { residual: f64, threshold: f64 },
    #[error(
        "membership criteria disagree for member {member} against eigenvalue {lambda}: \
         operator residual {operator_residual:.3e} vs containment residual {containment_residual:.3e} \
         at tol {tol:.3e}; tolerance is too tight for the eigenvalue cluster separation"
    )]
    CriterionDisagreement {
        member: usize,
        lambda: f64,
        operator_residual: f64,
        containment_residual: f64,
        tol: f64,
    },
    #[error("frame is not in the eigen-projection class: member {member} is not contained in any eigenspace")]
    NotInClassE { member: usize },
}

/// The distinct eigenvalues of a Hermitian operator, in decreasing order,
/// with an orthonormal basis per eigenspace.
#[derive(Debug, Clone)]
pub struct Eigenstructure<T: FrameScalar> {
    lambdas: Vec<f64>,
    bases: Vec<DMatrix<T>>,
    cluster_tol: f64,
    min_gap: f64,
}

impl<T: FrameScalar> Eigenstructure<T> {
    /// Number of distinct eigenvalues `J`.
    pub fn count(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambda(&self, j: usize) -> f64 {
        self.lambdas[j]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Orthonormal basis of the j-th eigenspace (`d x dim(E_j)`).
    pub fn basis(&self, j: usize) -> &DMatrix<T> {
        &self.bases[j]
    }

    pub fn multiplicity(&self, j: usize) -> usize {
        self.bases[j].ncols()
    }

    pub fn projector(&self, j: usize) -> DMatrix<T> {
        &self.bases[j] * self.bases[j].adjoint()
    }

    /// `sum_j lambda_j Pi_{E_j}`; should reproduce the decomposed operator.
    pub fn reconstruct_operator(&self) -> DMatrix<T> {
        let d = self.bases[0].nrows();
        let mut s = DMatrix::<T>::zeros(d, d);
        for (lambda, basis) in self.lambdas.iter().zip(&self.bases) {
            s += (basis * basis.adjoint()) * T::from_real(*lambda);
        }
        s
    }

    /// Smallest gap between consecutive distinct eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    /// True when the smallest eigen-gap is within a factor 100 of the
    /// clustering threshold, i.e. when the grouping is sensitive to the
    /// chosen tolerance.
    pub fn near_degenerate(&self) -> bool {
        let lambda_max = self.lambdas.first().copied().unwrap_or(0.0);
        self.count() > 1 && self.min_gap < 100.0 * self.cluster_tol * lambda_max.abs().max(1.0)
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Returns unsorted eigenvalues and the accumulated unitary whose columns
/// are the eigenvectors.
///
/// Jacobi keeps the eigenvector matrix unitary by construction and delivers
/// accurate invariant subspaces for repeated eigenvalues, which tridiagonal
/// QL implementations do not guarantee; frame operators of structured
/// frames are degenerate by design, so that accuracy is required here.
pub fn hermitian_eigen<T: FrameScalar>(s: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let d = s.nrows();
    let mut m = (s + s.adjoint()) * T::from_real(0.5);
    let mut v = DMatrix::<T>::identity(d, d);
    let scale = m.norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..40 {
        let mut off_sq = 0.0;
        for p in 0..d {
            for q in p + 1..d {
                off_sq += m[(p, q)].modulus_squared();
            }
        }
        if off_sq.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let b = m[(p, q)];
                let b_abs = b.modulus();
                if b_abs <= 1e-18 * scale {
                    continue;
                }
                let phase = b * T::from_real(1.0 / b_abs);
                let app = m[(p, p)].real();
                let aqq = m[(q, q)].real();
                let tau = (aqq - app) / (2.0 * b_abs);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;

                // columns: col_p' = c col_p - conj(phase) sn col_q,
                //          col_q' = sn col_p + conj(phase) c col_q
                let (cs, row_coef) = (
                    (T::from_real(c), phase.conjugate() * T::from_real(sn)),
                    (phase * T::from_real(sn), phase * T::from_real(c)),
                );
                for i in 0..d {
                    let (mp, mq) = (m[(i, p)], m[(i, q)]);
                    m[(i, p)] = mp * cs.0 - mq * cs.1;
                    m[(i, q)] = mp * T::from_real(sn) + mq * phase.conjugate() * T::from_real(c);
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = vp * cs.0 - vq * cs.1;
                    v[(i, q)] = vp * T::from_real(sn) + vq * phase.conjugate() * T::from_real(c);
                }
                for i in 0..d {
                    let (mp, mq) = (m[(p, i)], m[(q, i)]);
                    m[(p, i)] = mp * T::from_real(c) - mq * row_coef.0;
                    m[(q, i)] = mp * T::from_real(sn) + mq * row_coef.1;
                }
                // clean the pivot pair exactly
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
            }
        }
    }
    let eigenvalues = (0..d).map(|i| m[(i, i)].real()).collect();
    (eigenvalues, v)
}

/// Eigendecomposition of a Hermitian `S` with eigenvalues grouped by
/// single-linkage clustering: a new cluster starts whenever consecutive
/// sorted eigenvalues differ by more than `cluster_tol * max(1, lambda_max)`.
/// Each cluster's eigenvector block is re-orthonormalized.
pub fn eigenstructure<T: FrameScalar>(
    s: &DMatrix<T>,
    cluster_tol: f64,
) -> Result<Eigenstructure<T>, SpectralError> {
    let herm_residual = (s - s.adjoint()).norm();
    let herm_threshold = 1e-10 * s.norm();
    if herm_residual > herm_threshold {
        return Err(SpectralError::NotHermitian {
            residual: herm_residual,
            threshold: herm_threshold,
        });
    }
    let d = s.nrows();
    let (eigenvalues, eigenvectors) = hermitian_eigen(s);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap());

    let lambda_max = eigenvalues[order[0]];
    let gap_threshold = cluster_tol * lambda_max.abs().max(1.0);

    let mut clusters: Vec<Vec<usize>> = vec![vec![order[0]]];
    for pair in order.windows(2) {
        let gap = eigenvalues[pair[0]] - eigenvalues[pair[1]];
        if gap > gap_threshold {
            clusters.push(Vec::new());
        }
        clusters.last_mut().unwrap().push(pair[1]);
    }

    let mut lambdas = Vec::with_capacity(clusters.len());
    let mut bases = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        let mean =
            cluster.iter().map(|&i| eigenvalues[i]).sum::<f64>() / cluster.len() as f64;
        lambdas.push(mean);
        let mut block = DMatrix::<T>::zeros(d, cluster.len());
        for (col, &i) in cluster.iter().enumerate() {
            block.set_column(col, &eigenvectors.column(i));
        }
        // re-orthonormalize so distinct eigenspaces stay orthogonal to 1e-10
        bases.push(block.qr().q());
    }
    let min_gap = lambdas
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    Ok(Eigenstructure {
        lambdas,
        bases,
        cluster_tol,
        min_gap,
    })
}

/// Assignment of each frame member to the eigenvalue whose eigenspace
/// contains it, when such an eigenvalue exists.
#[derive(Debug, Clone)]
pub struct IndexPartition {
    assignments: Vec<Option<usize>>,
    cluster_count: usize,
    containment_residuals: Vec<f64>,
}

impl IndexPartition {
    /// True when every member is an eigen-projection of the frame operator.
    pub fn in_class_e(&self) -> bool {
        self.assignments.iter().all(Option::is_some)
    }

    /// Cluster index of member `k`, if assigned. Zero-based.
    pub fn assignment(&self, k: usize) -> Option<usize> {
        self.assignments[k]
    }

    pub fn assignments(&self) -> &[Option<usize>] {
        &self.assignments
    }

    /// The index sets `I_j` as zero-based member indices, one per cluster.
    pub fn index_sets(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.cluster_count];
        for (k, a) in self.assignments.iter().enumerate() {
            if let Some(j) = a {
                sets[*j].push(k);
            }
        }
        sets
    }

    /// Best containment residual `||(I - Pi_{E_j}) B_k||_F` seen per member.
    pub fn containment_residuals(&self) -> &[f64] {
        &self.containment_residuals
    }

    pub fn first_unassigned(&self) -> Option<usize> {
        self.assignments.iter().position(Option::is_none)
    }
}

/// Computes the index sets by testing, for every member and eigenvalue, both
/// the operator identity `||S P_k - lambda_j P_k||_F <= tol * max(1, lambda_j) * sqrt(L_k)`
/// and the containment `||(I - Pi_{E_j}) B_k||_F <= tol`. Both criteria must
/// agree for every pair; disagreement signals that `tol` is too tight for
/// the eigenvalue cluster separation and is reported as an error.
///
/// `eigen` must be the eigenstructure of `frame.frame_operator()`.
pub fn index_partition<T: FrameScalar>(
    frame: &FusionFrame<T>,
    eigen: &Eigenstructure<T>,
    tol: f64,
) -> Result<IndexPartition, SpectralError> {
    let s = frame.frame_operator();
    let mut assignments = Vec::with_capacity(frame.len());
    let mut containment = Vec::with_capacity(frame.len());
    for k in 0..frame.len() {
        let subspace = frame.subspace(k);
        let p = subspace.projection();
        let sp = &s * &p;
        let sqrt_l = (subspace.dim() as f64).sqrt();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..eigen.count() {
            let lambda = eigen.lambda(j);
            let operator_residual = (&sp - &p * T::from_real(lambda)).norm();
            let basis_j = eigen.basis(j);
            let containment_residual =
                (subspace.basis() - basis_j * (basis_j.adjoint() * subspace.basis())).norm();
            let operator_ok = operator_residual <= tol * lambda.abs().max(1.0) * sqrt_l;
            let containment_ok = containment_residual <= tol;
            if operator_ok != containment_ok {
                return Err(SpectralError::CriterionDisagreement {
                    member: k,
                    lambda,
                    operator_residual,
                    containment_residual,
                    tol,
                });
            }
            if operator_ok && best.map_or(true, |(_, r)| containment_residual < r) {
                best = Some((j, containment_residual));
            }
        }
        assignments.push(best.map(|(j, _)| j));
        containment.push(best.map_or(f64::NAN, |(_, r)| r));
    }
    Ok(IndexPartition {
        assignments,
        cluster_count: eigen.count(),
        containment_residuals: containment,
    })
}

/// The block synthesis map: `d x (sum_k L_k)` with k-th block `w_k * B_k`.
/// Satisfies `T Tᴴ = S`.
#[derive(Debug, Clone)]
pub struct SynthesisOperator<T: FrameScalar>(DMatrix<T>);

impl<T: FrameScalar> SynthesisOperator<T> {
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.0
    }

    /// `T Tᴴ`, which must equal the frame operator.
    pub fn gram_ambient(&self) -> DMatrix<T> {
        &self.0 * self.0.adjoint()
    }

    /// `Tᴴ T` on the coefficient space.
    pub fn gram_coefficients(&self) -> DMatrix<T> {
        self.0.adjoint() * &self.0
    }
}

pub fn synthesis_operator<T: FrameScalar>(frame: &FusionFrame<T>) -> SynthesisOperator<T> {
    let d = frame.ambient_dim();
    let total: usize = frame.dims().iter().sum();
    let mut t = DMatrix::<T>::zeros(d, total);
    let mut col = 0;
    for (subspace, weight) in frame.members() {
        let block = subspace.basis() * T::from_real(weight);
        t.view_mut((0, col), (d, subspace.dim())).copy_from(&block);
        col += subspace.dim();
    }
    SynthesisOperator(t)
}

/// Residuals and pass flags for the structural clauses a class-E frame must
/// satisfy, plus the extra clauses that hold at potential minimizers.
#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    #[serde(rename = "in_class_E")]
    pub in_class_e: bool,
    #[serde(rename = "J")]
    pub cluster_count: usize,
    pub lambdas: Vec<f64>,
    /// Index sets `I_j` as 1-based member indices.
    pub index_sets: Vec<Vec<usize>>,
    pub clauses: ClauseReport,
    pub near_degenerate_spectrum: bool,
    /// All partition clauses hold (any class-E frame should pass).
    pub partition_passed: bool,
    /// Partition clauses plus the direct-sum and orthonormal-basis clauses
    /// that characterize minimizers.
    pub minimizer_passed: bool,
    #[serde(skip)]
    tol: f64,
    #[serde(skip)]
    first_unassigned_member: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClauseReport {
    /// Index sets are disjoint and cover every member.
    pub partition: bool,
    /// `||(I - Pi_{E_j(k)}) B_k||_F` for each member k.
    pub containment_residuals: Vec<f64>,
    /// `|lambda_J - (sum_{k in I_J} w_k^2 L_k) / dim(E_J)|`.
    #[serde(rename = "lambdaJ_identity_residual")]
    pub lambda_tail_identity_residual: f64,
    /// Per cluster j: `||E_jᴴ (sum_{k in I_j} w_k^2 P_k) E_j - lambda_j I||_F`,
    /// the tightness of `{W_k}_{k in I_j}` on its eigenspace.
    pub tight_residuals: Vec<f64>,
    /// `I_j` empty exactly for zero eigenvalues.
    pub empty_iff_zero: bool,
    /// Per cluster j < J: member dimensions add up to `dim(E_j)`.
    pub direct_sum: Vec<bool>,
    /// Per cluster j < J: members pairwise orthogonal and `w_k^2 = lambda_j`.
    pub ofb: Vec<bool>,
}

impl StructureReport {
    /// Name of the first clause that fails, in verification order.
    pub fn first_failing_clause(&self) -> Option<&'static str> {
        if !self.in_class_e {
            return Some("class_membership");
        }
        let tol = self.tol;
        if !self.clauses.partition {
            return Some("partition");
        }
        if self.clauses.containment_residuals.iter().any(|&r| r > tol) {
            return Some("containment");
        }
        if !self.clauses.empty_iff_zero {
            return Some("empty_iff_zero");
        }
        let lambda_tail = self.lambdas.last().copied().unwrap_or(0.0);
        if self.clauses.lambda_tail_identity_residual > tol * lambda_tail.abs().max(1.0) {
            return Some("lambda_tail_identity");
        }
        for (j, &r) in self.clauses.tight_residuals.iter().enumerate() {
            if r > tol * self.lambdas[j].abs().max(1.0) {
                return Some("eigenspace_tightness");
            }
        }
        if self.clauses.direct_sum.iter().any(|&ok| !ok) {
            return Some("direct_sum");
        }
        if self.clauses.ofb.iter().any(|&ok| !ok) {
            return Some("ofb");
        }
        None
    }

    /// Tolerance the report was produced with (not serialized).
    pub fn tolerance(&self) -> f64 {
        self.tol
    }
}

/// Full structural report for a frame. A frame outside class E yields a
/// report with `in_class_e = false` and both pass flags false rather than an
/// error; [`SpectralError::CriterionDisagreement`] still propagates.
pub fn structure_report<T: FrameScalar>(
    frame: &FusionFrame<T>,
    tol: f64,
    cluster_tol: f64,
) -> Result<StructureReport, SpectralError> {
    let s = frame.frame_operator();
    let eigen = eigenstructure(&s, cluster_tol)?;
    let partition = index_partition(frame, &eigen, tol)?;
    Ok(build_report(frame, &eigen, &partition, tol))
}

/// Verifies the partition clauses that every class-E frame satisfies:
/// the index sets partition the members, each member lies in its eigenspace,
/// the smallest eigenvalue matches its weighted trace identity, each
/// `{W_k}_{k in I_j}` is lambda_j-tight on `E_j`, and empty index sets occur
/// exactly at zero eigenvalues.
///
/// Fails with [`SpectralError::NotInClassE`] when some member is not an
/// eigen-projection of the frame operator.
pub fn verify_spectral_partition<T: FrameScalar>(
    frame: &FusionFrame<T>,
    tol: f64,
) -> Result<StructureReport, SpectralError> {
    let report = structure_report(frame, tol, DEFAULT_CLUSTER_TOL)?;
    if !report.in_class_e {
        return Err(SpectralError::NotInClassE {
            member: report.first_unassigned_member.unwrap_or(0),
        });
    }
    Ok(report)
}

/// Verifies, on top of [`verify_spectral_partition`], the clauses that hold
/// at potential minimizers: for every non-minimal eigenvalue the members of
/// `I_j` are pairwise orthogonal with dimensions summing to `dim(E_j)` and
/// weights `w_k^2 = lambda_j`; on the smallest eigenvalue the members form a
/// tight family for `E_J`.
pub fn verify_minimizer_structure<T: FrameScalar>(
    frame: &FusionFrame<T>,
    tol: f64,
) -> Result<StructureReport, SpectralError> {
    verify_spectral_partition(frame, tol)
}

fn build_report<T: FrameScalar>(
    frame: &FusionFrame<T>,
    eigen: &Eigenstructure<T>,
    partition: &IndexPartition,
    tol: f64,
) -> StructureReport {
    let j_count = eigen.count();
    let sets = partition.index_sets();
    let in_class_e = partition.in_class_e();

    // integer-level partition check: disjoint and covering
    let mut seen = vec![0usize; frame.len()];
    for set in &sets {
        for &k in set {
            seen[k] += 1;
        }
    }
    let partition_ok = in_class_e && seen.iter().all(|&c| c == 1);

    let lambda_1 = eigen.lambda(0);
    let zero_tol = ZERO_EIGENVALUE_REL * lambda_1.abs();
    let empty_iff_zero = (0..j_count)
        .all(|j| sets[j].is_empty() == (eigen.lambda(j).abs() <= zero_tol));

    // lambda_J identity: lambda_J = (1/dim E_J) sum_{k in I_J} w_k^2 L_k
    let tail = j_count - 1;
    let tail_sum: f64 = sets[tail]
        .iter()
        .map(|&k| {
            let (s, w) = frame.member(k);
            w * w * s.dim() as f64
        })
        .sum();
    let lambda_tail_identity_residual =
        (eigen.lambda(tail) - tail_sum / eigen.multiplicity(tail) as f64).abs();

    // per-cluster tightness of sum_{k in I_j} w_k^2 P_k restricted to E_j
    let d = frame.ambient_dim();
    let mut tight_residuals = Vec::with_capacity(j_count);
    for (j, set) in sets.iter().enumerate() {
        let mut m = DMatrix::<T>::zeros(d, d);
        for &k in set {
            let (s, w) = frame.member(k);
            m += s.projection() * T::from_real(w * w);
        }
        let basis_j = eigen.basis(j);
        let mut restricted = basis_j.adjoint() * m * basis_j;
        for i in 0..restricted.nrows() {
            restricted[(i, i)] -= T::from_real(eigen.lambda(j));
        }
        tight_residuals.push(restricted.norm());
    }

    // minimizer clauses for j < J
    let mut direct_sum = Vec::new();
    let mut ofb = Vec::new();
    for (j, set) in sets.iter().enumerate().take(j_count.saturating_sub(1)) {
        let dims_sum: usize = set.iter().map(|&k| frame.subspace(k).dim()).sum();
        direct_sum.push(dims_sum == eigen.multiplicity(j));

        let lambda = eigen.lambda(j);
        let mut ok = true;
        for (a_pos, &a) in set.iter().enumerate() {
            let (sa, wa) = frame.member(a);
            if (wa * wa - lambda).abs() > tol * lambda.abs().max(f64::MIN_POSITIVE) {
                ok = false;
            }
            for &b in &set[a_pos + 1..] {
                let overlap = (sa.basis().adjoint() * frame.subspace(b).basis()).norm();
                // ||P_a P_b||_F = ||B_aᴴ B_b||_F for orthonormal bases
                if overlap > tol {
                    ok = false;
                }
            }
        }
        ofb.push(ok);
    }

    let containment_ok = in_class_e
        && partition
            .containment_residuals()
            .iter()
            .all(|&r| r <= tol);
    let lambda_tail_ok =
        lambda_tail_identity_residual <= tol * eigen.lambda(tail).abs().max(1.0);
    let tight_ok = tight_residuals
        .iter()
        .enumerate()
        .all(|(j, &r)| r <= tol * eigen.lambda(j).abs().max(1.0));
    let partition_passed =
        in_class_e && partition_ok && empty_iff_zero && containment_ok && lambda_tail_ok && tight_ok;
    let minimizer_passed =
        partition_passed && direct_sum.iter().all(|&b| b) && ofb.iter().all(|&b| b);

    StructureReport {
        in_class_e,
        cluster_count: j_count,
        lambdas: eigen.lambdas().to_vec(),
        index_sets: sets
            .iter()
            .map(|set| set.iter().map(|&k| k + 1).collect())
            .collect(),
        clauses: ClauseReport {
            partition: partition_ok,
            containment_residuals: partition.containment_residuals().to_vec(),
            lambda_tail_identity_residual,
            tight_residuals,
            empty_iff_zero,
            direct_sum,
            ofb,
        },
        near_degenerate_spectrum: eigen.near_degenerate(),
        partition_passed,
        minimizer_passed,
        tol,
        first_unassigned_member: partition.first_unassigned(),
    }
}
