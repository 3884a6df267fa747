//! The irregularity index of a weight sequence, the fundamental inequality,
//! the closed-form global minimum of the potential, and the
//! orthogonal-prefix / tight-suffix decomposition of minimizers.

use serde::Serialize;
use thiserror::Error;

use crate::field::FrameScalar;
use crate::frame::{DimProfile, FusionFrame};
use crate::spectral::{
    eigenstructure, index_partition, verify_minimizer_structure, SpectralError,
    DEFAULT_CLUSTER_TOL,
};

#[derive(Debug, Error)]
pub enum IrregularityError {
    #[error("sequence must be sorted in non-increasing order (violated at position {0})")]
    NotSorted(usize),
    #[error("ambient dimension {d} exceeds the total subspace dimension {total}")]
    DimensionDeficit { d: usize, total: usize },
    #[error("dimension and coefficient lists must be nonempty and of equal length")]
    LengthMismatch,
    #[error("coefficients must be positive, got {0}")]
    BadCoefficient(f64),
    #[error("internal invariant violated: flip index {n0} leaves no room in dimension {d}")]
    InternalInvariantViolation { n0: usize, d: usize },
}

#[derive(Debug, Error)]
pub enum StructureError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Irregularity(#[from] IrregularityError),
    #[error("structure mismatch in clause `{clause}` (residual {residual:.3e})")]
    StructureMismatch { clause: &'static str, residual: f64 },
}

/// Outcome of the flip-index scan: the predicate
/// `(d - sum_{k<=j} L_k) c_j <= sum_{k>j} L_k c_k`
/// is false for `j < N0` and true for `j >= N0`.
#[derive(Debug, Clone, Serialize)]
pub struct IrregularityResult {
    /// The unique flip index, 1-based, in `1..=K`.
    pub n0: usize,
    /// Predicate value for j = 1..=K.
    pub predicate: Vec<bool>,
}

impl IrregularityResult {
    /// The irregularity `N0 - 1`.
    pub fn irregularity(&self) -> usize {
        self.n0 - 1
    }
}

/// Scans the flip predicate for a non-increasing positive sequence `c` and
/// dimensions `dims` with `d <= sum L_k`. Comparisons are exact on doubles;
/// ties count as the inequality holding.
pub fn irregularity(
    d: usize,
    dims: &[usize],
    c: &[f64],
) -> Result<IrregularityResult, IrregularityError> {
    if dims.is_empty() || dims.len() != c.len() {
        return Err(IrregularityError::LengthMismatch);
    }
    if let Some(pos) = c.windows(2).position(|w| w[0] < w[1]) {
        return Err(IrregularityError::NotSorted(pos + 1));
    }
    if let Some(&bad) = c.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(IrregularityError::BadCoefficient(bad));
    }
    let total: usize = dims.iter().sum();
    if d > total {
        return Err(IrregularityError::DimensionDeficit { d, total });
    }

    let k = dims.len();
    let mut predicate = Vec::with_capacity(k);
    let mut head: f64 = 0.0; // sum_{k<=j} L_k
    for j in 0..k {
        head += dims[j] as f64;
        let lhs = (d as f64 - head) * c[j];
        let rhs: f64 = dims[j + 1..]
            .iter()
            .zip(&c[j + 1..])
            .map(|(&l, &ck)| l as f64 * ck)
            .sum();
        predicate.push(lhs <= rhs);
    }
    let n0 = predicate
        .iter()
        .position(|&p| p)
        .expect("predicate holds at j = K since d <= sum L_k")
        + 1;
    Ok(IrregularityResult { n0, predicate })
}

/// `max_k w_k^2 <= (1/d) sum_k w_k^2 L_k`, evaluated exactly on doubles via
/// the division-free rearrangement `(d - L_1) w_1^2 <= sum_{k>1} L_k w_k^2`
/// over weights sorted in non-increasing order. The rearrangement is the
/// flip predicate at j = 1, which keeps this test bit-consistent with
/// [`irregularity`]: the inequality holds exactly when the flip index is 1.
pub fn satisfies_fundamental_inequality(profile: &DimProfile) -> bool {
    let (wsq, dims, _) = sorted_by_weight(profile);
    let head = (profile.d as f64 - dims[0] as f64) * wsq[0];
    let tail: f64 = dims[1..]
        .iter()
        .zip(&wsq[1..])
        .map(|(&l, &c)| l as f64 * c)
        .sum();
    head <= tail
}

/// (sorted weights-squared, sorted dims, permutation old -> position) with
/// weights in non-increasing order. Ties keep the original order.
fn sorted_by_weight(profile: &DimProfile) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..profile.k()).collect();
    order.sort_by(|&a, &b| profile.weights[b].partial_cmp(&profile.weights[a]).unwrap());
    let wsq = order.iter().map(|&i| {
        let w = profile.weights[i];
        w * w
    });
    (
        wsq.collect(),
        order.iter().map(|&i| profile.dims[i]).collect(),
        order,
    )
}

/// The global minimum of the potential over configurations with this
/// profile:
/// `sum_{k<N0} w_k^4 L_k + (d - sum_{k<N0} L_k)^{-1} (sum_{k>=N0} w_k^2 L_k)^2`
/// with weights sorted in non-increasing order and `N0` their flip index.
/// Equals the lower bound exactly when `N0 = 1`.
pub fn minimum_value(profile: &DimProfile) -> Result<f64, IrregularityError> {
    let (wsq, dims, _) = sorted_by_weight(profile);
    let flip = irregularity(profile.d, &dims, &wsq)?;
    let split = flip.n0 - 1;
    let prefix_dim: usize = dims[..split].iter().sum();
    if profile.d <= prefix_dim {
        return Err(IrregularityError::InternalInvariantViolation {
            n0: flip.n0,
            d: profile.d,
        });
    }
    let prefix: f64 = dims[..split]
        .iter()
        .zip(&wsq[..split])
        .map(|(&l, &c)| c * c * l as f64)
        .sum();
    let tail: f64 = dims[split..]
        .iter()
        .zip(&wsq[split..])
        .map(|(&l, &c)| c * l as f64)
        .sum();
    Ok(prefix + tail * tail / (profile.d - prefix_dim) as f64)
}

fn require_sorted_weights<T: FrameScalar>(
    frame: &FusionFrame<T>,
) -> Result<(), IrregularityError> {
    let weights = frame.weights();
    if let Some(pos) = weights.windows(2).position(|w| w[0] < w[1]) {
        return Err(IrregularityError::NotSorted(pos + 1));
    }
    Ok(())
}

/// Checks the minimizer prediction that the index set of the smallest
/// eigenvalue is exactly `{N0, ..., K}` for `N0` the flip index of the
/// squared weights. Requires the frame to be in class E with weights in
/// non-increasing order.
pub fn check_tail_index_set<T: FrameScalar>(
    frame: &FusionFrame<T>,
    tol: f64,
) -> Result<bool, StructureError> {
    require_sorted_weights(frame)?;
    let s = frame.frame_operator();
    let eigen = eigenstructure(&s, DEFAULT_CLUSTER_TOL)?;
    let partition = index_partition(frame, &eigen, tol)?;
    if let Some(member) = partition.first_unassigned() {
        return Err(SpectralError::NotInClassE { member }.into());
    }
    let profile = frame.profile();
    let wsq: Vec<f64> = profile.weights.iter().map(|w| w * w).collect();
    let flip = irregularity(profile.d, &profile.dims, &wsq)?;
    let expected: Vec<usize> = (flip.n0 - 1..frame.len()).collect();
    let sets = partition.index_sets();
    Ok(sets.last().is_some_and(|tail| *tail == expected))
}

/// The minimizer decomposition: members before the flip index are pairwise
/// orthogonal, members from it on form a tight family for the orthogonal
/// complement of the prefix span.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    /// Number of prefix members, `N0 - 1`.
    pub split: usize,
    /// Tightness constant of the suffix on the complement.
    pub alpha: f64,
    /// `|| sum_{k>=N0} w_k^2 P_k - alpha Pi_complement ||_F`.
    pub complement_residual: f64,
    /// Largest pairwise overlap `||P_a P_b||_F` within the prefix.
    pub prefix_overlap: f64,
}

/// Splits a verified minimizer into its orthogonal prefix and tight suffix
/// and certifies both clauses to tolerance `tol`.
///
/// Preconditions (each reported as its own error): weights non-increasing,
/// frame in class E, and [`verify_minimizer_structure`] passing.
pub fn decompose<T: FrameScalar>(
    frame: &FusionFrame<T>,
    tol: f64,
) -> Result<Decomposition, StructureError> {
    require_sorted_weights(frame)?;
    let report = verify_minimizer_structure(frame, tol)?;
    if !report.minimizer_passed {
        return Err(StructureError::StructureMismatch {
            clause: report.first_failing_clause().unwrap_or("minimizer_structure"),
            residual: f64::NAN,
        });
    }
    let profile = frame.profile();
    let wsq: Vec<f64> = profile.weights.iter().map(|w| w * w).collect();
    let flip = irregularity(profile.d, &profile.dims, &wsq)?;
    let split = flip.n0 - 1;

    let mut prefix_overlap = 0.0f64;
    for a in 0..split {
        for b in a + 1..split {
            let overlap =
                (frame.subspace(a).basis().adjoint() * frame.subspace(b).basis()).norm();
            prefix_overlap = prefix_overlap.max(overlap);
        }
    }
    if prefix_overlap > tol {
        return Err(StructureError::StructureMismatch {
            clause: "prefix_orthogonality",
            residual: prefix_overlap,
        });
    }

    let d = frame.ambient_dim();
    let prefix_dim: usize = profile.dims[..split].iter().sum();
    if d <= prefix_dim {
        return Err(IrregularityError::InternalInvariantViolation { n0: flip.n0, d }.into());
    }
    let complement_dim = (d - prefix_dim) as f64;
    let tail_trace: f64 = (split..frame.len())
        .map(|k| {
            let (s, w) = frame.member(k);
            w * w * s.dim() as f64
        })
        .sum();
    let alpha = tail_trace / complement_dim;

    let mut residual_matrix = nalgebra::DMatrix::<T>::identity(d, d) * T::from_real(alpha);
    for k in 0..split {
        residual_matrix -= frame.subspace(k).projection() * T::from_real(alpha);
    }
    for k in split..frame.len() {
        let (s, w) = frame.member(k);
        residual_matrix -= s.projection() * T::from_real(w * w);
    }
    let complement_residual = residual_matrix.norm();
    if complement_residual > tol {
        return Err(StructureError::StructureMismatch {
            clause: "complement_tightness",
            residual: complement_residual,
        });
    }

    Ok(Decomposition {
        split,
        alpha,
        complement_residual,
        prefix_overlap,
    })
}


#[cfg(test)]
mod structure_tests {
    use super::*;
    use crate::construct::{
        equispaced_lines, orthogonal_sum_frame, structured_minimizer, tight_frame_union,
    };
    use crate::frame::{random_unitary, Subspace};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn line(d: usize, entries: &[f64]) -> Subspace<f64> {
        Subspace::orthonormalize(&DMatrix::from_column_slice(d, 1, entries)).unwrap()
    }

    /// d=2, weights^2 = (4,1,1): W1 = span e1, W2 = W3 = span e2.
    fn two_level_minimizer() -> FusionFrame<f64> {
        FusionFrame::new(
            2,
            vec![
                (line(2, &[1.0, 0.0]), 2.0),
                (line(2, &[0.0, 1.0]), 1.0),
                (line(2, &[0.0, 1.0]), 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn tail_set_covers_everything_for_tight_frames() {
        let frame = equispaced_lines(4).unwrap();
        assert!(check_tail_index_set(&frame, 1e-8).unwrap());
    }

    #[test]
    fn tail_set_matches_the_flip_index() {
        assert!(check_tail_index_set(&two_level_minimizer(), 1e-8).unwrap());
    }

    #[test]
    fn tail_set_on_orthogonal_sums_with_decreasing_weights() {
        // sum L_k = d with strictly decreasing weights: each member is its
        // own eigenvalue; the tail set is the last member alone and the
        // flip index is K.
        let frame = orthogonal_sum_frame::<f64>(6, &[(3, 3.0), (2, 2.0), (1, 1.0)], 5).unwrap();
        assert!(check_tail_index_set(&frame, 1e-8).unwrap());
    }

    #[test]
    fn tail_set_requires_sorted_weights() {
        let frame = orthogonal_sum_frame::<f64>(3, &[(1, 1.0), (2, 2.0)], 1).unwrap();
        assert!(matches!(
            check_tail_index_set(&frame, 1e-8),
            Err(StructureError::Irregularity(IrregularityError::NotSorted(_)))
        ));
    }

    #[test]
    fn tail_set_requires_class_membership() {
        let w1 = Subspace::orthonormalize(&nalgebra::dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0])
            .unwrap();
        let w2 = Subspace::orthonormalize(&nalgebra::dmatrix![0.0, 0.0; 1.0, 0.0; 0.0, 1.0])
            .unwrap();
        let frame = FusionFrame::new(3, vec![(w1, 1.0), (w2, 1.0)]).unwrap();
        assert!(matches!(
            check_tail_index_set(&frame, 1e-8),
            Err(StructureError::Spectral(SpectralError::NotInClassE { .. }))
        ));
    }

    #[test]
    fn decompose_a_tight_frame_into_an_empty_prefix() {
        let frame = tight_frame_union::<f64>(3, &[(vec![1, 2], 1.0), (vec![3], 1.0)], 2).unwrap();
        let decomposition = decompose(&frame, 1e-8).unwrap();
        assert_eq!(decomposition.split, 0);
        assert!(decomposition.complement_residual <= 1e-9);
        assert_relative_eq!(decomposition.alpha, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn decompose_the_two_level_minimizer() {
        let decomposition = decompose(&two_level_minimizer(), 1e-8).unwrap();
        assert_eq!(decomposition.split, 1);
        assert_relative_eq!(decomposition.alpha, 2.0, epsilon = 1e-12);
        assert!(decomposition.complement_residual <= 1e-12);
        assert!(decomposition.prefix_overlap <= 1e-12);
    }

    #[test]
    fn decompose_is_unitarily_invariant() {
        let frame = two_level_minimizer();
        let base = decompose(&frame, 1e-8).unwrap();
        let u = random_unitary::<f64>(2, 17);
        let rotated = decompose(&frame.transform(&u), 1e-8).unwrap();
        assert_eq!(base.split, rotated.split);
        assert!((base.alpha - rotated.alpha).abs() <= 1e-9);
        assert!((base.complement_residual - rotated.complement_residual).abs() <= 1e-9);
    }

    #[test]
    fn decompose_names_the_failing_clause() {
        // duplicated top-weight member: stays in class E but the prefix
        // cluster is not a direct sum
        let frame = FusionFrame::new(
            2,
            vec![
                (line(2, &[1.0, 0.0]), 2.0),
                (line(2, &[1.0, 0.0]), 2.0),
                (line(2, &[0.0, 1.0]), 1.0),
            ],
        )
        .unwrap();
        match decompose(&frame, 1e-8) {
            Err(StructureError::StructureMismatch { clause, .. }) => {
                assert_eq!(clause, "direct_sum")
            }
            other => panic!("expected a structure mismatch, got {other:?}"),
        }
    }

    #[test]
    fn structured_frames_attain_the_closed_form_minimum() {
        for seed in 0..30u64 {
            let frame = structured_minimizer::<f64>(
                5,
                &[(1, 3.0), (1, 2.0)],
                &[(vec![2, 1], 1.0), (vec![3], 0.5)],
                seed,
            )
            .unwrap();
            let value = minimum_value(&frame.profile()).unwrap();
            assert!(
                (frame.ffp() - value).abs() <= 1e-9 * value,
                "seed {seed}: ffp {} vs {}",
                frame.ffp(),
                value
            );
            let decomposition = decompose(&frame, 1e-8).unwrap();
            assert_eq!(decomposition.split, 2);
            assert!(check_tail_index_set(&frame, 1e-8).unwrap());
        }
    }

    #[test]
    fn every_tight_frame_satisfies_the_fundamental_inequality() {
        for seed in 0..20u64 {
            let frame =
                tight_frame_union::<f64>(4, &[(vec![2, 2], 1.3), (vec![1, 1, 1, 1], 0.7)], seed)
                    .unwrap();
            assert!(frame.is_tight(1e-8).is_some());
            assert!(satisfies_fundamental_inequality(&frame.profile()));
        }
    }
}
