//! Subspaces, fusion frames, the frame operator and the frame potential.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::field::FrameScalar;

/// Relative singular-value threshold below which a column set is declared
/// rank deficient.
pub const RANK_TOL: f64 = 1e-10;
/// Per-entry tolerance on `Bᴴ·B = I` for a stored orthonormal basis.
pub const ORTHO_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("matrix has numerical column rank below {expected} (smallest/largest singular value ratio {ratio:.3e})")]
    RankDeficient { expected: usize, ratio: f64 },
    #[error("columns are not orthonormal: max |BᴴB - I| entry is {max_dev:.3e}")]
    NotOrthonormal { max_dev: f64 },
    #[error("subspace dimension {dim} exceeds ambient dimension {ambient}")]
    BadDims { dim: usize, ambient: usize },
    #[error("weights must be strictly positive, got {0}")]
    BadWeight(f64),
    #[error("ambient dimension mismatch: expected {expected}, member {member} has {got}")]
    AmbientMismatch {
        member: usize,
        expected: usize,
        got: usize,
    },
    #[error("a fusion frame needs at least one member")]
    Empty,
    #[error("dimension and weight lists must be nonempty and of equal length")]
    BadProfile,
    #[error("shape mismatch: left has (K, d) = ({k_left}, {d_left}), right ({k_right}, {d_right})")]
    ShapeMismatch {
        k_left: usize,
        d_left: usize,
        k_right: usize,
        d_right: usize,
    },
    #[error("frame operator is not {alpha}-tight: residual {residual:.3e} exceeds tolerance {threshold:.3e}")]
    NotTight {
        alpha: f64,
        residual: f64,
        threshold: f64,
    },
}

/// An `L`-dimensional subspace of F^d stored as a `d x L` matrix with
/// orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace<T: FrameScalar> {
    basis: DMatrix<T>,
}

impl<T: FrameScalar> Subspace<T> {
    /// Orthonormalizes the columns of `raw` (column-pivoted Householder QR)
    /// and returns the subspace they span.
    ///
    /// Fails with [`FrameError::RankDeficient`] when the smallest singular
    /// value of `raw` is at most [`RANK_TOL`] times the largest.
    pub fn orthonormalize(raw: &DMatrix<T>) -> Result<Self, FrameError> {
        let (d, l) = raw.shape();
        if l == 0 || l > d {
            return Err(FrameError::BadDims { dim: l, ambient: d });
        }
        let singular = raw.clone().svd(false, false).singular_values;
        let largest = singular.iter().cloned().fold(0.0f64, f64::max);
        let smallest = singular.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(smallest > RANK_TOL * largest) {
            return Err(FrameError::RankDeficient {
                expected: l,
                ratio: if largest > 0.0 { smallest / largest } else { 0.0 },
            });
        }
        let q = raw.clone().col_piv_qr().q();
        debug_assert_eq!(q.shape(), (d, l));
        Self::from_orthonormal(q)
    }

    /// Wraps a matrix whose columns are already orthonormal to within
    /// [`ORTHO_TOL`] per entry of `BᴴB - I`.
    pub fn from_orthonormal(basis: DMatrix<T>) -> Result<Self, FrameError> {
        let (d, l) = basis.shape();
        if l == 0 || l > d {
            return Err(FrameError::BadDims { dim: l, ambient: d });
        }
        let gram = basis.adjoint() * &basis;
        let mut max_dev = 0.0f64;
        for i in 0..l {
            for j in 0..l {
                let expected = if i == j { T::one() } else { T::zero() };
                max_dev = max_dev.max((gram[(i, j)] - expected).modulus());
            }
        }
        if max_dev > ORTHO_TOL {
            return Err(FrameError::NotOrthonormal { max_dev });
        }
        Ok(Self { basis })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Dimension `L` of the subspace.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    /// The orthogonal projection `B·Bᴴ` onto the subspace.
    pub fn projection(&self) -> DMatrix<T> {
        &self.basis * self.basis.adjoint()
    }

    /// `||P_self - P_other||_F`.
    pub fn distance_to(&self, other: &Self) -> Result<f64, FrameError> {
        if self.ambient_dim() != other.ambient_dim() {
            return Err(FrameError::ShapeMismatch {
                k_left: 1,
                d_left: self.ambient_dim(),
                k_right: 1,
                d_right: other.ambient_dim(),
            });
        }
        Ok((self.projection() - other.projection()).norm())
    }
}

/// A weighted sequence of subspaces of F^d. Weights are strictly positive
/// reals; subspaces may repeat and need not span.
#[derive(Debug, Clone)]
pub struct FusionFrame<T: FrameScalar> {
    d: usize,
    members: Vec<(Subspace<T>, f64)>,
}

impl<T: FrameScalar> FusionFrame<T> {
    pub fn new(d: usize, members: Vec<(Subspace<T>, f64)>) -> Result<Self, FrameError> {
        if members.is_empty() {
            return Err(FrameError::Empty);
        }
        for (k, (subspace, weight)) in members.iter().enumerate() {
            if subspace.ambient_dim() != d {
                return Err(FrameError::AmbientMismatch {
                    member: k,
                    expected: d,
                    got: subspace.ambient_dim(),
                });
            }
            if !(*weight > 0.0) || !weight.is_finite() {
                return Err(FrameError::BadWeight(*weight));
            }
        }
        Ok(Self { d, members })
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    /// Number of members `K`.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, k: usize) -> (&Subspace<T>, f64) {
        let (s, w) = &self.members[k];
        (s, *w)
    }

    pub fn subspace(&self, k: usize) -> &Subspace<T> {
        &self.members[k].0
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.members[k].1
    }

    pub fn members(&self) -> impl Iterator<Item = (&Subspace<T>, f64)> {
        self.members.iter().map(|(s, w)| (s, *w))
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|(_, w)| *w).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.members.iter().map(|(s, _)| s.dim()).collect()
    }

    pub fn profile(&self) -> DimProfile {
        DimProfile {
            d: self.d,
            dims: self.dims(),
            weights: self.weights(),
        }
    }

    /// The fusion frame operator `S = sum_k w_k^2 P_k`.
    pub fn frame_operator(&self) -> DMatrix<T> {
        let mut s = DMatrix::<T>::zeros(self.d, self.d);
        for (subspace, weight) in &self.members {
            let wsq = T::from_real(weight * weight);
            // S += w^2 B Bᴴ, accumulated without forming each projection twice
            s += subspace.projection() * wsq;
        }
        s
    }

    /// The fusion frame potential `tr(S^2) = ||S||_F^2`.
    pub fn ffp(&self) -> f64 {
        self.frame_operator().norm_squared()
    }

    /// `tr(S) = sum_k w_k^2 L_k` up to roundoff.
    pub fn operator_trace(&self) -> f64 {
        self.frame_operator().trace().real()
    }

    /// Returns `alpha = tr(S)/d` when `||S - alpha I||_F <= tol * max(1, ||S||_F)`,
    /// i.e. when the frame is alpha-tight, and `None` otherwise.
    pub fn is_tight(&self, tol: f64) -> Option<f64> {
        let s = self.frame_operator();
        let alpha = s.trace().real() / self.d as f64;
        let residual = tightness_residual(&s, alpha);
        if residual <= tol * s.norm().max(1.0) {
            Some(alpha)
        } else {
            None
        }
    }

    /// Reconstruction `(1/alpha) * sum_k w_k^2 P_k f` for an alpha-tight frame.
    ///
    /// Fails with [`FrameError::NotTight`] when `||S - alpha I||_F` exceeds
    /// `tol * max(1, ||S||_F)`.
    pub fn reconstruct(
        &self,
        alpha: f64,
        f: &DVector<T>,
        tol: f64,
    ) -> Result<DVector<T>, FrameError> {
        let s = self.frame_operator();
        let residual = tightness_residual(&s, alpha);
        let threshold = tol * s.norm().max(1.0);
        if residual > threshold {
            return Err(FrameError::NotTight {
                alpha,
                residual,
                threshold,
            });
        }
        Ok(&s * f * T::from_real(1.0 / alpha))
    }

    /// Applies a unitary `U` to every subspace basis. With `U` unitary the
    /// potential and pairwise distances are invariant.
    pub fn transform(&self, u: &DMatrix<T>) -> Self {
        let members = self
            .members
            .iter()
            .map(|(s, w)| {
                let basis = u * s.basis();
                (
                    Subspace::from_orthonormal(basis)
                        .expect("unitary image of an orthonormal basis stays orthonormal"),
                    *w,
                )
            })
            .collect();
        Self { d: self.d, members }
    }

    /// Returns a copy with member `k` replaced by `subspace` (same weight).
    pub fn with_member_replaced(&self, k: usize, subspace: Subspace<T>) -> Self {
        assert_eq!(subspace.ambient_dim(), self.d);
        let mut members = self.members.clone();
        members[k].0 = subspace;
        Self { d: self.d, members }
    }
}

/// `||S - alpha I||_F`.
pub fn tightness_residual<T: FrameScalar>(s: &DMatrix<T>, alpha: f64) -> f64 {
    let d = s.nrows();
    let mut diff = s.clone();
    for i in 0..d {
        diff[(i, i)] -= T::from_real(alpha);
    }
    diff.norm()
}

/// Distance between two subspace sequences of equal length and ambient
/// dimension: `[ sum_k ||P_{A_k} - P_{B_k}||_F^2 ]^{1/2}`.
pub fn subspace_distance<T: FrameScalar>(
    a: &[Subspace<T>],
    b: &[Subspace<T>],
) -> Result<f64, FrameError> {
    let (da, db) = (
        a.first().map_or(0, Subspace::ambient_dim),
        b.first().map_or(0, Subspace::ambient_dim),
    );
    if a.len() != b.len() || da != db {
        return Err(FrameError::ShapeMismatch {
            k_left: a.len(),
            d_left: da,
            k_right: b.len(),
            d_right: db,
        });
    }
    let mut total = 0.0;
    for (sa, sb) in a.iter().zip(b) {
        total += (sa.projection() - sb.projection()).norm_squared();
    }
    Ok(total.sqrt())
}

/// [`subspace_distance`] applied to the subspaces of two frames (weights are
/// ignored).
pub fn frame_distance<T: FrameScalar>(
    a: &FusionFrame<T>,
    b: &FusionFrame<T>,
) -> Result<f64, FrameError> {
    if a.len() != b.len() || a.ambient_dim() != b.ambient_dim() {
        return Err(FrameError::ShapeMismatch {
            k_left: a.len(),
            d_left: a.ambient_dim(),
            k_right: b.len(),
            d_right: b.ambient_dim(),
        });
    }
    let mut total = 0.0;
    for k in 0..a.len() {
        total += (a.subspace(k).projection() - b.subspace(k).projection()).norm_squared();
    }
    Ok(total.sqrt())
}

/// Fixed dimensions and weights `(d, L, w)` without the subspaces themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct DimProfile {
    pub d: usize,
    pub dims: Vec<usize>,
    pub weights: Vec<f64>,
}

impl DimProfile {
    pub fn new(d: usize, dims: Vec<usize>, weights: Vec<f64>) -> Result<Self, FrameError> {
        if d == 0 || dims.is_empty() || dims.len() != weights.len() {
            return Err(FrameError::BadProfile);
        }
        if let Some(&l) = dims.iter().find(|&&l| l == 0) {
            return Err(FrameError::BadDims { dim: l, ambient: d });
        }
        if let Some(&w) = weights.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
            return Err(FrameError::BadWeight(w));
        }
        Ok(Self { d, dims, weights })
    }

    pub fn k(&self) -> usize {
        self.dims.len()
    }

    /// `sum_k w_k^2 L_k`, the trace any frame with this profile must have.
    pub fn weighted_dim_sum(&self) -> f64 {
        self.dims
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| w * w * l as f64)
            .sum()
    }

    /// The potential lower bound `(1/d) (sum_k w_k^2 L_k)^2`, attained
    /// exactly by tight frames.
    pub fn lower_bound(&self) -> f64 {
        let t = self.weighted_dim_sum();
        t * t / self.d as f64
    }
}

/// Draws a frame with the given profile: each subspace is the
/// orthonormalization of a `d x L_k` matrix of i.i.d. standard normal
/// entries. Deterministic in `seed`.
pub fn random_frame<T: FrameScalar>(
    profile: &DimProfile,
    seed: u64,
) -> Result<FusionFrame<T>, FrameError> {
    if let Some(&l) = profile.dims.iter().find(|&&l| l > profile.d) {
        return Err(FrameError::BadDims {
            dim: l,
            ambient: profile.d,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = Vec::with_capacity(profile.k());
    for (&l, &w) in profile.dims.iter().zip(&profile.weights) {
        let raw = DMatrix::<T>::from_fn(profile.d, l, |_, _| T::standard_normal(&mut rng));
        members.push((Subspace::orthonormalize(&raw)?, w));
    }
    FusionFrame::new(profile.d, members)
}

/// A Haar-like random unitary: the Q factor of a Gaussian matrix.
/// Deterministic in `seed`; intended for randomized verification.
pub fn random_unitary<T: FrameScalar>(d: usize, seed: u64) -> DMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::<T>::from_fn(d, d, |_, _| T::standard_normal(&mut rng));
    raw.qr().q()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Complex64;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector, ComplexField};

    fn line(d: usize, entries: &[f64]) -> Subspace<f64> {
        let raw = DMatrix::from_column_slice(d, 1, entries);
        Subspace::orthonormalize(&raw).unwrap()
    }

    /// Three equiangular lines in R^2 at 0, 120 and 240 degrees; their
    /// unit-weight frame operator is (3/2) I.
    pub(crate) fn mercedes_frame() -> FusionFrame<f64> {
        let members = [0.0f64, 120.0, 240.0]
            .iter()
            .map(|deg| {
                let theta = deg.to_radians();
                (line(2, &[theta.cos(), theta.sin()]), 1.0)
            })
            .collect();
        FusionFrame::new(2, members).unwrap()
    }

    #[test]
    fn orthonormalize_rescales_a_single_column() {
        let s = line(2, &[2.0, 0.0]);
        let p = s.projection();
        assert_relative_eq!(p, dmatrix![1.0, 0.0; 0.0, 0.0], epsilon = 1e-12);
    }

    #[test]
    fn orthonormalize_preserves_span_of_orthonormal_input() {
        let basis = dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0];
        let s = Subspace::orthonormalize(&basis).unwrap();
        let gram = s.basis().adjoint() * s.basis();
        assert_relative_eq!(gram, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_relative_eq!(
            s.projection(),
            Subspace::from_orthonormal(basis).unwrap().projection(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn orthonormalize_matches_least_squares_projector() {
        // Oracle: P = A (AᴴA)^-1 Aᴴ computed directly from the raw columns.
        let raw = dmatrix![1.0, 1.0; 1.0, 0.0; 0.0, 0.0];
        let s = Subspace::orthonormalize(&raw).unwrap();
        let gram_inv = (raw.adjoint() * &raw).try_inverse().unwrap();
        let oracle = &raw * gram_inv * raw.adjoint();
        assert_relative_eq!(s.projection(), oracle, epsilon = 1e-12);
        assert_relative_eq!(
            s.projection(),
            DMatrix::from_diagonal(&dvector![1.0, 1.0, 0.0]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn orthonormalize_rejects_rank_deficiency() {
        let raw = dmatrix![1.0, 2.0; 1.0, 2.0; 0.0, 0.0];
        assert!(matches!(
            Subspace::orthonormalize(&raw),
            Err(FrameError::RankDeficient { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        assert_relative_eq!(
            line(2, &[1.0, 0.0]).projection(),
            dmatrix![1.0, 0.0; 0.0, 0.0],
            epsilon = 1e-14
        );
        assert_relative_eq!(
            line(2, &[1.0, 1.0]).projection(),
            dmatrix![0.5, 0.5; 0.5, 0.5],
            epsilon = 1e-14
        );
        let full = Subspace::orthonormalize(&DMatrix::<f64>::identity(2, 2)).unwrap();
        assert_relative_eq!(full.projection(), DMatrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn projection_is_hermitian_idempotent_with_trace_l() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw = DMatrix::<Complex64>::from_fn(5, 3, |_, _| Complex64::standard_normal(&mut rng));
        let s = Subspace::orthonormalize(&raw).unwrap();
        let p = s.projection();
        assert!((&p * &p - &p).norm() <= 1e-10);
        assert!((p.adjoint() - &p).norm() <= 1e-12);
        assert!((p.trace().real() - 3.0).abs() <= 1e-10);
    }

    #[test]
    fn frame_operator_examples() {
        let onb = FusionFrame::new(
            2,
            vec![(line(2, &[1.0, 0.0]), 1.0), (line(2, &[0.0, 1.0]), 1.0)],
        )
        .unwrap();
        assert_relative_eq!(onb.frame_operator(), DMatrix::identity(2, 2), epsilon = 1e-12);

        let doubled = FusionFrame::new(
            2,
            vec![(line(2, &[1.0, 0.0]), 1.0), (line(2, &[1.0, 0.0]), 1.0)],
        )
        .unwrap();
        assert_relative_eq!(
            doubled.frame_operator(),
            dmatrix![2.0, 0.0; 0.0, 0.0],
            epsilon = 1e-12
        );

        let planes = two_planes_r3();
        assert_relative_eq!(
            planes.frame_operator(),
            DMatrix::from_diagonal(&dvector![1.0, 2.0, 1.0]),
            epsilon = 1e-12
        );
        assert_relative_eq!(planes.operator_trace(), 4.0, epsilon = 1e-12);
    }

    /// span{e1,e2} and span{e2,e3} in R^3, unit weights; S = diag(1,2,1).
    pub(crate) fn two_planes_r3() -> FusionFrame<f64> {
        let w1 = Subspace::orthonormalize(&dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0]).unwrap();
        let w2 = Subspace::orthonormalize(&dmatrix![0.0, 0.0; 1.0, 0.0; 0.0, 1.0]).unwrap();
        FusionFrame::new(3, vec![(w1, 1.0), (w2, 1.0)]).unwrap()
    }

    #[test]
    fn ffp_examples() {
        let onb = FusionFrame::new(
            2,
            vec![(line(2, &[1.0, 0.0]), 1.0), (line(2, &[0.0, 1.0]), 1.0)],
        )
        .unwrap();
        assert_relative_eq!(onb.ffp(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(two_planes_r3().ffp(), 6.0, epsilon = 1e-12);
        // Oracle: the explicit projector sum gives S = (3/2) I, so
        // tr(S^2) = (9/4) * 2.
        assert_relative_eq!(mercedes_frame().ffp(), 4.5, epsilon = 1e-10);
    }

    #[test]
    fn lower_bound_examples() {
        let p = DimProfile::new(2, vec![1, 1], vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(p.lower_bound(), 2.0);
        let p = DimProfile::new(3, vec![2, 2], vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(p.lower_bound(), 16.0 / 3.0, epsilon = 1e-12);
        let p = DimProfile::new(2, vec![1, 1, 1], vec![2.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(p.lower_bound(), 18.0, epsilon = 1e-12);
    }

    #[test]
    fn tightness_examples() {
        let onb = FusionFrame::new(
            2,
            vec![(line(2, &[1.0, 0.0]), 1.0), (line(2, &[0.0, 1.0]), 1.0)],
        )
        .unwrap();
        assert_relative_eq!(onb.is_tight(1e-10).unwrap(), 1.0, epsilon = 1e-12);
        assert!(two_planes_r3().is_tight(1e-6).is_none());
        assert_relative_eq!(mercedes_frame().is_tight(1e-8).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn tightness_matches_bound_equality() {
        // equality in the lower bound <=> tight, both directions
        let tight = mercedes_frame();
        assert!((tight.ffp() - tight.profile().lower_bound()).abs() <= 1e-8);
        assert!(tight.is_tight(1e-6).is_some());

        let loose = two_planes_r3();
        assert!(loose.ffp() - loose.profile().lower_bound() > 1e-4);
        assert!(loose.is_tight(1e-6).is_none());
    }

    #[test]
    fn reconstruct_examples() {
        let onb = FusionFrame::new(
            2,
            vec![(line(2, &[1.0, 0.0]), 1.0), (line(2, &[0.0, 1.0]), 1.0)],
        )
        .unwrap();
        let f = dvector![0.3, -1.7];
        let g = onb.reconstruct(1.0, &f, 1e-8).unwrap();
        assert_relative_eq!(g, f, epsilon = 1e-12);

        let e1 = dvector![1.0, 0.0];
        let g = mercedes_frame().reconstruct(1.5, &e1, 1e-8).unwrap();
        assert!((g - &e1).norm() <= 1e-9);

        let err = two_planes_r3().reconstruct(4.0 / 3.0, &dvector![1.0, 0.0, 0.0], 1e-6);
        assert!(matches!(err, Err(FrameError::NotTight { .. })));
    }

    #[test]
    fn distance_examples() {
        let a = mercedes_frame();
        assert_relative_eq!(frame_distance(&a, &a).unwrap(), 0.0);

        let e1 = vec![line(2, &[1.0, 0.0])];
        let e2 = vec![line(2, &[0.0, 1.0])];
        assert_relative_eq!(
            subspace_distance(&e1, &e2).unwrap(),
            2.0f64.sqrt(),
            epsilon = 1e-12
        );

        let mismatch = frame_distance(&a, &two_planes_r3());
        assert!(matches!(mismatch, Err(FrameError::ShapeMismatch { .. })));
    }

    #[test]
    fn distance_matches_entrywise_oracle() {
        let p = DimProfile::new(4, vec![2, 1, 2], vec![1.0, 1.0, 1.0]).unwrap();
        let a = random_frame::<f64>(&p, 11).unwrap();
        let b = random_frame::<f64>(&p, 12).unwrap();
        let mut oracle = 0.0;
        for k in 0..3 {
            let diff = a.subspace(k).projection() - b.subspace(k).projection();
            for i in 0..4 {
                for j in 0..4 {
                    oracle += diff[(i, j)] * diff[(i, j)];
                }
            }
        }
        assert_relative_eq!(
            frame_distance(&a, &b).unwrap(),
            oracle.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn random_frame_is_deterministic_and_traces_add_up() {
        let p = DimProfile::new(4, vec![2, 2, 2], vec![1.5, 0.5, 1.0]).unwrap();
        let a = random_frame::<f64>(&p, 7).unwrap();
        let b = random_frame::<f64>(&p, 7).unwrap();
        assert_eq!(frame_distance(&a, &b).unwrap(), 0.0);
        assert_relative_eq!(a.operator_trace(), p.weighted_dim_sum(), epsilon = 1e-9);

        let bad = DimProfile::new(2, vec![3], vec![1.0]).unwrap();
        assert!(matches!(
            random_frame::<f64>(&bad, 0),
            Err(FrameError::BadDims { .. })
        ));
    }

    #[test]
    fn random_lines_are_rotation_invariant_on_average() {
        // Monte-Carlo oracle: mean projection of a random line in R^2 is I/2.
        let p = DimProfile::new(2, vec![1], vec![1.0]).unwrap();
        let mut mean = DMatrix::<f64>::zeros(2, 2);
        let n = 1000;
        for seed in 0..n {
            mean += random_frame::<f64>(&p, seed).unwrap().subspace(0).projection();
        }
        mean /= n as f64;
        assert!((mean - DMatrix::<f64>::identity(2, 2) * 0.5).norm() < 0.05);
    }

    #[test]
    fn complex_random_frame_trace_identity() {
        let p = DimProfile::new(3, vec![2, 1], vec![1.0, 2.0]).unwrap();
        let f = random_frame::<Complex64>(&p, 3).unwrap();
        assert_relative_eq!(f.operator_trace(), p.weighted_dim_sum(), epsilon = 1e-9);
        assert!(f.frame_operator().trace().imaginary().abs() < 1e-12);
    }

    #[test]
    fn unitary_invariance() {
        let p = DimProfile::new(5, vec![2, 1, 3], vec![1.0, 2.0, 0.5]).unwrap();
        let a = random_frame::<f64>(&p, 21).unwrap();
        let b = random_frame::<f64>(&p, 22).unwrap();
        let u = random_unitary::<f64>(5, 99);
        let ua = a.transform(&u);
        let ub = b.transform(&u);
        assert!((ua.ffp() - a.ffp()).abs() <= 1e-9 * a.ffp());
        assert!(
            (frame_distance(&ua, &ub).unwrap() - frame_distance(&a, &b).unwrap()).abs() <= 1e-9
        );
    }
}
