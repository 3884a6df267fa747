//! Rank-preserving perturbation curves through a subspace and the first and
//! second derivatives of the projection path and of the potential along them.
//!
//! A curve through the subspace spanned by orthonormal columns `f_1..f_L`
//! moves every column toward a common unit direction `h` orthogonal to all of
//! them: column l of `A(t)` is `(1 - t^2 |z_l|^2)^{1/2} f_l + t z_l h` with
//! coefficients `|z_l| <= 1/2`, not all zero. The columns stay linearly
//! independent for `|t| < 1`, so the curve lives on the fixed-dimension
//! configuration space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::field::FrameScalar;
use crate::frame::{FusionFrame, Subspace};

/// Validation tolerance for the curve invariants.
const CURVE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("expected {expected} coefficients, got {got}")]
    BadCoefficientCount { expected: usize, got: usize },
    #[error("coefficient modulus {0} exceeds 1/2")]
    CoefficientTooLarge(f64),
    #[error("coefficients must not all be zero")]
    AllZero,
    #[error("direction must be a unit vector (norm deviates by {0:.3e})")]
    DirectionNotUnit(f64),
    #[error("direction must be orthogonal to the base subspace (overlap {0:.3e})")]
    DirectionNotOrthogonal(f64),
    #[error("direction lives in dimension {got}, base in {expected}")]
    AmbientMismatch { expected: usize, got: usize },
}

/// A perturbation curve `t -> span A(t)` through `base` at `t = 0`.
#[derive(Debug, Clone)]
pub struct PerturbationCurve<T: FrameScalar> {
    base: Subspace<T>,
    coeffs: Vec<T>,
    direction: DVector<T>,
}

/// Projection `P(t) = pi_{span A(t)}` and its first two derivatives at `t = 0`.
///
/// With `F` the base matrix, `H(:,l) = z_l h`, `F~(:,l) = -|z_l|^2 f_l` and
/// `D(l,l') = -2 (1 - delta_{l,l'}) conj(z_l) z_{l'}`:
///
/// `P'(0)  = H Fᴴ + F Hᴴ`
/// `P''(0) = F~ Fᴴ + 2 H Hᴴ + F D Fᴴ + F F~ᴴ`
///
/// `D` is the second derivative of `[Aᴴ(t) A(t)]^{-1}` at 0; it has zero
/// diagonal (the Gram matrix is `I + t^2 N` with `N` hollow), and `tr D = 0`.
#[derive(Debug, Clone)]
pub struct CurveJet<T: FrameScalar> {
    pub p0: DMatrix<T>,
    pub first: DMatrix<T>,
    pub second: DMatrix<T>,
}

impl<T: FrameScalar> PerturbationCurve<T> {
    pub fn new(
        base: Subspace<T>,
        coeffs: Vec<T>,
        direction: DVector<T>,
    ) -> Result<Self, CurveError> {
        if coeffs.len() != base.dim() {
            return Err(CurveError::BadCoefficientCount {
                expected: base.dim(),
                got: coeffs.len(),
            });
        }
        if direction.len() != base.ambient_dim() {
            return Err(CurveError::AmbientMismatch {
                expected: base.ambient_dim(),
                got: direction.len(),
            });
        }
        let mut max_mod = 0.0f64;
        for z in &coeffs {
            max_mod = max_mod.max(z.modulus());
        }
        if max_mod > 0.5 {
            return Err(CurveError::CoefficientTooLarge(max_mod));
        }
        if max_mod == 0.0 {
            return Err(CurveError::AllZero);
        }
        let norm_dev = (direction.norm() - 1.0).abs();
        if norm_dev > CURVE_TOL {
            return Err(CurveError::DirectionNotUnit(norm_dev));
        }
        let overlap = (base.basis().adjoint() * &direction).norm();
        if overlap > CURVE_TOL {
            return Err(CurveError::DirectionNotOrthogonal(overlap));
        }
        Ok(Self {
            base,
            coeffs,
            direction,
        })
    }

    /// Draws admissible random coefficients and a random direction orthogonal
    /// to `base`. Returns `None` when the base spans the whole space (no
    /// orthogonal direction exists).
    pub fn random<R: Rng + ?Sized>(base: &Subspace<T>, rng: &mut R) -> Option<Self> {
        if base.dim() == base.ambient_dim() {
            return None;
        }
        let d = base.ambient_dim();
        // direction: random vector projected onto the orthogonal complement
        let mut h = DVector::<T>::from_fn(d, |_, _| T::standard_normal(rng));
        h -= base.basis() * (base.basis().adjoint() * &h);
        let norm = h.norm();
        if norm < 1e-8 {
            return None;
        }
        h /= T::from_real(norm);
        let coeffs: Vec<T> = (0..base.dim())
            .map(|_| {
                let raw = T::standard_normal(rng);
                let m = raw.modulus();
                if m == 0.0 {
                    T::from_real(0.25)
                } else {
                    raw * T::from_real(0.45 / m.max(1.0))
                }
            })
            .collect();
        Self::new(base.clone(), coeffs, h).ok()
    }

    pub fn base(&self) -> &Subspace<T> {
        &self.base
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn direction(&self) -> &DVector<T> {
        &self.direction
    }

    /// `sum_l |z_l|^2`.
    pub fn coeff_energy(&self) -> f64 {
        self.coeffs.iter().map(|z| z.modulus_squared()).sum()
    }

    /// The raw curve matrix `A(t)`.
    pub fn matrix_at(&self, t: f64) -> DMatrix<T> {
        assert!(t.abs() < 1.0, "curve parameter must satisfy |t| < 1");
        let mut a = DMatrix::<T>::zeros(self.base.ambient_dim(), self.base.dim());
        for (l, z) in self.coeffs.iter().enumerate() {
            let shrink = T::from_real((1.0 - t * t * z.modulus_squared()).sqrt());
            let col = self.base.basis().column(l) * shrink + &self.direction * (*z * T::from_real(t));
            a.set_column(l, &col);
        }
        a
    }

    /// The subspace spanned by `A(t)`; its dimension is exactly `L` for
    /// `|t| < 1`.
    pub fn point(&self, t: f64) -> Subspace<T> {
        Subspace::orthonormalize(&self.matrix_at(t))
            .expect("curve columns stay linearly independent for |t| < 1")
    }

    /// First and second derivatives of the projection path at `t = 0`.
    pub fn jet(&self) -> CurveJet<T> {
        let f = self.base.basis();
        let l_count = self.base.dim();
        let d = self.base.ambient_dim();

        let mut h = DMatrix::<T>::zeros(d, l_count);
        let mut f_shrunk = DMatrix::<T>::zeros(d, l_count);
        for (l, z) in self.coeffs.iter().enumerate() {
            h.set_column(l, &(&self.direction * *z));
            f_shrunk.set_column(l, &(f.column(l) * T::from_real(-z.modulus_squared())));
        }
        let mut gram_dd = DMatrix::<T>::zeros(l_count, l_count);
        for (a, za) in self.coeffs.iter().enumerate() {
            for (b, zb) in self.coeffs.iter().enumerate() {
                if a != b {
                    gram_dd[(a, b)] = za.conjugate() * *zb * T::from_real(-2.0);
                }
            }
        }

        let p0 = f * f.adjoint();
        let first = &h * f.adjoint() + f * h.adjoint();
        let second =
            &f_shrunk * f.adjoint() + (&h * h.adjoint()) * T::from_real(2.0) + f * &gram_dd * f.adjoint()
                + f * f_shrunk.adjoint();
        CurveJet { p0, first, second }
    }
}

/// Real part of `tr(A B)` without forming the product.
fn re_trace_product<T: FrameScalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * b[(j, i)]).real();
        }
    }
    acc
}

/// First and second derivatives at `t = 0` of the potential along the path
/// that replaces member `k` by `curve.point(t)` and keeps all other members
/// fixed. The curve base must be member k's subspace.
pub fn potential_derivatives<T: FrameScalar>(
    frame: &FusionFrame<T>,
    k: usize,
    curve: &PerturbationCurve<T>,
) -> (f64, f64) {
    potential_derivatives_multi(frame, &[(k, curve)])
}

/// Derivatives of the potential when several members move simultaneously
/// along their own curves. With `S' = sum w_k^2 P_k'(0)` and
/// `S'' = sum w_k^2 P_k''(0)`:
///
/// `d/dt FFP = 2 tr(S' S)` and `d^2/dt^2 FFP = 2 tr(S'' S) + 2 tr(S' S')`.
pub fn potential_derivatives_multi<T: FrameScalar>(
    frame: &FusionFrame<T>,
    moves: &[(usize, &PerturbationCurve<T>)],
) -> (f64, f64) {
    let d = frame.ambient_dim();
    let s = frame.frame_operator();
    let mut s1 = DMatrix::<T>::zeros(d, d);
    let mut s2 = DMatrix::<T>::zeros(d, d);
    for (k, curve) in moves {
        let (subspace, weight) = frame.member(*k);
        assert!(
            (curve.base().basis() - subspace.basis()).norm() <= 1e-12,
            "curve base must be member {k}'s basis"
        );
        let jet = curve.jet();
        let wsq = T::from_real(weight * weight);
        s1 += jet.first * wsq;
        s2 += jet.second * wsq;
    }
    let first = 2.0 * re_trace_product(&s1, &s);
    let second = 2.0 * re_trace_product(&s2, &s) + 2.0 * re_trace_product(&s1, &s1);
    (first, second)
}


#[cfg(test)]
mod descent_direction_tests {
    use super::*;
    use crate::frame::FusionFrame;
    use nalgebra::{DMatrix, DVector};

    /// Three coplanar equiangular lines (a tight frame for the e1-e2 plane,
    /// constant 3/2) plus an orthogonal line with unit weight: the frame is
    /// in class E with eigenvalues (3/2, 1), and the plane's index set is
    /// not a direct sum, so a joint perturbation strictly decreases the
    /// potential.
    fn coplanar_lines_plus_axis() -> (FusionFrame<f64>, Vec<DVector<f64>>) {
        let mut members = Vec::new();
        let mut directions = Vec::new();
        for j in 0..3 {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / 3.0;
            let v = DVector::from_vec(vec![theta.cos(), theta.sin(), 0.0]);
            directions.push(v.clone());
            let raw = DMatrix::from_column_slice(3, 1, v.as_slice());
            members.push((Subspace::orthonormalize(&raw).unwrap(), 1.0));
        }
        let axis = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        members.push((Subspace::orthonormalize(&axis).unwrap(), 1.0));
        (FusionFrame::new(3, members).unwrap(), directions)
    }

    #[test]
    fn joint_perturbation_of_a_dependent_cluster_is_a_descent_direction() {
        let (frame, directions) = coplanar_lines_plus_axis();
        // the three unit directions sum to zero, so equal coefficients
        // satisfy the dependence relation sum_k w_k^2 conj(z_k) f_k = 0
        let summed: DVector<f64> = directions.iter().sum();
        assert!(summed.norm() <= 1e-14);

        let h = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let curves: Vec<PerturbationCurve<f64>> = (0..3)
            .map(|k| {
                PerturbationCurve::new(frame.subspace(k).clone(), vec![0.5], h.clone()).unwrap()
            })
            .collect();
        let moves: Vec<(usize, &PerturbationCurve<f64>)> =
            curves.iter().enumerate().collect();
        let (first, second) = potential_derivatives_multi(&frame, &moves);

        // at t=0 the derivative vanishes and the curvature equals
        // 4 (lambda_J - lambda_j) sum_k w_k^2 sum_l |z_{k,l}|^2
        //   = 4 (1 - 3/2) (3 * 1/4) = -3/2
        assert!(first.abs() <= 1e-10, "first = {first}");
        assert!((second - (-1.5)).abs() <= 1e-9, "second = {second}");

        // finite differences agree and the potential strictly decreases
        let shifted = |t: f64| {
            let mut moved = frame.clone();
            for (k, curve) in &moves {
                moved = moved.with_member_replaced(*k, curve.point(t));
            }
            moved.ffp()
        };
        let h_fd = 1e-4;
        let (fp, f0, fm) = (shifted(h_fd), shifted(0.0), shifted(-h_fd));
        let fd2 = (fp - 2.0 * f0 + fm) / (h_fd * h_fd);
        assert!((second - fd2).abs() <= 1e-4);
        assert!(shifted(0.3) < f0, "potential did not decrease");
    }
}
