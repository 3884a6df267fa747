//! Constructors for frames with known structure: orthogonal sums, tight
//! unions of rotated fusion bases, and the orthogonal-prefix / tight-suffix
//! shape that global potential minimizers carry. Useful as optimizer
//! baselines and as positive cases for the structure verifiers.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::field::FrameScalar;
use crate::frame::{FrameError, FusionFrame, Subspace};

fn random_unitary_from<T: FrameScalar>(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<T> {
    let raw = DMatrix::<T>::from_fn(d, d, |_, _| T::standard_normal(rng));
    raw.qr().q()
}

fn column_block<T: FrameScalar>(u: &DMatrix<T>, start: usize, width: usize) -> Subspace<T> {
    let block = u.columns(start, width).into_owned();
    Subspace::from_orthonormal(block).expect("unitary columns are orthonormal")
}

/// Mutually orthogonal random subspaces with the given dimensions and
/// weights. Requires `sum L_k <= d`; with equality the members form an
/// orthogonal decomposition of the space.
pub fn orthogonal_sum_frame<T: FrameScalar>(
    d: usize,
    members: &[(usize, f64)],
    seed: u64,
) -> Result<FusionFrame<T>, FrameError> {
    let total: usize = members.iter().map(|(l, _)| l).sum();
    if total > d {
        return Err(FrameError::BadDims {
            dim: total,
            ambient: d,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unitary_from::<T>(d, &mut rng);
    let mut start = 0;
    let mut out = Vec::with_capacity(members.len());
    for &(l, w) in members {
        out.push((column_block(&u, start, l), w));
        start += l;
    }
    FusionFrame::new(d, out)
}

/// A union of rotated orthogonal decompositions: each entry contributes one
/// randomly rotated orthogonal sum covering the whole space, cut into blocks
/// of the given sizes, all blocks sharing that entry's weight. The result is
/// always tight with `alpha = sum_b w_b^2`.
pub fn tight_frame_union<T: FrameScalar>(
    d: usize,
    bases: &[(Vec<usize>, f64)],
    seed: u64,
) -> Result<FusionFrame<T>, FrameError> {
    if bases.is_empty() {
        return Err(FrameError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (composition, weight) in bases {
        let total: usize = composition.iter().sum();
        if total != d {
            return Err(FrameError::BadDims {
                dim: total,
                ambient: d,
            });
        }
        let u = random_unitary_from::<T>(d, &mut rng);
        let mut start = 0;
        for &l in composition {
            out.push((column_block(&u, start, l), *weight));
            start += l;
        }
    }
    FusionFrame::new(d, out)
}

/// A frame in the minimizer shape: `prefix` members are mutually orthogonal
/// random subspaces with their own weights, and the `suffix` is a tight
/// union (as in [`tight_frame_union`]) of the orthogonal complement of the
/// prefix span. Suffix compositions must sum to `d - sum(prefix dims)`.
///
/// Whether the result is actually a global minimizer depends on the chosen
/// weights: prefix weights must strictly decrease and every prefix `w^2`
/// must exceed the suffix tightness constant `sum_b w_b^2`.
pub fn structured_minimizer<T: FrameScalar>(
    d: usize,
    prefix: &[(usize, f64)],
    suffix: &[(Vec<usize>, f64)],
    seed: u64,
) -> Result<FusionFrame<T>, FrameError> {
    let prefix_dim: usize = prefix.iter().map(|(l, _)| l).sum();
    if prefix_dim >= d {
        return Err(FrameError::BadDims {
            dim: prefix_dim,
            ambient: d,
        });
    }
    if suffix.is_empty() {
        return Err(FrameError::Empty);
    }
    let complement_dim = d - prefix_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unitary_from::<T>(d, &mut rng);

    let mut out = Vec::new();
    let mut start = 0;
    for &(l, w) in prefix {
        out.push((column_block(&u, start, l), w));
        start += l;
    }
    let complement = u.columns(prefix_dim, complement_dim).into_owned();
    for (composition, weight) in suffix {
        let total: usize = composition.iter().sum();
        if total != complement_dim {
            return Err(FrameError::BadDims {
                dim: total,
                ambient: complement_dim,
            });
        }
        let v = random_unitary_from::<T>(complement_dim, &mut rng);
        let rotated = &complement * v;
        let mut offset = 0;
        for &l in composition {
            let block = rotated.columns(offset, l).into_owned();
            out.push((
                Subspace::from_orthonormal(block)
                    .expect("product of orthonormal blocks is orthonormal"),
                *weight,
            ));
            offset += l;
        }
    }
    FusionFrame::new(d, out)
}

/// `k >= 2` equispaced lines in R^2 with unit weights, a (k/2)-tight frame.
pub fn equispaced_lines(k: usize) -> Result<FusionFrame<f64>, FrameError> {
    if k < 2 {
        return Err(FrameError::Empty);
    }
    let members = (0..k)
        .map(|j| {
            let theta = j as f64 * std::f64::consts::PI / k as f64;
            let raw = DMatrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()]);
            (Subspace::orthonormalize(&raw).unwrap(), 1.0)
        })
        .collect();
    FusionFrame::new(2, members)
}
