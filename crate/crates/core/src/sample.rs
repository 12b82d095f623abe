//! Seeded generators for clouds and rigid motions used by tests, scans and the CLI.

use nalgebra::{Matrix3, UnitQuaternion, Quaternion};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{PointCloud, Vec3};

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    )
}

/// `n` i.i.d. standard-normal points.
pub fn gaussian_cloud<R: Rng + ?Sized>(rng: &mut R, n: usize) -> PointCloud {
    PointCloud::new((0..n).map(|_| gaussian_vec(rng)).collect()).expect("n >= 2")
}

/// `n` i.i.d. standard-normal points in the xy-plane.
pub fn planar_cloud<R: Rng + ?Sized>(rng: &mut R, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| Vec3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), 0.0))
            .collect(),
    )
    .expect("n >= 2")
}

/// Uniformly distributed proper rotation.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let q = Quaternion::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

/// Uniformly distributed orthogonal matrix; a reflection with probability 1/2.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let r = random_rotation(rng);
    if rng.random_bool(0.5) {
        r * Matrix3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0))
    } else {
        r
    }
}

pub fn random_permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Random permutation, then `R p + t` with a proper rotation (or any orthogonal
/// map when `allow_reflection`) and a standard-normal translation.
pub fn random_congruent_copy<R: Rng + ?Sized>(
    rng: &mut R,
    p: &PointCloud,
    allow_reflection: bool,
) -> PointCloud {
    let r = if allow_reflection { random_orthogonal(rng) } else { random_rotation(rng) };
    let t = gaussian_vec(rng);
    let perm = random_permutation(rng, p.len());
    p.permuted(&perm).transformed(&r, &t)
}
