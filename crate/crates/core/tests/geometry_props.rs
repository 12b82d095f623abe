mod common;

use common::rng;
use geowl_core::geometry::{
    align_isomorphic, centroid, distance_matrix, quantize, rescale_unit, PointCloud, Quantizer,
    SymmetryGroup, Vec3,
};
use geowl_core::sample::{gaussian_cloud, random_congruent_copy, random_orthogonal, random_permutation};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn distance_matrix_matches_direct_norms() {
    let p = gaussian_cloud(&mut rng(11), 8);
    let d = distance_matrix(&p);
    for i in 0..8 {
        for j in 0..8 {
            let a = p.coords()[i];
            let b = p.coords()[j];
            let direct = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
            assert!((d[(i, j)] - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn centroid_matches_coordinate_mean() {
    let p = gaussian_cloud(&mut rng(12), 9);
    let c = centroid(&p);
    for k in 0..3 {
        let mean = p.coords().iter().map(|x| x[k]).sum::<f64>() / 9.0;
        assert!((c[k] - mean).abs() < 1e-12);
    }
    let mid = PointCloud::from_arrays(&[[0.0; 3], [2.0, 0.0, 0.0]]).unwrap();
    assert_eq!(centroid(&mid), Vec3::new(1.0, 0.0, 0.0));
}

#[test]
fn rescale_examples() {
    let p = PointCloud::from_arrays(&[[0.0; 3], [4.0, 0.0, 0.0]]).unwrap();
    let r = rescale_unit(&p).unwrap();
    assert_eq!(r.coords(), &[Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
    let g = rescale_unit(&gaussian_cloud(&mut rng(13), 10)).unwrap();
    assert!((g.radius() - 1.0).abs() < 1e-12);
    let again = rescale_unit(&g).unwrap();
    for (a, b) in g.coords().iter().zip(again.coords()) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn align_examples() {
    let mut r = rng(14);
    let p = gaussian_cloud(&mut r, 7);
    let q = random_congruent_copy(&mut r, &p, true);
    let a = align_isomorphic(&p, &q, SymmetryGroup::E3, 1e-6).unwrap().unwrap();
    assert!(a.rmsd < 1e-9);
    assert!(align_isomorphic(&p, &p.scaled(2.0), SymmetryGroup::E3, 1e-6).unwrap().is_none());

    let chiral = PointCloud::from_arrays(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.3, 0.5, 3.0]]).unwrap();
    let m = chiral.mirrored();
    let e3 = align_isomorphic(&chiral, &m, SymmetryGroup::E3, 1e-6).unwrap().unwrap();
    assert!(e3.used_reflection);
    assert!(align_isomorphic(&chiral, &m, SymmetryGroup::SE3, 1e-6).unwrap().is_none());
}

#[test]
fn quantize_identity_regime() {
    let p = gaussian_cloud(&mut rng(15), 6);
    let q = Quantizer::new(12).unwrap();
    for d in distance_matrix(&p).iter() {
        assert!((quantize(*d, q) - d).abs() <= 1e-12);
    }
    assert!(Quantizer::new(13).is_err());
}

fn cloud_strategy() -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::array::uniform3(-3.0..3.0f64), 3..9)
        .prop_map(|pts| PointCloud::from_arrays(&pts).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_matrix_permutes_with_nodes(p in cloud_strategy(), seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let perm = random_permutation(&mut r, p.len());
        let d = distance_matrix(&p);
        let dp = distance_matrix(&p.permuted(&perm));
        for i in 0..p.len() {
            for j in 0..p.len() {
                prop_assert_eq!(dp[(i, j)], d[(perm[i], perm[j])]);
            }
        }
    }

    #[test]
    fn distance_matrix_rigid_invariant(p in cloud_strategy(), seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let rot = random_orthogonal(&mut r);
        let moved = p.transformed(&rot, &Vec3::new(1.5, -2.0, 0.25));
        let diff = (distance_matrix(&p) - distance_matrix(&moved)).amax();
        prop_assert!(diff < 1e-9);
    }

    #[test]
    fn align_is_reflexive_and_symmetric(p in cloud_strategy(), seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let own = align_isomorphic(&p, &p, SymmetryGroup::E3, 1e-6).unwrap().unwrap();
        prop_assert!(own.rmsd < 1e-9);
        let q = random_congruent_copy(&mut r, &p, false);
        let ab = align_isomorphic(&p, &q, SymmetryGroup::SE3, 1e-6).unwrap();
        let ba = align_isomorphic(&q, &p, SymmetryGroup::SE3, 1e-6).unwrap();
        prop_assert!(ab.is_some() && ba.is_some());
        let ab = ab.unwrap();
        prop_assert!(!ab.used_reflection);
        // SE3-congruent implies E3-congruent
        prop_assert!(align_isomorphic(&p, &q, SymmetryGroup::E3, 1e-6).unwrap().is_some());
        // generic clouds have no self-congruences, so the reverse alignment is the inverse bijection
        let back = align_isomorphic(&q, &p, SymmetryGroup::SE3, 1e-6).unwrap().unwrap();
        for i in 0..p.len() {
            prop_assert_eq!(back.permutation[ab.permutation[i]], i);
        }
    }

    #[test]
    fn rescale_is_idempotent(p in cloud_strategy()) {
        let a = rescale_unit(&p).unwrap();
        let b = rescale_unit(&a).unwrap();
        for (x, y) in a.coords().iter().zip(b.coords()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
        prop_assert!((a.radius() - 1.0).abs() < 1e-12);
    }
}
