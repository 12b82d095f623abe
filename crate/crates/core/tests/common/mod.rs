#![allow(dead_code)]

use geowl_core::counterexamples::{
    search_blind_pairs_in, verify_counterexample, CounterexamplePair, PolyhedronKind, SearchSpace,
};
use geowl_core::geometry::{align_isomorphic, PointCloud, SymmetryGroup, Vec3};
use geowl_core::refine::{Model, RefineConfig};
use geowl_core::sample::gaussian_cloud;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn equilateral() -> PointCloud {
    let h = 3f64.sqrt() / 2.0;
    PointCloud::from_arrays(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, h, 0.0]]).unwrap()
}

/// Gaussian cloud with no proper self-mirror congruence.
pub fn chiral_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    loop {
        let p = gaussian_cloud(rng, n);
        if align_isomorphic(&p, &p.mirrored(), SymmetryGroup::SE3, 1e-6).unwrap().is_none() {
            return p;
        }
    }
}

pub fn blind_pairs_in(space: &SearchSpace, sizes: impl IntoIterator<Item = usize>) -> Vec<CounterexamplePair> {
    let cfg = RefineConfig::default();
    sizes
        .into_iter()
        .flat_map(|k| search_blind_pairs_in(space, k, &cfg, 1_000_000).unwrap().pairs)
        .collect()
}

/// Blind pairs from the dodecahedron (8, 10, 12 vertices), the icosahedron and
/// a cube with an inscribed octahedron at radius ratio 1/2.
pub fn polyhedral_pairs() -> Vec<CounterexamplePair> {
    let mut out = blind_pairs_in(&SearchSpace::single(PolyhedronKind::Dodecahedron), [8, 10, 12]);
    out.extend(blind_pairs_in(&SearchSpace::single(PolyhedronKind::Icosahedron), 2..=12));
    out.extend(blind_pairs_in(
        &SearchSpace::combination(PolyhedronKind::Cube, PolyhedronKind::Octahedron, 0.5),
        2..=14,
    ));
    out
}

pub fn verified(pair: &CounterexamplePair) -> CounterexamplePair {
    verify_counterexample(
        pair,
        &[Model::D, Model::GeoNGNN, Model::DimeNetEdge, Model::TwoFWLGeo],
        &RefineConfig::default(),
    )
    .unwrap()
}

pub fn fixture(name: &str) -> CounterexamplePair {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    serde_json::from_str(&text).unwrap()
}

pub fn unit_square() -> PointCloud {
    PointCloud::from_arrays(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]).unwrap()
}

pub fn translate(p: &PointCloud, t: Vec3) -> PointCloud {
    p.transformed(&nalgebra::Matrix3::identity(), &t)
}
