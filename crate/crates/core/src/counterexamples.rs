//! Vertex-subset clouds on Platonic solids (and concentric combinations of
//! them) that distance message passing cannot tell apart although they are
//! not congruent.
//!
//! The search enumerates k-subsets of the vertex set, keeps one subset per
//! orbit of the vertex set's symmetry group, fingerprints the survivors with
//! the `D` engine and pairs non-congruent subsets that share a fingerprint.
//! Every emitted pair is checked by the congruence oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    align_isomorphic, centroid, isometry_automorphisms, PointCloud, SymmetryGroup, Vec3,
    DEFAULT_ALIGN_BUDGET, DEFAULT_ALIGN_TOL,
};
use crate::hash::Digest128;
use crate::refine::{distinguish, fingerprint, Model, RefineConfig, Verdict};

/// Radius ratio between consecutive shells of combinations and augmentations.
pub const DEFAULT_SHELL_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyhedronKind {
    Tetrahedron,
    Cube,
    Octahedron,
    Dodecahedron,
    Icosahedron,
}

impl PolyhedronKind {
    pub const ALL: [PolyhedronKind; 5] = [
        PolyhedronKind::Tetrahedron,
        PolyhedronKind::Cube,
        PolyhedronKind::Octahedron,
        PolyhedronKind::Dodecahedron,
        PolyhedronKind::Icosahedron,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolyhedronKind::Tetrahedron => "tetrahedron",
            PolyhedronKind::Cube => "cube",
            PolyhedronKind::Octahedron => "octahedron",
            PolyhedronKind::Dodecahedron => "dodecahedron",
            PolyhedronKind::Icosahedron => "icosahedron",
        }
    }

    pub fn vertex_count(self) -> usize {
        match self {
            PolyhedronKind::Tetrahedron => 4,
            PolyhedronKind::Cube => 8,
            PolyhedronKind::Octahedron => 6,
            PolyhedronKind::Dodecahedron => 20,
            PolyhedronKind::Icosahedron => 12,
        }
    }
}

impl fmt::Display for PolyhedronKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolyhedronKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PolyhedronKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown polyhedron {s:?}")))
    }
}

fn sign_patterns<const N: usize>() -> impl Iterator<Item = [f64; N]> {
    (0..1u32 << N).map(|bits| std::array::from_fn(|i| if bits >> (N - 1 - i) & 1 == 1 { -1.0 } else { 1.0 }))
}

/// Centered vertices with circumradius `scale`.
pub fn polyhedron_vertices(kind: PolyhedronKind, scale: f64) -> Result<PointCloud> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw: Vec<Vec3> = match kind {
        PolyhedronKind::Tetrahedron => vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ],
        PolyhedronKind::Cube => sign_patterns::<3>().map(|[a, b, c]| Vec3::new(a, b, c)).collect(),
        PolyhedronKind::Octahedron => {
            let mut v = Vec::new();
            for axis in 0..3 {
                for s in [1.0, -1.0] {
                    let mut x = Vec3::zeros();
                    x[axis] = s;
                    v.push(x);
                }
            }
            v
        }
        PolyhedronKind::Dodecahedron => {
            let mut v: Vec<Vec3> = sign_patterns::<3>().map(|[a, b, c]| Vec3::new(a, b, c)).collect();
            for [a, b] in sign_patterns::<2>() {
                v.push(Vec3::new(0.0, a / phi, b * phi));
                v.push(Vec3::new(a / phi, b * phi, 0.0));
                v.push(Vec3::new(a * phi, 0.0, b / phi));
            }
            v
        }
        PolyhedronKind::Icosahedron => {
            let mut v = Vec::new();
            for [a, b] in sign_patterns::<2>() {
                v.push(Vec3::new(0.0, a, b * phi));
                v.push(Vec3::new(a, b * phi, 0.0));
                v.push(Vec3::new(a * phi, 0.0, b));
            }
            v
        }
    };
    PointCloud::new(raw.into_iter().map(|x| x.normalize() * scale).collect())
}

fn check_centered(p: &PointCloud) -> Result<()> {
    let norm = centroid(p).norm();
    if norm > 1e-9 {
        Err(Error::NotCentered { norm })
    } else {
        Ok(())
    }
}

/// `outer` followed by `inner` scaled by `ratio`. With `shell_labels` the
/// outer nodes get label 0 and the inner nodes label 1.
pub fn combine_clouds(outer: &PointCloud, inner: &PointCloud, ratio: f64, shell_labels: bool) -> Result<PointCloud> {
    check_centered(outer)?;
    check_centered(inner)?;
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!("ratio must be positive, got {ratio}")));
    }
    let mut coords = outer.coords().to_vec();
    coords.extend(inner.coords().iter().map(|x| x * ratio));
    if shell_labels {
        let labels = std::iter::repeat_n(0, outer.len()).chain(std::iter::repeat_n(1, inner.len())).collect();
        return PointCloud::with_labels(coords, labels);
    }
    match (outer.labels(), inner.labels()) {
        (None, None) => PointCloud::new(coords),
        (Some(a), Some(b)) => PointCloud::with_labels(coords, a.iter().chain(b).copied().collect()),
        _ => Err(Error::InvalidArgument("only one of the clouds is labeled".into())),
    }
}

/// One polyhedron with the given circumradius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shell {
    pub kind: PolyhedronKind,
    pub radius: f64,
}

/// Concentric, identically oriented polyhedra; vertices are numbered shell by shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub shells: Vec<Shell>,
}

impl SearchSpace {
    pub fn single(kind: PolyhedronKind) -> Self {
        SearchSpace { shells: vec![Shell { kind, radius: 1.0 }] }
    }

    /// Outer polyhedron of radius 1 and inner one of radius `ratio`.
    pub fn combination(outer: PolyhedronKind, inner: PolyhedronKind, ratio: f64) -> Self {
        SearchSpace { shells: vec![Shell { kind: outer, radius: 1.0 }, Shell { kind: inner, radius: ratio }] }
    }

    pub fn size(&self) -> usize {
        self.shells.iter().map(|s| s.kind.vertex_count()).sum()
    }

    pub fn vertices(&self) -> Result<PointCloud> {
        let mut coords = Vec::with_capacity(self.size());
        for s in &self.shells {
            coords.extend_from_slice(polyhedron_vertices(s.kind, s.radius)?.coords());
        }
        PointCloud::new(coords)
    }

    pub fn describe(&self) -> String {
        self.shells.iter().map(|s| format!("{}@{}", s.kind, s.radius)).collect::<Vec<_>>().join("+")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    /// Inner shells repeat each side's own selection.
    Origin,
    /// Inner shells carry the complement of each side's selection.
    Complementary,
    /// Inner shells carry every vertex.
    All,
}

impl FromStr for AugmentMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "origin" => Ok(AugmentMode::Origin),
            "complementary" => Ok(AugmentMode::Complementary),
            "all" => Ok(AugmentMode::All),
            _ => Err(Error::InvalidArgument(format!("unknown augmentation mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Augmentation {
    pub mode: AugmentMode,
    pub copies: usize,
}

/// Where a pair came from: the vertex space and the selected vertex indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub space: SearchSpace,
    pub selections: [Vec<usize>; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<Augmentation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexamplePair {
    pub p1: PointCloud,
    pub p2: PointCloud,
    pub provenance: Provenance,
    pub verified_noniso: bool,
    /// Per model: true when the two fingerprints are equal.
    pub verified_blind: BTreeMap<Model, bool>,
}

impl CounterexamplePair {
    pub fn from_selections(space: SearchSpace, s1: Vec<usize>, s2: Vec<usize>) -> Result<Self> {
        let v = space.vertices()?;
        Ok(CounterexamplePair {
            p1: v.subset(&s1)?,
            p2: v.subset(&s2)?,
            provenance: Provenance { space, selections: [s1, s2], augmentation: None },
            verified_noniso: false,
            verified_blind: BTreeMap::new(),
        })
    }

    pub fn is_valid(&self) -> bool {
        self.p1.len() == self.p2.len()
            && self.verified_noniso
            && self.verified_blind.get(&Model::D) == Some(&true)
    }
}

/// Recomputes the non-congruence flag (under E3) and the per-model blindness flags.
pub fn verify_counterexample(pair: &CounterexamplePair, models: &[Model], cfg: &RefineConfig) -> Result<CounterexamplePair> {
    let mut out = pair.clone();
    out.verified_noniso = align_isomorphic(&pair.p1, &pair.p2, SymmetryGroup::E3, DEFAULT_ALIGN_TOL)?.is_none();
    for &m in models {
        let blind = distinguish(&pair.p1, &pair.p2, m, cfg)? == Verdict::NotDistinguished;
        out.verified_blind.insert(m, blind);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub pairs: Vec<CounterexamplePair>,
    /// Subsets visited (before orbit deduplication).
    pub enumerated: u64,
    /// Orbit representatives fingerprinted.
    pub orbits: usize,
    /// True when the budget stopped enumeration early.
    pub budget_exhausted: bool,
}

/// Lookup tables mapping each byte of a vertex mask to its image under one permutation.
struct MaskImage {
    tables: Vec<[u64; 256]>,
}

impl MaskImage {
    fn new(perm: &[usize]) -> Self {
        let chunks = perm.len().div_ceil(8);
        let tables = (0..chunks)
            .map(|c| {
                std::array::from_fn(|byte| {
                    (0..8)
                        .filter(|b| byte >> b & 1 == 1)
                        .map(|b| c * 8 + b)
                        .filter(|&v| v < perm.len())
                        .fold(0u64, |acc, v| acc | 1 << perm[v])
                })
            })
            .collect();
        MaskImage { tables }
    }

    fn apply(&self, mask: u64) -> u64 {
        self.tables.iter().enumerate().fold(0, |acc, (c, t)| acc | t[(mask >> (8 * c)) as usize & 0xff])
    }
}

fn mask_nodes(mask: u64) -> Vec<usize> {
    (0..64).filter(|b| mask >> b & 1 == 1).collect()
}

/// Next larger integer with the same popcount.
fn next_combination(x: u64) -> u64 {
    let x = x as u128;
    let c = x & x.wrapping_neg();
    let r = x + c;
    ((((r ^ x) >> 2) / c) | r) as u64
}

pub fn search_disgnn_blind_pairs(
    kind: PolyhedronKind,
    subset_size: usize,
    cfg: &RefineConfig,
    budget: u64,
) -> Result<SearchOutcome> {
    search_blind_pairs_in(&SearchSpace::single(kind), subset_size, cfg, budget)
}

/// Searches `subset_size`-subsets of the vertex space for pairs that are not
/// congruent but receive equal `D` fingerprints. At most `budget` subsets are
/// enumerated; pairs are ordered by their vertex masks.
pub fn search_blind_pairs_in(
    space: &SearchSpace,
    subset_size: usize,
    cfg: &RefineConfig,
    budget: u64,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let v = space.vertices()?;
    let m = v.len();
    if m > 63 {
        return Err(Error::InvalidArgument(format!("vertex space has {m} vertices; at most 63 supported")));
    }
    if subset_size < 2 || subset_size > m {
        return Err(Error::InvalidArgument(format!("subset size {subset_size} outside 2..={m}")));
    }
    let images: Vec<MaskImage> = isometry_automorphisms(&v, SymmetryGroup::E3, DEFAULT_ALIGN_TOL, DEFAULT_ALIGN_BUDGET)?
        .iter()
        .map(|p| MaskImage::new(p))
        .collect();

    let limit = 1u64 << m;
    let mut mask = (1u64 << subset_size) - 1;
    let mut enumerated = 0u64;
    let mut budget_exhausted = false;
    let mut reps = Vec::new();
    while mask < limit {
        if enumerated == budget {
            budget_exhausted = true;
            break;
        }
        enumerated += 1;
        if images.iter().all(|g| g.apply(mask) >= mask) {
            reps.push(mask);
        }
        mask = next_combination(mask);
    }

    let digests: Vec<Digest128> = reps
        .par_iter()
        .map(|&mask| fingerprint(&v.subset(&mask_nodes(mask))?, Model::D, cfg).map(|f| f.digest))
        .collect::<Result<_>>()?;
    let mut groups: BTreeMap<Digest128, Vec<u64>> = BTreeMap::new();
    for (&mask, d) in reps.iter().zip(digests) {
        groups.entry(d).or_default().push(mask);
    }

    let mut found: Vec<(u64, u64)> = Vec::new();
    for members in groups.values().filter(|g| g.len() > 1) {
        // congruence classes within the group, first member as representative
        let mut classes: Vec<u64> = Vec::new();
        for &mask in members {
            let cloud = v.subset(&mask_nodes(mask))?;
            let mut new_class = true;
            for &rep in &classes {
                let other = v.subset(&mask_nodes(rep))?;
                if align_isomorphic(&other, &cloud, SymmetryGroup::E3, DEFAULT_ALIGN_TOL)?.is_some() {
                    new_class = false;
                    break;
                }
            }
            if new_class {
                classes.push(mask);
            }
        }
        for (i, &a) in classes.iter().enumerate() {
            for &b in &classes[i + 1..] {
                found.push((a.min(b), a.max(b)));
            }
        }
    }
    found.sort_unstable();

    let pairs = found
        .into_iter()
        .map(|(a, b)| {
            let mut pair = CounterexamplePair::from_selections(space.clone(), mask_nodes(a), mask_nodes(b))?;
            pair.verified_noniso = true;
            pair.verified_blind.insert(Model::D, true);
            Ok(pair)
        })
        .collect::<Result<_>>()?;
    Ok(SearchOutcome { pairs, enumerated, orbits: reps.len(), budget_exhausted })
}

/// Stacks `copies` shrinking instances of the pair's vertex space (radius
/// ratio 1/2 between instances). The outermost instance keeps the original
/// selections; inner instances carry the pattern chosen by `mode`. The result
/// is re-verified for non-congruence and `D`-blindness.
pub fn augment_combinatorial(
    pair: &CounterexamplePair,
    mode: AugmentMode,
    copies: usize,
    cfg: &RefineConfig,
) -> Result<CounterexamplePair> {
    if copies < 2 {
        return Err(Error::InvalidArgument(format!("copies must be at least 2, got {copies}")));
    }
    if !pair.is_valid() {
        return Err(Error::InvalidArgument("base pair is not a verified counterexample".into()));
    }
    if pair.provenance.augmentation.is_some() {
        return Err(Error::InvalidArgument("base pair is already augmented".into()));
    }
    let base = &pair.provenance.space;
    let m = base.size();
    let mut shells = Vec::with_capacity(copies * base.shells.len());
    let mut selections: [Vec<usize>; 2] = Default::default();
    for copy in 0..copies {
        let f = DEFAULT_SHELL_RATIO.powi(copy as i32);
        shells.extend(base.shells.iter().map(|s| Shell { kind: s.kind, radius: s.radius * f }));
        for (side, sel) in pair.provenance.selections.iter().enumerate() {
            let pattern: Vec<usize> = match (copy, mode) {
                (0, _) | (_, AugmentMode::Origin) => sel.clone(),
                (_, AugmentMode::Complementary) => (0..m).filter(|i| !sel.contains(i)).collect(),
                (_, AugmentMode::All) => (0..m).collect(),
            };
            selections[side].extend(pattern.into_iter().map(|i| copy * m + i));
        }
    }
    let [s1, s2] = selections;
    let mut out = CounterexamplePair::from_selections(SearchSpace { shells }, s1, s2)?;
    out.provenance.augmentation = Some(Augmentation { mode, copies });
    let out = verify_counterexample(&out, &[Model::D], cfg)?;
    if !out.verified_noniso {
        return Err(Error::VerificationFailed("augmented clouds are congruent".into()));
    }
    if out.verified_blind.get(&Model::D) != Some(&true) {
        return Err(Error::VerificationFailed("distance refinement separates the augmented clouds".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance_matrix;

    #[test]
    fn cube_matches_standard_coordinates() {
        let p = polyhedron_vertices(PolyhedronKind::Cube, 3f64.sqrt()).unwrap();
        for x in p.coords() {
            for k in 0..3 {
                assert!((x[k].abs() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn polyhedra_are_centered_on_their_sphere() {
        for kind in PolyhedronKind::ALL {
            let p = polyhedron_vertices(kind, 2.5).unwrap();
            assert_eq!(p.len(), kind.vertex_count());
            assert!(centroid(&p).norm() < 1e-12);
            assert!(p.coords().iter().all(|x| (x.norm() - 2.5).abs() < 1e-12));
        }
        assert!(polyhedron_vertices(PolyhedronKind::Cube, 0.0).is_err());
    }

    #[test]
    fn dodecahedron_has_thirty_equal_edges() {
        let p = polyhedron_vertices(PolyhedronKind::Dodecahedron, 1.0).unwrap();
        let d = distance_matrix(&p);
        let mut all: Vec<f64> = (0..20).flat_map(|i| ((i + 1)..20).map(move |j| (i, j))).map(|(i, j)| d[(i, j)]).collect();
        all.sort_by(f64::total_cmp);
        let edge = all[0];
        assert_eq!(all.iter().filter(|&&x| (x - edge).abs() < 1e-9).count(), 30);
    }

    #[test]
    fn combination_sizes_and_centering() {
        let cube = polyhedron_vertices(PolyhedronKind::Cube, 1.0).unwrap();
        let octa = polyhedron_vertices(PolyhedronKind::Octahedron, 1.0).unwrap();
        let c = combine_clouds(&cube, &octa, 0.5, false).unwrap();
        assert_eq!(c.len(), 14);
        let c = combine_clouds(&cube, &cube, 1.0, true).unwrap();
        assert_eq!(c.len(), 16);
        assert_eq!(c.labels().unwrap()[8], 1);
        let shifted = cube.transformed(&nalgebra::Matrix3::identity(), &Vec3::new(0.1, 0.0, 0.0));
        assert!(matches!(combine_clouds(&shifted, &octa, 0.5, false), Err(Error::NotCentered { .. })));
    }

    #[test]
    fn mask_images_follow_permutation() {
        let perm = vec![3, 0, 1, 2, 9, 4, 5, 6, 7, 8];
        let img = MaskImage::new(&perm);
        assert_eq!(img.apply(0b1), 0b1000);
        assert_eq!(img.apply(1 << 4), 1 << 9);
        assert_eq!(img.apply(1 << 9), 1 << 8);
    }

    #[test]
    fn gosper_enumerates_all_combinations() {
        let mut x = 0b111u64;
        let mut count = 0;
        while x < 1 << 6 {
            assert_eq!(x.count_ones(), 3);
            count += 1;
            x = next_combination(x);
        }
        assert_eq!(count, 20);
    }

    #[test]
    fn tetrahedron_has_no_blind_pairs() {
        for k in 2..=4 {
            let out = search_disgnn_blind_pairs(PolyhedronKind::Tetrahedron, k, &RefineConfig::default(), 1000).unwrap();
            assert!(out.pairs.is_empty());
            assert!(!out.budget_exhausted);
        }
    }

    #[test]
    fn search_rejects_bad_sizes() {
        let cfg = RefineConfig::default();
        assert!(search_disgnn_blind_pairs(PolyhedronKind::Cube, 1, &cfg, 10).is_err());
        assert!(search_disgnn_blind_pairs(PolyhedronKind::Cube, 9, &cfg, 10).is_err());
    }

    #[test]
    fn budget_flag_is_set() {
        let out = search_disgnn_blind_pairs(PolyhedronKind::Cube, 4, &RefineConfig::default(), 5).unwrap();
        assert!(out.budget_exhausted);
        assert_eq!(out.enumerated, 5);
    }
}
