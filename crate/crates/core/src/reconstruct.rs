//! Coordinate recovery from distances to two anchors plus pairwise distances.
//!
//! With anchors `c1` at the origin and `c2` on the +x axis, a node's two
//! anchor distances fix its x coordinate and its distance `rho` from the axis.
//! One seed node of maximal `rho` fixes the rotation about the axis; every
//! other node's y then follows from its distance to the seed, and only the
//! sign of z is left open. Those signs are resolved against already placed
//! nodes (E3) or read from triple-product orientation signs (SE3).

use std::cmp::Ordering;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid, distance_matrix, PointCloud, Quantizer, SymmetryGroup, Vec3};
use crate::refine::{c_encode, ORIENTATION_ZERO_BAND};

/// Relative tolerance below which a node counts as on the axis or in the seed plane.
const PLACEMENT_TOL: f64 = 2e-7;
/// Relative tolerance of the final distance check.
pub const RECONSTRUCTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangularEncoding {
    pub anchors: [Vec3; 2],
    pub anchor_gap: f64,
    /// `(d(i, c1), d(i, c2))` per node.
    pub per_node: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    /// Coordinates in the anchor frame: `c1` at the origin, `c2` on +x.
    pub coords: Vec<Vec3>,
    pub group: SymmetryGroup,
    /// RMS of `|x_i - x_j| - D_ij` over all pairs.
    pub residual_rmsd: f64,
    /// True when every node was placed in the seed plane.
    pub planar: bool,
}

impl ReconstructionResult {
    pub fn to_cloud(&self, labels: Option<&[u32]>) -> Result<PointCloud> {
        match labels {
            Some(l) => PointCloud::with_labels(self.coords.clone(), l.to_vec()),
            None => PointCloud::new(self.coords.clone()),
        }
    }
}

/// `s(a, b) = sign((c2 - c1) x (p_a - c1) . (p_b - c1))`, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientationSigns {
    pub n: usize,
    pub signs: Vec<i8>,
}

impl OrientationSigns {
    pub fn get(&self, a: usize, b: usize) -> i8 {
        self.signs[a * self.n + b]
    }

    /// Signs of the mirror image.
    pub fn negated(&self) -> Self {
        OrientationSigns { n: self.n, signs: self.signs.iter().map(|s| -s).collect() }
    }
}

pub fn orientation_signs(p: &PointCloud, c1: Vec3, c2: Vec3) -> OrientationSigns {
    let n = p.len();
    let axis = c2 - c1;
    let rel: Vec<Vec3> = p.coords().iter().map(|x| x - c1).collect();
    let r = rel.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let band = ORIENTATION_ZERO_BAND * axis.norm() * r * r;
    let mut signs = vec![0i8; n * n];
    for a in 0..n {
        let w = axis.cross(&rel[a]);
        for b in 0..n {
            let t = w.dot(&rel[b]);
            signs[a * n + b] = if t.abs() <= band { 0 } else if t > 0.0 { 1 } else { -1 };
        }
    }
    OrientationSigns { n, signs }
}

pub fn triangular_encoding(p: &PointCloud, c1: Vec3, c2: Vec3) -> Result<TriangularEncoding> {
    let gap = (c1 - c2).norm();
    let scale = p.coords().iter().map(|x| (x - c1).norm()).fold(1.0, f64::max);
    if !(gap > 1e-9 * scale) {
        return Err(Error::CoincidentAnchors { gap });
    }
    Ok(TriangularEncoding {
        anchors: [c1, c2],
        anchor_gap: gap,
        per_node: p.coords().iter().map(|x| ((x - c1).norm(), (x - c2).norm())).collect(),
    })
}

/// RMS distance of the nodes to their best-fit plane.
pub fn best_fit_plane_residual(p: &PointCloud) -> f64 {
    let c = centroid(p);
    let mut s = Matrix3::zeros();
    for x in p.coords() {
        let d = x - c;
        s += d * d.transpose();
    }
    // project onto the normal rather than taking sqrt of the eigenvalue, which
    // would inflate rounding noise to ~1e-8 on exactly planar input
    let eig = s.symmetric_eigen();
    let normal = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
    let ss: f64 = p.coords().iter().map(|x| (x - c).dot(&normal).powi(2)).sum();
    (ss / p.len() as f64).sqrt()
}

/// Axis coordinates `(x_i, rho_i)` of every node.
fn axis_coordinates(enc: &TriangularEncoding) -> Vec<(f64, f64)> {
    let g = enc.anchor_gap;
    enc.per_node
        .iter()
        .map(|&(d1, d2)| {
            let x = (d1 * d1 - d2 * d2 + g * g) / (2.0 * g);
            (x, (d1 * d1 - x * x).max(0.0).sqrt())
        })
        .collect()
}

fn frame_scale(enc: &TriangularEncoding, d: &DMatrix<f64>) -> f64 {
    let dmax = d.iter().copied().fold(0.0, f64::max);
    enc.per_node.iter().map(|p| p.0).fold(enc.anchor_gap.max(dmax), f64::max)
}

enum FirstSign<'a> {
    Positive,
    Oriented(&'a OrientationSigns),
}

/// Places every node given a seed. Returns coordinates (before the distance
/// check) and whether all nodes fell in the seed plane.
fn place(
    enc: &TriangularEncoding,
    d: &DMatrix<f64>,
    axis: &[(f64, f64)],
    seed: usize,
    first: FirstSign<'_>,
) -> Result<(Vec<Vec3>, bool)> {
    let n = axis.len();
    let tol = PLACEMENT_TOL * frame_scale(enc, d);
    let (xa, ra) = axis[seed];
    if ra <= tol {
        return Ok((axis.iter().map(|&(x, _)| Vec3::new(x, 0.0, 0.0)).collect(), true));
    }
    let mut coords = vec![Vec3::zeros(); n];
    let mut abs_z = vec![0.0; n];
    for b in 0..n {
        let (xb, rb) = axis[b];
        if b == seed {
            coords[b] = Vec3::new(xa, ra, 0.0);
            continue;
        }
        let y = ((ra * ra + rb * rb + (xa - xb).powi(2) - d[(seed, b)].powi(2)) / (2.0 * ra)).clamp(-rb, rb);
        abs_z[b] = (rb * rb - y * y).max(0.0).sqrt();
        coords[b] = Vec3::new(xb, y, 0.0);
    }
    let mut off: Vec<usize> = (0..n).filter(|&b| abs_z[b] > tol).collect();
    if off.is_empty() {
        return Ok((coords, true));
    }
    off.sort_by(|&a, &b| axis[b].1.partial_cmp(&axis[a].1).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let (start, sign) = match first {
        FirstSign::Positive => (off[0], 1.0),
        FirstSign::Oriented(s) => match off.iter().find(|&&c| s.get(seed, c) != 0) {
            Some(&c) => (c, s.get(seed, c) as f64),
            None => return Err(Error::MissingOrientation),
        },
    };
    coords[start].z = sign * abs_z[start];
    let mut placed = vec![start];
    for &b in off.iter().filter(|&&b| b != start) {
        let s = best_sign(&coords, abs_z[b], b, &placed, d);
        coords[b].z = s * abs_z[b];
        placed.push(b);
    }
    Ok((coords, false))
}

fn best_sign(coords: &[Vec3], z: f64, b: usize, placed: &[usize], d: &DMatrix<f64>) -> f64 {
    let cost = |s: f64| {
        let pb = Vec3::new(coords[b].x, coords[b].y, s * z);
        placed.iter().map(|&c| ((pb - coords[c]).norm() - d[(b, c)]).powi(2)).sum::<f64>()
    };
    if cost(-1.0) < cost(1.0) {
        -1.0
    } else {
        1.0
    }
}

fn check(enc: &TriangularEncoding, d: &DMatrix<f64>, coords: &[Vec3]) -> Result<f64> {
    let n = coords.len();
    let g = enc.anchor_gap;
    let c2 = Vec3::new(g, 0.0, 0.0);
    let mut max_dev = 0.0f64;
    let mut sq = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        let (d1, d2) = enc.per_node[i];
        max_dev = max_dev.max((coords[i].norm() - d1).abs()).max(((coords[i] - c2).norm() - d2).abs());
        for j in (i + 1)..n {
            let r = (coords[i] - coords[j]).norm() - d[(i, j)];
            max_dev = max_dev.max(r.abs());
            sq += r * r;
            pairs += 1;
        }
    }
    if max_dev > RECONSTRUCTION_TOL * frame_scale(enc, d).max(1.0) {
        return Err(Error::InconsistentDistances { max_deviation: max_dev });
    }
    Ok(if pairs == 0 { 0.0 } else { (sq / pairs as f64).sqrt() })
}

fn validate_inputs(enc: &TriangularEncoding, d: &DMatrix<f64>) -> Result<()> {
    let n = enc.per_node.len();
    if d.nrows() != n || d.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "distance matrix is {}x{} for {n} nodes",
            d.nrows(),
            d.ncols()
        )));
    }
    if !(enc.anchor_gap > 0.0) {
        return Err(Error::CoincidentAnchors { gap: enc.anchor_gap });
    }
    Ok(())
}

fn seed_of(axis: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, a) in axis.iter().enumerate() {
        if a.1 > axis[best].1 {
            best = i;
        }
    }
    best
}

fn run(enc: &TriangularEncoding, d: &DMatrix<f64>, first: FirstSign<'_>, group: SymmetryGroup) -> Result<ReconstructionResult> {
    validate_inputs(enc, d)?;
    let axis = axis_coordinates(enc);
    let (coords, planar) = place(enc, d, &axis, seed_of(&axis), first)?;
    let residual_rmsd = check(enc, d, &coords)?;
    Ok(ReconstructionResult { coords, group, residual_rmsd, planar })
}

/// Coordinates congruent to the source cloud up to E(3).
pub fn reconstruct_e3(enc: &TriangularEncoding, d: &DMatrix<f64>) -> Result<ReconstructionResult> {
    run(enc, d, FirstSign::Positive, SymmetryGroup::E3)
}

/// Coordinates congruent to the source cloud up to SE(3): the handedness is
/// taken from `signs` (computed with the same anchors).
pub fn reconstruct_se3(
    enc: &TriangularEncoding,
    d: &DMatrix<f64>,
    signs: &OrientationSigns,
) -> Result<ReconstructionResult> {
    if signs.n != enc.per_node.len() {
        return Err(Error::InvalidArgument("orientation signs do not match the encoding".into()));
    }
    run(enc, d, FirstSign::Oriented(signs), SymmetryGroup::SE3)
}

/// Centroid and the centroid of the first centroid-distance class (by color
/// id) lying more than `eps` away from it. `None` when no such class exists.
pub fn select_anchors(p: &PointCloud, q: Quantizer, eps: f64) -> Option<(Vec3, Vec3)> {
    let c1 = centroid(p);
    c_encode(p, q).classes().values().find_map(|members| {
        let cc = members.iter().map(|&i| p.point(i)).sum::<Vec3>() / members.len() as f64;
        ((cc - c1).norm() > eps).then_some((c1, cc))
    })
}

/// Node list in the anchor frame, sorted by (label, x, y, z) on a coarse grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalForm {
    pub labels: Option<Vec<u32>>,
    pub coords: Vec<Vec3>,
}

/// Grid used to order canonical coordinates.
const CANONICAL_DECIMALS: u32 = 6;

impl CanonicalForm {
    fn keys(&self, q: Quantizer) -> Vec<(Option<u32>, i64, i64, i64)> {
        self.coords
            .iter()
            .enumerate()
            .map(|(i, x)| (self.labels.as_ref().map(|l| l[i]), q.key(x.x), q.key(x.y), q.key(x.z)))
            .collect()
    }

    fn sorted(labels: Option<&[u32]>, coords: Vec<Vec3>, q: Quantizer) -> Self {
        let mut idx: Vec<usize> = (0..coords.len()).collect();
        let key = |i: usize| (labels.map(|l| l[i]), q.key(coords[i].x), q.key(coords[i].y), q.key(coords[i].z));
        idx.sort_by_key(|&i| key(i));
        CanonicalForm {
            labels: labels.map(|l| idx.iter().map(|&i| l[i]).collect()),
            coords: idx.iter().map(|&i| coords[i]).collect(),
        }
    }

    /// Same labels in the same order and coordinates within `tol`.
    pub fn approx_eq(&self, other: &CanonicalForm, tol: f64) -> bool {
        self.labels == other.labels
            && self.coords.len() == other.coords.len()
            && self.coords.iter().zip(&other.coords).all(|(a, b)| (a - b).amax() <= tol)
    }
}

/// A complete invariant for clouds that are asymmetric under the
/// centroid-distance encoding; `None` for symmetric ones.
///
/// The frame is fixed by the two anchors from [`select_anchors`]; rotation
/// about the anchor axis is fixed by the seed, and the remaining mirror
/// ambiguity (and any seed ties) by taking the least sorted node list.
pub fn complete_invariant(p: &PointCloud, q: Quantizer, eps: f64) -> Result<Option<CanonicalForm>> {
    let Some((c1, c2)) = select_anchors(p, q, eps) else {
        return Ok(None);
    };
    let enc = triangular_encoding(p, c1, c2)?;
    let d = distance_matrix(p);
    validate_inputs(&enc, &d)?;
    let axis = axis_coordinates(&enc);
    let best_rho = axis[seed_of(&axis)].1;
    let tie = PLACEMENT_TOL * frame_scale(&enc, &d);
    let grid = Quantizer::new(CANONICAL_DECIMALS).expect("valid decimals");
    let mut best: Option<(Vec<(Option<u32>, i64, i64, i64)>, CanonicalForm)> = None;
    for seed in (0..p.len()).filter(|&i| best_rho - axis[i].1 <= tie) {
        let (coords, _) = place(&enc, &d, &axis, seed, FirstSign::Positive)?;
        check(&enc, &d, &coords)?;
        let mirror: Vec<Vec3> = coords.iter().map(|x| Vec3::new(x.x, x.y, -x.z)).collect();
        for cand in [coords, mirror] {
            let form = CanonicalForm::sorted(p.labels(), cand, grid);
            let keys = form.keys(grid);
            if best.as_ref().is_none_or(|(k, _)| keys < *k) {
                best = Some((keys, form));
            }
        }
    }
    Ok(best.map(|(_, f)| f))
}
