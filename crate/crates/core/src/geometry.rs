//! Point clouds and the exact-geometry primitives shared by every engine.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Default search budget (visited partial matchings) of the congruence oracle.
pub const DEFAULT_ALIGN_BUDGET: u64 = 20_000_000;

/// Default RMSD tolerance for congruence, in length units of a unit-rescaled cloud.
pub const DEFAULT_ALIGN_TOL: f64 = 1e-6;

/// An ordered set of `n >= 2` points in 3-space with optional integer labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCloud", into = "RawCloud")]
pub struct PointCloud {
    coords: Vec<Vec3>,
    labels: Option<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCloud {
    coords: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<u32>>,
}

impl TryFrom<RawCloud> for PointCloud {
    type Error = Error;

    fn try_from(raw: RawCloud) -> Result<Self> {
        let coords = raw.coords.iter().map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        PointCloud::build(coords, raw.labels)
    }
}

impl From<PointCloud> for RawCloud {
    fn from(p: PointCloud) -> Self {
        RawCloud {
            coords: p.coords.iter().map(|c| [c.x, c.y, c.z]).collect(),
            labels: p.labels,
        }
    }
}

impl PointCloud {
    pub fn new(coords: Vec<Vec3>) -> Result<Self> {
        Self::build(coords, None)
    }

    pub fn with_labels(coords: Vec<Vec3>, labels: Vec<u32>) -> Result<Self> {
        Self::build(coords, Some(labels))
    }

    pub fn from_arrays(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
    }

    fn build(coords: Vec<Vec3>, labels: Option<Vec<u32>>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidCloud(format!(
                "need at least 2 points, got {}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidCloud(format!("point {i} has a non-finite coordinate")));
        }
        if let Some(l) = &labels {
            if l.len() != coords.len() {
                return Err(Error::InvalidCloud(format!(
                    "{} labels for {} points",
                    l.len(),
                    coords.len()
                )));
            }
        }
        Ok(PointCloud { coords, labels })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    /// Always false: a valid cloud has at least two points.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Vec3] {
        &self.coords
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<u32> {
        self.labels.as_ref().map(|l| l[i])
    }

    pub fn point(&self, i: usize) -> Vec3 {
        self.coords[i]
    }

    /// Reorders nodes so that node `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> PointCloud {
        assert_eq!(perm.len(), self.len(), "permutation length mismatch");
        PointCloud {
            coords: perm.iter().map(|&i| self.coords[i]).collect(),
            labels: self.labels.as_ref().map(|l| perm.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Applies `p -> R p + t`.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vec3) -> PointCloud {
        PointCloud {
            coords: self.coords.iter().map(|p| rotation * p + translation).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Reflection through the yz-plane.
    pub fn mirrored(&self) -> PointCloud {
        PointCloud {
            coords: self.coords.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> PointCloud {
        PointCloud {
            coords: self.coords.iter().map(|p| p * factor).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Sub-cloud on the given node indices (in the given order).
    pub fn subset(&self, nodes: &[usize]) -> Result<PointCloud> {
        Self::build(
            nodes.iter().map(|&i| self.coords[i]).collect(),
            self.labels.as_ref().map(|l| nodes.iter().map(|&i| l[i]).collect()),
        )
    }

    pub fn without_labels(&self) -> PointCloud {
        PointCloud { coords: self.coords.clone(), labels: None }
    }

    /// Largest distance from any node to the centroid.
    pub fn radius(&self) -> f64 {
        let c = centroid(self);
        self.coords.iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
    }
}

/// Rounding of real-valued features to a fixed number of decimal places.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Quantizer {
    decimals: u32,
}

impl Quantizer {
    pub const MAX_DECIMALS: u32 = 12;

    pub fn new(decimals: u32) -> Result<Self> {
        if decimals > Self::MAX_DECIMALS {
            return Err(Error::InvalidConfig(format!(
                "quantizer decimals {decimals} exceeds {}",
                Self::MAX_DECIMALS
            )));
        }
        Ok(Quantizer { decimals })
    }

    pub fn decimals(&self) -> u32 {
        self.decimals
    }

    fn scale(&self) -> f64 {
        10f64.powi(self.decimals as i32)
    }

    /// Integer key of the rounded value: `round(x * 10^decimals)`, half away
    /// from zero. Saturates for magnitudes beyond `i64`.
    pub fn key(&self, x: f64) -> i64 {
        (x * self.scale()).round() as i64
    }

    pub fn quantize(&self, x: f64) -> f64 {
        (x * self.scale()).round() / self.scale()
    }
}

impl Default for Quantizer {
    fn default() -> Self {
        Quantizer { decimals: 9 }
    }
}

impl TryFrom<u32> for Quantizer {
    type Error = Error;
    fn try_from(d: u32) -> Result<Self> {
        Quantizer::new(d)
    }
}

impl From<Quantizer> for u32 {
    fn from(q: Quantizer) -> u32 {
        q.decimals
    }
}

pub fn quantize(x: f64, q: Quantizer) -> f64 {
    q.quantize(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryGroup {
    /// Rotations, reflections and translations.
    E3,
    /// Proper rotations and translations only.
    SE3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub rmsd: f64,
    /// Node `i` of the first cloud corresponds to node `permutation[i]` of the second.
    pub permutation: Vec<usize>,
    pub used_reflection: bool,
    /// Orthogonal matrix mapping centered first-cloud points onto centered second-cloud points.
    pub rotation: Matrix3<f64>,
}

pub fn distance_matrix(p: &PointCloud) -> DMatrix<f64> {
    let n = p.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (p.coords[i] - p.coords[j]).norm() })
}

pub fn centroid(p: &PointCloud) -> Vec3 {
    let sum: Vec3 = p.coords.iter().sum();
    sum / p.len() as f64
}

/// Translates the centroid to the origin and scales so the farthest node is at distance 1.
pub fn rescale_unit(p: &PointCloud) -> Result<PointCloud> {
    let c = centroid(p);
    let radius = p.coords.iter().map(|x| (x - c).norm()).fold(0.0, f64::max);
    let magnitude = p.coords.iter().map(|x| x.amax()).fold(0.0, f64::max);
    if radius <= 1e-12 * magnitude.max(f64::MIN_POSITIVE) || radius == 0.0 {
        return Err(Error::DegenerateCloud);
    }
    Ok(PointCloud {
        coords: p.coords.iter().map(|x| (x - c) / radius).collect(),
        labels: p.labels.clone(),
    })
}

/// Optimal orthogonal map `R` minimizing `sum |R a_i - b_i|^2` (Kabsch / orthogonal Procrustes).
/// Restricted to proper rotations for [`SymmetryGroup::SE3`].
pub(crate) fn procrustes(a: &[Vec3], b: &[Vec3], group: SymmetryGroup) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for (x, y) in a.iter().zip(b) {
        h += x * y.transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let v = svd.v_t.expect("svd v_t").transpose();
    let mut r = v * u.transpose();
    if group == SymmetryGroup::SE3 && r.determinant() < 0.0 {
        // singular values are sorted descending; flip the weakest direction
        let mut v2 = v;
        v2.column_mut(2).neg_mut();
        r = v2 * u.transpose();
    }
    r
}

fn rmsd_under(a: &[Vec3], b: &[Vec3], r: &Matrix3<f64>) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (r * x - y).norm_squared()).sum();
    (sq / a.len() as f64).sqrt()
}

/// Backtracking search over label- and distance-compatible node bijections.
struct Matcher<'a> {
    a: Vec<Vec3>,
    b: Vec<Vec3>,
    la: Vec<Option<u32>>,
    lb: Vec<Option<u32>>,
    da: &'a DMatrix<f64>,
    db: &'a DMatrix<f64>,
    candidates: Vec<Vec<usize>>,
    order: Vec<usize>,
    slack: f64,
    group: SymmetryGroup,
    tol: f64,
    budget: u64,
    visited: u64,
}

impl<'a> Matcher<'a> {
    fn new(
        p1: &PointCloud,
        p2: &PointCloud,
        da: &'a DMatrix<f64>,
        db: &'a DMatrix<f64>,
        group: SymmetryGroup,
        tol: f64,
        budget: u64,
    ) -> Self {
        let n = p1.len();
        let c1 = centroid(p1);
        let c2 = centroid(p2);
        let a: Vec<Vec3> = p1.coords.iter().map(|x| x - c1).collect();
        let b: Vec<Vec3> = p2.coords.iter().map(|x| x - c2).collect();
        let la: Vec<Option<u32>> = (0..n).map(|i| p1.label(i)).collect();
        let lb: Vec<Option<u32>> = (0..n).map(|i| p2.label(i)).collect();
        // rmsd <= tol bounds each point deviation by tol*sqrt(n), each distance deviation by twice that
        let slack = 2.0 * tol * (n as f64).sqrt() + 1e-9;
        let candidates: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| la[i] == lb[j] && (a[i].norm() - b[j].norm()).abs() <= slack)
                    .collect()
            })
            .collect();
        let order = Self::search_order(&a, &candidates);
        Matcher {
            a,
            b,
            la,
            lb,
            da,
            db,
            candidates,
            order,
            slack,
            group,
            tol,
            budget,
            visited: 0,
        }
    }

    /// Most constrained node first, then nodes spanning a line, a plane and a
    /// volume, so distance checks force the remaining assignments early.
    fn search_order(a: &[Vec3], candidates: &[Vec<usize>]) -> Vec<usize> {
        let n = a.len();
        let first = (0..n)
            .min_by(|&i, &j| {
                candidates[i]
                    .len()
                    .cmp(&candidates[j].len())
                    .then(a[j].norm().total_cmp(&a[i].norm()))
                    .then(i.cmp(&j))
            })
            .unwrap();
        let mut order = vec![first];
        let mut used = vec![false; n];
        used[first] = true;
        for stage in 0..3 {
            let score = |k: usize| -> f64 {
                let p0 = a[order[0]];
                match stage {
                    0 => (a[k] - p0).norm(),
                    1 => (a[k] - p0).cross(&(a[order[1]] - p0)).norm(),
                    _ => (a[k] - p0)
                        .dot(&(a[order[1]] - p0).cross(&(a[order[2]] - p0)))
                        .abs(),
                }
            };
            let next = (0..n)
                .filter(|&k| !used[k])
                .max_by(|&i, &j| score(i).total_cmp(&score(j)).then(j.cmp(&i)));
            match next {
                Some(k) => {
                    used[k] = true;
                    order.push(k);
                }
                None => break,
            }
        }
        let mut rest: Vec<usize> = (0..n).filter(|&k| !used[k]).collect();
        rest.sort_by_key(|&k| (candidates[k].len(), k));
        order.extend(rest);
        order
    }

    /// Calls `on_match` for every congruence found; stops when it returns false.
    fn run(&mut self, on_match: &mut dyn FnMut(AlignmentResult) -> bool) -> Result<()> {
        let n = self.a.len();
        let mut assign = vec![usize::MAX; n];
        let mut used = vec![false; n];
        self.dfs(0, &mut assign, &mut used, on_match).map(|_| ())
    }

    fn dfs(
        &mut self,
        depth: usize,
        assign: &mut [usize],
        used: &mut [bool],
        on_match: &mut dyn FnMut(AlignmentResult) -> bool,
    ) -> Result<bool> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::TooLarge { budget: self.budget });
        }
        let n = self.a.len();
        if depth == n {
            let b_perm: Vec<Vec3> = assign.iter().map(|&j| self.b[j]).collect();
            let r = procrustes(&self.a, &b_perm, self.group);
            let rmsd = rmsd_under(&self.a, &b_perm, &r);
            if rmsd <= self.tol {
                let result = AlignmentResult {
                    rmsd,
                    permutation: assign.to_vec(),
                    used_reflection: r.determinant() < 0.0,
                    rotation: r,
                };
                return Ok(on_match(result));
            }
            return Ok(true);
        }
        let i = self.order[depth];
        for ci in 0..self.candidates[i].len() {
            let j = self.candidates[i][ci];
            if used[j] {
                continue;
            }
            let consistent = self.order[..depth].iter().all(|&k| {
                (self.da[(i, k)] - self.db[(j, assign[k])]).abs() <= self.slack
            });
            if !consistent {
                continue;
            }
            debug_assert_eq!(self.la[i], self.lb[j]);
            assign[i] = j;
            used[j] = true;
            let keep_going = self.dfs(depth + 1, assign, used, on_match)?;
            used[j] = false;
            assign[i] = usize::MAX;
            if !keep_going {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Congruence oracle: returns an alignment with `rmsd <= tol` iff the clouds are
/// equal up to a label-preserving node permutation and a rigid motion of `group`.
pub fn align_isomorphic(
    p1: &PointCloud,
    p2: &PointCloud,
    group: SymmetryGroup,
    tol: f64,
) -> Result<Option<AlignmentResult>> {
    align_isomorphic_with_budget(p1, p2, group, tol, DEFAULT_ALIGN_BUDGET)
}

pub fn align_isomorphic_with_budget(
    p1: &PointCloud,
    p2: &PointCloud,
    group: SymmetryGroup,
    tol: f64,
    budget: u64,
) -> Result<Option<AlignmentResult>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if p1.len() != p2.len() || p1.labels.is_some() != p2.labels.is_some() {
        return Ok(None);
    }
    let da = distance_matrix(p1);
    let db = distance_matrix(p2);
    let mut matcher = Matcher::new(p1, p2, &da, &db, group, tol, budget);
    if matcher.candidates.iter().any(|c| c.is_empty()) {
        return Ok(None);
    }
    let mut found = None;
    matcher.run(&mut |m| {
        found = Some(m);
        false
    })?;
    Ok(found)
}

/// All node permutations realized by self-congruences of `p` under `group`.
pub fn isometry_automorphisms(
    p: &PointCloud,
    group: SymmetryGroup,
    tol: f64,
    budget: u64,
) -> Result<Vec<Vec<usize>>> {
    let d = distance_matrix(p);
    let mut matcher = Matcher::new(p, p, &d, &d, group, tol, budget);
    let mut perms = Vec::new();
    matcher.run(&mut |m| {
        perms.push(m.permutation);
        true
    })?;
    perms.sort();
    Ok(perms)
}
