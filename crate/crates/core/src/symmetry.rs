//! Center-coincidence symmetry tests, weighted center distance formulas and
//! dataset scans.
//!
//! A cloud is symmetric under an encoding when every class of that encoding
//! has its centroid at the global centroid (within `eps`). Any mass-weighted
//! center built from the encoding then collapses to one point, so no second
//! anchor can be derived from it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid, rescale_unit, PointCloud, Quantizer, Vec3};
use crate::hash::ColorId;
use crate::refine::{c_encode, disgnn_refine, Coloring, RefineConfig};

/// Radicands down to `-NEGATIVE_CLAMP * max(1, max d^2)` are rounding noise and clamp to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

pub const DEFAULT_SCAN_DECIMALS: u32 = 2;
pub const DEFAULT_EPS_GRID: [f64; 6] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

/// Per-color weights; colors absent from `weights` get `default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassFunction {
    pub weights: BTreeMap<ColorId, f64>,
    pub default: f64,
}

impl MassFunction {
    pub fn uniform() -> Self {
        MassFunction { weights: BTreeMap::new(), default: 1.0 }
    }

    /// Weight 1 on one color class, 0 elsewhere.
    pub fn indicator(color: ColorId) -> Self {
        MassFunction { weights: BTreeMap::from([(color, 1.0)]), default: 0.0 }
    }

    pub fn mass(&self, c: ColorId) -> f64 {
        self.weights.get(&c).copied().unwrap_or(self.default)
    }

    /// The weighted center `sum m_i p_i / M`.
    pub fn center(&self, p: &PointCloud, coloring: &Coloring) -> Result<Vec3> {
        let masses = self.node_masses(coloring);
        let total = total_mass(&masses)?;
        Ok(p.coords().iter().zip(&masses).map(|(x, m)| x * *m).sum::<Vec3>() / total)
    }

    fn node_masses(&self, coloring: &Coloring) -> Vec<f64> {
        coloring.colors.iter().map(|&c| self.mass(c)).collect()
    }
}

fn total_mass(masses: &[f64]) -> Result<f64> {
    let total: f64 = masses.iter().sum();
    let scale: f64 = masses.iter().map(|m| m.abs()).sum();
    if scale == 0.0 || total.abs() <= 1e-12 * scale {
        Err(Error::ZeroMass)
    } else {
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub c_symmetric: bool,
    pub d_symmetric: bool,
    pub k_classes_c: usize,
    pub k_classes_d: usize,
    pub c_deviation: f64,
    pub d_deviation: f64,
    pub max_center_deviation: f64,
    pub decimals: u32,
    pub eps: f64,
}

/// Largest distance from a class centroid to the global centroid.
fn class_deviation(p: &PointCloud, coloring: &Coloring) -> f64 {
    let c = centroid(p);
    coloring
        .classes()
        .values()
        .map(|members| {
            let cc = members.iter().map(|&i| p.point(i)).sum::<Vec3>() / members.len() as f64;
            (cc - c).norm()
        })
        .fold(0.0, f64::max)
}

/// True when all class centroids lie within `eps` of the global centroid.
/// The deviation is returned either way.
///
/// The global centroid is the size-weighted mean of the class centroids, so a
/// finer coloring never reports a smaller deviation than a coarser one.
pub fn a_symmetry_test(p: &PointCloud, coloring: &Coloring, eps: f64) -> (bool, f64) {
    let dev = class_deviation(p, coloring);
    (dev <= eps, dev)
}

/// `|A^set(P)| = 1` under the given coloring.
pub fn count_centers_indicator(p: &PointCloud, coloring: &Coloring, eps: f64) -> bool {
    a_symmetry_test(p, coloring, eps).0
}

struct Deviations {
    c: f64,
    d: f64,
    kc: usize,
    kd: usize,
}

fn deviations(p: &PointCloud, q: Quantizer) -> Deviations {
    let c = c_encode(p, q);
    let cfg = RefineConfig { quantizer: q, ..Default::default() };
    let (d, _) = disgnn_refine(p, &Coloring::from_labels(p), &cfg)
        .expect("distance refinement stabilizes within n rounds");
    // quantization can in principle break the exact inclusion of the two partitions
    let d = d.meet(&c);
    Deviations {
        c: class_deviation(p, &c),
        d: class_deviation(p, &d),
        kc: c.num_classes(),
        kd: d.num_classes(),
    }
}

/// Tests the centroid-distance encoding first, then the stable distance
/// refinement partition.
pub fn classify_symmetry(p: &PointCloud, q: Quantizer, eps: f64) -> SymmetryReport {
    let dev = deviations(p, q);
    let c_symmetric = dev.c <= eps;
    SymmetryReport {
        c_symmetric,
        d_symmetric: c_symmetric && dev.d <= eps,
        k_classes_c: dev.kc,
        k_classes_d: dev.kd,
        c_deviation: dev.c,
        d_deviation: dev.d,
        max_center_deviation: dev.c.max(dev.d),
        decimals: q.decimals(),
        eps,
    }
}

fn clamp_radicand(v: f64, scale: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -NEGATIVE_CLAMP * scale {
        Ok(0.0)
    } else {
        Err(Error::NegativeRadicand { value: v })
    }
}

fn squared_distances(p: &PointCloud) -> (Vec<f64>, f64) {
    let n = p.len();
    let mut d2 = vec![0.0; n * n];
    let mut max = 1.0f64;
    for i in 0..n {
        for j in 0..n {
            let v = (p.point(i) - p.point(j)).norm_squared();
            d2[i * n + j] = v;
            max = max.max(v);
        }
    }
    (d2, max)
}

/// Distance of every node to the `m`-weighted center, computed from pairwise
/// distances only:
/// `f_i = sum_j m_j d_ij^2`, `|p_i - c|^2 = (f_i - sum_j m_j f_j / 2M) / M`.
pub fn node_center_distance(p: &PointCloud, coloring: &Coloring, m: &MassFunction) -> Result<Vec<f64>> {
    if coloring.len() != p.len() {
        return Err(Error::InvalidArgument("coloring does not cover the cloud".into()));
    }
    let n = p.len();
    let masses = m.node_masses(coloring);
    let total = total_mass(&masses)?;
    let (d2, scale) = squared_distances(p);
    let f: Vec<f64> = (0..n).map(|i| (0..n).map(|j| masses[j] * d2[i * n + j]).sum()).collect();
    let s: f64 = masses.iter().zip(&f).map(|(m, f)| m * f).sum();
    f.iter()
        .map(|fi| clamp_radicand((fi - s / (2.0 * total)) / total, scale).map(f64::sqrt))
        .collect()
}

/// Distance between two weighted centers, from node-center distances:
/// `sum_i m1_i (|p_i - c1|^2 - |p_i - c2|^2) / M1 = -|c1 - c2|^2`.
pub fn center_center_distance(
    p: &PointCloud,
    coloring: &Coloring,
    m1: &MassFunction,
    m2: &MassFunction,
) -> Result<f64> {
    let a = node_center_distance(p, coloring, m1)?;
    let b = node_center_distance(p, coloring, m2)?;
    let masses = m1.node_masses(coloring);
    let total = total_mass(&masses)?;
    let (_, scale) = squared_distances(p);
    let v: f64 = masses
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(m, (x, y))| m * (x * x - y * y))
        .sum::<f64>()
        / total;
    clamp_radicand(-v, scale).map(f64::sqrt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub eps: f64,
    pub proportion_c: f64,
    pub proportion_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub evaluated: usize,
    pub skipped_degenerate: usize,
    pub decimals: u32,
}

impl ScanTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,proportion_c,proportion_d\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.eps, r.proportion_c, r.proportion_d));
        }
        out
    }
}

/// Fraction of clouds that are symmetric at each tolerance. Clouds are
/// rescaled to unit radius first; degenerate clouds are skipped and counted.
pub fn symmetry_scan(dataset: &[PointCloud], q: Quantizer, eps_grid: &[f64]) -> Result<ScanTable> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if let Some(e) = eps_grid.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {e}")));
    }
    let devs: Vec<Option<(f64, f64)>> = dataset
        .par_iter()
        .map(|p| match rescale_unit(p) {
            Ok(p) => {
                let d = deviations(&p, q);
                Some((d.c, d.d))
            }
            Err(_) => None,
        })
        .collect();
    let ok: Vec<(f64, f64)> = devs.iter().flatten().copied().collect();
    let evaluated = ok.len();
    let frac = |k: usize| if evaluated == 0 { 0.0 } else { k as f64 / evaluated as f64 };
    let rows = eps_grid
        .iter()
        .map(|&eps| {
            let c = ok.iter().filter(|(c, _)| *c <= eps).count();
            let d = ok.iter().filter(|(c, d)| *c <= eps && *d <= eps).count();
            ScanRow { eps, proportion_c: frac(c), proportion_d: frac(d) }
        })
        .collect();
    Ok(ScanTable {
        rows,
        evaluated,
        skipped_degenerate: dataset.len() - evaluated,
        decimals: q.decimals(),
    })
}

/// Five points on one sphere about their centroid (so the centroid-distance
/// encoding is a single class) whose distance refinement still finds a class
/// with an off-center centroid: an equilateral triangle of circumradius 1 at
/// height `h = 0.4` and two points at `(+-u, 0, -3h/2)` with `u^2 = 1 - 5h^2/4`.
pub fn c_symmetric_d_asymmetric_witness() -> PointCloud {
    let h = 0.4f64;
    let u = (1.0 - 1.25 * h * h).sqrt();
    let mut coords: Vec<Vec3> = (0..3)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            Vec3::new(t.cos(), t.sin(), h)
        })
        .collect();
    coords.push(Vec3::new(u, 0.0, -1.5 * h));
    coords.push(Vec3::new(-u, 0.0, -1.5 * h));
    PointCloud::new(coords).expect("five points")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> (PointCloud, Coloring) {
        let p = PointCloud::from_arrays(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let c = Coloring { colors: vec![ColorId(1), ColorId(2), ColorId(1), ColorId(2)], round: 0 };
        (p, c)
    }

    #[test]
    fn single_class_is_symmetric() {
        let p = PointCloud::from_arrays(&[[0.0; 3], [3.0, 1.0, 0.0], [2.0, -5.0, 1.0]]).unwrap();
        let (ok, dev) = a_symmetry_test(&p, &Coloring::uniform(3), 1e-9);
        assert!(ok);
        assert!(dev < 1e-15);
    }

    #[test]
    fn bicolored_square_is_symmetric() {
        let (p, c) = square();
        let (ok, dev) = a_symmetry_test(&p, &c, 1e-12);
        assert!(ok && dev < 1e-15);
        assert!(count_centers_indicator(&p, &c, 1e-12));
    }

    #[test]
    fn bicolored_segment_is_not() {
        let p = PointCloud::from_arrays(&[[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let c = Coloring { colors: vec![ColorId(1), ColorId(2)], round: 0 };
        let (ok, dev) = a_symmetry_test(&p, &c, 1e-6);
        assert!(!ok);
        assert!((dev - 1.0).abs() < 1e-15);
        assert!(!count_centers_indicator(&p, &c, 1e-6));
    }

    #[test]
    fn witness_is_c_but_not_d_symmetric() {
        let p = c_symmetric_d_asymmetric_witness();
        assert!(centroid(&p).norm() < 1e-15);
        let r = classify_symmetry(&p, Quantizer::default(), 1e-6);
        assert_eq!(r.k_classes_c, 1);
        assert!(r.c_symmetric);
        assert!(!r.d_symmetric);
        assert!(r.k_classes_d >= 2);
    }

    #[test]
    fn equilateral_is_d_symmetric() {
        let h = 3f64.sqrt() / 2.0;
        let p = PointCloud::from_arrays(&[[0.0; 3], [1.0, 0.0, 0.0], [0.5, h, 0.0]]).unwrap();
        let r = classify_symmetry(&p, Quantizer::default(), 1e-6);
        assert!(r.c_symmetric && r.d_symmetric);
    }

    #[test]
    fn coincident_points_have_zero_center_distance() {
        let p = PointCloud::from_arrays(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]).unwrap();
        let d = node_center_distance(&p, &Coloring::uniform(2), &MassFunction::uniform()).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_mass_rejected() {
        let (p, c) = square();
        let m = MassFunction { weights: BTreeMap::from([(ColorId(1), 1.0), (ColorId(2), -1.0)]), default: 0.0 };
        assert_eq!(node_center_distance(&p, &c, &m).unwrap_err(), Error::ZeroMass);
        let m = MassFunction::indicator(ColorId(9));
        assert_eq!(node_center_distance(&p, &c, &m).unwrap_err(), Error::ZeroMass);
    }

    #[test]
    fn indicator_centers_of_square_coincide() {
        let (p, c) = square();
        let d = center_center_distance(&p, &c, &MassFunction::indicator(ColorId(1)), &MassFunction::indicator(ColorId(2)))
            .unwrap();
        assert!(d < 1e-7);
    }

    #[test]
    fn scan_rejects_empty_and_counts_degenerate() {
        assert!(symmetry_scan(&[], Quantizer::default(), &[1e-3]).is_err());
        let deg = PointCloud::from_arrays(&[[1.0; 3], [1.0; 3]]).unwrap();
        let h = 3f64.sqrt() / 2.0;
        let tri = PointCloud::from_arrays(&[[0.0; 3], [1.0, 0.0, 0.0], [0.5, h, 0.0]]).unwrap();
        let t = symmetry_scan(&[deg, tri], Quantizer::new(2).unwrap(), &[1e-6, 1e-1]).unwrap();
        assert_eq!(t.skipped_degenerate, 1);
        assert_eq!(t.evaluated, 1);
        assert!(t.rows.iter().all(|r| r.proportion_c == 1.0 && r.proportion_d == 1.0));
        assert!(t.to_csv().starts_with("eps,proportion_c,proportion_d\n"));
    }
}
