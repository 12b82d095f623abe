//! Color refinement engines and their fingerprints.
//!
//! All engines share the same recipe: an initial color per node (or per
//! ordered node pair), then rounds in which every color is replaced by the
//! encoding of `(own color, multiset of neighbor messages)`. Real-valued
//! geometry enters only through [`Quantizer`] keys, which keeps fingerprints
//! exactly invariant under rigid motions away from rounding boundaries.
//!
//! | model        | state       | message from `k` to the updated item          |
//! |--------------|-------------|-----------------------------------------------|
//! | `D`          | node `i`    | `(h_k, d_ik)`                                 |
//! | `GeoNGNN`    | node `j` in subgraph `s` | `(h_sk, d_kj)`, center node marked |
//! | `GeoNGNNC`   | as above    | `(h_sk, d_kj, orientation sign of (j, k, s))` |
//! | `DimeNetEdge`| pair `(i,j)`| `(h_ki, d_kj)`                                |
//! | `TwoFWLGeo`  | pair `(i,j)`| `(h_ik, h_kj)`                                |

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid, PointCloud, Quantizer, Vec3};
use crate::hash::{push_multiset, ColorId, Digest128, Encoder};

/// Triple products below this fraction of `radius^3` count as coplanar.
pub const ORIENTATION_ZERO_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "c")]
    C,
    #[serde(rename = "d")]
    D,
    #[serde(rename = "geongnn")]
    GeoNGNN,
    #[serde(rename = "geongnn-c")]
    GeoNGNNC,
    #[serde(rename = "dimenet-edge")]
    DimeNetEdge,
    #[serde(rename = "2fwl")]
    TwoFWLGeo,
}

impl Model {
    pub const ALL: [Model; 6] = [
        Model::C,
        Model::D,
        Model::GeoNGNN,
        Model::GeoNGNNC,
        Model::DimeNetEdge,
        Model::TwoFWLGeo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::C => "c",
            Model::D => "d",
            Model::GeoNGNN => "geongnn",
            Model::GeoNGNNC => "geongnn-c",
            Model::DimeNetEdge => "dimenet-edge",
            Model::TwoFWLGeo => "2fwl",
        }
    }

    fn code(self) -> u8 {
        match self {
            Model::C => 1,
            Model::D => 2,
            Model::GeoNGNN => 3,
            Model::GeoNGNNC => 4,
            Model::DimeNetEdge => 5,
            Model::TwoFWLGeo => 6,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model {s:?}")))
    }
}

fn class_count(colors: &[ColorId]) -> usize {
    colors.iter().collect::<HashSet<_>>().len()
}

fn class_sizes(colors: &[ColorId]) -> Vec<usize> {
    let mut counts: BTreeMap<ColorId, usize> = BTreeMap::new();
    for &c in colors {
        *counts.entry(c).or_default() += 1;
    }
    let mut sizes: Vec<usize> = counts.into_values().collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

fn partition_refines(fine: &[ColorId], coarse: &[ColorId]) -> bool {
    let mut image: BTreeMap<ColorId, ColorId> = BTreeMap::new();
    fine.iter().zip(coarse).all(|(f, c)| *image.entry(*f).or_insert(*c) == *c)
}

/// Node coloring; induces a partition of the node set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub colors: Vec<ColorId>,
    pub round: usize,
}

impl Coloring {
    /// Every node gets the same color.
    pub fn uniform(n: usize) -> Self {
        let c = Encoder::new("init").label(None).finish();
        Coloring { colors: vec![c; n], round: 0 }
    }

    /// Initial colors from node labels; uniform when the cloud is unlabeled.
    pub fn from_labels(p: &PointCloud) -> Self {
        Coloring {
            colors: (0..p.len()).map(|i| Encoder::new("init").label(p.label(i)).finish()).collect(),
            round: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        class_count(&self.colors)
    }

    /// Class sizes, largest first.
    pub fn class_sizes(&self) -> Vec<usize> {
        class_sizes(&self.colors)
    }

    /// Node indices of each class, keyed (and therefore ordered) by color id.
    pub fn classes(&self) -> BTreeMap<ColorId, Vec<usize>> {
        let mut out: BTreeMap<ColorId, Vec<usize>> = BTreeMap::new();
        for (i, &c) in self.colors.iter().enumerate() {
            out.entry(c).or_default().push(i);
        }
        out
    }

    /// True when every class of `self` lies inside one class of `coarser`.
    pub fn refines(&self, coarser: &Coloring) -> bool {
        self.len() == coarser.len() && partition_refines(&self.colors, &coarser.colors)
    }

    pub fn same_partition(&self, other: &Coloring) -> bool {
        self.refines(other) && other.refines(self)
    }

    /// Common refinement of two colorings of the same nodes.
    pub fn meet(&self, other: &Coloring) -> Coloring {
        Coloring {
            colors: self
                .colors
                .iter()
                .zip(&other.colors)
                .map(|(a, b)| Encoder::new("meet").color(*a).color(*b).finish())
                .collect(),
            round: self.round.max(other.round),
        }
    }
}

/// Colors of all ordered node pairs `(i, j)`, row-major, diagonal included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeColoring {
    pub n: usize,
    pub colors: Vec<ColorId>,
}

impl EdgeColoring {
    pub fn get(&self, i: usize, j: usize) -> ColorId {
        self.colors[i * self.n + j]
    }

    pub fn num_classes(&self) -> usize {
        class_count(&self.colors)
    }

    pub fn refines(&self, coarser: &EdgeColoring) -> bool {
        self.n == coarser.n && partition_refines(&self.colors, &coarser.colors)
    }
}

/// Canonical digest of a cloud under one model. Digest equality is the
/// "model cannot distinguish" relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub digest: Digest128,
    pub model: Model,
    pub rounds_to_stable: usize,
    /// Sizes of the final partition classes, largest first.
    pub class_histogram: Vec<usize>,
    pub quantizer: Quantizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    /// Inner rounds of the nested engines.
    pub n_in: usize,
    /// Outer rounds of the nested engines.
    pub n_out: usize,
    /// Subgraph radius; `None` is unbounded.
    pub r_sub: Option<f64>,
    /// Interaction cutoff; `None` is unbounded.
    pub r_cutoff: Option<f64>,
    /// Stabilization cap; `None` means `2n + 4` for node engines and `2n + 6` for edge engines.
    pub max_iters: Option<usize>,
    pub quantizer: Quantizer,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            n_in: 5,
            n_out: 1,
            r_sub: None,
            r_cutoff: None,
            max_iters: None,
            quantizer: Quantizer::default(),
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_in < 1 {
            return Err(Error::InvalidConfig("n_in must be at least 1".into()));
        }
        for (name, r) in [("r_sub", self.r_sub), ("r_cutoff", self.r_cutoff)] {
            if let Some(r) = r {
                if !(r > 0.0) {
                    return Err(Error::InvalidConfig(format!("{name} must be positive, got {r}")));
                }
            }
        }
        Ok(())
    }

    fn node_cap(&self, n: usize) -> usize {
        self.max_iters.unwrap_or(2 * n + 4)
    }

    fn edge_cap(&self, n: usize) -> usize {
        self.max_iters.unwrap_or(2 * n + 6)
    }

    fn radius_key(&self, r: Option<f64>) -> i64 {
        match r {
            Some(r) if r.is_finite() => self.quantizer.key(r),
            _ => i64::MAX,
        }
    }

    fn cutoff_key(&self) -> i64 {
        self.radius_key(self.r_cutoff)
    }

    fn sub_key(&self) -> i64 {
        self.radius_key(self.r_sub)
    }
}

/// Quantized pairwise distances.
struct QDist {
    n: usize,
    keys: Vec<i64>,
}

impl QDist {
    fn new(p: &PointCloud, q: Quantizer) -> Self {
        let n = p.len();
        let mut keys = vec![0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let k = q.key((p.point(i) - p.point(j)).norm());
                keys[i * n + j] = k;
                keys[j * n + i] = k;
            }
        }
        QDist { n, keys }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> i64 {
        self.keys[i * self.n + j]
    }
}

fn header(model: Model, n: usize, cfg: &RefineConfig) -> Encoder {
    let mut enc = Encoder::new("fingerprint");
    enc.u8(model.code()).u64(cfg.quantizer.decimals() as u64).len(n);
    match model {
        Model::C => {}
        Model::D => {
            enc.i64(cfg.cutoff_key());
        }
        Model::GeoNGNN | Model::GeoNGNNC => {
            enc.u64(cfg.n_in as u64)
                .u64(cfg.n_out as u64)
                .i64(cfg.sub_key())
                .i64(cfg.cutoff_key());
        }
        Model::DimeNetEdge | Model::TwoFWLGeo => {}
    }
    enc
}

fn pooled(mut enc: Encoder, colors: &[ColorId]) -> Digest128 {
    let mut items = colors.to_vec();
    push_multiset(&mut enc, &mut items, |e, c| {
        e.color(c);
    });
    enc.digest()
}

/// Center-distance encoding: each node is colored by its label and its
/// quantized distance to the centroid.
pub fn c_encode(p: &PointCloud, q: Quantizer) -> Coloring {
    let c = centroid(p);
    Coloring {
        colors: (0..p.len())
            .map(|i| {
                Encoder::new("center-dist")
                    .label(p.label(i))
                    .i64(q.key((p.point(i) - c).norm()))
                    .finish()
            })
            .collect(),
        round: 0,
    }
}

fn c_fingerprint(p: &PointCloud, cfg: &RefineConfig) -> Fingerprint {
    let coloring = c_encode(p, cfg.quantizer);
    Fingerprint {
        digest: pooled(header(Model::C, p.len(), cfg), &coloring.colors),
        model: Model::C,
        rounds_to_stable: 0,
        class_histogram: coloring.class_sizes(),
        quantizer: cfg.quantizer,
    }
}

/// One round of distance message passing over the nodes in `members`
/// (indices into the cloud). `colors[a]` belongs to `members[a]`.
fn message_round(
    tag: &str,
    members: &[usize],
    colors: &[ColorId],
    qd: &QDist,
    cutoff: i64,
) -> Vec<ColorId> {
    let mut items: Vec<(ColorId, i64)> = Vec::with_capacity(members.len());
    members
        .iter()
        .enumerate()
        .map(|(a, &j)| {
            items.clear();
            for (b, &k) in members.iter().enumerate() {
                let d = qd.get(j, k);
                if k != j && d <= cutoff {
                    items.push((colors[b], d));
                }
            }
            let mut enc = Encoder::new(tag);
            enc.color(colors[a]);
            push_multiset(&mut enc, &mut items, |e, (c, d)| {
                e.color(c).i64(d);
            });
            enc.finish()
        })
        .collect()
}

/// Every coloring produced by distance message passing from `init`, starting
/// with `init` itself and ending with the first round that did not split a class.
pub fn disgnn_trace(p: &PointCloud, init: &Coloring, cfg: &RefineConfig) -> Result<Vec<Coloring>> {
    cfg.validate()?;
    let n = p.len();
    if init.len() != n {
        return Err(Error::InvalidArgument(format!(
            "initial coloring has {} colors for {n} nodes",
            init.len()
        )));
    }
    let qd = QDist::new(p, cfg.quantizer);
    let members: Vec<usize> = (0..n).collect();
    let cutoff = cfg.cutoff_key();
    let cap = cfg.node_cap(n);
    let mut trace = vec![Coloring { colors: init.colors.clone(), round: 0 }];
    let mut classes = init.num_classes();
    for round in 1..=cap {
        let colors = message_round("disgnn", &members, &trace.last().unwrap().colors, &qd, cutoff);
        let next = Coloring { colors, round };
        let next_classes = next.num_classes();
        trace.push(next);
        if next_classes == classes {
            return Ok(trace);
        }
        classes = next_classes;
    }
    Err(Error::NoStabilization { cap })
}

/// Runs distance message passing from `init` until the partition stops
/// refining. Returns the stable coloring and its fingerprint.
pub fn disgnn_refine(
    p: &PointCloud,
    init: &Coloring,
    cfg: &RefineConfig,
) -> Result<(Coloring, Fingerprint)> {
    let mut trace = disgnn_trace(p, init, cfg)?;
    let refinements = trace.len() - 2;
    let stable = trace.pop().unwrap();
    let fp = Fingerprint {
        digest: pooled(header(Model::D, p.len(), cfg), &stable.colors),
        model: Model::D,
        rounds_to_stable: refinements,
        class_histogram: stable.class_sizes(),
        quantizer: cfg.quantizer,
    };
    Ok((stable, fp))
}

/// Signs of `(p_j - c) x (p_k - c) . (p_s - c)` for one subgraph center `s`.
struct Orientation {
    rel: Vec<Vec3>,
    band: f64,
}

impl Orientation {
    fn new(p: &PointCloud) -> Self {
        let c = centroid(p);
        let rel: Vec<Vec3> = p.coords().iter().map(|x| x - c).collect();
        let radius = rel.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Orientation { rel, band: ORIENTATION_ZERO_BAND * radius.powi(3) }
    }

    fn sign(&self, j: usize, k: usize, s: usize) -> i64 {
        let t = self.rel[j].cross(&self.rel[k]).dot(&self.rel[s]);
        if t.abs() < self.band || self.band == 0.0 {
            0
        } else if t > 0.0 {
            1
        } else {
            -1
        }
    }
}

fn subgraph_digest(
    p: &PointCloud,
    qd: &QDist,
    center: usize,
    cfg: &RefineConfig,
    orientation: Option<&Orientation>,
) -> ColorId {
    let n = p.len();
    let sub = cfg.sub_key();
    let cutoff = cfg.cutoff_key();
    let members: Vec<usize> = (0..n).filter(|&j| qd.get(center, j) <= sub).collect();
    let mut h: Vec<ColorId> = members
        .iter()
        .map(|&j| {
            Encoder::new("nested-init")
                .label(p.label(j))
                .i64(qd.get(center, j))
                .u8((j == center) as u8)
                .finish()
        })
        .collect();
    match orientation {
        None => {
            for _ in 0..cfg.n_in {
                h = message_round("nested", &members, &h, qd, cutoff);
            }
        }
        Some(orient) => {
            let m = members.len();
            let signs: Vec<i64> = (0..m * m)
                .map(|idx| orient.sign(members[idx / m], members[idx % m], center))
                .collect();
            let mut items: Vec<(ColorId, i64, i64)> = Vec::with_capacity(m);
            for _ in 0..cfg.n_in {
                h = members
                    .iter()
                    .enumerate()
                    .map(|(a, &j)| {
                        items.clear();
                        for (b, &k) in members.iter().enumerate() {
                            let d = qd.get(j, k);
                            if k != j && d <= cutoff {
                                items.push((h[b], d, signs[a * m + b]));
                            }
                        }
                        let mut enc = Encoder::new("nested-chiral");
                        enc.color(h[a]);
                        push_multiset(&mut enc, &mut items, |e, (c, d, s)| {
                            e.color(c).i64(d).i64(s);
                        });
                        enc.finish()
                    })
                    .collect();
            }
        }
    }
    let mut enc = Encoder::new("nested-pool");
    push_multiset(&mut enc, &mut h, |e, c| {
        e.color(c);
    });
    enc.finish()
}

fn nested_fingerprint(p: &PointCloud, cfg: &RefineConfig, chiral: bool) -> Result<Fingerprint> {
    cfg.validate()?;
    let n = p.len();
    let qd = QDist::new(p, cfg.quantizer);
    let orientation = chiral.then(|| Orientation::new(p));
    let mut colors: Vec<ColorId> = (0..n)
        .into_par_iter()
        .map(|s| subgraph_digest(p, &qd, s, cfg, orientation.as_ref()))
        .collect();
    let members: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.n_out {
        colors = message_round("outer", &members, &colors, &qd, cfg.cutoff_key());
    }
    let model = if chiral { Model::GeoNGNNC } else { Model::GeoNGNN };
    Ok(Fingerprint {
        digest: pooled(header(model, n, cfg), &colors),
        model,
        rounds_to_stable: cfg.n_in + cfg.n_out,
        class_histogram: class_sizes(&colors),
        quantizer: cfg.quantizer,
    })
}

/// Nested refinement: distance message passing inside each node's marked
/// subgraph, pooled per subgraph, then outer message passing on the full cloud.
/// Complete for E(3) at `n_in >= 5` with unbounded radii.
pub fn geongnn_fingerprint(p: &PointCloud, cfg: &RefineConfig) -> Result<Fingerprint> {
    nested_fingerprint(p, cfg, false)
}

/// Chiral variant of [`geongnn_fingerprint`]: messages inside subgraph `s`
/// also carry the orientation sign of `(j, k, s)` about the centroid.
/// Invariant under proper rigid motions only.
pub fn geongnn_c_fingerprint(p: &PointCloud, cfg: &RefineConfig) -> Result<Fingerprint> {
    nested_fingerprint(p, cfg, true)
}

#[derive(Clone, Copy, PartialEq)]
enum EdgeRule {
    DimeNet,
    TwoFwl,
}

fn edge_refine(p: &PointCloud, cfg: &RefineConfig, rule: EdgeRule) -> Result<(EdgeColoring, usize)> {
    cfg.validate()?;
    let n = p.len();
    let qd = QDist::new(p, cfg.quantizer);
    let mut h: Vec<ColorId> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            Encoder::new("edge-init").label(p.label(i)).label(p.label(j)).i64(qd.get(i, j)).finish()
        })
        .collect();
    let mut classes = class_count(&h);
    let cap = cfg.edge_cap(n);
    let mut refinements = 0;
    for _ in 0..cap {
        let prev = &h;
        let next: Vec<ColorId> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                let mut enc;
                match rule {
                    EdgeRule::DimeNet => {
                        let mut items: Vec<(ColorId, i64)> =
                            (0..n).map(|k| (prev[k * n + i], qd.get(k, j))).collect();
                        enc = Encoder::new("dimenet");
                        enc.color(prev[idx]);
                        push_multiset(&mut enc, &mut items, |e, (c, d)| {
                            e.color(c).i64(d);
                        });
                    }
                    EdgeRule::TwoFwl => {
                        let mut items: Vec<(ColorId, ColorId)> =
                            (0..n).map(|k| (prev[i * n + k], prev[k * n + j])).collect();
                        enc = Encoder::new("2fwl");
                        enc.color(prev[idx]);
                        push_multiset(&mut enc, &mut items, |e, (a, b)| {
                            e.color(a).color(b);
                        });
                    }
                }
                enc.finish()
            })
            .collect();
        let next_classes = class_count(&next);
        h = next;
        if next_classes == classes {
            return Ok((EdgeColoring { n, colors: h }, refinements));
        }
        classes = next_classes;
        refinements += 1;
    }
    Err(Error::NoStabilization { cap })
}

fn edge_fingerprint(model: Model, p: &PointCloud, cfg: &RefineConfig, edges: &EdgeColoring, refinements: usize) -> Fingerprint {
    let n = edges.n;
    let columns: Vec<ColorId> = (0..n)
        .map(|j| {
            let mut col: Vec<ColorId> = (0..n).map(|i| edges.get(i, j)).collect();
            let mut enc = Encoder::new("edge-column");
            push_multiset(&mut enc, &mut col, |e, c| {
                e.color(c);
            });
            enc.finish()
        })
        .collect();
    Fingerprint {
        digest: pooled(header(model, p.len(), cfg), &columns),
        model,
        rounds_to_stable: refinements,
        class_histogram: class_sizes(&edges.colors),
        quantizer: cfg.quantizer,
    }
}

/// Stable edge coloring of the DimeNet-style update `h_ij <- (h_ij, {{(h_ki, d_kj)}})`.
pub fn edge_refine_dimenet_coloring(p: &PointCloud, cfg: &RefineConfig) -> Result<(EdgeColoring, Fingerprint)> {
    let (edges, r) = edge_refine(p, cfg, EdgeRule::DimeNet)?;
    let fp = edge_fingerprint(Model::DimeNetEdge, p, cfg, &edges, r);
    Ok((edges, fp))
}

pub fn edge_refine_dimenet(p: &PointCloud, cfg: &RefineConfig) -> Result<Fingerprint> {
    edge_refine_dimenet_coloring(p, cfg).map(|(_, fp)| fp)
}

/// Stable edge coloring of the 2-FWL-style update `h_ij <- (h_ij, {{(h_ik, h_kj)}})`.
pub fn twofwl_geo_coloring(p: &PointCloud, cfg: &RefineConfig) -> Result<(EdgeColoring, Fingerprint)> {
    let (edges, r) = edge_refine(p, cfg, EdgeRule::TwoFwl)?;
    let fp = edge_fingerprint(Model::TwoFWLGeo, p, cfg, &edges, r);
    Ok((edges, fp))
}

pub fn twofwl_geo_fingerprint(p: &PointCloud, cfg: &RefineConfig) -> Result<Fingerprint> {
    twofwl_geo_coloring(p, cfg).map(|(_, fp)| fp)
}

pub fn fingerprint(p: &PointCloud, model: Model, cfg: &RefineConfig) -> Result<Fingerprint> {
    cfg.validate()?;
    match model {
        Model::C => Ok(c_fingerprint(p, cfg)),
        Model::D => disgnn_refine(p, &Coloring::from_labels(p), cfg).map(|(_, fp)| fp),
        Model::GeoNGNN => geongnn_fingerprint(p, cfg),
        Model::GeoNGNNC => geongnn_c_fingerprint(p, cfg),
        Model::DimeNetEdge => edge_refine_dimenet(p, cfg),
        Model::TwoFWLGeo => twofwl_geo_fingerprint(p, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Distinguished,
    NotDistinguished,
}

/// `Distinguished` iff the clouds differ in size or their fingerprints differ.
pub fn distinguish(p1: &PointCloud, p2: &PointCloud, model: Model, cfg: &RefineConfig) -> Result<Verdict> {
    if p1.len() != p2.len() {
        return Ok(Verdict::Distinguished);
    }
    let a = fingerprint(p1, model, cfg)?;
    let b = fingerprint(p2, model, cfg)?;
    Ok(if a.digest == b.digest { Verdict::NotDistinguished } else { Verdict::Distinguished })
}
