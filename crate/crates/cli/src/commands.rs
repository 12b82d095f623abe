//! Subcommand bodies. Each writes one JSON report `{command, config, result}`
//! and returns the process exit code.

use std::io::Write;
use std::path::{Path, PathBuf};

use geowl_core::counterexamples::{
    augment_combinatorial, search_blind_pairs_in, verify_counterexample, AugmentMode, PolyhedronKind, SearchSpace,
    DEFAULT_SHELL_RATIO,
};
use geowl_core::reconstruct::{
    complete_invariant, orientation_signs, reconstruct_e3, reconstruct_se3, select_anchors, triangular_encoding,
};
use geowl_core::sample::random_congruent_copy;
use geowl_core::symmetry::symmetry_scan;
use geowl_core::{centroid, classify_symmetry, distance_matrix, fingerprint as model_fingerprint, Error, Model};
use geowl_core::{PointCloud, Quantizer, SymmetryGroup, Verdict, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{read_clouds, scan_inputs};

/// Models a generated pair is checked against.
const VERIFY_MODELS: [Model; 4] = [Model::D, Model::GeoNGNN, Model::DimeNetEdge, Model::TwoFWLGeo];

fn write_output(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io { path: path.clone(), reason: e.to_string() }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io { path: PathBuf::from("<stdout>"), reason: e.to_string() })
        }
    }
}

fn report(cfg: &RunConfig, command: &str, result: Value) -> Result<(), CliError> {
    let doc = json!({ "command": command, "config": cfg, "result": result });
    let mut text = serde_json::to_string_pretty(&doc).expect("report is valid JSON");
    text.push('\n');
    write_output(cfg, &text)
}

fn one_file(file: &Path) -> Result<Vec<PointCloud>, CliError> {
    Ok(read_clouds(&[file.to_path_buf()])?.remove(0))
}

pub fn fingerprint(cfg: &RunConfig, model: Model, file: &Path) -> Result<u8, CliError> {
    let refine = cfg.refine()?;
    let clouds = one_file(file)?;
    let fps = clouds
        .iter()
        .enumerate()
        .map(|(i, p)| Ok(json!({ "index": i, "n": p.len(), "fingerprint": model_fingerprint(p, model, &refine)? })))
        .collect::<Result<Vec<_>, CliError>>()?;
    report(cfg, "fingerprint", json!({ "file": file.display().to_string(), "model": model, "clouds": fps }))?;
    Ok(0)
}

fn pair_from(files: &[PathBuf]) -> Result<(PointCloud, PointCloud), CliError> {
    let mut groups = read_clouds(files)?;
    let bad = |path: &Path, msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    match groups.len() {
        1 => {
            let g = groups.remove(0);
            if g.len() != 2 {
                return Err(bad(&files[0], format!("expected two clouds, found {}", g.len())));
            }
            let mut it = g.into_iter();
            Ok((it.next().unwrap(), it.next().unwrap()))
        }
        _ => {
            for (g, f) in groups.iter().zip(files) {
                if g.len() != 1 {
                    return Err(bad(f, format!("expected one cloud, found {}", g.len())));
                }
            }
            let b = groups.remove(1).remove(0);
            Ok((groups.remove(0).remove(0), b))
        }
    }
}

pub fn distinguish(cfg: &RunConfig, model: Model, files: &[PathBuf]) -> Result<u8, CliError> {
    let refine = cfg.refine()?;
    let (a, b) = pair_from(files)?;
    let fa = model_fingerprint(&a, model, &refine)?;
    let fb = model_fingerprint(&b, model, &refine)?;
    let verdict = if fa.digest == fb.digest { Verdict::NotDistinguished } else { Verdict::Distinguished };
    report(
        cfg,
        "distinguish",
        json!({
            "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
            "model": model,
            "verdict": verdict,
            "fingerprints": [fa, fb],
        }),
    )?;
    Ok(match verdict {
        Verdict::Distinguished => 0,
        Verdict::NotDistinguished => 3,
    })
}

pub fn symmetry(cfg: &RunConfig, file: &Path) -> Result<u8, CliError> {
    let q = cfg.quantizer()?;
    let clouds = one_file(file)?;
    let reports: Vec<Value> = clouds
        .iter()
        .enumerate()
        .map(|(i, p)| json!({ "index": i, "n": p.len(), "report": classify_symmetry(p, q, cfg.eps) }))
        .collect();
    report(cfg, "symmetry", json!({ "file": file.display().to_string(), "clouds": reports }))?;
    Ok(0)
}

pub fn scan(cfg: &RunConfig, path: &Path, csv: bool) -> Result<u8, CliError> {
    let files = scan_inputs(path)?;
    let clouds: Vec<PointCloud> = read_clouds(&files)?.into_iter().flatten().collect();
    let table = symmetry_scan(&clouds, Quantizer::new(cfg.scan_decimals)?, &cfg.eps_grid)?;
    if csv {
        write_output(cfg, &table.to_csv())?;
    } else {
        report(
            cfg,
            "scan",
            json!({
                "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
                "clouds": clouds.len(),
                "table": table,
            }),
        )?;
    }
    Ok(0)
}

pub struct GenOptions {
    pub kind: PolyhedronKind,
    pub inner_kind: Option<PolyhedronKind>,
    pub ratio: Option<f64>,
    pub subset_size: usize,
    pub budget: u64,
    pub augment: Option<AugmentMode>,
    pub copies: usize,
    pub emit_dir: Option<PathBuf>,
}

impl GenOptions {
    fn space(&self) -> SearchSpace {
        match self.inner_kind {
            Some(inner) => SearchSpace::combination(self.kind, inner, self.ratio.unwrap_or(DEFAULT_SHELL_RATIO)),
            None => SearchSpace::single(self.kind),
        }
    }

    fn stem(&self) -> String {
        let mut s = self.kind.to_string();
        if let Some(inner) = self.inner_kind {
            s.push('_');
            s.push_str(&inner.to_string());
        }
        s.push_str(&format!("_k{}", self.subset_size));
        if let Some(mode) = self.augment {
            s.push_str(&format!("_{}{}", json!(mode).as_str().unwrap_or("aug"), self.copies));
        }
        s
    }
}

pub fn gen_counterexamples(cfg: &RunConfig, opts: &GenOptions) -> Result<u8, CliError> {
    let seed = cfg.seed.ok_or_else(|| CliError::Config("gen-counterexamples requires a seed (--seed or `seed` in the config)".into()))?;
    let refine = cfg.refine()?;
    let space = opts.space();
    let outcome = search_blind_pairs_in(&space, opts.subset_size, &refine, opts.budget)?;

    let mut pairs = Vec::new();
    let mut augmentation_failures = Vec::new();
    for (i, pair) in outcome.pairs.iter().enumerate() {
        match opts.augment {
            None => pairs.push(pair.clone()),
            Some(mode) => match augment_combinatorial(pair, mode, opts.copies, &refine) {
                Ok(p) => pairs.push(p),
                Err(Error::VerificationFailed(reason)) => {
                    augmentation_failures.push(json!({ "index": i, "selections": pair.provenance.selections, "reason": reason }))
                }
                Err(e) => return Err(e.into()),
            },
        }
    }

    // emitted clouds are placed in a random pose so consumers cannot rely on the construction frame
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut verified = Vec::with_capacity(pairs.len());
    for mut pair in pairs {
        pair.p1 = random_congruent_copy(&mut rng, &pair.p1, false);
        pair.p2 = random_congruent_copy(&mut rng, &pair.p2, false);
        verified.push(verify_counterexample(&pair, &VERIFY_MODELS, &refine)?);
    }

    let mut emitted = Vec::new();
    if let Some(dir) = &opts.emit_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.clone(), reason: e.to_string() })?;
        for (i, pair) in verified.iter().enumerate() {
            let path = dir.join(format!("{}_{i:03}.json", opts.stem()));
            let mut text = serde_json::to_string_pretty(pair).expect("pair serializes");
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| CliError::Io { path: path.clone(), reason: e.to_string() })?;
            emitted.push(path.display().to_string());
        }
    }

    let all_valid = verified.iter().all(|p| p.is_valid());
    report(
        cfg,
        "gen-counterexamples",
        json!({
            "space": space,
            "subset_size": opts.subset_size,
            "budget": opts.budget,
            "augmentation": opts.augment.map(|mode| json!({ "mode": mode, "copies": opts.copies })),
            "enumerated": outcome.enumerated,
            "orbits": outcome.orbits,
            "budget_exhausted": outcome.budget_exhausted,
            "pairs_found": outcome.pairs.len(),
            "augmentation_failures": augmentation_failures,
            "all_valid": all_valid,
            "pairs": verified,
            "emitted": emitted,
        }),
    )?;
    Ok(if all_valid { 0 } else { 2 })
}

fn fallback_anchors(p: &PointCloud) -> Result<(Vec3, Vec3), CliError> {
    let c = centroid(p);
    let far = p
        .coords()
        .iter()
        .copied()
        .max_by(|a, b| (a - c).norm().total_cmp(&(b - c).norm()))
        .expect("clouds have at least two points");
    if (far - c).norm() <= 1e-9 * p.radius().max(1.0) {
        return Err(Error::DegenerateCloud.into());
    }
    Ok((c, far))
}

pub fn reconstruct(cfg: &RunConfig, group: SymmetryGroup, file: &Path) -> Result<u8, CliError> {
    let q = cfg.quantizer()?;
    let clouds = one_file(file)?;
    let mut out = Vec::with_capacity(clouds.len());
    for (i, p) in clouds.iter().enumerate() {
        let (anchors, source) = match select_anchors(p, q, cfg.eps) {
            Some(a) => (a, "center-of-class"),
            None => (fallback_anchors(p)?, "farthest-node"),
        };
        let enc = triangular_encoding(p, anchors.0, anchors.1)?;
        let d = distance_matrix(p);
        let result = match group {
            SymmetryGroup::E3 => reconstruct_e3(&enc, &d)?,
            SymmetryGroup::SE3 => reconstruct_se3(&enc, &d, &orientation_signs(p, anchors.0, anchors.1))?,
        };
        let canonical = complete_invariant(p, q, cfg.eps)?;
        out.push(json!({
            "index": i,
            "n": p.len(),
            "anchor_source": source,
            "anchor_gap": enc.anchor_gap,
            "reconstruction": result,
            "canonical_form": canonical,
        }));
    }
    report(cfg, "reconstruct", json!({ "file": file.display().to_string(), "group": group, "clouds": out }))?;
    Ok(0)
}
