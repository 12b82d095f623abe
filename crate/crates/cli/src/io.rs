//! Input formats: XYZ frames and JSON clouds or pairs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use geowl_core::counterexamples::CounterexamplePair;
use geowl_core::{PointCloud, Vec3};
use serde::Deserialize;

use crate::error::CliError;

/// One XYZ frame before label interning.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub comment: String,
    pub labels: Vec<String>,
    pub coords: Vec<Vec3>,
}

fn parse_err(line: usize, reason: impl Into<String>) -> CliError {
    CliError::Parse { line, reason: reason.into() }
}

/// Parses concatenated frames: a count line, a comment line, then `count`
/// lines of `label x y z`. Blank lines between frames are ignored.
pub fn parse_xyz_frames(text: &str) -> Result<Vec<RawFrame>, CliError> {
    let lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    // a trailing newline produces one empty final element
    let total = if lines.last() == Some(&"") { lines.len() - 1 } else { lines.len() };
    let mut frames = Vec::new();
    let mut i = 0;
    while i < total {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let count_line = i + 1;
        let n: usize = lines[i]
            .trim()
            .parse()
            .map_err(|_| parse_err(count_line, format!("expected an atom count, found {:?}", lines[i].trim())))?;
        if n < 2 {
            return Err(parse_err(count_line, format!("a frame needs at least 2 atoms, found {n}")));
        }
        if i + 1 >= total {
            return Err(parse_err(count_line + 1, "missing comment line"));
        }
        let comment = lines[i + 1].to_string();
        let mut labels = Vec::with_capacity(n);
        let mut coords = Vec::with_capacity(n);
        for k in 0..n {
            let idx = i + 2 + k;
            let line_no = idx + 1;
            if idx >= total {
                return Err(parse_err(line_no, format!("frame declares {n} atoms but only {k} follow")));
            }
            let fields: Vec<&str> = lines[idx].split_whitespace().collect();
            if fields.len() != 4 {
                return Err(parse_err(
                    line_no,
                    format!("expected `label x y z`, found {} fields (frame declares {n} atoms, {k} read)", fields.len()),
                ));
            }
            if !fields[0].chars().all(|c| c.is_ascii_alphanumeric()) {
                return Err(parse_err(line_no, format!("label {:?} is not alphanumeric", fields[0])));
            }
            let mut xyz = [0.0; 3];
            for (slot, f) in xyz.iter_mut().zip(&fields[1..]) {
                *slot = f
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line_no, format!("invalid coordinate {f:?}")))?;
            }
            labels.push(fields[0].to_string());
            coords.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
        }
        frames.push(RawFrame { comment, labels, coords });
        i += 2 + n;
    }
    Ok(frames)
}

/// Label names to integers: distinct names in lexicographic order get 0, 1, ...
/// Interning jointly over every frame passed in keeps ids consistent across files.
pub fn intern(frames: &[RawFrame]) -> (Vec<PointCloud>, Vec<String>) {
    let mut names: Vec<String> = frames.iter().flat_map(|f| f.labels.iter().cloned()).collect();
    names.sort();
    names.dedup();
    let ids: BTreeMap<&str, u32> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
    let clouds = frames
        .iter()
        .map(|f| {
            PointCloud::with_labels(f.coords.clone(), f.labels.iter().map(|l| ids[l.as_str()]).collect())
                .expect("frame was validated while parsing")
        })
        .collect();
    (clouds, names)
}

#[cfg(test)]
fn parse_xyz(text: &str) -> Result<Vec<PointCloud>, CliError> {
    Ok(intern(&parse_xyz_frames(text)?).0)
}

#[derive(Debug, Clone)]
pub enum Input {
    Clouds(Vec<PointCloud>),
    Pair(Box<CounterexamplePair>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonInput {
    Pair(Box<CounterexamplePair>),
    Cloud(PointCloud),
    Clouds(Vec<PointCloud>),
}

fn looks_like_json(path: &Path, text: &str) -> bool {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => true,
        Some(e) if e.eq_ignore_ascii_case("xyz") => false,
        _ => matches!(text.trim_start().chars().next(), Some('{') | Some('[')),
    }
}

pub fn parse_json(text: &str) -> Result<Input, CliError> {
    let parsed: JsonInput = serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        reason: format!("not a cloud, cloud list or pair: {e}"),
    })?;
    Ok(match parsed {
        JsonInput::Pair(p) => Input::Pair(p),
        JsonInput::Cloud(c) => Input::Clouds(vec![c]),
        JsonInput::Clouds(c) => Input::Clouds(c),
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), reason: e.to_string() })
}

/// Reads a file as XYZ raw frames or JSON, by extension or content.
pub enum FileContent {
    Xyz(Vec<RawFrame>),
    Json(Input),
}

pub fn read_file(path: &Path) -> Result<FileContent, CliError> {
    let text = read_text(path)?;
    let at = |e: CliError| e.in_file(path);
    if looks_like_json(path, &text) {
        parse_json(&text).map(FileContent::Json).map_err(at)
    } else {
        parse_xyz_frames(&text).map(FileContent::Xyz).map_err(at)
    }
}

/// Clouds from several files; XYZ labels are interned jointly across all of them.
pub fn read_clouds(paths: &[PathBuf]) -> Result<Vec<Vec<PointCloud>>, CliError> {
    let contents: Vec<FileContent> = paths.iter().map(|p| read_file(p)).collect::<Result<_, _>>()?;
    let all_frames: Vec<RawFrame> = contents
        .iter()
        .filter_map(|c| match c {
            FileContent::Xyz(f) => Some(f.clone()),
            FileContent::Json(_) => None,
        })
        .flatten()
        .collect();
    let (mut interned, _) = intern(&all_frames);
    let mut out = Vec::new();
    for (c, path) in contents.into_iter().zip(paths) {
        out.push(match c {
            FileContent::Xyz(frames) => interned.drain(..frames.len()).collect(),
            FileContent::Json(Input::Clouds(c)) => c,
            FileContent::Json(Input::Pair(p)) => vec![p.p1, p.p2],
        });
        if out.last().is_some_and(|v| v.is_empty()) {
            return Err(CliError::Parse { line: 1, reason: "no clouds in input".into() }.in_file(path));
        }
    }
    Ok(out)
}

/// Input files for a scan: the file itself, or the `.xyz` / `.json` files of a directory in name order.
pub fn scan_inputs(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = std::fs::read_dir(path).map_err(|e| CliError::Io { path: path.to_path_buf(), reason: e.to_string() })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("xyz") || e.eq_ignore_ascii_case("json"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Config(format!("no .xyz or .json files in {}", path.display())));
    }
    Ok(files)
}
