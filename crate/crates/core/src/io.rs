//! Curve tables, signature files, the tangential-acceleration feature and
//! run reports.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::ModeSet;
use crate::error::{Error, Result};
use crate::function_space::{estimate_derivative, Curve, DerivativeMethod, FunctionalSample, Grid};
use crate::inference::ModeTestReport;
use crate::scalar::Scalar;
use crate::scan::ScanResult;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn parse_err(path: &str, line: usize, column: Option<usize>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        column,
        message: message.into(),
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never see a half-written file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Like [`write_atomic`] for several files: every temporary file is written
/// before any is renamed, so a bad destination leaves nothing behind.
pub fn write_atomic_all(outputs: &[(&Path, &[u8])]) -> Result<()> {
    let mut staged = Vec::with_capacity(outputs.len());
    for (path, bytes) in outputs {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, *path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    }
    Ok(())
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

// ---------------------------------------------------------------- curves

/// Parses a curve table: the first record holds the grid, every further
/// record one curve. When the first cell of the grid record is not a number
/// (`label`, or empty) every record carries a leading label column.
pub fn parse_curves_csv<T: Scalar>(text: &str, origin: &str) -> Result<FunctionalSample<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(origin, i + 1, None, e.to_string()))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        records.push((line, rec));
    }
    let Some((grid_line, head)) = records.first() else {
        return Err(parse_err(origin, 1, None, "file is empty"));
    };
    let labelled = head.get(0).is_some_and(|c| c.parse::<f64>().is_err());
    let skip = usize::from(labelled);
    let number = |cell: &str, line: usize, col: usize| -> Result<T> {
        let v: f64 = cell
            .parse()
            .map_err(|_| parse_err(origin, line, Some(col), format!("`{cell}` is not a number")))?;
        if !v.is_finite() {
            return Err(parse_err(origin, line, Some(col), format!("`{cell}` is not finite")));
        }
        Ok(T::lit(v))
    };

    let points = head
        .iter()
        .enumerate()
        .skip(skip)
        .map(|(j, c)| number(c, *grid_line, j + 1))
        .collect::<Result<Vec<T>>>()?;
    let grid = Grid::new(points).map_err(|e| match e {
        Error::GridNotIncreasing { index } => parse_err(
            origin,
            *grid_line,
            Some(index + 1 + skip),
            "grid is not strictly increasing",
        ),
        other => parse_err(origin, *grid_line, None, other.to_string()),
    })?;
    let grid = Arc::new(grid);
    let width = head.len();

    let mut curves = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in &records[1..] {
        if rec.len() != width {
            return Err(parse_err(
                origin,
                *line,
                None,
                format!("row has {} fields, expected {width}", rec.len()),
            ));
        }
        if labelled {
            labels.push(rec.get(0).unwrap_or_default().to_string());
        }
        let values = rec
            .iter()
            .enumerate()
            .skip(skip)
            .map(|(j, c)| number(c, *line, j + 1))
            .collect::<Result<Vec<T>>>()?;
        curves.push(Curve::new(grid.clone(), values)?);
    }
    if curves.is_empty() {
        return Err(parse_err(origin, *grid_line, None, "no curves after the grid row"));
    }
    FunctionalSample::new(curves, labelled.then_some(labels))
}

pub fn read_curves_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<FunctionalSample<T>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_curves_csv(&text, &path.display().to_string())
}

/// Renders a curve table in the format read by [`parse_curves_csv`].
pub fn format_curves_csv<T: Scalar>(sample: &FunctionalSample<T>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let labels = sample.labels();
    let mut head: Vec<String> = Vec::new();
    if labels.is_some() {
        head.push("label".into());
    }
    head.extend(sample.grid().points().iter().map(|t| t.as_f64().to_string()));
    w.write_record(&head).expect("in-memory write");
    for (i, c) in sample.curves().iter().enumerate() {
        let mut row: Vec<String> = Vec::new();
        if let Some(l) = labels {
            row.push(l[i].clone());
        }
        row.extend(c.values().iter().map(|v| v.as_f64().to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn write_curves_csv<T: Scalar>(sample: &FunctionalSample<T>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, format_curves_csv(sample).as_bytes())
}

// ------------------------------------------------------------ signatures

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenPoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureRecord {
    pub points: Vec<PenPoint>,
    /// Consecutive points sharing a timestamp.
    pub duplicate_timestamps: usize,
}

impl SignatureRecord {
    pub fn new(points: Vec<PenPoint>) -> Result<Self> {
        let mut dup = 0;
        for (i, w) in points.windows(2).enumerate() {
            if w[1].t < w[0].t {
                return Err(Error::InvalidConfig(format!(
                    "timestamps decrease at point {}",
                    i + 2
                )));
            }
            if w[1].t == w[0].t {
                dup += 1;
            }
        }
        Ok(Self {
            points,
            duplicate_timestamps: dup,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Parses whitespace-separated signature text: a point count, then one
/// `x y t ...` line per point. Columns after the third are ignored.
pub fn parse_signature(text: &str, origin: &str) -> Result<SignatureRecord> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(origin, 1, None, "file is empty"))?;
    let count: usize = header
        .split_whitespace()
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| parse_err(origin, hline, Some(1), "first line must be the point count"))?;
    let mut points = Vec::with_capacity(count);
    let mut prev_t = f64::NEG_INFINITY;
    let mut dup = 0;
    let mut last_line = hline;
    for (line, l) in lines {
        last_line = line;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(parse_err(origin, line, None, format!("expected at least 3 columns, found {}", fields.len())));
        }
        let mut vals = [0.0; 3];
        for (j, v) in vals.iter_mut().enumerate() {
            *v = fields[j]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(origin, line, Some(j + 1), format!("`{}` is not a finite number", fields[j])))?;
        }
        if vals[2] < prev_t {
            return Err(parse_err(origin, line, Some(3), "timestamp decreases"));
        }
        if vals[2] == prev_t {
            dup += 1;
        }
        prev_t = vals[2];
        points.push(PenPoint {
            x: vals[0],
            y: vals[1],
            t: vals[2],
        });
    }
    if points.len() != count {
        return Err(parse_err(
            origin,
            last_line,
            None,
            format!("header announces {count} points but the file has {}", points.len()),
        ));
    }
    Ok(SignatureRecord {
        points,
        duplicate_timestamps: dup,
    })
}

pub fn read_signature(path: impl AsRef<Path>) -> Result<SignatureRecord> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_signature(&text, &path.display().to_string())
}

pub fn format_signature(sig: &SignatureRecord) -> String {
    let mut out = format!("{}\n", sig.points.len());
    for p in &sig.points {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.t));
    }
    out
}

/// Tangential acceleration feature plus any warnings raised on the way.
#[derive(Debug, Clone)]
pub struct Feature<T> {
    pub curve: Curve<T>,
    pub warnings: Vec<String>,
}

fn interpolate(ts: &[f64], vs: &[f64], at: f64) -> f64 {
    let k = ts.partition_point(|&t| t <= at);
    if k == 0 {
        return vs[0];
    }
    if k >= ts.len() {
        return vs[ts.len() - 1];
    }
    let (t0, t1) = (ts[k - 1], ts[k]);
    if t1 == t0 {
        return vs[k];
    }
    let w = (at - t0) / (t1 - t0);
    vs[k - 1] + w * (vs[k] - vs[k - 1])
}

/// Signed acceleration along the direction of motion, `(x″x′ + y″y′)/‖(x′, y′)‖`,
/// on `grid` over normalized time, scaled to unit L2 norm.
pub fn tangential_acceleration<T: Scalar>(
    sig: &SignatureRecord,
    grid: Arc<Grid<T>>,
    method: &DerivativeMethod<T>,
) -> Result<Feature<T>> {
    if sig.len() < 5 {
        return Err(Error::InvalidConfig(format!(
            "a signature needs at least 5 points, got {}",
            sig.len()
        )));
    }
    let (lo, hi) = grid.span();
    if lo.as_f64() < 0.0 || hi.as_f64() > 1.0 {
        return Err(Error::InvalidConfig("feature grid must lie inside [0, 1]".into()));
    }
    let t0 = sig.points[0].t;
    let t1 = sig.points[sig.len() - 1].t;
    if !(t1 > t0) {
        return Err(Error::InvalidConfig("signature timestamps span no time".into()));
    }
    let ts: Vec<f64> = sig.points.iter().map(|p| (p.t - t0) / (t1 - t0)).collect();
    let xs: Vec<f64> = sig.points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = sig.points.iter().map(|p| p.y).collect();
    let resample = |vs: &[f64]| {
        Curve::from_fn(grid.clone(), |t| T::lit(interpolate(&ts, vs, t.as_f64())))
    };
    let x = resample(&xs)?;
    let y = resample(&ys)?;
    let dx = estimate_derivative(&x, 1, method)?;
    let dy = estimate_derivative(&y, 1, method)?;
    let ddx = estimate_derivative(&x, 2, method)?;
    let ddy = estimate_derivative(&y, 2, method)?;

    let m = grid.len();
    let vx: Vec<f64> = dx.values().iter().map(|v| v.as_f64()).collect();
    let vy: Vec<f64> = dy.values().iter().map(|v| v.as_f64()).collect();
    let speed: Vec<f64> = vx.iter().zip(&vy).map(|(a, b)| a.hypot(*b)).collect();
    let max_speed = speed.iter().copied().fold(0.0, f64::max);
    if !(max_speed > 0.0) {
        return Err(Error::DegenerateFeature);
    }
    let floor = 1e-9 * max_speed;
    let good: Vec<usize> = (0..m).filter(|&i| speed[i] >= floor).collect();
    let mut warnings = Vec::new();
    let mut carried = 0;
    let s: Vec<f64> = (0..m)
        .map(|i| {
            let src = if speed[i] >= floor {
                i
            } else {
                carried += 1;
                // nearest grid point with a usable direction, lower index on ties
                *good
                    .iter()
                    .min_by_key(|&&j| (j as isize - i as isize).unsigned_abs())
                    .expect("max speed is positive")
            };
            let (ux, uy) = (vx[src] / speed[src], vy[src] / speed[src]);
            ddx.values()[i].as_f64() * ux + ddy.values()[i].as_f64() * uy
        })
        .collect();
    if carried > 0 {
        warnings.push(format!(
            "speed vanished at {carried} grid point(s); direction carried from the nearest moving point"
        ));
    }
    let raw = Curve::new(grid.clone(), s.into_iter().map(T::lit).collect())?;
    let norm = raw.l2_norm().as_f64();
    if !(norm > 1e-8 * max_speed) {
        return Err(Error::DegenerateFeature);
    }
    Ok(Feature {
        curve: raw.scale(T::lit(1.0 / norm)),
        warnings,
    })
}

// --------------------------------------------------------------- reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(seed: u64, inputs: &[impl AsRef<Path>]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputDigest {
                    path: p.as_ref().display().to_string(),
                    sha256: file_digest(p)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs,
        })
    }
}

/// Modes as curve rows plus the cluster of every start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    pub grid: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    /// Mode per start; `-1` marks a start outside every support ball.
    pub assignments: Vec<i64>,
    pub sizes: Vec<usize>,
    pub atomic: Vec<bool>,
    pub stable: Vec<bool>,
    pub merge_radius: f64,
    pub step_tolerance: f64,
}

impl ModeTable {
    pub fn from_mode_set<T: Scalar>(ms: &ModeSet<T>, grid: &Grid<T>) -> Self {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
        Self {
            grid: f(grid.points()),
            modes: ms.modes.iter().map(|c| f(c.values())).collect(),
            assignments: ms
                .assignments
                .iter()
                .map(|a| a.map_or(-1, |m| m as i64))
                .collect(),
            sizes: ms.sizes.clone(),
            atomic: ms.atomic_flags.clone(),
            stable: ms.stability_flags.clone(),
            merge_radius: ms.merge_radius.as_f64(),
            step_tolerance: ms.step_tolerance.as_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub mode: usize,
    pub cluster_size: usize,
    pub atomic: bool,
    pub lambda_eigen: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_paper: Option<f64>,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub significant: bool,
    pub replicate_mean: f64,
    pub replicate_sd: f64,
    pub other_mean: f64,
    pub other_undefined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTable {
    pub alpha: f64,
    pub n_boot: usize,
    pub statistic: String,
    pub level: f64,
    pub redraws: usize,
    pub first_half: Vec<usize>,
    pub second_half: Vec<usize>,
    pub significant_modes: Vec<usize>,
    pub candidates: ModeTable,
    pub rows: Vec<TestRow>,
}

impl TestTable {
    pub fn from_report<T: Scalar>(r: &ModeTestReport<T>, grid: &Grid<T>) -> Self {
        Self {
            alpha: r.config.alpha,
            n_boot: r.config.n_boot,
            statistic: match r.config.statistic {
                crate::inference::Statistic::LambdaEigen => "lambda_eigen".into(),
                crate::inference::Statistic::LambdaPaper => "lambda_paper".into(),
            },
            level: r.level,
            redraws: r.redraws,
            first_half: r.first_half.clone(),
            second_half: r.second_half.clone(),
            significant_modes: r.significant_modes(),
            candidates: ModeTable::from_mode_set(&r.candidates, grid),
            rows: r
                .tests
                .iter()
                .map(|t| TestRow {
                    mode: t.mode,
                    cluster_size: t.cluster_size,
                    atomic: t.atomic,
                    lambda_eigen: t.observed.eigen,
                    lambda_paper: t.observed.paper,
                    ci_lo: t.ci_lo,
                    ci_hi: t.ci_hi,
                    significant: t.significant,
                    replicate_mean: t.summary.mean,
                    replicate_sd: t.summary.sd,
                    other_mean: t.other_summary.mean,
                    other_undefined: t.other_summary.undefined,
                })
                .collect(),
        }
    }
}

/// Everything a CLI run produced, serialized as one TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: std::collections::BTreeMap<String, String>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<ModeTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestTable>,
}

impl RunReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("report serialization failed: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = match e.span() {
                Some(span) => {
                    let before = &text[..span.start];
                    let line = before.matches('\n').count() + 1;
                    let col = span.start - before.rfind('\n').map_or(0, |p| p + 1) + 1;
                    (line, Some(col))
                }
                None => (1, None),
            };
            parse_err("<report>", line, column, e.message().to_string())
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_toml()?.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_table() {
        let s: FunctionalSample<f64> = parse_curves_csv("0,0.5,1\n1,2,3\n4,5,6\n", "t").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.grid().len(), 3);
        assert!(s.labels().is_none());
        assert_eq!(s.curve(1).values(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn labelled_table() {
        let s: FunctionalSample<f64> = parse_curves_csv("label,0,1\na,1,2\nb,3,4\n", "t").unwrap();
        assert_eq!(s.labels().unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn ragged_row_names_the_line() {
        let e = parse_curves_csv::<f64>("0,0.5,1\n1,2,3\n4,5\n", "t").unwrap_err();
        match e {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let e = parse_curves_csv::<f64>("0,0.5,1\n1,x,3\n", "t").unwrap_err();
        match e {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, Some(2))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsorted_grid_is_rejected() {
        let e = parse_curves_csv::<f64>("0,0.5,0.25\n1,2,3\n", "t").unwrap_err();
        assert!(e.to_string().contains("not strictly increasing"), "{e}");
        match e {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (1, Some(3))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_byte_stable() {
        let text = "label,0,0.25,1.0\nfirst,1.50,2,3e0\nsecond,-0.1,0.2,0.30000000000000004\n";
        let once = format_curves_csv(&parse_curves_csv::<f64>(text, "t").unwrap());
        let twice = format_curves_csv(&parse_curves_csv::<f64>(&once, "t").unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn minimal_signature() {
        let s = parse_signature("3\n0 0 0\n1 1 10 5 7\n2 2 20\n", "s").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.points[1], PenPoint { x: 1.0, y: 1.0, t: 10.0 });
        assert_eq!(s.duplicate_timestamps, 0);
    }

    #[test]
    fn signature_errors() {
        assert!(parse_signature("5\n0 0 0\n1 1 1\n2 2 2\n3 3 3\n", "s").is_err());
        let e = parse_signature("3\n0 0 0\n1 1 5\n2 2 4\n", "s").unwrap_err();
        assert!(e.to_string().contains("decreases"));
        let s = parse_signature("3\n0 0 0\n1 1 5\n2 2 5\n", "s").unwrap();
        assert_eq!(s.duplicate_timestamps, 1);
    }

    #[test]
    fn signature_round_trip() {
        let s = parse_signature("4\n0.5 -1 0\n1 1e-3 10\n2 2 10\n3 4 30\n", "s").unwrap();
        assert_eq!(parse_signature(&format_signature(&s), "s").unwrap(), s);
    }

    fn line_signature(f: impl Fn(f64) -> f64) -> SignatureRecord {
        let pts = (0..=100)
            .map(|i| {
                let t = i as f64 / 100.0;
                PenPoint { x: f(t), y: 0.0, t: 1000.0 + 50.0 * t }
            })
            .collect();
        SignatureRecord::new(pts).unwrap()
    }

    #[test]
    fn constant_speed_line_is_degenerate() {
        let grid = Arc::new(Grid::<f64>::uniform(0.0, 1.0, 101).unwrap());
        let e = tangential_acceleration(&line_signature(|t| 3.0 * t), grid, &DerivativeMethod::FiniteDifference)
            .unwrap_err();
        assert!(matches!(e, Error::DegenerateFeature));
    }

    #[test]
    fn quadratic_line_gives_a_constant() {
        let grid = Arc::new(Grid::<f64>::uniform(0.0, 1.0, 101).unwrap());
        let f = tangential_acceleration(&line_signature(|t| t * t), grid, &DerivativeMethod::FiniteDifference)
            .unwrap();
        // speed vanishes at t = 0 only
        assert_eq!(f.warnings.len(), 1);
        for v in f.curve.values() {
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
        assert!((f.curve.l2_norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn report_round_trip() {
        let mut config = std::collections::BTreeMap::new();
        config.insert("kernel".to_string(), "gaussian_gaussian".to_string());
        let r = RunReport {
            command: "cluster".into(),
            config,
            provenance: Provenance {
                seed: 7,
                version: "0.1.0".into(),
                inputs: vec![InputDigest {
                    path: "a.csv".into(),
                    sha256: "00".into(),
                }],
            },
            warnings: vec!["w".into()],
            clusters: Some(ModeTable {
                grid: vec![0.0, 0.1, 1.0 / 3.0],
                modes: vec![vec![1e-300, -2.5, 0.1 + 0.2]],
                assignments: vec![0, -1],
                sizes: vec![1],
                atomic: vec![true],
                stable: vec![true],
                merge_radius: 0.05,
                step_tolerance: 1e-6,
            }),
            scan: None,
            test: None,
        };
        let text = r.to_toml().unwrap();
        let back = RunReport::from_toml(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
