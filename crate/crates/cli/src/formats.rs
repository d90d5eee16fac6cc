//! On-disk formats: corpus manifest, labels, dataset and evaluation
//! report, all comma-separated with a header row.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use resil_core::features::FEATURE_DIMS;
use resil_core::fi::{Verifier, DEFAULT_CAMPAIGN_SIZE};
use resil_learn::Dataset;

use crate::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::data(path, e))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o644));
    let mut tmp = builder
        .tempfile_in(dir)
        .map_err(|e| CliError::write(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::write(path, e))?;
    tmp.persist(path)
        .map_err(|e| CliError::write(path, e.error))?;
    Ok(())
}

/// Decimal rendering with nine significant digits, trailing zeros trimmed.
pub fn sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() {
            "0".into()
        } else {
            v.to_string()
        };
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// `exact`, `any`, or a relative tolerance.
pub fn parse_verifier(text: &str) -> std::result::Result<Verifier, String> {
    match text.trim() {
        "" => Ok(Verifier::default()),
        "exact" => Ok(Verifier::Exact),
        "any" => Ok(Verifier::AcceptAll),
        t => match t.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(Verifier::RelativeTolerance(v)),
            _ => Err(format!(
                "bad tolerance `{t}` (expected a number, exact or any)"
            )),
        },
    }
}

pub fn format_verifier(v: Verifier) -> String {
    match v {
        Verifier::Exact => "exact".into(),
        Verifier::AcceptAll => "any".into(),
        Verifier::RelativeTolerance(t) => format!("{t:e}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// File stem of the program.
    pub id: String,
    pub program: PathBuf,
    pub inputs: PathBuf,
    pub verifier: Verifier,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, serde::Deserialize, serde::Serialize)]
struct ManifestRow {
    program: String,
    inputs: String,
    #[serde(default)]
    tolerance: String,
    #[serde(default)]
    n: String,
    #[serde(default)]
    seed: String,
}

/// Reads a manifest. Relative paths resolve against the manifest's
/// directory; a blank `n` means 3000 and a blank seed means
/// `default_seed`.
pub fn read_manifest(path: &Path, default_seed: u64) -> Result<Vec<ManifestEntry>> {
    let text = read_text(path)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut entries = Vec::new();
    let mut ids = HashSet::new();
    for (i, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let line = i + 2;
        let bad = |what: String| CliError::data(path, format!("line {line}: {what}"));
        let row = row.map_err(|e| bad(e.to_string()))?;
        let program = dir.join(&row.program);
        let inputs = dir.join(&row.inputs);
        for p in [&program, &inputs] {
            if !p.is_file() {
                return Err(bad(format!("{} does not exist", p.display())));
            }
        }
        let id = program
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| bad("program path has no file name".into()))?;
        if !ids.insert(id.clone()) {
            return Err(bad(format!("duplicate program id `{id}`")));
        }
        let verifier = parse_verifier(&row.tolerance).map_err(bad)?;
        let n = if row.n.is_empty() {
            DEFAULT_CAMPAIGN_SIZE
        } else {
            row.n
                .parse()
                .map_err(|_| bad(format!("bad n `{}`", row.n)))?
        };
        if n == 0 {
            return Err(bad("n must be at least 1".into()));
        }
        let seed = if row.seed.is_empty() {
            default_seed
        } else {
            row.seed
                .parse()
                .map_err(|_| bad(format!("bad seed `{}`", row.seed)))?
        };
        entries.push(ManifestEntry {
            id,
            program,
            inputs,
            verifier,
            n,
            seed,
        });
    }
    Ok(entries)
}

/// Manifest text for entries whose paths are relative to the manifest.
pub fn manifest_text(rows: &[(String, String, Verifier, usize, u64)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (program, inputs, verifier, n, seed) in rows {
        w.serialize(ManifestRow {
            program: program.clone(),
            inputs: inputs.clone(),
            tolerance: format_verifier(*verifier),
            n: n.to_string(),
            seed: seed.to_string(),
        })
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
}

/// One labelled program: campaign size and per-class counts.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LabelRow {
    pub id: String,
    pub n: u64,
    pub success_count: u64,
    pub sdc_count: u64,
    pub interruption_count: u64,
    pub success: f64,
    pub sdc: f64,
    pub interruption: f64,
}

impl LabelRow {
    pub fn new(id: &str, counts: [u64; 3]) -> LabelRow {
        let r = resil_core::ManifestationRates::from_counts(counts);
        LabelRow {
            id: id.to_string(),
            n: r.n,
            success_count: counts[0],
            sdc_count: counts[1],
            interruption_count: counts[2],
            success: r.success,
            sdc: r.sdc,
            interruption: r.interruption,
        }
    }
}

pub fn labels_text(rows: &[LabelRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "id",
            "n",
            "success_count",
            "sdc_count",
            "interruption_count",
            "success",
            "sdc",
            "interruption",
        ])
        .expect("in-memory csv");
    }
    for r in rows {
        w.serialize(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let text = read_text(path)?;
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::data(path, format!("line {}: {e}", i + 2))))
        .collect()
}

pub fn dataset_header() -> Vec<String> {
    let mut h = vec!["id".to_string()];
    h.extend((0..FEATURE_DIMS).map(|i| format!("f{i}")));
    h.push("success".into());
    h.push("interruption".into());
    h
}

pub fn dataset_text(d: &Dataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(dataset_header()).expect("in-memory csv");
    for i in 0..d.len() {
        let mut rec = vec![d.ids[i].clone()];
        rec.extend(d.x[i].iter().map(|&v| sig9(v)));
        rec.push(sig9(d.success[i]));
        rec.push(sig9(d.interruption[i]));
        w.write_record(rec).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = read_text(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::data(path, e))?
        .clone();
    let cols = header.len();
    if cols < 4
        || &header[0] != "id"
        || &header[cols - 2] != "success"
        || &header[cols - 1] != "interruption"
    {
        return Err(CliError::data(
            path,
            "header must be id,f0..,success,interruption",
        ));
    }
    let (mut ids, mut x, mut s, mut ir) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::data(path, format!("line {line}: {e}")))?;
        let nums: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CliError::data(path, format!("line {line}: {e}")))?;
        let (feat, targets) = nums.split_at(cols - 3);
        if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(CliError::data(
                path,
                format!("line {line}: targets must lie in [0, 1]"),
            ));
        }
        ids.push(rec[0].to_string());
        x.push(feat.to_vec());
        s.push(targets[0]);
        ir.push(targets[1]);
    }
    Dataset::new(ids, x, s, ir).map_err(|e| CliError::data(path, e))
}

/// Observed and predicted rates of one held-out program.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub id: String,
    /// success, sdc, interruption
    pub observed: [f64; 3],
    pub predicted: [f64; 3],
}

impl ReportRow {
    /// Predicted SDC is what success and interruption leave over.
    pub fn new(
        id: &str,
        observed: [f64; 3],
        pred_success: f64,
        pred_interruption: f64,
    ) -> ReportRow {
        ReportRow {
            id: id.to_string(),
            observed,
            predicted: [
                pred_success,
                (1.0 - pred_success - pred_interruption).max(0.0),
                pred_interruption,
            ],
        }
    }

    pub fn accuracy(&self, class: usize) -> Option<f64> {
        resil_learn::prediction_accuracy(self.predicted[class], self.observed[class])
    }
}

pub const CLASSES: [&str; 3] = ["SR", "SDCR", "IR"];

/// Mean and population variance of the defined accuracies of a class.
pub fn class_aggregate(rows: &[ReportRow], class: usize) -> Option<(f64, f64)> {
    let acc: Vec<f64> = rows.iter().filter_map(|r| r.accuracy(class)).collect();
    if acc.is_empty() {
        return None;
    }
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / acc.len() as f64;
    Some((mean, var))
}

fn fmt_acc(a: Option<f64>) -> String {
    a.map_or("N/A".into(), |v| format!("{v:.3}"))
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    for c in CLASSES {
        header.extend(
            [format!("obs_{c}"), format!("pred_{c}"), format!("acc_{c}")].map(|h| h.to_lowercase()),
        );
    }
    w.write_record(&header).expect("in-memory csv");
    for r in rows {
        let mut rec = vec![r.id.clone()];
        for c in 0..3 {
            rec.push(sig9(r.observed[c]));
            rec.push(sig9(r.predicted[c]));
            rec.push(r.accuracy(c).map_or("N/A".into(), sig9));
        }
        w.write_record(rec).expect("in-memory csv");
    }
    let mut rec = vec!["average".to_string()];
    for c in 0..3 {
        let agg = class_aggregate(rows, c);
        rec.extend([
            "".into(),
            "".into(),
            agg.map_or("N/A".into(), |(m, v)| format!("{}({})", sig9(m), sig9(v))),
        ]);
    }
    w.write_record(rec).expect("in-memory csv");
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
}

pub fn report_table(rows: &[ReportRow]) -> String {
    let id_w = rows.iter().map(|r| r.id.len()).max().unwrap_or(2).max(12);
    let mut out = format!("{:id_w$}", "id");
    for c in CLASSES {
        out += &format!(" | {:>8} {:>6} {:>14}", format!("Obs.{c}"), "Pred", "Accy");
    }
    out.push('\n');
    for r in rows {
        out += &format!("{:id_w$}", r.id);
        for c in 0..3 {
            out += &format!(
                " | {:>8.3} {:>6.3} {:>14}",
                r.observed[c],
                r.predicted[c],
                fmt_acc(r.accuracy(c))
            );
        }
        out.push('\n');
    }
    out += &format!("{:id_w$}", "Average(var)");
    for c in 0..3 {
        let agg = class_aggregate(rows, c).map_or("N/A".into(), |(m, v)| format!("{m:.3}({v:.3})"));
        out += &format!(" | {:>8} {:>6} {:>14}", "", "", agg);
    }
    out.push('\n');
    out
}
