//! Result manifests and on-disk experiment artifacts.
//!
//! Every artifact for one method is keyed `{method}_{r}_{seed}`. The
//! manifest holds only quantities that are a pure function of the config;
//! wall-clock data goes to `run_info.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cobras::io::fmt_f64;
use cobras::rom::ErrorCurves;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, BenchResult};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Summary statistics of one method. Means are `None` when every sample
/// diverged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub r: usize,
    pub seed: u64,
    pub mean_error: Option<f64>,
    pub median_error: Option<f64>,
    pub divergences: usize,
    pub sine_mean_error: Option<f64>,
    pub sine_divergences: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultManifest {
    pub toolkit_version: String,
    pub experiment: String,
    pub config_hash: String,
    pub methods: Vec<MethodSummary>,
    /// Scalar diagnostics (subspace angles, reconstruction errors, ...).
    pub checks: BTreeMap<String, f64>,
    /// Emitted files, relative to the output directory.
    pub files: Vec<String>,
}

impl ResultManifest {
    pub fn method(&self, name: &str, r: usize) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name && m.r == r)
    }
}

/// Full results of one method.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: String,
    pub r: usize,
    pub seed: u64,
    /// Test-set (impulse) error curves.
    pub test: ErrorCurves,
    /// Error of the `sin(t)` forcing run, if evaluated.
    pub sine: Option<ErrorCurves>,
    /// Singular values of `YᵀX` (or the analogous Gram matrix).
    pub spectrum: Option<Vec<f64>>,
}

impl MethodResult {
    pub fn key(&self) -> String {
        result_key(&self.method, self.r, self.seed)
    }

    pub fn summary(&self) -> MethodSummary {
        MethodSummary {
            method: self.method.clone(),
            r: self.r,
            seed: self.seed,
            mean_error: finite(self.test.mean()),
            median_error: finite(self.test.median()),
            divergences: self.test.divergence_count(),
            sine_mean_error: self.sine.as_ref().and_then(|s| finite(s.mean())),
            sine_divergences: self.sine.as_ref().map(ErrorCurves::divergence_count),
        }
    }
}

pub fn result_key(method: &str, r: usize, seed: u64) -> String {
    format!("{method}_{r}_{seed}")
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub experiment: String,
    pub config_hash: String,
    pub dt: f64,
    /// Keyed by [`result_key`], so iteration order is deterministic.
    pub methods: BTreeMap<String, MethodResult>,
    pub checks: BTreeMap<String, f64>,
}

impl ExperimentResults {
    pub fn new(experiment: &str, config_hash: String, dt: f64) -> Self {
        Self { experiment: experiment.into(), config_hash, dt, methods: BTreeMap::new(), checks: BTreeMap::new() }
    }

    pub fn insert(&mut self, result: MethodResult) {
        self.methods.insert(result.key(), result);
    }

    pub fn get(&self, method: &str, r: usize) -> Option<&MethodResult> {
        self.methods.values().find(|m| m.method == method && m.r == r)
    }

    /// Manifest without file listing.
    pub fn manifest(&self) -> ResultManifest {
        ResultManifest {
            toolkit_version: TOOLKIT_VERSION.into(),
            experiment: self.experiment.clone(),
            config_hash: self.config_hash.clone(),
            methods: self.methods.values().map(MethodResult::summary).collect(),
            checks: self.checks.clone(),
            files: Vec::new(),
        }
    }
}

/// JSON form of a method's curves; diverged samples become `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    pub dt: f64,
    pub denominator: f64,
    pub test: Vec<Vec<Option<f64>>>,
    pub sine: Option<Vec<Option<f64>>>,
}

fn nullable(curve: &[f64]) -> Vec<Option<f64>> {
    curve.iter().map(|v| finite(*v)).collect()
}

struct Emitter<'a> {
    root: &'a Path,
    files: Vec<String>,
}

impl Emitter<'_> {
    fn path(&mut self, rel: String) -> BenchResult<PathBuf> {
        let path = self.root.join(&rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.files.push(rel);
        Ok(path)
    }

    fn csv<R: AsRef<[String]>>(&mut self, rel: String, header: &[&str], rows: impl IntoIterator<Item = R>) -> BenchResult<()> {
        let path = self.path(rel)?;
        let mut w = csv::Writer::from_path(path).map_err(cobras::Error::from)?;
        w.write_record(header).map_err(cobras::Error::from)?;
        for row in rows {
            w.write_record(row.as_ref()).map_err(cobras::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: String, value: &T) -> BenchResult<()> {
        let path = self.path(rel)?;
        Ok(cobras::io::write_json(value, path)?)
    }

    fn curve(&mut self, rel: String, dt: f64, curve: &[f64]) -> BenchResult<()> {
        let rows = curve.iter().enumerate().map(|(k, e)| vec![fmt_f64(k as f64 * dt), fmt_f64(*e)]);
        self.csv(rel, &["t", "err"], rows)
    }
}

/// Writes curves, spectra, the summary table and `manifest.json` under
/// `dir`, plus a `run_info.json` with the wall-clock time. Returns the
/// manifest with its file list.
pub fn emit_results(results: &ExperimentResults, dir: impl AsRef<Path>, format: OutputFormat) -> BenchResult<ResultManifest> {
    let root = dir.as_ref();
    std::fs::create_dir_all(root)?;
    let mut out = Emitter { root, files: Vec::new() };
    let dt = results.dt;
    for (key, m) in &results.methods {
        match format {
            OutputFormat::Csv => {
                for (i, curve) in m.test.curves.iter().enumerate() {
                    out.curve(format!("curves/{key}/test_{i:03}.csv"), dt, curve)?;
                }
                out.curve(format!("curves/{key}/mean.csv"), dt, &m.test.mean_curve())?;
                if let Some(sine) = &m.sine {
                    out.curve(format!("curves/{key}/sine.csv"), dt, &sine.curves[0])?;
                }
                if let Some(s) = &m.spectrum {
                    let rows = s.iter().enumerate().map(|(k, v)| vec![(k + 1).to_string(), fmt_f64(*v)]);
                    out.csv(format!("spectra/{key}_sigma.csv"), &["k", "sigma"], rows)?;
                }
            }
            OutputFormat::Json => {
                let file = CurveFile {
                    dt,
                    denominator: m.test.denominator,
                    test: m.test.curves.iter().map(|c| nullable(c)).collect(),
                    sine: m.sine.as_ref().map(|s| nullable(&s.curves[0])),
                };
                out.json(format!("curves/{key}.json"), &file)?;
                if let Some(s) = &m.spectrum {
                    out.json(format!("spectra/{key}_sigma.json"), s)?;
                }
            }
        }
    }
    let mut manifest = results.manifest();
    let opt = |v: Option<f64>| v.map_or_else(String::new, fmt_f64);
    let rows = manifest.methods.iter().map(|m| {
        vec![
            m.method.clone(),
            m.r.to_string(),
            m.seed.to_string(),
            opt(m.mean_error),
            opt(m.median_error),
            m.divergences.to_string(),
            opt(m.sine_mean_error),
        ]
    });
    match format {
        OutputFormat::Csv => {
            out.csv("summary.csv".into(), &["method", "r", "seed", "mean", "median", "divergences", "sine_mean"], rows)?
        }
        OutputFormat::Json => out.json("summary.json".into(), &manifest.methods)?,
    }
    manifest.files = out.files;
    manifest.files.push("manifest.json".into());
    manifest.files.sort();
    cobras::io::write_json(&manifest, root.join("manifest.json"))?;
    write_run_info(root)?;
    Ok(manifest)
}

#[derive(Debug, Serialize)]
struct RunInfo {
    unix_time: u64,
    toolkit_version: &'static str,
}

fn write_run_info(root: &Path) -> BenchResult<()> {
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(cobras::io::write_json(&RunInfo { unix_time, toolkit_version: TOOLKIT_VERSION }, root.join("run_info.json"))?)
}

/// Reads a `t,err` curve written by [`emit_results`].
pub fn read_curve_csv(path: impl AsRef<Path>) -> BenchResult<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).map_err(cobras::Error::from)?;
    let mut t = Vec::new();
    let mut err = Vec::new();
    for record in reader.records() {
        let record = record.map_err(cobras::Error::from)?;
        let parse = |i: usize| -> BenchResult<f64> {
            record
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| BenchError::Numerical(cobras::Error::InvalidArgument("malformed curve row".into())))
        };
        t.push(parse(0)?);
        err.push(parse(1)?);
    }
    Ok((t, err))
}

pub fn read_manifest(path: impl AsRef<Path>) -> BenchResult<ResultManifest> {
    Ok(cobras::io::read_json(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cobras::rom::ErrorKind;

    fn sample() -> ExperimentResults {
        let mut res = ExperimentResults::new("demo", "abc".into(), 0.5);
        res.insert(MethodResult {
            method: "cobras".into(),
            r: 2,
            seed: 7,
            test: ErrorCurves { kind: ErrorKind::Output, denominator: 2.0, curves: vec![vec![0.1, 0.25, 1.0 / 3.0], vec![0.0, f64::NAN, f64::NAN]] },
            sine: Some(ErrorCurves { kind: ErrorKind::Output, denominator: 1.0, curves: vec![vec![0.5, 0.125]] }),
            spectrum: Some(vec![3.0, 1.5, 1e-3]),
        });
        res
    }

    #[test]
    fn empty_method_list_writes_summary_only() {
        let dir = tempfile::tempdir().unwrap();
        let res = ExperimentResults::new("demo", "abc".into(), 1.0);
        let m = emit_results(&res, dir.path(), OutputFormat::Csv).unwrap();
        assert_eq!(m.files, vec!["manifest.json".to_string(), "summary.csv".to_string()]);
        assert!(m.methods.is_empty());
    }

    #[test]
    fn csv_round_trip_and_naming() {
        let dir = tempfile::tempdir().unwrap();
        let res = sample();
        let m = emit_results(&res, dir.path(), OutputFormat::Csv).unwrap();
        assert!(m.files.contains(&"curves/cobras_2_7/test_000.csv".to_string()));
        assert!(m.files.contains(&"spectra/cobras_2_7_sigma.csv".to_string()));
        let (t, err) = read_curve_csv(dir.path().join("curves/cobras_2_7/test_000.csv")).unwrap();
        assert_eq!(t, vec![0.0, 0.5, 1.0]);
        assert_eq!(err, res.methods["cobras_2_7"].test.curves[0]);
        let (_, diverged) = read_curve_csv(dir.path().join("curves/cobras_2_7/test_001.csv")).unwrap();
        assert!(diverged[1].is_nan());
        let back = read_manifest(dir.path().join("manifest.json")).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.methods[0].divergences, 1);
    }

    #[test]
    fn json_format_keeps_nan_as_null() {
        let dir = tempfile::tempdir().unwrap();
        emit_results(&sample(), dir.path(), OutputFormat::Json).unwrap();
        let file: CurveFile = cobras::io::read_json(dir.path().join("curves/cobras_2_7.json")).unwrap();
        assert_eq!(file.test[1], vec![Some(0.0), None, None]);
        assert_eq!(file.sine.unwrap(), vec![Some(0.5), Some(0.125)]);
    }
}
