use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "experiment,sigma,epsilon,t_final,zeta,beta,delta,stride,replica,estimator,component,value,failed";

/// One long-format result row. Parameters that do not apply are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub experiment: ExperimentKind,
    pub sigma: f64,
    pub epsilon: f64,
    pub t_final: Option<f64>,
    pub zeta: Option<f64>,
    pub beta: Option<f64>,
    /// Width actually used (after stride quantisation for subsampling).
    pub delta: Option<f64>,
    pub stride: Option<usize>,
    /// `None` for ground-truth rows.
    pub replica: Option<usize>,
    pub estimator: &'static str,
    pub component: usize,
    /// `None` when the computation failed.
    pub value: Option<f64>,
}

impl Record {
    pub fn failed(&self) -> bool {
        self.value.is_none()
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        fn opt(a: Option<f64>, b: Option<f64>) -> Ordering {
            match (a, b) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (a, b) => a.is_some().cmp(&b.is_some()),
            }
        }
        self.experiment
            .cmp(&other.experiment)
            .then(self.sigma.total_cmp(&other.sigma))
            .then(self.epsilon.total_cmp(&other.epsilon))
            .then(opt(self.t_final, other.t_final))
            .then(opt(self.zeta, other.zeta))
            .then(opt(self.beta, other.beta))
            .then(opt(self.delta, other.delta))
            .then(self.stride.cmp(&other.stride))
            .then(self.replica.cmp(&other.replica))
            .then(self.estimator.cmp(other.estimator))
            .then(self.component.cmp(&other.component))
    }

    fn write_row<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        fn f(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        fn u(v: Option<usize>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment.as_str(),
            self.sigma,
            self.epsilon,
            f(self.t_final),
            f(self.zeta),
            f(self.beta),
            f(self.delta),
            u(self.stride),
            u(self.replica),
            self.estimator,
            self.component,
            f(self.value),
            u8::from(self.failed()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub cell: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtEntry {
    pub epsilon: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub experiment: ExperimentKind,
    pub base_seed: u64,
    pub replicas: usize,
    pub burn_in: f64,
    pub dt: Vec<DtEntry>,
    pub rng: &'static str,
    pub build: String,
    pub records: usize,
    pub failed_records: usize,
    pub failures: Vec<CellFailure>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<Record>,
    pub failures: Vec<CellFailure>,
}

impl ExperimentResult {
    pub(crate) fn new(config: ExperimentConfig, mut records: Vec<Record>, failures: Vec<CellFailure>) -> Self {
        records.sort_by(Record::cmp_key);
        ExperimentResult {
            config,
            records,
            failures,
        }
    }

    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty() || self.records.iter().any(Record::failed)
    }

    /// Values of all non-failed rows matching `pred`.
    pub fn values<P: Fn(&Record) -> bool>(&self, pred: P) -> Vec<f64> {
        self.records.iter().filter(|r| pred(r)).filter_map(|r| r.value).collect()
    }

    pub fn metadata(&self) -> Metadata {
        let cfg = &self.config;
        Metadata {
            experiment: cfg.experiment,
            base_seed: cfg.base_seed,
            replicas: cfg.replicas,
            burn_in: cfg.burn_in,
            dt: cfg
                .grid
                .epsilon
                .iter()
                .map(|&epsilon| DtEntry {
                    epsilon,
                    dt: cfg.dt.dt(epsilon),
                })
                .collect(),
            rng: "ChaCha12 (rand_chacha 0.9, seed_from_u64(base_seed + replica)); normals: rand_distr 0.5 StandardNormal",
            build: build_id(),
            records: self.records.len(),
            failed_records: self.records.iter().filter(|r| r.failed()).count(),
            failures: self.failures.clone(),
            config: cfg.clone(),
        }
    }
}

fn build_id() -> String {
    let describe = option_env!("MSDRIFT_GIT_DESCRIBE").unwrap_or("unknown");
    format!("msdrift-core {} ({describe})", env!("CARGO_PKG_VERSION"))
}

pub fn write_csv<W: Write>(result: &ExperimentResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &result.records {
        r.write_row(&mut out)?;
    }
    out.flush()
}

/// Writes `<path>` as CSV and `<path>` with extension `json` as metadata.
/// Returns the metadata path.
pub fn emit(result: &ExperimentResult, path: &Path) -> Result<PathBuf> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(result, BufWriter::new(file)).map_err(|e| Error::io(path, e))?;
    let meta_path = path.with_extension("json");
    let file = File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &result.metadata())?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(&meta_path, e))?;
    Ok(meta_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(estimator: &'static str, replica: usize, value: Option<f64>) -> Record {
        Record {
            experiment: ExperimentKind::Multidim,
            sigma: 1.0,
            epsilon: 0.05,
            t_final: Some(1000.0),
            zeta: None,
            beta: Some(1.0),
            delta: Some(1.0),
            stride: None,
            replica: Some(replica),
            estimator,
            component: 0,
            value,
        }
    }

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::defaults(ExperimentKind::Multidim, false)
    }

    #[test]
    fn empty_result_is_header_only() {
        let res = ExperimentResult::new(cfg(), vec![], vec![]);
        let mut buf = Vec::new();
        write_csv(&res, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn one_record_one_row() {
        let res = ExperimentResult::new(cfg(), vec![record("filtered", 3, Some(-0.7))], vec![]);
        let mut buf = Vec::new();
        write_csv(&res, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], "multidim,1,0.05,1000,,1,1,,3,filtered,0,-0.7,0");
        assert_eq!(rows[1].split(',').count(), CSV_HEADER.split(',').count());
    }

    #[test]
    fn failed_rows_are_flagged_and_sorted() {
        let res = ExperimentResult::new(
            cfg(),
            vec![record("mle", 1, None), record("filtered", 0, Some(1.0)), record("filtered", 1, Some(2.0))],
            vec![],
        );
        assert!(res.has_failures());
        let mut buf = Vec::new();
        write_csv(&res, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert!(rows[0].contains(",0,filtered,"));
        assert!(rows[1].contains(",1,filtered,"));
        assert!(rows[2].ends_with(",mle,0,,1"));
    }

    #[test]
    fn emit_writes_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("out.csv");
        let res = ExperimentResult::new(cfg(), vec![record("mle", 0, Some(0.5))], vec![]);
        let meta = emit(&res, &path).unwrap();
        assert!(path.exists());
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(meta).unwrap()).unwrap();
        assert_eq!(json["records"], 1);
        assert_eq!(json["experiment"], "multidim");
    }
}
