//! CSV artifacts and the run metadata file.
//!
//! Every CSV starts with a fixed header row. Parameter components are always
//! named `mu_1 … mu_d`. Numbers use Rust's shortest roundtrip formatting
//! (`inf`, `NaN` for non-finite values).
//!
//! | file                          | columns                                             |
//! |-------------------------------|-----------------------------------------------------|
//! | `chosen_params.csv`           | `round, mu_1…mu_d, max_indicator, t_full_train_s, t_scan_s` |
//! | `indicator_scan_round_<n>.csv`| `mu_1…mu_d, delta`                                  |
//! | `indicator_scan_final.csv`    | `mu_1…mu_d, delta`                                  |
//! | `worst_case_indicator.csv`    | `neurons, max_indicator`                            |
//! | `loss_history.csv`            | `epoch, loss`                                       |
//! | `loss_history_neuron_<k>.csv` | `epoch, loss`                                       |
//! | `online_results.csv`          | `mu_1…mu_d, delta, epochs, t_online_s`              |
//! | `coefficients.csv`            | `neuron, c`                                         |
//! | `prediction.csv`              | `x, t, u`                                           |
//! | `test_errors.csv`             | `mu_1…mu_d, rel_l2, max_abs, delta, t_online_s`     |
//! | `timing.csv`                  | `q, full_cum_s, gpt_cum_s`                          |
//! | `svd.csv`                     | `k, sigma_ratio, label`                             |

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eval::{ErrorReport, SvdReport, TimingCurve};
use crate::greedy::GreedyHistory;
use crate::mlp::Point;
use crate::pde::ParameterPoint;
use crate::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Column names `mu_1 … mu_d`.
pub fn mu_columns(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("mu_{i}")).collect()
}

fn num(v: f64) -> String {
    v.to_string()
}

fn write_rows(path: &Path, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn with_mu(mu: &ParameterPoint, rest: impl IntoIterator<Item = String>) -> Vec<String> {
    mu.as_slice().iter().map(|v| num(*v)).chain(rest).collect()
}

fn header(d: usize, rest: &[&str]) -> Vec<String> {
    mu_columns(d)
        .into_iter()
        .chain(rest.iter().map(|s| s.to_string()))
        .collect()
}

pub fn write_chosen_params(path: &Path, history: &GreedyHistory, dim: usize) -> Result<()> {
    let mut h = vec!["round".to_owned()];
    h.extend(header(
        dim,
        &["max_indicator", "t_full_train_s", "t_scan_s"],
    ));
    let rows = history
        .rounds
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut row = vec![(k + 1).to_string()];
            row.extend(with_mu(
                &r.mu,
                [num(r.max_indicator), num(r.t_full_train), num(r.t_scan)],
            ));
            row
        })
        .collect();
    write_rows(path, h, rows)
}

pub fn write_scan(path: &Path, xi: &[ParameterPoint], scan: &[f64], dim: usize) -> Result<()> {
    let rows = xi
        .iter()
        .zip(scan)
        .map(|(m, d)| with_mu(m, [num(*d)]))
        .collect();
    write_rows(path, header(dim, &["delta"]), rows)
}

/// `neurons, max_indicator`: the worst indicator over the training set of
/// the model with that many neurons.
pub fn write_worst_case(path: &Path, history: &GreedyHistory) -> Result<()> {
    let rows = history
        .indicator_sequence()
        .iter()
        .enumerate()
        .map(|(k, v)| vec![(k + 1).to_string(), num(*v)])
        .collect();
    write_rows(path, vec!["neurons".into(), "max_indicator".into()], rows)
}

/// Every greedy artifact of an offline run into `dir`.
pub fn write_greedy_outputs(dir: &Path, history: &GreedyHistory, dim: usize) -> Result<()> {
    write_chosen_params(&dir.join("chosen_params.csv"), history, dim)?;
    for (k, r) in history.rounds.iter().enumerate().skip(1) {
        write_scan(
            &dir.join(format!("indicator_scan_round_{}.csv", k + 1)),
            &history.xi,
            &r.scan,
            dim,
        )?;
    }
    if let Some(f) = &history.final_scan {
        write_scan(&dir.join("indicator_scan_final.csv"), &history.xi, f, dim)?;
    }
    write_worst_case(&dir.join("worst_case_indicator.csv"), history)
}

pub fn write_loss_history(path: &Path, history: &[(usize, f64)]) -> Result<()> {
    let rows = history
        .iter()
        .map(|(e, l)| vec![e.to_string(), num(*l)])
        .collect();
    write_rows(path, vec!["epoch".into(), "loss".into()], rows)
}

pub struct OnlineRow<'a> {
    pub mu: &'a ParameterPoint,
    pub delta: f64,
    pub epochs: usize,
    pub t_online: f64,
}

pub fn write_online_results(path: &Path, rows: &[OnlineRow<'_>], dim: usize) -> Result<()> {
    let body = rows
        .iter()
        .map(|r| with_mu(r.mu, [num(r.delta), r.epochs.to_string(), num(r.t_online)]))
        .collect();
    write_rows(path, header(dim, &["delta", "epochs", "t_online_s"]), body)
}

pub fn write_coefficients(path: &Path, c: &[f64]) -> Result<()> {
    let rows = c
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), num(*v)])
        .collect();
    write_rows(path, vec!["neuron".into(), "c".into()], rows)
}

pub fn write_prediction(path: &Path, points: &[Point], values: &[f64]) -> Result<()> {
    let rows = points
        .iter()
        .zip(values)
        .map(|(p, u)| vec![num(p[0]), num(p[1]), num(*u)])
        .collect();
    write_rows(path, vec!["x".into(), "t".into(), "u".into()], rows)
}

pub fn write_test_errors(path: &Path, report: &ErrorReport, dim: usize) -> Result<()> {
    let rows = report
        .rows
        .iter()
        .map(|r| {
            with_mu(
                &r.mu,
                [num(r.rel_l2), num(r.max_abs), num(r.delta), num(r.t_online)],
            )
        })
        .collect();
    write_rows(
        path,
        header(dim, &["rel_l2", "max_abs", "delta", "t_online_s"]),
        rows,
    )
}

pub fn write_timing(path: &Path, curve: &TimingCurve) -> Result<()> {
    let rows = curve
        .full_cum
        .iter()
        .zip(&curve.gpt_cum)
        .enumerate()
        .map(|(k, (f, g))| vec![(k + 1).to_string(), num(*f), num(*g)])
        .collect();
    write_rows(
        path,
        vec!["q".into(), "full_cum_s".into(), "gpt_cum_s".into()],
        rows,
    )
}

pub fn write_svd(path: &Path, reports: &[&SvdReport]) -> Result<()> {
    let rows = reports
        .iter()
        .flat_map(|r| {
            r.ratios
                .iter()
                .enumerate()
                .map(|(k, v)| vec![(k + 1).to_string(), num(*v), r.label.clone()])
        })
        .collect();
    write_rows(
        path,
        vec!["k".into(), "sigma_ratio".into(), "label".into()],
        rows,
    )
}

/// Parameters from a CSV file, one per row; a non-numeric first row is
/// treated as a header.
pub fn read_parameters(path: &Path) -> Result<Vec<ParameterPoint>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => out.push(ParameterPoint::new(v)),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Config(format!(
                    "{}: row {} is not numeric",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{}: no parameters", path.display())));
    }
    Ok(out)
}

/// Contents of `run_meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub command: String,
    pub config_hash: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    /// Departures from the reference method that affect results.
    pub deviations: Vec<String>,
    pub version: String,
}

impl RunMeta {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            config_hash: None,
            seeds: BTreeMap::new(),
            deviations: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join("run_meta.json"), text + "\n")?;
        Ok(())
    }
}
