//! Test-set errors, cost accounting and the singular-value diagnostic.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use log::warn;
use nalgebra::DMatrix;

use crate::collocation::{uniform_in_box, CollocationSet};
use crate::gpt::{online_train, GptModel, OnlineConfig};
use crate::mlp::Point;
use crate::pde::{linspace, ParameterDomain, ParameterPoint, PdeFamily};
use crate::pinn::{train_pinn, TrainConfig};
use crate::reference::{solve_reference, FdConfig};
use crate::{Error, Result};

/// `(‖gpt − ref‖₂ / ‖ref‖₂, max |gpt − ref|)`.
pub fn error_metrics(gpt: &[f64], reference: &[f64]) -> Result<(f64, f64)> {
    if gpt.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            expected: reference.len(),
            actual: gpt.len(),
        });
    }
    let ref_norm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(ref_norm > 0.0) {
        return Err(Error::DegenerateReference);
    }
    let mut diff = 0.0;
    let mut max_abs: f64 = 0.0;
    for (g, r) in gpt.iter().zip(reference) {
        let d = g - r;
        diff += d * d;
        max_abs = max_abs.max(d.abs());
    }
    Ok((diff.sqrt() / ref_norm, max_abs))
}

/// Uniform tensor grid over `Ω × [0, T]`, `x` fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalGrid {
    pub nx: usize,
    pub nt: usize,
    pub space: [f64; 2],
    pub horizon: f64,
}

impl EvalGrid {
    pub fn new(nx: usize, nt: usize, space: [f64; 2], horizon: f64) -> Self {
        Self {
            nx,
            nt,
            space,
            horizon,
        }
    }

    /// The 101 × 101 default for a family.
    pub fn default_for(pde: &dyn PdeFamily) -> Self {
        Self::new(101, 101, pde.space_interval(), pde.default_horizon())
    }

    pub fn points(&self) -> Vec<Point> {
        let xs = linspace(self.space[0], self.space[1], self.nx);
        let ts = linspace(0.0, self.horizon, self.nt);
        ts.iter()
            .flat_map(|&t| xs.iter().map(move |&x| [x, t]))
            .collect()
    }
}

/// Where reference solutions at test parameters come from.
pub trait ReferenceSource: Send + Sync {
    fn name(&self) -> &'static str;

    /// Reference values at `points`, or `None` when unavailable.
    fn values(
        &self,
        pde: &dyn PdeFamily,
        mu: &ParameterPoint,
        points: &[Point],
    ) -> Result<Option<Vec<f64>>>;
}

/// A closed-form solution valid for every parameter.
pub struct ExactReference<F>(pub F);

impl<F> ReferenceSource for ExactReference<F>
where
    F: Fn(&ParameterPoint, Point) -> f64 + Send + Sync,
{
    fn name(&self) -> &'static str {
        "exact"
    }

    fn values(
        &self,
        _pde: &dyn PdeFamily,
        mu: &ParameterPoint,
        points: &[Point],
    ) -> Result<Option<Vec<f64>>> {
        Ok(Some(points.iter().map(|&p| (self.0)(mu, p)).collect()))
    }
}

/// Finite-difference solutions, interpolated to the points.
pub struct FdReference {
    pub config: FdConfig,
    pub horizon: f64,
}

impl ReferenceSource for FdReference {
    fn name(&self) -> &'static str {
        "fd"
    }

    fn values(
        &self,
        pde: &dyn PdeFamily,
        mu: &ParameterPoint,
        points: &[Point],
    ) -> Result<Option<Vec<f64>>> {
        let s = solve_reference(pde, mu, self.horizon, &self.config)?;
        Ok(Some(points.iter().map(|p| s.at(p[0], p[1])).collect()))
    }
}

/// Freshly trained full PINNs, optionally cached as archives in a directory.
pub struct PinnReference {
    pub train: TrainConfig,
    pub colloc: Arc<CollocationSet>,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
    /// Only read the cache; a missing entry is reported as unavailable.
    pub cache_only: bool,
}

impl PinnReference {
    fn cache_path(&self, mu: &ParameterPoint) -> Option<PathBuf> {
        let key: Vec<String> = mu
            .as_slice()
            .iter()
            .map(|v| format!("{:016x}", v.to_bits()))
            .collect();
        self.cache_dir
            .as_ref()
            .map(|d| d.join(format!("ref_{}.gptpinn", key.join("_"))))
    }
}

impl ReferenceSource for PinnReference {
    fn name(&self) -> &'static str {
        "pinn"
    }

    fn values(
        &self,
        pde: &dyn PdeFamily,
        mu: &ParameterPoint,
        points: &[Point],
    ) -> Result<Option<Vec<f64>>> {
        let path = self.cache_path(mu);
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            let (pinn, _) = crate::archive::load_pinn(p)?;
            return Ok(Some(pinn.params.forward_many(points)));
        }
        if self.cache_only {
            return Ok(None);
        }
        let pinn = train_pinn(pde, mu, self.colloc.clone(), &self.train, self.seed)?;
        if let Some(p) = path {
            crate::archive::save_pinn(&pinn, pde, &p)?;
        }
        Ok(Some(pinn.params.forward_many(points)))
    }
}

/// Precomputed reference values keyed by parameter bits.
#[derive(Default)]
pub struct TableReference {
    table: BTreeMap<Vec<u64>, Vec<f64>>,
}

impl TableReference {
    pub fn insert(&mut self, mu: &ParameterPoint, values: Vec<f64>) {
        self.table.insert(Self::key(mu), values);
    }

    fn key(mu: &ParameterPoint) -> Vec<u64> {
        mu.as_slice().iter().map(|v| v.to_bits()).collect()
    }
}

impl ReferenceSource for TableReference {
    fn name(&self) -> &'static str {
        "table"
    }

    fn values(
        &self,
        _pde: &dyn PdeFamily,
        mu: &ParameterPoint,
        points: &[Point],
    ) -> Result<Option<Vec<f64>>> {
        Ok(self
            .table
            .get(&Self::key(mu))
            .filter(|v| v.len() == points.len())
            .cloned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub mu: ParameterPoint,
    pub rel_l2: f64,
    pub max_abs: f64,
    pub delta: f64,
    pub t_online: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    /// Test parameters without a reference.
    pub skipped: Vec<ParameterPoint>,
    pub grid: EvalGrid,
}

impl ErrorReport {
    pub fn worst_rel_l2(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_l2).fold(0.0, f64::max)
    }

    pub fn worst_max_abs(&self) -> f64 {
        self.rows.iter().map(|r| r.max_abs).fold(0.0, f64::max)
    }
}

/// Online solve at every test parameter and comparison with the reference
/// on the grid. `online = None` uses the interpolated start coefficients as
/// they are.
pub fn evaluate_test_set(
    model: &GptModel,
    test_params: &[ParameterPoint],
    reference: &dyn ReferenceSource,
    grid: &EvalGrid,
    online: Option<&OnlineConfig>,
) -> Result<ErrorReport> {
    let sampled = model.mus();
    let points = grid.points();
    let pde = model.pde().as_ref();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for mu in test_params {
        if sampled.iter().any(|s| s.same_bits(mu)) {
            warn!("test parameter {mu} is also a sampled parameter");
        }
        let Some(ref_values) = reference.values(pde, mu, &points)? else {
            warn!("no {} reference for {mu}; skipped", reference.name());
            skipped.push(mu.clone());
            continue;
        };
        let c0 = model.init_coeffs(mu);
        let (c, delta, t_online) = match online {
            Some(cfg) => {
                let r = online_train(model, mu, &c0, cfg)?;
                (r.c, r.delta, r.wall_time)
            }
            None => {
                let d = model.gpt_loss(&c0, mu)?;
                (c0, d, 0.0)
            }
        };
        let pred = model.predict(&c, &points)?;
        let (rel_l2, max_abs) = error_metrics(&pred, &ref_values)?;
        rows.push(ErrorRow {
            mu: mu.clone(),
            rel_l2,
            max_abs,
            delta,
            t_online,
        });
    }
    Ok(ErrorReport {
        rows,
        skipped,
        grid: *grid,
    })
}

/// Seeded uniform draws from the domain, skipping the given parameters.
pub fn draw_test_params(
    domain: &ParameterDomain,
    n: usize,
    seed: u64,
    exclude: &[ParameterPoint],
) -> Vec<ParameterPoint> {
    let mut out = Vec::with_capacity(n);
    let mut round = 0u64;
    while out.len() < n {
        for v in uniform_in_box(domain.bounds(), n, seed.wrapping_add(round)) {
            let mu = ParameterPoint::new(v);
            if out.len() < n && !exclude.iter().any(|e| e.same_bits(&mu)) {
                out.push(mu);
            }
        }
        round += 1;
    }
    out
}

/// Cumulative cost of answering `q = 1, 2, …` queries.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingCurve {
    pub full_cum: Vec<f64>,
    pub gpt_cum: Vec<f64>,
    pub offline: f64,
    /// Mean measured time of one full-PINN training.
    pub t_full: f64,
    /// Mean measured time of one online solve.
    pub t_gpt: f64,
    pub full_samples: usize,
}

impl TimingCurve {
    /// Curves `q t_full` and `offline + q t_gpt` for `queries` queries.
    pub fn from_costs(
        offline: f64,
        t_full: f64,
        t_gpt: f64,
        queries: usize,
        full_samples: usize,
    ) -> Self {
        let q = |k: usize| (k + 1) as f64;
        Self {
            full_cum: (0..queries).map(|k| q(k) * t_full).collect(),
            gpt_cum: (0..queries).map(|k| offline + q(k) * t_gpt).collect(),
            offline,
            t_full,
            t_gpt,
            full_samples,
        }
    }

    pub fn marginal_ratio(&self) -> f64 {
        self.t_gpt / self.t_full
    }

    fn pays_off(&self, q: usize) -> bool {
        self.offline + q as f64 * self.t_gpt <= q as f64 * self.t_full
    }

    /// Smallest query count from which the meta-network is cheaper overall,
    /// possibly beyond the measured queries.
    pub fn breakeven(&self) -> Option<usize> {
        if !(self.t_gpt < self.t_full) {
            return None;
        }
        let est = (self.offline / (self.t_full - self.t_gpt)).ceil().max(1.0);
        if !est.is_finite() || est > 1e15 {
            return None;
        }
        let mut q = est as usize;
        while q > 1 && self.pays_off(q - 1) {
            q -= 1;
        }
        while !self.pays_off(q) {
            q += 1;
        }
        Some(q)
    }
}

/// Sum of full-PINN training and scan times recorded in the model history.
pub fn offline_cost(model: &GptModel) -> f64 {
    model
        .history
        .rounds
        .iter()
        .map(|r| r.t_full_train + r.t_scan)
        .sum()
}

/// Settings of [`timing_benchmark`].
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub train: TrainConfig,
    pub colloc: Arc<CollocationSet>,
    pub online: OnlineConfig,
    /// Full trainings actually timed (the first queries).
    pub full_samples: usize,
    pub seed: u64,
    pub single_threaded: bool,
}

/// Measure per-query costs of both routes and build the cumulative curves.
pub fn timing_benchmark(
    model: &GptModel,
    queries: &[ParameterPoint],
    config: &BenchConfig,
) -> Result<TimingCurve> {
    if queries.is_empty() {
        return Err(Error::Config("timing needs at least one query".into()));
    }
    let run = || -> Result<TimingCurve> {
        let pde = model.pde().as_ref();
        let samples = config.full_samples.clamp(1, queries.len());
        let mut full = 0.0;
        for (k, mu) in queries[..samples].iter().enumerate() {
            let start = Instant::now();
            train_pinn(
                pde,
                mu,
                config.colloc.clone(),
                &config.train,
                config.seed.wrapping_add(k as u64),
            )?;
            full += start.elapsed().as_secs_f64();
        }
        let mut online = 0.0;
        for mu in queries {
            let start = Instant::now();
            let c0 = model.init_coeffs(mu);
            online_train(model, mu, &c0, &config.online)?;
            online += start.elapsed().as_secs_f64();
        }
        Ok(TimingCurve::from_costs(
            offline_cost(model),
            full / samples as f64,
            online / queries.len() as f64,
            queries.len(),
            samples,
        ))
    };
    if config.single_threaded {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run)
    } else {
        run()
    }
}

/// Normalized singular values `σ_k / σ_1` of a snapshot matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdReport {
    pub label: String,
    pub ratios: Vec<f64>,
}

impl SvdReport {
    /// `σ_k / σ_1` with 1-based `k`.
    pub fn ratio(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.ratios.get(i).copied())
    }
}

impl fmt::Display for SvdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} values, last {:e}",
            self.label,
            self.ratios.len(),
            self.ratios.last().unwrap_or(&f64::NAN)
        )
    }
}

/// Spectrum of the matrix whose columns are `columns`.
pub fn svd_decay_report(columns: &[Vec<f64>], label: &str) -> Result<SvdReport> {
    let rows = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::ShapeMismatch {
            expected: rows,
            actual: columns
                .iter()
                .map(Vec::len)
                .find(|&l| l != rows)
                .unwrap_or(0),
        });
    }
    if rows == 0 || columns.iter().all(|c| c.iter().all(|v| *v == 0.0)) {
        return Err(Error::ZeroMatrix);
    }
    let m = DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let top = s[0];
    Ok(SvdReport {
        label: label.to_owned(),
        ratios: s.iter().map(|v| v / top).collect(),
    })
}

/// Inputs of the snapshot experiment.
#[derive(Debug, Clone)]
pub struct SnapshotExperiment {
    pub params: Vec<ParameterPoint>,
    pub fd: FdConfig,
    pub horizon: f64,
    /// Every `stride`-th node of the reference grid in `x` and `t`.
    pub stride: usize,
    pub train: TrainConfig,
    pub colloc: Arc<CollocationSet>,
    pub seed: u64,
}

/// Spectra of the solution snapshots and of the trained network parameters
/// over the same parameters.
pub fn svd_snapshot_experiment(
    pde: &dyn PdeFamily,
    exp: &SnapshotExperiment,
) -> Result<(SvdReport, SvdReport)> {
    let stride = exp.stride.max(1);
    let mut solutions = Vec::with_capacity(exp.params.len());
    let mut thetas = Vec::with_capacity(exp.params.len());
    for (k, mu) in exp.params.iter().enumerate() {
        let s = solve_reference(pde, mu, exp.horizon, &exp.fd)?;
        let col: Vec<f64> = (0..s.t.len())
            .step_by(stride)
            .flat_map(|kt| {
                s.snapshot(kt)
                    .iter()
                    .step_by(stride)
                    .copied()
                    .collect::<Vec<_>>()
            })
            .collect();
        solutions.push(col);
        let pinn = train_pinn(
            pde,
            mu,
            exp.colloc.clone(),
            &exp.train,
            exp.seed.wrapping_add(k as u64),
        )?;
        thetas.push(pinn.params.as_slice().to_vec());
    }
    Ok((
        svd_decay_report(&solutions, "solution")?,
        svd_decay_report(&thetas, "theta")?,
    ))
}
