//! Run configuration files (TOML).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collocation::{sample_collocation, CollocationCounts, CollocationSet};
use crate::eval::EvalGrid;
use crate::filter::{stiff_filter, FilterRef};
use crate::gpt::OnlineConfig;
use crate::greedy::GreedyConfig;
use crate::mlp::Activation;
use crate::pde::{lookup, ParameterDomain, ParameterPoint, PdeRef};
use crate::pinn::{LrDecay, TrainConfig};
use crate::reference::FdConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub family: String,
    /// Parameter box; the family default if absent.
    pub domain: Option<Vec<[f64; 2]>>,
    /// Final time; the family default if absent.
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsSection {
    pub interior: usize,
    pub boundary: usize,
    pub initial: usize,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_strategy() -> String {
    "uniform-random".to_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollocationSection {
    pub interior: usize,
    pub boundary: usize,
    pub initial: usize,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default)]
    pub seed: u64,
    /// Stiff-point filter for the reduced sets: `formula`, `quantile` or
    /// `none`. Families that need it default to `formula`.
    pub filter: Option<String>,
    /// Independent reduced sets; the full sets if absent.
    pub reduced: Option<PointsSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullPinnSection {
    pub dims: Vec<usize>,
    pub activation: String,
    pub lr: f64,
    pub epochs: usize,
    pub stop_loss: Option<f64>,
    #[serde(default)]
    pub sa_enabled: bool,
    #[serde(default = "default_sa_lr")]
    pub sa_lr: f64,
    #[serde(default = "default_sa_init")]
    pub sa_init: f64,
    pub decay_after: Option<usize>,
    pub decay_factor: Option<f64>,
    #[serde(default = "default_history_every")]
    pub history_every: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_sa_lr() -> f64 {
    5e-3
}

fn default_sa_init() -> f64 {
    1.0
}

fn default_history_every() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineSection {
    pub lr: f64,
    pub epochs: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
}

fn default_optimizer() -> String {
    "plain-gd".to_owned()
}

/// The greedy training set: a tensor grid, explicit points, or a CSV file
/// with one parameter per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum XiSpec {
    Grid(Vec<usize>),
    Points(Vec<Vec<f64>>),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedySection {
    pub xi: XiSpec,
    pub mu1: Option<Vec<f64>>,
    pub n_max: usize,
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub final_scan: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_test_count")]
    pub test_count: usize,
    #[serde(default = "default_grid")]
    pub grid: [usize; 2],
    #[serde(default)]
    pub seed: u64,
    /// `pinn` (trained full PINNs) or `fd` (finite differences).
    #[serde(default = "default_reference")]
    pub reference: String,
    pub cache_dir: Option<PathBuf>,
}

fn default_test_count() -> usize {
    20
}

fn default_grid() -> [usize; 2] {
    [101, 101]
}

fn default_reference() -> String {
    "pinn".to_owned()
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            test_count: default_test_count(),
            grid: default_grid(),
            seed: 0,
            reference: default_reference(),
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    #[serde(default = "default_queries")]
    pub queries: usize,
    #[serde(default = "default_full_samples")]
    pub full_samples: usize,
    #[serde(default = "default_true")]
    pub single_threaded: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_queries() -> usize {
    20
}

fn default_full_samples() -> usize {
    2
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            queries: default_queries(),
            full_samples: default_full_samples(),
            single_threaded: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvdSection {
    #[serde(default = "default_svd_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Epochs of the short trainings that produce the parameter snapshots.
    #[serde(default = "default_svd_epochs")]
    pub epochs: usize,
    #[serde(default = "default_fd_nx")]
    pub fd_nx: usize,
    #[serde(default = "default_fd_nt")]
    pub fd_nt: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_svd_count() -> usize {
    50
}

fn default_svd_epochs() -> usize {
    1000
}

fn default_fd_nx() -> usize {
    201
}

fn default_fd_nt() -> usize {
    101
}

fn default_stride() -> usize {
    2
}

impl Default for SvdSection {
    fn default() -> Self {
        Self {
            count: default_svd_count(),
            seed: 0,
            epochs: default_svd_epochs(),
            fd_nx: default_fd_nx(),
            fd_nt: default_fd_nt(),
            stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pde: PdeSection,
    pub collocation: CollocationSection,
    pub full_pinn: FullPinnSection,
    pub online: OnlineSection,
    pub greedy: Option<GreedySection>,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub svd: SvdSection,
    pub output: Option<OutputSection>,
}

impl RunConfig {
    /// Parse and validate a configuration; relative paths are resolved
    /// against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(XiSpec::File(p)) = cfg.greedy.as_mut().map(|g| &mut g.xi) {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        if let Some(d) = cfg.eval.cache_dir.as_mut().filter(|d| d.is_relative()) {
            *d = base_dir.join(&*d);
        }
        if let Some(o) = cfg.output.as_mut().filter(|o| o.dir.is_relative()) {
            o.dir = base_dir.join(&o.dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        let pde = self.pde_family()?;
        self.domain()?;
        let h = self.horizon()?;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Config(format!("horizon must be positive, got {h}")));
        }
        self.train_config()?.validate()?;
        self.online_config().validate()?;
        self.filter()?;
        if let Some(g) = &self.greedy {
            if let XiSpec::File(p) = &g.xi {
                if !p.exists() {
                    return Err(Error::Config(format!(
                        "training set file {} does not exist",
                        p.display()
                    )));
                }
            }
            if g.n_max == 0 {
                return Err(Error::Config("n_max must be at least 1".into()));
            }
            let xi = self.training_set()?;
            if let Some(bad) = xi.iter().find(|m| m.dim() != pde.param_names().len()) {
                return Err(Error::Config(format!(
                    "training parameter {bad} has the wrong dimension"
                )));
            }
        }
        if !matches!(self.eval.reference.as_str(), "pinn" | "fd") {
            return Err(Error::Unknown {
                kind: "reference source",
                name: self.eval.reference.clone(),
            });
        }
        Ok(())
    }

    pub fn pde_family(&self) -> Result<PdeRef> {
        lookup(&self.pde.family)
    }

    pub fn domain(&self) -> Result<ParameterDomain> {
        let pde = self.pde_family()?;
        match &self.pde.domain {
            Some(b) => {
                let d = ParameterDomain::new(b.clone())?;
                if d.dim() != pde.param_names().len() {
                    return Err(Error::Config(format!(
                        "{} takes {} parameters, domain has {}",
                        pde.name(),
                        pde.param_names().len(),
                        d.dim()
                    )));
                }
                Ok(d)
            }
            None => Ok(pde.default_domain()),
        }
    }

    pub fn horizon(&self) -> Result<f64> {
        Ok(self
            .pde
            .horizon
            .unwrap_or(self.pde_family()?.default_horizon()))
    }

    pub fn collocation(&self) -> Result<Arc<CollocationSet>> {
        let c = &self.collocation;
        let pde = self.pde_family()?;
        Ok(Arc::new(sample_collocation(
            pde.space_interval(),
            self.horizon()?,
            CollocationCounts {
                interior: c.interior,
                boundary: c.boundary,
                initial: c.initial,
            },
            &c.strategy,
            c.seed,
        )?))
    }

    pub fn reduced_collocation(&self) -> Result<Option<Arc<CollocationSet>>> {
        let Some(r) = &self.collocation.reduced else {
            return Ok(None);
        };
        let pde = self.pde_family()?;
        Ok(Some(Arc::new(sample_collocation(
            pde.space_interval(),
            self.horizon()?,
            CollocationCounts {
                interior: r.interior,
                boundary: r.boundary,
                initial: r.initial,
            },
            &r.strategy,
            r.seed,
        )?)))
    }

    /// The stiff-point filter for the reduced sets, if any.
    pub fn filter(&self) -> Result<Option<FilterRef>> {
        let name = match &self.collocation.filter {
            Some(n) => n.clone(),
            None if self.pde_family()?.filters_stiff_points() => "formula".to_owned(),
            None => "none".to_owned(),
        };
        if name == "none" {
            return Ok(None);
        }
        stiff_filter(&name).map(Some)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let f = &self.full_pinn;
        let lr_decay = match (f.decay_after, f.decay_factor) {
            (Some(after), Some(factor)) => Some(LrDecay { after, factor }),
            (None, None) => None,
            _ => {
                return Err(Error::Config(
                    "decay_after and decay_factor must be given together".into(),
                ))
            }
        };
        let cfg = TrainConfig {
            dims: f.dims.clone(),
            activation: Activation::from_name(&f.activation)?,
            lr: f.lr,
            epochs: f.epochs,
            stop_loss: f.stop_loss,
            lr_decay,
            sa_enabled: f.sa_enabled,
            sa_lr: f.sa_lr,
            sa_init: f.sa_init,
            history_every: f.history_every,
        };
        Ok(cfg)
    }

    pub fn online_config(&self) -> OnlineConfig {
        OnlineConfig {
            lr: self.online.lr,
            epochs: self.online.epochs,
            optimizer: self.online.optimizer.clone(),
        }
    }

    pub fn training_set(&self) -> Result<Vec<ParameterPoint>> {
        let g = self
            .greedy
            .as_ref()
            .ok_or_else(|| Error::Config("missing [greedy] section".into()))?;
        match &g.xi {
            XiSpec::Grid(counts) => self.domain()?.grid(counts),
            XiSpec::Points(pts) => Ok(pts.iter().cloned().map(ParameterPoint::new).collect()),
            XiSpec::File(path) => crate::output::read_parameters(path),
        }
    }

    pub fn greedy_config(&self) -> Result<GreedyConfig> {
        let g = self
            .greedy
            .as_ref()
            .ok_or_else(|| Error::Config("missing [greedy] section".into()))?;
        Ok(GreedyConfig {
            xi: self.training_set()?,
            mu1: g.mu1.clone().map(ParameterPoint::new),
            n_max: g.n_max,
            tol: g.tol,
            train: self.train_config()?,
            online: self.online_config(),
            seed: g.seed,
            colloc: self.collocation()?,
            reduced: self.reduced_collocation()?,
            filter: self.filter()?,
            final_scan: g.final_scan,
        })
    }

    pub fn eval_grid(&self) -> Result<EvalGrid> {
        let pde = self.pde_family()?;
        Ok(EvalGrid::new(
            self.eval.grid[0],
            self.eval.grid[1],
            pde.space_interval(),
            self.horizon()?,
        ))
    }

    pub fn fd_config(&self) -> FdConfig {
        FdConfig {
            nx: self.svd.fd_nx,
            nt_out: self.svd.fd_nt,
            ..FdConfig::default()
        }
    }

    /// SHA-256 over the canonical form of every semantic field; the output
    /// directory is not part of it.
    pub fn hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.output = None;
        let json = serde_json::to_string(&semantic).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
