//! Single-file model archives.
//!
//! Layout: the 8 magic bytes `GPTPINN1`, a little-endian `u64` metadata
//! length, a UTF-8 JSON metadata document, then every array as consecutive
//! little-endian IEEE-754 `f64` values in the order listed by the metadata.
//! All floating-point data lives in the arrays so that it roundtrips bitwise
//! (including NaN and infinities).

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::collocation::CollocationSet;
use crate::filter::stiff_filter;
use crate::gpt::{BasisBlock, GptModel, PrecomputedBasis};
use crate::greedy::{GreedyHistory, RoundRecord};
use crate::mlp::{Activation, MlpParams, Point};
use crate::pde::{lookup, ParameterPoint, PdeFamily, PdeRef};
use crate::pinn::FullPinn;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GPTPINN1";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    version: u32,
    kind: String,
    pde: String,
    filter: Option<String>,
    collocs: Vec<CollocMeta>,
    base_colloc: usize,
    reduced_colloc: usize,
    neurons: Vec<NeuronMeta>,
    rounds: Vec<RoundMeta>,
    xi_len: usize,
    has_final_scan: bool,
    arrays: Vec<ArrayMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CollocMeta {
    strategy: String,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct NeuronMeta {
    dims: Vec<usize>,
    activation: Activation,
    epochs_run: usize,
    seed: u64,
    colloc: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RoundMeta {
    xi_index: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrayMeta {
    name: String,
    len: usize,
}

#[derive(Default)]
struct Writer {
    arrays: Vec<(String, Vec<f64>)>,
    collocs: Vec<Arc<CollocationSet>>,
}

fn flatten(points: &[Point]) -> Vec<f64> {
    points.iter().flat_map(|p| p.iter().copied()).collect()
}

impl Writer {
    fn push(&mut self, name: String, data: Vec<f64>) {
        self.arrays.push((name, data));
    }

    /// Index of a collocation set, storing it on first sight.
    fn colloc(&mut self, set: &Arc<CollocationSet>) -> usize {
        if let Some(i) = self
            .collocs
            .iter()
            .position(|c| Arc::ptr_eq(c, set) || **c == **set)
        {
            return i;
        }
        let i = self.collocs.len();
        self.push(format!("colloc.{i}.interior"), flatten(&set.interior));
        self.push(format!("colloc.{i}.boundary"), flatten(&set.boundary));
        self.push(format!("colloc.{i}.initial"), flatten(&set.initial));
        self.push(
            format!("colloc.{i}.domain"),
            vec![set.space[0], set.space[1], set.horizon],
        );
        self.collocs.push(set.clone());
        i
    }

    fn neuron(&mut self, i: usize, n: &FullPinn) -> NeuronMeta {
        let colloc = self.colloc(&n.colloc);
        self.push(format!("neuron.{i}.params"), n.params.as_slice().to_vec());
        self.push(format!("neuron.{i}.mu"), n.mu.as_slice().to_vec());
        self.push(
            format!("neuron.{i}.scalars"),
            vec![n.terminal_loss, n.wall_time],
        );
        self.push(
            format!("neuron.{i}.loss_history"),
            n.loss_history
                .iter()
                .flat_map(|&(e, l)| [e as f64, l])
                .collect(),
        );
        NeuronMeta {
            dims: n.params.dims().to_vec(),
            activation: n.params.activation(),
            epochs_run: n.epochs_run,
            seed: n.seed,
            colloc,
        }
    }

    fn finish(self, mut meta: Meta, path: &Path) -> Result<()> {
        meta.arrays = self
            .arrays
            .iter()
            .map(|(name, d)| ArrayMeta {
                name: name.clone(),
                len: d.len(),
            })
            .collect();
        let json = serde_json::to_vec(&meta).map_err(|e| Error::CorruptArchive(e.to_string()))?;
        let total: usize = self.arrays.iter().map(|(_, d)| d.len()).sum();
        let mut buf = Vec::with_capacity(16 + json.len() + 8 * total);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&json);
        for (_, d) in &self.arrays {
            for v in d {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }
}

fn empty_meta(kind: &str, pde: &str) -> Meta {
    Meta {
        version: VERSION,
        kind: kind.to_owned(),
        pde: pde.to_owned(),
        filter: None,
        collocs: Vec::new(),
        base_colloc: 0,
        reduced_colloc: 0,
        neurons: Vec::new(),
        rounds: Vec::new(),
        xi_len: 0,
        has_final_scan: false,
        arrays: Vec::new(),
    }
}

fn colloc_metas(w: &Writer) -> Vec<CollocMeta> {
    w.collocs
        .iter()
        .map(|c| CollocMeta {
            strategy: c.strategy.clone(),
            seed: c.seed,
        })
        .collect()
}

/// Write a meta-network with its neurons, snapshots and greedy history.
pub fn save_model(model: &GptModel, path: &Path) -> Result<()> {
    let mut w = Writer::default();
    let mut meta = empty_meta("model", model.pde().name());
    meta.filter = model.filter().map(|f| f.name().to_owned());
    meta.base_colloc = w.colloc(model.base_colloc());
    meta.reduced_colloc = w.colloc(model.reduced_colloc());
    for (i, n) in model.neurons().iter().enumerate() {
        let m = w.neuron(i, n);
        meta.neurons.push(m);
    }
    for (i, b) in model.basis().blocks.iter().enumerate() {
        for (s, col) in b.interior.iter().enumerate() {
            if let Some(col) = col {
                w.push(format!("basis.{i}.interior.{s}"), col.clone());
            }
        }
        w.push(format!("basis.{i}.boundary"), b.boundary.clone());
        w.push(format!("basis.{i}.initial"), b.initial.clone());
        if let Some(v) = &b.initial_velocity {
            w.push(format!("basis.{i}.velocity"), v.clone());
        }
    }
    let h = &model.history;
    meta.xi_len = h.xi.len();
    w.push(
        "xi".into(),
        h.xi.iter().flat_map(|m| m.as_slice().to_vec()).collect(),
    );
    for (k, r) in h.rounds.iter().enumerate() {
        meta.rounds.push(RoundMeta {
            xi_index: r.xi_index,
        });
        w.push(format!("round.{k}.mu"), r.mu.as_slice().to_vec());
        w.push(
            format!("round.{k}.scalars"),
            vec![r.max_indicator, r.t_full_train, r.t_scan],
        );
        w.push(format!("round.{k}.scan"), r.scan.clone());
    }
    if let Some(f) = &h.final_scan {
        meta.has_final_scan = true;
        w.push("final_scan".into(), f.clone());
    }
    meta.collocs = colloc_metas(&w);
    w.finish(meta, path)
}

/// Write one trained full PINN together with its collocation set.
pub fn save_pinn(pinn: &FullPinn, pde: &dyn PdeFamily, path: &Path) -> Result<()> {
    let mut w = Writer::default();
    let mut meta = empty_meta("pinn", pde.name());
    let m = w.neuron(0, pinn);
    meta.neurons.push(m);
    meta.collocs = colloc_metas(&w);
    w.finish(meta, path)
}

struct Reader {
    meta: Meta,
    arrays: HashMap<String, Vec<f64>>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptArchive(msg.into())
}

impl Reader {
    fn open(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::parse(&bytes)
    }

    fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(Error::NotAnArchive);
        }
        let len_bytes: [u8; 8] = bytes
            .get(8..16)
            .ok_or_else(|| corrupt("missing metadata length"))?
            .try_into()
            .unwrap();
        let meta_len = u64::from_le_bytes(len_bytes) as usize;
        let json = bytes
            .get(16..16usize.saturating_add(meta_len))
            .ok_or_else(|| corrupt("truncated metadata"))?;
        let value: serde_json::Value =
            serde_json::from_slice(json).map_err(|e| corrupt(format!("metadata: {e}")))?;
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| corrupt("metadata without version"))?;
        if version != VERSION as u64 {
            return Err(Error::UnsupportedVersion(version as u32));
        }
        let meta: Meta =
            serde_json::from_value(value).map_err(|e| corrupt(format!("metadata: {e}")))?;
        let mut offset = 16 + meta_len;
        let mut arrays = HashMap::new();
        for a in &meta.arrays {
            let end = a
                .len
                .checked_mul(8)
                .and_then(|n| n.checked_add(offset))
                .ok_or_else(|| corrupt("array size overflow"))?;
            let raw = bytes
                .get(offset..end)
                .ok_or_else(|| corrupt(format!("array `{}` truncated", a.name)))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.insert(a.name.clone(), data);
            offset = end;
        }
        if offset != bytes.len() {
            return Err(corrupt("trailing bytes after the last array"));
        }
        Ok(Self { meta, arrays })
    }

    fn take(&mut self, name: &str) -> Result<Vec<f64>> {
        self.arrays
            .remove(name)
            .ok_or_else(|| corrupt(format!("missing array `{name}`")))
    }

    fn points(&mut self, name: &str) -> Result<Vec<Point>> {
        let flat = self.take(name)?;
        if flat.len() % 2 != 0 {
            return Err(corrupt(format!("array `{name}` has odd length")));
        }
        Ok(flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    fn collocs(&mut self) -> Result<Vec<Arc<CollocationSet>>> {
        let metas: Vec<(String, u64)> = self
            .meta
            .collocs
            .iter()
            .map(|c| (c.strategy.clone(), c.seed))
            .collect();
        metas
            .into_iter()
            .enumerate()
            .map(|(i, (strategy, seed))| {
                let domain = self.take(&format!("colloc.{i}.domain"))?;
                if domain.len() != 3 {
                    return Err(corrupt("bad collocation domain"));
                }
                Ok(Arc::new(CollocationSet {
                    interior: self.points(&format!("colloc.{i}.interior"))?,
                    boundary: self.points(&format!("colloc.{i}.boundary"))?,
                    initial: self.points(&format!("colloc.{i}.initial"))?,
                    space: [domain[0], domain[1]],
                    horizon: domain[2],
                    strategy,
                    seed,
                }))
            })
            .collect()
    }

    fn neuron(&mut self, i: usize, collocs: &[Arc<CollocationSet>]) -> Result<FullPinn> {
        let m = &self.meta.neurons[i];
        let (dims, activation, epochs_run, seed, ci) =
            (m.dims.clone(), m.activation, m.epochs_run, m.seed, m.colloc);
        let colloc = collocs
            .get(ci)
            .cloned()
            .ok_or_else(|| corrupt("bad collocation index"))?;
        let params =
            MlpParams::from_flat(&dims, activation, self.take(&format!("neuron.{i}.params"))?)
                .map_err(|e| corrupt(e.to_string()))?;
        let mu = ParameterPoint::new(self.take(&format!("neuron.{i}.mu"))?);
        let scalars = self.take(&format!("neuron.{i}.scalars"))?;
        if scalars.len() != 2 {
            return Err(corrupt("bad neuron scalars"));
        }
        let hist = self.take(&format!("neuron.{i}.loss_history"))?;
        if hist.len() % 2 != 0 {
            return Err(corrupt("bad loss history"));
        }
        Ok(FullPinn {
            mu,
            params,
            colloc,
            terminal_loss: scalars[0],
            epochs_run,
            wall_time: scalars[1],
            seed,
            loss_history: hist
                .chunks_exact(2)
                .map(|c| (c[0] as usize, c[1]))
                .collect(),
        })
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.meta.kind != kind {
            return Err(corrupt(format!(
                "expected a `{kind}` archive, found `{}`",
                self.meta.kind
            )));
        }
        Ok(())
    }
}

/// Read a meta-network written by [`save_model`].
pub fn load_model(path: &Path) -> Result<GptModel> {
    let mut r = Reader::open(path)?;
    r.expect_kind("model")?;
    let pde: PdeRef = lookup(&r.meta.pde).map_err(|e| corrupt(e.to_string()))?;
    let filter = match &r.meta.filter {
        Some(name) => Some(stiff_filter(name).map_err(|e| corrupt(e.to_string()))?),
        None => None,
    };
    let collocs = r.collocs()?;
    let get = |i: usize| {
        collocs
            .get(i)
            .cloned()
            .ok_or_else(|| corrupt("bad collocation index"))
    };
    let base = get(r.meta.base_colloc)?;
    let reduced = get(r.meta.reduced_colloc)?;
    let neurons = (0..r.meta.neurons.len())
        .map(|i| r.neuron(i, &collocs))
        .collect::<Result<Vec<_>>>()?;

    let mut blocks = Vec::with_capacity(neurons.len());
    for i in 0..neurons.len() {
        let mut interior: [Option<Vec<f64>>; 5] = Default::default();
        for (s, slot) in interior.iter_mut().enumerate() {
            *slot = r.arrays.remove(&format!("basis.{i}.interior.{s}"));
        }
        blocks.push(BasisBlock {
            interior,
            boundary: r.take(&format!("basis.{i}.boundary"))?,
            initial: r.take(&format!("basis.{i}.initial"))?,
            initial_velocity: r.arrays.remove(&format!("basis.{i}.velocity")),
        });
    }

    let dim = pde.param_names().len();
    let xi_flat = r.take("xi")?;
    if xi_flat.len() != r.meta.xi_len * dim {
        return Err(corrupt("training set size mismatch"));
    }
    let xi: Vec<ParameterPoint> = xi_flat
        .chunks(dim.max(1))
        .map(|c| ParameterPoint::new(c.to_vec()))
        .collect();
    let mut rounds = Vec::new();
    for k in 0..r.meta.rounds.len() {
        let xi_index = r.meta.rounds[k].xi_index;
        let s = r.take(&format!("round.{k}.scalars"))?;
        if s.len() != 3 {
            return Err(corrupt("bad round scalars"));
        }
        rounds.push(RoundRecord {
            mu: ParameterPoint::new(r.take(&format!("round.{k}.mu"))?),
            xi_index,
            max_indicator: s[0],
            scan: r.take(&format!("round.{k}.scan"))?,
            t_full_train: s[1],
            t_scan: s[2],
        });
    }
    let final_scan = if r.meta.has_final_scan {
        Some(r.take("final_scan")?)
    } else {
        None
    };
    let history = GreedyHistory {
        xi,
        rounds,
        final_scan,
    };
    GptModel::from_parts(
        pde,
        neurons,
        PrecomputedBasis {
            colloc: reduced,
            blocks,
        },
        base,
        filter,
        history,
    )
    .map_err(|e| corrupt(e.to_string()))
}

/// Read a full PINN written by [`save_pinn`].
pub fn load_pinn(path: &Path) -> Result<(FullPinn, PdeRef)> {
    let mut r = Reader::open(path)?;
    r.expect_kind("pinn")?;
    let pde = lookup(&r.meta.pde).map_err(|e| corrupt(e.to_string()))?;
    if r.meta.neurons.len() != 1 {
        return Err(corrupt("a PINN archive holds exactly one network"));
    }
    let collocs = r.collocs()?;
    Ok((r.neuron(0, &collocs)?, pde))
}
