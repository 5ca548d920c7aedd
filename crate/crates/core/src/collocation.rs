//! Collocation point sets and the samplers that produce them.

use std::fmt;
use std::sync::Arc;

use rand::distributions::{Distribution, Open01};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mlp::Point;
use crate::{Error, Result};

/// Requested sizes of `C_o`, `C_∂` and `C_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollocationCounts {
    pub interior: usize,
    pub boundary: usize,
    pub initial: usize,
}

/// Interior points in `Ω × (0, T)`, boundary points on `∂Ω × [0, T]` and
/// initial points `(x, 0)` with `x ∈ Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub interior: Vec<Point>,
    pub boundary: Vec<Point>,
    pub initial: Vec<Point>,
    pub space: [f64; 2],
    pub horizon: f64,
    pub strategy: String,
    pub seed: u64,
}

impl CollocationSet {
    pub fn counts(&self) -> CollocationCounts {
        CollocationCounts {
            interior: self.interior.len(),
            boundary: self.boundary.len(),
            initial: self.initial.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty() && self.boundary.is_empty() && self.initial.is_empty()
    }

    /// Checks region membership of every point.
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.space;
        let t_end = self.horizon;
        let bad = |msg: &str, p: &Point| {
            Err(Error::Config(format!(
                "{msg} point ({}, {}) outside its region",
                p[0], p[1]
            )))
        };
        for p in &self.interior {
            if !(p[0] >= lo && p[0] <= hi && p[1] > 0.0 && p[1] < t_end) {
                return bad("interior", p);
            }
        }
        for p in &self.boundary {
            if !((p[0] == lo || p[0] == hi) && p[1] >= 0.0 && p[1] <= t_end) {
                return bad("boundary", p);
            }
        }
        for p in &self.initial {
            if !(p[0] >= lo && p[0] <= hi && p[1] == 0.0) {
                return bad("initial", p);
            }
        }
        Ok(())
    }

    /// Keep only the listed indices of each subset.
    pub fn subset(&self, keep: &KeptIndices) -> Self {
        let pick = |pts: &[Point], idx: &[usize]| idx.iter().map(|&i| pts[i]).collect();
        Self {
            interior: pick(&self.interior, &keep.interior),
            boundary: pick(&self.boundary, &keep.boundary),
            initial: pick(&self.initial, &keep.initial),
            space: self.space,
            horizon: self.horizon,
            strategy: self.strategy.clone(),
            seed: self.seed,
        }
    }
}

/// Index lists into the three subsets of a [`CollocationSet`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeptIndices {
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    pub initial: Vec<usize>,
}

impl KeptIndices {
    pub fn all(set: &CollocationSet) -> Self {
        Self {
            interior: (0..set.interior.len()).collect(),
            boundary: (0..set.boundary.len()).collect(),
            initial: (0..set.initial.len()).collect(),
        }
    }
}

/// A point-placement strategy over an axis-aligned box.
pub trait Sampler: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// `n` points strictly inside `bounds`.
    fn sample(&self, n: usize, bounds: &[[f64; 2]], rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>>;
}

fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    Open01.sample(rng)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformRandom;

impl Sampler for UniformRandom {
    fn name(&self) -> &'static str {
        "uniform-random"
    }

    fn sample(&self, n: usize, bounds: &[[f64; 2]], rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        Ok((0..n)
            .map(|_| {
                bounds
                    .iter()
                    .map(|b| b[0] + (b[1] - b[0]) * open_uniform(rng))
                    .collect()
            })
            .collect())
    }
}

/// Cell-centred tensor grid. In `d > 1` dimensions `n` must be a perfect
/// `d`-th power.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformGrid;

fn integer_root(n: usize, d: usize) -> Option<usize> {
    let guess = (n as f64).powf(1.0 / d as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&m| m.checked_pow(d as u32) == Some(n))
}

impl Sampler for UniformGrid {
    fn name(&self) -> &'static str {
        "uniform-grid"
    }

    fn sample(
        &self,
        n: usize,
        bounds: &[[f64; 2]],
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Vec<f64>>> {
        let d = bounds.len();
        let m = integer_root(n, d).ok_or(Error::NonFactorableCount(n))?;
        let mut out = Vec::with_capacity(n);
        for flat in 0..n {
            let mut rem = flat;
            let mut p = vec![0.0; d];
            for j in (0..d).rev() {
                let i = rem % m;
                rem /= m;
                let b = bounds[j];
                p[j] = b[0] + (b[1] - b[0]) * (i as f64 + 0.5) / m as f64;
            }
            out.push(p);
        }
        Ok(out)
    }
}

/// Latin hypercube: each axis is cut into `n` equal strata, each holding
/// exactly one sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct LatinHypercube;

impl Sampler for LatinHypercube {
    fn name(&self) -> &'static str {
        "latin-hypercube"
    }

    fn sample(&self, n: usize, bounds: &[[f64; 2]], rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        let d = bounds.len();
        let mut out = vec![vec![0.0; d]; n];
        for (j, b) in bounds.iter().enumerate() {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            for (i, p) in out.iter_mut().enumerate() {
                let u = (perm[i] as f64 + open_uniform(rng)) / n as f64;
                p[j] = b[0] + (b[1] - b[0]) * u;
            }
        }
        Ok(out)
    }
}

pub type SamplerRef = Arc<dyn Sampler>;

type SamplerFactory = fn() -> SamplerRef;

const SAMPLERS: &[(&str, SamplerFactory)] = &[
    ("uniform-random", || Arc::new(UniformRandom)),
    ("uniform-grid", || Arc::new(UniformGrid)),
    ("latin-hypercube", || Arc::new(LatinHypercube)),
];

pub fn sampler_names() -> Vec<&'static str> {
    SAMPLERS.iter().map(|(n, _)| *n).collect()
}

pub fn sampler(name: &str) -> Result<SamplerRef> {
    let key = if name == "lhs" {
        "latin-hypercube"
    } else {
        name
    };
    SAMPLERS
        .iter()
        .find(|(n, _)| *n == key)
        .map(|(_, f)| f())
        .ok_or_else(|| Error::Unknown {
            kind: "sampling strategy",
            name: name.to_owned(),
        })
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Sample `C_o`, `C_∂` and `C_i` over `space × [0, horizon]`.
///
/// Boundary points are split between the two endpoints of `space` (the left
/// end receives the extra point when the count is odd); their times follow the
/// strategy in one dimension. Deterministic in `seed`.
pub fn sample_collocation(
    space: [f64; 2],
    horizon: f64,
    counts: CollocationCounts,
    strategy: &str,
    seed: u64,
) -> Result<CollocationSet> {
    if counts.interior == 0 || counts.boundary == 0 || counts.initial == 0 {
        return Err(Error::Config("collocation counts must be positive".into()));
    }
    if !(horizon > 0.0) || !(space[0] < space[1]) {
        return Err(Error::Config("degenerate space-time domain".into()));
    }
    let s = sampler(strategy)?;
    let mut rng = stream(seed, 0);
    let interior = s
        .sample(counts.interior, &[space, [0.0, horizon]], &mut rng)?
        .into_iter()
        .map(|p| [p[0], p[1]])
        .collect();

    let left = counts.boundary - counts.boundary / 2;
    let right = counts.boundary / 2;
    let mut rng = stream(seed, 1);
    let mut boundary: Vec<Point> = s
        .sample(left, &[[0.0, horizon]], &mut rng)?
        .into_iter()
        .map(|p| [space[0], p[0]])
        .collect();
    if right > 0 {
        boundary.extend(
            s.sample(right, &[[0.0, horizon]], &mut rng)?
                .into_iter()
                .map(|p| [space[1], p[0]]),
        );
    }

    let mut rng = stream(seed, 2);
    let initial = s
        .sample(counts.initial, &[space], &mut rng)?
        .into_iter()
        .map(|p| [p[0], 0.0])
        .collect();

    let set = CollocationSet {
        interior,
        boundary,
        initial,
        space,
        horizon,
        strategy: s.name().to_owned(),
        seed,
    };
    set.validate()?;
    Ok(set)
}

/// Draw `n` uniform parameters from a box (used for test sets).
pub fn uniform_in_box(bounds: &[[f64; 2]], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, 7);
    (0..n)
        .map(|_| bounds.iter().map(|b| rng.gen_range(b[0]..=b[1])).collect())
        .collect()
}
