//! Parametric PDE families.
//!
//! Every family is a [`PdeFamily`] trait object registered by name; the rest
//! of the crate only talks to the trait, so families are selected at run time
//! from a config string (`kg`, `burgers`, `ac`).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mlp::{ExtendedState, Field};
use crate::{Error, Result};

mod allen_cahn;
mod burgers;
mod klein_gordon;

pub use allen_cahn::AllenCahn;
pub use burgers::Burgers;
pub use klein_gordon::KleinGordon;

/// Highest time derivative in the equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeOrder {
    First,
    Second,
}

/// A parameter value `μ` in `R^{d_s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterPoint(pub Vec<f64>);

impl ParameterPoint {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &ParameterPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Bitwise identity, used to exclude already-sampled parameters.
    pub fn same_bits(&self, other: &ParameterPoint) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Parse `"a,b,c"`.
    pub fn parse(text: &str) -> Result<Self> {
        let comps = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad parameter component `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self(comps))
    }
}

impl fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Axis-aligned box of admissible parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterDomain {
    bounds: Vec<[f64; 2]>,
}

impl ParameterDomain {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Config(
                "parameter domain needs at least one interval".into(),
            ));
        }
        for b in &bounds {
            if !(b[0] <= b[1]) || !b[0].is_finite() || !b[1].is_finite() {
                return Err(Error::Config(format!("bad interval [{}, {}]", b[0], b[1])));
            }
        }
        Ok(Self { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn contains(&self, mu: &ParameterPoint) -> bool {
        mu.dim() == self.dim()
            && mu
                .0
                .iter()
                .zip(&self.bounds)
                .all(|(v, b)| *v >= b[0] && *v <= b[1])
    }

    pub fn check(&self, mu: &ParameterPoint) -> Result<()> {
        if self.contains(mu) {
            Ok(())
        } else {
            Err(Error::OutsideDomain)
        }
    }

    /// Tensor grid with `counts[j]` equispaced values per axis (endpoints
    /// included), in lexicographic order with the last axis fastest.
    pub fn grid(&self, counts: &[usize]) -> Result<Vec<ParameterPoint>> {
        if counts.len() != self.dim() || counts.contains(&0) {
            return Err(Error::Config(format!(
                "grid counts {counts:?} do not fit a {}-dimensional domain",
                self.dim()
            )));
        }
        let axes: Vec<Vec<f64>> = counts
            .iter()
            .zip(&self.bounds)
            .map(|(&n, b)| linspace(b[0], b[1], n))
            .collect();
        let total: usize = counts.iter().product();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut comps = vec![0.0; counts.len()];
            for j in (0..counts.len()).rev() {
                comps[j] = axes[j][rem % counts[j]];
                rem /= counts[j];
            }
            out.push(ParameterPoint(comps));
        }
        Ok(out)
    }
}

/// `n` equispaced values on `[lo, hi]`; a single value sits at `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// One parametric family `∂_t^k u + F(u; μ) = 0` on `[-1, 1] × [0, T]` with
/// Dirichlet boundary data and initial data.
pub trait PdeFamily: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Names of the parameter components, in order.
    fn param_names(&self) -> &'static [&'static str];

    fn default_domain(&self) -> ParameterDomain;

    fn time_order(&self) -> TimeOrder;

    fn space_interval(&self) -> [f64; 2] {
        [-1.0, 1.0]
    }

    fn default_horizon(&self) -> f64;

    /// Interior residual at `(x, t)`.
    fn residual(&self, ext: &ExtendedState, x: f64, t: f64, mu: &[f64]) -> f64;

    /// Interior residual and its partials with respect to
    /// `(u, u_x, u_t, u_xx, u_tt)`.
    fn residual_partials(
        &self,
        ext: &ExtendedState,
        x: f64,
        t: f64,
        mu: &[f64],
    ) -> (f64, ExtendedState);

    /// Fields of the solution the interior residual reads.
    fn interior_fields(&self) -> &'static [Field];

    /// Dirichlet data `g(x, t)` on `x = ±1`.
    fn boundary_value(&self, x: f64, t: f64) -> f64;

    /// Initial data `u_0(x)`.
    fn initial_value(&self, x: f64) -> f64;

    /// Initial velocity `u_t(x, 0)`; present exactly for second-order-in-time
    /// families.
    fn initial_velocity(&self, _x: f64) -> Option<f64> {
        None
    }

    /// Whether the stiff-point filter is applied to reduced collocation sets
    /// by default.
    fn filters_stiff_points(&self) -> bool {
        false
    }
}

pub type PdeRef = Arc<dyn PdeFamily>;

type Factory = fn() -> PdeRef;

const REGISTRY: &[(&str, Factory)] = &[
    ("kg", || Arc::new(KleinGordon)),
    ("burgers", || Arc::new(Burgers)),
    ("ac", || Arc::new(AllenCahn)),
];

/// Names accepted by [`lookup`].
pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

/// Resolve a family by its registered name (`klein-gordon` and `allen-cahn`
/// are accepted as aliases).
pub fn lookup(name: &str) -> Result<PdeRef> {
    let key = match name {
        "klein-gordon" => "kg",
        "allen-cahn" => "ac",
        other => other,
    };
    REGISTRY
        .iter()
        .find(|(n, _)| *n == key)
        .map(|(_, f)| f())
        .ok_or_else(|| Error::Unknown {
            kind: "pde family",
            name: name.to_owned(),
        })
}

/// Boundary deviations `u - g` on `C_∂`, initial deviations `u - u_0` on `C_i`
/// and, for second-order families, `u_t - v_0` on `C_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryInitialDeviations {
    pub boundary: Vec<f64>,
    pub initial: Vec<f64>,
    pub initial_velocity: Option<Vec<f64>>,
}

/// Deviations of a candidate solution from the boundary and initial data.
pub fn boundary_initial_terms(
    pde: &dyn PdeFamily,
    solution: &dyn crate::pinn::SolutionProvider,
    boundary: &[crate::mlp::Point],
    initial: &[crate::mlp::Point],
) -> BoundaryInitialDeviations {
    let boundary_dev = boundary
        .iter()
        .map(|&p| solution.extended(p).u - pde.boundary_value(p[0], p[1]))
        .collect();
    let exts: Vec<ExtendedState> = initial.iter().map(|&p| solution.extended(p)).collect();
    let initial_dev = exts
        .iter()
        .zip(initial)
        .map(|(e, p)| e.u - pde.initial_value(p[0]))
        .collect();
    let velocity = match pde.time_order() {
        TimeOrder::Second => Some(
            exts.iter()
                .zip(initial)
                .map(|(e, p)| e.ut - pde.initial_velocity(p[0]).unwrap_or(0.0))
                .collect(),
        ),
        TimeOrder::First => None,
    };
    BoundaryInitialDeviations {
        boundary: boundary_dev,
        initial: initial_dev,
        initial_velocity: velocity,
    }
}
