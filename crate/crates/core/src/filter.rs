//! Removal of collocation points where a basis network has extreme curvature.
//!
//! For steep Burgers solutions the second spatial derivative of a basis is
//! close to singular near the front. Points where `|Ψ_xx|` is large relative to
//! its maximum are dropped from the reduced sets before precomputation. A point
//! is removed when *any* basis flags it, so all bases share one reduced grid.

use std::fmt;
use std::sync::Arc;

use crate::collocation::{CollocationSet, KeptIndices};
use crate::{Error, Result};

/// Decides which values of one basis on one point set are "stiff".
pub trait StiffFilter: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// `flags[p]` is true when point `p` should be removed.
    fn flags(&self, values: &[f64]) -> Vec<bool>;
}

/// Removes points with `|v| > ratio · max |v|` (strict).
#[derive(Debug, Clone, Copy)]
pub struct MaxRatio {
    pub ratio: f64,
}

impl Default for MaxRatio {
    fn default() -> Self {
        Self { ratio: 0.8 }
    }
}

impl StiffFilter for MaxRatio {
    fn name(&self) -> &'static str {
        "formula"
    }

    fn flags(&self, values: &[f64]) -> Vec<bool> {
        let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cut = self.ratio * max;
        values.iter().map(|v| v.abs() > cut).collect()
    }
}

/// Removes the `ceil(fraction · n)` largest `|v|` (ties resolved towards the
/// lower index).
#[derive(Debug, Clone, Copy)]
pub struct TopFraction {
    pub fraction: f64,
}

impl Default for TopFraction {
    fn default() -> Self {
        Self { fraction: 0.2 }
    }
}

impl StiffFilter for TopFraction {
    fn name(&self) -> &'static str {
        "quantile"
    }

    fn flags(&self, values: &[f64]) -> Vec<bool> {
        let n = values.len();
        let k = ((self.fraction * n as f64).ceil() as usize).min(n);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
        let mut flags = vec![false; n];
        for &i in &order[..k] {
            flags[i] = true;
        }
        flags
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoFilter;

impl StiffFilter for NoFilter {
    fn name(&self) -> &'static str {
        "none"
    }

    fn flags(&self, values: &[f64]) -> Vec<bool> {
        vec![false; values.len()]
    }
}

pub type FilterRef = Arc<dyn StiffFilter>;

type FilterFactory = fn() -> FilterRef;

const FILTERS: &[(&str, FilterFactory)] = &[
    ("formula", || Arc::new(MaxRatio::default())),
    ("quantile", || Arc::new(TopFraction::default())),
    ("none", || Arc::new(NoFilter)),
];

pub fn filter_names() -> Vec<&'static str> {
    FILTERS.iter().map(|(n, _)| *n).collect()
}

pub fn stiff_filter(name: &str) -> Result<FilterRef> {
    FILTERS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| f())
        .ok_or_else(|| Error::Unknown {
            kind: "stiff-point filter",
            name: name.to_owned(),
        })
}

/// `|Ψ_xx|` of one basis on each subset of a collocation set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BasisCurvature {
    pub interior: Vec<f64>,
    pub boundary: Vec<f64>,
    pub initial: Vec<f64>,
}

fn union_keep(per_basis: &[&[f64]], len: usize, filter: &dyn StiffFilter) -> Result<Vec<usize>> {
    let mut removed = vec![false; len];
    for values in per_basis {
        if values.len() != len {
            return Err(Error::ShapeMismatch {
                expected: len,
                actual: values.len(),
            });
        }
        for (r, f) in removed.iter_mut().zip(filter.flags(values)) {
            *r |= f;
        }
    }
    Ok((0..len).filter(|&i| !removed[i]).collect())
}

/// Indices that survive the filter for every basis, per subset.
pub fn stiff_keep_indices(
    curvature: &[BasisCurvature],
    colloc: &CollocationSet,
    filter: &dyn StiffFilter,
) -> Result<KeptIndices> {
    let pick =
        |f: fn(&BasisCurvature) -> &[f64]| -> Vec<&[f64]> { curvature.iter().map(f).collect() };
    Ok(KeptIndices {
        interior: union_keep(&pick(|c| &c.interior), colloc.interior.len(), filter)?,
        boundary: union_keep(&pick(|c| &c.boundary), colloc.boundary.len(), filter)?,
        initial: union_keep(&pick(|c| &c.initial), colloc.initial.len(), filter)?,
    })
}

/// The reduced collocation set with stiff points of any basis removed.
pub fn filter_stiff_points(
    curvature: &[BasisCurvature],
    colloc: &CollocationSet,
    filter: &dyn StiffFilter,
) -> Result<CollocationSet> {
    let keep = stiff_keep_indices(curvature, colloc, filter)?;
    Ok(colloc.subset(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_with(n: usize) -> CollocationSet {
        CollocationSet {
            interior: (0..n).map(|i| [i as f64 / n as f64, 0.5]).collect(),
            boundary: vec![],
            initial: vec![],
            space: [-1.0, 1.0],
            horizon: 1.0,
            strategy: "test".into(),
            seed: 0,
        }
    }

    fn curv(values: Vec<f64>) -> BasisCurvature {
        BasisCurvature {
            interior: values,
            ..Default::default()
        }
    }

    #[test]
    fn removes_only_the_peak() {
        let keep = stiff_keep_indices(
            &[curv(vec![0.0, 0.5, 1.0])],
            &set_with(3),
            &MaxRatio::default(),
        )
        .unwrap();
        assert_eq!(keep.interior, vec![0, 1]);
    }

    #[test]
    fn equal_positive_values_all_removed() {
        let keep =
            stiff_keep_indices(&[curv(vec![2.0; 4])], &set_with(4), &MaxRatio::default()).unwrap();
        assert!(keep.interior.is_empty());
    }

    #[test]
    fn union_over_bases() {
        let a = curv(vec![1.0, 0.1, 0.1]);
        let b = curv(vec![0.1, 1.0, 0.1]);
        let keep = stiff_keep_indices(&[a, b], &set_with(3), &MaxRatio::default()).unwrap();
        assert_eq!(keep.interior, vec![2]);
    }

    #[test]
    fn no_bases_is_identity() {
        let s = set_with(5);
        assert_eq!(
            filter_stiff_points(&[], &s, &MaxRatio::default()).unwrap(),
            s
        );
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let s = set_with(0);
        let out = filter_stiff_points(&[curv(vec![])], &s, &MaxRatio::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn quantile_removes_top_fifth() {
        let vals: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let keep =
            stiff_keep_indices(&[curv(vals)], &set_with(10), &TopFraction::default()).unwrap();
        assert_eq!(keep.interior, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(
            stiff_keep_indices(&[curv(vec![1.0])], &set_with(2), &MaxRatio::default()).is_err()
        );
    }

    #[test]
    fn registry() {
        for n in filter_names() {
            assert_eq!(stiff_filter(n).unwrap().name(), n);
        }
        assert!(stiff_filter("median").is_err());
    }
}
