use std::f64::consts::PI;

use crate::mlp::{ExtendedState, Field};

use super::{ParameterDomain, PdeFamily, TimeOrder};

/// Allen-Cahn: `u_t − λ u_xx + ε (u³ − u) = 0` on `[-1, 1] × [0, 1]`,
/// `u(±1, t) = −1`, `u(x, 0) = x² cos(πx)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllenCahn;

impl PdeFamily for AllenCahn {
    fn name(&self) -> &'static str {
        "ac"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["lambda", "epsilon"]
    }

    fn default_domain(&self) -> ParameterDomain {
        ParameterDomain::new(vec![[0.0001, 0.001], [1.0, 5.0]]).unwrap()
    }

    fn time_order(&self) -> TimeOrder {
        TimeOrder::First
    }

    fn default_horizon(&self) -> f64 {
        1.0
    }

    fn residual(&self, e: &ExtendedState, _x: f64, _t: f64, mu: &[f64]) -> f64 {
        let (lambda, eps) = (mu[0], mu[1]);
        e.ut - lambda * e.uxx + eps * (e.u * e.u * e.u - e.u)
    }

    fn residual_partials(
        &self,
        e: &ExtendedState,
        x: f64,
        t: f64,
        mu: &[f64],
    ) -> (f64, ExtendedState) {
        let (lambda, eps) = (mu[0], mu[1]);
        let r = self.residual(e, x, t, mu);
        let d = ExtendedState {
            u: eps * (3.0 * e.u * e.u - 1.0),
            ut: 1.0,
            uxx: -lambda,
            ..Default::default()
        };
        (r, d)
    }

    fn interior_fields(&self) -> &'static [Field] {
        &[Field::U, Field::Ut, Field::Uxx]
    }

    fn boundary_value(&self, _x: f64, _t: f64) -> f64 {
        -1.0
    }

    fn initial_value(&self, x: f64) -> f64 {
        x * x * (PI * x).cos()
    }
}
