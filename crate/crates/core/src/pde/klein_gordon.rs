use crate::mlp::{ExtendedState, Field};

use super::{ParameterDomain, PdeFamily, TimeOrder};

/// `u_tt + α u_xx + β u + γ u² + x cos t − x² cos² t = 0` on
/// `[-1, 1] × [0, 5]`, `u(±1, t) = ±cos t`, `u(x, 0) = x`, `u_t(x, 0) = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct KleinGordon;

fn forcing(x: f64, t: f64) -> f64 {
    let c = t.cos();
    x * c - x * x * c * c
}

impl PdeFamily for KleinGordon {
    fn name(&self) -> &'static str {
        "kg"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["alpha", "beta", "gamma"]
    }

    fn default_domain(&self) -> ParameterDomain {
        ParameterDomain::new(vec![[-2.0, -1.0], [0.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    fn time_order(&self) -> TimeOrder {
        TimeOrder::Second
    }

    fn default_horizon(&self) -> f64 {
        5.0
    }

    fn residual(&self, e: &ExtendedState, x: f64, t: f64, mu: &[f64]) -> f64 {
        let (alpha, beta, gamma) = (mu[0], mu[1], mu[2]);
        e.utt + alpha * e.uxx + beta * e.u + gamma * e.u * e.u + forcing(x, t)
    }

    fn residual_partials(
        &self,
        e: &ExtendedState,
        x: f64,
        t: f64,
        mu: &[f64],
    ) -> (f64, ExtendedState) {
        let (alpha, beta, gamma) = (mu[0], mu[1], mu[2]);
        let r = self.residual(e, x, t, mu);
        let d = ExtendedState {
            u: beta + 2.0 * gamma * e.u,
            uxx: alpha,
            utt: 1.0,
            ..Default::default()
        };
        (r, d)
    }

    fn interior_fields(&self) -> &'static [Field] {
        &[Field::U, Field::Uxx, Field::Utt]
    }

    fn boundary_value(&self, x: f64, t: f64) -> f64 {
        x * t.cos()
    }

    fn initial_value(&self, x: f64) -> f64 {
        x
    }

    fn initial_velocity(&self, _x: f64) -> Option<f64> {
        Some(0.0)
    }
}
