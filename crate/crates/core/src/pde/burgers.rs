use std::f64::consts::PI;

use crate::mlp::{ExtendedState, Field};

use super::{ParameterDomain, PdeFamily, TimeOrder};

/// Viscous Burgers: `u_t + u u_x − ν u_xx = 0` on `[-1, 1] × [0, 1]`,
/// `u(±1, t) = 0`, `u(x, 0) = −sin(πx)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Burgers;

impl PdeFamily for Burgers {
    fn name(&self) -> &'static str {
        "burgers"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["nu"]
    }

    fn default_domain(&self) -> ParameterDomain {
        ParameterDomain::new(vec![[0.005, 1.0]]).unwrap()
    }

    fn time_order(&self) -> TimeOrder {
        TimeOrder::First
    }

    fn default_horizon(&self) -> f64 {
        1.0
    }

    fn residual(&self, e: &ExtendedState, _x: f64, _t: f64, mu: &[f64]) -> f64 {
        e.ut + e.u * e.ux - mu[0] * e.uxx
    }

    fn residual_partials(
        &self,
        e: &ExtendedState,
        x: f64,
        t: f64,
        mu: &[f64],
    ) -> (f64, ExtendedState) {
        let r = self.residual(e, x, t, mu);
        let d = ExtendedState {
            u: e.ux,
            ux: e.u,
            ut: 1.0,
            uxx: -mu[0],
            utt: 0.0,
        };
        (r, d)
    }

    fn interior_fields(&self) -> &'static [Field] {
        &[Field::U, Field::Ux, Field::Ut, Field::Uxx]
    }

    fn boundary_value(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }

    fn initial_value(&self, x: f64) -> f64 {
        -(PI * x).sin()
    }

    fn filters_stiff_points(&self) -> bool {
        true
    }
}
