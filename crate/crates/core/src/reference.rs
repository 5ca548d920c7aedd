//! Finite-difference reference solutions built from a family's own residual.
//!
//! Writing the residual as `∂_t^k u + G(u, u_x, u_xx; x, t, μ)`, `G` is the
//! residual evaluated with the time derivative set to zero, and its partials
//! come from `residual_partials`. First-order families are advanced with
//! Crank–Nicolson and a tridiagonal Newton solve; second-order families with
//! the explicit leapfrog scheme under a CFL-limited step.

use crate::mlp::ExtendedState;
use crate::pde::{linspace, ParameterPoint, PdeFamily, TimeOrder};
use crate::{Error, Result};

/// Solution values on a uniform space-time grid, `u[k * nx + i] = u(x_i, t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSolution {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
}

impl FdSolution {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    /// Values at output time index `k`.
    pub fn snapshot(&self, k: usize) -> &[f64] {
        &self.u[k * self.nx()..(k + 1) * self.nx()]
    }

    /// Bilinear interpolation; points outside the grid are clamped.
    pub fn at(&self, x: f64, t: f64) -> f64 {
        let locate = |grid: &[f64], v: f64| -> (usize, f64) {
            let n = grid.len();
            if n == 1 {
                return (0, 0.0);
            }
            let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
            let s = ((v - grid[0]) / h).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            (i, s - i as f64)
        };
        let (i, a) = locate(&self.x, x);
        let (k, b) = locate(&self.t, t);
        let nx = self.nx();
        let v = |k: usize, i: usize| self.u[k * nx + i];
        let k1 = (k + 1).min(self.t.len() - 1);
        let i1 = (i + 1).min(nx - 1);
        (1.0 - b) * ((1.0 - a) * v(k, i) + a * v(k, i1))
            + b * ((1.0 - a) * v(k1, i) + a * v(k1, i1))
    }
}

/// Grid resolution of a reference solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    /// Spatial nodes including both boundary nodes.
    pub nx: usize,
    /// Output times including `t = 0` and `t = T`.
    pub nt_out: usize,
    /// Internal steps between consecutive outputs (first-order families).
    pub substeps: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            nx: 401,
            nt_out: 101,
            substeps: 20,
        }
    }
}

struct Stencil<'a> {
    pde: &'a dyn PdeFamily,
    mu: &'a [f64],
    x: &'a [f64],
    dx: f64,
}

impl Stencil<'_> {
    fn state(&self, u: &[f64], i: usize) -> ExtendedState {
        let dx = self.dx;
        ExtendedState {
            u: u[i],
            ux: (u[i + 1] - u[i - 1]) / (2.0 * dx),
            uxx: (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx),
            ..Default::default()
        }
    }

    /// `G` at interior node `i`.
    fn g(&self, u: &[f64], i: usize, t: f64) -> f64 {
        self.pde.residual(&self.state(u, i), self.x[i], t, self.mu)
    }

    fn g_partials(&self, u: &[f64], i: usize, t: f64) -> (f64, ExtendedState) {
        self.pde
            .residual_partials(&self.state(u, i), self.x[i], t, self.mu)
    }
}

/// Solves `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` in place of `d`.
fn thomas(a: &[f64], b: &mut [f64], c: &[f64], d: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        let w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    d[n - 1] /= b[n - 1];
    for i in (0..n - 1).rev() {
        d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
    }
}

fn crank_nicolson(st: &Stencil<'_>, cfg: &FdConfig, horizon: f64) -> Result<Vec<f64>> {
    let nx = st.x.len();
    let pde = st.pde;
    let [xl, xr] = [st.x[0], st.x[nx - 1]];
    let mut u: Vec<f64> = st.x.iter().map(|&x| pde.initial_value(x)).collect();
    let mut out = u.clone();
    let steps = (cfg.nt_out - 1) * cfg.substeps;
    let dt = horizon / steps as f64;
    let (mut a, mut b, mut c, mut r) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    let (dx, half) = (st.dx, 0.5 * dt);
    for step in 0..steps {
        let t0 = step as f64 * dt;
        let t1 = (step + 1) as f64 * dt;
        let g_old: Vec<f64> = (1..nx - 1).map(|i| st.g(&u, i, t0)).collect();
        let mut v = u.clone();
        v[0] = pde.boundary_value(xl, t1);
        v[nx - 1] = pde.boundary_value(xr, t1);
        for _newton in 0..30 {
            a[0] = 0.0;
            b[0] = 1.0;
            c[0] = 0.0;
            r[0] = 0.0;
            a[nx - 1] = 0.0;
            b[nx - 1] = 1.0;
            c[nx - 1] = 0.0;
            r[nx - 1] = 0.0;
            let mut norm: f64 = 0.0;
            for i in 1..nx - 1 {
                let (g, d) = st.g_partials(&v, i, t1);
                let res = v[i] - u[i] + half * (g + g_old[i - 1]);
                norm = norm.max(res.abs());
                r[i] = -res;
                a[i] = half * (-d.ux / (2.0 * dx) + d.uxx / (dx * dx));
                b[i] = 1.0 + half * (d.u - 2.0 * d.uxx / (dx * dx));
                c[i] = half * (d.ux / (2.0 * dx) + d.uxx / (dx * dx));
            }
            if !norm.is_finite() {
                return Err(Error::TrainingDiverged { epoch: step });
            }
            if norm < 1e-12 {
                break;
            }
            thomas(&a, &mut b, &c, &mut r);
            for i in 1..nx - 1 {
                v[i] += r[i];
            }
        }
        u = v;
        if (step + 1) % cfg.substeps == 0 {
            out.extend_from_slice(&u);
        }
    }
    Ok(out)
}

fn leapfrog(st: &Stencil<'_>, cfg: &FdConfig, horizon: f64) -> Result<Vec<f64>> {
    let nx = st.x.len();
    let pde = st.pde;
    let [xl, xr] = [st.x[0], st.x[nx - 1]];
    let u0: Vec<f64> = st.x.iter().map(|&x| pde.initial_value(x)).collect();
    // wave speed from the u_xx coefficient of G
    let probe = ExtendedState::default();
    let (_, d) = pde.residual_partials(&probe, 0.0, 0.0, st.mu);
    let speed = (-d.uxx).max(0.0).sqrt().max(1e-8);
    let interval = horizon / (cfg.nt_out - 1) as f64;
    let sub = ((interval * speed / (0.5 * st.dx)).ceil() as usize).max(cfg.substeps);
    let dt = interval / sub as f64;
    let mut out = u0.clone();
    let mut prev = u0.clone();
    let mut cur = u0.clone();
    for i in 1..nx - 1 {
        let v0 = pde.initial_velocity(st.x[i]).unwrap_or(0.0);
        cur[i] = u0[i] + dt * v0 - 0.5 * dt * dt * st.g(&u0, i, 0.0);
    }
    cur[0] = pde.boundary_value(xl, dt);
    cur[nx - 1] = pde.boundary_value(xr, dt);
    let steps = (cfg.nt_out - 1) * sub;
    if sub == 1 {
        out.extend_from_slice(&cur);
    }
    let mut next = vec![0.0; nx];
    for step in 1..steps {
        let t = step as f64 * dt;
        for i in 1..nx - 1 {
            next[i] = 2.0 * cur[i] - prev[i] - dt * dt * st.g(&cur, i, t);
        }
        next[0] = pde.boundary_value(xl, t + dt);
        next[nx - 1] = pde.boundary_value(xr, t + dt);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { epoch: step });
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        if (step + 1) % sub == 0 {
            out.extend_from_slice(&cur);
        }
    }
    Ok(out)
}

/// Reference solution of `pde` at `mu` on `[x_l, x_r] × [0, horizon]`.
pub fn solve_reference(
    pde: &dyn PdeFamily,
    mu: &ParameterPoint,
    horizon: f64,
    cfg: &FdConfig,
) -> Result<FdSolution> {
    if cfg.nx < 3 || cfg.nt_out < 2 || cfg.substeps == 0 {
        return Err(Error::Config("reference grid too small".into()));
    }
    if mu.dim() != pde.param_names().len() {
        return Err(Error::ShapeMismatch {
            expected: pde.param_names().len(),
            actual: mu.dim(),
        });
    }
    let [lo, hi] = pde.space_interval();
    let x = linspace(lo, hi, cfg.nx);
    let st = Stencil {
        pde,
        mu: mu.as_slice(),
        x: &x,
        dx: (hi - lo) / (cfg.nx - 1) as f64,
    };
    let u = match pde.time_order() {
        TimeOrder::First => crank_nicolson(&st, cfg, horizon)?,
        TimeOrder::Second => leapfrog(&st, cfg, horizon)?,
    };
    Ok(FdSolution {
        x: x.clone(),
        t: linspace(0.0, horizon, cfg.nt_out),
        u,
    })
}
