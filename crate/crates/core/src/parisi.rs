//! Recursive solver for the order-parameter boundary-value problem and the
//! step functional built on it.
//!
//! On each interval where the step order parameter is constant the
//! nonlinear backward equation
//!
//! ```text
//! df/dq + (1/2) [ d2f/dy2 + x(q) (df/dy)^2 ] = 0,   f(1, y) = ln cosh(beta (y + h))
//! ```
//!
//! linearizes under the exponential substitution u = e^{x f}: one interval
//! of width dq = q_{j+1} - q_j is solved exactly by a Gaussian smoothing
//! step
//!
//! ```text
//! f(q_j, y) = (1/x_j) ln E_z exp( x_j f(q_{j+1}, y + sqrt(dq) z) ),
//! ```
//!
//! with the plain expectation (the x -> 0 limit) on the outermost interval
//! where x = 0. Levels are tabulated on a symmetric y-grid with cubic
//! interpolation in between and matched-slope linear continuation outside;
//! the boundary level itself is kept analytic so one-level solves never
//! interpolate.
//!
//! Quadrature note: the integrands are analytic only in a strip of
//! half-width pi/(2 beta) around the real axis, so Gauss-Hermite
//! convergence is geometric in sqrt(order), not factorial. The default
//! order below sits where doubling moves f(0,0) by under 1e-9 for
//! beta <= 3 (measured), which a 40-node rule does not approach.

use crate::error::{Error, Result};
use crate::math::{ln_cosh, log_sum_exp};
use crate::order_param::OrderParameter;
use crate::quad::GaussHermite;
use serde::Serialize;
use std::sync::Arc;

/// Default Gauss-Hermite order; see module notes.
pub const DEFAULT_QUAD_ORDER: usize = 320;
/// Default y-grid spacing.
pub const DEFAULT_Y_STEP: f64 = 0.02;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverSettings {
    pub quad_order: usize,
    pub y_step: f64,
    /// Half-width of the tabulation grid; `None` picks 8 + beta * max(k,1).
    pub y_max: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            quad_order: DEFAULT_QUAD_ORDER,
            y_step: DEFAULT_Y_STEP,
            y_max: None,
        }
    }
}

/// Uniformly tabulated function of y with slope-beta linear continuation
/// outside the grid (the exact asymptote of every level).
#[derive(Debug, Clone, Serialize)]
pub struct GridFn {
    y_min: f64,
    step: f64,
    vals: Vec<f64>,
    edge_slope: f64,
}

impl GridFn {
    fn tabulate(y_min: f64, step: f64, count: usize, slope: f64, f: impl Fn(f64) -> f64) -> Self {
        let vals = (0..count).map(|i| f(y_min + i as f64 * step)).collect();
        GridFn {
            y_min,
            step,
            vals,
            edge_slope: slope,
        }
    }

    pub fn y_at(&self, i: usize) -> f64 {
        self.y_min + i as f64 * self.step
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    /// Cubic (4-point Lagrange) interpolation inside the grid, linear
    /// continuation with the asymptotic slope outside.
    pub fn eval(&self, y: f64) -> f64 {
        let n = self.vals.len();
        let y_max = self.y_at(n - 1);
        if y <= self.y_min {
            return self.vals[0] - self.edge_slope * (y - self.y_min);
        }
        if y >= y_max {
            return self.vals[n - 1] + self.edge_slope * (y - y_max);
        }
        let u = (y - self.y_min) / self.step;
        let cell = (u.floor() as usize).min(n - 2);
        // Stencil [i0, i0+3] around the cell, clamped at the edges.
        let i0 = cell.saturating_sub(1).min(n - 4);
        let t = u - i0 as f64;
        let (f0, f1, f2, f3) = (self.vals[i0], self.vals[i0 + 1], self.vals[i0 + 2], self.vals[i0 + 3]);
        // Lagrange basis on nodes 0,1,2,3 evaluated at t.
        let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
        let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
        let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
        let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
        f0 * l0 + f1 * l1 + f2 * l2 + f3 * l3
    }
}

/// Solution of the backward recursion: one tabulated level per interval
/// boundary, plus the value f(0, 0).
#[derive(Debug, Clone)]
pub struct ParisiSolution {
    pub params: OrderParameter,
    pub beta: f64,
    pub h: f64,
    /// q-positions 0 = b_0 <= b_1 <= ... <= b_{k+1} = 1 of the stored
    /// levels (b_j = q_j in the interior).
    pub bounds: Vec<f64>,
    /// levels[j] = f(b_j, .) on the y-grid; levels[k+1] is the boundary
    /// tabulation (analytic values, stored for inspection and export).
    pub levels: Vec<GridFn>,
    /// f(0, 0).
    pub value: f64,
    pub quad_order: usize,
    quad: Arc<GaussHermite>,
}

/// x-value on each interval [b_j, b_{j+1}): x_0 = 0 below the first jump.
fn interval_x(params: &OrderParameter) -> (Vec<f64>, Vec<f64>) {
    let mut bounds = vec![0.0];
    bounds.extend(params.q_levels());
    bounds.push(1.0);
    let mut xs = vec![0.0];
    xs.extend(params.x_levels());
    (bounds, xs)
}

/// One smoothing step: g(y) = (1/x) ln E_z exp(x f(y + s z)), or the plain
/// expectation at x = 0.
fn cole_hopf_step(
    quad: &GaussHermite,
    f: &dyn Fn(f64) -> f64,
    x: f64,
    span: f64,
    y: f64,
) -> f64 {
    debug_assert!(span >= 0.0);
    if span == 0.0 {
        return f(y);
    }
    let s = span.sqrt();
    if x == 0.0 {
        quad.nodes()
            .iter()
            .zip(quad.weights())
            .map(|(&z, &w)| w * f(y + s * z))
            .sum()
    } else {
        let logs: Vec<f64> = quad
            .nodes()
            .iter()
            .zip(quad.weights())
            .map(|(&z, &w)| w.ln() + x * f(y + s * z))
            .collect();
        log_sum_exp(&logs) / x
    }
}

/// Solve the backward recursion, tabulating every interior level.
pub fn solve_recursive(
    params: &OrderParameter,
    beta: f64,
    h: f64,
    settings: &SolverSettings,
) -> Result<ParisiSolution> {
    if beta < 0.0 {
        return Err(Error::OutOfRange {
            what: "beta",
            value: beta,
            range: "[0, inf)",
        });
    }
    if settings.quad_order < 20 {
        return Err(Error::InvalidParam("quadrature order must be >= 20".into()));
    }
    if !(settings.y_step > 0.0 && settings.y_step <= 0.05) {
        return Err(Error::InvalidParam(
            "y-grid spacing must lie in (0, 0.05]".into(),
        ));
    }
    let k = params.k();
    let y_max = settings
        .y_max
        .unwrap_or(8.0 + beta * k.max(1) as f64);
    if y_max < 6.0 {
        return Err(Error::InvalidParam(
            "y-grid half-width below 6 underspans the boundary condition".into(),
        ));
    }
    let half = (y_max / settings.y_step).round().max(1.0) as usize;
    let step = y_max / half as f64;
    let count = 2 * half + 1;
    let y_min = -y_max;
    let quad = GaussHermite::cached(settings.quad_order);

    let (bounds, xs) = interval_x(params);
    let boundary = move |y: f64| ln_cosh(beta * (y + h));

    // levels_rev[0] is the boundary at q = 1; walk backward to q = 0.
    let mut levels_rev: Vec<GridFn> = vec![GridFn::tabulate(
        y_min, step, count, beta, boundary,
    )];
    // Current continuous evaluator (analytic at the boundary, interpolated
    // after the first tabulated step).
    let mut current: Box<dyn Fn(f64) -> f64> = Box::new(boundary);
    for j in (0..xs.len()).rev() {
        let span = bounds[j + 1] - bounds[j];
        let x = xs[j];
        let g = GridFn::tabulate(y_min, step, count, beta, |y| {
            cole_hopf_step(&quad, current.as_ref(), x, span, y)
        });
        levels_rev.push(g.clone());
        current = Box::new(move |y| g.eval(y));
    }

    let levels: Vec<GridFn> = levels_rev.into_iter().rev().collect();
    let value = levels[0].vals[half]; // y = 0 sits at the grid center
    Ok(ParisiSolution {
        params: params.clone(),
        beta,
        h,
        bounds,
        levels,
        value,
        quad_order: settings.quad_order,
        quad,
    })
}

impl ParisiSolution {
    /// f(t, y) for any t in [0, 1]: stored levels at the interval bounds,
    /// a partial smoothing step over [t, b_{j+1}) in the interior.
    pub fn eval(&self, t: f64, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange {
                what: "t",
                value: t,
                range: "[0, 1]",
            });
        }
        // Exact hit on a stored level (the last matching bound wins so
        // zero-width intervals resolve to the inner level).
        if let Some(j) = self
            .bounds
            .iter()
            .rposition(|&b| (b - t).abs() < 1e-14)
        {
            return Ok(self.levels[j].eval(y));
        }
        let j = self
            .bounds
            .iter()
            .rposition(|&b| b < t)
            .expect("t > 0 here");
        let span = self.bounds[j + 1] - t;
        let (_, xs) = interval_x(&self.params);
        let x = xs[j];
        let upper = &self.levels[j + 1];
        Ok(cole_hopf_step(
            &self.quad,
            &|yy| upper.eval(yy),
            x,
            span,
            y,
        ))
    }

    /// Centered-difference |df/dy| over the grid interior of level j.
    pub fn max_abs_slope(&self, level: usize) -> f64 {
        let g = &self.levels[level];
        let mut worst = 0.0f64;
        for i in 1..g.len() - 1 {
            let d = (g.vals[i + 1] - g.vals[i - 1]) / (2.0 * g.step);
            worst = worst.max(d.abs());
        }
        worst
    }
}

/// The step functional: ln 2 + f(0,0) - (beta^2/2) * int q x(q) dq.
pub fn parisi_functional(
    params: &OrderParameter,
    beta: f64,
    h: f64,
    settings: &SolverSettings,
) -> Result<f64> {
    let sol = solve_recursive(params, beta, h, settings)?;
    Ok(std::f64::consts::LN_2 + sol.value - 0.5 * beta * beta * params.q_integral())
}

/// Evaluate the time-t reweighting exponent f(t, y) (used by the cascade
/// t-invariance experiment).
pub fn martingale_weight(
    params: &OrderParameter,
    beta: f64,
    h: f64,
    t: f64,
    y: f64,
    settings: &SolverSettings,
) -> Result<f64> {
    solve_recursive(params, beta, h, settings)?.eval(t, y)
}

/// One refinement stage of the continuous-x evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementStep {
    pub steps: usize,
    pub value: f64,
    /// |value - previous value|; None on the first stage.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    pub stages: Vec<RefinementStep>,
    pub converged: bool,
}

/// Evaluate the functional along piecewise-constant approximants of a
/// continuous monotone x(q) sampled on a grid, at 2, 4, 8 and 16 steps.
/// The approximant at `n` steps is right-continuous with level values read
/// at the left endpoints j/n. Convergence is declared when successive
/// values move by less than 1e-4.
pub fn refine_continuous(
    q_grid: &[f64],
    x_values: &[f64],
    beta: f64,
    h: f64,
    settings: &SolverSettings,
) -> Result<RefinementReport> {
    if q_grid.len() != x_values.len() || q_grid.len() < 2 {
        return Err(Error::InvalidParam(
            "need matching q/x grids with at least two samples".into(),
        ));
    }
    if q_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam("q grid must be strictly increasing".into()));
    }
    if x_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParam("x samples must be monotone".into()));
    }
    if q_grid[0] != 0.0 || *q_grid.last().unwrap() != 1.0 {
        return Err(Error::InvalidParam("q grid must span [0, 1]".into()));
    }
    if x_values.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidParam("x samples must lie in [0, 1]".into()));
    }
    let interp = |q: f64| -> f64 {
        let i = match q_grid.iter().rposition(|&g| g <= q) {
            Some(i) => i.min(q_grid.len() - 2),
            None => 0,
        };
        let t = (q - q_grid[i]) / (q_grid[i + 1] - q_grid[i]);
        x_values[i] + t * (x_values[i + 1] - x_values[i])
    };

    let mut stages = Vec::new();
    let mut prev: Option<f64> = None;
    for &steps in &[2usize, 4, 8, 16] {
        let mut xs = Vec::with_capacity(steps);
        let mut qs = Vec::with_capacity(steps);
        for j in 0..steps {
            let q = j as f64 / steps as f64;
            // Keep both coordinates strictly inside (0, 1): x = 1 is a
            // limit object, and a positive level at q = 0 is anchored at a
            // vanishing floor shared by every stage.
            let x = interp(q).min(1.0 - 1e-9);
            xs.push(x);
            qs.push(q.max(1e-9));
        }
        let op = OrderParameter::normalized(&xs, &qs)?;
        let value = parisi_functional(&op, beta, h, settings)?;
        let delta = prev.map(|p: f64| (value - p).abs());
        stages.push(RefinementStep {
            steps,
            value,
            delta,
        });
        prev = Some(value);
    }
    let converged = stages
        .last()
        .and_then(|s| s.delta)
        .map(|d| d < 1e-4)
        .unwrap_or(false);
    Ok(RefinementReport { stages, converged })
}
