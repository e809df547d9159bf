//! Logistic-regression KPI models.
//!
//! A model maps the RRM parameter `x` to a KPI value through
//! `y = y_lo + (y_hi - y_lo) * f_log(beta0 + beta1 * x)`. Fitting is a
//! Gaussian-residual maximum-likelihood problem, i.e. nonlinear least squares,
//! solved with a damped Gauss-Newton (Levenberg-Marquardt) iteration.
//!
//! The fit runs in two stages. The output bounds first come from the observed
//! range widened by 10 % on each side and `(beta0, beta1)` are fitted on the
//! normalized data. The bounds are then released and refined jointly with the
//! coefficients, within a box that keeps every observation strictly inside
//! `(y_lo, y_hi)`; the coefficients are finally re-solved at the refined
//! bounds. Data generated by any member of the four-parameter family whose
//! asymptotes lie in that box is therefore reproduced exactly.

use serde::{Deserialize, Serialize};

use crate::error::FitError;

/// Logistic function `1 / (1 + e^-z)`, evaluated without overflow.
pub fn f_log(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
}

impl Sample {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Fitted logistic model of one KPI against the RRM parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiModel {
    pub beta0: f64,
    pub beta1: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub n_samples: usize,
    pub residual_rms: f64,
}

impl KpiModel {
    pub fn predict(&self, x: f64) -> f64 {
        predict(self, x)
    }

    /// A model that predicts `value` everywhere.
    pub fn flat(value: f64) -> Self {
        Self {
            beta0: 0.0,
            beta1: 0.0,
            y_lo: value - FLAT_HALF_WIDTH,
            y_hi: value + FLAT_HALF_WIDTH,
            n_samples: 0,
            residual_rms: 0.0,
        }
    }
}

pub fn predict(model: &KpiModel, x: f64) -> f64 {
    model.y_lo + (model.y_hi - model.y_lo) * f_log(model.beta0 + model.beta1 * x)
}

/// Tuning of the fitting procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Relative margin added on each side of the observed range.
    pub margin: f64,
    /// Release the output bounds after the first stage.
    pub refine_bounds: bool,
    /// Largest admissible `(y_hi - y_lo)` as a multiple of the observed range.
    pub max_span_ratio: f64,
    pub max_iterations: usize,
    pub gradient_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { margin: 0.1, refine_bounds: true, max_span_ratio: 5.0, max_iterations: 200, gradient_tol: 1e-10 }
    }
}

const MIN_MARGIN: f64 = 1e-6;
const FLAT_RANGE: f64 = 1e-9;
/// Profiled grid points handed to the four-parameter polish.
const PROFILE_STARTS: usize = 4;
const FLAT_HALF_WIDTH: f64 = 1e-6;
/// Clamp applied to normalized targets before the logit in the initial guess.
const INIT_CLAMP: (f64, f64) = (0.02, 0.98);

/// Sum of squared residuals of `(beta0, beta1)` on data normalized by
/// `(y_lo, y_hi)`.
pub fn normalized_loss(samples: &[Sample], beta0: f64, beta1: f64, y_lo: f64, y_hi: f64) -> f64 {
    let span = y_hi - y_lo;
    samples
        .iter()
        .map(|s| {
            let r = (s.y - y_lo) / span - f_log(beta0 + beta1 * s.x);
            r * r
        })
        .sum()
}

/// Sum of squared residuals of a model in KPI units.
pub fn sse(model: &KpiModel, samples: &[Sample]) -> f64 {
    samples.iter().map(|s| (s.y - predict(model, s.x)).powi(2)).sum()
}

pub fn fit(samples: &[Sample]) -> Result<KpiModel, FitError> {
    fit_with(samples, &FitOptions::default())
}

pub fn fit_with(samples: &[Sample], opts: &FitOptions) -> Result<KpiModel, FitError> {
    if samples.len() < 3 {
        return Err(FitError::TooFewSamples(samples.len()));
    }
    if let Some(i) = samples.iter().position(|s| !s.x.is_finite() || !s.y.is_finite()) {
        return Err(FitError::NonFinite(i));
    }
    if samples.iter().all(|s| s.x == samples[0].x) {
        return Err(FitError::DegenerateX);
    }

    let (y_min, y_max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.y), hi.max(s.y)));
    let range = y_max - y_min;
    if range < FLAT_RANGE {
        let mean = samples.iter().map(|s| s.y).sum::<f64>() / samples.len() as f64;
        return Ok(KpiModel { n_samples: samples.len(), ..KpiModel::flat(mean) });
    }

    let margin = (opts.margin * range).max(MIN_MARGIN);
    let (mut y_lo, mut y_hi) = (y_min - margin, y_max + margin);
    let mut beta = fit_coefficients(samples, y_lo, y_hi, None, opts);

    if opts.refine_bounds {
        let bounds = SpanBox { y_min, y_max, min_gap: MIN_MARGIN.min(margin), max_span: opts.max_span_ratio * range };
        // The joint surface is not convex: polish the 10 % margin start and
        // the best points of a profiled coefficient grid, keep the lowest.
        let mut starts = vec![[beta.0, beta.1, y_lo, y_hi]];
        starts.extend(profile_grid_starts(samples, &bounds));
        let mut refined = starts[0];
        let mut best = f64::INFINITY;
        for start in starts {
            let cand = refine_four_parameter(samples, start, &bounds, opts);
            let loss = sse4(samples, &cand);
            if loss < best {
                best = loss;
                refined = cand;
            }
        }
        if refined[2] != y_lo || refined[3] != y_hi {
            y_lo = refined[2];
            y_hi = refined[3];
            beta = fit_coefficients(samples, y_lo, y_hi, Some((refined[0], refined[1])), opts);
        }
    }

    let mut model = KpiModel {
        beta0: beta.0,
        beta1: beta.1,
        y_lo,
        y_hi,
        n_samples: samples.len(),
        residual_rms: 0.0,
    };
    model.residual_rms = (sse(&model, samples) / samples.len() as f64).sqrt();
    Ok(model)
}

/// Best `(beta0, beta1)` at fixed bounds over several deterministic starts:
/// the logit least-squares guess, the best point of a coarse grid, and an
/// optional caller-supplied point.
fn fit_coefficients(
    samples: &[Sample],
    y_lo: f64,
    y_hi: f64,
    extra_start: Option<(f64, f64)>,
    opts: &FitOptions,
) -> (f64, f64) {
    let span = y_hi - y_lo;
    let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
    let ys: Vec<f64> = samples.iter().map(|s| (s.y - y_lo) / span).collect();

    let mut starts = vec![logit_ols(&xs, &ys), coarse_grid_start(&xs, &ys)];
    starts.extend(extra_start);

    let mut best = (0.0, 0.0, f64::INFINITY);
    for start in starts {
        let (b0, b1, loss) = levenberg_marquardt_2(&xs, &ys, start, opts);
        if loss < best.2 {
            best = (b0, b1, loss);
        }
    }
    (best.0, best.1)
}

fn loss2(xs: &[f64], ys: &[f64], b0: f64, b1: f64) -> f64 {
    xs.iter().zip(ys).map(|(x, y)| (y - f_log(b0 + b1 * x)).powi(2)).sum()
}

/// Ordinary least squares of `logit(clamp(y))` against `x`.
fn logit_ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let zs: Vec<f64> = ys
        .iter()
        .map(|y| {
            let p = y.clamp(INIT_CLAMP.0, INIT_CLAMP.1);
            (p / (1.0 - p)).ln()
        })
        .collect();
    let mx = xs.iter().sum::<f64>() / n;
    let mz = zs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxz: f64 = xs.iter().zip(&zs).map(|(x, z)| (x - mx) * (z - mz)).sum();
    let b1 = sxz / sxx;
    (mz - b1 * mx, b1)
}

fn coarse_grid_start(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let mut best = (0.0, 0.0, f64::INFINITY);
    for i in 0..=40 {
        let b0 = -50.0 + 2.5 * i as f64;
        for k in 0..=40 {
            let b1 = -100.0 + 5.0 * k as f64;
            let l = loss2(xs, ys, b0, b1);
            if l < best.2 {
                best = (b0, b1, l);
            }
        }
    }
    (best.0, best.1)
}

/// Levenberg-Marquardt on `sum (y - f_log(b0 + b1 x))^2`.
fn levenberg_marquardt_2(xs: &[f64], ys: &[f64], start: (f64, f64), opts: &FitOptions) -> (f64, f64, f64) {
    let (mut b0, mut b1) = start;
    let mut loss = loss2(xs, ys, b0, b1);
    let mut lambda = 1e-3;
    for _ in 0..opts.max_iterations {
        // Normal equations of the linearized residual.
        let (mut a00, mut a01, mut a11, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            let f = f_log(b0 + b1 * x);
            let d = f * (1.0 - f);
            let r = y - f;
            let (j0, j1) = (d, d * x);
            a00 += j0 * j0;
            a01 += j0 * j1;
            a11 += j1 * j1;
            g0 += j0 * r;
            g1 += j1 * r;
        }
        if 2.0 * g0.hypot(g1) < opts.gradient_tol {
            break;
        }
        let floor = 1e-12 * (a00 + a11) + 1e-300;
        let mut accepted = false;
        while lambda < 1e16 {
            let m00 = a00 + lambda * (a00 + floor);
            let m11 = a11 + lambda * (a11 + floor);
            let det = m00 * m11 - a01 * a01;
            let step0 = (m11 * g0 - a01 * g1) / det;
            let step1 = (m00 * g1 - a01 * g0) / det;
            let (n0, n1) = (b0 + step0, b1 + step1);
            let new_loss = loss2(xs, ys, n0, n1);
            if new_loss.is_finite() && new_loss < loss {
                let improvement = loss - new_loss;
                b0 = n0;
                b1 = n1;
                loss = new_loss;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = improvement > 1e-18 * (1.0 + loss);
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    (b0, b1, loss)
}

/// Feasible region of the four-parameter refinement.
struct SpanBox {
    y_min: f64,
    y_max: f64,
    min_gap: f64,
    max_span: f64,
}

impl SpanBox {
    fn lo_max(&self) -> f64 {
        self.y_min - self.min_gap
    }

    fn hi_min(&self) -> f64 {
        self.y_max + self.min_gap
    }

    /// Nearest admissible `(y_lo, y_hi)`; an oversized span is cut on the
    /// side that moved.
    fn project(&self, lo: f64, hi: f64, prev: (f64, f64)) -> (f64, f64) {
        let lo = lo.min(self.lo_max());
        let hi = hi.max(self.hi_min());
        if hi - lo <= self.max_span {
            (lo, hi)
        } else if (hi - prev.1).abs() >= (lo - prev.0).abs() {
            (lo, lo + self.max_span)
        } else {
            (hi - self.max_span, hi)
        }
    }
}

impl SpanBox {
    /// Least-squares `(y_lo, y_hi)` for fixed coefficients. The model is
    /// linear in the bounds and the admissible set is the triangle
    /// `y_lo <= a`, `y_hi >= b`, `y_hi - y_lo <= max_span`, so the optimum is
    /// the free solution when admissible and otherwise lies on an edge.
    fn profile(&self, samples: &[Sample], b0: f64, b1: f64) -> (f64, f64, f64) {
        let (a, b, s) = (self.y_min - self.min_gap, self.y_max + self.min_gap, self.max_span);
        let fs: Vec<f64> = samples.iter().map(|p| f_log(b0 + b1 * p.x)).collect();
        let cost = |u: f64, v: f64| -> f64 {
            samples.iter().zip(&fs).map(|(p, f)| (p.y - u - (v - u) * f).powi(2)).sum()
        };
        let (mut guu, mut guv, mut gvv, mut ru, mut rv) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (p, f) in samples.iter().zip(&fs) {
            let g = 1.0 - f;
            guu += g * g;
            guv += g * f;
            gvv += f * f;
            ru += g * p.y;
            rv += f * p.y;
        }
        let det = guu * gvv - guv * guv;
        if det > 1e-12 * (guu * gvv).max(1e-300) {
            let u = (gvv * ru - guv * rv) / det;
            let v = (guu * rv - guv * ru) / det;
            if u <= a && v >= b && v - u <= s {
                return (u, v, cost(u, v));
            }
        }
        let ratio = |num: f64, den: f64, fallback: f64| if den > 1e-300 { num / den } else { fallback };
        // u = a, v in [b, a + s].
        let v1 = ratio(rv - a * guv, gvv, b).clamp(b, a + s);
        // v = b, u in [b - s, a].
        let u2 = ratio(ru - b * guv, guu, a).clamp(b - s, a);
        // v = u + s, u in [b - s, a].
        let n = samples.len() as f64;
        let u3 = (samples.iter().zip(&fs).map(|(p, f)| p.y - s * f).sum::<f64>() / n).clamp(b - s, a);
        [(a, v1), (u2, b), (u3, u3 + s)]
            .into_iter()
            .map(|(u, v)| (u, v, cost(u, v)))
            .fold((a, b, f64::INFINITY), |best, c| if c.2 < best.2 { c } else { best })
    }
}

/// Lowest-loss points of a coarse `(beta0, beta1)` grid with the bounds
/// profiled out, as four-parameter starts.
fn profile_grid_starts(samples: &[Sample], bounds: &SpanBox) -> Vec<[f64; 4]> {
    let mut scored = Vec::with_capacity(41 * 81);
    for i in 0..=40 {
        let b0 = -50.0 + 2.5 * i as f64;
        for k in 0..=80 {
            let b1 = -100.0 + 2.5 * k as f64;
            let (u, v, loss) = bounds.profile(samples, b0, b1);
            scored.push((loss, [b0, b1, u, v]));
        }
    }
    scored.sort_by(|x, y| x.0.total_cmp(&y.0));
    scored.into_iter().take(PROFILE_STARTS).map(|(_, p)| p).collect()
}

fn sse4(samples: &[Sample], p: &[f64; 4]) -> f64 {
    samples.iter().map(|s| (s.y - p[2] - (p[3] - p[2]) * f_log(p[0] + p[1] * s.x)).powi(2)).sum()
}

/// Levenberg-Marquardt over `(beta0, beta1, y_lo, y_hi)` in KPI units with
/// an active set: a bound sitting on its limit with the descent direction
/// pointing outward is frozen for that step, and the rest of the step is
/// pulled back onto the admissible region.
fn refine_four_parameter(samples: &[Sample], start: [f64; 4], bounds: &SpanBox, opts: &FitOptions) -> [f64; 4] {
    let (lo, hi) = bounds.project(start[2], start[3], (start[2], start[3]));
    let mut p = [start[0], start[1], lo, hi];
    let mut loss = sse4(samples, &p);
    let mut lambda = 1e-3;
    for _ in 0..opts.max_iterations {
        let mut a = [[0.0f64; 4]; 4];
        let mut g = [0.0f64; 4];
        for s in samples {
            let f = f_log(p[0] + p[1] * s.x);
            let d = (p[3] - p[2]) * f * (1.0 - f);
            let j = [d, d * s.x, 1.0 - f, f];
            let r = s.y - p[2] - (p[3] - p[2]) * f;
            for u in 0..4 {
                g[u] += j[u] * r;
                for v in 0..4 {
                    a[u][v] += j[u] * j[v];
                }
            }
        }
        let eps = 1e-12 * (1.0 + bounds.max_span);
        let frozen = [
            false,
            false,
            p[2] >= bounds.lo_max() - eps && g[2] > 0.0,
            p[3] <= bounds.hi_min() + eps && g[3] < 0.0,
        ];
        for u in (0..4).filter(|&u| frozen[u]) {
            g[u] = 0.0;
            for row in a.iter_mut() {
                row[u] = 0.0;
            }
            a[u] = [0.0; 4];
            a[u][u] = 1.0;
        }
        let gnorm = 2.0 * g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < opts.gradient_tol {
            break;
        }
        let trace: f64 = (0..4).map(|u| a[u][u]).sum();
        let floor = 1e-12 * trace + 1e-300;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut m = a;
            for u in 0..4 {
                m[u][u] += lambda * (a[u][u] + floor);
            }
            let Some(step) = solve4(m, g) else {
                lambda *= 4.0;
                continue;
            };
            let (lo, hi) = bounds.project(p[2] + step[2], p[3] + step[3], (p[2], p[3]));
            let cand = [p[0] + step[0], p[1] + step[1], lo, hi];
            let new_loss = sse4(samples, &cand);
            if new_loss.is_finite() && new_loss < loss {
                let improvement = loss - new_loss;
                p = cand;
                loss = new_loss;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = improvement > 1e-18 * (1.0 + loss);
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    p
}

/// Gaussian elimination with partial pivoting for a 4x4 system.
fn solve4(mut m: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let k = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (cell, &p) in m[row].iter_mut().zip(&pivot_row).skip(col) {
                *cell -= k * p;
            }
            b[row] -= k * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|c| m[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
