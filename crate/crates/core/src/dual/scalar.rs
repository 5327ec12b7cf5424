//! Bounded 1-D minimization of the convex dual along a ray `λ₀ + t·d`.
//!
//! The search keeps a bracket `[lo, hi]` with `g'(lo) < 0 < g'(hi)`. Steps
//! are secant steps on the derivative, falling back to the intersection of
//! the endpoint tangents and then to bisection. That intersection lands
//! exactly on a kink between two affine pieces, which is where the optimum
//! sits whenever the top eigenvalue is degenerate there, and it also gives
//! a certified lower bound on the minimum.

use super::{DualPoint, Evaluator, SolverOptions};
use crate::error::Result;

const UPPER_CAP: f64 = 1e6;
const DOUBLING_LIMIT: f64 = 1e12;

pub(crate) struct LineOutcome {
    pub point: DualPoint,
    pub converged: bool,
}

struct Sample {
    x: f64,
    f: f64,
    d: f64,
}

/// The points `origin + t·dir` for `t_min ≤ t ≤ t_max`.
pub(crate) struct Line {
    pub origin: Vec<f64>,
    pub dir: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    /// First trial step when searching for an upper bracket.
    pub hint: f64,
}

impl Line {
    fn lambdas(&self, t: f64) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.dir)
            .map(|(o, d)| (o + t * d).max(0.0))
            .collect()
    }

    fn sample(&self, p: &DualPoint, t: f64) -> Sample {
        Sample {
            x: t,
            f: p.value,
            d: p.gradient.iter().zip(&self.dir).map(|(g, d)| g * d).sum(),
        }
    }

    fn at(&self, ev: &mut Evaluator<'_>, t: f64) -> Result<(DualPoint, Sample)> {
        let p = ev.evaluate(&self.lambdas(t))?;
        let s = self.sample(&p, t);
        Ok((p, s))
    }
}

/// Minimizes `g` over `λ_j ≥ 0` with the other multipliers fixed at their
/// values in `start`. Returns the best point evaluated.
pub(crate) fn minimize_coordinate(
    ev: &mut Evaluator<'_>,
    start: DualPoint,
    j: usize,
    opts: &SolverOptions,
) -> Result<LineOutcome> {
    let mut origin = start.lambdas.clone();
    origin[j] = 0.0;
    let mut dir = vec![0.0; origin.len()];
    dir[j] = 1.0;
    let floor = ev.op.background_floor(j);
    let hint = if floor > 0.0 {
        (start.top_eigenvalue().abs() / floor.max(1e-12)).min(UPPER_CAP)
    } else {
        1.0
    };
    let line = Line {
        origin,
        dir,
        t_min: 0.0,
        t_max: f64::INFINITY,
        hint,
    };
    let t = start.lambdas[j];
    minimize_line(ev, start, t, None, &line, opts)
}

/// Minimizes `g` along `line`, starting from `start` at parameter `t0`.
/// `slope0` replaces the sampled slope at the start, for callers that know
/// the one-sided directional derivative there.
pub(crate) fn minimize_line(
    ev: &mut Evaluator<'_>,
    start: DualPoint,
    t0: f64,
    slope0: Option<f64>,
    line: &Line,
    opts: &SolverOptions,
) -> Result<LineOutcome> {
    let budget_start = ev.evaluations().saturating_sub(1);
    let spent = |ev: &Evaluator<'_>| ev.evaluations() - budget_start;
    let tol = opts.tol_grad;

    let mut s = line.sample(&start, t0);
    if let Some(d) = slope0 {
        s.d = d;
    }
    if s.d.abs() <= tol || (s.x <= line.t_min && s.d > 0.0) || (s.x >= line.t_max && s.d < 0.0) {
        return Ok(LineOutcome {
            point: start,
            converged: true,
        });
    }

    let mut best = start.clone();
    let keep_best = |p: &DualPoint, best: &mut DualPoint| {
        if p.value < best.value {
            *best = p.clone();
        }
    };
    let out_of_budget = |ev: &Evaluator<'_>| spent(ev) >= opts.max_iter;

    // Establish the bracket.
    let (mut lo, mut hi);
    if s.d > 0.0 {
        hi = s;
        if out_of_budget(ev) {
            return Ok(LineOutcome {
                point: best,
                converged: false,
            });
        }
        let (p0, s0) = line.at(ev, line.t_min)?;
        keep_best(&p0, &mut best);
        if s0.d >= -tol {
            return Ok(LineOutcome {
                point: p0,
                converged: true,
            });
        }
        lo = s0;
    } else {
        lo = s;
        let mut x = line.hint.max(2.0 * lo.x).max(lo.x + 1e-3).min(line.t_max);
        loop {
            if out_of_budget(ev) {
                return Ok(LineOutcome {
                    point: best,
                    converged: false,
                });
            }
            let (p, sp) = line.at(ev, x)?;
            keep_best(&p, &mut best);
            if sp.d.abs() <= tol || (x >= line.t_max && sp.d < 0.0) {
                return Ok(LineOutcome {
                    point: p,
                    converged: true,
                });
            }
            if sp.d > 0.0 {
                hi = sp;
                break;
            }
            lo = sp;
            x = (2.0 * x).min(line.t_max);
            if x > DOUBLING_LIMIT {
                log::warn!("no upper bracket below {DOUBLING_LIMIT:e}");
                return Ok(LineOutcome {
                    point: best,
                    converged: false,
                });
            }
        }
    }

    // Bracketed phase.
    let mut prev: Option<(f64, f64)> = None;
    let mut last: Option<(f64, f64)> = None;
    let mut widths = vec![hi.x - lo.x];
    loop {
        let x_cut = (hi.f - lo.f + lo.d * lo.x - hi.d * hi.x) / (lo.d - hi.d);
        let lower = lo.f + lo.d * (x_cut - lo.x);
        let scale = best.value.abs().max(1.0);
        if best.value - lower <= opts.tol_value * scale {
            return Ok(LineOutcome {
                point: best,
                converged: true,
            });
        }
        if hi.x - lo.x <= 1e-15 * hi.x.max(1.0) {
            return Ok(LineOutcome {
                point: best,
                converged: true,
            });
        }
        if out_of_budget(ev) {
            return Ok(LineOutcome {
                point: best,
                converged: false,
            });
        }

        let inside = |x: f64| x.is_finite() && x > lo.x && x < hi.x;
        let mut x = x_cut;
        if let (Some((xa, da)), Some((xb, db))) = (prev, last) {
            if db != da {
                let secant = xb - db * (xb - xa) / (db - da);
                if inside(secant) {
                    x = secant;
                }
            }
        }
        let n = widths.len();
        let stalled = n >= 3 && widths[n - 1] > 0.5 * widths[n - 3];
        if stalled || !inside(x) {
            x = 0.5 * (lo.x + hi.x);
        }

        let (p, sp) = line.at(ev, x)?;
        keep_best(&p, &mut best);
        if sp.d.abs() <= tol {
            return Ok(LineOutcome {
                point: p,
                converged: true,
            });
        }
        prev = last;
        last = Some((sp.x, sp.d));
        if sp.d < 0.0 {
            lo = sp;
        } else {
            hi = sp;
        }
        widths.push(hi.x - lo.x);
    }
}
