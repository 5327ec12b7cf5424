//! Choosing `v̂` inside a degenerate top eigenspace.
//!
//! When the optimum sits on an eigenvalue crossing, every unit vector in the
//! top eigenspace is a valid `v̂`, but only some of them satisfy
//! complementary slackness. The backend returns an arbitrary one; here we
//! rotate inside the (near-)degenerate cluster to the vector whose
//! constraint values best match the multipliers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DualPoint, Evaluator, FEASIBILITY_TOL};
use crate::engines::normalize_sign;
use crate::error::Result;

pub(crate) const CLUSTER_TOL: f64 = 1e-4;
pub(crate) const MAX_CLUSTER: usize = 8;
pub(crate) const ACTIVE: f64 = 1e-10;

/// Per-constraint KKT residuals for the given constraint values: slackness
/// for positive multipliers, infeasibility for zero ones.
pub(crate) fn residuals(lambdas: &[f64], constraint_values: &[f64]) -> Vec<f64> {
    lambdas
        .iter()
        .zip(constraint_values)
        .map(|(&l, &c)| {
            if l > ACTIVE {
                (l * (c - 1.0)).abs()
            } else {
                (c - 1.0).max(0.0)
            }
        })
        .collect()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

/// Rotates `point.eigenvector` inside the top cluster when that reduces the
/// KKT residuals. Returns whether the vector changed.
pub(crate) fn resolve(ev: &mut Evaluator<'_>, point: &mut DualPoint) -> Result<bool> {
    let before = max_of(&residuals(&point.lambdas, &point.constraint_values));
    if before <= FEASIBILITY_TOL {
        return Ok(false);
    }
    let kc = ev.op.max_pairs().min(MAX_CLUSTER);
    if kc < 2 {
        return Ok(false);
    }
    let sol = ev.op.top_eigenpairs(&point.lambdas, kc)?;
    let mu = sol.eigenvalues[0];
    let d = sol
        .eigenvalues
        .iter()
        .take_while(|&&e| mu - e <= CLUSTER_TOL * mu.abs().max(1.0))
        .count();
    if d < 2 {
        return Ok(false);
    }
    let w = sol.eigenvectors.columns(0, d).into_owned();
    let m = point.lambdas.len();
    let projected: Vec<DMatrix<f64>> = (0..m)
        .map(|j| project_form(&w, |v| ev.op.background_form(j, v)))
        .collect();

    let objective = Objective {
        lambdas: &point.lambdas,
        forms: &projected,
    };
    let c = if d == 2 {
        objective.minimize_circle()
    } else {
        objective.minimize_sphere(d)
    };

    let mut v = &w * c;
    v.normalize_mut();
    normalize_sign(v.as_mut_slice());
    let constraint_values: Vec<f64> = (0..m).map(|j| ev.op.background_form(j, &v)).collect();
    let after = max_of(&residuals(&point.lambdas, &constraint_values));
    log::debug!("degenerate cluster of size {d}: KKT residual {before:.3e} -> {after:.3e}");
    if after >= before {
        return Ok(false);
    }
    point.gradient = constraint_values.iter().map(|c| 1.0 - c).collect();
    point.constraint_values = constraint_values;
    point.eigenvector = v;
    Ok(true)
}

/// `Wᵀ M W` from the quadratic form of `M` alone, by polarization.
pub(crate) fn project_form(w: &DMatrix<f64>, form: impl Fn(&DVector<f64>) -> f64) -> DMatrix<f64> {
    let d = w.ncols();
    let mut out = DMatrix::zeros(d, d);
    for a in 0..d {
        let wa = w.column(a).into_owned();
        out[(a, a)] = form(&wa);
        for b in 0..a {
            let wb = w.column(b);
            let plus = form(&(&wa + wb));
            let minus = form(&(&wa - wb));
            let x = 0.25 * (plus - minus);
            out[(a, b)] = x;
            out[(b, a)] = x;
        }
    }
    out
}

fn qf(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

struct Objective<'a> {
    lambdas: &'a [f64],
    forms: &'a [DMatrix<f64>],
}

impl Objective<'_> {
    fn weights(&self, j: usize) -> (bool, f64) {
        let l = self.lambdas[j];
        if l > ACTIVE {
            (true, l * l)
        } else {
            (false, 1.0)
        }
    }

    fn value(&self, c: &DVector<f64>) -> f64 {
        (0..self.forms.len())
            .map(|j| {
                let r = qf(&self.forms[j], c) - 1.0;
                match self.weights(j) {
                    (true, w) => w * r * r,
                    (false, w) => w * r.max(0.0).powi(2),
                }
            })
            .sum()
    }

    fn gradient(&self, c: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(c.len());
        for (j, f) in self.forms.iter().enumerate() {
            let bc = f * c;
            let r = c.dot(&bc) - 1.0;
            let coef = match self.weights(j) {
                (true, w) => 4.0 * w * r,
                (false, w) => 4.0 * w * r.max(0.0),
            };
            g.axpy(coef, &bc, 1.0);
        }
        g
    }

    fn on_circle(&self, t: f64) -> f64 {
        self.value(&DVector::from_vec(vec![t.cos(), t.sin()]))
    }

    fn minimize_circle(&self) -> DVector<f64> {
        const GRID: usize = 3600;
        let step = std::f64::consts::PI / GRID as f64;
        let vals: Vec<f64> = (0..GRID).map(|i| self.on_circle(i as f64 * step)).collect();
        let mut local: Vec<usize> = (0..GRID)
            .filter(|&i| {
                let l = vals[(i + GRID - 1) % GRID];
                let r = vals[(i + 1) % GRID];
                vals[i] <= l && vals[i] <= r
            })
            .collect();
        local.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        local.truncate(4);
        let mut best = (f64::INFINITY, 0.0);
        for i in local {
            let t0 = i as f64 * step;
            let t = golden(|t| self.on_circle(t), t0 - step, t0 + step);
            let f = self.on_circle(t);
            if f < best.0 {
                best = (f, t);
            }
        }
        DVector::from_vec(vec![best.1.cos(), best.1.sin()])
    }

    fn minimize_sphere(&self, d: usize) -> DVector<f64> {
        let mut starts: Vec<DVector<f64>> = Vec::new();
        for a in 0..d {
            starts.push(DVector::from_fn(d, |i, _| if i == a { 1.0 } else { 0.0 }));
            for b in 0..a {
                for s in [1.0, -1.0] {
                    let mut v = DVector::zeros(d);
                    v[a] = 1.0;
                    v[b] = s;
                    starts.push(v.normalize());
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0xdec0_de);
        for _ in 0..16 {
            let v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            if v.norm() > 1e-3 {
                starts.push(v.normalize());
            }
        }
        starts
            .into_iter()
            .map(|s| self.descend(s))
            .min_by(|a, b| self.value(a).total_cmp(&self.value(b)))
            .expect("at least one start")
    }

    /// Projected gradient descent on the unit sphere with backtracking.
    fn descend(&self, mut c: DVector<f64>) -> DVector<f64> {
        let mut f = self.value(&c);
        let mut step = 1.0;
        for _ in 0..500 {
            let g = self.gradient(&c);
            let tangent = &g - &c * c.dot(&g);
            if tangent.norm() < 1e-15 || f < 1e-24 {
                break;
            }
            let mut moved = false;
            while step > 1e-14 {
                let trial = (&c - &tangent * step).normalize();
                let ft = self.value(&trial);
                if ft < f {
                    c = trial;
                    f = ft;
                    step *= 2.0;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        c
    }
}

pub(crate) fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
        if b - a < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polarization_recovers_projection() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, -0.3, 0.1, -0.3, 0.7]);
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.6, 0.0, 0.8]);
        let got = project_form(&w, |v| qf(&m, v));
        let want = w.transpose() * &m * &w;
        assert!((got - want).amax() < 1e-14);
    }

    #[test]
    fn circle_search_hits_unit_constraint() {
        // diag(4, 0.5): cᵀBc = 1 at cos²θ = 1/7.
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.5]));
        let lambdas = [2.0 / 7.0];
        let forms = [b.clone()];
        let obj = Objective {
            lambdas: &lambdas,
            forms: &forms,
        };
        let c = obj.minimize_circle();
        assert!((qf(&b, &c) - 1.0).abs() < 1e-12);
        assert!((c[0] * c[0] - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_search_meets_two_active_constraints() {
        let b1 = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.2, 0.5]));
        let b2 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 2.5, 0.4]));
        let lambdas = [0.5, 0.5];
        let forms = [b1.clone(), b2.clone()];
        let obj = Objective {
            lambdas: &lambdas,
            forms: &forms,
        };
        let c = obj.minimize_sphere(3);
        assert!((c.norm() - 1.0).abs() < 1e-12);
        assert!((qf(&b1, &c) - 1.0).abs() < 1e-8);
        assert!((qf(&b2, &c) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn residuals_split_active_and_inactive() {
        let r = residuals(&[0.5, 0.0, 0.0], &[1.2, 0.5, 1.1]);
        assert!((r[0] - 0.1).abs() < 1e-15);
        assert_eq!(r[1], 0.0);
        assert!((r[2] - 0.1).abs() < 1e-15);
    }
}
