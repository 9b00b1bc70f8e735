//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_BRACKET: usize = 30;
const MAX_ZOOM: usize = 40;

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    /// Stop when the gradient 2-norm falls below this.
    pub gtol: f64,
    pub max_iter: usize,
    pub memory: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-8,
            max_iter: 500,
            memory: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    dphi: f64,
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    dphi0: f64,
    evaluations: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> LineSearch<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        let xt: Vec<f64> = self.x.iter().zip(self.d).map(|(x, d)| x + alpha * d).collect();
        let mut g = vec![0.0; xt.len()];
        let f = (self.f)(&xt, &mut g);
        self.evaluations += 1;
        let (f, dphi) = if f.is_finite() && g.iter().all(|v| v.is_finite()) {
            (f, dot(&g, self.d))
        } else {
            (f64::INFINITY, f64::NAN)
        };
        Point { alpha, f, g, dphi }
    }

    fn armijo(&self, p: &Point) -> bool {
        p.f <= self.f0 + C1 * p.alpha * self.dphi0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.dphi.abs() <= -C2 * self.dphi0
    }

    fn search(&mut self, alpha0: f64) -> Option<Point> {
        let mut prev = Point {
            alpha: 0.0,
            f: self.f0,
            g: Vec::new(),
            dphi: self.dphi0,
        };
        let mut alpha = alpha0;
        for i in 0..MAX_BRACKET {
            let cur = self.eval(alpha);
            if !self.armijo(&cur) || (i > 0 && cur.f >= prev.f) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Some(cur);
            }
            if cur.dphi >= 0.0 {
                return self.zoom(cur, prev);
            }
            alpha *= 2.0;
            prev = cur;
        }
        (prev.alpha > 0.0).then_some(prev)
    }

    /// `lo` satisfies Armijo and has the lowest value seen; `hi` brackets a
    /// point satisfying both conditions.
    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Option<Point> {
        for _ in 0..MAX_ZOOM {
            let alpha = interpolate(&lo, &hi);
            let cur = self.eval(alpha);
            if !self.armijo(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Some(cur);
                }
                if cur.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
            if (hi.alpha - lo.alpha).abs() <= 1e-16 * lo.alpha.abs().max(1e-300) {
                break;
            }
        }
        (lo.alpha > 0.0).then_some(lo)
    }
}

/// Cubic interpolation between two bracket ends, falling back to bisection
/// when the minimizer is undefined or too close to an end.
fn interpolate(a: &Point, b: &Point) -> f64 {
    let mid = 0.5 * (a.alpha + b.alpha);
    if !(a.f.is_finite() && b.f.is_finite() && a.dphi.is_finite() && b.dphi.is_finite()) {
        return mid;
    }
    let d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let rad = d1 * d1 - a.dphi * b.dphi;
    if rad < 0.0 {
        return mid;
    }
    let d2 = (b.alpha - a.alpha).signum() * rad.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / (b.dphi - a.dphi + 2.0 * d2);
    let (lo, hi) = if a.alpha < b.alpha {
        (a.alpha, b.alpha)
    } else {
        (b.alpha, a.alpha)
    };
    let margin = 0.1 * (hi - lo);
    if t.is_finite() && t > lo + margin && t < hi - margin {
        t
    } else {
        mid
    }
}

/// Minimize `f`, which writes its gradient into the second argument and
/// returns the value.
pub fn minimize_lbfgs<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut converged = norm(&g) < opts.gtol;

    while !converged && iterations < opts.max_iter {
        let mut d = two_loop(&g, &history);
        let mut dphi0 = dot(&g, &d);
        if !(dphi0 < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            dphi0 = -dot(&g, &g);
        }
        let alpha0 = if history.is_empty() {
            (1.0 / norm(&g)).min(1.0)
        } else {
            1.0
        };
        let mut ls = LineSearch {
            f: &mut f,
            x: &x,
            d: &d,
            f0: fx,
            dphi0,
            evaluations: 0,
        };
        let found = ls.search(alpha0);
        evaluations += ls.evaluations;
        let Some(p) = found else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        iterations += 1;
        let s: Vec<f64> = d.iter().map(|d| p.alpha * d).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        let stalled = (fx - p.f).abs() <= 1e-16 * fx.abs().max(1.0) && norm(&s) <= 1e-16 * norm(&x).max(1.0);
        fx = p.f;
        g = p.g;
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        converged = norm(&g) < opts.gtol;
        if stalled {
            break;
        }
    }
    LbfgsResult {
        x,
        f: fx,
        grad: g,
        iterations,
        evaluations,
        converged,
    }
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
