//! Derivative-free minimization of convex functions over boxes.
//!
//! The workhorse is cyclic coordinate descent with an exact golden-section
//! line search per coordinate. Convexity makes every line restriction
//! unimodal, so the line searches are globally correct. Because the
//! objectives here are typically nonsmooth (pointwise suprema), a stalled
//! cycle triggers additional golden-section searches along pairwise and
//! full diagonal directions, which dislodges coordinate-locked kinks.

/// Inverse golden ratio step (2 − φ).
const RESP: f64 = 0.381_966_011_250_105_1;

/// Minimize a unimodal `f` on `[a, b]`. Returns `(x_min, f_min)`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    debug_assert!(a <= b);
    let mut x1 = a + RESP * (b - a);
    let mut x2 = b - RESP * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while (b - a) > 1e-13 * (1.0 + a.abs() + b.abs()) && iters < 160 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + RESP * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - RESP * (b - a);
            f2 = f(x2);
        }
        iters += 1;
    }
    // also probe the interval endpoints; minima frequently sit on the box
    let (fa, fb) = (f(a), f(b));
    let mut best = (x1, f1);
    for cand in [(x2, f2), (a, fa), (b, fb)] {
        if cand.1 < best.1 {
            best = cand;
        }
    }
    best
}

/// Globally minimize a jointly convex `f` over a box by nested
/// golden-section: the partial minimum over trailing coordinates is again
/// convex in the leading one, so each level is a valid unimodal 1-D search.
/// Exact up to float tolerance for any convex `f`, including the
/// piecewise-affine duals whose kink canyons defeat coordinate descent.
/// Cost grows like 160^n, which is fine for the n ≤ 4 this crate needs.
pub(crate) fn nested_golden_min(
    f: &dyn Fn(&[f64]) -> f64,
    lower: &[f64],
    upper: &[f64],
) -> (Vec<f64>, f64) {
    let n = lower.len();
    debug_assert!(n >= 1);
    if n == 1 {
        let (x, v) = golden_section(|t| f(&[t]), lower[0], upper[0]);
        return (vec![x], v);
    }
    let tail_lower = &lower[1..];
    let tail_upper = &upper[1..];
    let solve_tail = |head: f64| {
        let g = |tail: &[f64]| {
            let mut full = Vec::with_capacity(n);
            full.push(head);
            full.extend_from_slice(tail);
            f(&full)
        };
        nested_golden_min(&g, tail_lower, tail_upper)
    };
    let (head, _) = golden_section(|t| solve_tail(t).1, lower[0], upper[0]);
    let (tail, value) = solve_tail(head);
    let mut x = Vec::with_capacity(n);
    x.push(head);
    x.extend(tail);
    (x, value)
}

#[derive(Debug, Clone)]
pub(crate) struct BoxMinimizeOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Completed descent cycles (all starts pooled).
    pub cycles: usize,
    /// False when the cycle cap was exhausted before the stopping rule fired.
    pub converged: bool,
}

pub(crate) struct BoxMinimizer {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Stop when a full cycle improves the value by less than this.
    pub cycle_tol: f64,
    pub max_cycles: usize,
}

impl BoxMinimizer {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        BoxMinimizer {
            lower,
            upper,
            cycle_tol: 1e-9,
            max_cycles: 10_000,
        }
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, (&lo, &hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(lo, hi);
        }
    }

    /// Golden-section along `x + t * dir` restricted to the box. Updates
    /// `x`/`val` when the search improves on them.
    fn line_search(&self, f: &dyn Fn(&[f64]) -> f64, x: &mut [f64], val: &mut f64, dir: &[f64]) {
        let mut t_lo = f64::NEG_INFINITY;
        let mut t_hi = f64::INFINITY;
        for (k, &d) in dir.iter().enumerate() {
            if d > 0.0 {
                t_lo = t_lo.max((self.lower[k] - x[k]) / d);
                t_hi = t_hi.min((self.upper[k] - x[k]) / d);
            } else if d < 0.0 {
                t_lo = t_lo.max((self.upper[k] - x[k]) / d);
                t_hi = t_hi.min((self.lower[k] - x[k]) / d);
            }
        }
        if !t_lo.is_finite() || !t_hi.is_finite() || t_hi - t_lo <= 0.0 {
            return;
        }
        let probe = |t: f64| {
            let mut y = x.to_vec();
            for (k, &d) in dir.iter().enumerate() {
                y[k] += t * d;
            }
            self.clamp(&mut y);
            f(&y)
        };
        let (t_best, f_best) = golden_section(probe, t_lo, t_hi);
        if f_best < *val {
            for (k, &d) in dir.iter().enumerate() {
                x[k] += t_best * d;
            }
            self.clamp(x);
            *val = f_best;
        }
    }

    fn descend_from(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        start: &[f64],
    ) -> (Vec<f64>, f64, usize, bool) {
        let n = self.lower.len();
        let mut x = start.to_vec();
        self.clamp(&mut x);
        let mut val = f(&x);
        let mut cycles = 0;
        let mut converged = false;

        let mut extra_dirs: Vec<Vec<f64>> = Vec::new();
        for k in 0..n {
            for l in k + 1..n {
                for sign in [1.0, -1.0] {
                    let mut d = vec![0.0; n];
                    d[k] = 1.0;
                    d[l] = sign;
                    extra_dirs.push(d);
                }
            }
        }
        if n >= 3 {
            // full diagonals, one representative per sign pattern
            for bits in 0..(1u32 << (n - 1)) {
                let mut d = vec![1.0; n];
                for (k, v) in d.iter_mut().enumerate().skip(1) {
                    if (bits >> (k - 1)) & 1 == 1 {
                        *v = -1.0;
                    }
                }
                extra_dirs.push(d);
            }
        }

        while cycles < self.max_cycles {
            cycles += 1;
            let before = val;
            let cycle_start = x.clone();
            for k in 0..n {
                let mut d = vec![0.0; n];
                d[k] = 1.0;
                self.line_search(f, &mut x, &mut val, &d);
            }
            // net-displacement direction tracks canyon axes the coordinate
            // moves only zigzag along
            let momentum: Vec<f64> = x.iter().zip(&cycle_start).map(|(a, b)| a - b).collect();
            if momentum.iter().any(|&v| v.abs() > 1e-14) {
                self.line_search(f, &mut x, &mut val, &momentum);
            }
            if before - val < self.cycle_tol {
                let stalled_at = val;
                for d in &extra_dirs {
                    self.line_search(f, &mut x, &mut val, d);
                }
                if stalled_at - val < self.cycle_tol {
                    converged = true;
                    break;
                }
            }
        }
        (x, val, cycles, converged)
    }

    /// Minimize from each start, keep the best end point.
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, starts: &[Vec<f64>]) -> BoxMinimizeOutcome {
        assert!(!starts.is_empty());
        let f: &dyn Fn(&[f64]) -> f64 = &f;
        let mut best: Option<(Vec<f64>, f64, bool)> = None;
        let mut total_cycles = 0;
        for start in starts {
            let (x, v, cycles, converged) = self.descend_from(f, start);
            total_cycles += cycles;
            let better = best.as_ref().is_none_or(|(_, bv, _)| v < *bv);
            if better {
                best = Some((x, v, converged));
            }
        }
        let (x, value, converged) = best.expect("at least one start");
        BoxMinimizeOutcome {
            x,
            value,
            cycles: total_cycles,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_quadratic() {
        let (x, v) = golden_section(|t| (t - 2.0) * (t - 2.0) + 1.0, 0.0, 10.0);
        // for smooth minima the argument localizes to ~sqrt(eps), the value to eps
        assert!((x - 2.0).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_kink() {
        // nonsmooth minimum localizes to machine precision
        let (x, v) = golden_section(|t| (t - 3.0).abs() * 2.0 + 0.25, 0.0, 10.0);
        assert!((x - 3.0).abs() < 1e-11);
        assert!((v - 0.25).abs() < 1e-11);
    }

    #[test]
    fn golden_section_boundary_minimum() {
        let (x, v) = golden_section(|t| t, 1.0, 5.0);
        assert!((x - 1.0).abs() < 1e-9);
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn box_minimizer_smooth_quadratic() {
        let m = BoxMinimizer::new(vec![-10.0, -10.0], vec![10.0, 10.0]);
        let out = m.minimize(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + 0.5,
            &[vec![5.0, 5.0]],
        );
        assert!((out.x[0] - 1.0).abs() < 1e-5);
        assert!((out.x[1] + 2.0).abs() < 1e-5);
        assert!((out.value - 0.5).abs() < 1e-10);
        assert!(out.converged);
    }

    #[test]
    fn box_minimizer_escapes_coordinate_lock() {
        // |x + y| + 0.1|x - y| has its minimum at the origin but pure
        // coordinate moves stall anywhere on x = -y.
        let m = BoxMinimizer::new(vec![-5.0, -5.0], vec![5.0, 5.0]);
        let out = m.minimize(
            |x| (x[0] + x[1]).abs() + 0.1 * (x[0] - x[1]).abs(),
            &[vec![3.0, -3.0]],
        );
        assert!(
            out.value < 1e-7,
            "stalled at {} with x = {:?}",
            out.value,
            out.x
        );
    }

    #[test]
    fn box_minimizer_respects_bounds() {
        let m = BoxMinimizer::new(vec![1.0], vec![4.0]);
        let out = m.minimize(|x| (x[0] - 10.0).powi(2), &[vec![1.5]]);
        assert!((out.x[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn nested_golden_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2) + 0.25;
        let (x, v) = nested_golden_min(&f, &[0.0, 0.0], &[10.0, 10.0]);
        assert!((x[0] - 1.0).abs() < 1e-5);
        assert!((x[1] - 2.0).abs() < 1e-5);
        assert!((v - 0.25).abs() < 1e-10);
    }

    #[test]
    fn nested_golden_polyhedral_canyon() {
        // narrow kinked valley along an oblique direction: the global
        // minimum is at the origin with value 0
        let f = |x: &[f64]| {
            (x[0] + 0.9 * x[1] - 0.4 * x[2]).abs() * 10.0
                + (x[0] - x[1]).abs() * 0.01
                + x[2].abs() * 0.02
        };
        let (_, v) = nested_golden_min(&f, &[0.0, 0.0, 0.0], &[5.0, 5.0, 5.0]);
        assert!(v.abs() < 1e-8, "canyon minimum missed: {v}");
    }
}
