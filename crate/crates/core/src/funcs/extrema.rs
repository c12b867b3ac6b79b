//! Branch-and-bound enclosures of the extrema of an expression.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::expr::Expr;
use super::interval::Interval;

/// Stopping rule for the bisection search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Target enclosure width relative to the extremum magnitude.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of subdivisions.
    pub budget: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            budget: 100_000,
        }
    }
}

/// Enclosure of one extremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enclosure {
    pub lo: f64,
    pub hi: f64,
    pub reached_tolerance: bool,
}

/// Enclosure of `expr` over `dom`: mean-value form intersected with the
/// natural extension.
fn enclose(expr: &Expr, dom: Interval) -> Interval {
    let (natural, slope) = expr.range_with_slope(dom);
    let m = dom.mid();
    let half = 0.5 * dom.width();
    let centre = expr.range(Interval::point(m));
    let mv = centre + slope * Interval::new(-half, half);
    mv.intersect(&natural).unwrap_or(natural)
}

struct Cell {
    dom: Interval,
    bound: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound)
    }
}

/// Enclose `max_{x ∈ dom} sign·expr(x)`.
fn search(expr: &Expr, dom: Interval, sign: f64, opts: SearchOptions) -> Enclosure {
    let upper = |d: Interval| {
        let e = enclose(expr, d);
        if sign > 0.0 { e.hi } else { -e.lo }
    };
    let sample = |x: f64| {
        let e = expr.range(Interval::point(x));
        if sign > 0.0 { e.lo } else { -e.hi }
    };
    let mut best = sample(dom.lo).max(sample(dom.hi)).max(sample(dom.mid()));
    let mut heap = BinaryHeap::new();
    heap.push(Cell {
        dom,
        bound: upper(dom),
    });
    let mut splits = 0;
    loop {
        let top = heap.peek().expect("search heap never empties").bound;
        let tol = opts.rel_tol * best.abs() + opts.abs_tol;
        if top - best <= tol || splits >= opts.budget {
            return Enclosure {
                lo: best.min(top),
                hi: top,
                reached_tolerance: top - best <= tol,
            };
        }
        let cell = heap.pop().expect("peeked");
        let (a, b) = cell.dom.split();
        if a.width() == 0.0 || b.width() == 0.0 {
            // Cannot split further in floating point.
            return Enclosure {
                lo: best.min(cell.bound),
                hi: cell.bound,
                reached_tolerance: false,
            };
        }
        splits += 1;
        for d in [a, b] {
            best = best.max(sample(d.mid()));
            let bound = upper(d).min(cell.bound);
            if bound >= best {
                heap.push(Cell { dom: d, bound });
            }
        }
        if heap.is_empty() {
            return Enclosure {
                lo: best,
                hi: best,
                reached_tolerance: true,
            };
        }
    }
}

pub fn max_of(expr: &Expr, dom: Interval, opts: SearchOptions) -> Enclosure {
    search(expr, dom, 1.0, opts)
}

pub fn min_of(expr: &Expr, dom: Interval, opts: SearchOptions) -> Enclosure {
    let e = search(expr, dom, -1.0, opts);
    Enclosure {
        lo: -e.hi,
        hi: -e.lo,
        reached_tolerance: e.reached_tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_extrema_enclose_truth() {
        let e = Expr::parse("x*sin(3*x)").unwrap();
        let mx = max_of(&e, Interval::new(0.0, 2.0), SearchOptions::default());
        // true maximum near x ≈ 0.6755
        let truth = (0..=2_000_000)
            .map(|j| e.eval(j as f64 * 1e-6))
            .fold(f64::MIN, f64::max);
        assert!(mx.reached_tolerance);
        assert!(mx.lo <= truth + 1e-12 && truth <= mx.hi + 1e-12);
        assert!(mx.hi - mx.lo <= 1e-11);
        let mn = min_of(&e, Interval::new(0.0, 2.0), SearchOptions::default());
        assert!(mn.hi <= e.eval(1.72) + 1e-12);
    }

    #[test]
    fn tiny_budget_reports_failure() {
        let e = Expr::parse("sin(50*x)*cos(7*x)").unwrap();
        let opts = SearchOptions {
            budget: 3,
            ..SearchOptions::default()
        };
        let mx = max_of(&e, Interval::unit(), opts);
        assert!(!mx.reached_tolerance);
        assert!(mx.lo <= mx.hi);
    }
}
