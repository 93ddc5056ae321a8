//! Adaptive Gauss quadrature with an embedded 7/15-point error estimate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Tolerance settings shared by every quadrature-backed operation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_subdivisions: 200,
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // P_n(x) and P_n'(x) via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        // final derivative at the converged node for the weight
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

fn rules() -> &'static (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    static RULES: OnceLock<(Vec<(f64, f64)>, Vec<(f64, f64)>)> = OnceLock::new();
    RULES.get_or_init(|| (legendre_rule(7), legendre_rule(15)))
}

struct Segment {
    err: f64,
    value: f64,
    a: f64,
    b: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Evaluate the 15-point rule on [a, b] with the 7-point rule as the
/// embedded error reference. Returns (value, err_estimate).
fn eval_segment<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let (r7, r15) = rules();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s15 = 0.0;
    for &(x, w) in r15 {
        let fx = f(mid + half * x);
        if !fx.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand at x = {:e}",
                mid + half * x
            )));
        }
        s15 += w * fx;
    }
    let mut s7 = 0.0;
    for &(x, w) in r7 {
        let fx = f(mid + half * x);
        if !fx.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand at x = {:e}",
                mid + half * x
            )));
        }
        s7 += w * fx;
    }
    Ok((half * s15, (half * (s15 - s7)).abs()))
}

/// Adaptive integration over [a, b], bisecting the segment with the largest
/// error estimate until the summed estimate meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_with_breakpoints(&f, &[a, b], spec)
}

/// Same as `integrate`, but seeds the subdivision with caller-supplied
/// breakpoints so narrow features are not missed by the initial rule.
/// `points` must be sorted ascending; adjacent duplicates are skipped.
pub fn integrate_with_breakpoints<F: Fn(f64) -> f64>(
    f: &F,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Domain("need at least two breakpoints".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(Error::Domain(format!("bad integration bounds [{a}, {b}]")));
        }
        if b - a <= 0.0 {
            continue;
        }
        let (v, e) = eval_segment(f, a, b)?;
        total += v;
        total_err += e;
        heap.push(Segment {
            err: e,
            value: v,
            a,
            b,
        });
    }

    let mut splits = 0u32;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            return Ok(total);
        }
        if splits >= spec.max_subdivisions {
            return Err(Error::Quadrature(format!(
                "did not converge after {} subdivisions (err {:e}, tol {:e})",
                spec.max_subdivisions, total_err, tol
            )));
        }
        let worst = heap.pop().expect("heap cannot be empty while err > 0");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // segment is at f64 resolution; accept its contribution as-is
            total_err -= worst.err;
            if heap.is_empty() {
                return Ok(total);
            }
            continue;
        }
        let (v1, e1) = eval_segment(f, worst.a, mid)?;
        let (v2, e2) = eval_segment(f, mid, worst.b)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Segment {
            err: e1,
            value: v1,
            a: worst.a,
            b: mid,
        });
        heap.push(Segment {
            err: e2,
            value: v2,
            a: mid,
            b: worst.b,
        });
        splits += 1;
    }
}
