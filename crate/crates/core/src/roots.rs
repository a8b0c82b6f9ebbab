//! Scalar root finding: real roots of polynomials and bracketed roots of
//! continuous functions.
//!
//! Polynomial roots are isolated recursively: the real roots of `p'` cut the
//! line into intervals where `p` is monotone, so each sign change brackets
//! exactly one root, which Brent's method then refines. Critical points where
//! `p` itself vanishes (to rounding) are reported as multiple roots.

use crate::error::{Error, Result};

/// Evaluates `sum c_i x^i` (coefficients in ascending order) by Horner's rule.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect()
}

/// All distinct real roots of the polynomial, ascending.
///
/// A polynomial that is identically zero has no isolated roots and yields an
/// empty list.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    match c.len() {
        0 | 1 => Vec::new(),
        2 => vec![-c[0] / c[1]],
        3 => quadratic_roots(c[0], c[1], c[2]),
        _ => isolate(&c),
    }
}

fn quadratic_roots(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    let disc = c1 * c1 - 4.0 * c2 * c0;
    let scale = c1 * c1 + (4.0 * c2 * c0).abs();
    if disc < -1e-14 * scale {
        return Vec::new();
    }
    if disc <= 1e-14 * scale {
        return vec![-c1 / (2.0 * c2)];
    }
    let q = -0.5 * (c1 + c1.signum_or_one() * disc.sqrt());
    let mut r = vec![q / c2, if q != 0.0 { c0 / q } else { 0.0 }];
    r.sort_by(|a, b| a.total_cmp(b));
    r
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

fn isolate(c: &[f64]) -> Vec<f64> {
    let lead = *c.last().unwrap();
    let bound = 1.0 + c[..c.len() - 1].iter().map(|v| (v / lead).abs()).fold(0.0, f64::max);
    let crit = real_roots(&poly_derivative(c));

    let magnitude = |x: f64| -> f64 {
        c.iter()
            .enumerate()
            .map(|(i, v)| v.abs() * x.abs().powi(i as i32))
            .sum()
    };

    let mut knots = vec![-bound];
    knots.extend(crit.iter().copied().filter(|x| x.abs() < bound));
    knots.push(bound);

    let mut roots = Vec::new();
    for &x in &crit {
        if poly_eval(c, x).abs() <= 64.0 * f64::EPSILON * magnitude(x) {
            roots.push(x);
        }
    }
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (poly_eval(c, a), poly_eval(c, b));
        if fa == 0.0 {
            roots.push(a);
        }
        if fa * fb < 0.0 {
            if let Ok(r) = brent(|x| poly_eval(c, x), a, b, 0.0) {
                roots.push(r);
            }
        }
    }
    if poly_eval(c, bound) == 0.0 {
        roots.push(bound);
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    roots
}

/// Brent's method for a root of `f` on `[a, b]`; `f(a)` and `f(b)` must differ in sign.
///
/// `tol` is an absolute x-tolerance; 0 means "to machine precision".
pub fn brent(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::RootFinding {
            lo: a,
            hi: b,
            reason: format!("no sign change (f(lo) = {fa}, f(hi) = {fb})"),
        });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::RootFinding {
        lo: a,
        hi: b,
        reason: "iteration limit reached".into(),
    })
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a).abs() > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}
