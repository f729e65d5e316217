//! Bernstein basis algebra and coefficient-level shape predicates.
//!
//! A polynomial of order `n` on `[0, tau]` is stored through its Bernstein
//! coefficients `b_0..b_n`. Much of its geometry can be read off those
//! coefficients: ordered coefficients give a monotone curve, non-positive
//! second differences give a concave one, and so on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orders above this use a log-space binomial in [`basis_eval`].
const LOG_SPACE_ORDER: usize = 40;

/// Shape classes recognised by [`shape_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Monotone,
    UnimodalConcave,
    UnimodalConvex,
    Unimodal,
}

impl ShapeClass {
    /// Smallest coefficient vector length for which the predicate is defined.
    pub fn min_len(self) -> usize {
        match self {
            ShapeClass::Monotone => 2,
            ShapeClass::UnimodalConcave | ShapeClass::UnimodalConvex => 3,
            ShapeClass::Unimodal => 4,
        }
    }
}

/// Witness indices `l1 < l2 < l3` of the flat / rise / fall / flat pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnimodalWitness {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("basis argument {t} outside [0, 1]")))
    }
}

fn ln_binomial(n: usize, i: usize) -> f64 {
    let i = i.min(n - i);
    (1..=i)
        .map(|j| ((n - i + j) as f64).ln() - (j as f64).ln())
        .sum()
}

/// `phi_{i,n}(t) = C(n,i) t^i (1-t)^(n-i)` for `t` in `[0, 1]`.
pub fn basis_eval(i: usize, n: usize, t: f64) -> Result<f64> {
    if i > n {
        return Err(Error::Domain(format!("basis index {i} exceeds order {n}")));
    }
    check_unit(t)?;
    let s = 1.0 - t;
    if n <= LOG_SPACE_ORDER {
        let k = i.min(n - i);
        let mut binom = 1.0;
        for j in 1..=k {
            binom = binom * (n - k + j) as f64 / j as f64;
        }
        return Ok(binom * t.powi(i as i32) * s.powi((n - i) as i32));
    }
    // 0^0 = 1 conventions at the endpoints
    if (t == 0.0 && i > 0) || (s == 0.0 && i < n) {
        return Ok(0.0);
    }
    let mut log = ln_binomial(n, i);
    if i > 0 {
        log += i as f64 * t.ln();
    }
    if i < n {
        log += (n - i) as f64 * s.ln();
    }
    Ok(log.exp())
}

/// Fills `out` (length `n + 1`) with every basis function of order `n` at `t`.
///
/// Used to build design matrices; `t` must already be scaled to `[0, 1]`.
pub fn basis_row(n: usize, t: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), n + 1);
    let s = 1.0 - t;
    // out[i] <- t^i, then multiply in C(n,i) (1-t)^(n-i) from the right
    let mut pw = 1.0;
    for v in out.iter_mut() {
        *v = pw;
        pw *= t;
    }
    let mut tail = 1.0;
    let mut binom = 1.0;
    for i in (0..=n).rev() {
        out[i] *= tail * binom;
        tail *= s;
        // C(n, i-1) = C(n, i) * i / (n - i + 1)
        if i > 0 {
            binom = binom * i as f64 / (n - i + 1) as f64;
        }
    }
}

/// A Bernstein polynomial `sum_i b_i phi_{i,n}(t / tau)` on `[0, tau]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinPoly {
    coeffs: Vec<f64>,
    domain_end: f64,
}

impl BernsteinPoly {
    pub fn new(coeffs: Vec<f64>, domain_end: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Degenerate("polynomial needs at least one coefficient".into()));
        }
        if !(domain_end > 0.0 && domain_end.is_finite()) {
            return Err(Error::Domain(format!("domain end {domain_end} must be positive")));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite coefficient {bad}")));
        }
        Ok(Self { coeffs, domain_end })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Mutable access for samplers that update coefficients in place; callers
    /// keep the vector non-empty and finite.
    pub(crate) fn coeffs_vec_mut(&mut self) -> &mut Vec<f64> {
        &mut self.coeffs
    }

    /// Evaluates the polynomial at `t` in `[0, tau]`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.domain_end).contains(&t) {
            return Err(Error::Domain(format!(
                "evaluation point {t} outside [0, {}]",
                self.domain_end
            )));
        }
        Ok(eval_unit(&self.coeffs, t / self.domain_end))
    }

    /// Derivative with respect to `t`, itself a Bernstein polynomial of order `n - 1`.
    pub fn derivative(&self) -> Result<BernsteinPoly> {
        let n = self.order();
        if n == 0 {
            return Err(Error::Degenerate("cannot differentiate an order-0 polynomial".into()));
        }
        let scale = n as f64 / self.domain_end;
        let coeffs = self.coeffs.windows(2).map(|w| scale * (w[1] - w[0])).collect();
        Ok(BernsteinPoly {
            coeffs,
            domain_end: self.domain_end,
        })
    }

    /// Integral over `[0, tau]`: every basis function integrates to `tau / (n + 1)`.
    pub fn integral(&self) -> f64 {
        self.domain_end * self.coeffs.iter().sum::<f64>() / self.coeffs.len() as f64
    }

    /// `int_0^tau |F(t)| dt`, computed exactly up to root-finding precision.
    ///
    /// Pieces whose coefficients share a sign integrate in closed form. A
    /// piece with a single coefficient sign change has exactly one root, which
    /// is located by bisection; anything else is subdivided.
    pub fn abs_integral(&self) -> f64 {
        self.domain_end * abs_integral_unit(&self.coeffs, 0)
    }
}

/// Evaluates Bernstein coefficients at `u` in `[0, 1]` by de Casteljau's scheme.
pub fn eval_unit(coeffs: &[f64], u: f64) -> f64 {
    let n = coeffs.len();
    if n <= 24 {
        let mut buf = [0.0f64; 24];
        buf[..n].copy_from_slice(coeffs);
        de_casteljau(&mut buf[..n], u)
    } else {
        let mut buf = coeffs.to_vec();
        de_casteljau(&mut buf, u)
    }
}

fn de_casteljau(buf: &mut [f64], u: f64) -> f64 {
    let s = 1.0 - u;
    for level in (1..buf.len()).rev() {
        for i in 0..level {
            buf[i] = s * buf[i] + u * buf[i + 1];
        }
    }
    buf[0]
}

/// Splits coefficients on `[0,1]` at `u` into the coefficients of the left
/// piece on `[0,u]` and the right piece on `[u,1]`, each reparametrised to `[0,1]`.
pub fn subdivide(coeffs: &[f64], u: f64) -> (Vec<f64>, Vec<f64>) {
    let n = coeffs.len();
    let mut work = coeffs.to_vec();
    let mut left = Vec::with_capacity(n);
    let mut right = vec![0.0; n];
    let s = 1.0 - u;
    left.push(work[0]);
    right[n - 1] = work[n - 1];
    for level in (1..n).rev() {
        for i in 0..level {
            work[i] = s * work[i] + u * work[i + 1];
        }
        left.push(work[0]);
        right[level - 1] = work[level - 1];
    }
    (left, right)
}

fn sign_changes(coeffs: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut changes = 0;
    for &c in coeffs {
        if c != 0.0 {
            if last != 0.0 && (c > 0.0) != (last > 0.0) {
                changes += 1;
            }
            last = c;
        }
    }
    changes
}

/// Integral of the order-(n) polynomial over `[0, u]`, via the antiderivative
/// whose coefficients are scaled partial sums.
fn partial_integral(coeffs: &[f64], u: f64) -> f64 {
    let m = coeffs.len();
    let mut anti = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    anti.push(0.0);
    for &c in coeffs {
        acc += c;
        anti.push(acc / m as f64);
    }
    eval_unit(&anti, u)
}

fn abs_integral_unit(coeffs: &[f64], depth: usize) -> f64 {
    let mean = coeffs.iter().sum::<f64>() / coeffs.len() as f64;
    match sign_changes(coeffs) {
        0 => mean.abs(),
        1 => {
            let (mut lo, mut hi) = (0.0, 1.0);
            let lead_positive = coeffs.iter().find(|&&c| c != 0.0).is_some_and(|&c| c > 0.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let v = eval_unit(coeffs, mid);
                if v == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (v > 0.0) == lead_positive {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            let left = partial_integral(coeffs, root);
            (left.abs()) + (mean - left).abs()
        }
        _ if depth >= 40 => mean.abs(),
        _ => {
            let (l, r) = subdivide(coeffs, 0.5);
            0.5 * (abs_integral_unit(&l, depth + 1) + abs_integral_unit(&r, depth + 1))
        }
    }
}

/// The order-`n` Bernstein polynomial of a function from its samples `f(i tau / n)`.
pub fn bernstein_approx(samples: &[f64], tau: f64) -> Result<BernsteinPoly> {
    if samples.len() < 2 {
        return Err(Error::Degenerate(format!(
            "Bernstein approximation needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    BernsteinPoly::new(samples.to_vec(), tau)
}

/// Samples `f` at `i tau / n` and returns its order-`n` Bernstein polynomial.
pub fn bernstein_of<F: Fn(f64) -> f64>(f: F, order: usize, tau: f64) -> Result<BernsteinPoly> {
    let samples: Vec<f64> = (0..=order)
        .map(|i| f(i as f64 * tau / order as f64))
        .collect();
    bernstein_approx(&samples, tau)
}

/// Checks the coefficient-level sufficient condition for `shape`.
pub fn shape_check(coeffs: &[f64], shape: ShapeClass) -> Result<bool> {
    if coeffs.len() < shape.min_len() {
        return Err(Error::Degenerate(format!(
            "{shape:?} check needs at least {} coefficients, got {}",
            shape.min_len(),
            coeffs.len()
        )));
    }
    Ok(match shape {
        ShapeClass::Monotone => coeffs.windows(2).all(|w| w[0] <= w[1]),
        ShapeClass::UnimodalConcave => concave_ok(coeffs, 1.0),
        ShapeClass::UnimodalConvex => concave_ok(coeffs, -1.0),
        ShapeClass::Unimodal => unimodal_witness(coeffs)?.is_some(),
    })
}

// `sign = -1` mirrors every inequality, which turns the concave test into the convex one.
fn concave_ok(a: &[f64], sign: f64) -> bool {
    let n = a.len() - 1;
    sign * (a[1] - a[0]) > 0.0
        && sign * (a[n] - a[n - 1]) < 0.0
        && a.windows(3).all(|w| sign * (w[2] + w[0]) <= sign * (2.0 * w[1]))
}

/// Finds `l1 < l2 < l3` with
/// `a_0 = .. = a_l1 < a_{l1+1} <= .. <= a_l2 >= .. >= a_l3 > a_{l3+1} = .. = a_n`.
///
/// `l1` and `l3` are forced by the flat runs at either end; `l2` is the last
/// index of the maximal plateau.
pub fn unimodal_witness(a: &[f64]) -> Result<Option<UnimodalWitness>> {
    if a.len() < ShapeClass::Unimodal.min_len() {
        return Err(Error::Degenerate(format!(
            "unimodal check needs at least 4 coefficients, got {}",
            a.len()
        )));
    }
    let n = a.len() - 1;
    let l1 = a.iter().take_while(|&&v| v == a[0]).count() - 1;
    let tail = a.iter().rev().take_while(|&&v| v == a[n]).count();
    if l1 == n || tail > n {
        return Ok(None);
    }
    let l3 = n - tail;
    if l3 <= l1 + 1 {
        return Ok(None);
    }
    // rising[i]: a_l1..=a_i non-decreasing; falling[i]: a_i..=a_l3 non-increasing
    let mut best = None;
    let mut rising = true;
    let mut falling_from = l3;
    while falling_from > l1 && a[falling_from - 1] >= a[falling_from] {
        falling_from -= 1;
    }
    for l2 in (l1 + 1)..l3 {
        rising &= a[l2 - 1] <= a[l2];
        if !rising {
            break;
        }
        if l2 >= falling_from {
            best = Some(l2);
        }
    }
    Ok(best.map(|l2| UnimodalWitness { l1, l2, l3 }))
}

/// Closed window of values coefficient `k` may take, the others fixed, for
/// the concave (`shape = UnimodalConcave`) or convex coefficient constraints.
///
/// Returns `None` when the window is empty. Strict inequalities are treated
/// as closed; the boundary has measure zero.
pub fn coefficient_window(a: &[f64], k: usize, shape: ShapeClass) -> Result<Option<(f64, f64)>> {
    let sign = match shape {
        ShapeClass::UnimodalConcave => 1.0,
        ShapeClass::UnimodalConvex => -1.0,
        other => {
            return Err(Error::Domain(format!(
                "coefficient windows are defined for concave/convex shapes, not {other:?}"
            )))
        }
    };
    if a.len() < 3 {
        return Err(Error::Degenerate("window needs at least 3 coefficients".into()));
    }
    let n = a.len() - 1;
    if k > n {
        return Err(Error::Domain(format!("index {k} exceeds order {n}")));
    }
    // work in the concave frame b = sign * a
    let b = |i: usize| sign * a[i];
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    if (1..n).contains(&k) {
        lo = lo.max(0.5 * (b(k - 1) + b(k + 1)));
    }
    if k >= 2 {
        hi = hi.min(2.0 * b(k - 1) - b(k - 2));
    }
    if k + 2 <= n {
        hi = hi.min(2.0 * b(k + 1) - b(k + 2));
    }
    match k {
        0 => hi = hi.min(b(1)),
        _ if k == n => hi = hi.min(b(n - 1)),
        _ => {}
    }
    if k == 1 {
        lo = lo.max(b(0));
    }
    if k == n - 1 {
        lo = lo.max(b(n));
    }
    if lo > hi {
        return Ok(None);
    }
    Ok(Some(if sign > 0.0 { (lo, hi) } else { (-hi, -lo) }))
}
