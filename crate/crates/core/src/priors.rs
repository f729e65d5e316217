//! Constructive Bernstein priors.
//!
//! A prior draw is a pair `(n, a_0..a_n)`. The order comes from a truncated
//! Poisson law; the coefficients are built so that they satisfy the
//! coefficient-level shape constraints by construction:
//!
//! * monotone: sorted uniforms between two random endpoints;
//! * unimodal concave: a random peak coefficient, random endpoints below it,
//!   and uniform spacings sorted so that increments shrink from left to right;
//! * unimodal convex: the mirror image of the concave construction.
//!
//! The unimodal constructions are driven by a vector of independent
//! `Uniform(0, 1)` variables ([`UnimodalLatent`]). Keeping that vector around
//! gives the posterior samplers a parametrisation in which the prior is flat.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bernstein::{BernsteinPoly, ShapeClass};
use crate::error::{Error, Result};

/// Attempts made before giving up on a rejection step in a prior sampler.
pub const MAX_RESAMPLE: usize = 1000;

/// Which low order absorbs the Poisson mass below the support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderShift {
    /// Support `{1, .., n_max}`; `p(1)` absorbs `P(N = 0)`.
    Isotonic,
    /// Support `{2, .., n_max}`; `p(2)` absorbs `P(N <= 1)`.
    Convex,
}

/// Poisson(`alpha`) law on the polynomial order, truncated to `[min, n_max]`
/// with the lower tail folded into the smallest order and the upper tail
/// into `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OrderDistributionRepr", into = "OrderDistributionRepr")]
pub struct OrderDistribution {
    alpha: f64,
    n_max: usize,
    shift: OrderShift,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct OrderDistributionRepr {
    alpha: f64,
    n_max: usize,
    shift: OrderShift,
}

impl TryFrom<OrderDistributionRepr> for OrderDistribution {
    type Error = Error;

    fn try_from(r: OrderDistributionRepr) -> Result<Self> {
        OrderDistribution::new(r.alpha, r.n_max, r.shift)
    }
}

impl From<OrderDistribution> for OrderDistributionRepr {
    fn from(d: OrderDistribution) -> Self {
        Self {
            alpha: d.alpha,
            n_max: d.n_max,
            shift: d.shift,
        }
    }
}

fn poisson_ln_pmf(alpha: f64, n: usize) -> f64 {
    let ln_fact: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    n as f64 * alpha.ln() - alpha - ln_fact
}

impl OrderDistribution {
    pub fn new(alpha: f64, n_max: usize, shift: OrderShift) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("Poisson rate {alpha} must be positive")));
        }
        if n_max < 3 {
            return Err(Error::Config(format!("maximum order {n_max} must be at least 3")));
        }
        let min = match shift {
            OrderShift::Isotonic => 1,
            OrderShift::Convex => 2,
        };
        let mut pmf = vec![0.0; n_max + 1];
        // lowest order absorbs P(N <= min)
        pmf[min] = (0..=min).map(|k| poisson_ln_pmf(alpha, k).exp()).sum();
        for (n, slot) in pmf.iter_mut().enumerate().take(n_max).skip(min + 1) {
            *slot = poisson_ln_pmf(alpha, n).exp();
        }
        let below: f64 = pmf[..n_max].iter().sum();
        pmf[n_max] = (1.0 - below).max(0.0);
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(Self {
            alpha,
            n_max,
            shift,
            pmf,
            cdf,
        })
    }

    /// The distribution used with monotone priors.
    pub fn isotonic(alpha: f64, n_max: usize) -> Result<Self> {
        Self::new(alpha, n_max, OrderShift::Isotonic)
    }

    /// The distribution used with concave and convex priors.
    pub fn convex(alpha: f64, n_max: usize) -> Result<Self> {
        Self::new(alpha, n_max, OrderShift::Convex)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn shift(&self) -> OrderShift {
        self.shift
    }

    pub fn n_min(&self) -> usize {
        match self.shift {
            OrderShift::Isotonic => 1,
            OrderShift::Convex => 2,
        }
    }

    pub fn support(&self) -> std::ops::RangeInclusive<usize> {
        self.n_min()..=self.n_max
    }

    pub fn contains(&self, n: usize) -> bool {
        self.support().contains(&n)
    }

    pub fn pmf(&self, n: usize) -> Result<f64> {
        if !self.contains(n) {
            return Err(Error::Domain(format!(
                "order {n} outside support {}..={}",
                self.n_min(),
                self.n_max
            )));
        }
        Ok(self.pmf[n])
    }

    /// `p(n)`, or 0 outside the support.
    pub fn pmf_or_zero(&self, n: usize) -> f64 {
        if self.contains(n) {
            self.pmf[n]
        } else {
            0.0
        }
    }

    pub fn ln_pmf(&self, n: usize) -> f64 {
        self.pmf_or_zero(n).ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cdf[self.n_max];
        let n = self.cdf.partition_point(|&c| c <= u);
        n.clamp(self.n_min(), self.n_max)
    }
}

/// An open interval `(lo, hi)` carrying a uniform density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("empty or invalid interval ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        if self.contains(x) {
            -self.width().ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn at(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.at(rng.random())
    }
}

/// Monotone prior: uniform endpoint densities `q1`, `q2` and sorted uniform interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonePrior {
    pub order: OrderDistribution,
    pub q1: Interval,
    pub q2: Interval,
}

impl MonotonePrior {
    pub fn new(order: OrderDistribution, q1: Interval, q2: Interval) -> Result<Self> {
        if order.shift() != OrderShift::Isotonic {
            return Err(Error::Config("monotone prior needs an isotonic order law".into()));
        }
        if q1.lo >= q2.hi {
            return Err(Error::Config(format!(
                "endpoint ranges ({}, {}) and ({}, {}) admit no a0 < an",
                q1.lo, q1.hi, q2.lo, q2.hi
            )));
        }
        Ok(Self { order, q1, q2 })
    }
}

/// Concave or convex prior: peak density `mode` and endpoint bounds.
///
/// For the concave prior `beta1`, `beta2` are lower bounds of `F(0)`, `F(tau)`
/// and the peak coefficient is the maximum; for the convex prior they are
/// upper bounds and the peak coefficient is the minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnimodalPrior {
    pub order: OrderDistribution,
    pub mode: Interval,
    pub beta1: f64,
    pub beta2: f64,
    pub curvature: Curvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    Concave,
    Convex,
}

impl Curvature {
    /// `+1` for concave, `-1` for convex: multiplying by it maps convex to concave.
    pub fn sign(self) -> f64 {
        match self {
            Curvature::Concave => 1.0,
            Curvature::Convex => -1.0,
        }
    }

    pub fn shape(self) -> ShapeClass {
        match self {
            Curvature::Concave => ShapeClass::UnimodalConcave,
            Curvature::Convex => ShapeClass::UnimodalConvex,
        }
    }
}

impl UnimodalPrior {
    pub fn new(
        order: OrderDistribution,
        mode: Interval,
        beta1: f64,
        beta2: f64,
        curvature: Curvature,
    ) -> Result<Self> {
        if order.shift() != OrderShift::Convex {
            return Err(Error::Config("unimodal prior needs the order law starting at 2".into()));
        }
        if !beta1.is_finite() || !beta2.is_finite() {
            return Err(Error::Config("endpoint bounds must be finite".into()));
        }
        let prior = Self {
            order,
            mode,
            beta1,
            beta2,
            curvature,
        };
        if prior.valid_mode_fraction() <= 0.0 {
            return Err(Error::Config(format!(
                "peak range ({}, {}) is incompatible with endpoint bounds {} and {}",
                mode.lo, mode.hi, beta1, beta2
            )));
        }
        Ok(prior)
    }

    /// Whether a peak coefficient makes both endpoint intervals non-empty.
    pub fn peak_admissible(&self, peak: f64) -> bool {
        let s = self.curvature.sign();
        s * peak > s * self.beta1 && s * peak > s * self.beta2
    }

    /// Fraction of the peak range that is admissible.
    pub fn valid_mode_fraction(&self) -> f64 {
        let s = self.curvature.sign();
        let (lo, hi) = (self.mode.lo, self.mode.hi);
        let bound = if s > 0.0 {
            self.beta1.max(self.beta2)
        } else {
            self.beta1.min(self.beta2)
        };
        let valid = if s > 0.0 { hi - bound.max(lo) } else { bound.min(hi) - lo };
        (valid / (hi - lo)).clamp(0.0, 1.0)
    }
}

/// A prior together with the shape it enforces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PriorSpec {
    Monotone(MonotonePrior),
    Unimodal(UnimodalPrior),
}

impl PriorSpec {
    pub fn shape(&self) -> ShapeClass {
        match self {
            PriorSpec::Monotone(_) => ShapeClass::Monotone,
            PriorSpec::Unimodal(p) => p.curvature.shape(),
        }
    }

    pub fn order(&self) -> &OrderDistribution {
        match self {
            PriorSpec::Monotone(p) => &p.order,
            PriorSpec::Unimodal(p) => &p.order,
        }
    }

    /// Draws from the prior using the construction for its shape.
    pub fn sample<R: Rng + ?Sized>(&self, tau: f64, rng: &mut R) -> Result<PriorDraw> {
        match self {
            PriorSpec::Monotone(p) => sample_isotonic(p, tau, rng),
            PriorSpec::Unimodal(p) => sample_unimodal(p, tau, rng),
        }
    }
}

/// The uniform variables behind a unimodal prior draw.
///
/// Given `n` and the peak index `l`, the `n + 1` coordinates are i.i.d.
/// `Uniform(0, 1)` under the prior (restricted to admissible peaks), and the
/// coefficients are a deterministic function of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnimodalLatent {
    /// Position of the peak coefficient within its range.
    pub peak: f64,
    /// Position of `a_0` within its uniform range.
    pub start: f64,
    /// Position of `a_n` within its uniform range.
    pub end: f64,
    /// `l - 1` uniforms splitting the rising side.
    pub left: Vec<f64>,
    /// `n - l - 1` uniforms splitting the falling side.
    pub right: Vec<f64>,
}

impl UnimodalLatent {
    pub fn order(&self) -> usize {
        self.left.len() + self.right.len() + 2
    }

    /// Index `l` of the peak coefficient.
    pub fn peak_index(&self) -> usize {
        self.left.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.left.len() + self.right.len() + 3
    }

    /// Coordinate `j` in the order (peak, start, end, left.., right..).
    pub fn coord_mut(&mut self, j: usize) -> &mut f64 {
        let nl = self.left.len();
        match j {
            0 => &mut self.peak,
            1 => &mut self.start,
            2 => &mut self.end,
            _ if j - 3 < nl => &mut self.left[j - 3],
            _ => &mut self.right[j - 3 - nl],
        }
    }

    /// Draws latent uniforms for order `n` with a uniformly chosen peak index,
    /// resampling the peak position until it is admissible.
    pub fn sample<R: Rng + ?Sized>(prior: &UnimodalPrior, n: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("unimodal prior needs order >= 2, got {n}")));
        }
        let l = rng.random_range(1..n);
        let mut peak = None;
        for _ in 0..MAX_RESAMPLE {
            let w: f64 = rng.random();
            if prior.peak_admissible(peak_value(prior, w)) {
                peak = Some(w);
                break;
            }
        }
        let peak = peak.ok_or_else(|| {
            Error::Config(format!(
                "no admissible peak coefficient after {MAX_RESAMPLE} draws from ({}, {})",
                prior.mode.lo, prior.mode.hi
            ))
        })?;
        let start = rng.random();
        let end = rng.random();
        let left = (0..l - 1).map(|_| rng.random()).collect();
        let right = (0..n - l - 1).map(|_| rng.random()).collect();
        Ok(Self {
            peak,
            start,
            end,
            left,
            right,
        })
    }

    /// Maps the latent uniforms to coefficients; `None` if the peak is inadmissible.
    pub fn coefficients(&self, prior: &UnimodalPrior) -> Option<Vec<f64>> {
        let n = self.order();
        let l = self.peak_index();
        let s = prior.curvature.sign();
        let peak = peak_value(prior, self.peak);
        if !prior.peak_admissible(peak) {
            return None;
        }
        // Build in the concave frame (values multiplied by s), then map back.
        let top = s * peak;
        let lo0 = 2.0 * s * prior.beta1 - top;
        let lon = 2.0 * s * prior.beta2 - top;
        let a0 = lo0 + self.start * (top - lo0);
        let an = lon + self.end * (top - lon);

        let mut a = vec![0.0; n + 1];
        a[0] = a0;
        a[l] = top;
        a[n] = an;

        // rising side: largest spacing first so increments shrink
        let mut gaps = spacings(a0, top, &self.left);
        gaps.sort_by(|x, y| y.total_cmp(x));
        let mut acc = a0;
        for (j, g) in gaps.iter().take(l - 1).enumerate() {
            acc += g;
            a[j + 1] = acc;
        }
        // falling side: smallest drop first so decrements grow
        let mut gaps = spacings(an, top, &self.right);
        gaps.sort_by(|x, y| x.total_cmp(y));
        let mut acc = top;
        for (j, g) in gaps.iter().take(n - l - 1).enumerate() {
            acc -= g;
            a[l + 1 + j] = acc;
        }
        if s < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
        }
        Some(a)
    }
}

fn peak_value(prior: &UnimodalPrior, w: f64) -> f64 {
    prior.mode.at(w)
}

/// Spacings of `lo`, the sorted points `lo + u (hi - lo)`, and `hi`.
fn spacings(lo: f64, hi: f64, unit: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = unit.iter().map(|u| lo + u * (hi - lo)).collect();
    pts.sort_by(|x, y| x.total_cmp(y));
    let mut gaps = Vec::with_capacity(pts.len() + 1);
    let mut prev = lo;
    for p in pts {
        gaps.push(p - prev);
        prev = p;
    }
    gaps.push(hi - prev);
    gaps
}

/// One draw from a prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorDraw {
    pub poly: BernsteinPoly,
    /// Peak index `l` for concave and convex draws.
    pub peak_index: Option<usize>,
    /// Generating uniforms for concave and convex draws.
    pub latent: Option<UnimodalLatent>,
}

impl PriorDraw {
    pub fn order(&self) -> usize {
        self.poly.order()
    }

    pub fn coeffs(&self) -> &[f64] {
        self.poly.coeffs()
    }
}

/// Draws `(a0, an)` from the endpoint densities, resampling until `a0 < an`.
pub fn sample_endpoints<R: Rng + ?Sized>(prior: &MonotonePrior, rng: &mut R) -> Result<(f64, f64)> {
    for _ in 0..MAX_RESAMPLE * 10 {
        let a0 = prior.q1.sample(rng);
        let an = prior.q2.sample(rng);
        if a0 < an {
            return Ok((a0, an));
        }
    }
    Err(Error::Config(format!(
        "endpoint ranges ({}, {}) and ({}, {}) rarely give a0 < an",
        prior.q1.lo, prior.q1.hi, prior.q2.lo, prior.q2.hi
    )))
}

/// Monotone prior draw of a given order.
pub fn sample_isotonic_order<R: Rng + ?Sized>(
    prior: &MonotonePrior,
    n: usize,
    tau: f64,
    rng: &mut R,
) -> Result<PriorDraw> {
    let (a0, an) = sample_endpoints(prior, rng)?;
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(a0);
    let mut interior: Vec<f64> = (1..n).map(|_| a0 + rng.random::<f64>() * (an - a0)).collect();
    interior.sort_by(|x, y| x.total_cmp(y));
    coeffs.extend(interior);
    coeffs.push(an);
    Ok(PriorDraw {
        poly: BernsteinPoly::new(coeffs, tau)?,
        peak_index: None,
        latent: None,
    })
}

/// Monotone prior: order, endpoints, then sorted uniform interior coefficients.
pub fn sample_isotonic<R: Rng + ?Sized>(prior: &MonotonePrior, tau: f64, rng: &mut R) -> Result<PriorDraw> {
    let n = prior.order.sample(rng);
    sample_isotonic_order(prior, n, tau, rng)
}

/// Concave or convex prior draw of a given order.
pub fn sample_unimodal_order<R: Rng + ?Sized>(
    prior: &UnimodalPrior,
    n: usize,
    tau: f64,
    rng: &mut R,
) -> Result<PriorDraw> {
    let latent = UnimodalLatent::sample(prior, n, rng)?;
    unimodal_draw(prior, latent, tau)
}

pub(crate) fn unimodal_draw(prior: &UnimodalPrior, latent: UnimodalLatent, tau: f64) -> Result<PriorDraw> {
    let coeffs = latent
        .coefficients(prior)
        .ok_or_else(|| Error::Config("latent peak outside admissible range".into()))?;
    Ok(PriorDraw {
        poly: BernsteinPoly::new(coeffs, tau)?,
        peak_index: Some(latent.peak_index()),
        latent: Some(latent),
    })
}

pub fn sample_unimodal<R: Rng + ?Sized>(prior: &UnimodalPrior, tau: f64, rng: &mut R) -> Result<PriorDraw> {
    let n = prior.order.sample(rng);
    sample_unimodal_order(prior, n, tau, rng)
}

/// Concave prior draw; fails if `prior` is convex.
pub fn sample_concave<R: Rng + ?Sized>(prior: &UnimodalPrior, tau: f64, rng: &mut R) -> Result<PriorDraw> {
    if prior.curvature != Curvature::Concave {
        return Err(Error::Config("sample_concave called with a convex prior".into()));
    }
    sample_unimodal(prior, tau, rng)
}

/// Convex prior draw; fails if `prior` is concave.
pub fn sample_convex<R: Rng + ?Sized>(prior: &UnimodalPrior, tau: f64, rng: &mut R) -> Result<PriorDraw> {
    if prior.curvature != Curvature::Convex {
        return Err(Error::Config("sample_convex called with a concave prior".into()));
    }
    sample_unimodal(prior, tau, rng)
}

/// Log of the joint density of `(n, a_0..a_n)` under the monotone prior:
/// `ln q1(a0) + ln q2(an) + ln (n-1)! - (n-1) ln(an - a0) + ln p(n)`.
///
/// The rejection step for `a0 < an` only rescales by a constant and is ignored.
/// Returns `-inf` outside the support.
pub fn isotonic_prior_logdensity(coeffs: &[f64], prior: &MonotonePrior) -> f64 {
    if coeffs.len() < 2 {
        return f64::NEG_INFINITY;
    }
    let n = coeffs.len() - 1;
    let (a0, an) = (coeffs[0], coeffs[n]);
    if !prior.order.contains(n) || a0 >= an || coeffs.windows(2).any(|w| w[0] > w[1]) {
        return f64::NEG_INFINITY;
    }
    let ends = prior.q1.ln_density(a0) + prior.q2.ln_density(an);
    if ends == f64::NEG_INFINITY {
        return ends;
    }
    ends + order_stat_ln_density(n, an - a0) + prior.order.ln_pmf(n)
}

/// `ln[(n-1)! / width^(n-1)]`: density of `n - 1` sorted uniforms on an interval.
pub fn order_stat_ln_density(n: usize, width: f64) -> f64 {
    let k = n.saturating_sub(1);
    let ln_fact: f64 = (2..=k).map(|j| (j as f64).ln()).sum();
    ln_fact - k as f64 * width.ln()
}
