//! One-parameter bivariate copulas used as vine building blocks.
//!
//! All three parametric families are exchangeable, `C(u, v) = C(v, u)`, so a
//! single conditional distribution `h(x | y) = ∂C(x, y)/∂y` serves both
//! conditioning directions. Arguments are clamped to `[eps, 1 - eps]` before
//! any transcendental function is evaluated (see [`Scalar::clamp_eps`]).

use std::fmt;
use std::str::FromStr;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, GaussLegendre};
use crate::scalar::{clamp_unit, log_add_exp, Scalar};

/// Frank parameters closer to zero than this are treated as independence.
pub const FRANK_ZERO: f64 = 1e-6;

/// Bracket searched when inverting Kendall's tau for Frank.
const FRANK_THETA_MAX: f64 = 500.0;

const HINV_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Clayton,
    Gumbel,
    Frank,
    Independence,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Clayton,
        Family::Gumbel,
        Family::Frank,
        Family::Independence,
    ];

    /// Whether the family carries a free parameter.
    pub fn is_parametric(self) -> bool {
        !matches!(self, Family::Independence)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Clayton => "clayton",
            Family::Gumbel => "gumbel",
            Family::Frank => "frank",
            Family::Independence => "indep",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clayton" | "c" => Ok(Family::Clayton),
            "gumbel" | "g" => Ok(Family::Gumbel),
            "frank" | "f" => Ok(Family::Frank),
            "indep" | "independence" | "i" => Ok(Family::Independence),
            other => Err(Error::Domain(format!("unknown copula family '{other}'"))),
        }
    }
}

/// Which argument of `C(u, v)` is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// `h(u | v) = ∂C(u, v)/∂v`
    UGivenV,
    /// `h(v | u) = ∂C(u, v)/∂u`
    VGivenU,
}

/// A bivariate copula: family tag plus its single parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCopula<T> {
    family: Family,
    theta: T,
}

/// Density and both conditional distributions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerms<T> {
    pub pdf: T,
    /// `∂C(u, v)/∂v`
    pub h_u_given_v: T,
    /// `∂C(u, v)/∂u`
    pub h_v_given_u: T,
}

impl<T: Scalar> PairCopula<T> {
    /// Validating constructor. A Frank parameter within `1e-6` of zero is
    /// promoted to independence.
    pub fn new(family: Family, theta: T) -> Result<Self> {
        if family == Family::Independence {
            return Ok(Self::independence());
        }
        if !theta.is_finite() {
            return Err(Error::Domain(format!("{family} parameter must be finite, got {theta}")));
        }
        match family {
            Family::Clayton if theta <= T::zero() => Err(Error::Domain(format!(
                "clayton parameter must be > 0, got {theta}"
            ))),
            Family::Gumbel if theta < T::one() => Err(Error::Domain(format!(
                "gumbel parameter must be >= 1, got {theta}"
            ))),
            Family::Frank if theta.abs() < T::lit(FRANK_ZERO) => Ok(Self::independence()),
            _ => Ok(Self { family, theta }),
        }
    }

    pub fn independence() -> Self {
        Self {
            family: Family::Independence,
            theta: T::zero(),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// `C(u, v)` on the closed unit square.
    pub fn cdf(&self, u: T, v: T) -> T {
        if u <= T::zero() || v <= T::zero() {
            return T::zero();
        }
        if u >= T::one() {
            return v.min(T::one());
        }
        if v >= T::one() {
            return u;
        }
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let c = match self.family {
            Family::Independence => u * v,
            Family::Clayton => clayton_cdf(self.theta, u, v),
            Family::Gumbel => gumbel_cdf(self.theta, u, v),
            Family::Frank => frank_cdf(self.theta, u, v),
        };
        // Fréchet bounds; only active through rounding.
        let lower = (u + v - T::one()).max(T::zero());
        c.max(lower).min(u.min(v))
    }

    /// Copula density `c(u, v)`.
    pub fn pdf(&self, u: T, v: T) -> T {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        match self.family {
            Family::Independence => T::one(),
            Family::Clayton => clayton_log_pdf(self.theta, u, v).exp(),
            Family::Gumbel => gumbel_log_pdf(self.theta, u, v).exp(),
            Family::Frank => frank_pdf(self.theta, u, v),
        }
    }

    /// Logarithm of the density.
    pub fn ln_pdf(&self, u: T, v: T) -> T {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        match self.family {
            Family::Independence => T::zero(),
            Family::Clayton => clayton_log_pdf(self.theta, u, v),
            Family::Gumbel => gumbel_log_pdf(self.theta, u, v),
            Family::Frank => frank_pdf(self.theta, u, v).ln(),
        }
    }

    /// Conditional distribution function in the requested direction.
    pub fn hfunc(&self, u: T, v: T, direction: Conditioning) -> T {
        match direction {
            Conditioning::UGivenV => self.h(u, v),
            Conditioning::VGivenU => self.h(v, u),
        }
    }

    /// `h(x | y) = ∂C(x, y)/∂y`.
    #[inline]
    pub fn h(&self, x: T, y: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        if x >= T::one() {
            return T::one();
        }
        let (x, y) = (clamp_unit(x), clamp_unit(y));
        let h = match self.family {
            Family::Independence => x,
            Family::Clayton => clayton_log_h(self.theta, x, y).exp(),
            Family::Gumbel => gumbel_log_h(self.theta, x, y).exp(),
            Family::Frank => frank_h(self.theta, x, y),
        };
        h.max(T::zero()).min(T::one())
    }

    /// Density together with both h-functions.
    #[inline]
    pub fn terms(&self, u: T, v: T) -> PairTerms<T> {
        if self.family == Family::Frank {
            let (x, y) = (clamp_unit(u), clamp_unit(v));
            return frank_terms(self.theta, x, y);
        }
        PairTerms {
            pdf: self.pdf(u, v),
            h_u_given_v: self.h(u, v),
            h_v_given_u: self.h(v, u),
        }
    }

    /// Inverse of [`hfunc`](Self::hfunc) in its first argument: the `x` with
    /// `h(x | y) = p` for the given direction.
    pub fn hinv(&self, p: T, v: T, direction: Conditioning) -> Result<T> {
        // Exchangeability makes both directions the same root problem.
        let _ = direction;
        self.h_inverse(p, v)
    }

    /// Solve `h(x | y) = p` for `x` by safeguarded Newton/bisection.
    pub fn h_inverse(&self, p: T, y: T) -> Result<T> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::Domain(format!("hinv probability {p} outside [0, 1]")));
        }
        if self.family == Family::Independence {
            return Ok(p);
        }
        if p <= T::zero() {
            return Ok(T::zero());
        }
        if p >= T::one() {
            return Ok(T::one());
        }
        let tol = T::lit(1e-10).max(T::epsilon() * T::lit(8.0));
        let mut lo = T::zero();
        let mut hi = T::one();
        let mut x = p;
        for _ in 0..HINV_MAX_ITER {
            let f = self.h(x, y) - p;
            if f == T::zero() {
                return Ok(x);
            }
            if f < T::zero() {
                lo = x;
            } else {
                hi = x;
            }
            let slope = self.pdf(x, y);
            let newton = x - f / slope;
            let step_ok = slope > T::zero() && newton.is_finite() && newton > lo && newton < hi;
            let next = if step_ok {
                newton
            } else {
                (lo + hi) / T::lit(2.0)
            };
            let moved = (next - x).abs();
            x = next;
            if (step_ok && moved <= tol * T::lit(1e-2)) || hi - lo <= tol {
                return Ok(x);
            }
        }
        Err(Error::Numerical(format!(
            "hinv did not converge: family={} theta={} p={} y={} bracket=[{}, {}]",
            self.family, self.theta, p, y, lo, hi
        )))
    }

    /// Kendall's tau of this copula.
    pub fn tau(&self) -> T {
        theta_to_tau(self.family, self.theta).unwrap_or(T::zero())
    }

    /// `(lower, upper)` tail-dependence coefficients.
    pub fn tail_dependence(&self) -> (T, T) {
        let two = T::lit(2.0);
        match self.family {
            Family::Clayton => (two.powf(-self.theta.recip()), T::zero()),
            Family::Gumbel => (T::zero(), two - two.powf(self.theta.recip())),
            Family::Frank | Family::Independence => (T::zero(), T::zero()),
        }
    }

    /// `n` draws by conditional inversion: `u = w1`, `v = h⁻¹(w2 | u)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<(T, T)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<(T, T)>> {
        (0..n)
            .map(|_| {
                let w1: f64 = rng.sample(Open01);
                let w2: f64 = rng.sample(Open01);
                let u = T::lit(w1);
                let v = self.h_inverse(T::lit(w2), u)?;
                Ok((u, v))
            })
            .collect()
    }
}

/// Free-function form of [`PairCopula::sample`].
pub fn sample_pair<T: Scalar>(c: &PairCopula<T>, n: usize, seed: u64) -> Result<Vec<(T, T)>> {
    c.sample(n, seed)
}

// ---------------------------------------------------------------------------
// Clayton, theta > 0

#[inline]
fn clayton_log_s<T: Scalar>(theta: T, lx: T, ly: T) -> T {
    // ln(x^-θ + y^-θ - 1)
    let a = -theta * lx;
    let b = -theta * ly;
    let m = a.max(b);
    if m < T::one() {
        (a.exp_m1() + b.exp_m1()).ln_1p()
    } else {
        m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
    }
}

fn clayton_cdf<T: Scalar>(theta: T, x: T, y: T) -> T {
    (-clayton_log_s(theta, x.ln(), y.ln()) / theta).exp()
}

#[inline]
fn clayton_log_h<T: Scalar>(theta: T, x: T, y: T) -> T {
    let (lx, ly) = (x.ln(), y.ln());
    let ls = clayton_log_s(theta, lx, ly);
    -(theta + T::one()) * ly - (theta.recip() + T::one()) * ls
}

#[inline]
fn clayton_log_pdf<T: Scalar>(theta: T, x: T, y: T) -> T {
    let (lx, ly) = (x.ln(), y.ln());
    let ls = clayton_log_s(theta, lx, ly);
    theta.ln_1p() - (theta + T::one()) * (lx + ly) - (theta.recip() + T::lit(2.0)) * ls
}

// ---------------------------------------------------------------------------
// Gumbel, theta >= 1

/// Returns `(ln A, A)` with `A = ((-ln x)^θ + (-ln y)^θ)^(1/θ)`.
#[inline]
fn gumbel_a<T: Scalar>(theta: T, ltx: T, lty: T) -> (T, T) {
    let la = log_add_exp(theta * ltx, theta * lty) / theta;
    (la, la.exp())
}

fn gumbel_cdf<T: Scalar>(theta: T, x: T, y: T) -> T {
    let (tx, ty) = (-x.ln(), -y.ln());
    let (_, a) = gumbel_a(theta, tx.ln(), ty.ln());
    (-a).exp()
}

#[inline]
fn gumbel_log_h<T: Scalar>(theta: T, x: T, y: T) -> T {
    let (tx, ty) = (-x.ln(), -y.ln());
    let lty = ty.ln();
    let (la, a) = gumbel_a(theta, tx.ln(), lty);
    -a + (T::one() - theta) * la + (theta - T::one()) * lty + ty
}

#[inline]
fn gumbel_log_pdf<T: Scalar>(theta: T, x: T, y: T) -> T {
    let (tx, ty) = (-x.ln(), -y.ln());
    let (ltx, lty) = (tx.ln(), ty.ln());
    let (la, a) = gumbel_a(theta, ltx, lty);
    -a + tx
        + ty
        + (theta - T::one()) * (ltx + lty)
        + (T::one() - T::lit(2.0) * theta) * la
        + (a + theta - T::one()).ln()
}

// ---------------------------------------------------------------------------
// Frank, theta != 0. Negative parameters use C_θ(u, v) = u - C_{-θ}(u, 1 - v).

/// `D = (1 - e^-θ) - (1 - e^-θx)(1 - e^-θy)`, written as a sum of two
/// nonnegative terms. Returns `(D, e^-θx, e^-θy)`.
#[inline]
fn frank_denominator<T: Scalar>(theta: T, x: T, y: T) -> (T, T, T) {
    let ex = (-theta * x).exp();
    let ey = (-theta * y).exp();
    let d = ex * -(-theta * y).exp_m1() + ey * -(-theta * (T::one() - y)).exp_m1();
    (d, ex, ey)
}

fn frank_cdf<T: Scalar>(theta: T, x: T, y: T) -> T {
    if theta < T::zero() {
        return x - frank_cdf(-theta, x, T::one() - y);
    }
    let em1 = -(-theta).exp_m1();
    let emx = -(-theta * x).exp_m1();
    let emy = -(-theta * y).exp_m1();
    let r = -emx * emy / em1;
    if r > T::lit(-0.5) {
        -r.ln_1p() / theta
    } else {
        let (d, _, _) = frank_denominator(theta, x, y);
        -(d.ln() - em1.ln()) / theta
    }
}

/// Up to this parameter the short form `D = E - A·B` with `A = 1 - e^{-θx}`,
/// `B = 1 - e^{-θy}`, `E = 1 - e^{-θ}` loses at most about `e^θ` ulps, which
/// keeps it well below the clamp resolution.
const FRANK_SHORT_FORM_MAX: f64 = 20.0;

/// `1 - e^{-z}` for `z ≥ 0`. Plain `exp` is cheaper than `exp_m1` and loses
/// under 3 ulps once `z > 1/2`.
#[inline]
fn one_minus_exp_neg<T: Scalar>(z: T) -> T {
    if z > T::lit(0.5) {
        T::one() - (-z).exp()
    } else {
        -(-z).exp_m1()
    }
}

#[inline]
fn frank_short<T: Scalar>(theta: T, x: T, y: T) -> Option<(T, T, T)> {
    if theta > T::lit(FRANK_SHORT_FORM_MAX) {
        return None;
    }
    let e = one_minus_exp_neg(theta);
    let a = one_minus_exp_neg(theta * x);
    let b = one_minus_exp_neg(theta * y);
    Some((e, a, b))
}

/// Frank copula with its constant `E = 1 - e^{-θ}` precomputed, for loops
/// that evaluate many points and can share `A(x) = 1 - e^{-θx}` between
/// them. Only available where the short form is accurate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FrankPrepared<T> {
    theta: T,
    e: T,
    ln_e: T,
    tiny: T,
}

impl<T: Scalar> FrankPrepared<T> {
    #[inline]
    pub(crate) fn a(&self, x: T) -> T {
        one_minus_exp_neg(self.theta * clamp_unit(x))
    }

    #[inline]
    fn d(&self, ax: T, ay: T) -> Option<T> {
        let d = self.e - ax * ay;
        (d > self.tiny).then_some(d)
    }

    /// `h(x | y)` from `A(x)`, `A(y)`; `None` when the short form underflows.
    #[inline]
    pub(crate) fn h(&self, ax: T, ay: T) -> Option<T> {
        self.d(ax, ay).map(|d| ((T::one() - ay) * ax / d).min(T::one()))
    }

    #[inline]
    pub(crate) fn pdf(&self, ax: T, ay: T) -> Option<T> {
        self.d(ax, ay)
            .map(|d| self.theta * self.e * (T::one() - ax) * (T::one() - ay) / (d * d))
    }

    /// `C(x, y)` from the clamped arguments and their `A` values.
    #[inline]
    pub(crate) fn cdf(&self, x: T, y: T, ax: T, ay: T) -> Option<T> {
        let r = -ax * ay / self.e;
        let (x, y) = (clamp_unit(x), clamp_unit(y));
        let c = if r > T::lit(-0.5) {
            -r.ln_1p() / self.theta
        } else {
            -(self.d(ax, ay)?.ln() - self.ln_e) / self.theta
        };
        let lower = (x + y - T::one()).max(T::zero());
        Some(c.max(lower).min(x.min(y)))
    }
}

impl<T: Scalar> PairCopula<T> {
    pub(crate) fn frank_prepared(&self) -> Option<FrankPrepared<T>> {
        if self.family != Family::Frank
            || self.theta <= T::zero()
            || self.theta > T::lit(FRANK_SHORT_FORM_MAX)
        {
            return None;
        }
        let e = -(-self.theta).exp_m1();
        Some(FrankPrepared {
            theta: self.theta,
            e,
            ln_e: e.ln(),
            tiny: T::min_positive_value() * T::lit(1e10),
        })
    }
}

/// Density and both h-functions from one set of exponentials.
#[inline]
fn frank_terms<T: Scalar>(theta: T, x: T, y: T) -> PairTerms<T> {
    if theta > T::zero() {
        if let Some((e, a, b)) = frank_short(theta, x, y) {
            let d = e - a * b;
            let tiny = T::min_positive_value() * T::lit(1e10);
            if d > tiny {
                let (ea, eb) = (T::one() - a, T::one() - b);
                return PairTerms {
                    pdf: theta * e * ea * eb / (d * d),
                    h_u_given_v: (eb * a / d).min(T::one()),
                    h_v_given_u: (ea * b / d).min(T::one()),
                };
            }
        }
    }
    PairTerms {
        pdf: frank_pdf(theta, x, y),
        h_u_given_v: frank_h(theta, x, y),
        h_v_given_u: frank_h(theta, y, x),
    }
}

#[inline]
fn frank_h<T: Scalar>(theta: T, x: T, y: T) -> T {
    if theta < T::zero() {
        return frank_h(-theta, x, T::one() - y);
    }
    if let Some((e, a, b)) = frank_short(theta, x, y) {
        let d = e - a * b;
        if d > T::min_positive_value() * T::lit(1e10) {
            return (T::one() - b) * a / d;
        }
    }
    let (d, _, ey) = frank_denominator(theta, x, y);
    let emx = -(-theta * x).exp_m1();
    if d > T::min_positive_value() * T::lit(1e10) {
        emx * ey / d
    } else {
        (emx.ln() - theta * y - frank_log_denominator(theta, x, y)).exp()
    }
}

#[inline]
fn frank_pdf<T: Scalar>(theta: T, x: T, y: T) -> T {
    if theta < T::zero() {
        return frank_pdf(-theta, x, T::one() - y);
    }
    if let Some((e, a, b)) = frank_short(theta, x, y) {
        let d = e - a * b;
        if d > T::min_positive_value() * T::lit(1e10) {
            return theta * e * (T::one() - a) * (T::one() - b) / (d * d);
        }
    }
    let em1 = -(-theta).exp_m1();
    let (d, ex, ey) = frank_denominator(theta, x, y);
    if d > T::min_positive_value() * T::lit(1e10) && ex * ey > T::min_positive_value() * T::lit(1e10) {
        theta * em1 * ex * ey / (d * d)
    } else {
        let ld = frank_log_denominator(theta, x, y);
        (theta.ln() + em1.ln() - theta * (x + y) - T::lit(2.0) * ld).exp()
    }
}

fn frank_log_denominator<T: Scalar>(theta: T, x: T, y: T) -> T {
    let t1 = -theta * x + (-(-theta * y).exp_m1()).ln();
    let t2 = -theta * y + (-(-theta * (T::one() - y)).exp_m1()).ln();
    log_add_exp(t1, t2)
}

// ---------------------------------------------------------------------------
// Kendall's tau

/// Debye function of order one, `D₁(x) = x⁻¹ ∫₀ˣ t/(eᵗ - 1) dt`.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        return debye1(-x) - x / 2.0;
    }
    let rule = GaussLegendre::<f64>::new(21).expect("fixed rule");
    let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    let integral = integrate_adaptive(&rule, 0.0, x, 1e-14, &integrand)
        .expect("smooth integrand on a finite interval");
    integral / x
}

fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < FRANK_ZERO {
        return 0.0;
    }
    if theta < 0.0 {
        return -frank_tau(-theta);
    }
    1.0 - 4.0 / theta * (1.0 - debye1(theta))
}

/// Kendall's tau implied by a family parameter.
pub fn theta_to_tau<T: Scalar>(family: Family, theta: T) -> Result<T> {
    let c = PairCopula::new(family, theta)?;
    let th = c.theta.to_f64_lossy();
    let tau = match c.family {
        Family::Independence => 0.0,
        Family::Clayton => th / (th + 2.0),
        Family::Gumbel => 1.0 - 1.0 / th,
        Family::Frank => frank_tau(th),
    };
    Ok(T::lit(tau))
}

/// Family parameter with the given Kendall's tau.
pub fn tau_to_theta<T: Scalar>(family: Family, tau: T) -> Result<T> {
    let t = tau.to_f64_lossy();
    if !(t > -1.0 && t < 1.0) {
        return Err(Error::Domain(format!("kendall's tau {t} outside (-1, 1)")));
    }
    let theta = match family {
        Family::Independence => {
            if t != 0.0 {
                return Err(Error::Domain(format!(
                    "independence copula has tau 0, requested {t}"
                )));
            }
            0.0
        }
        Family::Clayton => {
            if t <= 0.0 {
                return Err(Error::Domain(format!("clayton requires tau > 0, got {t}")));
            }
            2.0 * t / (1.0 - t)
        }
        Family::Gumbel => {
            if t < 0.0 {
                return Err(Error::Domain(format!("gumbel requires tau >= 0, got {t}")));
            }
            1.0 / (1.0 - t)
        }
        Family::Frank => {
            if t == 0.0 {
                0.0
            } else {
                let target = t.abs();
                let (mut lo, mut hi) = (FRANK_ZERO, FRANK_THETA_MAX);
                if target < frank_tau(lo) || target > frank_tau(hi) {
                    return Err(Error::Domain(format!(
                        "frank tau {t} not attainable for |theta| in [{lo}, {hi}]"
                    )));
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if frank_tau(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-13 * hi.max(1.0) {
                        break;
                    }
                }
                0.5 * (lo + hi) * t.signum()
            }
        }
    };
    Ok(T::lit(theta))
}
