//! Nonlocal prior densities and the Laplace machinery for the IMOM branch.
//!
//! The MOM density of order `r` is
//!
//! ```text
//! mom(d) = M̃_r (τσ²)^(-r-1/2) d^(2r) exp(-d² / (2τσ²)),   M̃_r = (2π)^(-1/2) / (2r-1)!!
//! ```
//!
//! and the IMOM density of shape `ν` is
//!
//! ```text
//! imom(d) = (τσ²)^(ν/2) / Γ(ν/2) · |d|^(-ν-1) exp(-τσ² / d²).
//! ```
//!
//! Convolving the IMOM density with the Gaussian likelihood has no closed form.
//! It is handled through `h(d) = |d|^(-(ν+1)) exp{-(d² - 2d·d̂)/(2σ²) - τσ²/d²}`, whose
//! global mode `d*` and curvature give the Laplace estimate `√(2π) σ* h(d*)` of `∫ h`.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma};

use crate::error::{Error, Result};
use crate::special::{ln_double_factorial_odd, ln_factorial, ln_gamma, ln_normal_pdf};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const MAX_ROOT_ITER: usize = 200;

/// Per-level prior hyperparameters plus the noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorParams {
    /// Weight of the MOM component.
    pub gamma1: f64,
    /// Weight of the IMOM component among the non-MOM mass.
    pub gamma2: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub sigma2: f64,
    /// MOM order.
    pub r: u32,
    /// IMOM shape.
    pub nu: f64,
}

impl PriorParams {
    pub fn validate(&self) -> Result<()> {
        let prob = |g: f64| (0.0..=1.0).contains(&g);
        if !prob(self.gamma1) || !prob(self.gamma2) {
            return Err(Error::Domain(format!(
                "mixture probabilities must lie in [0, 1] (got {}, {})",
                self.gamma1, self.gamma2
            )));
        }
        if !(self.tau1 > 0.0 && self.tau2 > 0.0 && self.sigma2 > 0.0) {
            return Err(Error::Domain(format!(
                "scales must be positive (tau1 = {}, tau2 = {}, sigma2 = {})",
                self.tau1, self.tau2, self.sigma2
            )));
        }
        if self.r == 0 || !(self.nu > 0.0) {
            return Err(Error::Domain(format!(
                "need r >= 1 and nu > 0 (got r = {}, nu = {})",
                self.r, self.nu
            )));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Prior masses of (MOM, IMOM, point mass).
    pub fn mixture_weights(&self) -> [f64; 3] {
        let rest = 1.0 - self.gamma1;
        [self.gamma1, rest * self.gamma2, rest * (1.0 - self.gamma2)]
    }
}

/// Mode and curvature of `h` at its global maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceFit {
    pub d_star: f64,
    pub sigma_star: f64,
    pub log_h_at_mode: f64,
}

impl LaplaceFit {
    /// `log(√(2π) σ* h(d*))`, the Laplace estimate of `log ∫ h`.
    pub fn log_mass(&self) -> f64 {
        LN_SQRT_2PI + self.sigma_star.ln() + self.log_h_at_mode
    }
}

fn check_scales(tau: f64, sigma2: f64) -> Result<()> {
    if tau > 0.0 && sigma2 > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "tau and sigma2 must be positive (got {tau}, {sigma2})"
        )))
    }
}

/// `φ(x; mean, var)`.
pub fn normal_density(x: f64, mean: f64, var: f64) -> f64 {
    ln_normal_pdf(x, mean, var).exp()
}

/// MOM prior density.
pub fn mom_density(d: f64, tau: f64, r: u32, sigma2: f64) -> Result<f64> {
    check_scales(tau, sigma2)?;
    if r == 0 {
        return Err(Error::Domain("MOM order must be >= 1".into()));
    }
    if d == 0.0 {
        return Ok(0.0);
    }
    let v = tau * sigma2;
    let r_f = r as f64;
    let ln =
        -LN_SQRT_2PI - ln_double_factorial_odd(r) - (r_f + 0.5) * v.ln() + 2.0 * r_f * d.abs().ln() - d * d / (2.0 * v);
    Ok(ln.exp())
}

/// IMOM prior density.
pub fn imom_density(d: f64, tau: f64, nu: f64, sigma2: f64) -> Result<f64> {
    check_scales(tau, sigma2)?;
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("IMOM shape must be positive (got {nu})")));
    }
    if d == 0.0 {
        return Ok(0.0);
    }
    let v = tau * sigma2;
    let ln = 0.5 * nu * v.ln() - ln_gamma(0.5 * nu) - (nu + 1.0) * d.abs().ln() - v / (d * d);
    Ok(ln.exp())
}

/// Density of the continuous (MOM + IMOM) part of the three-component prior.
/// Integrates to `γ₁ + (1-γ₁)γ₂`; the remaining mass sits at zero.
pub fn mixture_slab_density(d: f64, p: &PriorParams) -> Result<f64> {
    p.validate()?;
    let [w1, w2, _] = p.mixture_weights();
    Ok(w1 * mom_density(d, p.tau1, p.r, p.sigma2)? + w2 * imom_density(d, p.tau2, p.nu, p.sigma2)?)
}

/// Draws one coefficient from the three-component prior.
///
/// MOM draws use `|d| = √(τσ²) χ_(2r+1)`; IMOM draws use `1/d² ~ Gamma(ν/2, rate τσ²)`.
pub fn sample_coefficient<R: Rng + ?Sized>(p: &PriorParams, rng: &mut R) -> Result<f64> {
    p.validate()?;
    let [w1, w2, _] = p.mixture_weights();
    let u: f64 = rng.gen();
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let bad = |e: String| Error::Domain(format!("cannot sample prior: {e}"));
    if u < w1 {
        let chi = ChiSquared::new(2.0 * p.r as f64 + 1.0).map_err(|e| bad(e.to_string()))?;
        Ok(sign * (p.tau1 * p.sigma2 * chi.sample(rng)).sqrt())
    } else if u < w1 + w2 {
        let g = Gamma::new(0.5 * p.nu, 1.0 / (p.tau2 * p.sigma2)).map_err(|e| bad(e.to_string()))?;
        Ok(sign / g.sample(rng).sqrt())
    } else {
        Ok(0.0)
    }
}

/// Coefficients of the Gaussian-moment sums behind `M*_r` and `M**_r`, already
/// divided by `(2r-1)!!`, so both are plain polynomials in `x = √(τ/(1+τ)) d̂/σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPolynomials {
    /// `even[i]` multiplies `x^(2i)`, `i = 0..=r`.
    pub even: Vec<f64>,
    /// `odd[i]` multiplies `x^(2i+1)`, `i = 0..=r`.
    pub odd: Vec<f64>,
}

impl MomentPolynomials {
    pub fn new(r: u32) -> Self {
        let norm = ln_double_factorial_odd(r);
        let ln2 = std::f64::consts::LN_2;
        let even = (0..=r)
            .map(|i| {
                (ln_factorial(2 * r) - ln_factorial(2 * i) - ln_factorial(r - i) - (r - i) as f64 * ln2 - norm).exp()
            })
            .collect();
        // index k = i - 1 for i = 1..=r+1
        let odd = (1..=r + 1)
            .map(|i| {
                (ln_factorial(2 * r + 1)
                    - ln_factorial(2 * i - 1)
                    - ln_factorial(r + 1 - i)
                    - (r + 1 - i) as f64 * ln2
                    - norm)
                    .exp()
            })
            .collect();
        MomentPolynomials { even, odd }
    }

    /// `M*_r` at `x`.
    pub fn m_star(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.even.iter().rev().fold(0.0, |acc, c| acc * x2 + c)
    }

    /// `M**_r` at `x`; odd in `x`.
    pub fn m_star_star(&self, x: f64) -> f64 {
        let x2 = x * x;
        x * self.odd.iter().rev().fold(0.0, |acc, c| acc * x2 + c)
    }
}

fn moment_argument(dhat: f64, tau1: f64, sigma: f64) -> Result<f64> {
    if !(tau1 > 0.0 && sigma > 0.0) {
        return Err(Error::Domain(format!(
            "tau1 and sigma must be positive (got {tau1}, {sigma})"
        )));
    }
    Ok((tau1 / (1.0 + tau1)).sqrt() * dhat / sigma)
}

/// `M*_r(d̂, τ₁, σ²)` from the MOM marginal.
pub fn m_star(dhat: f64, tau1: f64, sigma: f64, r: u32) -> Result<f64> {
    let x = moment_argument(dhat, tau1, sigma)?;
    if r == 0 {
        return Err(Error::Domain("MOM order must be >= 1".into()));
    }
    Ok(MomentPolynomials::new(r).m_star(x))
}

/// `M**_r(d̂, τ₁, σ²)` from the MOM posterior mean.
pub fn m_star_star(dhat: f64, tau1: f64, sigma: f64, r: u32) -> Result<f64> {
    let x = moment_argument(dhat, tau1, sigma)?;
    if r == 0 {
        return Err(Error::Domain("MOM order must be >= 1".into()));
    }
    Ok(MomentPolynomials::new(r).m_star_star(x))
}

/// `log h(d)`.
pub fn log_h(d: f64, dhat: f64, tau2: f64, nu: f64, sigma2: f64) -> Result<f64> {
    check_scales(tau2, sigma2)?;
    if d == 0.0 {
        return Err(Error::Domain("log h is undefined at d = 0".into()));
    }
    Ok(-(nu + 1.0) * d.abs().ln() - (d * d - 2.0 * d * dhat) / (2.0 * sigma2) - tau2 * sigma2 / (d * d))
}

/// Mode of `h` in units of σ: `u = d/σ`, `a = d̂/σ`.
///
/// `ℓ(u) = -(ν+1) ln|u| - (u² - 2ua)/2 - τ/u²` and `log h(σu) = ℓ(u) - (ν+1) ln σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ScaledMode {
    pub u: f64,
    pub ell: f64,
    /// `-ℓ''(u) > 0`.
    pub neg_curvature: f64,
}

impl ScaledMode {
    /// `log(√(2π) s ℓ-mass)` in scaled units; add `-ν ln σ` for the natural scale.
    pub fn log_mass(&self) -> f64 {
        LN_SQRT_2PI - 0.5 * self.neg_curvature.ln() + self.ell
    }
}

#[inline]
fn ell(u: f64, a: f64, tau: f64, nu1: f64) -> f64 {
    -nu1 * u.abs().ln() - (u * u - 2.0 * u * a) / 2.0 - tau / (u * u)
}

/// Stationarity polynomial on `u > 0`: `ℓ'(u) = -p(u)/u³`.
#[inline]
fn stationarity(u: f64, a: f64, tau: f64, nu1: f64) -> (f64, f64) {
    let u2 = u * u;
    let p = u2 * (u2 - a * u + nu1) - 2.0 * tau;
    let dp = u * (4.0 * u2 - 3.0 * a * u + 2.0 * nu1);
    (p, dp)
}

/// Root of `p` inside `(lo, hi)` where `p` is increasing, `p(lo) < 0 < p(hi)`.
fn increasing_root(a: f64, tau: f64, nu1: f64, mut lo: f64, mut hi: f64, guess: f64) -> Result<f64> {
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..MAX_ROOT_ITER {
        let (p, dp) = stationarity(x, a, tau, nu1);
        if p == 0.0 {
            return Ok(x);
        }
        if p < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - p / dp;
        let next = if dp > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-15 * x.abs() || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numerical(format!(
        "mode search for h did not converge (d̂/σ = {a}, τ = {tau}, ν+1 = {nu1}, bracket [{lo}, {hi}])"
    )))
}

fn upper_bracket(a: f64, tau: f64, nu1: f64, from: f64) -> Result<f64> {
    let mut hi = from.max(1.0).max(2.0 * a);
    for _ in 0..200 {
        if stationarity(hi, a, tau, nu1).0 > 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::Numerical(format!(
        "could not bracket the mode of h (d̂/σ = {a}, τ = {tau})"
    )))
}

/// Best local maximum of `ℓ` on `u > 0`.
fn positive_half_mode(a: f64, tau: f64, nu1: f64) -> Result<ScaledMode> {
    // p'(u)/u = 4u² - 3au + 2(ν+1): p has a local max at u1 and a local min at u2
    // when the discriminant is positive; otherwise p increases on (0, ∞).
    let disc = 9.0 * a * a - 32.0 * nu1;
    let small_guess = (2.0 * tau / nu1).sqrt();
    let mut candidates: [Option<f64>; 2] = [None, None];
    if a <= 0.0 || disc <= 0.0 {
        let hi = upper_bracket(a, tau, nu1, small_guess)?;
        candidates[0] = Some(increasing_root(a, tau, nu1, 0.0, hi, small_guess)?);
    } else {
        let sq = disc.sqrt();
        let u1 = (3.0 * a - sq) / 8.0;
        let u2 = (3.0 * a + sq) / 8.0;
        let p1 = stationarity(u1, a, tau, nu1).0;
        let p2 = stationarity(u2, a, tau, nu1).0;
        if p1 > 0.0 {
            candidates[0] = Some(increasing_root(a, tau, nu1, 0.0, u1, small_guess)?);
        }
        if p2 < 0.0 {
            let hi = upper_bracket(a, tau, nu1, u2)?;
            candidates[1] = Some(increasing_root(a, tau, nu1, u2, hi, a)?);
        }
    }
    candidates
        .into_iter()
        .flatten()
        .map(|u| {
            let u2 = u * u;
            ScaledMode {
                u,
                ell: ell(u, a, tau, nu1),
                neg_curvature: 1.0 + 6.0 * tau / (u2 * u2) - nu1 / u2,
            }
        })
        .filter(|m| m.neg_curvature > 0.0 && m.ell.is_finite())
        .reduce(|best, m| if m.ell > best.ell { m } else { best })
        .ok_or_else(|| {
            Error::Numerical(format!(
                "no strict maximum of h on the half-line (d̂/σ = {a}, τ = {tau})"
            ))
        })
}

/// Global mode of `ℓ` over `u ≠ 0`; ties (only at `a = 0`) go to the positive root.
///
/// `ℓ(v; a) - ℓ(-v; a) = 2va`, so the mode has the sign of `a` and only one
/// half-line needs searching. `ℓ(-v; a) = ℓ(v; -a)` handles `a < 0`.
pub(crate) fn scaled_mode(a: f64, tau: f64, nu: f64) -> Result<ScaledMode> {
    let nu1 = nu + 1.0;
    if a >= 0.0 {
        positive_half_mode(a, tau, nu1)
    } else {
        let mut m = positive_half_mode(-a, tau, nu1)?;
        m.u = -m.u;
        Ok(m)
    }
}

/// Global maximizer of `h` with its Laplace scale `σ* = (-1/L_h''(d*))^(1/2)`.
pub fn laplace_fit(dhat: f64, tau2: f64, nu: f64, sigma2: f64) -> Result<LaplaceFit> {
    check_scales(tau2, sigma2)?;
    if !(nu > 0.0) || !dhat.is_finite() {
        return Err(Error::Domain(format!(
            "laplace_fit needs nu > 0 and finite d̂ (got nu = {nu}, d̂ = {dhat})"
        )));
    }
    let sigma = sigma2.sqrt();
    let m = scaled_mode(dhat / sigma, tau2, nu)?;
    Ok(LaplaceFit {
        d_star: sigma * m.u,
        sigma_star: sigma / m.neg_curvature.sqrt(),
        log_h_at_mode: m.ell - (nu + 1.0) * sigma.ln(),
    })
}

/// `L_h'(d)`, exposed for stationarity checks.
pub fn log_h_derivative(d: f64, dhat: f64, tau2: f64, nu: f64, sigma2: f64) -> f64 {
    -(nu + 1.0) / d - (d - dhat) / sigma2 + 2.0 * tau2 * sigma2 / (d * d * d)
}

/// `L_h''(d)`.
pub fn log_h_second_derivative(d: f64, tau2: f64, nu: f64, sigma2: f64) -> f64 {
    let d2 = d * d;
    (nu + 1.0) / d2 - 1.0 / sigma2 - 6.0 * tau2 * sigma2 / (d2 * d2)
}
