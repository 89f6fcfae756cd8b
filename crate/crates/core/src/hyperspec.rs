//! Level-dependent specifications for the mixture probabilities and scales.
//!
//! A [`Method`] names one slab family, one γ family and one τ family, e.g.
//! `mixture-gennormal-doubleexp`. Its hyperparameters live in a [`SpecConfig`]:
//! `theta_gamma` holds the γ⁽¹⁾ parameters followed by the γ⁽²⁾ parameters, and
//! `theta_tau` does the same for τ⁽¹⁾ and τ⁽²⁾.

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::PriorParams;
use crate::special::regularized_gamma_pair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlabFamily {
    /// MOM slab only; γ⁽²⁾ is pinned to zero.
    Mom,
    /// IMOM slab only; γ⁽¹⁾ is pinned to zero.
    Imom,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaFamily {
    Logit,
    GenLogit,
    HypSec,
    GenNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauFamily {
    Polynom,
    DoubleExp,
}

/// Whether a hyperparameter is free on the real line or must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Real,
    Positive,
}

macro_rules! named_enum {
    ($ty:ident, $kind:literal, [$(($variant:ident, $name:literal)),+ $(,)?]) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $ty::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| Error::UnknownName {
                        kind: $kind,
                        name: s.to_string(),
                        supported: $ty::ALL.iter().map(|v| v.name()).collect::<Vec<_>>().join(", "),
                    })
            }
        }
    };
}

named_enum!(
    SlabFamily,
    "slab family",
    [(Mom, "mom"), (Imom, "imom"), (Mixture, "mixture")]
);
named_enum!(
    GammaFamily,
    "gamma specification",
    [
        (Logit, "logit"),
        (GenLogit, "genlogit"),
        (HypSec, "hypsec"),
        (GenNormal, "gennormal")
    ]
);
named_enum!(
    TauFamily,
    "tau specification",
    [(Polynom, "polynom"), (DoubleExp, "doubleexp")]
);

impl SlabFamily {
    fn uses_mom(self) -> bool {
        self != SlabFamily::Imom
    }

    fn uses_imom(self) -> bool {
        self != SlabFamily::Mom
    }
}

impl GammaFamily {
    /// Parameters per mixture component.
    pub fn arity(self) -> usize {
        match self {
            GammaFamily::Logit | GammaFamily::HypSec => 2,
            GammaFamily::GenLogit | GammaFamily::GenNormal => 3,
        }
    }

    pub fn constraints(self) -> &'static [Constraint] {
        use Constraint::*;
        match self {
            GammaFamily::Logit | GammaFamily::HypSec => &[Real, Positive],
            GammaFamily::GenLogit | GammaFamily::GenNormal => &[Real, Positive, Positive],
        }
    }

    pub fn eval(self, l: f64, theta: &[f64]) -> Result<f64> {
        match self {
            GammaFamily::Logit => gamma_logit(l, theta),
            GammaFamily::GenLogit => gamma_genlogit(l, theta),
            GammaFamily::HypSec => gamma_hypsec(l, theta),
            GammaFamily::GenNormal => gamma_gennormal(l, theta),
        }
    }
}

impl TauFamily {
    pub fn arity(self) -> usize {
        match self {
            TauFamily::Polynom => 2,
            TauFamily::DoubleExp => 4,
        }
    }

    pub fn eval(self, l: f64, theta: &[f64]) -> Result<f64> {
        match self {
            TauFamily::Polynom => tau_polynom(l, theta),
            TauFamily::DoubleExp => tau_doubleexp(l, theta),
        }
    }
}

fn check_theta(name: &str, theta: &[f64], pattern: &[Constraint]) -> Result<()> {
    if theta.len() != pattern.len() {
        return Err(Error::Domain(format!(
            "{name} takes {} parameters, got {}",
            pattern.len(),
            theta.len()
        )));
    }
    for (i, (&t, c)) in theta.iter().zip(pattern).enumerate() {
        let ok = match c {
            Constraint::Real => t.is_finite(),
            Constraint::Positive => t > 0.0 && t.is_finite(),
        };
        if !ok {
            return Err(Error::Domain(format!(
                "{name} parameter {} = {t} violates its {c:?} constraint",
                i + 1
            )));
        }
    }
    Ok(())
}

/// `1 / (1 + e^(-z))` without overflow.
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logit decay `exp(θ₁ - θ₂l) / (1 + exp(θ₁ - θ₂l))`.
pub fn gamma_logit(l: f64, theta: &[f64]) -> Result<f64> {
    check_theta("logit", theta, GammaFamily::Logit.constraints())?;
    Ok(logistic(theta[0] - theta[1] * l))
}

/// Generalized logit (Richards) decay `[1 + exp(-(θ₁ - θ₂l))]^(-θ₃)`.
pub fn gamma_genlogit(l: f64, theta: &[f64]) -> Result<f64> {
    check_theta("genlogit", theta, GammaFamily::GenLogit.constraints())?;
    if theta[2] == 1.0 {
        return Ok(logistic(theta[0] - theta[1] * l));
    }
    Ok((-theta[2] * softplus(-(theta[0] - theta[1] * l))).exp())
}

/// Hyperbolic secant decay `(2/π) arctan(exp((π/2)(θ₁ - θ₂l)))`.
pub fn gamma_hypsec(l: f64, theta: &[f64]) -> Result<f64> {
    check_theta("hypsec", theta, GammaFamily::HypSec.constraints())?;
    let z = theta[0] - theta[1] * l;
    Ok(FRAC_2_PI * (0.5 * PI * z).exp().atan())
}

/// Generalized normal decay
/// `1/2 + sign(θ₁ - l) · P(1/θ₂, |(θ₁ - l)/θ₃|^θ₂) / 2`.
pub fn gamma_gennormal(l: f64, theta: &[f64]) -> Result<f64> {
    check_theta("gennormal", theta, GammaFamily::GenNormal.constraints())?;
    let offset = theta[0] - l;
    if offset == 0.0 {
        return Ok(0.5);
    }
    let x = (offset.abs() / theta[2]).powf(theta[1]);
    let (_, q) = regularized_gamma_pair(1.0 / theta[1], x)?;
    Ok(if offset > 0.0 { 1.0 - 0.5 * q } else { 0.5 * q })
}

/// Polynomial decay `θ₁ l^(-θ₂)`, defined for `l >= 1`.
pub fn tau_polynom(l: f64, theta: &[f64]) -> Result<f64> {
    check_theta("polynom", theta, &[Constraint::Positive; 2])?;
    if !(l >= 1.0) {
        return Err(Error::Domain(format!("polynom decay needs level >= 1 (got {l})")));
    }
    Ok(theta[0] * l.powf(-theta[1]))
}

/// Double exponential decay `θ₁e^(-θ₂l) + θ₃e^(-θ₄l)`.
pub fn tau_doubleexp(l: f64, theta: &[f64]) -> Result<f64> {
    check_theta("doubleexp", theta, &[Constraint::Positive; 4])?;
    Ok(theta[0] * (-theta[1] * l).exp() + theta[2] * (-theta[3] * l).exp())
}

/// One analysis method: slab family × γ specification × τ specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Method {
    pub slab: SlabFamily,
    pub gamma: GammaFamily,
    pub tau: TauFamily,
}

impl Method {
    pub const fn new(slab: SlabFamily, gamma: GammaFamily, tau: TauFamily) -> Self {
        Method { slab, gamma, tau }
    }

    /// All 24 methods, slab-major then γ then τ.
    pub fn all() -> Vec<Method> {
        let mut out = Vec::with_capacity(24);
        for &slab in SlabFamily::ALL {
            for &gamma in GammaFamily::ALL {
                for &tau in TauFamily::ALL {
                    out.push(Method { slab, gamma, tau });
                }
            }
        }
        out
    }
}

impl Default for Method {
    fn default() -> Self {
        Method::new(SlabFamily::Mixture, GammaFamily::Logit, TauFamily::Polynom)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.slab, self.gamma, self.tau)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.splitn(3, '-');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => Ok(Method {
                slab: a.parse()?,
                gamma: b.parse()?,
                tau: c.parse()?,
            }),
            _ => Err(Error::UnknownName {
                kind: "method",
                name: s.to_string(),
                supported: "{mom,imom,mixture}-{logit,genlogit,hypsec,gennormal}-{polynom,doubleexp}".to_string(),
            }),
        }
    }
}

/// A method together with concrete hyperparameter vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecConfig {
    pub method: Method,
    pub theta_gamma: Vec<f64>,
    pub theta_tau: Vec<f64>,
}

/// Prior parameters resolved at one detail level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelParams {
    pub level: usize,
    pub prior: PriorParams,
}

const NEUTRAL_HIGH: f64 = 0.9;

impl SpecConfig {
    pub fn validate(&self) -> Result<()> {
        let g = self.method.gamma;
        let t = self.method.tau;
        let gamma_pattern: Vec<Constraint> = [g.constraints(), g.constraints()].concat();
        check_theta(g.name(), &self.theta_gamma, &gamma_pattern)?;
        check_theta(t.name(), &self.theta_tau, &vec![Constraint::Positive; 2 * t.arity()])
    }

    fn gamma_component(&self, c: usize) -> &[f64] {
        let k = self.method.gamma.arity();
        &self.theta_gamma[c * k..(c + 1) * k]
    }

    fn tau_component(&self, c: usize) -> &[f64] {
        let k = self.method.tau.arity();
        &self.theta_tau[c * k..(c + 1) * k]
    }

    /// Starting point for the optimizer: γ ≈ 0.9 at level 1 falling to ≈ 0.1 at
    /// level `nlevels`, τ = 1 at level 1.
    pub fn neutral(method: Method, nlevels: usize) -> Self {
        let span = nlevels.saturating_sub(1).max(1) as f64;
        let gamma_one: Vec<f64> = match method.gamma {
            GammaFamily::Logit | GammaFamily::GenLogit => {
                let z = (NEUTRAL_HIGH / (1.0 - NEUTRAL_HIGH)).ln();
                let slope = 2.0 * z / span;
                let mut v = vec![z + slope, slope];
                if method.gamma == GammaFamily::GenLogit {
                    v.push(1.0);
                }
                v
            }
            GammaFamily::HypSec => {
                // (2/π) arctan(e^(πz/2)) = 0.9
                let z = FRAC_2_PI * (0.5 * PI * NEUTRAL_HIGH).tan().ln();
                let slope = 2.0 * z / span;
                vec![z + slope, slope]
            }
            GammaFamily::GenNormal => {
                // shape 2 gives Φ((θ₁ - l)√2/θ₃); put level 1 at the 0.9 quantile
                let centre = 1.0 + 0.5 * span;
                let scale = std::f64::consts::SQRT_2 * (centre - 1.0) / 1.281_551_565_544_600_5;
                vec![centre, 2.0, scale]
            }
        };
        let tau_one: Vec<f64> = match method.tau {
            TauFamily::Polynom => vec![1.0, 1.0],
            TauFamily::DoubleExp => vec![0.5 * 0.5f64.exp(), 0.5, 0.5 * 1.5f64.exp(), 1.5],
        };
        SpecConfig {
            method,
            theta_gamma: [gamma_one.clone(), gamma_one].concat(),
            theta_tau: [tau_one.clone(), tau_one].concat(),
        }
    }

    /// (γ⁽¹⁾, γ⁽²⁾, τ⁽¹⁾, τ⁽²⁾) at level `l`, with the slab pinning applied.
    pub fn at_level(&self, l: usize) -> Result<(f64, f64, f64, f64)> {
        let lf = l as f64;
        let g = self.method.gamma;
        let t = self.method.tau;
        let gamma1 = if self.method.slab.uses_mom() {
            g.eval(lf, self.gamma_component(0))?
        } else {
            0.0
        };
        let gamma2 = if self.method.slab.uses_imom() {
            g.eval(lf, self.gamma_component(1))?
        } else {
            0.0
        };
        let tau1 = t.eval(lf, self.tau_component(0))?;
        let tau2 = t.eval(lf, self.tau_component(1))?;
        Ok((gamma1, gamma2, tau1, tau2))
    }

    /// Constraint of every entry of the (active) unconstrained vector, in packing order.
    pub fn free_constraints(&self) -> Vec<Constraint> {
        let g = self.method.gamma.constraints();
        let t = vec![Constraint::Positive; self.method.tau.arity()];
        let n = self.active_components().len();
        let mut out = g.repeat(n);
        out.extend(t.repeat(n));
        out
    }

    fn active_components(&self) -> Vec<usize> {
        match self.method.slab {
            SlabFamily::Mom => vec![0],
            SlabFamily::Imom => vec![1],
            SlabFamily::Mixture => vec![0, 1],
        }
    }

    /// Active hyperparameters mapped to the unconstrained space (log for positives).
    pub fn pack(&self) -> Vec<f64> {
        let kg = self.method.gamma.arity();
        let kt = self.method.tau.arity();
        let mut constrained = Vec::new();
        for c in self.active_components() {
            constrained.extend_from_slice(&self.theta_gamma[c * kg..(c + 1) * kg]);
        }
        for c in self.active_components() {
            constrained.extend_from_slice(&self.theta_tau[c * kt..(c + 1) * kt]);
        }
        unconstrain(&constrained, &self.free_constraints())
    }

    /// Inverse of [`pack`](Self::pack): a copy with the active entries replaced.
    pub fn unpack(&self, free: &[f64]) -> Result<SpecConfig> {
        let pattern = self.free_constraints();
        if free.len() != pattern.len() {
            return Err(Error::Domain(format!(
                "{} expects {} free parameters, got {}",
                self.method,
                pattern.len(),
                free.len()
            )));
        }
        let values = constrain(free, &pattern);
        let kg = self.method.gamma.arity();
        let kt = self.method.tau.arity();
        let mut out = self.clone();
        let mut it = values.into_iter();
        for c in self.active_components() {
            for slot in &mut out.theta_gamma[c * kg..(c + 1) * kg] {
                *slot = it.next().unwrap_or(*slot);
            }
        }
        for c in self.active_components() {
            for slot in &mut out.theta_tau[c * kt..(c + 1) * kt] {
                *slot = it.next().unwrap_or(*slot);
            }
        }
        Ok(out)
    }
}

/// Maps unconstrained values to the constrained space (`exp` for positives).
pub fn constrain(free: &[f64], pattern: &[Constraint]) -> Vec<f64> {
    free.iter()
        .zip(pattern)
        .map(|(&x, c)| match c {
            Constraint::Real => x,
            Constraint::Positive => x.exp(),
        })
        .collect()
}

/// Inverse of [`constrain`].
pub fn unconstrain(values: &[f64], pattern: &[Constraint]) -> Vec<f64> {
    values
        .iter()
        .zip(pattern)
        .map(|(&x, c)| match c {
            Constraint::Real => x,
            Constraint::Positive => x.ln(),
        })
        .collect()
}

/// Prior parameters for levels `1..=nlevels`.
pub fn resolve_levels(config: &SpecConfig, nlevels: usize, sigma2: f64, r: u32, nu: f64) -> Result<Vec<LevelParams>> {
    config.validate()?;
    (1..=nlevels)
        .map(|level| {
            let (gamma1, gamma2, tau1, tau2) = config.at_level(level)?;
            let prior = PriorParams {
                gamma1,
                gamma2,
                tau1,
                tau2,
                sigma2,
                r,
                nu,
            };
            prior.validate()?;
            Ok(LevelParams { level, prior })
        })
        .collect()
}
