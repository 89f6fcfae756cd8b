//! Empirical Bayes: noise scale, marginal likelihood and hyperparameter fitting.
//!
//! The marginal of one empirical coefficient under the three-component prior is
//!
//! ```text
//! γ₁(1+τ₁)^(-r) M*_r φ(d̂; 0, σ²(1+τ₁))
//!   + (1-γ₁)γ₂ (τ₂σ²)^(ν/2)/Γ(ν/2) φ(d̂; 0, σ²) √(2π) σ* h(d*)
//!   + (1-γ₁)(1-γ₂) φ(d̂; 0, σ²)
//! ```
//!
//! with the IMOM integral replaced by its Laplace estimate. All three branches
//! are kept in log space and combined with log-sum-exp.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperspec::{resolve_levels, Method, SpecConfig};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::priors::{scaled_mode, MomentPolynomials, PriorParams, ScaledMode};
use crate::special::{ln_gamma, ln_normal_pdf, log_sum_exp};
use crate::transform::CoefficientPyramid;

/// Median absolute deviation scale factor for Gaussian data.
pub const MAD_SCALE: f64 = 0.6745;

const JITTER: f64 = 0.2;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Noise scale from the finest detail level: `median|d̂ - median(d̂)| / 0.6745`.
pub fn estimate_sigma_mad(pyramid: &CoefficientPyramid) -> Result<f64> {
    mad_sigma(pyramid.finest())
}

/// `median|v - median(v)| / 0.6745` over arbitrary coefficients.
pub fn mad_sigma(values: &[f64]) -> Result<f64> {
    let mut finest = values.to_vec();
    if finest.is_empty() {
        return Err(Error::Degenerate("finest detail level is empty".into()));
    }
    if finest.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("finest detail level contains non-finite values".into()));
    }
    let centre = median(&mut finest);
    let mut dev: Vec<f64> = finest.iter().map(|v| (v - centre).abs()).collect();
    let sigma = median(&mut dev) / MAD_SCALE;
    if sigma > 0.0 {
        Ok(sigma)
    } else {
        Err(Error::Degenerate(
            "noise scale estimate is zero (finest coefficients have no spread)".into(),
        ))
    }
}

/// Per-branch log terms for one coefficient.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BranchTerms {
    /// (MOM, IMOM, point mass), each already weighted by its prior mass.
    pub log_terms: [f64; 3],
    /// `√(τ₁/(1+τ₁)) d̂/σ`.
    pub x: f64,
    pub m_star: f64,
    /// Laplace mode in units of σ, present when the IMOM branch is active.
    pub mode: Option<ScaledMode>,
}

impl BranchTerms {
    pub fn log_marginal(&self) -> f64 {
        log_sum_exp(&self.log_terms)
    }
}

/// Level constants shared by every coefficient at that level.
#[derive(Debug, Clone)]
pub(crate) struct LevelModel {
    pub prior: PriorParams,
    pub poly: MomentPolynomials,
    sigma: f64,
    shrink: f64,
    ln_w: [f64; 3],
    mom_const: f64,
    imom_const: f64,
}

impl LevelModel {
    pub fn new(prior: PriorParams) -> Result<Self> {
        prior.validate()?;
        let [w1, w2, w0] = prior.mixture_weights();
        let ln_w = [w1.ln(), w2.ln(), w0.ln()];
        Ok(LevelModel {
            poly: MomentPolynomials::new(prior.r),
            sigma: prior.sigma(),
            shrink: prior.tau1 / (1.0 + prior.tau1),
            mom_const: ln_w[0] - prior.r as f64 * prior.tau1.ln_1p(),
            imom_const: ln_w[1] + 0.5 * prior.nu * prior.tau2.ln() - ln_gamma(0.5 * prior.nu),
            ln_w,
            prior,
        })
    }

    pub fn terms(&self, dhat: f64) -> Result<BranchTerms> {
        let p = &self.prior;
        let ln_null = ln_normal_pdf(dhat, 0.0, p.sigma2);
        let x = self.shrink.sqrt() * dhat / self.sigma;
        let m_star = self.poly.m_star(x);
        let mom = if self.ln_w[0] == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.mom_const + m_star.ln() + ln_normal_pdf(dhat, 0.0, p.sigma2 * (1.0 + p.tau1))
        };
        let (imom, mode) = if self.ln_w[1] == f64::NEG_INFINITY {
            (f64::NEG_INFINITY, None)
        } else {
            // σ cancels between (τ₂σ²)^(ν/2), σ* and h(d*)
            let m = scaled_mode(dhat / self.sigma, p.tau2, p.nu)?;
            (self.imom_const + ln_null + m.log_mass(), Some(m))
        };
        Ok(BranchTerms {
            log_terms: [mom, imom, self.ln_w[2] + ln_null],
            x,
            m_star,
            mode,
        })
    }
}

/// Log marginal density of one empirical coefficient.
pub fn log_marginal_coeff(dhat: f64, p: &PriorParams) -> Result<f64> {
    Ok(LevelModel::new(*p)?.terms(dhat)?.log_marginal())
}

/// Summed log marginal over every detail coefficient; errors name the coefficient.
pub fn log_marginal_pyramid(
    pyramid: &CoefficientPyramid,
    config: &SpecConfig,
    sigma: f64,
    r: u32,
    nu: f64,
) -> Result<f64> {
    let levels = resolve_levels(config, pyramid.nlevels(), sigma * sigma, r, nu)?;
    let mut total = 0.0;
    for (lp, (_, coeffs)) in levels.iter().zip(pyramid.levels()) {
        let model = LevelModel::new(lp.prior)?;
        for (j, &d) in coeffs.iter().enumerate() {
            let t = model
                .terms(d)
                .map_err(|e| Error::Numerical(format!("coefficient (level {}, index {j}): {e}", lp.level)))?;
            total += t.log_marginal();
        }
    }
    Ok(total)
}

/// Objective for the optimizer: minus the summed log marginal at the free
/// parameters `theta`, or +∞ whenever it cannot be evaluated.
pub fn neg_log_marginal(
    theta: &[f64],
    pyramid: &CoefficientPyramid,
    sigma_hat: f64,
    config: &SpecConfig,
    r: u32,
    nu: f64,
) -> f64 {
    let Ok(candidate) = config.unpack(theta) else {
        return f64::INFINITY;
    };
    match log_marginal_pyramid(pyramid, &candidate, sigma_hat, r, nu) {
        Ok(v) if v.is_finite() => -v,
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Objective evaluations per start.
    pub max_evals: usize,
    pub starts: usize,
    pub seed: u64,
    /// MOM order.
    pub r: u32,
    /// IMOM shape.
    pub nu: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_evals: 2000,
            starts: 5,
            seed: 0,
            r: 1,
            nu: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Method with the fitted (constrained) hyperparameters.
    pub config: SpecConfig,
    pub sigma_hat: f64,
    pub log_marginal: f64,
    /// Objective evaluations summed over all starts.
    pub n_evals: usize,
    pub converged: bool,
    pub starts: usize,
    /// Number of detail levels the hyperparameters were fitted on.
    pub nlevels: usize,
    pub r: u32,
    pub nu: f64,
}

impl FitResult {
    pub fn theta_gamma(&self) -> &[f64] {
        &self.config.theta_gamma
    }

    pub fn theta_tau(&self) -> &[f64] {
        &self.config.theta_tau
    }
}

fn jittered(neutral: &SpecConfig, rng: &mut ChaCha8Rng) -> SpecConfig {
    let mut jitter = |v: &f64| v * (1.0 + rng.gen_range(-JITTER..JITTER));
    SpecConfig {
        method: neutral.method,
        theta_gamma: neutral.theta_gamma.iter().map(&mut jitter).collect(),
        theta_tau: neutral.theta_tau.iter().map(&mut jitter).collect(),
    }
}

/// Maximizes the marginal likelihood over the active hyperparameters of `method`.
///
/// Start 0 is the neutral point; the others jitter it by up to ±20% per entry.
pub fn fit(pyramid: &CoefficientPyramid, method: Method, sigma_hat: f64, options: &FitOptions) -> Result<FitResult> {
    if !(sigma_hat > 0.0 && sigma_hat.is_finite()) {
        return Err(Error::Degenerate(format!("cannot fit with noise scale {sigma_hat}")));
    }
    if options.starts == 0 {
        return Err(Error::Domain("need at least one optimizer start".into()));
    }
    let neutral = SpecConfig::neutral(method, pyramid.nlevels());
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let nm = NelderMeadOptions {
        max_evals: options.max_evals,
        ..Default::default()
    };
    let mut best: Option<(SpecConfig, f64, bool)> = None;
    let mut total_evals = 0;
    let mut failures = Vec::new();
    for start in 0..options.starts {
        let init = if start == 0 {
            neutral.clone()
        } else {
            jittered(&neutral, &mut rng)
        };
        let objective = |theta: &[f64]| neg_log_marginal(theta, pyramid, sigma_hat, &init, options.r, options.nu);
        let m = nelder_mead(objective, &init.pack(), &nm);
        total_evals += m.evals;
        if !m.value.is_finite() {
            let reason = match log_marginal_pyramid(pyramid, &init, sigma_hat, options.r, options.nu) {
                Err(e) => e.to_string(),
                Ok(_) => "objective never finite".to_string(),
            };
            failures.push(format!("start {start}: {reason}"));
            continue;
        }
        let improved = best.as_ref().is_none_or(|(_, v, _)| m.value < *v);
        if improved {
            best = Some((init.unpack(&m.x)?, m.value, m.converged));
        }
    }
    let (config, value, converged) = best.ok_or_else(|| Error::Fit {
        starts: options.starts,
        details: failures.join("; "),
    })?;
    Ok(FitResult {
        config,
        sigma_hat,
        log_marginal: -value,
        n_evals: total_evals,
        converged,
        starts: options.starts,
        nlevels: pyramid.nlevels(),
        r: options.r,
        nu: options.nu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperspec::{GammaFamily, SlabFamily, TauFamily};
    use crate::priors::{imom_density, mom_density, normal_density, sample_coefficient};
    use crate::testutil::integrate_line;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn params(gamma1: f64, gamma2: f64, tau1: f64, tau2: f64, sigma2: f64) -> PriorParams {
        PriorParams {
            gamma1,
            gamma2,
            tau1,
            tau2,
            sigma2,
            r: 1,
            nu: 1.0,
        }
    }

    /// Log marginal by direct quadrature over d, with the point mass added exactly.
    /// The integrand is multiplied by `e^shift` to keep far-tail values well scaled.
    fn log_marginal_oracle(dhat: f64, p: &PriorParams, shift: f64) -> f64 {
        let s2 = p.sigma2;
        let [w1, w2, w0] = p.mixture_weights();
        let slab = |d: f64| {
            let lik = normal_density(dhat - d, 0.0, s2);
            let mut v = 0.0;
            if w1 > 0.0 {
                v += w1 * mom_density(d, p.tau1, p.r, s2).unwrap();
            }
            if w2 > 0.0 {
                v += w2 * imom_density(d, p.tau2, p.nu, s2).unwrap();
            }
            lik * v * shift.exp()
        };
        let s = p.tau1 / (1.0 + p.tau1);
        let sd = s2.sqrt();
        let breaks = [dhat, s * dhat, -dhat.abs() - sd, dhat.abs() + sd, 0.5 * dhat];
        let slab_part = integrate_line(slab, &breaks);
        (slab_part + w0 * (ln_normal_pdf(dhat, 0.0, s2) + shift).exp()).ln() - shift
    }

    fn marginal_oracle(dhat: f64, p: &PriorParams) -> f64 {
        log_marginal_oracle(dhat, p, 0.0).exp()
    }

    fn pyramid_from(levels: Vec<Vec<f64>>) -> CoefficientPyramid {
        let n = 2 * levels.last().map_or(1, |l| l.len());
        CoefficientPyramid {
            scaling: vec![0.0; levels[0].len()],
            details: levels,
            n,
        }
    }

    #[test]
    fn mad_examples() {
        let pyr = pyramid_from(vec![
            vec![0.0],
            vec![0.0, 0.0],
            vec![3.0, 1.0, 3.0, 5.0, 3.0, 3.0, 3.0, 3.0],
        ]);
        // median 3; deviations {0,2,0,2,0,0,0,0} → median 0
        assert!(estimate_sigma_mad(&pyr).is_err());
        let pyr = pyramid_from(vec![
            vec![0.0],
            vec![0.0, 0.0],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 3.0, 2.0, 4.0],
        ]);
        // median 3; deviations {2,1,0,1,2,0,1,1} → median 1
        assert!((estimate_sigma_mad(&pyr).unwrap() - 1.0 / 0.6745).abs() < 1e-12);
        let mut v = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(median(&mut v), 3.0);
        let mut dev: Vec<f64> = v.iter().map(|x| (x - 3.0_f64).abs()).collect();
        assert!((median(&mut dev) / MAD_SCALE - 1.48258).abs() < 1e-5);
        let flat = pyramid_from(vec![vec![0.0], vec![7.0; 2], vec![7.0; 4]]);
        assert!(matches!(estimate_sigma_mad(&flat), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mad_recovers_gaussian_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let sigma = 2.5;
        let normal = Normal::new(0.0, sigma).unwrap();
        let finest: Vec<f64> = (0..2048).map(|_| normal.sample(&mut rng)).collect();
        let pyr = pyramid_from(vec![vec![0.0; 1024], finest]);
        let est = estimate_sigma_mad(&pyr).unwrap();
        assert!((est / sigma - 1.0).abs() < 0.05, "{est}");
    }

    #[test]
    fn point_mass_only_is_gaussian() {
        for dhat in [-3.0, 0.0, 0.4, 5.0] {
            let p = params(0.0, 0.0, 1.0, 1.0, 1.7);
            assert_eq!(log_marginal_coeff(dhat, &p).unwrap(), ln_normal_pdf(dhat, 0.0, 1.7));
        }
    }

    #[test]
    fn mom_marginal_matches_quadrature() {
        let p = params(0.5, 0.0, 1.0, 1.0, 1.0);
        let oracle = marginal_oracle(1.0, &p);
        let direct =
            0.5 * integrate_line(
                |d| normal_density(1.0 - d, 0.0, 1.0) * mom_density(d, 1.0, 1, 1.0).unwrap(),
                &[1.0],
            ) + 0.5 * normal_density(1.0, 0.0, 1.0);
        assert!((oracle - direct).abs() < 1e-13);
        assert!((log_marginal_coeff(1.0, &p).unwrap() - oracle.ln()).abs() < 1e-8);

        for tau1 in [0.1, 0.5, 1.0, 3.0, 20.0] {
            for sigma2 in [0.25, 1.0, 4.0] {
                for dhat in [-6.0, -2.0, -0.3, 0.0, 0.7, 1.9, 4.5, 9.0] {
                    let mut p = params(1.0, 0.0, tau1, 1.0, sigma2);
                    let ours = log_marginal_coeff(dhat, &p).unwrap();
                    let shift = dhat * dhat / (2.0 * sigma2 * (1.0 + tau1));
                    let oracle = log_marginal_oracle(dhat, &p, shift);
                    assert!(
                        (ours - oracle).abs() < 1e-8,
                        "τ₁={tau1} σ²={sigma2} d̂={dhat}: {ours} vs {oracle}"
                    );
                    p.r = 2;
                    let ours = log_marginal_coeff(dhat, &p).unwrap();
                    let oracle = log_marginal_oracle(dhat, &p, shift);
                    assert!((ours - oracle).abs() < 1e-8, "r=2 τ₁={tau1} d̂={dhat}");
                }
            }
        }
    }

    #[test]
    fn imom_marginal_at_four_sigma() {
        let p = params(0.0, 1.0, 1.0, 1.0, 1.0);
        let ours = log_marginal_coeff(4.0, &p).unwrap().exp();
        let oracle = marginal_oracle(4.0, &p);
        assert!((ours / oracle - 1.0).abs() < 0.05, "{ours} vs {oracle}");
    }

    #[test]
    fn imom_marginal_large_coefficients() {
        // the single-mode Laplace estimate is sharp once |d̂|/σ is well past
        // the bimodal transition region
        for tau2 in [0.5, 1.0, 2.0] {
            for sigma2 in [0.5_f64, 2.0] {
                for a in [4.5, 6.0, 10.0] {
                    let dhat = a * sigma2.sqrt();
                    let p = params(0.0, 1.0, 1.0, tau2, sigma2);
                    let ours = log_marginal_coeff(dhat, &p).unwrap().exp();
                    let oracle = marginal_oracle(dhat, &p);
                    assert!(
                        (ours / oracle - 1.0).abs() < 0.05,
                        "τ₂={tau2} a={a}: {ours} vs {oracle}"
                    );
                    let neg = log_marginal_coeff(-dhat, &p).unwrap().exp();
                    assert!((neg / ours - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sigma_cancels_in_imom_branch() {
        // rescaling d̂ and σ together scales the marginal density by 1/σ
        let p1 = params(0.2, 0.6, 0.8, 1.3, 1.0);
        let p4 = params(0.2, 0.6, 0.8, 1.3, 4.0);
        for a in [-3.0, 0.1, 2.5, 7.0] {
            let v1 = log_marginal_coeff(a, &p1).unwrap();
            let v4 = log_marginal_coeff(2.0 * a, &p4).unwrap();
            assert!((v1 - (v4 + 2f64.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_on_dominant_branch_is_monotone() {
        let base = params(0.3, 0.4, 1.0, 1.0, 1.0);
        for dhat in [0.0, 1.0, 3.0, 8.0] {
            let t = LevelModel::new(base).unwrap().terms(dhat).unwrap();
            let dominant = (0..3)
                .max_by(|&i, &j| t.log_terms[i].total_cmp(&t.log_terms[j]))
                .unwrap();
            let lm = t.log_marginal();
            let bumped = match dominant {
                0 => params(0.31, 0.4, 1.0, 1.0, 1.0),
                1 => params(0.3, 0.41, 1.0, 1.0, 1.0),
                _ => params(0.29, 0.39, 1.0, 1.0, 1.0),
            };
            assert!(log_marginal_coeff(dhat, &bumped).unwrap() >= lm - 1e-12, "d̂={dhat}");
        }
    }

    fn logit_polynom(slab: SlabFamily) -> Method {
        Method::new(slab, GammaFamily::Logit, TauFamily::Polynom)
    }

    #[test]
    fn neg_log_marginal_single_coefficient() {
        let pyr = pyramid_from(vec![vec![1.3]]);
        // γ = logistic(θ₁ - θ₂) ≈ 0 for θ₁ = -800
        let cfg = SpecConfig {
            method: logit_polynom(SlabFamily::Mixture),
            theta_gamma: vec![-800.0, 1.0, -800.0, 1.0],
            theta_tau: vec![1.0; 4],
        };
        let v = neg_log_marginal(&cfg.pack(), &pyr, 0.9, &cfg, 1, 1.0);
        assert!((v + ln_normal_pdf(1.3, 0.0, 0.81)).abs() < 1e-12);
    }

    #[test]
    fn neg_log_marginal_is_sum_of_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let levels: Vec<Vec<f64>> = (0..4)
            .map(|l| (0..1usize << l).map(|_| rng.gen_range(-4.0..4.0)).collect())
            .collect();
        let pyr = pyramid_from(levels);
        assert_eq!(pyr.detail_count() + pyr.scaling.len(), 16);
        let cfg = SpecConfig {
            method: logit_polynom(SlabFamily::Mixture),
            theta_gamma: vec![2.0, 0.7, 1.0, 0.4],
            theta_tau: vec![3.0, 0.8, 1.5, 0.3],
        };
        let sigma: f64 = 1.2;
        let mut expected = 0.0;
        for (l, coeffs) in pyr.levels() {
            let lf = l as f64;
            let logistic = |z: f64| 1.0 / (1.0 + (-z).exp());
            let p = PriorParams {
                gamma1: logistic(2.0 - 0.7 * lf),
                gamma2: logistic(1.0 - 0.4 * lf),
                tau1: 3.0 * lf.powf(-0.8),
                tau2: 1.5 * lf.powf(-0.3),
                sigma2: sigma * sigma,
                r: 1,
                nu: 1.0,
            };
            for &d in coeffs {
                expected += log_marginal_coeff(d, &p).unwrap();
            }
        }
        let v = neg_log_marginal(&cfg.pack(), &pyr, sigma, &cfg, 1, 1.0);
        assert!((v + expected).abs() < 1e-10, "{v} vs {expected}");
    }

    proptest! {
        #[test]
        fn neg_log_marginal_permutation_invariant(
            vals in proptest::collection::vec(-6.0f64..6.0, 8),
            rot in 0usize..8,
        ) {
            let cfg = SpecConfig::neutral(logit_polynom(SlabFamily::Mixture), 3);
            let a = pyramid_from(vec![vec![0.5], vec![1.0, -2.0], vec![0.0; 4], vals.clone()]);
            let mut rotated = vals.clone();
            rotated.rotate_left(rot);
            rotated.reverse();
            let b = pyramid_from(vec![vec![0.5], vec![-2.0, 1.0], vec![0.0; 4], rotated]);
            let cfg = SpecConfig::neutral(cfg.method, 4);
            let va = neg_log_marginal(&cfg.pack(), &a, 1.0, &cfg, 1, 1.0);
            let vb = neg_log_marginal(&cfg.pack(), &b, 1.0, &cfg, 1, 1.0);
            prop_assert!(va.is_finite());
            prop_assert!(((va - vb) / va).abs() < 1e-13);
        }
    }

    fn synthetic_pyramid(truth: &SpecConfig, nlevels: usize, sigma: f64, seed: u64) -> CoefficientPyramid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let levels = resolve_levels(truth, nlevels, sigma * sigma, 1, 1.0).unwrap();
        let details = levels
            .iter()
            .map(|lp| {
                (0..1usize << (lp.level - 1))
                    .map(|_| sample_coefficient(&lp.prior, &mut rng).unwrap() + noise.sample(&mut rng))
                    .collect()
            })
            .collect();
        pyramid_from(details)
    }

    #[test]
    fn fit_dominates_truth_on_model_data() {
        let method = logit_polynom(SlabFamily::Mixture);
        let truth = SpecConfig {
            method,
            theta_gamma: vec![3.0, 0.6, 2.0, 0.5],
            theta_tau: vec![8.0, 0.5, 2.0, 0.5],
        };
        let pyr = synthetic_pyramid(&truth, 11, 1.0, 77);
        assert_eq!(pyr.detail_count(), 2047);
        let opts = FitOptions {
            starts: 2,
            max_evals: 1500,
            ..Default::default()
        };
        let result = fit(&pyr, method, 1.0, &opts).unwrap();
        let at_truth = log_marginal_pyramid(&pyr, &truth, 1.0, 1, 1.0).unwrap();
        assert!(
            result.log_marginal >= at_truth - 1e-6,
            "{} < {at_truth}",
            result.log_marginal
        );
        result.config.validate().unwrap();
        let again = fit(&pyr, method, 1.0, &opts).unwrap();
        assert_eq!(result, again);
    }

    #[test]
    fn fit_on_pure_noise_shrinks_finest_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let details: Vec<Vec<f64>> = (0..10)
            .map(|l| (0..1usize << l).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let pyr = pyramid_from(details);
        for slab in [SlabFamily::Mom, SlabFamily::Mixture] {
            let method = logit_polynom(slab);
            let opts = FitOptions {
                starts: 2,
                max_evals: 800,
                ..Default::default()
            };
            let result = fit(&pyr, method, 1.0, &opts).unwrap();
            // γ is not identified once τ₁ → 0 (the MOM slab then coincides with the
            // point mass), so check the prior spread the slabs actually carry
            let (g1, g2, t1, _) = result.config.at_level(10).unwrap();
            let mom_spread = g1 * 3.0 * t1;
            let imom_mass = (1.0 - g1) * g2;
            assert!(
                mom_spread < 0.01 && imom_mass < 0.1,
                "{slab:?}: γ₁={g1} τ₁={t1} γ₂={g2}"
            );
            let null = log_marginal_pyramid(
                &pyr,
                &SpecConfig {
                    method,
                    theta_gamma: vec![-800.0, 1.0, -800.0, 1.0],
                    theta_tau: vec![1.0; 4],
                },
                1.0,
                1,
                1.0,
            )
            .unwrap();
            assert!(result.log_marginal >= null - 1e-6);
        }
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let pyr = pyramid_from(vec![vec![1.0], vec![0.5, -0.5]]);
        let m = logit_polynom(SlabFamily::Mom);
        assert!(matches!(
            fit(&pyr, m, 0.0, &FitOptions::default()),
            Err(Error::Degenerate(_))
        ));
        let opts = FitOptions {
            starts: 0,
            ..Default::default()
        };
        assert!(fit(&pyr, m, 1.0, &opts).is_err());
        let opts = FitOptions {
            nu: -1.0,
            starts: 2,
            max_evals: 50,
            ..Default::default()
        };
        let err = fit(&pyr, m, 1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::Fit { starts: 2, .. }), "{err}");
    }
}
