//! Posterior weights, posterior means and the end-to-end denoiser.
//!
//! Given `d̂`, the nonzero part of the posterior is a two-branch mixture: the
//! MOM branch is exactly `d^(2r) N(d; s d̂, sσ²)` up to normalization with
//! `s = τ₁/(1+τ₁)`, and the IMOM branch is replaced by its Laplace Gaussian
//! `N(d*, σ*²)`. The posterior mean is
//!
//! ```text
//! d̄ = p₁ √s σ M**/M* + p₂ d*
//! ```

use serde::{Deserialize, Serialize};

use crate::ebayes::{fit, mad_sigma, BranchTerms, FitOptions, FitResult, LevelModel};
use crate::error::{Error, Result};
use crate::hyperspec::{resolve_levels, Method};
use crate::priors::PriorParams;
use crate::special::{ln_double_factorial_odd, ln_normal_pdf, normalize_log_weights};
use crate::transform::{dwt, idwt, CoefficientPyramid, Depth, WaveletFilter};

/// Posterior summary of one detail coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageSummary {
    /// Level and position; both 0 when computed outside a pyramid.
    pub level: usize,
    pub index: usize,
    /// Posterior weight of the MOM branch.
    pub p1: f64,
    /// Posterior weight of the IMOM branch.
    pub p2: f64,
    pub post_mean: f64,
    /// Laplace mode of the IMOM branch; `None` when that branch is pinned off.
    pub d_star: Option<f64>,
}

impl ShrinkageSummary {
    /// Posterior weight of the point mass.
    pub fn p0(&self) -> f64 {
        1.0 - self.p1 - self.p2
    }
}

/// `(log O1, log O2)`: each slab branch against the point mass.
pub fn log_odds(dhat: f64, p: &PriorParams) -> Result<(f64, f64)> {
    p.validate()?;
    if p.gamma1 >= 1.0 || p.gamma2 >= 1.0 {
        return Err(Error::Degenerate(format!(
            "odds need a point mass (γ₁ = {}, γ₂ = {})",
            p.gamma1, p.gamma2
        )));
    }
    let t = LevelModel::new(*p)?.terms(dhat)?;
    let [mom, imom, null] = t.log_terms;
    Ok((mom - null, imom - null))
}

/// `(p1, p2)` from log odds, normalized in log space.
pub fn posterior_probs(log_o1: f64, log_o2: f64) -> (f64, f64) {
    let [_, p1, p2] = normalize_log_weights([0.0, log_o1, log_o2]);
    (p1, p2)
}

fn summarize(model: &LevelModel, t: &BranchTerms) -> ShrinkageSummary {
    let p = &model.prior;
    let [p1, p2, _] = normalize_log_weights(t.log_terms);
    let sigma = p.sigma();
    let mut post_mean = 0.0;
    if p1 > 0.0 {
        let s = p.tau1 / (1.0 + p.tau1);
        post_mean += p1 * s.sqrt() * sigma * model.poly.m_star_star(t.x) / t.m_star;
    }
    let d_star = t.mode.map(|m| sigma * m.u);
    if let Some(d) = d_star {
        post_mean += p2 * d;
    }
    ShrinkageSummary {
        level: 0,
        index: 0,
        p1,
        p2,
        post_mean,
        d_star,
    }
}

/// Posterior weights and posterior mean of one coefficient.
pub fn posterior_mean_coeff(dhat: f64, p: &PriorParams) -> Result<ShrinkageSummary> {
    let model = LevelModel::new(*p)?;
    let t = model.terms(dhat)?;
    Ok(summarize(&model, &t))
}

/// Density of `d` given `d̂` and `d ≠ 0`.
pub fn posterior_density_nonzero(d: f64, dhat: f64, p: &PriorParams) -> Result<f64> {
    let model = LevelModel::new(*p)?;
    let t = model.terms(dhat)?;
    let summary = summarize(&model, &t);
    let slab = summary.p1 + summary.p2;
    if !(slab > 0.0) {
        return Err(Error::Domain(format!("no posterior mass off zero at d̂ = {dhat}")));
    }
    let mut density = 0.0;
    if summary.p1 > 0.0 && d != 0.0 {
        // d^(2r) N(d; s d̂, sσ²) / E[d^(2r)], with E[d^(2r)] = (sσ²)^r (2r-1)!! M*
        let s = p.tau1 / (1.0 + p.tau1);
        let v = s * p.sigma2;
        let r = p.r as f64;
        let ln = 2.0 * r * d.abs().ln() + ln_normal_pdf(d, s * dhat, v)
            - r * v.ln()
            - ln_double_factorial_odd(p.r)
            - t.m_star.ln();
        density += summary.p1 / slab * ln.exp();
    }
    if let (Some(m), true) = (t.mode, summary.p2 > 0.0) {
        let sigma = p.sigma();
        let centre = sigma * m.u;
        let var = p.sigma2 / m.neg_curvature;
        density += summary.p2 / slab * ln_normal_pdf(d, centre, var).exp();
    }
    Ok(density)
}

/// Replaces every detail coefficient by its posterior mean; scaling coefficients pass through.
pub fn shrink_pyramid(
    pyramid: &CoefficientPyramid,
    fit: &FitResult,
) -> Result<(CoefficientPyramid, Vec<ShrinkageSummary>)> {
    if fit.nlevels != pyramid.nlevels() {
        return Err(Error::Structure(format!(
            "fit covers {} levels but the pyramid has {}",
            fit.nlevels,
            pyramid.nlevels()
        )));
    }
    let levels = resolve_levels(
        &fit.config,
        pyramid.nlevels(),
        fit.sigma_hat * fit.sigma_hat,
        fit.r,
        fit.nu,
    )?;
    let mut out = pyramid.clone();
    let mut summaries = Vec::with_capacity(pyramid.detail_count());
    for lp in &levels {
        let model = LevelModel::new(lp.prior)?;
        for (j, d) in out.level_mut(lp.level).iter_mut().enumerate() {
            let t = model
                .terms(*d)
                .map_err(|e| Error::Numerical(format!("coefficient (level {}, index {j}): {e}", lp.level)))?;
            let mut s = summarize(&model, &t);
            s.level = lp.level;
            s.index = j;
            *d = s.post_mean;
            summaries.push(s);
        }
    }
    Ok((out, summaries))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseOptions {
    pub depth: Depth,
    pub fit: FitOptions,
    /// Samples past this index are zero padding. The noise estimate then only
    /// uses finest coefficients whose filter support lies on real samples.
    pub valid_len: Option<usize>,
}

impl Default for DenoiseOptions {
    fn default() -> Self {
        DenoiseOptions {
            depth: Depth::Default,
            fit: FitOptions::default(),
            valid_len: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoised {
    pub estimate: Vec<f64>,
    /// `None` when every detail coefficient is exactly zero and there is nothing to fit.
    pub fit: Option<FitResult>,
    pub summaries: Vec<ShrinkageSummary>,
}

/// Transform, estimate σ, fit, shrink and reconstruct.
pub fn denoise(signal: &[f64], method: Method, filter: &WaveletFilter, options: &DenoiseOptions) -> Result<Denoised> {
    let mut pyramid = dwt(signal, filter, options.depth).map_err(|e| e.at("transform"))?;
    // details at round-off level (noiseless, locally polynomial input) carry no
    // noise to estimate; they shrink to zero under any prior
    let scale = signal
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let negligible = 1e3 * f64::EPSILON * scale;
    if pyramid.levels().all(|(_, c)| c.iter().all(|v| v.abs() <= negligible)) {
        pyramid
            .details
            .iter_mut()
            .for_each(|d| d.iter_mut().for_each(|v| *v = 0.0));
        return Ok(Denoised {
            estimate: idwt(&pyramid, filter).map_err(|e| e.at("reconstruction"))?,
            fit: None,
            summaries: Vec::new(),
        });
    }
    let finest = pyramid.finest();
    let usable = match options.valid_len {
        // coefficient k reads samples 2k ..= 2k + L - 1
        Some(v) if v < signal.len() => ((v + 1).saturating_sub(filter.len()) / 2).clamp(1, finest.len()),
        _ => finest.len(),
    };
    let sigma = mad_sigma(&finest[..usable]).map_err(|e| e.at("noise estimate"))?;
    let fitted = fit(&pyramid, method, sigma, &options.fit).map_err(|e| e.at("fit"))?;
    let (shrunk, summaries) = shrink_pyramid(&pyramid, &fitted).map_err(|e| e.at("shrinkage"))?;
    let estimate = idwt(&shrunk, filter).map_err(|e| e.at("reconstruction"))?;
    Ok(Denoised {
        estimate,
        fit: Some(fitted),
        summaries,
    })
}
