//! Periodized orthogonal discrete wavelet transform.
//!
//! The forward transform is the Mallat pyramid with wrap-around boundaries:
//!
//! ```text
//! a[k] = Σ_m h[m] x[(2k + m) mod n]
//! d[k] = Σ_m g[m] x[(2k + m) mod n],   g[m] = (-1)^m h[L-1-m]
//! ```
//!
//! Detail levels are numbered from the coarse end: level 1 is the coarsest
//! detail vector and level `L` is the finest (length `n/2`).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

// Least-asymmetric Daubechies, 6 vanishing moments.
const SYM6: [f64; 12] = [
    -0.007_800_708_325_032_380_414_2,
    0.001_767_711_864_254_007_741,
    0.044_724_901_770_781_384_663,
    -0.021_060_292_512_370_847_992,
    -0.072_637_522_786_376_583_464,
    0.337_929_421_728_165_832_71,
    0.787_641_141_028_650_996_07,
    0.491_055_941_927_973_733_04,
    -0.048_311_742_585_698_054_971,
    -0.117_990_111_148_520_025_4,
    0.003_490_712_084_222_162_515_3,
    0.015_404_109_327_044_824_299,
];

// Coiflet, 5 vanishing moments.
const COIF5: [f64; 30] = [
    -0.000_212_081_862_067_494,
    0.000_358_577_741_161_757_7,
    0.002_178_294_377_845_694_7,
    -0.004_159_312_627_578_64,
    -0.010_131_584_846_900_276,
    0.023_408_322_118_927_783,
    0.028_169_744_270_532_353,
    -0.091_921_588_060_086_09,
    -0.052_046_670_253_554_764,
    0.421_571_266_730_754_35,
    0.774_293_622_860_327_4,
    0.437_982_306_659_163_4,
    -0.062_037_751_574_981_96,
    -0.105_563_151_307_337_23,
    0.041_287_530_472_117_834,
    0.032_674_799_467_057_355,
    -0.019_758_391_600_965_465,
    -0.009_159_507_338_676_163,
    0.006_761_520_220_620_417,
    0.002_431_575_442_538_288_6,
    -0.001_661_627_303_929_878_8,
    -0.000_637_558_926_125_881_2,
    0.000_301_857_941_668_244_8,
    0.000_140_356_328_123_732_43,
    -4.121_986_192_426_55e-5,
    -2.127_022_167_251_561_4e-5,
    3.700_727_711_339_479_6e-6,
    2.061_220_398_578_878_3e-6,
    -1.623_799_517_204_833_8e-7,
    -9.604_010_112_767_894e-8,
];

/// Supported wavelet families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wavelet {
    Haar,
    Sym6,
    Coif5,
}

impl Wavelet {
    pub const ALL: [Wavelet; 3] = [Wavelet::Haar, Wavelet::Sym6, Wavelet::Coif5];

    pub fn name(self) -> &'static str {
        match self {
            Wavelet::Haar => "haar",
            Wavelet::Sym6 => "sym6",
            Wavelet::Coif5 => "coif5",
        }
    }

    pub fn filter(self) -> WaveletFilter {
        let taps: &[f64] = match self {
            Wavelet::Haar => &HAAR,
            Wavelet::Sym6 => &SYM6,
            Wavelet::Coif5 => &COIF5,
        };
        WaveletFilter {
            name: self,
            lowpass: taps.to_vec(),
        }
    }
}

impl fmt::Display for Wavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Wavelet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Wavelet::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "wavelet",
                name: s.to_string(),
                supported: Wavelet::ALL.map(Wavelet::name).join(", "),
            })
    }
}

/// An orthonormal two-channel filter pair, stored as its lowpass taps.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    pub name: Wavelet,
    pub lowpass: Vec<f64>,
}

impl WaveletFilter {
    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }

    /// Quadrature-mirror highpass taps `g[m] = (-1)^m h[L-1-m]`.
    pub fn highpass(&self) -> Vec<f64> {
        let len = self.lowpass.len();
        (0..len)
            .map(|m| {
                let h = self.lowpass[len - 1 - m];
                if m % 2 == 0 {
                    h
                } else {
                    -h
                }
            })
            .collect()
    }
}

/// Looks up a filter by its configuration name (`haar`, `sym6`, `coif5`).
pub fn filter_taps(name: &str) -> Result<WaveletFilter> {
    Ok(name.parse::<Wavelet>()?.filter())
}

/// How many detail levels the forward transform produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Depth {
    /// Full depth for haar; for longer filters stop once the scaling vector
    /// reaches the smallest power of two not shorter than the filter.
    #[default]
    Default,
    /// Exactly this many detail levels, `1 ..= log2(n)`.
    Levels(usize),
}

/// Scaling coefficients at the coarsest level plus one detail vector per level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPyramid {
    pub scaling: Vec<f64>,
    /// `details[0]` is level 1 (coarsest), `details[L-1]` is level `L` (finest).
    pub details: Vec<Vec<f64>>,
    pub n: usize,
}

impl CoefficientPyramid {
    pub fn nlevels(&self) -> usize {
        self.details.len()
    }

    /// Detail coefficients at 1-based level `l`.
    pub fn level(&self, l: usize) -> &[f64] {
        &self.details[l - 1]
    }

    pub fn level_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.details[l - 1]
    }

    pub fn finest(&self) -> &[f64] {
        self.details.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Iterates `(level, coefficients)` from coarsest to finest.
    pub fn levels(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.details.iter().enumerate().map(|(i, d)| (i + 1, d.as_slice()))
    }

    pub fn detail_count(&self) -> usize {
        self.details.iter().map(Vec::len).sum()
    }

    pub fn energy(&self) -> f64 {
        sum_sq(&self.scaling) + self.details.iter().map(|d| sum_sq(d)).sum::<f64>()
    }

    /// Same shape, every coefficient zero.
    pub fn zeros_like(&self) -> Self {
        CoefficientPyramid {
            scaling: vec![0.0; self.scaling.len()],
            details: self.details.iter().map(|d| vec![0.0; d.len()]).collect(),
            n: self.n,
        }
    }

    fn check_shape(&self) -> Result<()> {
        let levels = self.details.len();
        if !self.n.is_power_of_two() || levels == 0 || self.n >> levels == 0 {
            return Err(Error::Structure(format!(
                "pyramid with {levels} levels cannot describe a signal of length {}",
                self.n
            )));
        }
        let coarse = self.n >> levels;
        if self.scaling.len() != coarse {
            return Err(Error::Structure(format!(
                "scaling vector has {} entries, expected {coarse}",
                self.scaling.len()
            )));
        }
        for (i, d) in self.details.iter().enumerate() {
            let expected = coarse << i;
            if d.len() != expected {
                return Err(Error::Structure(format!(
                    "level {} has {} entries, expected {expected}",
                    i + 1,
                    d.len()
                )));
            }
        }
        Ok(())
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `log2(n)` for a power of two `n >= 8`.
pub fn dyadic_exponent(n: usize) -> Result<usize> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::Sizing(format!("signal length {n} is not a power of two >= 8")));
    }
    Ok(n.trailing_zeros() as usize)
}

/// Number of detail levels used by [`Depth::Default`].
pub fn default_levels(n: usize, filter: &WaveletFilter) -> Result<usize> {
    let j = dyadic_exponent(n)?;
    if filter.name == Wavelet::Haar {
        return Ok(j);
    }
    if n < filter.len() {
        return Err(Error::Sizing(format!(
            "signal length {n} is shorter than the {}-tap {} filter",
            filter.len(),
            filter.name
        )));
    }
    let coarsest = filter.len().next_power_of_two();
    if n <= coarsest {
        return Err(Error::Sizing(format!(
            "the default depth for {} leaves no detail levels below length {}",
            filter.name,
            2 * coarsest
        )));
    }
    Ok(j - coarsest.trailing_zeros() as usize)
}

fn analysis_step(x: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        let mut idx = 2 * k;
        let (mut sa, mut sd) = (0.0, 0.0);
        for (hm, gm) in h.iter().zip(g) {
            sa += hm * x[idx];
            sd += gm * x[idx];
            idx += 1;
            if idx == n {
                idx = 0;
            }
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = 2 * a.len();
    let mut x = vec![0.0; n];
    for k in 0..a.len() {
        let mut idx = 2 * k;
        for (hm, gm) in h.iter().zip(g) {
            x[idx] += hm * a[k] + gm * d[k];
            idx += 1;
            if idx == n {
                idx = 0;
            }
        }
    }
    x
}

/// Forward transform of a dyadic-length signal.
pub fn dwt(signal: &[f64], filter: &WaveletFilter, depth: Depth) -> Result<CoefficientPyramid> {
    let n = signal.len();
    let j = dyadic_exponent(n)?;
    let levels = match depth {
        Depth::Default => default_levels(n, filter)?,
        Depth::Levels(k) if (1..=j).contains(&k) => k,
        Depth::Levels(k) => {
            return Err(Error::Sizing(format!(
                "{k} detail levels requested; a length-{n} signal supports 1..={j}"
            )))
        }
    };
    let h = &filter.lowpass;
    let g = filter.highpass();
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = analysis_step(&approx, h, &g);
        details.push(d);
        approx = a;
    }
    details.reverse();
    Ok(CoefficientPyramid {
        scaling: approx,
        details,
        n,
    })
}

/// Inverse of [`dwt`] for the same filter.
pub fn idwt(pyramid: &CoefficientPyramid, filter: &WaveletFilter) -> Result<Vec<f64>> {
    pyramid.check_shape()?;
    let h = &filter.lowpass;
    let g = filter.highpass();
    let mut approx = pyramid.scaling.clone();
    for d in &pyramid.details {
        approx = synthesis_step(&approx, d, h, &g);
    }
    Ok(approx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn orthogonality_residual(h: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 1..h.len() / 2 {
            let s: f64 = (0..h.len() - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
            worst = worst.max(s.abs());
        }
        worst
    }

    #[test]
    fn filter_invariants() {
        for w in Wavelet::ALL {
            let f = w.filter();
            let sum: f64 = f.lowpass.iter().sum();
            assert!((sum - 2f64.sqrt()).abs() < 1e-12, "{w}: sum {sum}");
            assert!((sum_sq(&f.lowpass) - 1.0).abs() < 1e-12, "{w}");
            assert!(orthogonality_residual(&f.lowpass) < 1e-12, "{w}");
        }
    }

    #[test]
    fn filter_lookup() {
        let haar = filter_taps("haar").unwrap();
        assert_eq!(haar.lowpass, vec![std::f64::consts::FRAC_1_SQRT_2; 2]);
        assert_eq!(filter_taps("sym6").unwrap().len(), 12);
        let coif = filter_taps("coif5").unwrap();
        assert_eq!(coif.len(), 30);
        let lag1: f64 = (0..28).map(|k| coif.lowpass[k] * coif.lowpass[k + 2]).sum();
        assert!(lag1.abs() < 1e-12);
        let err = filter_taps("db4").unwrap_err().to_string();
        assert!(err.contains("haar, sym6, coif5"), "{err}");
    }

    #[test]
    fn constant_signal_has_no_details() {
        let x = vec![3.5; 64];
        let p = dwt(&x, &Wavelet::Haar.filter(), Depth::Default).unwrap();
        assert_eq!(p.nlevels(), 6);
        assert!(p.details.iter().flatten().all(|d| d.abs() < 1e-12));
        assert!((p.scaling[0] - 3.5 * 8.0).abs() < 1e-12);
    }

    #[test]
    fn half_and_half_step_hits_one_coefficient() {
        let x = [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0];
        let p = dwt(&x, &Wavelet::Haar.filter(), Depth::Default).unwrap();
        let nonzero: Vec<(usize, usize)> = p
            .levels()
            .flat_map(|(l, d)| {
                d.iter()
                    .enumerate()
                    .filter(|(_, v)| v.abs() > 1e-12)
                    .map(move |(j, _)| (l, j))
            })
            .collect();
        assert_eq!(nonzero, vec![(1, 0)]);
    }

    #[test]
    fn finest_haar_atom() {
        let f = Wavelet::Haar.filter();
        let mut p = dwt(&[0.0; 16], &f, Depth::Default).unwrap();
        p.level_mut(4)[2] = 1.0;
        let x = idwt(&p, &f).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (i, v) in x.iter().enumerate() {
            let expected = match i {
                4 => s,
                5 => -s,
                _ => 0.0,
            };
            assert!((v - expected).abs() < 1e-15, "{i}: {v}");
        }
    }

    #[test]
    fn zero_pyramid_inverts_to_zero() {
        let f = Wavelet::Sym6.filter();
        let p = dwt(&[0.0; 64], &f, Depth::Default).unwrap();
        assert!(idwt(&p, &f).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parseval_sym6_normal_draws() {
        let x = normal_vec(1024, 7);
        let p = dwt(&x, &Wavelet::Sym6.filter(), Depth::Default).unwrap();
        let ex = sum_sq(&x);
        assert!((p.energy() - ex).abs() / ex < 1e-9);
    }

    #[test]
    fn default_depths() {
        assert_eq!(default_levels(1024, &Wavelet::Haar.filter()).unwrap(), 10);
        assert_eq!(default_levels(1024, &Wavelet::Sym6.filter()).unwrap(), 6);
        assert_eq!(default_levels(1024, &Wavelet::Coif5.filter()).unwrap(), 5);
        let p = dwt(&vec![1.0; 1024], &Wavelet::Sym6.filter(), Depth::Default).unwrap();
        assert_eq!(p.scaling.len(), 16);
        assert_eq!(p.level(1).len(), 16);
        assert_eq!(p.finest().len(), 512);
    }

    #[test]
    fn sizing_errors() {
        let f = Wavelet::Haar.filter();
        assert!(matches!(dwt(&[0.0; 12], &f, Depth::Default), Err(Error::Sizing(_))));
        assert!(matches!(dwt(&[0.0; 4], &f, Depth::Default), Err(Error::Sizing(_))));
        assert!(matches!(
            dwt(&[0.0; 16], &Wavelet::Coif5.filter(), Depth::Default),
            Err(Error::Sizing(_))
        ));
        assert!(matches!(dwt(&[0.0; 16], &f, Depth::Levels(5)), Err(Error::Sizing(_))));
    }

    #[test]
    fn short_signals_wrap_with_explicit_depth() {
        let f = Wavelet::Coif5.filter();
        let x = normal_vec(8, 3);
        let p = dwt(&x, &f, Depth::Levels(3)).unwrap();
        let y = idwt(&p, &f).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inconsistent_pyramid_is_rejected() {
        let f = Wavelet::Haar.filter();
        let mut p = dwt(&[1.0; 16], &f, Depth::Default).unwrap();
        p.details[2].pop();
        assert!(matches!(idwt(&p, &f), Err(Error::Structure(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn round_trip_and_linearity(
                exp in 3usize..=9,
                wi in 0usize..3,
                seed in any::<u64>(),
                a in -5.0f64..5.0,
                b in -5.0f64..5.0,
            ) {
                let n = 1 << exp;
                let f = Wavelet::ALL[wi].filter();
                let x = normal_vec(n, seed);
                let y = normal_vec(n, seed.wrapping_add(1));
                let p = dwt(&x, &f, Depth::Levels(exp)).unwrap();
                let back = idwt(&p, &f).unwrap();
                let scale = sum_sq(&x).sqrt();
                let err = x.iter().zip(&back).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
                prop_assert!(err / scale < 1e-9);

                let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
                let pc = dwt(&combo, &f, Depth::Levels(exp)).unwrap();
                let py = dwt(&y, &f, Depth::Levels(exp)).unwrap();
                for ((c, u), v) in pc.details.iter().flatten().zip(p.details.iter().flatten()).zip(py.details.iter().flatten()) {
                    prop_assert!((c - (a * u + b * v)).abs() < 1e-10);
                }
            }
        }
    }
}
