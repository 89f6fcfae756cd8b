//! Simulation harness: modified Donoho–Johnstone test functions, noise at a
//! target SNR, replicated method comparisons and the win-count table.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ebayes::{estimate_sigma_mad, FitOptions};
use crate::error::{Error, Result};
use crate::hyperspec::Method;
use crate::posterior::{denoise, DenoiseOptions};
use crate::transform::{dwt, idwt, Depth, Wavelet, WaveletFilter};

pub const JUMPS: [f64; 11] = [0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81];
pub const BLOCKS_HEIGHTS: [f64; 11] = [4.0, -8.0, 3.0, -4.0, 8.0, -4.2, 2.1, 4.3, -6.1, 2.1, -4.7];
pub const BUMPS_HEIGHTS: [f64; 11] = [2.0, 10.0, 1.0, 4.0, 8.0, 4.2, 2.1, 4.3, 1.1, 3.1, 8.2];
pub const BUMPS_WIDTHS: [f64; 11] = [0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005];
pub const DOPPLER_EPS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFunction {
    Blocks,
    Bumps,
    Doppler,
    Lcomb1,
    Lcomb2,
    Lcomb3,
}

impl TestFunction {
    pub const ALL: [TestFunction; 6] = [
        TestFunction::Blocks,
        TestFunction::Bumps,
        TestFunction::Doppler,
        TestFunction::Lcomb1,
        TestFunction::Lcomb2,
        TestFunction::Lcomb3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Blocks => "blocks",
            TestFunction::Bumps => "bumps",
            TestFunction::Doppler => "doppler",
            TestFunction::Lcomb1 => "lcomb1",
            TestFunction::Lcomb2 => "lcomb2",
            TestFunction::Lcomb3 => "lcomb3",
        }
    }

    /// Weights on (blocks, bumps, doppler) for the linear combinations.
    pub fn weights(self) -> [f64; 3] {
        match self {
            TestFunction::Blocks => [1.0, 0.0, 0.0],
            TestFunction::Bumps => [0.0, 1.0, 0.0],
            TestFunction::Doppler => [0.0, 0.0, 1.0],
            TestFunction::Lcomb1 => [0.4, 0.4, 0.2],
            TestFunction::Lcomb2 => [0.4, 0.2, 0.4],
            TestFunction::Lcomb3 => [0.2, 0.4, 0.4],
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestFunction::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "test function",
                name: s.to_string(),
                supported: "blocks, bumps, doppler, lcomb1, lcomb2, lcomb3".into(),
            })
    }
}

fn blocks(t: f64) -> f64 {
    JUMPS
        .iter()
        .zip(BLOCKS_HEIGHTS)
        .map(|(tj, h)| {
            let x = t - tj;
            // sign(0) = 0 puts half the jump at the abscissa itself
            let k = if x > 0.0 {
                1.0
            } else if x < 0.0 {
                0.0
            } else {
                0.5
            };
            h * k
        })
        .sum()
}

fn bumps(t: f64) -> f64 {
    JUMPS
        .iter()
        .zip(BUMPS_HEIGHTS)
        .zip(BUMPS_WIDTHS)
        .map(|((tj, h), w)| h * (1.0 + ((t - tj) / w).abs()).powi(-4))
        .sum()
}

fn doppler(t: f64) -> f64 {
    (t * (1.0 - t)).sqrt() * (2.0 * std::f64::consts::PI * (1.0 + DOPPLER_EPS) / (t + DOPPLER_EPS)).sin()
}

/// Test function value at `t ∈ (0, 1]`. The right endpoint is included because
/// the sampling grid `i/n` ends there.
pub fn eval_test_function(f: TestFunction, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!(
            "test functions are defined on (0, 1], got t = {t}"
        )));
    }
    let [a, b, c] = f.weights();
    let mut v = 0.0;
    if a != 0.0 {
        v += a * blocks(t);
    }
    if b != 0.0 {
        v += b * bumps(t);
    }
    if c != 0.0 {
        v += c * doppler(t);
    }
    Ok(v)
}

/// `f(i/n)` for `i = 1..=n`.
pub fn sample_function(f: TestFunction, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Sizing(format!("sample size must be a power of two, got {n}")));
    }
    (1..=n).map(|i| eval_test_function(f, i as f64 / n as f64)).collect()
}

/// Population standard deviation.
pub fn population_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Noise scale `sd(f)/snr` for a sampled signal.
pub fn noise_sigma(f: &[f64], snr: f64) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::Domain(format!("SNR must be positive and finite, got {snr}")));
    }
    let sd = population_sd(f);
    if !(sd > 0.0) {
        return Err(Error::Degenerate("SNR is undefined for a constant signal".into()));
    }
    Ok(sd / snr)
}

/// `f + N(0, σ²)` with `σ = sd(f)/snr`; returns the noisy signal and σ.
pub fn add_noise(f: &[f64], snr: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    let sigma = noise_sigma(f, snr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    Ok((f.iter().map(|v| v + normal.sample(&mut rng)).collect(), sigma))
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Sizing(format!(
            "mse needs equal nonempty lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// Hard thresholding at the universal threshold `σ̂ √(2 ln n)`.
pub fn hard_threshold_universal(signal: &[f64], filter: &WaveletFilter) -> Result<Vec<f64>> {
    let mut pyr = dwt(signal, filter, Depth::Default)?;
    let sigma = estimate_sigma_mad(&pyr)?;
    let lambda = sigma * (2.0 * (signal.len() as f64).ln()).sqrt();
    for d in pyr.details.iter_mut().flatten() {
        if d.abs() <= lambda {
            *d = 0.0;
        }
    }
    idwt(&pyr, filter)
}

/// A column of the comparison: one of the 24 prior methods or the hard-threshold baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Nlp(Method),
    HardUniversal,
}

impl Estimator {
    pub const HARD_NAME: &'static str = "hard-universal";

    /// The 24 prior methods in table order.
    pub fn all_nlp() -> Vec<Estimator> {
        Method::all().into_iter().map(Estimator::Nlp).collect()
    }

    /// Parses a comma-separated list; `all` expands to the 24 prior methods.
    pub fn parse_list(s: &str) -> Result<Vec<Estimator>> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            if item == "all" {
                out.extend(Estimator::all_nlp());
            } else {
                out.push(item.parse()?);
            }
        }
        if out.is_empty() {
            return Err(Error::Domain("empty method list".into()));
        }
        Ok(out)
    }

    pub fn apply(&self, signal: &[f64], filter: &WaveletFilter, fit: &FitOptions) -> Result<Vec<f64>> {
        match self {
            Estimator::Nlp(method) => {
                let opts = DenoiseOptions {
                    fit: *fit,
                    ..Default::default()
                };
                Ok(denoise(signal, *method, filter, &opts)?.estimate)
            }
            Estimator::HardUniversal => hard_threshold_universal(signal, filter),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Nlp(m) => m.fmt(f),
            Estimator::HardUniversal => f.write_str(Estimator::HARD_NAME),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == Estimator::HARD_NAME {
            Ok(Estimator::HardUniversal)
        } else {
            s.parse().map(Estimator::Nlp)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub functions: Vec<TestFunction>,
    pub ns: Vec<usize>,
    pub snrs: Vec<f64>,
    pub reps: usize,
    pub methods: Vec<Estimator>,
    pub seed: u64,
    pub wavelet: Wavelet,
    /// Optimizer settings; the per-replication seed overrides `fit.seed`.
    pub fit: FitOptions,
    /// Record wall-clock seconds per replication. Off keeps output byte-reproducible.
    pub timing: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            functions: TestFunction::ALL.to_vec(),
            ns: vec![512, 1024, 2048, 4096],
            snrs: vec![3.0, 5.0, 7.0],
            reps: 100,
            methods: Estimator::all_nlp(),
            seed: 0,
            wavelet: Wavelet::Sym6,
            fit: FitOptions::default(),
            timing: false,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.functions.is_empty() || self.ns.is_empty() || self.snrs.is_empty() || self.methods.is_empty() {
            return Err(Error::Domain(
                "plan needs at least one function, n, SNR and method".into(),
            ));
        }
        if let Some(n) = self.ns.iter().find(|n| **n == 0 || !n.is_power_of_two()) {
            return Err(Error::Sizing(format!("sample size {n} is not a power of two")));
        }
        if let Some(s) = self.snrs.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Domain(format!("SNR must be positive, got {s}")));
        }
        if self.reps == 0 {
            return Err(Error::Domain("need at least one replication".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer; decorrelates seeds derived from small integers.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one (function, n, SNR, replication, stream) tuple, independent of
/// the order cells are visited in.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// Mean and sample standard deviation of one (function, n, SNR, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub function: TestFunction,
    pub n: usize,
    pub snr: f64,
    pub method: Estimator,
    pub mean_mse: f64,
    pub sd_mse: f64,
    /// Mean seconds per replication, when timing was requested.
    pub seconds: Option<f64>,
    pub failures: usize,
    pub reps: usize,
}

impl CellResult {
    /// Cells with more than 10% failed replications are excluded from comparisons.
    pub fn is_valid(&self) -> bool {
        self.failures * 10 <= self.reps && self.mean_mse.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub rows: Vec<CellResult>,
}

pub const CSV_HEADER: &str = "function,n,snr,method,mean_mse,sd_mse,seconds,failures,reps";

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        "NA".to_string()
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Runs every cell of the plan. Each replication draws its noise from a seed
/// derived from (function, n, SNR, replication), so every method sees the same data.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    run_experiment_with(plan, |_| {})
}

/// [`run_experiment`] with a callback after each finished cell.
pub fn run_experiment_with(plan: &ExperimentPlan, mut progress: impl FnMut(&CellResult)) -> Result<ExperimentResult> {
    plan.validate()?;
    let filter = plan.wavelet.filter();
    let mut rows = Vec::new();
    for (fi, &function) in plan.functions.iter().enumerate() {
        for &n in &plan.ns {
            let truth = sample_function(function, n)?;
            for (si, &snr) in plan.snrs.iter().enumerate() {
                let noisy: Vec<(Vec<f64>, u64)> = (0..plan.reps)
                    .map(|rep| {
                        let parts = [fi as u64, n as u64, si as u64, rep as u64];
                        let (y, _) = add_noise(&truth, snr, derive_seed(plan.seed, &[&parts[..], &[0]].concat()))?;
                        Ok((y, derive_seed(plan.seed, &[&parts[..], &[1]].concat())))
                    })
                    .collect::<Result<_>>()?;
                for &method in &plan.methods {
                    let mut errors = Vec::with_capacity(plan.reps);
                    let mut failures = 0;
                    let started = Instant::now();
                    for (y, fit_seed) in &noisy {
                        let fit = FitOptions {
                            seed: *fit_seed,
                            ..plan.fit
                        };
                        match method.apply(y, &filter, &fit).and_then(|est| mse(&est, &truth)) {
                            Ok(e) => errors.push(e),
                            Err(_) => failures += 1,
                        }
                    }
                    let elapsed = started.elapsed().as_secs_f64() / plan.reps as f64;
                    let (mean_mse, sd_mse) = mean_sd(&errors);
                    let row = CellResult {
                        function,
                        n,
                        snr,
                        method,
                        mean_mse,
                        sd_mse,
                        seconds: plan.timing.then_some(elapsed),
                        failures,
                        reps: plan.reps,
                    };
                    progress(&row);
                    rows.push(row);
                }
            }
        }
    }
    Ok(ExperimentResult { rows })
}

impl ExperimentResult {
    /// Long-format CSV; `seconds` is `NA` unless timing was recorded.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.function,
                r.n,
                fmt_num(r.snr),
                r.method,
                fmt_num(r.mean_mse),
                fmt_num(r.sd_mse),
                r.seconds.map_or("NA".to_string(), fmt_num),
                r.failures,
                r.reps
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty results file".into(),
        })?;
        let columns: Vec<&str> = header.1.split(',').map(str::trim).collect();
        let need = ["function", "n", "snr", "method", "mean_mse"];
        let position = |name: &str| columns.iter().position(|c| *c == name);
        let mut idx = Vec::new();
        for name in need {
            idx.push(position(name).ok_or_else(|| Error::Parse {
                line: header.0 + 1,
                message: format!("missing column `{name}`"),
            })?);
        }
        let sd_idx = position("sd_mse");
        let sec_idx = position("seconds");
        let fail_idx = position("failures");
        let reps_idx = position("reps");
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            let get = |k: usize| {
                fields
                    .get(k)
                    .copied()
                    .ok_or_else(|| parse_err(format!("expected at least {} fields", k + 1)))
            };
            let num = |s: &str| -> Result<f64> {
                if s == "NA" {
                    Ok(f64::NAN)
                } else {
                    s.parse::<f64>().map_err(|e| parse_err(format!("`{s}`: {e}")))
                }
            };
            let count = |k: Option<usize>, default: usize| -> Result<usize> {
                match k {
                    Some(k) => get(k)?.parse().map_err(|e| parse_err(format!("{e}"))),
                    None => Ok(default),
                }
            };
            let function = get(idx[0])?.parse().map_err(|e: Error| parse_err(e.to_string()))?;
            let n = get(idx[1])?.parse().map_err(|e| parse_err(format!("n: {e}")))?;
            let snr = num(get(idx[2])?)?;
            let method = get(idx[3])?.parse().map_err(|e: Error| parse_err(e.to_string()))?;
            let mean_mse = num(get(idx[4])?)?;
            let sd_mse = match sd_idx {
                Some(k) => num(get(k)?)?,
                None => f64::NAN,
            };
            let seconds = match sec_idx {
                Some(k) => Some(num(get(k)?)?).filter(|v| !v.is_nan()),
                None => None,
            };
            let reps = count(reps_idx, 1)?;
            rows.push(CellResult {
                function,
                n,
                snr,
                method,
                mean_mse,
                sd_mse,
                seconds,
                failures: count(fail_idx, 0)?,
                reps,
            });
        }
        Ok(ExperimentResult { rows })
    }

    /// Per function and method, the number of (n, SNR) cells where the method
    /// has the lowest mean MSE. Ties go to the method listed first.
    pub fn win_counts(&self) -> CountMatrix {
        let mut functions: Vec<TestFunction> = Vec::new();
        let mut methods: Vec<Estimator> = Vec::new();
        for r in &self.rows {
            if !functions.contains(&r.function) {
                functions.push(r.function);
            }
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        let mut counts = vec![vec![0usize; functions.len()]; methods.len()];
        let mut cells: Vec<(TestFunction, usize, u64)> = Vec::new();
        for r in &self.rows {
            let key = (r.function, r.n, r.snr.to_bits());
            if !cells.contains(&key) {
                cells.push(key);
            }
        }
        for (function, n, snr_bits) in cells {
            let winner = methods
                .iter()
                .enumerate()
                .filter_map(|(mi, m)| {
                    self.rows
                        .iter()
                        .find(|r| r.function == function && r.n == n && r.snr.to_bits() == snr_bits && r.method == *m)
                        .filter(|r| r.is_valid())
                        .map(|r| (mi, r.mean_mse))
                })
                .fold(None, |best: Option<(usize, f64)>, (mi, v)| match best {
                    Some((_, bv)) if bv <= v => best,
                    _ => Some((mi, v)),
                });
            if let Some((mi, _)) = winner {
                let fi = functions.iter().position(|f| *f == function).unwrap_or(0);
                counts[mi][fi] += 1;
            }
        }
        CountMatrix {
            functions,
            methods,
            counts,
        }
    }
}

/// Win counts, methods by functions.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    pub functions: Vec<TestFunction>,
    pub methods: Vec<Estimator>,
    /// `counts[method][function]`.
    pub counts: Vec<Vec<usize>>,
}

impl CountMatrix {
    pub fn get(&self, method: Estimator, function: TestFunction) -> Option<usize> {
        let mi = self.methods.iter().position(|m| *m == method)?;
        let fi = self.functions.iter().position(|f| *f == function)?;
        Some(self.counts[mi][fi])
    }

    pub fn render(&self) -> String {
        let width = self
            .methods
            .iter()
            .map(|m| m.to_string().len())
            .max()
            .unwrap_or(6)
            .max("Method".len());
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "Method");
        for f in &self.functions {
            let _ = write!(out, " {:>8}", f.name());
        }
        let _ = writeln!(out, " {:>8}", "Total");
        let rule = width + 9 * (self.functions.len() + 1);
        let _ = writeln!(out, "{}", "-".repeat(rule));
        let mut column_totals = vec![0usize; self.functions.len()];
        for (m, row) in self.methods.iter().zip(&self.counts) {
            let _ = write!(out, "{:<width$}", m.to_string());
            for (c, v) in row.iter().enumerate() {
                column_totals[c] += v;
                let _ = write!(out, " {v:>8}");
            }
            let _ = writeln!(out, " {:>8}", row.iter().sum::<usize>());
        }
        let _ = writeln!(out, "{}", "-".repeat(rule));
        let _ = write!(out, "{:<width$}", "Total");
        for v in &column_totals {
            let _ = write!(out, " {v:>8}");
        }
        let _ = writeln!(out, " {:>8}", column_totals.iter().sum::<usize>());
        let _ = writeln!(
            out,
            "\nEach entry counts the (n, SNR) cells where the method had the lowest mean MSE.\nTies go to the method listed first; cells with more than 10% failed replications are skipped."
        );
        out
    }
}
