//! Monte Carlo harness for spanning events and spanned-subtorus counts.
//!
//! Each trial draws an i.i.d. Bernoulli(`p`) seed set sparsely (a Binomial
//! count, then that many distinct uniform vertices) from its own
//! counter-based random stream, so results do not depend on how trials are
//! scheduled across workers.

mod verify;

pub use verify::{
    verify_oracle, verify_perfect, verify_properties, Mismatch, OracleReport, OracleSuite,
    PerfectCase, PerfectReport, PropertyCheck, PropertyReport,
};

use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use num_traits::ToPrimitive;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ca::{self, Threshold, DEFAULT_VISIT_BUDGET};
use crate::error::{Error, Result};
use crate::span::{self, CountMode, SeedSet, DEFAULT_FAMILY_CAP};
use crate::theory::{self, CriticalScaling};
use crate::torus::{Dimensions, Subtorus, Vertex};

/// Poisson seed counts are only used when `N p^2` (a bound on the total
/// variation error of the approximation) is below this.
pub const POISSON_APPROX_MAX_ERROR: f64 = 1e-3;

/// Density parameter of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intensity {
    /// `p = a * n^-(d/(j+1) + j)`.
    Amplitude(f64),
    /// Explicit per-vertex probability.
    P(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dims: Dimensions,
    pub j: usize,
    pub intensity: Intensity,
    #[serde(default = "default_theta")]
    pub theta: u32,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub mode: CountMode,
    #[serde(default)]
    pub conditional_open: Option<Subtorus>,
    /// Dimensions whose `I_i` / `C_i` events are recorded, in addition to `2j` and `d`.
    #[serde(default)]
    pub record_dims: Vec<usize>,
}

fn default_theta() -> u32 {
    2
}

impl ExperimentConfig {
    pub fn new(
        dims: Dimensions,
        j: usize,
        intensity: Intensity,
        trials: u64,
        master_seed: u64,
    ) -> Self {
        ExperimentConfig {
            dims,
            j,
            intensity,
            theta: 2,
            trials,
            master_seed,
            mode: CountMode::Exact,
            conditional_open: None,
            record_dims: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims.d();
        if self.j < 1 || 2 * self.j > d {
            return Err(Error::Config(format!(
                "need 1 <= j and 2j <= d, got j={}, d={d}",
                self.j
            )));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if let Some(&bad) = self.record_dims.iter().find(|&&i| i > d) {
            return Err(Error::Config(format!(
                "record dimension {bad} exceeds d={d}"
            )));
        }
        if let Some(u) = &self.conditional_open {
            self.dims.check_same(&u.dims())?;
        }
        Threshold::new(self.theta)?;
        self.p()?;
        if self.theta != 2 {
            let size = self.dims.pow_checked(d).unwrap_or(u128::MAX);
            if size > DEFAULT_VISIT_BUDGET as u128 {
                return Err(Error::Config(format!(
                    "threshold {} has no fast path; n^d = {} exceeds the dense budget {}",
                    self.theta,
                    self.dims.vertex_count(),
                    DEFAULT_VISIT_BUDGET
                )));
            }
        }
        Ok(())
    }

    pub fn threshold(&self) -> Result<Threshold> {
        Threshold::new(self.theta)
    }

    pub fn p(&self) -> Result<f64> {
        match self.intensity {
            Intensity::Amplitude(a) => CriticalScaling::new(self.j, self.dims.d(), a)
                .and_then(|s| s.p(self.dims.n()))
                .map_err(|e| Error::Config(e.to_string())),
            Intensity::P(p) if (0.0..=1.0).contains(&p) => Ok(p),
            Intensity::P(p) => Err(Error::Config(format!("p = {p} outside [0, 1]"))),
        }
    }

    /// Poisson mean of the spanned `2j`-subtorus count, when defined.
    pub fn lambda(&self) -> Option<f64> {
        match self.intensity {
            Intensity::Amplitude(a) if self.theta == 2 => {
                theory::lambda(self.j, self.dims.d(), a).ok()
            }
            _ => None,
        }
    }

    /// Sorted dimensions whose events are recorded: `record_dims`, `2j`, and `d`.
    pub fn observed_dims(&self) -> Vec<usize> {
        let mut all: BTreeSet<usize> = self.record_dims.iter().copied().collect();
        all.insert(2 * self.j);
        all.insert(self.dims.d());
        all.into_iter().collect()
    }

    /// Even dimensions `>= 2` among the observed ones; these get `Y` counts.
    pub fn y_dims(&self) -> Vec<usize> {
        self.observed_dims()
            .into_iter()
            .filter(|&i| i >= 2 && i % 2 == 0)
            .collect()
    }
}

/// How seed counts are drawn for a given configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerInfo {
    pub method: SamplerMethod,
    /// `n^d` in decimal.
    pub vertex_count: String,
    /// `N p^2`, reported when the Poisson approximation is in use.
    pub poisson_tv_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    Binomial,
    Poisson,
}

enum CountSampler {
    Fixed(u64),
    Binomial(Binomial),
    Poisson(Poisson<f64>),
}

fn count_sampler(
    vertex_count: &num_bigint::BigUint,
    p: f64,
) -> Result<(CountSampler, SamplerInfo)> {
    let info = |method, bound| SamplerInfo {
        method,
        vertex_count: vertex_count.to_string(),
        poisson_tv_bound: bound,
    };
    if let Some(n) = vertex_count.to_u64() {
        let sampler = if p <= 0.0 {
            CountSampler::Fixed(0)
        } else if p >= 1.0 {
            CountSampler::Fixed(n)
        } else {
            CountSampler::Binomial(
                Binomial::new(n, p)
                    .map_err(|e| Error::Config(format!("binomial({n}, {p}): {e}")))?,
            )
        };
        return Ok((sampler, info(SamplerMethod::Binomial, None)));
    }
    let nf = vertex_count.to_f64().unwrap_or(f64::INFINITY);
    let bound = nf * p * p;
    if bound.is_nan() || bound >= POISSON_APPROX_MAX_ERROR {
        return Err(Error::Config(format!(
            "n^d = {vertex_count} exceeds 64 bits and N p^2 = {bound:.3e} is too large for the Poisson approximation"
        )));
    }
    let sampler = if p <= 0.0 {
        CountSampler::Fixed(0)
    } else {
        CountSampler::Poisson(
            Poisson::new(nf * p).map_err(|e| Error::Config(format!("poisson({}): {e}", nf * p)))?,
        )
    };
    Ok((sampler, info(SamplerMethod::Poisson, Some(bound))))
}

impl CountSampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            CountSampler::Fixed(m) => *m,
            CountSampler::Binomial(b) => b.sample(rng),
            CountSampler::Poisson(p) => p.sample(rng) as u64,
        }
    }
}

pub fn sampler_info(cfg: &ExperimentConfig) -> Result<SamplerInfo> {
    Ok(count_sampler(&cfg.dims.vertex_count(), cfg.p()?)?.1)
}

/// Random stream for one trial: stream `trial_index` of a generator keyed by `master_seed`.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// `m` distinct uniform vertices of the subtorus fixing the first `d - dim`
/// coordinates to 0 (the whole torus when `dim == d`).
fn distinct_vertices(dims: Dimensions, dim: usize, m: u64, rng: &mut ChaCha8Rng) -> Vec<Vertex> {
    let d = dims.d();
    let n = dims.n();
    let offset = d - dim;
    let size = dims.pow_checked(dim);
    let build = |free: Vec<u32>| {
        let mut coords = vec![0u32; offset];
        coords.extend(free);
        Vertex::from_coords_unchecked(coords)
    };
    if let Some(size) = size.filter(|&s| s <= usize::MAX as u128 && (m as u128) * 2 > s) {
        // dense regime: choose ranks directly
        let ranks = index::sample(rng, size as usize, m as usize);
        return ranks
            .into_iter()
            .map(|r| {
                let mut free = vec![0u32; dim];
                let mut rest = r;
                for slot in free.iter_mut().rev() {
                    *slot = (rest % n as usize) as u32;
                    rest /= n as usize;
                }
                build(free)
            })
            .collect();
    }
    let mut seen: HashSet<Vec<u32>> = HashSet::with_capacity(m as usize);
    let mut out = Vec::with_capacity(m as usize);
    while (out.len() as u64) < m {
        let free: Vec<u32> = (0..dim).map(|_| rng.random_range(0..n)).collect();
        if seen.insert(free.clone()) {
            out.push(build(free));
        }
    }
    out
}

/// I.i.d. Bernoulli(`p`) seeds for one trial; deterministic in `(master_seed, trial_index)`.
pub fn sample_seeds(cfg: &ExperimentConfig, trial_index: u64) -> Result<SeedSet> {
    let (sampler, _) = count_sampler(&cfg.dims.vertex_count(), cfg.p()?)?;
    let mut rng = trial_rng(cfg.master_seed, trial_index);
    let m = sampler.draw(&mut rng);
    let points = distinct_vertices(cfg.dims, cfg.dims.d(), m, &mut rng);
    SeedSet::new(cfg.dims, points)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YCount {
    pub dim: usize,
    /// Internally spanned subtori of this dimension; `None` in maximal mode.
    pub exact: Option<u64>,
    /// Maximal subtori of the closure with this dimension.
    pub maximal: u64,
}

impl YCount {
    /// The best available count: exact when present.
    pub fn value(&self) -> u64 {
        self.exact.unwrap_or(self.maximal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFlags {
    pub dim: usize,
    /// Some `dim`-subtorus is internally spanned.
    pub spanned: bool,
    /// Some `dim`-subtorus ends fully open.
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: u64,
    pub seed_count: u64,
    pub y: Vec<YCount>,
    pub events: Vec<EventFlags>,
    pub max_open_dim: Option<usize>,
    /// Exact counting hit the family cap; counts fell back to lower bounds.
    pub truncated: bool,
    /// Wall time in milliseconds, only when timings were requested.
    pub wall_ms: Option<f64>,
}

impl TrialResult {
    pub fn event(&self, dim: usize) -> Option<EventFlags> {
        self.events.iter().copied().find(|e| e.dim == dim)
    }

    pub fn y_at(&self, dim: usize) -> Option<&YCount> {
        self.y.iter().find(|y| y.dim == dim)
    }
}

/// Runs one trial on its sampled seeds.
pub fn run_trial(cfg: &ExperimentConfig, trial_index: u64) -> Result<TrialResult> {
    let seeds = sample_seeds(cfg, trial_index)?;
    run_trial_with_seeds(cfg, trial_index, seeds)
}

/// Runs one trial on caller-supplied seeds. `conditional_open` from the config
/// is added as a pre-open subtorus.
pub fn run_trial_with_seeds(
    cfg: &ExperimentConfig,
    trial_index: u64,
    seeds: SeedSet,
) -> Result<TrialResult> {
    cfg.dims.check_same(&seeds.dims())?;
    let seed_count = seeds.points().len() as u64;
    let seeds = match &cfg.conditional_open {
        Some(u) => seeds.with_pre_open([u.clone()])?,
        None => seeds,
    };
    if cfg.theta == 2 {
        fast_observables(cfg, trial_index, seed_count, &seeds)
    } else {
        dense_observables(cfg, trial_index, seed_count, &seeds)
    }
}

fn fast_observables(
    cfg: &ExperimentConfig,
    trial_index: u64,
    seed_count: u64,
    seeds: &SeedSet,
) -> Result<TrialResult> {
    let decomposition = span::closure(seeds)?;
    let maximal = span::spanned_profile(seeds, &decomposition, CountMode::Maximal, 0);
    let exact = match cfg.mode {
        CountMode::Exact => Some(span::spanned_profile(
            seeds,
            &decomposition,
            CountMode::Exact,
            DEFAULT_FAMILY_CAP,
        )),
        CountMode::Maximal => None,
    };
    let truncated = exact.as_ref().is_some_and(|e| e.truncated);
    let exact = exact.filter(|e| !e.truncated);
    let max_open_dim = decomposition.max_dim();

    let y = cfg
        .y_dims()
        .into_iter()
        .map(|dim| YCount {
            dim,
            exact: exact.as_ref().map(|e| e.count(dim)),
            maximal: maximal.count(dim),
        })
        .collect();
    let events = cfg
        .observed_dims()
        .into_iter()
        .map(|dim| EventFlags {
            dim,
            spanned: exact.as_ref().unwrap_or(&maximal).count(dim) > 0,
            open: max_open_dim.is_some_and(|m| m >= dim),
        })
        .collect();
    Ok(TrialResult {
        trial_index,
        seed_count,
        y,
        events,
        max_open_dim,
        truncated,
        wall_ms: None,
    })
}

/// Brute-force observables on the dense grid, for thresholds other than 2.
fn dense_observables(
    cfg: &ExperimentConfig,
    trial_index: u64,
    seed_count: u64,
    seeds: &SeedSet,
) -> Result<TrialResult> {
    let theta = cfg.threshold()?;
    let dims = cfg.dims;
    let budget = DEFAULT_VISIT_BUDGET;
    let mut start = ca::Configuration::from_vertices(dims, seeds.points(), budget)?;
    for u in seeds.pre_open() {
        for v in u.vertices(budget as u128)? {
            start.insert(&v)?;
        }
    }
    let (fin, _) = ca::evolve_incremental(&start, theta, budget)?;

    let d = dims.d();
    let mut open_by_dim: Vec<Vec<Subtorus>> = Vec::with_capacity(d + 1);
    for dim in 0..=d {
        let mut open = Vec::new();
        for v in dims.subtori_of_dim(dim, budget as u128)? {
            if fin.fully_open(&v)? {
                open.push(v);
            }
        }
        open_by_dim.push(open);
    }
    let max_open_dim = (0..=d).rev().find(|&i| !open_by_dim[i].is_empty());
    let maximal_count = |dim: usize| -> u64 {
        open_by_dim[dim]
            .iter()
            .filter(|v| {
                open_by_dim
                    .get(dim + 1)
                    .is_none_or(|bigger| !bigger.iter().any(|w| w.contains_unchecked(v)))
            })
            .count() as u64
    };
    let spanned_count = |dim: usize| -> Result<u64> {
        let mut count = 0;
        for v in &open_by_dim[dim] {
            if dense_internally_spanned(v, seeds, theta, budget)? {
                count += 1;
            }
        }
        Ok(count)
    };

    let mut y = Vec::new();
    for dim in cfg.y_dims() {
        y.push(YCount {
            dim,
            exact: Some(spanned_count(dim)?),
            maximal: maximal_count(dim),
        });
    }
    let mut events = Vec::new();
    for dim in cfg.observed_dims() {
        events.push(EventFlags {
            dim,
            spanned: spanned_count(dim)? > 0,
            open: !open_by_dim[dim].is_empty(),
        });
    }
    Ok(TrialResult {
        trial_index,
        seed_count,
        y,
        events,
        max_open_dim,
        truncated: false,
        wall_ms: None,
    })
}

fn dense_internally_spanned(
    v: &Subtorus,
    seeds: &SeedSet,
    theta: Threshold,
    budget: u64,
) -> Result<bool> {
    let dims = v.dims();
    let mut start = ca::Configuration::empty(dims, budget)?;
    let mut any = false;
    for p in seeds
        .points()
        .iter()
        .filter(|p| v.point_distance_unchecked(p) == 0)
    {
        start.insert(p)?;
        any = true;
    }
    for u in seeds.pre_open().iter().filter(|u| v.contains_unchecked(u)) {
        for w in u.vertices(budget as u128)? {
            start.insert(&w)?;
        }
        any = true;
    }
    if !any {
        return Ok(false);
    }
    let (fin, _) = ca::evolve_incremental(&start, theta, budget)?;
    fin.equals_subtorus(v)
}

/// Proportion estimate with a Wilson 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEstimate {
    pub name: String,
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

const Z95: f64 = 1.959963984540054;

impl EventEstimate {
    pub fn new(name: impl Into<String>, successes: u64, trials: u64) -> EventEstimate {
        let n = trials as f64;
        let x = successes as f64;
        let phat = if trials == 0 { 0.0 } else { x / n };
        let std_error = if trials == 0 {
            0.0
        } else {
            (phat * (1.0 - phat) / n).sqrt()
        };
        let (ci_low, ci_high) = wilson_interval(successes, trials, Z95);
        EventEstimate {
            name: name.into(),
            successes,
            trials,
            estimate: phat,
            std_error,
            ci_low,
            ci_high,
        }
    }
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let x = successes as f64;
    let z2 = z * z;
    let center = (x + z2 / 2.0) / (n + z2);
    let half = z / (n + z2) * (x * (n - x) / n + z2 / 4.0).sqrt();
    let phat = x / n;
    // clamp so the interval always contains the point estimate despite rounding
    (
        (center - half).max(0.0).min(phat),
        (center + half).min(1.0).max(phat),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub d: usize,
    pub n: u32,
    pub j: usize,
    pub p: f64,
    pub theta: u32,
    pub mode: CountMode,
    pub trials: u64,
    pub master_seed: u64,
    pub sampler: SamplerInfo,
    pub mean_seed_count: f64,
    pub events: Vec<EventEstimate>,
    /// Dimension `2j` whose spanned-subtorus count `Y` is summarized below.
    pub y_dim: usize,
    /// `y_histogram[k]` = number of trials with `Y = k`.
    pub y_histogram: Vec<u64>,
    pub lambda_hat: f64,
    pub lambda_hat_se: f64,
    pub lambda: Option<f64>,
    pub predicted_limit: Option<f64>,
    pub tv_y_vs_poisson: Option<f64>,
    pub tv_y_vs_poisson_se: Option<f64>,
    /// Trials where the exact and maximal counts of `Y` differ.
    pub exact_maximal_discrepancy: Option<EventEstimate>,
    pub truncated_trials: u64,
}

impl Summary {
    pub fn event(&self, name: &str) -> Option<&EventEstimate> {
        self.events.iter().find(|e| e.name == name)
    }
}

/// Name of the event "some `i`-subtorus is internally spanned".
pub fn i_name(i: usize) -> String {
    format!("I_{i}")
}

/// Name of the event "some `i`-subtorus ends fully open".
pub fn c_name(i: usize) -> String {
    format!("C_{i}")
}

/// Name of a set difference of two events.
pub fn diff_name(a: &str, b: &str) -> String {
    format!("{a}\\{b}")
}

/// Aggregates trial results. The outcome does not depend on their order.
pub fn summarize(cfg: &ExperimentConfig, results: &[TrialResult]) -> Result<Summary> {
    let trials = results.len() as u64;
    let dims = cfg.observed_dims();
    let count =
        |pred: &dyn Fn(&TrialResult) -> bool| results.iter().filter(|r| pred(r)).count() as u64;
    let flag = |r: &TrialResult, dim: usize, spanned: bool| {
        r.event(dim)
            .map(|e| if spanned { e.spanned } else { e.open })
            .unwrap_or(false)
    };

    let mut events = Vec::new();
    for &i in &dims {
        events.push(EventEstimate::new(
            i_name(i),
            count(&|r| flag(r, i, true)),
            trials,
        ));
        events.push(EventEstimate::new(
            c_name(i),
            count(&|r| flag(r, i, false)),
            trials,
        ));
    }
    let two_j = 2 * cfg.j;
    events.push(EventEstimate::new(
        diff_name(&c_name(two_j), &i_name(two_j)),
        count(&|r| flag(r, two_j, false) && !flag(r, two_j, true)),
        trials,
    ));
    for &a in &dims {
        for &b in &dims {
            if a != b {
                events.push(EventEstimate::new(
                    diff_name(&i_name(a), &i_name(b)),
                    count(&|r| flag(r, a, true) && !flag(r, b, true)),
                    trials,
                ));
            }
        }
    }

    let ys: Vec<u64> = results
        .iter()
        .map(|r| r.y_at(two_j).map(YCount::value).unwrap_or(0))
        .collect();
    let max_y = ys.iter().copied().max().unwrap_or(0) as usize;
    let mut y_histogram = vec![0u64; max_y + 1];
    for &y in &ys {
        y_histogram[y as usize] += 1;
    }
    let nf = trials.max(1) as f64;
    let lambda_hat = ys.iter().sum::<u64>() as f64 / nf;
    let var = ys
        .iter()
        .map(|&y| (y as f64 - lambda_hat).powi(2))
        .sum::<f64>()
        / (nf - 1.0).max(1.0);
    let lambda_hat_se = (var / nf).sqrt();

    let lambda = cfg.lambda();
    let tv_y_vs_poisson = match lambda {
        Some(l) if !ys.is_empty() => Some(theory::tv_empirical_vs_poisson(&ys, l)?),
        _ => None,
    };
    let tv_y_vs_poisson_se = match lambda {
        Some(l) if !ys.is_empty() => Some(theory::tv_empirical_se(&ys, l)?),
        _ => None,
    };
    let exact_maximal_discrepancy = match cfg.mode {
        CountMode::Exact => Some(EventEstimate::new(
            "Y_exact!=Y_maximal",
            count(&|r| {
                r.y_at(two_j)
                    .is_some_and(|y| y.exact.is_some_and(|e| e != y.maximal))
            }),
            trials,
        )),
        CountMode::Maximal => None,
    };

    Ok(Summary {
        d: cfg.dims.d(),
        n: cfg.dims.n(),
        j: cfg.j,
        p: cfg.p()?,
        theta: cfg.theta,
        mode: cfg.mode,
        trials,
        master_seed: cfg.master_seed,
        sampler: sampler_info(cfg)?,
        mean_seed_count: results.iter().map(|r| r.seed_count as f64).sum::<f64>() / nf,
        events,
        y_dim: two_j,
        y_histogram,
        lambda_hat,
        lambda_hat_se,
        lambda,
        predicted_limit: lambda.map(|l| -(-l).exp_m1()),
        tv_y_vs_poisson,
        tv_y_vs_poisson_se,
        exact_maximal_discrepancy,
        truncated_trials: count(&|r| r.truncated),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 means rayon's default.
    pub workers: usize,
    pub record_timings: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub summary: Summary,
    /// Per-trial results in trial-index order.
    pub trials: Vec<TrialResult>,
}

/// Runs every trial of `cfg` and summarizes them.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let trials: Vec<TrialResult> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let start = opts.record_timings.then(Instant::now);
                let mut r = run_trial(cfg, t)?;
                r.wall_ms = start.map(|s| s.elapsed().as_secs_f64() * 1e3);
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = summarize(cfg, &trials)?;
    Ok(ExperimentOutput { summary, trials })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    N,
    A,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    pub outcome: std::result::Result<Summary, String>,
}

/// One independent experiment per value of `param`, all under the same master seed.
pub fn sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    opts: RunOptions,
) -> Result<Vec<SweepCell>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let cells = values
        .iter()
        .map(|&value| {
            let outcome = sweep_config(cfg, param, value)
                .and_then(|c| run_experiment(&c, opts))
                .map(|out| out.summary)
                .map_err(|e| e.to_string());
            SweepCell { value, outcome }
        })
        .collect();
    Ok(cells)
}

fn sweep_config(cfg: &ExperimentConfig, param: SweepParam, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match param {
        SweepParam::N => {
            if value.fract() != 0.0 || value < 2.0 || value > u32::MAX as f64 {
                return Err(Error::Config(format!("n = {value} is not an integer >= 2")));
            }
            c.dims = Dimensions::new(cfg.dims.d(), value as u32)?;
            if let Some(u) = &cfg.conditional_open {
                let fixed: Vec<(usize, u32)> = u.fixed().collect();
                c.conditional_open = Some(c.dims.subtorus(&fixed)?);
            }
        }
        SweepParam::A => match cfg.intensity {
            Intensity::Amplitude(_) => c.intensity = Intensity::Amplitude(value),
            Intensity::P(_) => {
                return Err(Error::Config(
                    "amplitude sweep needs an amplitude-based config".into(),
                ))
            }
        },
    }
    c.validate()?;
    Ok(c)
}

/// Monte Carlo estimate of the probability that the fixed `dim`-subtorus
/// `{x : x_0 = ... = x_(d-dim-1) = 0}` is internally spanned at density `p`.
///
/// Only the seeds inside that subtorus are sampled.
pub fn estimate_internal_spanning(
    dims: Dimensions,
    dim: usize,
    p: f64,
    trials: u64,
    master_seed: u64,
    opts: RunOptions,
) -> Result<EventEstimate> {
    if dim > dims.d() {
        return Err(Error::Config(format!(
            "dimension {dim} exceeds d={}",
            dims.d()
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("p = {p} outside [0, 1]")));
    }
    let fixed: Vec<(usize, u32)> = (0..dims.d() - dim).map(|i| (i, 0)).collect();
    let target = dims.subtorus(&fixed)?;
    let size = num_bigint::BigUint::from(dims.n()).pow(dim as u32);
    let (sampler, _) = count_sampler(&size, p)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let hits: u64 = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(master_seed, t);
                let m = sampler.draw(&mut rng);
                if m == 0 {
                    return Ok(0);
                }
                let pts = distinct_vertices(dims, dim, m, &mut rng);
                let seeds = SeedSet::new(dims, pts)?;
                Ok(span::is_internally_spanned(&target, &seeds) as u64)
            })
            .sum::<Result<u64>>()
    })?;
    Ok(EventEstimate::new(format!("I_V(dim={dim})"), hits, trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: usize, n: u32, p: f64, trials: u64) -> ExperimentConfig {
        ExperimentConfig::new(
            Dimensions::new(d, n).unwrap(),
            1,
            Intensity::P(p),
            trials,
            7,
        )
    }

    #[test]
    fn sample_seeds_extremes() {
        let c = cfg(3, 3, 0.0, 1);
        assert!(sample_seeds(&c, 0).unwrap().is_empty());
        let c = cfg(3, 3, 1.0, 1);
        assert_eq!(sample_seeds(&c, 0).unwrap().points().len(), 27);
    }

    #[test]
    fn sample_seeds_is_deterministic() {
        let c = cfg(3, 50, 0.01, 1);
        let a = sample_seeds(&c, 12).unwrap();
        let b = sample_seeds(&c, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_seeds(&c, 13).unwrap());
    }

    #[test]
    fn huge_tori_use_poisson_counts() {
        let c = ExperimentConfig::new(
            Dimensions::new(6, 2_000).unwrap(),
            1,
            Intensity::P(1e-18),
            1,
            1,
        );
        let info = sampler_info(&c).unwrap();
        assert_eq!(info.method, SamplerMethod::Poisson);
        assert!(info.poisson_tv_bound.unwrap() < POISSON_APPROX_MAX_ERROR);
        assert_eq!(info.vertex_count, "64000000000000000000");
        let s = sample_seeds(&c, 0).unwrap();
        // mean N p = 64
        assert!(s.points().len() > 5 && s.points().len() < 120);

        let too_dense = ExperimentConfig::new(
            Dimensions::new(6, 2_000).unwrap(),
            1,
            Intensity::P(1e-9),
            1,
            1,
        );
        assert!(sample_seeds(&too_dense, 0).is_err());
    }

    #[test]
    fn zero_density_trial() {
        let r = run_trial(&cfg(3, 3, 0.0, 1), 0).unwrap();
        assert_eq!(r.seed_count, 0);
        assert!(r.events.iter().all(|e| !e.spanned && !e.open));
        assert_eq!(r.max_open_dim, None);
    }

    #[test]
    fn forced_seed_trial() {
        let c = cfg(3, 3, 0.1, 1);
        let dims = c.dims;
        let seeds = SeedSet::new(
            dims,
            [
                dims.vertex(vec![0, 0, 0]).unwrap(),
                dims.vertex(vec![1, 1, 0]).unwrap(),
            ],
        )
        .unwrap();
        let r = run_trial_with_seeds(&c, 0, seeds).unwrap();
        assert!(r.event(2).unwrap().spanned);
        assert!(!r.event(3).unwrap().open);
        assert_eq!(r.y_at(2).unwrap().exact, Some(1));
    }

    #[test]
    fn dense_path_matches_fast_path_at_theta_two() {
        let base = cfg(3, 4, 0.08, 1);
        let mut dense = base.clone();
        dense.record_dims = vec![0, 1, 2, 3];
        let mut fast = dense.clone();
        fast.theta = 2;
        for t in 0..200 {
            let seeds = sample_seeds(&dense, t).unwrap();
            let f = run_trial_with_seeds(&fast, t, seeds.clone()).unwrap();
            let slow = dense_observables(&dense, t, seeds.points().len() as u64, &seeds).unwrap();
            assert_eq!(f.events, slow.events, "trial {t}");
            assert_eq!(f.y, slow.y, "trial {t}");
            assert_eq!(f.max_open_dim, slow.max_open_dim);
        }
    }

    #[test]
    fn theta_three_needs_small_torus() {
        let mut c = ExperimentConfig::new(
            Dimensions::new(3, 1000).unwrap(),
            1,
            Intensity::Amplitude(1.0),
            10,
            1,
        );
        c.theta = 3;
        assert!(c.validate().is_err());
        let mut small = cfg(3, 4, 0.3, 20);
        small.theta = 3;
        let out = run_experiment(&small, RunOptions::default()).unwrap();
        assert_eq!(out.trials.len(), 20);
    }

    #[test]
    fn wilson_single_trial_contains_outcome() {
        let hit = EventEstimate::new("x", 1, 1);
        assert!(hit.ci_low <= 1.0 && hit.ci_high == 1.0 && hit.ci_low > 0.0);
        let miss = EventEstimate::new("x", 0, 1);
        assert!(miss.ci_low == 0.0 && miss.ci_high < 1.0);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn summary_from_single_trial() {
        let out = run_experiment(&cfg(3, 3, 0.2, 1), RunOptions::default()).unwrap();
        for e in &out.summary.events {
            assert!(e.ci_low <= e.estimate && e.estimate <= e.ci_high, "{e:?}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(3, 10, 0.1, 0);
        assert!(c.validate().is_err());
        c.trials = 1;
        c.j = 2;
        assert!(c.validate().is_err());
        c.j = 1;
        c.record_dims = vec![4];
        assert!(c.validate().is_err());
        c.record_dims = vec![1];
        c.intensity = Intensity::P(1.5);
        assert!(c.validate().is_err());
        c.intensity = Intensity::Amplitude(1e9);
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_rejects_empty_and_reports_bad_cells() {
        let c = cfg(3, 5, 0.1, 2);
        assert!(sweep(&c, SweepParam::N, &[], RunOptions::default()).is_err());
        let cells = sweep(&c, SweepParam::N, &[5.0, 1.5], RunOptions::default()).unwrap();
        assert!(cells[0].outcome.is_ok());
        assert!(cells[1].outcome.is_err());
    }

    #[test]
    fn config_json_roundtrip() {
        let mut c = cfg(4, 9, 0.25, 3);
        c.conditional_open = Some(c.dims.subtorus(&[(1, 2)]).unwrap());
        c.record_dims = vec![1, 2];
        c.mode = CountMode::Maximal;
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), c);
    }
}
