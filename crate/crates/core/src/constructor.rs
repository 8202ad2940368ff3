//! Builds `psi` with `R(psi)(x) = (1/n) sum_i phi(A_i x + b_i) ≈ u(T, x)`
//! from sampled solution maps, measures its L^p(ν) error and searches over
//! `n` until the target is met.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::affine::AffineMap;
use crate::builders::{multichannel, multichannel_counts};
use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::model::BlackScholesModel;
use crate::monte_carlo::{norm_moment, MeasureSpec, Moments, SampleBatch};
use crate::network::{Activation, Network};
use crate::oracles::{oracle_for, Oracle, OracleSettings, Payoff, PayoffFamily};
use crate::rng::{namespace, oracle_seed, par_chunks, StreamRng};

/// `2 sqrt(p-1) exp(3v(1 + L^2 T (sqrt(T) + v p)^2)) (1 + moment_root)`.
pub fn theory_constant_c(p: f64, v: f64, l: f64, t: f64, moment_root: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::InvalidArgument(format!("p must be at least 2, got {p}")));
    }
    if !(v >= 2.0) {
        return Err(Error::InvalidArgument(format!("growth exponent v must be at least 2, got {v}")));
    }
    for (name, x) in [("L", l), ("T", t), ("moment root", moment_root)] {
        if !(x >= 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {x}")));
        }
    }
    let inner = t.sqrt() + v * p;
    Ok(2.0 * (p - 1.0).sqrt() * (3.0 * v * (1.0 + l * l * t * inner * inner)).exp() * (1.0 + moment_root))
}

/// Smallest natural `n >= c^2 C^2 / eps^2` (at least 1), saturating at
/// `u128::MAX`.
pub fn theory_sample_count(c: f64, big_c: f64, eps: f64) -> Result<u128> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    if !(c >= 0.0 && big_c >= 0.0) {
        return Err(Error::InvalidArgument("c and C must be nonnegative".into()));
    }
    let target = (c * c) * (big_c * big_c) / (eps * eps);
    if target.is_nan() {
        return Err(Error::InvalidArgument("sample count is undefined".into()));
    }
    let n = target.ceil();
    if n >= u128::MAX as f64 {
        return Ok(u128::MAX);
    }
    Ok((n as u128).max(1))
}

/// A-priori bound `(eps_payoff + n^{-1/2} c) C` (constant without the factor 2).
pub fn error_bound_nicer(eps_payoff: f64, n: u128, c: f64, big_c: f64) -> f64 {
    (eps_payoff + c / (n.max(1) as f64).sqrt()) * big_c
}

/// Plug-in L^p error with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpError {
    pub estimate: f64,
    pub stderr: f64,
}

/// `[mean |a_j - r_j|^p]^{1/p}`; the standard error of the mean `S` is mapped
/// through `S -> S^{1/p}`.
pub fn lp_error_from_values(approx: &[f64], reference: &[f64], p: f64) -> Result<LpError> {
    check_dim(reference.len(), approx.len())?;
    if approx.is_empty() {
        return Err(Error::InvalidArgument("no evaluation points".into()));
    }
    let terms: Vec<f64> = approx.iter().zip(reference).map(|(a, r)| (a - r).abs().powf(p)).collect();
    let m = Moments::from_slice(&terms);
    let s = m.mean;
    if s == 0.0 {
        return Ok(LpError { estimate: 0.0, stderr: 0.0 });
    }
    let estimate = s.powf(1.0 / p);
    Ok(LpError {
        estimate,
        stderr: estimate / (p * s) * m.stderr(),
    })
}

/// L^p(ν) distance between `psi` and `reference` over `eval_samples` fresh
/// draws from `measure` (streams `(seed, FRESH_EVAL, 0, ·)`).
pub fn lp_error<F>(psi: &Network, reference: F, measure: &MeasureSpec, p: f64, eval_samples: usize, seed: u64) -> Result<LpError>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if eval_samples < 100 {
        return Err(Error::InvalidArgument(format!("eval_samples must be at least 100, got {eval_samples}")));
    }
    check_dim(psi.input_dim(), measure.dim())?;
    let points = draw_points(measure, eval_samples, seed, namespace::FRESH_EVAL, 0)?;
    let reference: Vec<f64> = points.rows().collect::<Vec<_>>().par_iter().map(|x| reference(x)).collect::<Result<_>>()?;
    let approx: Vec<f64> = points.rows().map(|x| psi.realize_unchecked(Activation::Relu, x)).collect();
    lp_error_from_values(&approx, &reference, p)
}

/// `count` draws from `measure`, chunked on streams `(seed, ns, major, ·)`.
pub fn draw_points(measure: &MeasureSpec, count: usize, seed: u64, ns: u64, major: u64) -> Result<SampleBatch> {
    measure.validate()?;
    let chunks = par_chunks(count, seed, ns, major, |rng: &mut StreamRng, range| {
        range.flat_map(|_| measure.draw(rng)).collect::<Vec<f64>>()
    });
    SampleBatch::from_flat(measure.dim(), chunks.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Theory,
    Empirical,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theory" => Ok(Mode::Theory),
            "empirical" => Ok(Mode::Empirical),
            _ => Err(Error::InvalidArgument(format!("unknown mode `{s}` (expected theory or empirical)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Theory => "theory",
            Mode::Empirical => "empirical",
        })
    }
}

/// Exponents `(z, w, 𝐳, θ, r, R)` of the size bound
/// `d^{(5+𝐳)θ + z + w𝐳 + 4v} ε^{-4-𝐳}`; used for reporting only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryExponents {
    pub z: f64,
    pub w: f64,
    pub z_bold: f64,
    pub theta: f64,
    pub r: f64,
    pub big_r: f64,
}

impl TheoryExponents {
    /// Exact payoff networks: `w = 𝐳 = 0`, `z = 1` for baskets and `3` for
    /// the rainbow payoffs, `r = R = 1`.
    pub fn for_family(family: PayoffFamily, theta: f64) -> Self {
        let z = match family {
            PayoffFamily::BasketCall | PayoffFamily::BasketPut => 1.0,
            PayoffFamily::CallOnMax | PayoffFamily::CallOnMin => 3.0,
        };
        TheoryExponents { z, w: 0.0, z_bold: 0.0, theta, r: 1.0, big_r: 1.0 }
    }

    /// `(5 + 𝐳)θ + z + w𝐳`, the dimension exponent without the `4v` term.
    pub fn d_exponent(&self) -> f64 {
        (5.0 + self.z_bold) * self.theta + self.z + self.w * self.z_bold
    }

    /// `4 + 𝐳`.
    pub fn eps_exponent(&self) -> f64 {
        4.0 + self.z_bold
    }
}

/// Everything a build needs. Use [`ApproximationSpec::new`] for defaults.
#[derive(Debug, Clone)]
pub struct ApproximationSpec {
    pub model: BlackScholesModel,
    pub horizon: f64,
    pub payoff: Payoff,
    pub p: f64,
    pub epsilon: f64,
    pub measure: MeasureSpec,
    pub mode: Mode,
    pub max_attempts: usize,
    pub eval_samples: usize,
    pub oracle_samples: usize,
    /// First channel count of the empirical search.
    pub initial_channels: usize,
    /// Largest channel count the empirical search may try.
    pub n_cap: usize,
    /// Theory mode only builds when the theoretical `n` is at most this.
    pub theory_n_cap: u128,
    /// `psi` is materialized only when its dense parameter count is at most this.
    pub max_params: usize,
}

impl ApproximationSpec {
    pub fn new(model: BlackScholesModel, horizon: f64, payoff: Payoff, measure: MeasureSpec, epsilon: f64) -> Self {
        ApproximationSpec {
            model,
            horizon,
            payoff,
            p: 2.0,
            epsilon,
            measure,
            mode: Mode::Empirical,
            max_attempts: 24,
            eval_samples: 4096,
            oracle_samples: 1_000_000,
            initial_channels: 32,
            n_cap: 1 << 16,
            theory_n_cap: 1 << 16,
            max_params: 1 << 25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.model.dim();
        check_dim(d, self.payoff.dim())?;
        check_dim(d, self.measure.dim())?;
        self.measure.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("T must be positive, got {}", self.horizon)));
        }
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p must be at least 2, got {}", self.p)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidArgument("max_attempts must be positive".into()));
        }
        if self.eval_samples < 100 {
            return Err(Error::InvalidArgument(format!(
                "eval_samples must be at least 100, got {}",
                self.eval_samples
            )));
        }
        if self.initial_channels == 0 || self.oracle_samples == 0 {
            return Err(Error::InvalidArgument("channel and oracle sample counts must be positive".into()));
        }
        let (c, v) = self.payoff.growth();
        if !(c >= 1.0 && v >= 2.0) {
            return Err(Error::InvalidArgument(format!("payoff growth constants c = {c}, v = {v} out of range")));
        }
        Ok(())
    }

    /// The oracle this spec would use for build seed `seed`.
    pub fn oracle(&self, seed: u64) -> Result<Oracle> {
        oracle_for(
            &self.payoff,
            &self.model,
            self.horizon,
            OracleSettings { samples: self.oracle_samples, seed: oracle_seed(seed) },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildStatus {
    /// Measured error at most ε.
    Success,
    /// Attempts or the channel cap ran out; the best realization is reported.
    Exhausted,
    /// Theory mode with a theoretical `n` above the cap: nothing was built.
    TheoryOnly,
}

impl fmt::Display for BuildStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BuildStatus::Success => "success",
            BuildStatus::Exhausted => "exhausted",
            BuildStatus::TheoryOnly => "theory_only",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub status: BuildStatus,
    pub mode: Mode,
    pub seed: u64,
    pub n_used: usize,
    pub attempts: usize,
    /// Error re-measured on a fresh evaluation set; `None` if nothing was built.
    pub error: Option<LpError>,
    pub param_count: usize,
    pub nonzero_param_count: usize,
    pub payoff_param_count: usize,
    /// Whether the dense network was allocated (see `max_params`).
    pub materialized: bool,
    pub wall_time_seconds: f64,
    pub theory_n: Option<u128>,
    pub theory_constant: Option<f64>,
    pub a_priori_bound: Option<f64>,
}

impl BuildReport {
    pub fn succeeded(&self) -> bool {
        self.status == BuildStatus::Success
    }

    pub fn measured_lp_error(&self) -> Option<f64> {
        self.error.map(|e| e.estimate)
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub network: Option<Network>,
    pub report: BuildReport,
}

/// Growth factors of `n` sampled solution maps `x -> g_i ∘ x`, row-major.
#[derive(Debug, Clone)]
struct Channels {
    n: usize,
    d: usize,
    growth: Vec<f64>,
}

impl Channels {
    fn draw(model: &BlackScholesModel, horizon: f64, n: usize, seed: u64, attempt: u64) -> Result<Self> {
        let sampler = model.terminal_sampler(horizon)?;
        let d = model.dim();
        let chunks = par_chunks(n, seed, namespace::CHANNELS, attempt, |rng: &mut StreamRng, range| {
            let mut noise = vec![0.0; d];
            let mut out = vec![0.0; range.len() * d];
            for g in out.chunks_exact_mut(d) {
                sampler.draw(rng, &mut noise, g);
            }
            out
        });
        Ok(Channels { n, d, growth: chunks.concat() })
    }

    fn maps(&self) -> Vec<AffineMap> {
        self.growth
            .chunks_exact(self.d)
            .map(|g| AffineMap::new(Matrix::diagonal(g), vec![0.0; self.d]).expect("square diagonal map"))
            .collect()
    }

    /// `(1/n) sum_i R(phi)(g_i ∘ x)`, which is `R(psi)(x)`.
    fn average(&self, phi: &Network, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.d];
        let mut sum = 0.0;
        for g in self.growth.chunks_exact(self.d) {
            for i in 0..self.d {
                y[i] = g[i] * x[i];
            }
            sum += phi.realize_unchecked(Activation::Relu, &y);
        }
        sum / self.n as f64
    }

    fn evaluate(&self, phi: &Network, points: &SampleBatch) -> Vec<f64> {
        let rows: Vec<&[f64]> = points.rows().collect();
        rows.par_iter().map(|x| self.average(phi, x)).collect()
    }
}

fn reference_values(oracle: &Oracle, points: &SampleBatch) -> Result<Vec<f64>> {
    let rows: Vec<&[f64]> = points.rows().collect();
    rows.par_iter().map(|x| oracle.price(x)).collect()
}

struct Finalized {
    network: Option<Network>,
    error: LpError,
    counts: (usize, usize),
}

/// Fresh-set error of the channel average, plus `psi` when it fits.
fn finalize(spec: &ApproximationSpec, phi: &Network, oracle: &Oracle, channels: &Channels, seed: u64, attempt: u64) -> Result<Finalized> {
    let maps = channels.maps();
    let counts = multichannel_counts(phi, &maps)?;
    let points = draw_points(&spec.measure, spec.eval_samples, seed, namespace::FRESH_EVAL, attempt)?;
    let reference = reference_values(oracle, &points)?;
    let approx = channels.evaluate(phi, &points);
    let error = lp_error_from_values(&approx, &reference, spec.p)?;
    let network = if counts.0 <= spec.max_params {
        let psi = multichannel(phi, &maps)?;
        // The channel average and the composed network must agree.
        for (x, a) in points.rows().zip(&approx).take(8) {
            let r = psi.realize_unchecked(Activation::Relu, x);
            if (r - a).abs() > 1e-9 * (1.0 + a.abs()) {
                return Err(Error::InvalidNetwork(format!(
                    "composed network disagrees with channel average: {r} vs {a}"
                )));
            }
        }
        Some(psi)
    } else {
        None
    };
    Ok(Finalized { network, error, counts })
}

/// Runs the build in `spec.mode` with an oracle derived from `seed`.
pub fn build_approximator(spec: &ApproximationSpec, seed: u64) -> Result<BuildOutcome> {
    spec.validate()?;
    let oracle = spec.oracle(seed)?;
    build_approximator_with(spec, &oracle, seed)
}

/// As [`build_approximator`] with a caller-supplied oracle, which may be
/// shared (and its memo reused) across builds.
pub fn build_approximator_with(spec: &ApproximationSpec, oracle: &Oracle, seed: u64) -> Result<BuildOutcome> {
    spec.validate()?;
    match spec.mode {
        Mode::Empirical => empirical_build(spec, oracle, seed),
        Mode::Theory => theory_build(spec, oracle, seed),
    }
}

/// One draw of `n` channels, measured on a fresh set.
pub fn build_fixed(spec: &ApproximationSpec, oracle: &Oracle, n: usize, seed: u64) -> Result<BuildOutcome> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("channel count must be positive".into()));
    }
    let start = Instant::now();
    let phi = spec.payoff.network()?;
    let channels = Channels::draw(&spec.model, spec.horizon, n, seed, 0)?;
    let fin = finalize(spec, &phi, oracle, &channels, seed, 0)?;
    let status = if fin.error.estimate <= spec.epsilon { BuildStatus::Success } else { BuildStatus::Exhausted };
    Ok(outcome(spec, &phi, fin, status, n, 1, seed, start, None))
}

#[allow(clippy::too_many_arguments)]
fn outcome(
    spec: &ApproximationSpec,
    phi: &Network,
    fin: Finalized,
    status: BuildStatus,
    n: usize,
    attempts: usize,
    seed: u64,
    start: Instant,
    theory: Option<(u128, f64, f64)>,
) -> BuildOutcome {
    BuildOutcome {
        report: BuildReport {
            status,
            mode: spec.mode,
            seed,
            n_used: n,
            attempts,
            error: Some(fin.error),
            param_count: fin.counts.0,
            nonzero_param_count: fin.counts.1,
            payoff_param_count: phi.param_count(),
            materialized: fin.network.is_some(),
            wall_time_seconds: start.elapsed().as_secs_f64(),
            theory_n: theory.map(|t| t.0),
            theory_constant: theory.map(|t| t.1),
            a_priori_bound: theory.map(|t| t.2),
        },
        network: fin.network,
    }
}

/// Doubles `n` from `initial_channels`, with one redraw per `n`. Attempts
/// are compared on one shared evaluation set; an attempt under ε there is
/// re-measured on a fresh set and accepted only if it stays under ε.
fn empirical_build(spec: &ApproximationSpec, oracle: &Oracle, seed: u64) -> Result<BuildOutcome> {
    let start = Instant::now();
    let phi = spec.payoff.network()?;
    let points = draw_points(&spec.measure, spec.eval_samples, seed, namespace::EVAL, 0)?;
    let reference = reference_values(oracle, &points)?;
    let mut best: Option<(f64, usize, Channels)> = None;
    let mut attempts = 0;
    for attempt in 0..spec.max_attempts {
        let n = spec.initial_channels.checked_shl((attempt / 2) as u32).unwrap_or(usize::MAX);
        if n > spec.n_cap {
            break;
        }
        attempts += 1;
        let channels = Channels::draw(&spec.model, spec.horizon, n, seed, attempt as u64)?;
        let paired = lp_error_from_values(&channels.evaluate(&phi, &points), &reference, spec.p)?;
        if paired.estimate <= spec.epsilon {
            let fin = finalize(spec, &phi, oracle, &channels, seed, attempt as u64)?;
            if fin.error.estimate <= spec.epsilon {
                return Ok(outcome(spec, &phi, fin, BuildStatus::Success, n, attempts, seed, start, None));
            }
        }
        if best.as_ref().is_none_or(|b| paired.estimate < b.0) {
            best = Some((paired.estimate, attempt, channels));
        }
    }
    let (_, attempt, channels) = best.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "initial channel count {} exceeds the cap {}",
            spec.initial_channels, spec.n_cap
        ))
    })?;
    let fin = finalize(spec, &phi, oracle, &channels, seed, attempt as u64)?;
    Ok(outcome(spec, &phi, fin, BuildStatus::Exhausted, channels.n, attempts, seed, start, None))
}

/// Samples for the moment integral when no closed-form bound exists.
const MOMENT_SAMPLES: usize = 100_000;

/// `[∫ |x|^{pv} dν]^{1/p}`, using the closed-form upper bound for boxes.
pub fn moment_root(measure: &MeasureSpec, p: f64, v: f64, seed: u64) -> Result<f64> {
    let m = norm_moment(measure, p * v, MOMENT_SAMPLES, seed, namespace::MEASURE, 0)?;
    Ok(m.analytic_upper.unwrap_or(m.estimate).powf(1.0 / p))
}

fn theory_build(spec: &ApproximationSpec, oracle: &Oracle, seed: u64) -> Result<BuildOutcome> {
    let start = Instant::now();
    let phi = spec.payoff.network()?;
    let (c, v) = spec.payoff.growth();
    let root = moment_root(&spec.measure, spec.p, v, seed)?;
    let big_c = theory_constant_c(spec.p, v, spec.model.growth_l(), spec.horizon, root)?;
    let n = theory_sample_count(c, big_c, spec.epsilon)?;
    let bound = error_bound_nicer(0.0, n, c, big_c / 2.0);
    let theory = Some((n, big_c, bound));
    if n > spec.theory_n_cap {
        return Ok(BuildOutcome {
            network: None,
            report: BuildReport {
                status: BuildStatus::TheoryOnly,
                mode: Mode::Theory,
                seed,
                n_used: 0,
                attempts: 0,
                error: None,
                param_count: 0,
                nonzero_param_count: 0,
                payoff_param_count: phi.param_count(),
                materialized: false,
                wall_time_seconds: start.elapsed().as_secs_f64(),
                theory_n: Some(n),
                theory_constant: Some(big_c),
                a_priori_bound: Some(bound),
            },
        });
    }
    let n = n as usize;
    let channels = Channels::draw(&spec.model, spec.horizon, n, seed, 0)?;
    let fin = finalize(spec, &phi, oracle, &channels, seed, 0)?;
    let status = if fin.error.estimate <= spec.epsilon { BuildStatus::Success } else { BuildStatus::Exhausted };
    Ok(outcome(spec, &phi, fin, status, n, 1, seed, start, theory))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::bs_call_1d;

    fn d1_spec(eps: f64) -> ApproximationSpec {
        let model = BlackScholesModel::uniform(1, 0.02, 0.2).unwrap();
        let payoff = Payoff::new(PayoffFamily::BasketCall, vec![1.0], 0.5).unwrap();
        ApproximationSpec::new(model, 1.0, payoff, MeasureSpec::uniform(1, 0.0, 1.0), eps)
    }

    #[test]
    fn constant_reference_value() {
        // 2 e^6, independent high-precision evaluation.
        let c = theory_constant_c(2.0, 2.0, 0.0, 1.0, 0.0).unwrap();
        assert!((c - 806.857_586_985_470_2).abs() < 1e-9);
        assert!((theory_constant_c(2.0, 2.0, 0.0, 1.0, 1.0).unwrap() - 2.0 * c).abs() < 1e-9);
        assert!(theory_constant_c(1.5, 2.0, 0.0, 1.0, 0.0).is_err());
        assert!(theory_constant_c(2.0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(theory_constant_c(2.0, 2.0, -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn constant_is_monotone() {
        let base = [2.0, 2.0, 0.1, 0.5, 0.3];
        let c0 = theory_constant_c(base[0], base[1], base[2], base[3], base[4]).unwrap();
        for k in 0..5 {
            let mut q = base;
            q[k] *= 1.5;
            assert!(theory_constant_c(q[0], q[1], q[2], q[3], q[4]).unwrap() >= c0, "argument {k}");
        }
    }

    #[test]
    fn sample_count_examples() {
        assert_eq!(theory_sample_count(1.0, 10.0, 0.5).unwrap(), 400);
        assert_eq!(theory_sample_count(0.0, 10.0, 0.5).unwrap(), 1);
        assert_eq!(theory_sample_count(2.0, 3.0, 1.0).unwrap(), 36);
        assert_eq!(theory_sample_count(2.0, 3.0, 1.0 - 1e-12).unwrap(), 37);
        assert!(theory_sample_count(1.0, 1.0, 0.0).is_err());
        assert_eq!(theory_sample_count(1.0, 1e300, 1e-10).unwrap(), u128::MAX);
        let c = theory_constant_c(2.0, 2.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(theory_sample_count(1.0, c, 0.1).unwrap(), 65_101_917);
    }

    #[test]
    fn nicer_bound_examples() {
        assert_eq!(error_bound_nicer(0.0, 1, 0.0, 3.0), 0.0);
        assert!((error_bound_nicer(0.1, 100, 1.0, 5.0) - 1.0).abs() < 1e-15);
        let (a, b) = (error_bound_nicer(0.0, 50, 1.3, 2.0), error_bound_nicer(0.0, 200, 1.3, 2.0));
        assert!((a / b - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lp_error_examples() {
        let e = lp_error_from_values(&[1.0, 2.0], &[1.0, 2.0], 2.0).unwrap();
        assert_eq!((e.estimate, e.stderr), (0.0, 0.0));
        let e = lp_error_from_values(&[0.75; 10], &[0.0; 10], 3.0).unwrap();
        assert!((e.estimate - 0.75).abs() < 1e-15 && e.stderr == 0.0);

        let zero = Network::new(vec![
            crate::network::Layer::new(Matrix::from_rows(&[vec![0.0]]), vec![0.0]),
            crate::network::Layer::new(Matrix::from_rows(&[vec![0.0]]), vec![0.0]),
        ])
        .unwrap();
        let e = lp_error(&zero, |x| Ok(x[0]), &MeasureSpec::uniform(1, 0.0, 1.0), 2.0, 20_000, 4).unwrap();
        assert!((e.estimate - (1.0f64 / 3.0).sqrt()).abs() < 3.0 * e.stderr, "{e:?}");
        assert!(lp_error(&zero, |x| Ok(x[0]), &MeasureSpec::uniform(1, 0.0, 1.0), 2.0, 99, 4).is_err());
    }

    #[test]
    fn deterministic_flow_is_exact() {
        let mut spec = d1_spec(0.01);
        spec.model = BlackScholesModel::uniform(1, 0.02, 0.0).unwrap();
        spec.eval_samples = 500;
        let out = build_approximator(&spec, 1).unwrap();
        assert!(out.report.succeeded());
        assert_eq!(out.report.attempts, 1);
        assert!(out.report.error.unwrap().estimate < 1e-14);
        let one = build_fixed(&spec, &spec.oracle(1).unwrap(), 1, 1).unwrap();
        assert!(one.report.error.unwrap().estimate < 1e-14);
    }

    #[test]
    fn d1_call_build_meets_target() {
        let spec = d1_spec(0.01);
        let out = build_approximator(&spec, 2024).unwrap();
        let r = &out.report;
        assert!(r.succeeded(), "{r:?}");
        assert!(r.n_used <= 1 << 16 && r.attempts <= spec.max_attempts);
        assert!(r.error.unwrap().estimate <= 0.01);
        let psi = out.network.as_ref().unwrap();
        assert_eq!(psi.param_count(), r.param_count);
        assert_eq!(psi.nonzero_param_count(), r.nonzero_param_count);
        let n = r.n_used;
        assert!(r.param_count <= n * n * 4 && r.nonzero_param_count <= n * 4);
        let ref_x = bs_call_1d(0.7, 0.5, 0.02, 0.2, 1.0).unwrap();
        assert!((psi.realize(&[0.7]).unwrap() - ref_x).abs() < 0.05);
    }

    #[test]
    fn builds_are_reproducible() {
        let mut spec = d1_spec(0.02);
        spec.eval_samples = 300;
        let a = build_approximator(&spec, 7).unwrap();
        let b = build_approximator(&spec, 7).unwrap();
        assert_eq!(a.report.n_used, b.report.n_used);
        assert_eq!(a.report.error, b.report.error);
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn forced_failure_reports_best() {
        let mut spec = d1_spec(1e-9);
        spec.max_attempts = 3;
        spec.n_cap = 64;
        spec.eval_samples = 200;
        let out = build_approximator(&spec, 3).unwrap();
        assert_eq!(out.report.status, BuildStatus::Exhausted);
        assert_eq!(out.report.attempts, 3);
        assert!(out.report.error.unwrap().estimate > 1e-9);
        assert!(out.network.is_some());
    }

    #[test]
    fn theory_mode_reports_without_building() {
        let mut spec = d1_spec(0.1);
        spec.mode = Mode::Theory;
        let out = build_approximator(&spec, 5).unwrap();
        let r = &out.report;
        assert_eq!(r.status, BuildStatus::TheoryOnly);
        assert!(out.network.is_none() && r.error.is_none());
        // L = 0.44, moment root = (∫ x^4)^{1/2} <= 1 on [0, 1].
        let c = theory_constant_c(2.0, 2.0, 0.44, 1.0, 1.0).unwrap();
        assert_eq!(r.theory_constant, Some(c));
        let (cp, _) = spec.payoff.growth();
        assert_eq!(r.theory_n, Some(theory_sample_count(cp, c, 0.1).unwrap()));
    }

    #[test]
    fn theory_mode_builds_when_small() {
        let mut spec = d1_spec(1.0);
        spec.mode = Mode::Theory;
        spec.model = BlackScholesModel::uniform(1, 0.0, 0.0).unwrap();
        spec.measure = MeasureSpec::points(vec![vec![0.0]]);
        spec.theory_n_cap = u128::MAX;
        spec.eval_samples = 100;
        let out = build_approximator(&spec, 6).unwrap();
        let r = &out.report;
        assert_eq!(r.n_used as u128, r.theory_n.unwrap());
        assert!(r.succeeded());
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = d1_spec(0.1);
        spec.p = 1.5;
        assert!(build_approximator(&spec, 0).is_err());
        let mut spec = d1_spec(0.0);
        assert!(build_approximator(&spec, 0).is_err());
        spec.epsilon = 0.1;
        spec.eval_samples = 10;
        assert!(build_approximator(&spec, 0).is_err());
        let mut spec = d1_spec(0.1);
        spec.measure = MeasureSpec::uniform(2, 0.0, 1.0);
        assert!(build_approximator(&spec, 0).is_err());
    }

    #[test]
    fn exponents_for_families() {
        let e = TheoryExponents::for_family(PayoffFamily::BasketCall, 0.5);
        assert_eq!((e.d_exponent(), e.eps_exponent()), (3.5, 4.0));
        let e = TheoryExponents::for_family(PayoffFamily::CallOnMin, 0.5);
        assert_eq!(e.d_exponent(), 5.5);
    }
}
