//! Reference prices `u(T, x) = E[phi(X_T^x)]`: a closed form in one
//! dimension and an exact-sampling Monte-Carlo estimator otherwise.
//!
//! Prices are undiscounted; the PDE has no zeroth-order term.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{OnceLock, RwLock};

use libm::erfc;

use crate::builders::{basket_call_net, basket_put_net, call_on_max_net, call_on_min_net};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm};
use crate::model::BlackScholesModel;
use crate::monte_carlo::Moments;
use crate::network::Network;
use crate::rng::{namespace, par_chunks, StreamRng};

/// Standard normal CDF through `erfc`, accurate to about 1e-16 absolute.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

/// `E[(x G - K)^+]` for `G = exp((alpha - beta^2/2) T + beta sqrt(T) Z)`.
pub fn bs_call_1d(x: f64, strike: f64, alpha: f64, beta: f64, horizon: f64) -> Result<f64> {
    check_positive("spot", x)?;
    check_positive("strike", strike)?;
    check_positive("horizon", horizon)?;
    if !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!("volatility must be nonnegative, got {beta}")));
    }
    Ok(lognormal_call(x, strike, alpha, beta, horizon))
}

/// `E[(K - x G)^+] = call - x e^{alpha T} + K`.
pub fn bs_put_1d(x: f64, strike: f64, alpha: f64, beta: f64, horizon: f64) -> Result<f64> {
    let call = bs_call_1d(x, strike, alpha, beta, horizon)?;
    Ok(call - x * (alpha * horizon).exp() + strike)
}

/// `E[(a G - K)^+]` for any real `a`, `K` and `beta >= 0`, `T > 0`.
fn lognormal_call(a: f64, strike: f64, alpha: f64, beta: f64, horizon: f64) -> f64 {
    let forward = a * (alpha * horizon).exp();
    if a == 0.0 {
        return (-strike).max(0.0);
    }
    let vol = beta.abs() * horizon.sqrt();
    if vol == 0.0 {
        return (forward - strike).max(0.0);
    }
    if a > 0.0 {
        if strike <= 0.0 {
            return forward - strike;
        }
        let d1 = ((a / strike).ln() + (alpha + 0.5 * beta * beta) * horizon) / vol;
        forward * normal_cdf(d1) - strike * normal_cdf(d1 - vol)
    } else {
        // (a G - K)^+ = (|K|... ) : with a < 0 this is a put on |a| G struck at -K.
        let put_strike = -strike;
        if put_strike <= 0.0 {
            return 0.0;
        }
        let b = -a;
        let d1 = ((b / put_strike).ln() + (alpha + 0.5 * beta * beta) * horizon) / vol;
        put_strike * normal_cdf(-(d1 - vol)) - b * (alpha * horizon).exp() * normal_cdf(-d1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayoffFamily {
    BasketCall,
    BasketPut,
    CallOnMax,
    CallOnMin,
}

impl PayoffFamily {
    pub const ALL: [PayoffFamily; 4] = [
        PayoffFamily::BasketCall,
        PayoffFamily::BasketPut,
        PayoffFamily::CallOnMax,
        PayoffFamily::CallOnMin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PayoffFamily::BasketCall => "basket_call",
            PayoffFamily::BasketPut => "basket_put",
            PayoffFamily::CallOnMax => "call_on_max",
            PayoffFamily::CallOnMin => "call_on_min",
        }
    }
}

impl fmt::Display for PayoffFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PayoffFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PayoffFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown payoff family `{s}`")))
    }
}

/// A payoff family with its weights `c` and strike `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Payoff {
    pub family: PayoffFamily,
    pub weights: Vec<f64>,
    pub strike: f64,
}

impl Payoff {
    pub fn new(family: PayoffFamily, weights: Vec<f64>, strike: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("payoff weight vector is empty".into()));
        }
        Ok(Payoff { family, weights, strike })
    }

    /// Weights `1/d` each.
    pub fn equal_weights(family: PayoffFamily, d: usize, strike: f64) -> Result<Self> {
        Self::new(family, vec![1.0 / d.max(1) as f64; d], strike)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let k = self.strike;
        let products = self.weights.iter().zip(x).map(|(c, v)| c * v);
        match self.family {
            PayoffFamily::BasketCall => (dot(&self.weights, x) - k).max(0.0),
            PayoffFamily::BasketPut => (k - dot(&self.weights, x)).max(0.0),
            PayoffFamily::CallOnMax => (products.fold(f64::NEG_INFINITY, f64::max) - k).max(0.0),
            PayoffFamily::CallOnMin => (products.fold(f64::INFINITY, f64::min) - k).max(0.0),
        }
    }

    /// The exact ReLU network of this payoff.
    pub fn network(&self) -> Result<Network> {
        match self.family {
            PayoffFamily::BasketCall => basket_call_net(&self.weights, self.strike),
            PayoffFamily::BasketPut => basket_put_net(&self.weights, self.strike),
            PayoffFamily::CallOnMax => call_on_max_net(&self.weights, self.strike),
            PayoffFamily::CallOnMin => call_on_min_net(&self.weights, self.strike),
        }
    }

    /// `(c, v)` with `|phi(x)| <= c (1 + |x|^v)`: `v = 2`, and `c` is
    /// `max{1, |w| + |K|}` with `|w|` the Euclidean norm for baskets and the
    /// max-norm for the rainbow payoffs (uses `t <= 1 + t^2`).
    pub fn growth(&self) -> (f64, f64) {
        let w = match self.family {
            PayoffFamily::BasketCall | PayoffFamily::BasketPut => norm(&self.weights),
            PayoffFamily::CallOnMax | PayoffFamily::CallOnMin => {
                self.weights.iter().fold(0.0f64, |a, c| a.max(c.abs()))
            }
        };
        ((w + self.strike.abs()).max(1.0), 2.0)
    }
}

/// Monte-Carlo price of `payoff(X_T^{x0})` from `n` exact samples, with its
/// standard error. Noise comes from streams `(seed, ORACLE, 0, chunk)`, so
/// calls with the same seed share one noise realization across `x0`.
pub fn mc_price<F>(model: &BlackScholesModel, payoff: F, horizon: f64, x0: &[f64], n: usize, seed: u64) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_dim(model.dim(), x0.len())?;
    if n == 0 {
        return Err(Error::InvalidArgument("oracle sample count must be positive".into()));
    }
    let sampler = model.terminal_sampler(horizon)?;
    let d = model.dim();
    let parts = par_chunks(n, seed, namespace::ORACLE, 0, |rng: &mut StreamRng, range| {
        let (mut noise, mut g, mut x) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        Moments::accumulate(range.map(|_| {
            sampler.draw(rng, &mut noise, &mut g);
            for i in 0..d {
                x[i] = x0[i] * g[i];
            }
            payoff(&x)
        }))
    });
    let m = Moments::merge_all(&parts);
    Ok((m.mean, m.stderr()))
}

/// Sample count and seed of Monte-Carlo oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleSettings {
    pub samples: usize,
    pub seed: u64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            samples: 1_000_000,
            seed: crate::rng::oracle_seed(0),
        }
    }
}

/// Pricing function `x -> u(T, x)` for one payoff under one model.
#[derive(Debug)]
pub enum Oracle {
    ClosedForm(ClosedFormOracle),
    MonteCarlo(McOracle),
}

impl Oracle {
    pub fn price(&self, x: &[f64]) -> Result<f64> {
        self.price_with_stderr(x).map(|(p, _)| p)
    }

    pub fn price_with_stderr(&self, x: &[f64]) -> Result<(f64, f64)> {
        match self {
            Oracle::ClosedForm(o) => o.price(x).map(|p| (p, 0.0)),
            Oracle::MonteCarlo(o) => o.price(x),
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self, Oracle::ClosedForm(_))
    }
}

/// One-dimensional lognormal call/put formula.
#[derive(Debug, Clone)]
pub struct ClosedFormOracle {
    payoff: Payoff,
    alpha: f64,
    beta: f64,
    horizon: f64,
}

impl ClosedFormOracle {
    pub fn price(&self, x: &[f64]) -> Result<f64> {
        check_dim(1, x.len())?;
        let a = self.payoff.weights[0] * x[0];
        let call = lognormal_call(a, self.payoff.strike, self.alpha, self.beta, self.horizon);
        Ok(match self.payoff.family {
            PayoffFamily::BasketPut => {
                // (K - aG)^+ = (aG - K)^+ - aG + K
                call - a * (self.alpha * self.horizon).exp() + self.payoff.strike
            }
            _ => call,
        })
    }
}

/// Memoized [`mc_price`] with growth factors drawn once and reused for every
/// query point. Equal to `mc_price` with the same seed bit for bit, except
/// for baskets, which are summed in a different order.
#[derive(Debug)]
pub struct McOracle {
    model: BlackScholesModel,
    payoff: Payoff,
    horizon: f64,
    settings: OracleSettings,
    factors: OnceLock<Vec<Vec<f64>>>,
    memo: RwLock<HashMap<Vec<u64>, (f64, f64)>>,
}

impl McOracle {
    pub fn new(model: BlackScholesModel, payoff: Payoff, horizon: f64, settings: OracleSettings) -> Result<Self> {
        check_dim(model.dim(), payoff.dim())?;
        model.terminal_sampler(horizon)?;
        if settings.samples == 0 {
            return Err(Error::InvalidArgument("oracle sample count must be positive".into()));
        }
        Ok(McOracle {
            model,
            payoff,
            horizon,
            settings,
            factors: OnceLock::new(),
            memo: RwLock::new(HashMap::new()),
        })
    }

    fn factors(&self) -> &[Vec<f64>] {
        self.factors.get_or_init(|| {
            let sampler = self.model.terminal_sampler(self.horizon).expect("validated horizon");
            let d = self.model.dim();
            par_chunks(self.settings.samples, self.settings.seed, namespace::ORACLE, 0, |rng: &mut StreamRng, range| {
                let mut noise = vec![0.0; d];
                let mut out = vec![0.0; range.len() * d];
                for g in out.chunks_exact_mut(d) {
                    sampler.draw(rng, &mut noise, g);
                }
                out
            })
        })
    }

    pub fn price(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.model.dim(), x.len())?;
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(hit) = self.memo.read().expect("memo lock").get(&key) {
            return Ok(*hit);
        }
        let d = x.len();
        let parts: Vec<Moments> = self
            .factors()
            .iter()
            .map(|chunk| {
                let rows = chunk.chunks_exact(d);
                match self.payoff.family {
                    // Baskets fold c ∘ x into one weight vector per query.
                    PayoffFamily::BasketCall | PayoffFamily::BasketPut => {
                        let w: Vec<f64> = self.payoff.weights.iter().zip(x).map(|(c, v)| c * v).collect();
                        let sign = if self.payoff.family == PayoffFamily::BasketCall { 1.0 } else { -1.0 };
                        let k = self.payoff.strike;
                        Moments::accumulate(rows.map(|g| (sign * (dot(&w, g) - k)).max(0.0)))
                    }
                    _ => {
                        let mut y = vec![0.0; d];
                        Moments::accumulate(rows.map(|g| {
                            for i in 0..d {
                                y[i] = x[i] * g[i];
                            }
                            self.payoff.value(&y)
                        }))
                    }
                }
            })
            .collect();
        let m = Moments::merge_all(&parts);
        let out = (m.mean, m.stderr());
        self.memo.write().expect("memo lock").insert(key, out);
        Ok(out)
    }
}

/// Closed form in one dimension (every family reduces to a call or put on
/// `c_1 x_1`), memoized Monte Carlo otherwise.
pub fn oracle_for(payoff: &Payoff, model: &BlackScholesModel, horizon: f64, settings: OracleSettings) -> Result<Oracle> {
    check_dim(model.dim(), payoff.dim())?;
    check_positive("horizon", horizon)?;
    if model.dim() == 1 {
        return Ok(Oracle::ClosedForm(ClosedFormOracle {
            payoff: payoff.clone(),
            alpha: model.alpha()[0],
            beta: model.beta()[0].abs(),
            horizon,
        }));
    }
    Ok(Oracle::MonteCarlo(McOracle::new(model.clone(), payoff.clone(), horizon, settings)?))
}
