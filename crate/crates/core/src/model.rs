//! Black-Scholes coefficients, exact terminal sampling of the associated
//! geometric Brownian motion and the a-priori moment bound.
//!
//! The model is `dX_i = alpha_i X_i dt + beta_i X_i (B dW)_i`, i.e.
//! `mu(x) = (alpha_i x_i)_i` and `sigma(x) = diag(beta_i x_i) B`, where each
//! row of the factor `B` has unit norm. Its terminal value is
//! `X_T^i = x_i exp((alpha_i - beta_i^2 / 2) T + beta_i sqrt(T) (B Z)_i)`
//! with `Z ~ N(0, I_d)`, so for fixed noise the flow is a diagonal linear map.
//!
//! The target PDE is `u_t = 1/2 Tr(sigma sigma^T Hess u) + <mu, grad u>`. The
//! variant without the factor 1/2 is the same model with `beta` scaled by
//! `sqrt(2)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::affine::AffineMap;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky, norm, Matrix};

/// How the factor `B` is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum Correlation {
    Identity,
    /// Cholesky factor of the equicorrelation matrix with off-diagonal `rho`.
    Constant(f64),
    /// An explicit factor; rows are normalized on construction.
    Factor(Matrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlackScholesModel {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    factor: Matrix,
    factor_is_identity: bool,
}

impl BlackScholesModel {
    /// Normalizes the rows of `factor`; rows with norm below `1e-12` are rejected.
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, factor: Matrix) -> Result<Self> {
        let d = alpha.len();
        if d == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        if beta.len() != d {
            return Err(Error::InvalidModel(format!(
                "alpha has {d} entries but beta has {}",
                beta.len()
            )));
        }
        if factor.rows() != d || factor.cols() != d {
            return Err(Error::InvalidModel(format!(
                "correlation factor must be {d}x{d}, got {}x{}",
                factor.rows(),
                factor.cols()
            )));
        }
        if alpha.iter().chain(&beta).chain(factor.as_slice()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        let mut factor = factor;
        for i in 0..d {
            let n = norm(factor.row(i));
            if n < 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "row {} of the correlation factor has norm {n:e} < 1e-12",
                    i + 1
                )));
            }
            factor.row_mut(i).iter_mut().for_each(|v| *v /= n);
        }
        let factor_is_identity = factor.is_identity();
        Ok(BlackScholesModel {
            alpha,
            beta,
            factor,
            factor_is_identity,
        })
    }

    pub fn with_correlation(alpha: Vec<f64>, beta: Vec<f64>, corr: Correlation) -> Result<Self> {
        let d = alpha.len();
        let factor = match corr {
            Correlation::Identity => Matrix::identity(d),
            Correlation::Constant(rho) => equicorrelation_factor(d, rho)?,
            Correlation::Factor(m) => m,
        };
        Self::new(alpha, beta, factor)
    }

    /// Uncorrelated model with the same rates in every coordinate.
    pub fn uniform(d: usize, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![alpha; d], vec![beta; d], Matrix::identity(d))
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    pub fn mu(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.alpha.iter().zip(x).map(|(a, v)| a * v).collect())
    }

    pub fn sigma(&self, x: &[f64]) -> Result<Matrix> {
        check_dim(self.dim(), x.len())?;
        let d = self.dim();
        let mut s = Matrix::zeros(d, d);
        for i in 0..d {
            let scale = self.beta[i] * x[i];
            for j in 0..d {
                s[(i, j)] = scale * self.factor[(i, j)];
            }
        }
        Ok(s)
    }

    /// `sup_i (|alpha_i| + |beta_i|)`.
    pub fn coefficient_sup(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| a.abs() + b.abs())
            .fold(0.0, f64::max)
    }

    /// `L = 2 sup_i (|alpha_i| + |beta_i|)`, so that
    /// `|mu(x)| + |sigma(x)|_HS <= L (1 + |x|)`.
    pub fn growth_l(&self) -> f64 {
        2.0 * self.coefficient_sup()
    }

    /// Precomputes per-coordinate drift and volatility for horizon `t`.
    pub fn terminal_sampler(&self, t: f64) -> Result<TerminalSampler<'_>> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon T must be positive, got {t}")));
        }
        let sqrt_t = t.sqrt();
        Ok(TerminalSampler {
            model: self,
            drift: self.alpha.iter().zip(&self.beta).map(|(a, b)| (a - 0.5 * b * b) * t).collect(),
            vol: self.beta.iter().map(|b| b * sqrt_t).collect(),
        })
    }

    /// Exact `X_T^x` driven by the standard normal vector `noise`.
    pub fn sample_terminal_exact(&self, t: f64, x: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let g = self.terminal_sampler(t)?.growth_factors(noise)?;
        Ok(x.iter().zip(&g).map(|(a, b)| a * b).collect())
    }

    /// The random solution map `x -> X_T^x` for fixed noise: `diag(g) x + 0`.
    pub fn sample_solution_map(&self, t: f64, noise: &[f64]) -> Result<AffineMap> {
        let g = self.terminal_sampler(t)?.growth_factors(noise)?;
        AffineMap::new(Matrix::diagonal(&g), vec![0.0; self.dim()])
    }

    /// Inputs for [`moment_bound`] with `m1 = s1 = 0`, `m2 = s2 = L / 2`.
    pub fn moment_bound_inputs(&self, p: f64, horizon: f64, t: f64, xi: &[f64]) -> MomentBoundInputs {
        let half_l = self.coefficient_sup();
        MomentBoundInputs {
            p,
            horizon,
            t,
            m1: 0.0,
            m2: half_l,
            s1: 0.0,
            s2: half_l,
            xi_norm: norm(xi),
        }
    }
}

/// Cholesky factor of `(1 - rho) I + rho 1 1^T`; rows have unit norm.
pub fn equicorrelation_factor(d: usize, rho: f64) -> Result<Matrix> {
    let lower = if d > 1 { -1.0 / (d as f64 - 1.0) } else { f64::NEG_INFINITY };
    if !(rho < 1.0 && rho > lower) {
        return Err(Error::InvalidModel(format!(
            "constant correlation {rho} outside ({lower}, 1) for d = {d}"
        )));
    }
    let mut c = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            c[(i, j)] = if i == j { 1.0 } else { rho };
        }
    }
    cholesky(&c).ok_or_else(|| Error::InvalidModel(format!("correlation {rho} is not positive definite")))
}

/// Maps standard normal noise to the multiplicative growth `X_T = x ∘ g`.
#[derive(Debug, Clone)]
pub struct TerminalSampler<'a> {
    model: &'a BlackScholesModel,
    drift: Vec<f64>,
    vol: Vec<f64>,
}

impl TerminalSampler<'_> {
    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn growth_factors(&self, noise: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), noise.len())?;
        let mut out = vec![0.0; self.dim()];
        self.growth_into(noise, &mut out);
        Ok(out)
    }

    fn growth_into(&self, noise: &[f64], out: &mut [f64]) {
        if self.model.factor_is_identity {
            for (i, o) in out.iter_mut().enumerate() {
                *o = (self.drift[i] + self.vol[i] * noise[i]).exp();
            }
        } else {
            self.model.factor.mul_vec_into(noise, out);
            for (i, o) in out.iter_mut().enumerate() {
                *o = (self.drift[i] + self.vol[i] * *o).exp();
            }
        }
    }

    /// Draws fresh noise from `rng` into `noise` and writes the growth factors.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, noise: &mut [f64], out: &mut [f64]) {
        for z in noise.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        self.growth_into(noise, out);
    }
}

/// Explicit Euler-Maruyama scheme with `steps` uniform steps on `[0, T]`.
/// `increments` holds `steps * d` standard normals, step-major.
pub fn euler_maruyama<M, S>(
    mu: M,
    sigma: S,
    horizon: f64,
    steps: usize,
    x: &[f64],
    increments: &[f64],
) -> Result<Vec<f64>>
where
    M: Fn(&[f64]) -> Vec<f64>,
    S: Fn(&[f64]) -> Matrix,
{
    if steps == 0 {
        return Err(Error::InvalidArgument("Euler-Maruyama needs at least one step".into()));
    }
    let d = x.len();
    check_dim(steps * d, increments.len())?;
    let h = horizon / steps as f64;
    let sqrt_h = h.sqrt();
    let mut state = x.to_vec();
    for z in increments.chunks_exact(d.max(1)).take(steps) {
        let drift = mu(&state);
        let diffusion = sigma(&state);
        check_dim(d, drift.len())?;
        let noise = diffusion.mul_vec(z)?;
        for i in 0..d {
            state[i] += drift[i] * h + noise[i] * sqrt_h;
        }
    }
    Ok(state)
}

/// Linear-growth data `|mu(x)| <= m1 + m2 |x|`, `|sigma(x)|_HS <= s1 + s2 |x|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBoundInputs {
    pub p: f64,
    pub horizon: f64,
    pub t: f64,
    pub m1: f64,
    pub m2: f64,
    pub s1: f64,
    pub s2: f64,
    pub xi_norm: f64,
}

/// `sqrt(2) (|xi| + m1 T + s1 p sqrt(T)) exp((m2 sqrt(T) + s2 p)^2 t)`, an
/// upper bound for `(E |X_t|^p)^(1/p)`.
pub fn moment_bound(inputs: &MomentBoundInputs) -> Result<f64> {
    let MomentBoundInputs { p, horizon, t, m1, m2, s1, s2, xi_norm } = *inputs;
    if !(p >= 2.0) {
        return Err(Error::InvalidArgument(format!("moment order p must be >= 2, got {p}")));
    }
    if [horizon, t, m1, m2, s1, s2, xi_norm].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("moment bound inputs must be nonnegative".into()));
    }
    if t > horizon {
        return Err(Error::InvalidArgument(format!("t = {t} exceeds T = {horizon}")));
    }
    let sqrt_h = horizon.sqrt();
    let rate = m2 * sqrt_h + s2 * p;
    Ok(std::f64::consts::SQRT_2 * (xi_norm + m1 * horizon + s1 * p * sqrt_h) * (rate * rate * t).exp())
}
