//! Monte-Carlo mean estimation, its L^2 / L^p error theory and the
//! probability measures used to weight approximation errors.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::model::BlackScholesModel;
use crate::rng::{par_chunks, StreamRng};

const PAIRWISE_BLOCK: usize = 128;

/// Pairwise (cascade) summation; rounding error grows like `log n`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Count, mean and centered sum of squares of a sample. Merging follows
/// Chan et al., so equal samples keep an exactly zero spread.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn from_slice(values: &[f64]) -> Self {
        if values.is_empty() {
            return Moments::default();
        }
        let n = values.len();
        if values.iter().all(|v| *v == values[0]) {
            return Moments { count: n, mean: values[0], m2: 0.0 };
        }
        let mean = pairwise_sum(values) / n as f64;
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        Moments {
            count: n,
            mean,
            m2: pairwise_sum(&sq),
        }
    }

    /// One pass with sums shifted by the first value; suited to chunks of a
    /// few thousand values. Constant input gives `m2 == 0` exactly.
    pub fn accumulate<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut it = values.into_iter();
        let Some(first) = it.next() else {
            return Moments::default();
        };
        let (mut count, mut s, mut ss) = (1usize, 0.0, 0.0);
        for v in it {
            let dv = v - first;
            s += dv;
            ss += dv * dv;
            count += 1;
        }
        let shift = s / count as f64;
        Moments {
            count,
            mean: first + shift,
            m2: (ss - s * shift).max(0.0),
        }
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let wb = other.count as f64 / n;
        Moments {
            count: self.count + other.count,
            mean: self.mean + delta * wb,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * wb,
        }
    }

    /// Tree-shaped merge of partial moments, in order.
    pub fn merge_all(parts: &[Moments]) -> Moments {
        match parts.len() {
            0 => Moments::default(),
            1 => parts[0],
            n => Self::merge_all(&parts[..n / 2]).merge(Self::merge_all(&parts[n / 2..])),
        }
    }

    /// Unbiased sample variance (zero for fewer than two values).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.std_dev() / (self.count as f64).sqrt()
        }
    }
}

/// i.i.d. draws of a vector-valued random variable, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    dim: usize,
    values: Vec<f64>,
}

impl SampleBatch {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or_else(|| Error::InvalidArgument("empty sample batch".into()))?;
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("sample batch rows must share a positive dimension".into()));
        }
        Ok(SampleBatch {
            dim,
            values: rows.concat(),
        })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty sample batch".into()));
        }
        Ok(SampleBatch { dim: 1, values })
    }

    pub fn from_flat(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument("flat batch length must be a positive multiple of dim".into()));
        }
        Ok(SampleBatch { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.values.chunks_exact(self.dim).map(<[f64]>::to_vec).collect()
    }
}

/// Componentwise arithmetic mean.
pub fn mc_mean(batch: &SampleBatch) -> Vec<f64> {
    let n = batch.len() as f64;
    (0..batch.dim())
        .map(|j| {
            let column: Vec<f64> = batch.rows().map(|r| r[j]).collect();
            pairwise_sum(&column) / n
        })
        .collect()
}

/// Exact RMS error `std / sqrt(n)` of the `n`-sample mean.
pub fn l2_error_predicted(n: usize, std: f64) -> f64 {
    std / (n.max(1) as f64).sqrt()
}

/// Upper bound `sqrt(p - 1)` on the Kahane-Khintchine constant `K_{p,2}`.
pub fn kahane_constant_bound(p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 2, got {p}")));
    }
    Ok((p - 1.0).sqrt())
}

/// `2 sqrt((p - 1) / n) (E|X - EX|^p)^(1/p)`: bounds the L^p norm of the
/// mean estimator's error.
pub fn lp_mc_error_bound(p: f64, n: usize, central_pth_moment_root: f64) -> f64 {
    2.0 * ((p - 1.0) / n.max(1) as f64).sqrt() * central_pth_moment_root
}

/// A sampleable probability measure on R^d.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    /// Uniform on `[lower, upper]^dim`.
    UniformBox { dim: usize, lower: f64, upper: f64 },
    /// Law of the model's `X_T` started at `x0`.
    Lognormal { model: BlackScholesModel, horizon: f64, x0: Vec<f64> },
    /// Finite support with the given probabilities.
    PointCloud { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl MeasureSpec {
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Self {
        MeasureSpec::UniformBox { dim, lower, upper }
    }

    /// Equally weighted point cloud.
    pub fn points(points: Vec<Vec<f64>>) -> Self {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        MeasureSpec::PointCloud { points, weights }
    }

    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::UniformBox { dim, .. } => *dim,
            MeasureSpec::Lognormal { model, .. } => model.dim(),
            MeasureSpec::PointCloud { points, .. } => points.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::UniformBox { dim, lower, upper } => {
                if *dim == 0 {
                    return Err(Error::InvalidMeasure("box dimension must be positive".into()));
                }
                if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                    return Err(Error::InvalidMeasure(format!("box needs finite u < v, got [{lower}, {upper}]")));
                }
            }
            MeasureSpec::Lognormal { model, horizon, x0 } => {
                if x0.len() != model.dim() {
                    return Err(Error::InvalidMeasure("x0 dimension differs from the model".into()));
                }
                if !(*horizon > 0.0) {
                    return Err(Error::InvalidMeasure("lognormal horizon must be positive".into()));
                }
            }
            MeasureSpec::PointCloud { points, weights } => {
                let d = self.dim();
                if points.is_empty() || d == 0 || points.iter().any(|p| p.len() != d) {
                    return Err(Error::InvalidMeasure("point cloud needs nonempty points of one dimension".into()));
                }
                if weights.len() != points.len() || weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::InvalidMeasure("point weights must be nonnegative, one per point".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidMeasure(format!("point weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    /// One draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            MeasureSpec::UniformBox { dim, lower, upper } => {
                (0..*dim).map(|_| lower + (upper - lower) * rng.random::<f64>()).collect()
            }
            MeasureSpec::Lognormal { model, horizon, x0 } => {
                let sampler = model.terminal_sampler(*horizon).expect("validated horizon");
                let d = model.dim();
                let (mut noise, mut g) = (vec![0.0; d], vec![0.0; d]);
                sampler.draw(rng, &mut noise, &mut g);
                x0.iter().zip(&g).map(|(a, b)| a * b).collect()
            }
            MeasureSpec::PointCloud { points, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (p, w) in points.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return p.clone();
                    }
                }
                // Rounding in the cumulative sum can leave u above acc.
                let last = weights.iter().rposition(|w| *w > 0.0).unwrap_or(points.len() - 1);
                points[last].clone()
            }
        }
    }
}

/// `count` i.i.d. draws from `spec`.
pub fn sample_measure<R: Rng + ?Sized>(spec: &MeasureSpec, count: usize, rng: &mut R) -> Result<SampleBatch> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    SampleBatch::new((0..count).map(|_| spec.draw(rng)).collect())
}

/// Estimate of `∫ |x|^q dν` and, for boxes, the bound `d^{q/2} max{|u|^q, |v|^q}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormMoment {
    pub estimate: f64,
    pub stderr: f64,
    pub analytic_upper: Option<f64>,
}

/// Point clouds are integrated exactly; other measures by Monte Carlo over
/// `count` draws on streams `(seed, ns, major, chunk)`.
pub fn norm_moment(spec: &MeasureSpec, q: f64, count: usize, seed: u64, ns: u64, major: u64) -> Result<NormMoment> {
    spec.validate()?;
    if !(q > 0.0) {
        return Err(Error::InvalidArgument(format!("moment order must be positive, got {q}")));
    }
    if let MeasureSpec::PointCloud { points, weights } = spec {
        let terms: Vec<f64> = points.iter().zip(weights).map(|(p, w)| w * norm(p).powf(q)).collect();
        return Ok(NormMoment {
            estimate: pairwise_sum(&terms),
            stderr: 0.0,
            analytic_upper: None,
        });
    }
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let parts = par_chunks(count, seed, ns, major, |rng: &mut StreamRng, range| {
        let vals: Vec<f64> = range.map(|_| norm(&spec.draw(rng)).powf(q)).collect();
        Moments::from_slice(&vals)
    });
    let m = Moments::merge_all(&parts);
    let analytic_upper = match spec {
        MeasureSpec::UniformBox { dim, lower, upper } => {
            Some((*dim as f64).powf(q / 2.0) * lower.abs().powf(q).max(upper.abs().powf(q)))
        }
        _ => None,
    };
    Ok(NormMoment {
        estimate: m.mean,
        stderr: m.stderr(),
        analytic_upper,
    })
}
