//! Affine maps `x -> A x + b` on R^d: evaluation, black-box recovery, a
//! sampled affinity test and linear-growth constants.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, Matrix};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    matrix: Matrix,
    offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(matrix: Matrix, offset: Vec<f64>) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::InvalidArgument(format!(
                "affine map matrix must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        check_dim(matrix.rows(), offset.len())?;
        Ok(AffineMap { matrix, offset })
    }

    pub fn identity(d: usize) -> Self {
        AffineMap {
            matrix: Matrix::identity(d),
            offset: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// `A x + b`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.matrix.mul_vec_unchecked(x);
        for (v, b) in y.iter_mut().zip(&self.offset) {
            *v += b;
        }
        y
    }

    /// `c = max{|A|_F, |b|}`; then `|A x + b| <= c (1 + |x|)` and the map is
    /// `c`-Lipschitz.
    pub fn growth_constant(&self) -> f64 {
        self.matrix.frobenius_norm().max(norm(&self.offset))
    }
}

/// Reads off `b = f(0)` and the columns `A e_j = f(e_j) - f(0)`.
///
/// Correct whenever `f` is affine; see [`check_affine`].
pub fn recover_affine<F>(f: F, d: usize) -> Result<AffineMap>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let origin = vec![0.0; d];
    let offset = f(&origin);
    check_dim(d, offset.len())?;
    let mut matrix = Matrix::zeros(d, d);
    let mut probe = origin;
    for j in 0..d {
        probe[j] = 1.0;
        let image = f(&probe);
        if image.len() != d {
            return Err(Error::InvalidArgument(format!(
                "black-box output changed dimension: f(0) has {d} entries, f(e_{}) has {}",
                j + 1,
                image.len()
            )));
        }
        for i in 0..d {
            matrix[(i, j)] = image[i] - offset[i];
        }
        probe[j] = 0.0;
    }
    AffineMap::new(matrix, offset)
}

/// Sampled test of `f(λx + y) + λ f(0) = λ f(x) + f(y)`, which characterizes
/// affine maps. Points are drawn from `[-2, 2]^d`, `λ` from `[-3, 3]`; the
/// residual must stay below `tol * (1 + |f(x)| + |f(y)|)` on every trial.
pub fn check_affine<F>(f: F, d: usize, trials: usize, tol: f64, seed: u64) -> bool
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut rng: ChaCha8Rng = stream_rng(seed, 0);
    let f0 = f(&vec![0.0; d]);
    (0..trials.max(1)).all(|_| {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..=2.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..=2.0)).collect();
        let lambda: f64 = rng.random_range(-3.0..=3.0);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| lambda * a + b).collect();
        let (fx, fy, fc) = (f(&x), f(&y), f(&combo));
        if fx.len() != f0.len() || fy.len() != f0.len() || fc.len() != f0.len() {
            return false;
        }
        let residual: Vec<f64> = (0..f0.len())
            .map(|i| fc[i] + lambda * f0[i] - lambda * fx[i] - fy[i])
            .collect();
        norm(&residual) <= tol * (1.0 + norm(&fx) + norm(&fy))
    })
}

/// Affine maps of the form `x -> [g(x)]` for scalar functions, for use with
/// [`check_affine`].
pub fn lift_scalar<G: Fn(&[f64]) -> f64>(g: G) -> impl Fn(&[f64]) -> Vec<f64> {
    move |x| vec![g(x)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::basket_call_net;
    use crate::linalg::Matrix;

    fn random_map(rng: &mut ChaCha8Rng, d: usize) -> AffineMap {
        let a: Vec<f64> = (0..d * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        AffineMap::new(Matrix::from_row_major(d, d, a), b).unwrap()
    }

    #[test]
    fn apply_examples() {
        assert_eq!(AffineMap::identity(2).apply(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        let constant = AffineMap::new(Matrix::zeros(2, 2), vec![3.0, 4.0]).unwrap();
        assert_eq!(constant.apply(&[9.0, -7.0]).unwrap(), vec![3.0, 4.0]);
        let scalar = AffineMap::new(Matrix::from_rows(&[vec![2.0]]), vec![1.0]).unwrap();
        assert_eq!(scalar.apply(&[3.0]).unwrap(), vec![7.0]);
        assert!(scalar.apply(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn constructor_rejects_non_square() {
        assert!(AffineMap::new(Matrix::zeros(2, 3), vec![0.0; 2]).is_err());
        assert!(AffineMap::new(Matrix::zeros(2, 2), vec![0.0; 3]).is_err());
    }

    #[test]
    fn recover_scalar_and_zero_maps() {
        let m = recover_affine(|x| vec![3.0 * x[0] + 2.0], 1).unwrap();
        assert_eq!(m.matrix()[(0, 0)], 3.0);
        assert_eq!(m.offset(), &[2.0]);
        let z = recover_affine(|_| vec![0.0; 3], 3).unwrap();
        assert_eq!(z.matrix(), &Matrix::zeros(3, 3));
        assert_eq!(z.offset(), &[0.0; 3]);
    }

    #[test]
    fn recover_rejects_inconsistent_output() {
        let err = recover_affine(|x| if x[1] == 1.0 { vec![0.0] } else { vec![0.0; 2] }, 2);
        assert!(err.is_err());
    }

    #[test]
    fn recover_round_trip_random_maps() {
        let mut rng = stream_rng(11, 0);
        for trial in 0..100 {
            let d = 1 + trial % 16;
            let m = random_map(&mut rng, d);
            let back = recover_affine(|x| m.apply(x).unwrap(), d).unwrap();
            assert!(back.matrix().max_abs_diff(m.matrix()) <= 1e-12);
            for (a, b) in back.offset().iter().zip(m.offset()) {
                assert!((a - b).abs() <= 1e-12);
            }
            assert!(check_affine(|x| m.apply(x).unwrap(), d, 20, 1e-12, trial as u64));
            for _ in 0..10 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
                let (u, v) = (m.apply(&x).unwrap(), back.apply(&x).unwrap());
                assert!(u.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-10 * (1.0 + a.abs())));
            }
        }
    }

    #[test]
    fn square_fails_affinity_test() {
        // Residual at (x, y, λ) = (1, 0, 2) is 4 - 2 = 2.
        let sq = |x: &[f64]| vec![x[0] * x[0]];
        assert_eq!(sq(&[2.0])[0] + 2.0 * sq(&[0.0])[0] - 2.0 * sq(&[1.0])[0] - sq(&[0.0])[0], 2.0);
        assert!(!check_affine(sq, 1, 100, 1e-6, 3));
    }

    #[test]
    fn relu_net_fails_affinity_test() {
        let net = basket_call_net(&[1.0, -1.0], 0.0).unwrap();
        assert!(!check_affine(lift_scalar(|x| net.realize(x).unwrap()), 2, 200, 1e-9, 5));
    }

    #[test]
    fn growth_constant_examples() {
        assert!((AffineMap::identity(2).growth_constant() - 2f64.sqrt()).abs() < 1e-15);
        let constant = AffineMap::new(Matrix::zeros(2, 2), vec![3.0, 4.0]).unwrap();
        assert_eq!(constant.growth_constant(), 5.0);
    }

    #[test]
    fn growth_constant_bounds_hold() {
        let mut rng = stream_rng(12, 0);
        for _ in 0..20 {
            let d = rng.random_range(1..8);
            let m = random_map(&mut rng, d);
            let c = m.growth_constant();
            for _ in 0..1000 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
                let y: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
                let (mx, my) = (m.apply(&x).unwrap(), m.apply(&y).unwrap());
                assert!(norm(&mx) <= c * (1.0 + norm(&x)) * (1.0 + 1e-12));
                let diff: Vec<f64> = mx.iter().zip(&my).map(|(a, b)| a - b).collect();
                let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                assert!(norm(&diff) <= c * norm(&dx) * (1.0 + 1e-12));
            }
        }
    }
}
