//! Exact ReLU networks for basket and rainbow payoffs, and the multichannel
//! composition `x -> (1/n) sum_i phi(A_i x + b_i)`.

use crate::affine::AffineMap;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{Layer, Network};

fn require_nonempty(c: &[f64]) -> Result<()> {
    if c.is_empty() {
        Err(Error::InvalidArgument("payoff weight vector is empty".into()))
    } else {
        Ok(())
    }
}

/// `max{<c, x> - K, 0}` with dims `(d, 1, 1)`.
pub fn basket_call_net(c: &[f64], strike: f64) -> Result<Network> {
    require_nonempty(c)?;
    Network::new(vec![
        Layer::new(Matrix::from_row_major(1, c.len(), c.to_vec()), vec![-strike]),
        Layer::new(Matrix::from_rows(&[vec![1.0]]), vec![0.0]),
    ])
}

/// `max{K - <c, x>, 0}`: the call network with `c -> -c`, `K -> -K`.
pub fn basket_put_net(c: &[f64], strike: f64) -> Result<Network> {
    require_nonempty(c)?;
    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
    basket_call_net(&neg, -strike)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Extremum {
    Max,
    Min,
}

/// `max{max_i c_i x_i - K, 0}`.
///
/// Dims are `(d, 2(d-1)+1, 2(d-2)+1, ..., 3, 1, 1)`: hidden layer `k` keeps a
/// running maximum via `max{a, b} = (a - b)^+ + b` next to `(±c_j x_j)^+` for
/// the coordinates not yet merged. For `d = 1` this is the basket call.
pub fn call_on_max_net(c: &[f64], strike: f64) -> Result<Network> {
    rainbow_net(c, strike, Extremum::Max)
}

/// `max{min_i c_i x_i - K, 0}`, via `min{a, b} = -(a - b)^+ + a`.
pub fn call_on_min_net(c: &[f64], strike: f64) -> Result<Network> {
    rainbow_net(c, strike, Extremum::Min)
}

fn rainbow_net(c: &[f64], strike: f64, kind: Extremum) -> Result<Network> {
    require_nonempty(c)?;
    let d = c.len();
    if d == 1 {
        return basket_call_net(c, strike);
    }
    // Sign of the running-extremum entry: (x_{k+1} - m)^+ for min, (m - x_{k+1})^+ for max.
    let s = if kind == Extremum::Max { 1.0 } else { -1.0 };
    let mut layers = Vec::with_capacity(d + 1);

    // Layer 1: rows (s(c_1 x_1 - c_2 x_2))^+, then (±c_j x_j)^+ for j = 2..d.
    let width = 2 * (d - 1) + 1;
    let mut w = Matrix::zeros(width, d);
    w[(0, 0)] = s * c[0];
    w[(0, 1)] = -s * c[1];
    for j in 1..d {
        w[(2 * j - 1, j)] = c[j];
        w[(2 * j, j)] = -c[j];
    }
    layers.push(Layer::new(w, vec![0.0; width]));

    // Layers 2..d-1 merge the next coordinate into the running extremum.
    for k in 1..d - 1 {
        let cols = 2 * (d - k) + 1;
        let rows = 2 * (d - k) - 1;
        let mut w = Matrix::zeros(rows, cols);
        // extremum(m, c_{k+1} x_{k+1}) minus c_{k+2} x_{k+2}, times s.
        let head = [1.0, s, -s, -s, s];
        w.row_mut(0)[..5].copy_from_slice(&head);
        for r in 1..rows {
            // Pass-through of (±c_j x_j)^+ via (u - v)^+ and (v - u)^+.
            let (u, v) = if r % 2 == 1 { (1.0, -1.0) } else { (-1.0, 1.0) };
            let base = 3 + 2 * ((r - 1) / 2);
            w[(r, base)] = u;
            w[(r, base + 1)] = v;
        }
        layers.push(Layer::new(w, vec![0.0; rows]));
    }

    // Layer d: extremum of the last pair, minus the strike.
    let tail = if kind == Extremum::Max {
        vec![1.0, 1.0, -1.0]
    } else {
        vec![-1.0, 1.0, -1.0]
    };
    layers.push(Layer::new(Matrix::from_row_major(1, 3, tail), vec![-strike]));
    layers.push(Layer::new(Matrix::from_rows(&[vec![1.0]]), vec![0.0]));
    Network::new(layers)
}

/// Builds `psi` with `R(psi)(x) = (1/n) sum_i R(phi)(A_i x + b_i)`.
///
/// Hidden layers of `phi` are stacked block-diagonally, the first layer
/// absorbs the maps (`W_1 A_i`, `W_1 b_i + B_1`) and the output row is
/// `(1/n)(W_N | ... | W_N)` with bias `B_N`.
pub fn multichannel(phi: &Network, maps: &[AffineMap]) -> Result<Network> {
    let n = maps.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "multichannel composition needs at least one channel".into(),
        ));
    }
    let d = phi.input_dim();
    for (i, m) in maps.iter().enumerate() {
        if m.dim() != d {
            return Err(Error::InvalidArgument(format!(
                "channel {} map acts on R^{} but the network expects R^{d}",
                i + 1,
                m.dim()
            )));
        }
    }
    let src = phi.layers();
    let last = src.len() - 1;
    let mut layers = Vec::with_capacity(src.len());

    let first = &src[0];
    let u1 = first.out_dim();
    let mut w1 = Matrix::zeros(n * u1, d);
    let mut b1 = Vec::with_capacity(n * u1);
    for (i, m) in maps.iter().enumerate() {
        let wa = first.weights.mul(m.matrix())?;
        for r in 0..u1 {
            w1.row_mut(i * u1 + r).copy_from_slice(wa.row(r));
        }
        let wb = first.weights.mul_vec(m.offset())?;
        b1.extend(wb.iter().zip(&first.bias).map(|(a, b)| a + b));
    }
    layers.push(Layer::new(w1, b1));

    for layer in &src[1..last] {
        let (rows, cols) = (layer.out_dim(), layer.in_dim());
        let mut w = Matrix::zeros(n * rows, n * cols);
        for i in 0..n {
            for r in 0..rows {
                w.row_mut(i * rows + r)[i * cols..(i + 1) * cols]
                    .copy_from_slice(layer.weights.row(r));
            }
        }
        let b = layer.bias.iter().copied().cycle().take(n * rows).collect();
        layers.push(Layer::new(w, b));
    }

    let out = &src[last];
    let scale = 1.0 / n as f64;
    let row: Vec<f64> = (0..n)
        .flat_map(|_| out.weights.row(0).iter().map(|v| scale * v))
        .collect();
    layers.push(Layer::new(
        Matrix::from_row_major(1, n * out.in_dim(), row),
        out.bias.clone(),
    ));
    Network::new(layers)
}

/// `(param_count, nonzero_param_count)` of `multichannel(phi, maps)`,
/// computed without allocating the block matrices.
pub fn multichannel_counts(phi: &Network, maps: &[AffineMap]) -> Result<(usize, usize)> {
    let n = maps.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "multichannel composition needs at least one channel".into(),
        ));
    }
    let d = phi.input_dim();
    let nnz = |v: &[f64]| v.iter().filter(|x| **x != 0.0).count();
    let src = phi.layers();
    let last = src.len() - 1;
    let first = &src[0];
    let mut total = n * first.out_dim() * (d + 1);
    let mut nonzero = 0;
    for m in maps {
        if m.dim() != d {
            return Err(Error::Dimension { expected: d, got: m.dim() });
        }
        nonzero += nnz(first.weights.mul(m.matrix())?.as_slice());
        let wb = first.weights.mul_vec(m.offset())?;
        let b: Vec<f64> = wb.iter().zip(&first.bias).map(|(a, b)| a + b).collect();
        nonzero += nnz(&b);
    }
    for layer in &src[1..last] {
        total += n * layer.out_dim() * (n * layer.in_dim() + 1);
        nonzero += n * (nnz(layer.weights.as_slice()) + nnz(&layer.bias));
    }
    let out = &src[last];
    let scale = 1.0 / n as f64;
    total += n * out.in_dim() + 1;
    let scaled: Vec<f64> = out.weights.row(0).iter().map(|v| scale * v).collect();
    nonzero += n * nnz(&scaled) + nnz(&out.bias);
    Ok((total, nonzero))
}
