//! Dense feed-forward networks, their realization and parameter counts.
//!
//! A [`Network`] is a list of affine layers `(W_k, B_k)`, `k = 1..L`, with
//! `L >= 2` and output width 1. Its realization applies the activation
//! componentwise after every layer except the last one.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// One affine layer `x -> W x + B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Self {
        Layer { weights, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Activation applied componentwise on hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    /// Turns the realization into a plain composition of affine maps.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    /// Validates the shape chain and wraps the layers.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidNetwork(format!(
                "need at least 2 layers (one hidden), got {}",
                layers.len()
            )));
        }
        for (k, layer) in layers.iter().enumerate() {
            let idx = k + 1;
            if layer.out_dim() == 0 || layer.in_dim() == 0 {
                return Err(Error::Shape {
                    layer: idx,
                    detail: "zero-width layer".into(),
                });
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::Shape {
                    layer: idx,
                    detail: format!(
                        "bias has length {} but weights have {} rows",
                        layer.bias.len(),
                        layer.out_dim()
                    ),
                });
            }
            if k > 0 && layer.in_dim() != layers[k - 1].out_dim() {
                return Err(Error::Shape {
                    layer: idx,
                    detail: format!(
                        "weights have {} columns but previous layer has width {}",
                        layer.in_dim(),
                        layers[k - 1].out_dim()
                    ),
                });
            }
        }
        if layers.last().map(Layer::out_dim) != Some(1) {
            return Err(Error::InvalidNetwork("output width must be 1".into()));
        }
        Ok(Network { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Number of affine layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Layer widths `(l_0, l_1, ..., l_L)`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    /// ReLU realization.
    pub fn realize(&self, x: &[f64]) -> Result<f64> {
        self.realize_with(Activation::Relu, x)
    }

    pub fn realize_with(&self, activation: Activation, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                layer: 1,
                detail: format!(
                    "input has length {} but layer expects {}",
                    x.len(),
                    self.input_dim()
                ),
            });
        }
        Ok(self.realize_unchecked(activation, x))
    }

    pub(crate) fn realize_unchecked(&self, activation: Activation, x: &[f64]) -> f64 {
        let last = self.layers.len() - 1;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            next.clear();
            next.resize(layer.out_dim(), 0.0);
            layer.weights.mul_vec_into(&cur, &mut next);
            for (v, b) in next.iter_mut().zip(&layer.bias) {
                *v += b;
                if k < last {
                    *v = activation.apply(*v);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    /// Total parameter count `sum_k l_k (l_{k-1} + 1)`, zeros included.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.out_dim() * (l.in_dim() + 1))
            .sum()
    }

    /// Number of strictly nonzero weight and bias entries.
    pub fn nonzero_param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weights.as_slice().iter().filter(|v| **v != 0.0).count()
                    + l.bias.iter().filter(|v| **v != 0.0).count()
            })
            .sum()
    }

    /// Writes the `ANNv1` text format.
    pub fn save<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "ANNv1")?;
        let dims: Vec<String> = self.dims().iter().map(usize::to_string).collect();
        writeln!(sink, "{}", dims.join(" "))?;
        for layer in &self.layers {
            for i in 0..layer.out_dim() {
                write_row(&mut sink, layer.weights.row(i))?;
            }
            write_row(&mut sink, &layer.bias)?;
        }
        sink.flush()?;
        Ok(())
    }

    /// Reads the `ANNv1` text format.
    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        let lines: Vec<String> = source.lines().collect::<std::io::Result<_>>()?;
        let mut cursor = LineCursor { lines: &lines, pos: 0 };

        match cursor.next().map(str::trim) {
            Some("ANNv1") => {}
            Some(other) => {
                return Err(Error::Parse {
                    line: 1,
                    detail: format!("malformed header: expected `ANNv1`, found `{other}`"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    detail: "empty input: expected header `ANNv1`".into(),
                })
            }
        }

        let widths_line = cursor.next().ok_or_else(|| Error::Parse {
            line: 2,
            detail: "truncated file: expected layer widths".into(),
        })?;
        let mut dims = Vec::new();
        for (col, tok) in widths_line.split_whitespace().enumerate() {
            let w: usize = tok.parse().map_err(|_| Error::Parse {
                line: 2,
                detail: format!("token {} (`{tok}`) is not a layer width", col + 1),
            })?;
            if w == 0 {
                return Err(Error::Parse {
                    line: 2,
                    detail: format!("token {} is a zero layer width", col + 1),
                });
            }
            dims.push(w);
        }
        if dims.len() < 3 {
            return Err(Error::Parse {
                line: 2,
                detail: format!(
                    "need at least 3 layer widths (input, hidden, output), got {}",
                    dims.len()
                ),
            });
        }
        if *dims.last().unwrap() != 1 {
            return Err(Error::Parse {
                line: 2,
                detail: "output width must be 1".into(),
            });
        }

        let expected_total: usize = dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        let mut read_total = 0usize;
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (cols, rows) = (w[0], w[1]);
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                data.extend(cursor.numbers(cols, expected_total, read_total)?);
                read_total += cols;
            }
            let bias = cursor.numbers(rows, expected_total, read_total)?;
            read_total += rows;
            layers.push(Layer::new(Matrix::from_row_major(rows, cols, data), bias));
        }
        while let Some(rest) = cursor.next() {
            if !rest.trim().is_empty() {
                return Err(Error::Parse {
                    line: cursor.pos,
                    detail: format!("unexpected trailing content after {expected_total} values"),
                });
            }
        }
        Network::new(layers)
    }
}

struct LineCursor<'a> {
    lines: &'a [String],
    /// 1-based number of the last line returned.
    pos: usize,
}

impl<'a> LineCursor<'a> {
    fn next(&mut self) -> Option<&'a str> {
        let line = self.lines.get(self.pos)?;
        self.pos += 1;
        Some(line.as_str())
    }

    fn numbers(&mut self, count: usize, expected_total: usize, read_so_far: usize) -> Result<Vec<f64>> {
        let line = self.next().ok_or_else(|| Error::Parse {
            line: self.pos + 1,
            detail: format!(
                "truncated file: expected {expected_total} numeric values in total, found {read_so_far}"
            ),
        })?;
        let mut out = Vec::with_capacity(count);
        for (col, tok) in line.split_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: self.pos,
                detail: format!("token {} (`{tok}`) is not a number", col + 1),
            })?;
            out.push(v);
        }
        if out.len() != count {
            return Err(Error::Parse {
                line: self.pos,
                detail: format!("expected {count} values on this line, found {}", out.len()),
            });
        }
        Ok(out)
    }
}

fn write_row<W: Write>(sink: &mut W, row: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for v in row {
        if !first {
            sink.write_all(b" ")?;
        }
        first = false;
        write!(sink, "{}", fmt_f64(*v))?;
    }
    sink.write_all(b"\n")
}

/// Shortest round-trip decimal; exponent form outside the comfortable range.
pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny(w1: f64, w2: f64) -> Network {
        Network::new(vec![
            Layer::new(Matrix::from_rows(&[vec![w1]]), vec![0.0]),
            Layer::new(Matrix::from_rows(&[vec![w2]]), vec![0.0]),
        ])
        .unwrap()
    }

    #[test]
    fn relu_of_negative_and_positive_input() {
        let net = tiny(1.0, 1.0);
        assert_eq!(net.realize(&[-2.0]).unwrap(), 0.0);
        assert_eq!(net.realize(&[3.0]).unwrap(), 3.0);
    }

    #[test]
    fn identity_activation_is_linear() {
        let net = tiny(1.0, 1.0);
        assert_eq!(net.realize_with(Activation::Identity, &[-2.0]).unwrap(), -2.0);
    }

    #[test]
    fn counts_of_width_one_net() {
        assert_eq!(tiny(1.0, 1.0).param_count(), 4);
        assert_eq!(tiny(0.0, 0.0).nonzero_param_count(), 0);
        assert_eq!(tiny(2.0, 0.0).nonzero_param_count(), 1);
    }

    #[test]
    fn wrong_input_length_names_layer() {
        let err = tiny(1.0, 1.0).realize(&[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Shape { layer: 1, .. }));
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        let single = vec![Layer::new(Matrix::from_rows(&[vec![1.0]]), vec![0.0])];
        assert!(Network::new(single).is_err());

        let broken_chain = vec![
            Layer::new(Matrix::zeros(2, 1), vec![0.0; 2]),
            Layer::new(Matrix::zeros(1, 3), vec![0.0]),
        ];
        assert!(matches!(
            Network::new(broken_chain),
            Err(Error::Shape { layer: 2, .. })
        ));

        let wide_output = vec![
            Layer::new(Matrix::zeros(2, 1), vec![0.0; 2]),
            Layer::new(Matrix::zeros(2, 2), vec![0.0; 2]),
        ];
        assert_eq!(
            Network::new(wide_output).unwrap_err().to_string(),
            "invalid network: output width must be 1"
        );

        let short_bias = vec![
            Layer::new(Matrix::zeros(2, 1), vec![0.0]),
            Layer::new(Matrix::zeros(1, 2), vec![0.0]),
        ];
        assert!(matches!(
            Network::new(short_bias),
            Err(Error::Shape { layer: 1, .. })
        ));
    }

    fn to_text(net: &Network) -> String {
        let mut buf = Vec::new();
        net.save(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn file_layout() {
        let net = Network::new(vec![
            Layer::new(Matrix::from_rows(&[vec![0.5, -0.25]]), vec![-1.0]),
            Layer::new(Matrix::from_rows(&[vec![1.0]]), vec![0.0]),
        ])
        .unwrap();
        assert_eq!(to_text(&net), "ANNv1\n2 1 1\n0.5 -0.25\n-1\n1\n0\n");
    }

    #[test]
    fn load_rejects_wide_output() {
        let text = "ANNv1\n1 1 2\n1\n0\n1\n1\n0 0\n";
        let err = Network::load(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("output width must be 1"), "{err}");
    }

    #[test]
    fn load_reports_truncation_with_expected_count() {
        let text = "ANNv1\n2 1 1\n0.5 -0.25\n";
        let err = Network::load(text.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 5 numeric values"), "{msg}");
        assert!(msg.contains("found 2"), "{msg}");
    }

    #[test]
    fn load_reports_bad_header_and_tokens() {
        let err = Network::load("ANNv2\n1 1 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = Network::load("ANNv1\n1 1 1\n1\nzero\n1\n0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        assert!(err.to_string().contains("`zero`"));
        let err = Network::load("ANNv1\n1 1 1\n1 2\n0\n1\n0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    fn arb_network() -> impl Strategy<Value = Network> {
        prop::collection::vec(1usize..5, 2..5).prop_flat_map(|mut dims| {
            dims.push(1);
            let shapes: Vec<(usize, usize)> = dims.windows(2).map(|w| (w[1], w[0])).collect();
            let value = prop_oneof![
                Just(0.0),
                -1e3f64..1e3,
                any::<f64>().prop_filter("finite", |v| v.is_finite()),
            ];
            let layers: Vec<_> = shapes
                .into_iter()
                .map(|(r, c)| {
                    (
                        prop::collection::vec(value.clone(), r * c),
                        prop::collection::vec(value.clone(), r),
                    )
                        .prop_map(move |(w, b)| Layer::new(Matrix::from_row_major(r, c, w), b))
                })
                .collect();
            layers.prop_map(|ls| Network::new(ls).unwrap())
        })
    }

    proptest! {
        #[test]
        fn save_load_is_bit_exact(net in arb_network()) {
            let text = to_text(&net);
            let back = Network::load(text.as_bytes()).unwrap();
            for (a, b) in net.layers().iter().zip(back.layers()) {
                for (x, y) in a.weights.as_slice().iter().zip(b.weights.as_slice()) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
                for (x, y) in a.bias.iter().zip(&b.bias) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            prop_assert_eq!(net.dims(), back.dims());
        }

        #[test]
        fn nonzero_count_never_exceeds_total(net in arb_network()) {
            prop_assert!(net.nonzero_param_count() <= net.param_count());
        }

        #[test]
        fn realization_is_continuous(x in prop::collection::vec(-3.0f64..3.0, 3), seedw in prop::collection::vec(-2.0f64..2.0, 12 + 4 + 5)) {
            let l1 = Layer::new(Matrix::from_row_major(4, 3, seedw[..12].to_vec()), seedw[12..16].to_vec());
            let l2 = Layer::new(Matrix::from_row_major(1, 4, seedw[16..20].to_vec()), vec![seedw[20]]);
            let net = Network::new(vec![l1, l2]).unwrap();
            let h = 1e-7;
            let base = net.realize(&x).unwrap();
            for j in 0..3 {
                let mut y = x.clone();
                y[j] += h;
                let moved = net.realize(&y).unwrap();
                // Lipschitz constant is at most 4 * 2 * (3 * 2) for these weights.
                prop_assert!((moved - base).abs() <= 48.0 * h + 1e-12);
            }
        }

        #[test]
        fn output_layer_scales_affinely(x in prop::collection::vec(-3.0f64..3.0, 2), s in -5.0f64..5.0) {
            let l1 = Layer::new(Matrix::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0]]), vec![0.1, -0.2]);
            let l2 = Layer::new(Matrix::from_rows(&[vec![1.5, -0.5]]), vec![0.3]);
            let base = Network::new(vec![l1.clone(), l2.clone()]).unwrap();
            let w: Vec<f64> = l2.weights.as_slice().iter().map(|v| v * s).collect();
            let scaled = Network::new(vec![l1, Layer::new(Matrix::from_row_major(1, 2, w), vec![0.3 * s])]).unwrap();
            let a = base.realize(&x).unwrap();
            let b = scaled.realize(&x).unwrap();
            prop_assert!((b - s * a).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
