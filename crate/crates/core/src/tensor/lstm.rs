use super::Tensor;
use crate::error::{Error, Result};

/// Weights of a forget-gate LSTM cell.
///
/// Rows are grouped in blocks of `hidden` in the order input, forget,
/// candidate, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `4H x D`
    pub weight_ih: Tensor,
    /// `4H x H`
    pub weight_hh: Tensor,
    /// `4H`
    pub bias: Tensor,
}

impl LstmParams {
    pub fn new(weight_ih: Tensor, weight_hh: Tensor, bias: Tensor) -> Result<Self> {
        let p = LstmParams {
            weight_ih,
            weight_hh,
            bias,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn hidden_size(&self) -> usize {
        self.weight_hh.shape()[1]
    }

    pub fn input_size(&self) -> usize {
        self.weight_ih.shape()[1]
    }

    fn validate(&self) -> Result<()> {
        let (rows_ih, _) = self.weight_ih.dims2()?;
        let (rows_hh, hidden) = self.weight_hh.dims2()?;
        if rows_hh != 4 * hidden || rows_ih != rows_hh || self.bias.shape() != [rows_hh] {
            return Err(Error::Shape(format!(
                "lstm: weight_ih {:?}, weight_hh {:?}, bias {:?} are inconsistent",
                self.weight_ih.shape(),
                self.weight_hh.shape(),
                self.bias.shape()
            )));
        }
        Ok(())
    }
}

pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

const ROW_BLOCK: usize = 8;

/// `acc[k] += sum_d w[k * cols + d] * x[d]` for each row `k`.
fn accumulate_rows(acc: &mut [f32], w: &[f32], cols: usize, x: &[f32]) {
    if acc.len() == ROW_BLOCK {
        let mut a: [f32; ROW_BLOCK] = acc.try_into().expect("block length");
        let rows: [&[f32]; ROW_BLOCK] = std::array::from_fn(|k| &w[k * cols..(k + 1) * cols]);
        let x = &x[..cols];
        for d in 0..cols {
            let v = x[d];
            for k in 0..ROW_BLOCK {
                a[k] += rows[k][..cols][d] * v;
            }
        }
        acc.copy_from_slice(&a);
    } else {
        for (k, a) in acc.iter_mut().enumerate() {
            for (wv, v) in w[k * cols..(k + 1) * cols].iter().zip(x) {
                *a += wv * v;
            }
        }
    }
}

/// One LSTM step: returns `(h', c')`.
///
/// Gate pre-activations are `bias + W_ih x + W_hh h`, accumulated in that
/// order.
pub fn lstm_step(x: &Tensor, h: &Tensor, c: &Tensor, params: &LstmParams) -> Result<(Tensor, Tensor)> {
    params.validate()?;
    let hidden = params.hidden_size();
    let input = params.input_size();
    if x.shape() != [input] || h.shape() != [hidden] || c.shape() != [hidden] {
        return Err(Error::Shape(format!(
            "lstm_step expects x [{input}], h/c [{hidden}]; got {:?}, {:?}, {:?}",
            x.shape(),
            h.shape(),
            c.shape()
        )));
    }
    let (wih, whh, b) = (params.weight_ih.data(), params.weight_hh.data(), params.bias.data());
    let (xd, hd) = (x.data(), h.data());
    let mut gates = b.to_vec();
    // rows in blocks so independent accumulations overlap; each row still
    // sums its terms in index order
    for (block, acc) in gates.chunks_mut(ROW_BLOCK).enumerate() {
        let r0 = block * ROW_BLOCK;
        accumulate_rows(acc, &wih[r0 * input..], input, xd);
        accumulate_rows(acc, &whh[r0 * hidden..], hidden, hd);
    }

    let mut h_next = Vec::with_capacity(hidden);
    let mut c_next = Vec::with_capacity(hidden);
    for u in 0..hidden {
        let i = sigmoid(gates[u]);
        let f = sigmoid(gates[hidden + u]);
        let g = gates[2 * hidden + u].tanh();
        let o = sigmoid(gates[3 * hidden + u]);
        let cn = f * c.data()[u] + i * g;
        c_next.push(cn);
        h_next.push(o * cn.tanh());
    }
    Ok((Tensor::new([hidden], h_next)?, Tensor::new([hidden], c_next)?))
}

/// `y = W x + b`, accumulated as `b + sum_d W[o, d] x[d]`.
pub fn affine(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (rows, cols) = weight.dims2()?;
    if x.shape() != [cols] || bias.shape() != [rows] {
        return Err(Error::Shape(format!(
            "affine: weight {:?} with x {:?} and bias {:?}",
            weight.shape(),
            x.shape(),
            bias.shape()
        )));
    }
    let w = weight.data();
    let out = (0..rows)
        .map(|r| {
            let mut acc = bias.data()[r];
            for (wv, xv) in w[r * cols..(r + 1) * cols].iter().zip(x.data()) {
                acc += wv * xv;
            }
            acc
        })
        .collect();
    Tensor::new([rows], out)
}
