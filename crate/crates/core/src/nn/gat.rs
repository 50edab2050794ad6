//! Single-head graph attention layer.
//!
//! For node features `h` the layer computes `z = W h`, edge logits
//! `e_ij = LeakyReLU(a^T [z_i || z_j])`, attention `alpha_ij` as the softmax
//! of `e_ij` over `j` in the neighborhood of `i` (self included), and
//! output `sigma(sum_j alpha_ij z_j)`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::Matrix;
use super::tape::{Neighborhoods, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Elu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatLayer {
    /// `out_dim x in_dim`.
    pub weight: Matrix,
    /// `2*out_dim x 1`; the first half scores the receiving node.
    pub attention: Matrix,
    pub negative_slope: f64,
    pub activation: Activation,
}

/// Glorot-uniform matrix.
pub fn glorot<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
) -> Matrix {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-s..=s)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

impl GatLayer {
    pub fn new<R: Rng + ?Sized>(
        rng: &mut R,
        in_dim: usize,
        out_dim: usize,
        negative_slope: f64,
        activation: Activation,
    ) -> Self {
        Self {
            weight: glorot(rng, out_dim, in_dim, in_dim, out_dim),
            attention: glorot(rng, 2 * out_dim, 1, 2 * out_dim, 1),
            negative_slope,
            activation,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            attention: Matrix::zeros(2 * out_dim, 1),
            negative_slope: 0.2,
            activation: Activation::Elu,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn params(&self) -> [&Matrix; 2] {
        [&self.weight, &self.attention]
    }

    pub fn params_mut(&mut self) -> [&mut Matrix; 2] {
        [&mut self.weight, &mut self.attention]
    }

    /// Forward pass with the layer's parameters bound to `weight` and
    /// `attention` leaves on the tape.
    pub fn forward_bound<'t>(
        &self,
        weight: Var<'t>,
        attention: Var<'t>,
        x: Var<'t>,
        nbh: &Arc<Neighborhoods>,
    ) -> Result<Var<'t>> {
        let (n, f) = x.shape();
        if f != self.in_dim() {
            return Err(Error::Dimension(format!(
                "GAT layer expects {} input features, got {f}",
                self.in_dim()
            )));
        }
        if n != nbh.node_count() {
            return Err(Error::Dimension(format!(
                "{n} feature rows for {} nodes",
                nbh.node_count()
            )));
        }
        let out = self.out_dim();
        let z = x.matmul_t(weight)?;
        let a_src = attention.slice_rows(0, out)?;
        let a_dst = attention.slice_rows(out, out)?;
        let s_src = z.matmul(a_src)?;
        let s_dst = z.matmul(a_dst)?;
        let e = s_src
            .edge_scores(s_dst, nbh)?
            .leaky_relu(self.negative_slope);
        let alpha = e.segment_softmax(nbh)?;
        let agg = alpha.edge_aggregate(z, nbh)?;
        Ok(match self.activation {
            Activation::Elu => agg.elu(),
            Activation::Identity => agg,
        })
    }

    /// Standalone forward over `features` (N x in_dim).
    pub fn forward(&self, features: &Matrix, nbh: &Arc<Neighborhoods>) -> Result<Matrix> {
        let tape = Tape::new();
        let w = tape.leaf(self.weight.clone());
        let a = tape.leaf(self.attention.clone());
        let x = tape.leaf(features.clone());
        Ok(self.forward_bound(w, a, x, nbh)?.value())
    }

    /// Attention coefficients per edge, in neighborhood order.
    pub fn attention_coefficients(
        &self,
        features: &Matrix,
        nbh: &Arc<Neighborhoods>,
    ) -> Result<Matrix> {
        let tape = Tape::new();
        let w = tape.leaf(self.weight.clone());
        let a = tape.leaf(self.attention.clone());
        let x = tape.leaf(features.clone());
        let out = self.out_dim();
        let z = x.matmul_t(w)?;
        let s_src = z.matmul(a.slice_rows(0, out)?)?;
        let s_dst = z.matmul(a.slice_rows(out, out)?)?;
        let e = s_src
            .edge_scores(s_dst, nbh)?
            .leaky_relu(self.negative_slope);
        Ok(e.segment_softmax(nbh)?.value())
    }
}

/// Layer forward on plain matrices, for tests and external checks.
pub fn gat_forward(
    layer: &GatLayer,
    features: &Matrix,
    nbh: &Arc<Neighborhoods>,
) -> Result<Matrix> {
    layer.forward(features, nbh)
}
