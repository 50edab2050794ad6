//! Actor (voting policy) and critic (value) networks built from GAT layers.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::gat::{glorot, Activation, GatLayer};
use super::matrix::Matrix;
use super::tape::{Neighborhoods, Tape, Var};

/// Width of a node feature vector: one-hot land use (5), normalized area,
/// readjustable, assigned and is-target flags.
pub const NODE_FEATURES: usize = 9;
/// One action per land use.
pub const ACTIONS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub hidden_dim: usize,
    pub gat_layers: usize,
    pub negative_slope: f64,
    pub activation: Activation,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            gat_layers: 2,
            negative_slope: 0.2,
            activation: Activation::Elu,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.gat_layers == 0 {
            return Err(Error::Config(
                "hidden_dim and gat_layers must be positive".into(),
            ));
        }
        if !self.negative_slope.is_finite() {
            return Err(Error::Config("negative_slope must be finite".into()));
        }
        Ok(())
    }
}

fn gat_stack<R: Rng + ?Sized>(rng: &mut R, in_dim: usize, cfg: &NetConfig) -> Vec<GatLayer> {
    (0..cfg.gat_layers)
        .map(|l| {
            let fan_in = if l == 0 { in_dim } else { cfg.hidden_dim };
            GatLayer::new(
                rng,
                fan_in,
                cfg.hidden_dim,
                cfg.negative_slope,
                cfg.activation,
            )
        })
        .collect()
}

fn zero_stack(in_dim: usize, cfg: &NetConfig) -> Vec<GatLayer> {
    (0..cfg.gat_layers)
        .map(|l| {
            let mut layer =
                GatLayer::zeros(if l == 0 { in_dim } else { cfg.hidden_dim }, cfg.hidden_dim);
            layer.negative_slope = cfg.negative_slope;
            layer.activation = cfg.activation;
            layer
        })
        .collect()
}

fn run_stack<'t>(
    layers: &[GatLayer],
    vars: &[Var<'t>],
    mut x: Var<'t>,
    nbh: &Arc<Neighborhoods>,
) -> Result<Var<'t>> {
    for (l, layer) in layers.iter().enumerate() {
        x = layer.forward_bound(vars[2 * l], vars[2 * l + 1], x, nbh)?;
    }
    Ok(x)
}

/// Common parameter access for the actor and critic.
pub trait Parameterized {
    fn params(&self) -> Vec<&Matrix>;
    fn params_mut(&mut self) -> Vec<&mut Matrix>;
    fn param_names(&self) -> Vec<String>;

    /// Registers every parameter as a tape leaf, in `params()` order.
    fn bind<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.params()
            .into_iter()
            .map(|p| tape.leaf(p.clone()))
            .collect()
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

fn layer_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n)
        .flat_map(|l| {
            [
                format!("{prefix}.gat{l}.weight"),
                format!("{prefix}.gat{l}.attention"),
            ]
        })
        .collect()
}

/// GAT stack followed by a linear 5-way head and a per-node softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub layers: Vec<GatLayer>,
    /// `ACTIONS x hidden`.
    pub head_weight: Matrix,
    pub head_bias: Matrix,
}

impl PolicyNet {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, in_dim: usize, cfg: &NetConfig) -> Self {
        Self {
            layers: gat_stack(rng, in_dim, cfg),
            head_weight: glorot(rng, ACTIONS, cfg.hidden_dim, cfg.hidden_dim, ACTIONS),
            head_bias: Matrix::zeros(1, ACTIONS),
        }
    }

    pub fn zeros(in_dim: usize, cfg: &NetConfig) -> Self {
        Self {
            layers: zero_stack(in_dim, cfg),
            head_weight: Matrix::zeros(ACTIONS, cfg.hidden_dim),
            head_bias: Matrix::zeros(1, ACTIONS),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Per-node action probabilities (N x 5) on the tape.
    pub fn forward_bound<'t>(
        &self,
        vars: &[Var<'t>],
        x: Var<'t>,
        nbh: &Arc<Neighborhoods>,
    ) -> Result<Var<'t>> {
        let h = run_stack(&self.layers, vars, x, nbh)?;
        let k = 2 * self.layers.len();
        Ok(h.matmul_t(vars[k])?.add_row(vars[k + 1])?.row_softmax())
    }

    /// Per-node action probabilities (N x 5).
    pub fn node_policies(&self, features: &Matrix, nbh: &Arc<Neighborhoods>) -> Result<Matrix> {
        let tape = Tape::new();
        let vars = self.bind(&tape);
        let x = tape.leaf(features.clone());
        Ok(self.forward_bound(&vars, x, nbh)?.value())
    }

    /// Action distribution for the target node.
    pub fn policy_forward(
        &self,
        features: &Matrix,
        nbh: &Arc<Neighborhoods>,
        target: usize,
    ) -> Result<[f64; ACTIONS]> {
        if target >= nbh.node_count() {
            return Err(Error::Lookup(format!(
                "target node {target} not in a {}-node subgraph",
                nbh.node_count()
            )));
        }
        let probs = self.node_policies(features, nbh)?;
        let mut out = [0.0; ACTIONS];
        out.copy_from_slice(probs.row(target));
        Ok(out)
    }
}

impl Parameterized for PolicyNet {
    fn params(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = self.layers.iter().flat_map(|l| l.params()).collect();
        v.push(&self.head_weight);
        v.push(&self.head_bias);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = self
            .layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect();
        v.push(&mut self.head_weight);
        v.push(&mut self.head_bias);
        v
    }

    fn param_names(&self) -> Vec<String> {
        let mut v = layer_names("actor", self.layers.len());
        v.push("actor.head.weight".into());
        v.push("actor.head.bias".into());
        v
    }
}

/// GAT stack over `features || policy` per node, mean-pooled into a fully
/// connected scalar head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNet {
    pub layers: Vec<GatLayer>,
    /// `1 x hidden`.
    pub fc_weight: Matrix,
    pub fc_bias: Matrix,
}

impl ValueNet {
    /// `feature_dim` excludes the appended policy columns.
    pub fn new<R: Rng + ?Sized>(rng: &mut R, feature_dim: usize, cfg: &NetConfig) -> Self {
        Self {
            layers: gat_stack(rng, feature_dim + ACTIONS, cfg),
            fc_weight: glorot(rng, 1, cfg.hidden_dim, cfg.hidden_dim, 1),
            fc_bias: Matrix::zeros(1, 1),
        }
    }

    pub fn zeros(feature_dim: usize, cfg: &NetConfig) -> Self {
        Self {
            layers: zero_stack(feature_dim + ACTIONS, cfg),
            fc_weight: Matrix::zeros(1, cfg.hidden_dim),
            fc_bias: Matrix::zeros(1, 1),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.layers[0].in_dim() - ACTIONS
    }

    /// Scalar value (1x1) on the tape.
    pub fn forward_bound<'t>(
        &self,
        vars: &[Var<'t>],
        features: Var<'t>,
        policies: Var<'t>,
        nbh: &Arc<Neighborhoods>,
    ) -> Result<Var<'t>> {
        let (n, _) = features.shape();
        let (pn, pc) = policies.shape();
        if pn != n || pc != ACTIONS {
            return Err(Error::Dimension(format!(
                "policy outputs {pn}x{pc} do not align with {n} nodes x {ACTIONS} actions"
            )));
        }
        let f = features.concat_cols(policies)?;
        let h = run_stack(&self.layers, vars, f, nbh)?;
        let k = 2 * self.layers.len();
        h.mean_rows().matmul_t(vars[k])?.add(vars[k + 1])
    }

    pub fn value_forward(
        &self,
        features: &Matrix,
        policies: &Matrix,
        nbh: &Arc<Neighborhoods>,
    ) -> Result<f64> {
        let tape = Tape::new();
        let vars = self.bind(&tape);
        let x = tape.leaf(features.clone());
        let p = tape.leaf(policies.clone());
        Ok(self.forward_bound(&vars, x, p, nbh)?.item())
    }
}

impl Parameterized for ValueNet {
    fn params(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = self.layers.iter().flat_map(|l| l.params()).collect();
        v.push(&self.fc_weight);
        v.push(&self.fc_bias);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = self
            .layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect();
        v.push(&mut self.fc_weight);
        v.push(&mut self.fc_bias);
        v
    }

    fn param_names(&self) -> Vec<String> {
        let mut v = layer_names("critic", self.layers.len());
        v.push("critic.fc.weight".into());
        v.push("critic.fc.bias".into());
        v
    }
}

/// `p <- p - lr * g` for every parameter.
pub fn sgd_step(params: &mut [&mut Matrix], grads: &[Matrix], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Dimension(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(Error::Config(format!(
            "learning rate must be non-negative, got {lr}"
        )));
    }
    if let Some((p, g)) = params
        .iter()
        .zip(grads)
        .find(|(p, g)| p.shape() != g.shape())
    {
        return Err(Error::Dimension(format!(
            "parameter {:?} vs gradient {:?}",
            p.shape(),
            g.shape()
        )));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv -= lr * gv;
        }
    }
    Ok(())
}
