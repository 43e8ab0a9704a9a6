use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{check_shape, num_elements, Tensor};

/// How an edge combines its weight with the source node's output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeightingOp {
    /// `→`: passes the source output through unchanged.
    IdentityTransfer,
    /// Rank-0 weight times the source tensor.
    ScalarMult,
    /// `×`: `[m,n]` weight times a `[n]` or `[n,p]` source.
    MatMul,
    /// `∗`: `[k,c,kh,kw]` kernels over a `[c,h,w]` source.
    Conv2d,
    /// `◁`: reinterprets the source with a new shape.
    Reshape(Vec<usize>),
}

impl WeightingOp {
    pub fn requires_weight(&self) -> bool {
        matches!(self, WeightingOp::ScalarMult | WeightingOp::MatMul | WeightingOp::Conv2d)
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightingOp::IdentityTransfer => "identity_transfer",
            WeightingOp::ScalarMult => "scalar_mult",
            WeightingOp::MatMul => "matmul",
            WeightingOp::Conv2d => "conv2d",
            WeightingOp::Reshape(_) => "reshape",
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            WeightingOp::IdentityTransfer => "→",
            WeightingOp::ScalarMult => "·",
            WeightingOp::MatMul => "×",
            WeightingOp::Conv2d => "∗",
            WeightingOp::Reshape(_) => "◁",
        }
    }

    /// Shape of `weight ⊗ source` for the given operand shapes.
    pub fn output_shape(&self, weight: Option<&[usize]>, src: &[usize]) -> Result<Vec<usize>> {
        if self.requires_weight() != weight.is_some() {
            return Err(Error::shape(format!(
                "{} {} a weight",
                self.name(),
                if self.requires_weight() { "requires" } else { "takes no" }
            )));
        }
        match (self, weight) {
            (WeightingOp::IdentityTransfer, _) => Ok(src.to_vec()),
            (WeightingOp::ScalarMult, Some(w)) => {
                if !w.is_empty() {
                    return Err(Error::shape(format!("scalar_mult weight must be rank 0, got {w:?}")));
                }
                Ok(src.to_vec())
            }
            (WeightingOp::MatMul, Some(w)) => match (w, src) {
                ([m, n], [k]) if n == k => Ok(vec![*m]),
                ([m, n], [k, p]) if n == k => Ok(vec![*m, *p]),
                _ => Err(Error::shape(format!("matmul {w:?} × {src:?}"))),
            },
            (WeightingOp::Conv2d, Some(w)) => match (w, src) {
                ([k, c, kh, kw], [sc, h, wd]) if c == sc && kh <= h && kw <= wd => {
                    Ok(vec![*k, h - kh + 1, wd - kw + 1])
                }
                _ => Err(Error::shape(format!("conv2d kernels {w:?} over {src:?}"))),
            },
            (WeightingOp::Reshape(target), _) => {
                check_shape(target)?;
                if num_elements(target) != num_elements(src) {
                    return Err(Error::shape(format!("reshape {src:?} -> {target:?}")));
                }
                Ok(target.clone())
            }
            _ => unreachable!("weight presence checked above"),
        }
    }

    /// Computes `weight ⊗ source`.
    pub fn apply(&self, weight: Option<&Tensor>, src: &Tensor) -> Result<Tensor> {
        match (self, weight) {
            (WeightingOp::IdentityTransfer, None) => Ok(src.clone()),
            (WeightingOp::ScalarMult, Some(w)) => {
                let w = scalar_weight(w)?;
                src.scale(w)
            }
            (WeightingOp::MatMul, Some(w)) => w.matmul(src),
            (WeightingOp::Conv2d, Some(w)) => src.conv2d(w),
            (WeightingOp::Reshape(target), None) => src.reshape(target),
            (op, w) => Err(Error::shape(format!(
                "{} called with{} weight",
                op.name(),
                if w.is_some() { "" } else { "out" }
            ))),
        }
    }
}

pub(crate) fn scalar_weight(w: &Tensor) -> Result<f64> {
    if w.rank() != 0 {
        return Err(Error::shape(format!("scalar_mult weight must be rank 0, got {:?}", w.shape())));
    }
    Ok(w.data()[0])
}

impl fmt::Display for WeightingOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightingOp::Reshape(t) => write!(f, "reshape{t:?}"),
            op => f.write_str(op.name()),
        }
    }
}

/// The nonlinearity a capsule applies to its total input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapsuleFn {
    Identity,
    Sigmoid,
    Tanh,
    Relu,
    /// Rank-1 inputs only.
    Softmax,
    /// `(‖s‖²/(1+‖s‖²))·s/‖s‖` over the whole tensor.
    Squash,
    /// `↓`: mean pooling over non-overlapping windows. The node's bias is
    /// added after pooling.
    Downsample(usize),
}

impl CapsuleFn {
    pub const SCALAR_ACTIVATIONS: [CapsuleFn; 4] =
        [CapsuleFn::Identity, CapsuleFn::Sigmoid, CapsuleFn::Tanh, CapsuleFn::Relu];

    pub fn name(&self) -> &'static str {
        match self {
            CapsuleFn::Identity => "identity",
            CapsuleFn::Sigmoid => "sigmoid",
            CapsuleFn::Tanh => "tanh",
            CapsuleFn::Relu => "relu",
            CapsuleFn::Softmax => "softmax",
            CapsuleFn::Squash => "squash",
            CapsuleFn::Downsample(_) => "downsample",
        }
    }

    pub fn from_name(name: &str, arg: Option<usize>) -> Result<Self> {
        let cap = match (name, arg) {
            ("identity", None) => CapsuleFn::Identity,
            ("sigmoid", None) => CapsuleFn::Sigmoid,
            ("tanh", None) => CapsuleFn::Tanh,
            ("relu", None) => CapsuleFn::Relu,
            ("softmax", None) => CapsuleFn::Softmax,
            ("squash", None) => CapsuleFn::Squash,
            ("downsample", Some(s)) if s >= 1 => CapsuleFn::Downsample(s),
            ("downsample", _) => return Err(Error::Format("downsample needs cap_arg ≥ 1".into())),
            (n, Some(_)) => return Err(Error::Format(format!("capsule `{n}` takes no cap_arg"))),
            (n, None) => return Err(Error::Format(format!("unknown capsule function `{n}`"))),
        };
        Ok(cap)
    }

    pub fn arg(&self) -> Option<usize> {
        match self {
            CapsuleFn::Downsample(s) => Some(*s),
            _ => None,
        }
    }

    /// Elementwise activations usable in scalar networks.
    pub fn is_scalar_activation(&self) -> bool {
        Self::SCALAR_ACTIVATIONS.contains(self)
    }

    /// Shape the incoming weighted sum must have for a node whose output
    /// (and bias) has shape `out`.
    pub fn input_shape_for(&self, out: &[usize]) -> Result<Vec<usize>> {
        match self {
            CapsuleFn::Softmax if out.len() != 1 => {
                Err(Error::shape(format!("softmax needs a rank-1 tensor, got {out:?}")))
            }
            CapsuleFn::Downsample(s) => match out {
                [c, h, w] if *s >= 1 => Ok(vec![*c, h * s, w * s]),
                _ => Err(Error::shape(format!(
                    "downsample({s}) needs a [c,h,w] output and a positive window, got {out:?}"
                ))),
            },
            _ => Ok(out.to_vec()),
        }
    }
}

impl fmt::Display for CapsuleFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapsuleFn::Downsample(s) => write!(f, "downsample({s})"),
            c => f.write_str(c.name()),
        }
    }
}
