//! Model zoo: the MLP and CNN capsule paths plus the small fixture graphs
//! used throughout the tests and examples.
//!
//! Builders leave every parameter at zero; use [`crate::trainer::init_params`]
//! for a trainable starting point.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::generation::{apply_convergence, apply_growth, apply_neuron, apply_variable, unit_links, Neuron, ScalarNet};
use crate::graph::{self, CapsuleFn, CapsuleGraph, NodeId, WeightingOp};
use crate::tensor::Tensor;

/// `(edge op, capsule)` per stage of the CNN capsule path.
pub const CNN_STAGE_PATTERN: [(&str, &str); 6] = [
    ("conv2d", "relu"),
    ("identity_transfer", "downsample"),
    ("conv2d", "relu"),
    ("identity_transfer", "downsample"),
    ("reshape", "identity"),
    ("matmul", "softmax"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub hidden: CapsuleFn,
    pub output: CapsuleFn,
}

impl Default for MlpSpec {
    /// Widths 5, 7, 7, 7, 4 with sigmoid capsules throughout.
    fn default() -> Self {
        MlpSpec {
            widths: vec![5, 7, 7, 7, 4],
            hidden: CapsuleFn::Sigmoid,
            output: CapsuleFn::Sigmoid,
        }
    }
}

/// Path `X → H1 → … → O`, every edge a matrix multiplication.
pub fn build_mlp(spec: &MlpSpec) -> Result<CapsuleGraph> {
    if spec.widths.len() < 2 {
        return Err(Error::InvalidSpec("an MLP needs at least two widths".into()));
    }
    if spec.widths.contains(&0) {
        return Err(Error::InvalidSpec("layer widths must be positive".into()));
    }
    for cap in [spec.hidden, spec.output] {
        if matches!(cap, CapsuleFn::Downsample(_)) {
            return Err(Error::InvalidSpec("downsample needs [c,h,w] feature maps".into()));
        }
    }
    let layers = spec.widths.len() - 1;
    let name = |i: usize| match i {
        0 => "X".to_string(),
        i if i == layers => "O".to_string(),
        i => format!("H{i}"),
    };
    let mut g = CapsuleGraph::new().with_input(name(0), &[spec.widths[0]]);
    for i in 1..=layers {
        let cap = if i == layers { spec.output } else { spec.hidden };
        let (n_in, n_out) = (spec.widths[i - 1], spec.widths[i]);
        g = g
            .with_capsule(name(i), cap, Tensor::zeros(&[n_out]))
            .with_edge(name(i - 1), name(i), WeightingOp::MatMul, Some(Tensor::zeros(&[n_out, n_in])));
    }
    Ok(g)
}

/// One convolution stage: `kernels` square kernels of side `size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvStage {
    pub kernels: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnnSpec {
    /// `[c, h, w]`.
    pub input: [usize; 3],
    pub conv1: ConvStage,
    pub conv2: ConvStage,
    pub window: usize,
    pub classes: usize,
}

impl Default for CnnSpec {
    /// 1×12×12 input, 4 kernels of 3×3, window 2, 8 kernels of 2×2, window 2,
    /// 10 classes: stages [4,10,10], [4,5,5], [8,4,4], [8,2,2], [32], [10].
    fn default() -> Self {
        CnnSpec {
            input: [1, 12, 12],
            conv1: ConvStage { kernels: 4, size: 3 },
            conv2: ConvStage { kernels: 8, size: 2 },
            window: 2,
            classes: 10,
        }
    }
}

impl CnnSpec {
    /// 1×8×8 input, 2 kernels of 3×3, 3 kernels of 2×2, window 2, 4 classes.
    pub fn small() -> Self {
        CnnSpec {
            input: [1, 8, 8],
            conv1: ConvStage { kernels: 2, size: 3 },
            conv2: ConvStage { kernels: 3, size: 2 },
            window: 2,
            classes: 4,
        }
    }

    /// Output shapes of H1 … O.
    pub fn stage_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let [c, h, w] = self.input;
        if c == 0 || h == 0 || w == 0 || self.classes == 0 || self.window == 0 {
            return Err(Error::InvalidSpec("extents, window and class count must be positive".into()));
        }
        let conv = |(h, w): (usize, usize), st: ConvStage, which: &str| -> Result<(usize, usize)> {
            if st.kernels == 0 || st.size == 0 || st.size > h || st.size > w {
                return Err(Error::InvalidSpec(format!(
                    "{which}: {} kernels of {s}×{s} do not fit a {h}×{w} map",
                    st.kernels,
                    s = st.size
                )));
            }
            Ok((h - st.size + 1, w - st.size + 1))
        };
        let pool = |(h, w): (usize, usize), which: &str| -> Result<(usize, usize)> {
            if h % self.window != 0 || w % self.window != 0 {
                return Err(Error::InvalidSpec(format!(
                    "{which}: window {} does not divide a {h}×{w} map",
                    self.window
                )));
            }
            Ok((h / self.window, w / self.window))
        };
        let (k1, k2) = (self.conv1.kernels, self.conv2.kernels);
        let s1 = conv((h, w), self.conv1, "H1")?;
        let s2 = pool(s1, "H2")?;
        let s3 = conv(s2, self.conv2, "H3")?;
        let s4 = pool(s3, "H4")?;
        Ok(vec![
            vec![k1, s1.0, s1.1],
            vec![k1, s2.0, s2.1],
            vec![k2, s3.0, s3.1],
            vec![k2, s4.0, s4.1],
            vec![k2 * s4.0 * s4.1],
            vec![self.classes],
        ])
    }
}

/// Path `X ∗ H1 → H2 ∗ H3 → H4 ◁ H5 × O` with ReLU, downsample, ReLU,
/// downsample, identity and softmax capsules.
pub fn build_cnn(spec: &CnnSpec) -> Result<CapsuleGraph> {
    let shapes = spec.stage_shapes()?;
    let [c, _, _] = spec.input;
    let (k1, k2) = (spec.conv1.kernels, spec.conv2.kernels);
    let (s1, s2) = (spec.conv1.size, spec.conv2.size);
    let flat = shapes[4][0];
    let g = CapsuleGraph::new()
        .with_input("X", &spec.input)
        .with_capsule("H1", CapsuleFn::Relu, Tensor::zeros(&shapes[0]))
        .with_capsule("H2", CapsuleFn::Downsample(spec.window), Tensor::zeros(&shapes[1]))
        .with_capsule("H3", CapsuleFn::Relu, Tensor::zeros(&shapes[2]))
        .with_capsule("H4", CapsuleFn::Downsample(spec.window), Tensor::zeros(&shapes[3]))
        .with_capsule("H5", CapsuleFn::Identity, Tensor::zeros(&shapes[4]))
        .with_capsule("O", CapsuleFn::Softmax, Tensor::zeros(&shapes[5]))
        .with_edge("X", "H1", WeightingOp::Conv2d, Some(Tensor::zeros(&[k1, c, s1, s1])))
        .with_edge("H1", "H2", WeightingOp::IdentityTransfer, None)
        .with_edge("H2", "H3", WeightingOp::Conv2d, Some(Tensor::zeros(&[k2, k1, s2, s2])))
        .with_edge("H3", "H4", WeightingOp::IdentityTransfer, None)
        .with_edge("H4", "H5", WeightingOp::Reshape(vec![flat]), None)
        .with_edge("H5", "O", WeightingOp::MatMul, Some(Tensor::zeros(&[spec.classes, flat])));
    Ok(g)
}

/// True when the graph is a single directed path.
pub fn is_path(g: &CapsuleGraph) -> bool {
    path_order(g).is_ok()
}

/// Nodes of a directed path from its input to its output.
pub fn path_order(g: &CapsuleGraph) -> Result<Vec<NodeId>> {
    let report = graph::validate(g);
    if !report.is_ok() {
        return Err(Error::InvalidGraph(report));
    }
    let not_path = || Error::InvalidSpec("graph is not a directed path".into());
    if g.inputs().len() != 1 {
        return Err(not_path());
    }
    let mut order = vec![g.inputs()[0].id.clone()];
    loop {
        let out = g.outgoing(order.last().expect("nonempty"));
        match out.as_slice() {
            [] => break,
            [e] if g.incoming(&e.dst).len() == 1 => order.push(e.dst.clone()),
            _ => return Err(not_path()),
        }
    }
    if order.len() != g.node_count() {
        return Err(not_path());
    }
    Ok(order)
}

/// `(incoming op, capsule)` name pairs along a path, input excluded.
pub fn path_stages(g: &CapsuleGraph) -> Result<Vec<(&'static str, &'static str)>> {
    let order = path_order(g)?;
    Ok(order[1..]
        .iter()
        .map(|id| {
            let op = g.incoming(id)[0].op.name();
            let cap = g.capsule(id).expect("non-input path node").cap.name();
            (op, cap)
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub graph: CapsuleGraph,
}

fn sig(id: &str) -> Neuron {
    Neuron::new(id, CapsuleFn::Sigmoid, 0.0)
}

fn scalar(name: &str, net: Result<ScalarNet>) -> Fixture {
    Fixture {
        name: name.into(),
        graph: net.expect("fixture construction").into_graph(),
    }
}

/// The one-input-one-neuron network `x1 → h1`.
pub fn one_in_one_n() -> ScalarNet {
    apply_neuron(&unit_links(&["x1"]), sig("h1")).expect("valid rule application")
}

/// The two-input-one-neuron network `x1, x2 → h1`.
pub fn two_in_one_n() -> ScalarNet {
    apply_neuron(&unit_links(&["x1", "x2"]), sig("h1")).expect("valid rule application")
}

/// `x1 → h1`, `x2 → h2`, `{h1, h2} → h3`: needs the rule of convergence.
pub fn fig8c() -> ScalarNet {
    let a = apply_neuron(&unit_links(&["x1"]), sig("h1")).expect("valid");
    let b = apply_neuron(&unit_links(&["x2"]), sig("h2")).expect("valid");
    apply_convergence(&[a, b], &[unit_links(&["h1"]), unit_links(&["h2"])], sig("h3")).expect("valid")
}

/// XOR learner built by the rules: neuron `h1` on `{x1, x2}`, growth of `h2`
/// on `{x1, x2}`, growth of the output `o` on `{h1, h2}`. All sigmoid.
pub fn xor_network() -> ScalarNet {
    let net = apply_neuron(&unit_links(&["x1", "x2"]), sig("h1")).expect("valid");
    let net = apply_growth(&net, &unit_links(&["x1", "x2"]), sig("h2")).expect("valid");
    apply_growth(&net, &unit_links(&["h1", "h2"]), sig("o")).expect("valid")
}

/// `y = w·x + b` as one identity capsule.
pub fn linear_unit() -> CapsuleGraph {
    CapsuleGraph::new()
        .with_input("x", &[])
        .with_capsule("y", CapsuleFn::Identity, Tensor::scalar(0.0))
        .with_edge("x", "y", WeightingOp::ScalarMult, Some(Tensor::scalar(0.0)))
}

/// `x → a`, `x → b` (matmul; tanh and sigmoid), `a → c` (identity transfer),
/// `b → c` (scalar multiplication), with a squash capsule at `c`.
pub fn tensor_diamond() -> CapsuleGraph {
    CapsuleGraph::new()
        .with_input("x", &[3])
        .with_capsule("a", CapsuleFn::Tanh, Tensor::zeros(&[4]))
        .with_capsule("b", CapsuleFn::Sigmoid, Tensor::zeros(&[4]))
        .with_capsule("c", CapsuleFn::Squash, Tensor::zeros(&[4]))
        .with_edge("x", "a", WeightingOp::MatMul, Some(Tensor::zeros(&[4, 3])))
        .with_edge("x", "b", WeightingOp::MatMul, Some(Tensor::zeros(&[4, 3])))
        .with_edge("a", "c", WeightingOp::IdentityTransfer, None)
        .with_edge("b", "c", WeightingOp::ScalarMult, Some(Tensor::scalar(0.0)))
}

/// Two inputs and two outputs exercising every weighting operation:
/// an image path (conv → ReLU, pool, reshape) and a matrix path
/// (`[4,4] × [4,2]`, reshape) merging at a squash capsule that feeds a
/// softmax classifier and a tanh head.
pub fn capsule_mix() -> CapsuleGraph {
    CapsuleGraph::new()
        .with_input("img", &[1, 6, 6])
        .with_input("aux", &[4, 2])
        .with_capsule("conv", CapsuleFn::Relu, Tensor::zeros(&[2, 4, 4]))
        .with_capsule("pool", CapsuleFn::Downsample(2), Tensor::zeros(&[2, 2, 2]))
        .with_capsule("mat", CapsuleFn::Identity, Tensor::zeros(&[4, 2]))
        .with_capsule("caps", CapsuleFn::Squash, Tensor::zeros(&[8]))
        .with_capsule("class", CapsuleFn::Softmax, Tensor::zeros(&[3]))
        .with_capsule("head", CapsuleFn::Tanh, Tensor::zeros(&[8]))
        .with_edge("img", "conv", WeightingOp::Conv2d, Some(Tensor::zeros(&[2, 1, 3, 3])))
        .with_edge("conv", "pool", WeightingOp::IdentityTransfer, None)
        .with_edge("aux", "mat", WeightingOp::MatMul, Some(Tensor::zeros(&[4, 4])))
        .with_edge("pool", "caps", WeightingOp::Reshape(vec![8]), None)
        .with_edge("mat", "caps", WeightingOp::Reshape(vec![8]), None)
        .with_edge("caps", "class", WeightingOp::MatMul, Some(Tensor::zeros(&[3, 8])))
        .with_edge("caps", "head", WeightingOp::ScalarMult, Some(Tensor::scalar(0.0)))
}

/// The seven growth results on `x1, x2 → h1`, one per nonempty subset of
/// `{x1, x2, h1}` in bitmask order.
pub fn fig7_family() -> Vec<ScalarNet> {
    let base = two_in_one_n();
    let ids = base.node_ids();
    (1u32..8)
        .map(|mask| {
            let subset: Vec<&str> = ids
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, id)| id.as_str())
                .collect();
            apply_growth(&base, &unit_links(&subset), sig("h2")).expect("valid")
        })
        .collect()
}

/// Every named fixture, all of which validate.
pub fn fixtures() -> Vec<Fixture> {
    let base = one_in_one_n();
    let mut out = vec![
        scalar("trivial", Ok(apply_variable("x1"))),
        scalar("1in1n", Ok(base.clone())),
        scalar("fig4a", apply_growth(&base, &unit_links(&["h1"]), sig("h2"))),
        scalar("fig4b", apply_growth(&base, &unit_links(&["x1"]), sig("h2"))),
        scalar("fig4c", apply_growth(&base, &unit_links(&["x1", "h1"]), sig("h2"))),
        scalar("2in1n", Ok(two_in_one_n())),
    ];
    for (i, net) in fig7_family().into_iter().enumerate() {
        out.push(scalar(&format!("fig7{}", (b'a' + i as u8) as char), Ok(net)));
    }
    out.extend([
        scalar("fig8a", apply_neuron(&unit_links(&["x1"]), sig("h1"))),
        scalar("fig8b", apply_neuron(&unit_links(&["x2"]), sig("h2"))),
        scalar("fig8c", Ok(fig8c())),
        scalar("xor", Ok(xor_network())),
        Fixture {
            name: "linear".into(),
            graph: linear_unit(),
        },
        Fixture {
            name: "diamond".into(),
            graph: tensor_diamond(),
        },
        Fixture {
            name: "capsule_mix".into(),
            graph: capsule_mix(),
        },
        Fixture {
            name: "mlp".into(),
            graph: build_mlp(&MlpSpec::default()).expect("default spec"),
        },
        Fixture {
            name: "cnn".into(),
            graph: build_cnn(&CnnSpec::default()).expect("default spec"),
        },
        Fixture {
            name: "cnn_small".into(),
            graph: build_cnn(&CnnSpec::small()).expect("small spec"),
        },
    ]);
    out
}

/// Looks up a fixture by name.
pub fn fixture(name: &str) -> Option<CapsuleGraph> {
    fixtures().into_iter().find(|f| f.name == name).map(|f| f.graph)
}

/// Names accepted by [`fixture`].
pub fn fixture_names() -> BTreeSet<String> {
    fixtures().into_iter().map(|f| f.name).collect()
}
