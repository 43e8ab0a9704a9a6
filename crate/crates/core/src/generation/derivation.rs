//! Rule-application trees witnessing that a network is generated by the
//! rules, and their JSON step-list form.
//!
//! [`derive`] works by induction on the vertex count: remove the
//! lexicographically smallest output node `h`; if what remains is connected
//! `h` came from growth on it, otherwise from convergence of its components,
//! each derived recursively.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{apply_convergence, apply_growth, apply_neuron, apply_variable, Dag, Links, Neuron, ScalarNet};
use crate::error::{Error, Result};
use crate::graph::{CapsuleFn, CapsuleGraph, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub enum Derivation {
    Variable(NodeId),
    Neuron {
        links: Links,
        neuron: Neuron,
    },
    Growth {
        base: Box<Derivation>,
        links: Links,
        neuron: Neuron,
    },
    Convergence {
        bases: Vec<Derivation>,
        links: Vec<Links>,
        neuron: Neuron,
    },
}

/// How many times each rule occurs in a derivation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RuleCounts {
    pub variable: usize,
    pub neuron: usize,
    pub growth: usize,
    pub convergence: usize,
}

impl Derivation {
    pub fn rule_counts(&self) -> RuleCounts {
        let mut c = RuleCounts::default();
        self.visit(&mut |d| match d {
            Derivation::Variable(_) => c.variable += 1,
            Derivation::Neuron { .. } => c.neuron += 1,
            Derivation::Growth { .. } => c.growth += 1,
            Derivation::Convergence { .. } => c.convergence += 1,
        });
        c
    }

    /// Post-order traversal.
    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Derivation)) {
        match self {
            Derivation::Growth { base, .. } => base.visit(f),
            Derivation::Convergence { bases, .. } => bases.iter().for_each(|b| b.visit(f)),
            _ => {}
        }
        f(self);
    }

    pub fn to_json(&self) -> String {
        let mut steps = Vec::new();
        flatten(self, &mut steps);
        let mut s = serde_json::to_string_pretty(&DerivationDocument { steps }).expect("derivations serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DerivationDocument = serde_json::from_str(text)?;
        doc.into_derivation()
    }
}

/// Executes the rule applications bottom-up.
pub fn replay(d: &Derivation) -> Result<ScalarNet> {
    match d {
        Derivation::Variable(x) => Ok(apply_variable(x.clone())),
        Derivation::Neuron { links, neuron } => apply_neuron(links, neuron.clone()),
        Derivation::Growth { base, links, neuron } => apply_growth(&replay(base)?, links, neuron.clone()),
        Derivation::Convergence { bases, links, neuron } => {
            let nets = bases.iter().map(replay).collect::<Result<Vec<_>>>()?;
            apply_convergence(&nets, links, neuron.clone())
        }
    }
}

/// Rule sequence generating `net`, parameters included, so that
/// `replay(derive(net))` reproduces `net` up to element order.
pub fn derive(net: &ScalarNet) -> Result<Derivation> {
    let g = net.graph();
    let all: BTreeSet<NodeId> = g.node_ids().cloned().collect();
    derive_subgraph(g, &all)
}

/// Derivation of any connected capsule DAG's structure: the skeleton's
/// induced network with sigmoid activations, zero biases and unit weights.
pub fn derive_structure(g: &CapsuleGraph) -> Result<Derivation> {
    let net = match ScalarNet::from_graph(g.clone()) {
        Ok(net) => net,
        Err(_) => Dag::from_graph(g).induced_default()?,
    };
    derive(&net)
}

fn neuron_of(g: &CapsuleGraph, id: &NodeId) -> Neuron {
    let node = g.capsule(id).expect("non-input vertex is a capsule");
    Neuron::new(id.clone(), node.cap, node.bias.data()[0])
}

fn links_into(g: &CapsuleGraph, h: &NodeId, within: &BTreeSet<NodeId>) -> Links {
    g.incoming(h)
        .into_iter()
        .filter(|e| within.contains(&e.src))
        .map(|e| (e.src.clone(), e.weight.as_ref().map_or(1.0, |w| w.data()[0])))
        .collect()
}

fn derive_subgraph(g: &CapsuleGraph, vertices: &BTreeSet<NodeId>) -> Result<Derivation> {
    if vertices.len() == 1 {
        let v = vertices.first().expect("one vertex");
        if g.input(v).is_none() {
            return Err(Error::InvalidValues(format!("isolated non-input vertex `{v}`")));
        }
        return Ok(Derivation::Variable(v.clone()));
    }
    let has_out: BTreeSet<&NodeId> = g
        .edges()
        .iter()
        .filter(|e| vertices.contains(&e.src) && vertices.contains(&e.dst))
        .map(|e| &e.src)
        .collect();
    let h = vertices
        .iter()
        .find(|v| !has_out.contains(v))
        .ok_or_else(|| Error::CycleDetected(vertices.iter().map(|v| v.to_string()).collect()))?
        .clone();
    let mut rest = vertices.clone();
    rest.remove(&h);
    let neuron = neuron_of(g, &h);
    let components = components(g, &rest);
    if components.len() == 1 {
        let links = links_into(g, &h, &rest);
        let base = derive_subgraph(g, &rest)?;
        return Ok(Derivation::Growth {
            base: Box::new(base),
            links,
            neuron,
        });
    }
    let mut bases = Vec::with_capacity(components.len());
    let mut links = Vec::with_capacity(components.len());
    for comp in &components {
        bases.push(derive_subgraph(g, comp)?);
        links.push(links_into(g, &h, comp));
    }
    Ok(Derivation::Convergence { bases, links, neuron })
}

/// Weakly connected components of the subgraph induced by `vertices`,
/// ordered by their smallest id.
fn components(g: &CapsuleGraph, vertices: &BTreeSet<NodeId>) -> Vec<BTreeSet<NodeId>> {
    let mut adjacent: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for e in g.edges() {
        if vertices.contains(&e.src) && vertices.contains(&e.dst) {
            adjacent.entry(&e.src).or_default().push(&e.dst);
            adjacent.entry(&e.dst).or_default().push(&e.src);
        }
    }
    let mut seen: BTreeSet<&NodeId> = BTreeSet::new();
    let mut out = Vec::new();
    for v in vertices {
        if seen.contains(v) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![v];
        seen.insert(v);
        while let Some(u) = stack.pop() {
            comp.insert(u.clone());
            for &w in adjacent.get(u).into_iter().flatten() {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        out.push(comp);
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DerivationDocument {
    steps: Vec<Step>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase", deny_unknown_fields)]
enum Step {
    Variable {
        node: String,
    },
    Neuron {
        node: String,
        cap: String,
        bias: f64,
        subset: Vec<String>,
        weights: Vec<f64>,
    },
    Growth {
        base: usize,
        node: String,
        cap: String,
        bias: f64,
        subset: Vec<String>,
        weights: Vec<f64>,
    },
    Convergence {
        bases: Vec<usize>,
        node: String,
        cap: String,
        bias: f64,
        subsets: Vec<Vec<String>>,
        weights: Vec<Vec<f64>>,
    },
}

fn split_links(links: &Links) -> (Vec<String>, Vec<f64>) {
    links.iter().map(|(id, w)| (id.to_string(), *w)).unzip()
}

fn join_links(subset: Vec<String>, weights: Vec<f64>) -> Result<Links> {
    if subset.len() != weights.len() {
        return Err(Error::Format(format!(
            "{} subset ids but {} weights",
            subset.len(),
            weights.len()
        )));
    }
    Ok(subset.into_iter().map(NodeId::new).zip(weights).collect())
}

fn flatten(d: &Derivation, steps: &mut Vec<Step>) -> usize {
    let step = match d {
        Derivation::Variable(x) => Step::Variable { node: x.to_string() },
        Derivation::Neuron { links, neuron } => {
            let (subset, weights) = split_links(links);
            Step::Neuron {
                node: neuron.id.to_string(),
                cap: neuron.activation.name().into(),
                bias: neuron.bias,
                subset,
                weights,
            }
        }
        Derivation::Growth { base, links, neuron } => {
            let base = flatten(base, steps);
            let (subset, weights) = split_links(links);
            Step::Growth {
                base,
                node: neuron.id.to_string(),
                cap: neuron.activation.name().into(),
                bias: neuron.bias,
                subset,
                weights,
            }
        }
        Derivation::Convergence { bases, links, neuron } => {
            let bases = bases.iter().map(|b| flatten(b, steps)).collect();
            let (subsets, weights) = links.iter().map(split_links).unzip();
            Step::Convergence {
                bases,
                node: neuron.id.to_string(),
                cap: neuron.activation.name().into(),
                bias: neuron.bias,
                subsets,
                weights,
            }
        }
    };
    steps.push(step);
    steps.len() - 1
}

impl DerivationDocument {
    fn into_derivation(self) -> Result<Derivation> {
        let n = self.steps.len();
        if n == 0 {
            return Err(Error::Format("derivation has no steps".into()));
        }
        let mut built: Vec<Option<Derivation>> = Vec::with_capacity(n);
        let take = |built: &mut Vec<Option<Derivation>>, i: usize, at: usize| -> Result<Derivation> {
            if i >= at {
                return Err(Error::Format(format!("step {at} refers to later step {i}")));
            }
            built[i]
                .take()
                .ok_or_else(|| Error::Format(format!("step {i} is used more than once")))
        };
        for (at, step) in self.steps.into_iter().enumerate() {
            let neuron = |node: String, cap: &str, bias: f64| -> Result<Neuron> {
                Ok(Neuron::new(node, CapsuleFn::from_name(cap, None)?, bias))
            };
            let d = match step {
                Step::Variable { node } => Derivation::Variable(NodeId::new(node)),
                Step::Neuron {
                    node,
                    cap,
                    bias,
                    subset,
                    weights,
                } => Derivation::Neuron {
                    links: join_links(subset, weights)?,
                    neuron: neuron(node, &cap, bias)?,
                },
                Step::Growth {
                    base,
                    node,
                    cap,
                    bias,
                    subset,
                    weights,
                } => Derivation::Growth {
                    base: Box::new(take(&mut built, base, at)?),
                    links: join_links(subset, weights)?,
                    neuron: neuron(node, &cap, bias)?,
                },
                Step::Convergence {
                    bases,
                    node,
                    cap,
                    bias,
                    subsets,
                    weights,
                } => {
                    if subsets.len() != weights.len() {
                        return Err(Error::Format("subsets and weights differ in length".into()));
                    }
                    let bases = bases
                        .into_iter()
                        .map(|b| take(&mut built, b, at))
                        .collect::<Result<Vec<_>>>()?;
                    let links = subsets
                        .into_iter()
                        .zip(weights)
                        .map(|(s, w)| join_links(s, w))
                        .collect::<Result<Vec<_>>>()?;
                    Derivation::Convergence {
                        bases,
                        links,
                        neuron: neuron(node, &cap, bias)?,
                    }
                }
            };
            built.push(Some(d));
        }
        let root = built.pop().flatten().expect("last step was just pushed");
        if let Some(i) = built.iter().position(Option::is_some) {
            return Err(Error::Format(format!("step {i} is never used")));
        }
        Ok(root)
    }
}
