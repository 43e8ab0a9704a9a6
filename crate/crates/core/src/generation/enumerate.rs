use std::collections::BTreeSet;

use super::{apply_growth, apply_neuron, canonical_form, unit_links, Links, Neuron, ScalarNet};
use crate::error::{Error, Result};
use crate::graph::CapsuleFn;

/// How [`enumerate_growth`] counts results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Semantics {
    /// Every derivation path counts, so one step from an `m`-node network
    /// gives `2^m − 1` results.
    Labeled,
    /// Results are deduplicated up to isomorphism with inputs distinguished.
    Iso,
}

impl std::str::FromStr for Semantics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labeled" => Ok(Semantics::Labeled),
            "iso" => Ok(Semantics::Iso),
            other => Err(Error::InvalidConfig(format!("unknown semantics `{other}` (labeled|iso)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub structures: Vec<ScalarNet>,
}

impl Enumeration {
    pub fn count(&self) -> usize {
        self.structures.len()
    }
}

/// The named base networks: `1in1n` (x1 → h1) and `2in1n` (x1, x2 → h1).
pub fn base_network(name: &str) -> Result<ScalarNet> {
    let inputs: &[&str] = match name {
        "1in1n" => &["x1"],
        "2in1n" => &["x1", "x2"],
        other => return Err(Error::InvalidConfig(format!("unknown base `{other}` (1in1n|2in1n)"))),
    };
    apply_neuron(&unit_links(inputs), Neuron::new("h1", CapsuleFn::Sigmoid, 0.0))
}

fn fresh_id(net: &ScalarNet) -> String {
    (1..)
        .map(|k| format!("h{k}"))
        .find(|id| !net.contains(&id.as_str().into()))
        .expect("some id is free")
}

/// Applies `steps` growth steps, branching over every nonempty subset of the
/// current node set. New nodes are sigmoid with zero bias and unit weights;
/// subsets are visited in bitmask order over the sorted node ids.
pub fn enumerate_growth(base: &ScalarNet, steps: usize, semantics: Semantics) -> Enumeration {
    let mut frontier = vec![base.clone()];
    for _ in 0..steps {
        let mut next = Vec::new();
        let mut seen = BTreeSet::new();
        for net in &frontier {
            let ids = net.node_ids();
            assert!(ids.len() < 64, "growth enumeration supports fewer than 64 nodes");
            let neuron = Neuron::new(fresh_id(net), CapsuleFn::Sigmoid, 0.0);
            for mask in 1u64..(1 << ids.len()) {
                let links: Links = ids
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, id)| (id.clone(), 1.0))
                    .collect();
                let grown = apply_growth(net, &links, neuron.clone()).expect("subset of existing nodes");
                if semantics == Semantics::Labeled || seen.insert(canonical_form(&grown)) {
                    next.push(grown);
                }
            }
        }
        frontier = next;
    }
    Enumeration { structures: frontier }
}
