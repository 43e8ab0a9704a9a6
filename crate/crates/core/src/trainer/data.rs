//! Datasets and their CSV form.
//!
//! One row per sample; columns `in:<node>:<flat-index>` for every input entry
//! followed by `out:<node>:<flat-index>` for every target entry. Rank-0
//! tensors use index 0.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::forward::Inputs;
use crate::graph::{self, CapsuleGraph, NodeId};
use crate::tensor::{num_elements, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub inputs: Inputs,
    pub targets: BTreeMap<NodeId, Tensor>,
}

impl Sample {
    pub fn new(inputs: Inputs, targets: BTreeMap<NodeId, Tensor>) -> Self {
        Sample { inputs, targets }
    }

    /// A sample of rank-0 inputs and targets.
    pub fn scalars(inputs: &[(&str, f64)], targets: &[(&str, f64)]) -> Self {
        let map = |pairs: &[(&str, f64)]| pairs.iter().map(|&(id, v)| (NodeId::from(id), Tensor::scalar(v))).collect();
        Sample {
            inputs: map(inputs),
            targets: map(targets),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

/// `(role, node, shape)` for every CSV column group, in column order.
fn layout(g: &CapsuleGraph) -> Result<Vec<(&'static str, NodeId, Vec<usize>)>> {
    let cls = graph::classify(g)?;
    let mut out = Vec::new();
    for id in cls.inputs {
        let shape = g.declared_shape(&id).expect("classified node").to_vec();
        out.push(("in", id, shape));
    }
    for id in cls.outputs {
        let shape = g.declared_shape(&id).expect("classified node").to_vec();
        out.push(("out", id, shape));
    }
    Ok(out)
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Dataset { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks every sample against the graph's input and output shapes.
    pub fn check(&self, g: &CapsuleGraph) -> Result<()> {
        let layout = layout(g)?;
        for (n, s) in self.samples.iter().enumerate() {
            let inputs = layout.iter().filter(|(r, _, _)| *r == "in").count();
            let outputs = layout.len() - inputs;
            if s.inputs.len() != inputs || s.targets.len() != outputs {
                return Err(Error::InvalidConfig(format!(
                    "sample {n}: expected {inputs} inputs and {outputs} targets"
                )));
            }
            for (role, id, shape) in &layout {
                let map = if *role == "in" { &s.inputs } else { &s.targets };
                let t = map
                    .get(id)
                    .ok_or_else(|| Error::InvalidConfig(format!("sample {n}: no {role} value for `{id}`")))?;
                if t.shape() != shape.as_slice() {
                    return Err(Error::shape(format!(
                        "sample {n}: `{id}` has shape {:?}, graph declares {shape:?}",
                        t.shape()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads a CSV dataset whose columns match `g`'s inputs and outputs.
    pub fn from_csv(reader: impl Read, g: &CapsuleGraph) -> Result<Self> {
        let layout = layout(g)?;
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut columns: BTreeMap<(String, NodeId, usize), usize> = BTreeMap::new();
        for (col, h) in headers.iter().enumerate() {
            let parts: Vec<&str> = h.splitn(3, ':').collect();
            let [role, node, idx] = parts.as_slice() else {
                return Err(Error::Format(format!("column `{h}` is not role:node:index")));
            };
            if *role != "in" && *role != "out" {
                return Err(Error::Format(format!("column `{h}`: role must be `in` or `out`")));
            }
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::Format(format!("column `{h}`: bad flat index")))?;
            if columns.insert((role.to_string(), NodeId::from(*node), idx), col).is_some() {
                return Err(Error::Format(format!("duplicate column `{h}`")));
            }
        }
        let expected: usize = layout.iter().map(|(_, _, s)| num_elements(s)).sum();
        if columns.len() != expected {
            return Err(Error::Format(format!(
                "{} columns, graph needs {expected}",
                columns.len()
            )));
        }
        let mut samples = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let mut sample = Sample::new(Inputs::new(), BTreeMap::new());
            for (role, id, shape) in &layout {
                let mut data = Vec::with_capacity(num_elements(shape));
                for i in 0..num_elements(shape) {
                    let col = columns
                        .get(&(role.to_string(), id.clone(), i))
                        .ok_or_else(|| Error::Format(format!("missing column {role}:{id}:{i}")))?;
                    let text = record.get(*col).unwrap_or("").trim();
                    let v: f64 = text
                        .parse()
                        .map_err(|_| Error::Format(format!("row {}: `{text}` is not a number", row + 1)))?;
                    data.push(v);
                }
                let t = Tensor::new(shape.clone(), data)?;
                let map = if *role == "in" { &mut sample.inputs } else { &mut sample.targets };
                map.insert(id.clone(), t);
            }
            samples.push(sample);
        }
        Ok(Dataset { samples })
    }

    /// Writes the dataset in the layout [`Dataset::from_csv`] reads.
    pub fn to_csv(&self, writer: impl Write, g: &CapsuleGraph) -> Result<()> {
        self.check(g)?;
        let layout = layout(g)?;
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = layout
            .iter()
            .flat_map(|(role, id, shape)| (0..num_elements(shape)).map(move |i| format!("{role}:{id}:{i}")))
            .collect();
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = Vec::with_capacity(header.len());
            for (role, id, _) in &layout {
                let map = if *role == "in" { &s.inputs } else { &s.targets };
                row.extend(map[id].data().iter().map(|v| v.to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `epoch,mean_loss` rows, epochs counted from 1.
pub fn write_history(writer: impl Write, history: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "mean_loss"])?;
    for (i, loss) in history.iter().enumerate() {
        w.write_record([(i + 1).to_string(), loss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a history written by [`write_history`].
pub fn read_history(reader: impl Read) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let v = record
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("history rows are epoch,mean_loss".into()))?;
        out.push(v);
    }
    Ok(out)
}
