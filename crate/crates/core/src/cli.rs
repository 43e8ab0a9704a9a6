//! The `capsnet` command line.
//!
//! Exit codes: 0 success, 1 validation or shape failure, 2 usage error
//! (bad flags, unreadable or malformed files), 3 numeric failure (a NaN or
//! infinity was produced). Errors go to standard error.
//!
//! Graphs that leave parameters out of their JSON document get them from
//! [`crate::trainer::init_selected`] with the `--seed` value (0 by default).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::backprop::{grad_check, LossKind, LossSpec, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::forward::{eval, Inputs};
use crate::generation::{base_network, derive_structure, enumerate_growth, replay, Derivation, Semantics};
use crate::graph::{self, CapsuleGraph, NodeId};
use crate::models::{build_cnn, build_mlp, CnnSpec, MlpSpec};
use crate::tensor::{num_elements, Tensor};
use crate::trainer::{init_params, init_selected, train, write_history, Dataset, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "capsnet", version, about = "Capsule networks as connected DAGs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Mse,
    Xent,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Mse => LossKind::Mse,
            LossArg::Xent => LossKind::SoftmaxCrossEntropy,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaseArg {
    #[value(name = "1in1n")]
    OneInOneN,
    #[value(name = "2in1n")]
    TwoInOneN,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SemanticsArg {
    Labeled,
    Iso,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ZooModel {
    Mlp,
    Cnn,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every graph invariant and list the violations.
    Validate { graph: PathBuf },
    /// Evaluate a graph and print every node's output as JSON.
    Eval {
        graph: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare backprop gradients with central differences.
    Gradcheck {
        graph: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long, value_enum)]
        loss: LossArg,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train with per-sample SGD; writes the trained graph and a loss history.
    Train {
        graph: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lr: f64,
        #[arg(long)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "mse")]
        loss: LossArg,
        /// Trained graph (default: `<graph>.trained.json`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Loss history CSV (default: `<graph>.history.csv`).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Count growth-rule structures grown from a base network.
    Enumerate {
        #[arg(long, value_enum)]
        base: BaseArg,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum)]
        semantics: SemanticsArg,
        /// Also print each structure's edge list.
        #[arg(long)]
        list: bool,
    },
    /// Write a derivation by the generation rules for a connected DAG.
    Derive {
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a derivation and write the resulting graph.
    Replay {
        derivation: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a GraphViz DOT rendering.
    ExportDot {
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a default model with seeded parameters.
    Zoo {
        #[arg(value_enum)]
        model: ZooModel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFiniteValue(_) => 3,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Format(_) | Error::InvalidConfig(_) => 2,
        _ => 1,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", p.display()))),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

/// Loads a graph, filling parameters absent from the document from `seed`.
fn load_graph(path: &Path, seed: u64) -> Result<CapsuleGraph> {
    let loaded = graph::from_json(&read(path)?)?;
    if loaded.missing.is_empty() {
        Ok(loaded.graph)
    } else {
        init_selected(&loaded.graph, &loaded.missing, seed)
    }
}

fn load_valid(path: &Path, seed: u64) -> Result<CapsuleGraph> {
    let g = load_graph(path, seed)?;
    let report = graph::validate(&g);
    if !report.is_ok() {
        return Err(Error::InvalidGraph(report));
    }
    Ok(g)
}

/// Reads `{"node": number | [numbers]}` and shapes each entry with `shape_of`.
fn load_tensors(path: &Path, shape_of: impl Fn(&NodeId) -> Result<Vec<usize>>) -> Result<BTreeMap<NodeId, Tensor>> {
    let doc: BTreeMap<String, Value> = serde_json::from_str(&read(path)?)?;
    let mut out = BTreeMap::new();
    for (id, v) in doc {
        let id = NodeId::new(id);
        let shape = shape_of(&id)?;
        let data: Vec<f64> = match v {
            Value::Number(n) => vec![n.as_f64().expect("JSON numbers are finite")],
            Value::Array(items) => items
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| Error::Format(format!("`{id}`: values must be numbers"))))
                .collect::<Result<_>>()?,
            _ => return Err(Error::Format(format!("`{id}`: expected a number or an array"))),
        };
        if data.len() != num_elements(&shape) {
            return Err(Error::shape(format!(
                "`{id}` has {} values, shape {shape:?} needs {}",
                data.len(),
                num_elements(&shape)
            )));
        }
        out.insert(id, Tensor::new(shape, data)?);
    }
    Ok(out)
}

fn load_inputs(path: &Path, g: &CapsuleGraph) -> Result<Inputs> {
    load_tensors(path, |id| {
        g.input(id)
            .map(|n| n.shape.clone())
            .ok_or_else(|| Error::UnknownNode(format!("{id} (not an input node)")))
    })
}

fn tensor_json(t: &Tensor) -> Value {
    json!({ "shape": t.shape(), "data": t.data() })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn default_sibling(graph: &Path, suffix: &str) -> PathBuf {
    let stem = graph.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "graph".into());
    graph.with_file_name(format!("{stem}.{suffix}"))
}

fn edge_list(g: &CapsuleGraph) -> String {
    let mut edges: Vec<String> = g.edges().iter().map(|e| format!("{}->{}", e.src, e.dst)).collect();
    edges.sort();
    edges.join(" ")
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Validate { graph: path } => {
            let g = graph::from_json(&read(&path)?)?.graph;
            let report = graph::validate(&g);
            writeln!(stdout, "{}", report.to_string().trim_end())?;
            Ok(if report.is_ok() { 0 } else { 1 })
        }
        Command::Eval { graph: path, inputs, seed } => {
            let g = load_valid(&path, seed)?;
            let x = load_inputs(&inputs, &g)?;
            let values = eval(&g, &x)?;
            let mut nodes = Map::new();
            for (id, y) in values.outputs() {
                let mut entry = Map::new();
                entry.insert("output".into(), tensor_json(y));
                if let Some(u) = values.pre_activation(id) {
                    entry.insert("pre_activation".into(), tensor_json(u));
                }
                nodes.insert(id.to_string(), Value::Object(entry));
            }
            emit(None, &pretty(&Value::Object(nodes)), stdout)?;
            Ok(0)
        }
        Command::Gradcheck {
            graph: path,
            inputs,
            targets,
            loss,
            eps,
            seed,
        } => {
            let g = load_valid(&path, seed)?;
            let x = load_inputs(&inputs, &g)?;
            let t = load_tensors(&targets, |id| {
                g.capsule(id)
                    .map(|n| n.bias.shape().to_vec())
                    .ok_or_else(|| Error::InvalidTarget(format!("`{id}` is not a capsule node")))
            })?;
            let report = grad_check(&g, &x, &LossSpec::new(loss.into(), t), eps)?;
            writeln!(stdout, "max_relative_error {:e}", report.max_rel_error)?;
            if let Some((key, i)) = &report.worst {
                writeln!(stdout, "worst {key}[{i}]")?;
            }
            writeln!(stdout, "checked {}", report.checked)?;
            Ok(0)
        }
        Command::Train {
            graph: path,
            data,
            lr,
            epochs,
            seed,
            loss,
            out,
            history,
        } => {
            let g = load_valid(&path, seed)?;
            let file = fs::File::open(&data)
                .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", data.display())))?;
            let dataset = Dataset::from_csv(file, &g)?;
            let config = TrainConfig {
                learning_rate: lr,
                epochs,
                seed,
                loss: loss.into(),
            };
            let (trained, hist) = train(&g, &dataset, &config)?;
            let out = out.unwrap_or_else(|| default_sibling(&path, "trained.json"));
            let history = history.unwrap_or_else(|| default_sibling(&path, "history.csv"));
            emit(Some(&out), &graph::to_json(&trained), stdout)?;
            let mut buf = Vec::new();
            write_history(&mut buf, &hist)?;
            emit(Some(&history), &String::from_utf8(buf).expect("CSV is UTF-8"), stdout)?;
            if let Some(last) = hist.last() {
                writeln!(stdout, "final_mean_loss {last:e}")?;
            }
            writeln!(stdout, "wrote {} and {}", out.display(), history.display())?;
            Ok(0)
        }
        Command::Enumerate {
            base,
            steps,
            semantics,
            list,
        } => {
            let base = base_network(match base {
                BaseArg::OneInOneN => "1in1n",
                BaseArg::TwoInOneN => "2in1n",
            })?;
            let semantics = match semantics {
                SemanticsArg::Labeled => Semantics::Labeled,
                SemanticsArg::Iso => Semantics::Iso,
            };
            let result = enumerate_growth(&base, steps, semantics);
            writeln!(stdout, "{}", result.count())?;
            if list {
                for net in &result.structures {
                    writeln!(stdout, "{}", edge_list(net.graph()))?;
                }
            }
            Ok(0)
        }
        Command::Derive { graph: path, out } => {
            let g = load_valid(&path, 0)?;
            let d = derive_structure(&g)?;
            emit(out.as_deref(), &d.to_json(), stdout)?;
            Ok(0)
        }
        Command::Replay { derivation, out } => {
            let d = Derivation::from_json(&read(&derivation)?)?;
            let net = replay(&d)?;
            emit(out.as_deref(), &graph::to_json(net.graph()), stdout)?;
            Ok(0)
        }
        Command::ExportDot { graph: path, out } => {
            let g = graph::from_json(&read(&path)?)?.graph;
            emit(out.as_deref(), &graph::to_dot(&g), stdout)?;
            Ok(0)
        }
        Command::Zoo { model, seed, out } => {
            let g = match model {
                ZooModel::Mlp => build_mlp(&MlpSpec::default())?,
                ZooModel::Cnn => build_cnn(&CnnSpec::default())?,
            };
            emit(out.as_deref(), &graph::to_json(&init_params(&g, seed)?), stdout)?;
            Ok(0)
        }
    }
}
