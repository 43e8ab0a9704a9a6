//! The four generation rules, derivation of a DAG and replay of the witness.

use capsnet::generation::{
    apply_convergence, apply_growth, apply_neuron, apply_variable, derive, is_isomorphic, replay, unit_links, Dag,
    Derivation, Neuron,
};
use capsnet::CapsuleFn;

fn main() -> capsnet::Result<()> {
    let trivial = apply_variable("x1");
    println!("variable: {:?}", trivial.node_ids());

    let a = apply_neuron(&unit_links(&["x1"]), Neuron::new("h1", CapsuleFn::Sigmoid, 0.0))?;
    let a = apply_growth(&a, &unit_links(&["x1", "h1"]), Neuron::new("h2", CapsuleFn::Tanh, 0.1))?;
    let b = apply_neuron(&unit_links(&["x2"]), Neuron::new("h3", CapsuleFn::Sigmoid, 0.0))?;
    let net = apply_convergence(&[a, b], &[unit_links(&["h2"]), unit_links(&["h3"])], Neuron::new("o", CapsuleFn::Sigmoid, 0.0))?;
    println!("converged network has {} hidden neurons", net.hidden_count());

    let witness = derive(&net)?;
    println!("rules used: {:?}", witness.rule_counts());
    let text = witness.to_json();
    let rebuilt = replay(&Derivation::from_json(&text)?)?;
    println!("replay reproduces the network exactly: {}", rebuilt == net);

    let dag = Dag::new(&["a", "b", "c", "d"], &[("a", "c"), ("b", "c"), ("c", "d"), ("a", "d")]);
    let induced = dag.induced_default()?;
    let again = replay(&derive(&induced)?)?;
    println!("arbitrary DAG re-derived up to isomorphism: {}", is_isomorphic(&again, &induced));
    Ok(())
}
