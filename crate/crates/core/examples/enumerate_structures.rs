//! Counts the structures the rule of growth produces from small bases.

use capsnet::generation::{base_network, enumerate_growth, Semantics};

fn main() -> capsnet::Result<()> {
    for (base, steps) in [("1in1n", 1), ("1in1n", 2), ("2in1n", 1), ("2in1n", 2)] {
        let net = base_network(base)?;
        let labeled = enumerate_growth(&net, steps, Semantics::Labeled).count();
        let iso = enumerate_growth(&net, steps, Semantics::Iso).count();
        println!("{base} after {steps} step(s): {labeled} labeled, {iso} up to isomorphism");
    }
    Ok(())
}
