//! Drives the command line in-process: zoo, validate, derive, replay.

use capsnet::cli::run;

fn main() {
    let dir = std::env::temp_dir().join("capsnet-cli-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let steps: [&[&str]; 4] = [
        &["zoo", "mlp", "--seed", "0", "--out", &path("mlp.json")],
        &["validate", &path("mlp.json")],
        &["derive", &path("mlp.json"), "--out", &path("mlp.derivation.json")],
        &["enumerate", "--base", "1in1n", "--steps", "2", "--semantics", "labeled"],
    ];
    for args in steps {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("capsnet").chain(args.iter().copied()), &mut out, &mut err);
        print!("$ capsnet {}\n{}{}", args.join(" "), String::from_utf8_lossy(&out), String::from_utf8_lossy(&err));
        println!("(exit {code})");
    }
}
