//! Running the command-line front end on a scenario file, as
//! `urbanflow simulate <file>` would.

use std::path::PathBuf;

fn main() {
    let file = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/roundabout.toml"));
    let mut out = Vec::new();
    let mut err = Vec::new();
    for cmd in ["preprocess", "solve", "simulate"] {
        let code = urbanflow::cli::run(["urbanflow", cmd, file.to_str().unwrap()], &mut out, &mut err);
        println!("$ urbanflow {cmd} {} -> exit {code}", file.display());
        print!("{}", String::from_utf8_lossy(&out));
        eprint!("{}", String::from_utf8_lossy(&err));
        out.clear();
        err.clear();
    }
}
