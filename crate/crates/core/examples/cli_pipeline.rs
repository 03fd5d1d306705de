//! The full command-line pipeline driven in-process.
//!
//! Runs `generate`, `train`, `evaluate`, `ablate`, `baseline` and `report`
//! in a temporary directory with a small config file, exactly as the
//! `chemtab` binary would, and lists what each step wrote.
//!
//! ```bash
//! cargo run --release --example cli_pipeline
//! ```
//!
//! The same steps from a shell:
//!
//! ```bash
//! chemtab generate --config small.cfg --flames 6 --out run
//! chemtab train    --config small.cfg --split flamelet --out run
//! chemtab evaluate --config small.cfg --split flamelet --out run
//! ```

use std::process::ExitCode;

const CONFIG: &str = "\
# small enough to finish in about a minute
grid = 80
trunk = 16,16
epochs = 30
repeats = 2
pv_sweep = 2,4
seed = 3
";

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let cfg = dir.path().join("small.cfg");
    std::fs::write(&cfg, CONFIG).expect("write config");
    let out = dir.path().join("run");
    let (cfg, out) = (cfg.to_str().expect("utf-8 path"), out.to_str().expect("utf-8 path"));

    let steps: [&[&str]; 6] = [
        &["generate", "--flames", "8", "--shrink", "0.97"],
        &["train", "--split", "flamelet", "--fraction", "0.75"],
        &["evaluate", "--split", "flamelet", "--fraction", "0.75"],
        &["ablate", "--cpv", "2"],
        &["baseline", "--cpv", "2"],
        &["report"],
    ];
    for step in steps {
        let mut args = vec!["chemtab"];
        args.extend_from_slice(step);
        args.extend_from_slice(&["--config", cfg, "--out", out]);
        println!("$ {}", args[1..].join(" ").replace(dir.path().to_str().unwrap_or(""), "."));
        let code = chemtab::cli::main(args);
        if code != ExitCode::SUCCESS {
            return code;
        }
    }

    let mut files: Vec<String> = walk(std::path::Path::new(out));
    files.sort();
    println!("\nartifacts:");
    for f in files {
        println!("  {}", f.trim_start_matches(out));
    }
    if let Ok(summary) = std::fs::read_to_string(std::path::Path::new(out).join("report/summary.txt")) {
        println!("\n{summary}");
    }
    ExitCode::SUCCESS
}

fn walk(dir: &std::path::Path) -> Vec<String> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let path = entry.path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path.display().to_string());
        }
    }
    out
}
