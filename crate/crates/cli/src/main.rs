use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nslab_cli::{is_suite, run_and_write, RunConfig, SUITES};

#[derive(Parser, Debug)]
#[command(name = "verify", about = "Run numerical verification suites and write manifest.json plus CSV scans")]
struct Args {
    /// forms, local-model, holo, sections, estimates, pencil, monodromy or all
    suite_pos: Option<String>,
    /// Same as the positional suite name
    #[arg(long)]
    suite: Option<String>,
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Epsilon values (repeat or comma-separate)
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    /// Grid size: N for every grid, or name=N
    #[arg(long)]
    grid: Vec<String>,
    /// Tolerance override name=value
    #[arg(long)]
    tol: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage() -> String {
    format!("usage: verify <suite> [--epsilon E] [--grid N|name=N] [--tol name=V] [--seed S] [--out DIR] [--config FILE]\nsuites: {}, all", SUITES.join(", "))
}

fn split_kv(s: &str) -> Option<(String, &str)> {
    s.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim()))
}

fn config(args: &Args) -> anyhow::Result<(String, RunConfig)> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::default(),
    };
    if !args.epsilon.is_empty() {
        cfg.epsilon = args.epsilon.clone();
    }
    for g in &args.grid {
        match split_kv(g) {
            Some((k, v)) => cfg.grid.insert(k, v.parse()?),
            None => cfg.grid.insert("default".into(), g.parse()?),
        };
    }
    for t in &args.tol {
        let (k, v) = split_kv(t).ok_or_else(|| anyhow::anyhow!("--tol expects name=value, got '{t}'"))?;
        cfg.tol.insert(k, v.parse()?);
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(s) = args.suite.clone().or_else(|| args.suite_pos.clone()) {
        cfg.suite = Some(s);
    }
    let suite = cfg.suite.clone().ok_or_else(|| anyhow::anyhow!("no suite given"))?;
    Ok((suite, cfg))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (suite, cfg) = match config(&args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}\n{}", usage());
            return ExitCode::from(2);
        }
    };
    if !is_suite(&suite) {
        eprintln!("error: unknown suite '{suite}'\n{}", usage());
        return ExitCode::from(2);
    }
    match run_and_write(&suite, &cfg) {
        Ok(m) => {
            for s in &m.suites {
                let failed: Vec<&str> = s.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                println!("{:<12} {} ({} checks){}", s.suite, if s.pass { "PASS" } else { "FAIL" }, s.checks.len(),
                    if failed.is_empty() { String::new() } else { format!(" failed: {}", failed.join(", ")) });
            }
            println!("manifest: {}", cfg.out.join("manifest.json").display());
            if m.pass { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
