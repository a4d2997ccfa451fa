//! `gpi` command line: batch experiment runs, plotting, the verification
//! suite, and instance dumps.

use gpi_core::harness::{
    self, audit_budgets, run_experiment, write_results, ExperimentConfig, InstanceSpec,
};
use gpi_core::plot::{emit_plot, PlotPanel};
use gpi_core::verify::verify_suite;
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
usage:
  gpi run --config <file> [--jobs N] [--paper-delta] [--allow-abort]
  gpi plot --input <results.csv> [--input <more.csv> ...] --out <fig.svg>
  gpi verify [--filter <name>]
  gpi instance --family <name> --params k=v[,k=v...] --dump <mdp.json>

Config files are JSON; the schema is documented in the repository README.
The GPI_SEED environment variable overrides the config's base seed.
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some((command, rest)) = args.split_first() else {
        eprint!("{USAGE}");
        return ExitCode::from(2);
    };
    let result = match command.as_str() {
        "run" => cmd_run(rest),
        "plot" => cmd_plot(rest),
        "verify" => cmd_verify(rest),
        "instance" => cmd_instance(rest),
        "--help" | "-h" | "help" => {
            print!("{USAGE}");
            return ExitCode::SUCCESS;
        }
        other => Err(format!("unknown command {other:?}\n{USAGE}")),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn take_value(args: &[String], i: &mut usize, flag: &str) -> Result<String, String> {
    *i += 1;
    args.get(*i)
        .cloned()
        .ok_or_else(|| format!("{flag} needs a value"))
}

fn cmd_run(args: &[String]) -> Result<ExitCode, String> {
    let mut config_path: Option<PathBuf> = None;
    let mut jobs = 1usize;
    let mut paper_delta = false;
    let mut allow_abort = false;
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--config" => config_path = Some(PathBuf::from(take_value(args, &mut i, "--config")?)),
            "--jobs" => {
                jobs = take_value(args, &mut i, "--jobs")?
                    .parse()
                    .map_err(|_| "--jobs needs a positive integer".to_string())?;
                if jobs == 0 {
                    return Err("--jobs needs a positive integer".into());
                }
            }
            "--paper-delta" => paper_delta = true,
            "--allow-abort" => allow_abort = true,
            other => return Err(format!("unknown flag {other:?}")),
        }
        i += 1;
    }
    let config_path = config_path.ok_or("run needs --config <file>")?;
    let mut config = ExperimentConfig::load(&config_path).map_err(|e| e.to_string())?;
    if paper_delta {
        // Full-protocol tolerance; the desk default in configs is looser to
        // keep runs short.
        config.delta = 0.001;
        config.validate().map_err(|e| e.to_string())?;
    }

    let results = run_experiment(&config, jobs).map_err(|e| e.to_string())?;
    let out_dir = PathBuf::from(&config.output_dir);
    write_results(&out_dir, &results).map_err(|e| e.to_string())?;
    print!("{}", harness::summary_table(&results.summaries));
    println!(
        "wrote {} trials to {}",
        results.records.len(),
        out_dir.join("results.csv").display()
    );

    let mdp = config.instance.build().map_err(|e| e.to_string())?;
    let violations = audit_budgets(
        &results.logs,
        mdp.num_states(),
        mdp.num_actions(),
        mdp.horizon(),
        config.delta,
    );
    if !violations.is_empty() {
        for v in &violations {
            eprintln!(
                "budget violation: {} mu0={} trial={} phase={}: {}",
                v.algorithm, v.mu0, v.trial, v.k, v.detail
            );
        }
        return Ok(ExitCode::FAILURE);
    }
    if results.any_aborted() && !allow_abort {
        eprintln!("at least one trial aborted; failing (pass --allow-abort to tolerate)");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_plot(args: &[String]) -> Result<ExitCode, String> {
    let mut inputs: Vec<PathBuf> = Vec::new();
    let mut out: Option<PathBuf> = None;
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--input" => inputs.push(PathBuf::from(take_value(args, &mut i, "--input")?)),
            "--out" => out = Some(PathBuf::from(take_value(args, &mut i, "--out")?)),
            other => return Err(format!("unknown flag {other:?}")),
        }
        i += 1;
    }
    if inputs.is_empty() {
        return Err("plot needs at least one --input <results.csv>".into());
    }
    let out = out.ok_or("plot needs --out <fig.svg>")?;
    let mut panels = Vec::new();
    for input in &inputs {
        let text = std::fs::read_to_string(input).map_err(|e| format!("{}: {e}", input.display()))?;
        let records = harness::records_from_csv(&text).map_err(|e| e.to_string())?;
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "results".into());
        // Runs conventionally write results.csv inside a named directory;
        // that name is the informative part.
        let title = if stem == "results" {
            input
                .parent()
                .and_then(|p| p.file_name())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or(stem)
        } else {
            stem
        };
        panels.push(PlotPanel {
            title,
            cells: harness::summarize(&records),
        });
    }
    let svg = emit_plot(&panels).map_err(|e| e.to_string())?;
    std::fs::write(&out, svg).map_err(|e| e.to_string())?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &[String]) -> Result<ExitCode, String> {
    let mut filter: Option<String> = None;
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--filter" => filter = Some(take_value(args, &mut i, "--filter")?),
            other => return Err(format!("unknown flag {other:?}")),
        }
        i += 1;
    }
    let results = verify_suite(filter.as_deref());
    if results.is_empty() {
        return Err(format!("no checks match filter {filter:?}"));
    }
    let mut all_passed = true;
    for r in &results {
        println!("{} {:<18} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        all_passed &= r.passed;
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_instance(args: &[String]) -> Result<ExitCode, String> {
    let mut family: Option<String> = None;
    let mut params: Option<String> = None;
    let mut dump: Option<PathBuf> = None;
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--family" => family = Some(take_value(args, &mut i, "--family")?),
            "--params" => params = Some(take_value(args, &mut i, "--params")?),
            "--dump" => dump = Some(PathBuf::from(take_value(args, &mut i, "--dump")?)),
            other => return Err(format!("unknown flag {other:?}")),
        }
        i += 1;
    }
    let family = family.ok_or("instance needs --family <name>")?;
    let dump = dump.ok_or("instance needs --dump <mdp.json>")?;
    let spec = parse_instance_spec(&family, params.as_deref().unwrap_or(""))?;
    let mdp = spec.build().map_err(|e| e.to_string())?;
    std::fs::write(&dump, mdp.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    println!(
        "wrote {} ({} states, {} actions, horizon {})",
        dump.display(),
        mdp.num_states(),
        mdp.num_actions(),
        mdp.horizon()
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_instance_spec(family: &str, params: &str) -> Result<InstanceSpec, String> {
    // Reuse the config schema: build {"family": ..., k: v, ...} and let serde
    // validate the field set.
    let mut doc = serde_json::Map::new();
    doc.insert("family".into(), serde_json::Value::String(family.into()));
    for pair in params.split(',').filter(|p| !p.trim().is_empty()) {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(format!("bad parameter {pair:?}, expected k=v"));
        };
        let value = value.trim();
        // Integer-valued fields (S, A, H) must arrive as JSON integers.
        let number = if let Ok(n) = value.parse::<u64>() {
            serde_json::Number::from(n)
        } else {
            value
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .ok_or_else(|| format!("parameter {key}={value:?} is not numeric"))?
        };
        doc.insert(key.trim().into(), serde_json::Value::Number(number));
    }
    serde_json::from_value(serde_json::Value::Object(doc)).map_err(|e| e.to_string())
}
