mod args;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use pdextract::experiments::{run, ExperimentConfig, RunOutput};

use args::Cli;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

fn load_base(path: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    let Some(path) = path else { return Ok(ExperimentConfig::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_outputs(out: &RunOutput, dir: &Path, name: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join(format!("{name}.csv")), &out.csv)?;
    let mut json = serde_json::to_string_pretty(&out.manifest)?;
    json.push('\n');
    fs::write(dir.join(format!("{name}.json")), json)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = cli.command.split();

    let cfg = match load_base(common.config.as_deref()) {
        Ok(base) => common.apply(experiment, base),
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let out = match run(&cfg) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    if let Err(e) = write_outputs(&out, &common.out, experiment.name()) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_RUNTIME);
    }

    for c in &out.checks {
        let tag = match (c.pass, c.gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        println!("{tag} {} = {:.6} ({} {:.6})", c.name, c.value, c.relation, c.threshold);
    }
    if out.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
