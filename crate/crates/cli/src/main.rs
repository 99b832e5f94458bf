use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use objcbf::harness::{compute_metrics, emit_outputs, load_scenario, run_closed_loop, Metrics, Mode, Scenario};

#[derive(Parser)]
#[command(name = "objcbf", version, about = "Object-aware CBF navigation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        /// Output directory (defaults to `out/<scenario name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// semantic_mpc_cbf, nonsemantic_mpc_cbf or classic_mpc.
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        gamma_bar: Option<f64>,
    },
    /// Run a scenario once per gamma_bar value.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        gamma_bar: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Check that a scenario file loads.
    Validate { scenario: PathBuf },
}

fn load(path: &Path) -> Result<Scenario> {
    load_scenario(path).with_context(|| format!("loading {}", path.display()))
}

fn default_out(scenario: &Scenario, path: &Path) -> PathBuf {
    let name = if scenario.name.is_empty() {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
    } else {
        scenario.name.clone()
    };
    PathBuf::from("out").join(name)
}

fn apply_overrides(s: &mut Scenario, seed: Option<u64>, mode: Option<Mode>, gamma_bar: Option<f64>) -> Result<()> {
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(mode) = mode {
        s.mode = mode;
    }
    if let Some(g) = gamma_bar {
        s.controller.gamma_bar = g;
    }
    s.validate().context("scenario invalid after command-line overrides")?;
    Ok(())
}

fn summary(m: &Metrics) -> String {
    let goal = match m.goal_time {
        Some(t) => format!("reached at {t:.1} s"),
        None => "not reached".into(),
    };
    format!(
        "{} [{} gamma_bar={}]: goal {goal}, path {:.2} m, min h {:.3}, h<0 ticks {}, min clearance {:.3} m, degraded {}, mean tick {:.1} ms",
        m.scenario, m.mode, m.gamma_bar, m.path_length, m.min_h, m.ticks_h_negative, m.min_clearance, m.degraded_ticks, m.mean_tick_ms
    )
}

fn run_one(s: &Scenario, out: &Path) -> Result<Metrics> {
    let record = run_closed_loop(s).with_context(|| format!("running {}", s.name))?;
    emit_outputs(&record, out).with_context(|| format!("writing outputs to {}", out.display()))?;
    Ok(compute_metrics(&record))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, out, seed, mode, gamma_bar } => {
            let mut s = load(&scenario)?;
            apply_overrides(&mut s, seed, mode, gamma_bar)?;
            let out = out.unwrap_or_else(|| default_out(&s, &scenario));
            let m = run_one(&s, &out)?;
            println!("{}", summary(&m));
            println!("outputs in {}", out.display());
        }
        Command::Sweep { scenario, gamma_bar, out, seed, mode } => {
            let base = load(&scenario)?;
            let out = out.unwrap_or_else(|| default_out(&base, &scenario));
            fs::create_dir_all(&out)?;
            let mut table = String::from("gamma_bar,goal_reached,goal_time,min_clearance,min_h,ticks_h_negative\n");
            for g in gamma_bar {
                let mut s = base.clone();
                apply_overrides(&mut s, seed, mode, Some(g))?;
                let m = run_one(&s, &out.join(format!("gamma_{g}")))?;
                println!("{}", summary(&m));
                table.push_str(&format!(
                    "{g},{},{},{},{},{}\n",
                    m.goal_reached,
                    m.goal_time.map(|t| t.to_string()).unwrap_or_default(),
                    m.min_clearance,
                    m.min_h,
                    m.ticks_h_negative
                ));
            }
            fs::write(out.join("sweep.csv"), table)?;
            println!("outputs in {}", out.display());
        }
        Command::Validate { scenario } => {
            let s = load(&scenario)?;
            println!(
                "{}: ok ({} objects, {} events, mode {}, duration {} s)",
                scenario.display(),
                s.objects.len(),
                s.events.len(),
                s.mode,
                s.duration
            );
        }
    }
    Ok(())
}
