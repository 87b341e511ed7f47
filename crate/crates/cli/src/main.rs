//! `tdcr`: run, compare and plot closed-loop continuum-robot simulations.

mod config;
mod error;
mod output;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use tdcr_core::scenario::{compute_metrics, run_closed_loop, MetricsReport, SimTrace};

use config::RunConfig;
use error::CliError;
use output::{ShapeFile, Summary};

#[derive(Parser)]
#[command(
    name = "tdcr",
    version,
    about = "Cosserat-rod simulations of a tendon-driven continuum robot"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop simulation and write its trace and summary.
    Simulate {
        /// Config file or preset name.
        #[arg(long)]
        config: String,
        /// Output directory (default: out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of control iterations.
        #[arg(long)]
        horizon: Option<usize>,
        /// Keep every rod centerline for `rodshape`.
        #[arg(long)]
        store_shapes: bool,
        /// Validate and print the resolved config without simulating.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run two configs on the same scenario and tabulate their metrics.
    Compare {
        /// Config file or preset name; given exactly twice.
        #[arg(long, required = true)]
        config: Vec<String>,
        /// Directory for compare.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Draw the x, z, displacement and error panels of one or more traces.
    Plot {
        /// Trace CSV files.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Output directory (default: that of the first trace).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw stored rod centerlines of a run.
    Rodshape {
        /// Run directory written by `simulate --store-shapes`.
        #[arg(long)]
        run: PathBuf,
        /// Stride in iterations.
        #[arg(long, default_value_t = 5)]
        every: usize,
        /// Output SVG (default: <run>/rod_shapes.svg).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and list every violated invariant.
    Validate {
        #[arg(long)]
        config: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            config,
            out,
            horizon,
            store_shapes,
            dry_run,
        } => simulate(&config, out, horizon, store_shapes, dry_run),
        Command::Compare {
            config,
            out,
            horizon,
        } => match config.as_slice() {
            [a, b] => compare(a, b, out, horizon),
            _ => Err(CliError::Config(format!(
                "compare needs exactly two --config values (got {})",
                config.len()
            ))),
        },
        Command::Plot { traces, out } => plot_traces(&traces, out),
        Command::Rodshape { run, every, out } => rodshape(&run, every, out),
        Command::Validate { config } => {
            let resolved = config::load_resolved(&config, None)?;
            println!("{}: ok", resolved.name);
            Ok(())
        }
    }
}

struct Run {
    config: RunConfig,
    trace: SimTrace,
    metrics: Option<MetricsReport>,
}

fn execute(config: RunConfig) -> Result<Run, CliError> {
    let trace = run_closed_loop(&config.simulation)?;
    let target_mm = config.simulation.reference.amplitude * 1e3;
    let metrics = compute_metrics(&trace, target_mm).ok();
    Ok(Run {
        config,
        trace,
        metrics,
    })
}

fn simulate(
    spec: &str,
    out: Option<PathBuf>,
    horizon: Option<usize>,
    store_shapes: bool,
    dry_run: bool,
) -> Result<(), CliError> {
    let mut resolved = config::load_resolved(spec, horizon)?;
    resolved.simulation.store_shapes |= store_shapes;
    if dry_run {
        println!(
            "{}",
            serde_json::to_string_pretty(&resolved).expect("serializable config")
        );
        return Ok(());
    }
    let dir = output::ensure_dir(&out.unwrap_or_else(|| Path::new("out").join(&resolved.name)))?;
    let run = execute(resolved)?;
    output::write_trace(&dir.join(output::TRACE_FILE), &output::rows(&run.trace))?;
    let summary = output::summarize(&run.config, &run.trace, run.metrics);
    output::write_json(&dir.join(output::SUMMARY_FILE), &summary)?;
    if let Some(shapes) = ShapeFile::from_trace(&run.config.name, &run.trace) {
        output::write_json(&dir.join(output::SHAPES_FILE), &shapes)?;
    }
    print_summary(&summary, &dir);
    Ok(())
}

fn print_summary(summary: &Summary, dir: &Path) {
    let [x, y, z] = summary.final_tip_mm;
    println!(
        "{} ({}): {} iterations, final tip ({x:.2}, {y:.2}, {z:.2}) mm, displacement {:.2} mm",
        summary.config.name, summary.controller, summary.iterations, summary.final_displacement_mm
    );
    if let Some(m) = &summary.metrics {
        println!(
            "  TPL {:.2} mm, settling {}, overshoot {:.2}%, rise {}, steady-state error {:.4} mm",
            m.tpl_mm,
            m.settling_iterations,
            m.overshoot_percent,
            m.rise_iterations,
            m.steady_state_error_mm
        );
    }
    println!("  written to {}", dir.display());
}

#[derive(Serialize)]
struct Comparison {
    names: [String; 2],
    controllers: [String; 2],
    metrics: [MetricsReport; 2],
}

fn compare(a: &str, b: &str, out: Option<PathBuf>, horizon: Option<usize>) -> Result<(), CliError> {
    let first = config::load_resolved(a, horizon)?;
    let second = config::load_resolved(b, horizon)?;
    if first.simulation.scenario != second.simulation.scenario {
        return Err(CliError::Config(format!(
            "{} and {} use different scenarios",
            first.name, second.name
        )));
    }
    let (ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(|| execute(first));
        let rb = execute(second);
        (ha.join().expect("simulation thread panicked"), rb)
    });
    let runs = [ra?, rb?];
    let metrics = runs
        .iter()
        .map(|r| {
            r.metrics.ok_or_else(|| {
                CliError::Input(format!("{}: run too short for metrics", r.config.name))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let table = Comparison {
        names: [runs[0].config.name.clone(), runs[1].config.name.clone()],
        controllers: [
            runs[0].trace.controller.name().into(),
            runs[1].trace.controller.name().into(),
        ],
        metrics: [metrics[0], metrics[1]],
    };
    print!("{}", render_table(&table));
    if let Some(dir) = out {
        let dir = output::ensure_dir(&dir)?;
        output::write_json(&dir.join("compare.json"), &table)?;
    }
    Ok(())
}

fn render_table(c: &Comparison) -> String {
    let [a, b] = &c.metrics;
    let rows: [(&str, String, String); 5] = [
        (
            "TPL (mm)",
            format!("{:.2}", a.tpl_mm),
            format!("{:.2}", b.tpl_mm),
        ),
        (
            "settling (iterations)",
            a.settling_iterations.to_string(),
            b.settling_iterations.to_string(),
        ),
        (
            "overshoot (%)",
            format!("{:.2}", a.overshoot_percent),
            format!("{:.2}", b.overshoot_percent),
        ),
        (
            "rise (iterations)",
            a.rise_iterations.to_string(),
            b.rise_iterations.to_string(),
        ),
        (
            "steady-state error (mm)",
            format!("{:.4}", a.steady_state_error_mm),
            format!("{:.4}", b.steady_state_error_mm),
        ),
    ];
    let mut text = format!("{:<24} {:>24} {:>24}\n", "metric", c.names[0], c.names[1]);
    for (name, x, y) in rows {
        text.push_str(&format!("{name:<24} {x:>24} {y:>24}\n"));
    }
    text
}

fn plot_traces(traces: &[PathBuf], out: Option<PathBuf>) -> Result<(), CliError> {
    let loaded = traces
        .iter()
        .map(|p| output::read_trace(p))
        .collect::<Result<Vec<_>, _>>()?;
    let series: Vec<plot::Series> = traces
        .iter()
        .zip(&loaded)
        .map(|(path, rows)| plot::Series {
            label: series_label(path),
            rows,
        })
        .collect();
    let dir = out.unwrap_or_else(|| {
        traces[0]
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    let dir = output::ensure_dir(if dir.as_os_str().is_empty() {
        Path::new(".")
    } else {
        &dir
    })?;
    for path in plot::trace_panels(&series, &dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

/// Run directory name, or the file stem for loose traces.
fn series_label(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if stem == "trace" {
        if let Some(dir) = path.parent().and_then(Path::file_name) {
            return dir.to_string_lossy().into_owned();
        }
    }
    stem
}

fn rodshape(run: &Path, every: usize, out: Option<PathBuf>) -> Result<(), CliError> {
    if every == 0 {
        return Err(CliError::Input("--every must be at least 1".into()));
    }
    let shapes_path = run.join(output::SHAPES_FILE);
    if !shapes_path.exists() {
        return Err(CliError::Input(format!(
            "{} holds no rod shapes; rerun `simulate` with --store-shapes",
            run.display()
        )));
    }
    let shapes: ShapeFile = output::read_json(&shapes_path)?;
    let path = out.unwrap_or_else(|| run.join("rod_shapes.svg"));
    plot::rod_shapes(&shapes, every, &path)?;
    println!("{}", path.display());
    Ok(())
}
