use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use whichway::beamline::Engine;
use whichway::presets::PRESETS;
use whichway::run::{self, ContrastChoice, Overrides, RunConfig};
use whichway::{Error, Result};

#[derive(Parser)]
#[command(name = "wwcli", about = "Which-way marker simulations for a three-beam interferometer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run presets or config files and write tables, report and manifest.
    Run {
        /// Preset names or JSON config/manifest paths.
        #[arg(required = true)]
        sources: Vec<String>,
        #[command(flatten)]
        flags: Flags,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare the first-order and exact engines on one scenario.
    Compare {
        source: String,
        #[command(flatten)]
        flags: Flags,
        /// Also write the report as JSON into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in presets.
    Presets,
    /// Print the tool version.
    Version,
}

#[derive(Args)]
struct Flags {
    /// Perfect coherence between all histories.
    #[arg(long, conflicts_with = "contrast")]
    ideal: bool,
    /// `paper` for the measured contrasts, or a JSON file holding a 3x3 matrix.
    #[arg(long)]
    contrast: Option<String>,
    #[arg(long, value_parser = parse_engine)]
    engine: Option<Engine>,
    /// Enable Poisson counting at this rate (counts/s per branch).
    #[arg(long)]
    counts: Option<f64>,
    #[arg(long)]
    hours: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pad: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
}

fn parse_engine(s: &str) -> std::result::Result<Engine, String> {
    match s {
        "first-order" => Ok(Engine::FirstOrder),
        "exact" => Ok(Engine::Exact),
        _ => Err(format!("expected first-order or exact, got '{s}'")),
    }
}

impl Flags {
    fn overrides(&self) -> Overrides {
        let contrast = if self.ideal {
            Some(ContrastChoice::Ideal)
        } else {
            self.contrast.as_deref().map(ContrastChoice::parse)
        };
        Overrides {
            contrast,
            engine: self.engine,
            counts: self.counts,
            hours: self.hours,
            seed: self.seed,
            pad: self.pad,
            bins: self.bins,
        }
    }

    fn load(&self, source: &str) -> Result<RunConfig> {
        let mut cfg = run::load_config(source)?;
        self.overrides().apply(&mut cfg)?;
        cfg.scenario.validate()?;
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { sources, flags, out } => {
            let configs = sources
                .iter()
                .map(|s| flags.load(s))
                .collect::<Result<Vec<_>>>()?;
            let mut first_err = None;
            for (cfg, res) in configs.iter().zip(run::run_batch(&configs, &out)) {
                match res {
                    Ok(m) => println!("{}: wrote {}", cfg.name, m.outputs.join(", ")),
                    Err(e) => {
                        eprintln!("{}: {e}", cfg.name);
                        first_err.get_or_insert(e);
                    }
                }
            }
            first_err.map_or(Ok(()), Err)
        }
        Command::Compare { source, flags, out } => {
            let cfg = flags.load(&source)?;
            let report = run::compare(&cfg)?;
            let json = run::report_json(&report);
            print!("{json}");
            if report.truncation_warning {
                eprintln!("warning: marker angle too large for the first-order engine to be trusted");
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)
                    .and_then(|_| std::fs::write(dir.join("compare.json"), &json))
                    .map_err(|source| Error::Io {
                        path: dir.display().to_string(),
                        source,
                    })?;
            }
            Ok(())
        }
        Command::Presets => {
            for (name, desc) in PRESETS {
                println!("{name:<10} {desc}");
            }
            Ok(())
        }
        Command::Version => {
            println!("wwcli {}", run::TOOL_VERSION);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
