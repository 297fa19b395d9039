use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spde_wave::harness::{self, Experiment, ExperimentConfig, Verdict};

#[derive(Parser)]
#[command(name = "spde-harness", version, about = "Run and aggregate verification experiments")]
struct Cli {
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replica count; overrides the config.
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Worker threads for replica dispatch (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's, then the environment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pool result CSVs of the same schema and print the merged table.
    Aggregate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Write the merged table here instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// List experiments and the checks each one decides.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> spde_wave::Result<ExitCode> {
    match cli.command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<18} {}", e.name(), e.description());
                for c in harness::checks_for(e) {
                    println!("    {:<20} {}", c.id, c.summary);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(r) = cli.replicas {
                cfg.replicas = r;
            }
            cfg.validate()?;
            let dir = out.unwrap_or_else(|| harness::output_dir_for(&cfg));
            let table = harness::run(&cfg, &dir)?;
            for c in harness::checks_for(cfg.experiment) {
                println!("{:<5} {:<20} {}", table.check_verdict(c.id).to_string().to_uppercase(), c.id, c.summary);
            }
            let failures = table.failures();
            for r in &failures {
                eprintln!(
                    "failed: {} {} {} value={:e} reference={:e} std_error={}",
                    r.check,
                    r.case_id,
                    r.quantity,
                    r.value,
                    r.reference,
                    r.std_error.map_or("-".to_string(), |s| format!("{s:e}"))
                );
            }
            println!("results in {}", dir.display());
            let ok = failures.is_empty()
                && harness::checks_for(cfg.experiment).all(|c| table.check_verdict(c.id) == Verdict::Pass);
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Aggregate { files, output } => {
            let tables = files.iter().map(|f| harness::read_table(f)).collect::<spde_wave::Result<Vec<_>>>()?;
            let merged = harness::aggregate(&tables)?;
            match output {
                Some(path) => merged.write_csv(std::fs::File::create(path)?)?,
                None => merged.write_csv(std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
