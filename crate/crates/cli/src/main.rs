use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use epidp_cli::{
    aw_between, aw_csv, env_seed, load_source, output_dir, prepare_source, run_prepared, verify_rerun, Config,
    Source, EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL,
};
use epidp_core::aw::AwConfig;

#[derive(Parser)]
#[command(name = "epidp", version, about = "Stochastic dynamic programming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration or rerun a manifest.
    Run {
        /// A `.toml` configuration or a `manifest.json`.
        input: PathBuf,
        /// Output directory; defaults to `output.dir` of the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the resolved configuration and every rejection without running.
    Validate { config: PathBuf },
    /// Attouch-Wets distance between two value-function CSV files.
    AwDistance {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        /// Comma-separated centre point, `x,alpha` or `x,ell,alpha`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        zctr: Option<Vec<f64>>,
        #[arg(long, default_value_t = 20.0)]
        rho_max: f64,
        #[arg(long)]
        rho_steps: Option<usize>,
        #[arg(long)]
        ball_samples: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { input, out, jobs } => run(&input, out.as_deref(), jobs),
        Command::Validate { config } => validate(&config),
        Command::AwDistance {
            f,
            g,
            zctr,
            rho_max,
            rho_steps,
            ball_samples,
        } => match aw(&f, &g, zctr, rho_max, rho_steps, ball_samples) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: {e:#}");
                EXIT_CONFIG
            }
        },
    };
    ExitCode::from(code as u8)
}

fn run(input: &Path, out: Option<&Path>, jobs: Option<usize>) -> i32 {
    let prepared = load_source(input).and_then(|src| {
        let seed = match src {
            Source::Config(_) => env_seed()?,
            Source::Manifest(_) => None,
        };
        prepare_source(src, seed)
    });
    let (cfg, original) = match prepared {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}: configuration rejected", input.display());
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let dir = output_dir(&cfg, out);
    let result = match run_prepared(&cfg, &dir, jobs) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_PARTIAL;
        }
    };
    let m = &result.manifest;
    for c in m.cells.iter().filter(|c| !c.is_ok()) {
        eprintln!("cell {}: {}", c.id, c.status);
    }
    if let Some(e) = &m.error {
        eprintln!("run failed: {e}");
    }
    println!(
        "{}: {} ({} cells, {} outputs) in {}",
        m.kind,
        m.status,
        m.cells.len(),
        m.outputs.len(),
        result.out_dir.display()
    );
    let mut code = m.exit_code();
    if let Some(orig) = original {
        match verify_rerun(&orig, m) {
            Ok(()) => println!("all {} outputs match the manifest", orig.outputs.len()),
            Err(e) => {
                eprintln!("{e:#}");
                code = EXIT_PARTIAL;
            }
        }
    }
    code
}

fn validate(path: &Path) -> i32 {
    let mut cfg = match Config::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let applied = cfg.resolve();
    let seed = env_seed();
    if let Ok(Some(s)) = seed {
        cfg.override_seed(s);
    }
    let mut errs = cfg.validate();
    if let Err(e) = &seed {
        errs.extend(e.0.iter().cloned());
    }
    println!("# resolved configuration");
    print!("{}", cfg.to_toml());
    println!("\n# defaults applied ({})", applied.len());
    for a in &applied {
        println!("#   {a}");
    }
    if let Ok(Some(s)) = seed {
        println!("# EPIDP_SEED={s} replaces schedule.seeds");
    }
    if errs.is_empty() {
        println!("# no rejections");
        EXIT_OK
    } else {
        println!("# rejections ({})", errs.len());
        for e in &errs {
            println!("#   {e}");
        }
        EXIT_CONFIG
    }
}

fn aw(
    f: &Path,
    g: &Path,
    zctr: Option<Vec<f64>>,
    rho_max: f64,
    rho_steps: Option<usize>,
    ball_samples: Option<usize>,
) -> Result<()> {
    let two_d = std::fs::read_to_string(f)
        .with_context(|| format!("cannot read {}", f.display()))?
        .starts_with("x,ell,");
    let base = if two_d { AwConfig::default_2d() } else { AwConfig::default_1d() };
    let cfg = AwConfig {
        z_ctr: zctr.unwrap_or(base.z_ctr),
        rho_max,
        rho_steps: rho_steps.unwrap_or(base.rho_steps),
        ball_samples: ball_samples.unwrap_or(base.ball_samples),
    };
    let e = aw_between(f, g, &cfg)?;
    print!("{}", aw_csv(&e));
    Ok(())
}
