use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hbws::beamformer::{gradient_ascent, greedy_permute, AscentOptions};
use hbws::dump::{self, DumpHeader};
use hbws::experiments::{self, ExperimentConfig};
use hbws::grassmann::{line_pack, LinePackOptions};
use hbws::switchset::theorem4_bounds;
use hbws::{Error, Result, SwitchFamily};

/// Thread count for Monte Carlo and design; all cores when unset.
const THREADS_ENV: &str = "HBWS_THREADS";

#[derive(Parser)]
#[command(
    name = "hbws",
    version,
    about = "Beamformer design and capacity sweeps for hybrid beamforming with selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write CSV (stdout unless the config names an output).
    Run { config: PathBuf },
    /// Print a bounded-overlap switch family.
    Family {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        kappa: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Design a reduced-dimensional beamformer and dump it.
    Pack {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        l: usize,
        /// Selection size for the default banked family.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Switch family file; banked over `L` ports when absent.
        #[arg(long)]
        family: Option<PathBuf>,
        #[arg(long, value_enum)]
        refine: Option<Refine>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Refine {
    Greedy,
    Ascent,
    Both,
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = experiments::run(&cfg)?;
            match &cfg.output {
                Some(p) => experiments::write_csv(&report.rows, std::fs::File::create(p)?)?,
                None => experiments::write_csv(&report.rows, std::io::stdout().lock())?,
            }
            if report.failed_points > 0 {
                log::error!("{} grid point(s) aborted", report.failed_points);
                return Ok(3);
            }
        }
        Command::Family { l, k, kappa, out } => {
            let fam = SwitchFamily::frankl_babai(l, k, kappa)?;
            match theorem4_bounds(l, k, kappa) {
                Ok((lo, hi)) => {
                    log::info!("{} subsets; size bounds {lo} <= |S| <= {hi}", fam.len())
                }
                Err(e) => log::info!("{} subsets; {e}", fam.len()),
            }
            emit(&fam.to_text(), out.as_ref())?;
        }
        Command::Pack {
            d,
            l,
            k,
            family,
            refine,
            seed,
            out,
        } => {
            let fam = match &family {
                Some(p) => SwitchFamily::from_text(&std::fs::read_to_string(p)?)?,
                None => SwitchFamily::enumerate_banked(l, k)?,
            };
            if fam.l() != l {
                return Err(Error::Argument(format!(
                    "family is over {} ports, not L={l}",
                    fam.l()
                )));
            }
            let mut t = line_pack(
                d,
                l,
                LinePackOptions {
                    seed,
                    ..Default::default()
                },
            )?;
            let mut method = "line_pack";
            if matches!(refine, Some(Refine::Greedy | Refine::Both)) {
                t = greedy_permute(&t, &fam)?.0;
                method = "greedy";
            }
            if matches!(refine, Some(Refine::Ascent | Refine::Both)) {
                t = gradient_ascent(&t, &fam, AscentOptions::default())?.beamformer;
                method = if method == "greedy" { "both" } else { "ascent" };
            }
            log::info!("f_FS = {:.6} rad", t.f_fs(&fam)?.radians());
            let header = DumpHeader {
                method: Some(method.into()),
                seed: Some(seed),
                family_hash: Some(fam.hash_hex()),
            };
            emit(&dump::to_text(t.as_matrix(), &header), out.as_ref())?;
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!(
                "ok: {} grid point(s), {} samples each",
                cfg.grid.len(),
                cfg.mc_samples
            );
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Ok(n) = std::env::var(THREADS_ENV) {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .expect("thread pool set once");
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got `{n}`");
                return ExitCode::from(2);
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
