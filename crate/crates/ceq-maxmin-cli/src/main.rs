//! `ceqmm`: experiment runner and self-test for max-min SQINR beamforming
//! under constant-envelope quantization.

mod config;
mod plots;
mod sweep;

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ceq_maxmin::metrics::RateRow;
use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "ceqmm", version, about = "Max-min SQINR beamforming experiments for CEQ MIMO-OFDM downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep declared in a TOML config and write CSVs plus plot
    /// scripts into the output directory.
    Run {
        /// Experiment configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Worker thread count (defaults to the core count).
        #[arg(long)]
        workers: Option<usize>,
        /// Replaces the seed declared in the config.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run the invariant self-test suite and report measured vs allowed
    /// tolerances; exits nonzero on any failure.
    Validate {
        /// Seed of the randomized checks.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Debug hook: corrupt the sign of the quantization coupling to
        /// demonstrate that the duality check catches it.
        #[arg(long, hide = true)]
        inject_phi_sign_error: bool,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            workers,
            seed_override,
        } => run_command(&config, &out, workers, seed_override),
        Command::Validate {
            seed,
            inject_phi_sign_error,
        } => validate_command(seed, inject_phi_sign_error),
    }
}

fn run_command(
    config_path: &PathBuf,
    out_dir: &PathBuf,
    workers: Option<usize>,
    seed_override: Option<u64>,
) -> Result<()> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let file = config::ExperimentFile::parse(&text)?;
    let master_seed = seed_override.unwrap_or(file.experiment.seed);
    let config_hash = hex_digest(text.as_bytes());

    let points = sweep::enumerate_points(&file)?;
    eprintln!(
        "experiment {:?}: {} points x {} trials (seed {master_seed})",
        file.experiment.name,
        points.len(),
        file.experiment.trials
    );

    let outputs = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building worker pool")?
            .install(|| sweep::run_all_points(&file, &points, master_seed)),
        None => sweep::run_all_points(&file, &points, master_seed),
    }?;

    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    // rates.csv: every row carries the full provenance columns.
    let max_users = file.experiment.k_users.iter().copied().max().unwrap_or(0);
    let provenance = format!(",{config_hash},{master_seed},{}", env!("CARGO_PKG_VERSION"));
    let mut rates = format!(
        "{},config_hash,seed,version\n",
        RateRow::csv_header(max_users).trim_end()
    );
    for o in &outputs {
        let row = o.rate_row.to_csv(max_users);
        rates.push_str(row.trim_end());
        rates.push_str(&provenance);
        rates.push('\n');
    }
    fs::write(out_dir.join("rates.csv"), rates).context("writing rates.csv")?;

    let mut traces =
        String::from("point_id,realization,algorithm,trace,iteration,lambda_max,min_ratio\n");
    for o in &outputs {
        traces.push_str(&o.trace_rows);
    }
    fs::write(out_dir.join("traces.csv"), traces).context("writing traces.csv")?;

    if file.linksim.is_some() {
        let mut link = String::from("point_id,realization,algorithm,kind,user,subcarrier,value\n");
        for o in &outputs {
            link.push_str(&o.linksim_rows);
        }
        fs::write(out_dir.join("linksim.csv"), link).context("writing linksim.csv")?;
        fs::write(out_dir.join("plot_ber.py"), plots::PLOT_BER).context("writing plot_ber.py")?;
    }
    fs::write(out_dir.join("plot_rates.py"), plots::PLOT_RATES).context("writing plot_rates.py")?;

    let manifest = format!(
        "name = {:?}\nconfig_hash = {:?}\nseed = {}\nversion = {:?}\npoints = {}\ntrials = {}\nrows = {}\n",
        file.experiment.name,
        config_hash,
        master_seed,
        env!("CARGO_PKG_VERSION"),
        points.len(),
        file.experiment.trials,
        outputs.len(),
    );
    fs::write(out_dir.join("manifest.toml"), manifest).context("writing manifest.toml")?;

    let infeasible = outputs
        .iter()
        .filter(|o| o.rate_row.status != "ok")
        .count();
    eprintln!(
        "{} rows written to {} ({} infeasible)",
        outputs.len(),
        out_dir.display(),
        infeasible
    );
    Ok(())
}

fn validate_command(seed: u64, inject_phi_sign_error: bool) -> Result<()> {
    let options = ceq_maxmin::selftest::SelfTestOptions {
        inject_phi_sign_error,
    };
    let reports = ceq_maxmin::selftest::run_all(seed, options)
        .map_err(|e| anyhow::anyhow!("self-test aborted: {e}"))?;
    let mut failures = 0;
    println!("{:<55} {:>12} {:>12}  verdict", "check", "measured", "allowed");
    for r in &reports {
        let verdict = if r.passed() { "pass" } else { "FAIL" };
        if !r.passed() {
            failures += 1;
        }
        println!("{:<55} {:>12.3e} {:>12.3e}  {verdict}", r.name, r.measured, r.allowed);
    }
    if failures > 0 {
        bail!("{failures} of {} checks failed", reports.len());
    }
    println!("all {} checks passed", reports.len());
    Ok(())
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
