use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use kinetic_dlr::benchmarks::{preset, PRESET_NAMES};
use kinetic_dlr::config::Problem;
use kinetic_dlr::runner::{convergence_study, run, write_outputs};
use kinetic_dlr::{Backend, FieldKind, Reconstruction, SimConfig};

#[derive(Parser)]
#[command(name = "kinetic-dlr", version, about = "Macro-micro low-rank Vlasov-Dougherty solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write diagnostics.
    Run {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Time-step self-convergence study on the final-time distribution.
    Convergence {
        #[command(flatten)]
        setup: Setup,
        /// Successively halved time steps, e.g. 4e-3,2e-3,1e-3.
        #[arg(long, value_delimiter = ',', required = true)]
        dts: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run several collision frequencies in parallel, one subdirectory each.
    Sweep {
        #[command(flatten)]
        setup: Setup,
        #[arg(long = "nus", value_delimiter = ',', required = true)]
        nus: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the built-in presets.
    Presets,
}

/// Base configuration plus per-field overrides; flags win over the file.
#[derive(Args, Clone, Default)]
struct Setup {
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_problem)]
    problem: Option<Problem>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long, value_parser = parse_backend)]
    backend: Option<Backend>,
    /// Highest Hermite mode.
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    nv: Option<usize>,
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    vmax: Option<f64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    order: Option<u8>,
    #[arg(long, value_parser = parse_field)]
    field: Option<FieldKind>,
    #[arg(long, value_parser = parse_recon)]
    reconstruction: Option<Reconstruction>,
    #[arg(long)]
    output_stride: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disable the Hermite filter.
    #[arg(long)]
    no_filter: bool,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_problem(s: &str) -> std::result::Result<Problem, String> {
    parse_enum(s)
}

fn parse_backend(s: &str) -> std::result::Result<Backend, String> {
    parse_enum(s)
}

fn parse_field(s: &str) -> std::result::Result<FieldKind, String> {
    parse_enum(s)
}

fn parse_recon(s: &str) -> std::result::Result<Reconstruction, String> {
    parse_enum(s)
}

impl Setup {
    fn resolve(&self) -> Result<SimConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let mut cfg = SimConfig::from_toml_str(&text)?;
                if let Some(name) = &self.preset {
                    // An explicit preset flag replaces the file's base.
                    let base = preset(name).with_context(|| format!("unknown preset '{name}'"))?;
                    let table: toml::Table = text.parse()?;
                    let mut merged = toml::Table::try_from(&base)?;
                    for (k, v) in table.into_iter().filter(|(k, _)| k != "preset") {
                        merged.insert(k, v);
                    }
                    cfg = merged.try_into()?;
                }
                cfg
            }
            (None, Some(name)) => preset(name).with_context(|| format!("unknown preset '{name}'"))?,
            (None, None) => SimConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { cfg.$f = v; } )* };
        }
        set!(problem, k, delta, nu, nx, backend, modes, nv, v0, vmax, rank, dt, t_end, order, field, reconstruction, output_stride, snapshot_times, seed);
        if self.rho0.is_some() {
            cfg.rho0 = self.rho0;
        }
        if self.no_filter {
            cfg.filter = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run_one(cfg: &SimConfig, out: &Path) -> Result<()> {
    let result = run(cfg).context("simulation failed")?;
    write_outputs(out, cfg, &result)?;
    if let Some(last) = result.records.last() {
        log::info!(
            "t = {:.3}: charge drift {:.2e}, current drift {:.2e}, energy drift {:.2e}",
            last.t,
            last.charge_drift,
            last.current_drift,
            last.energy_drift
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { setup, out } => {
            let cfg = setup.resolve()?;
            run_one(&cfg, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Convergence { setup, dts, out } => {
            let cfg = setup.resolve()?;
            let res = convergence_study(&cfg, &dts)?;
            std::fs::create_dir_all(&out)?;
            let mut csv = String::from("dt,error\n");
            for (dt, e) in res.dts.iter().zip(&res.errors) {
                match e {
                    Some(e) => csv.push_str(&format!("{dt:e},{e:e}\n")),
                    None => csv.push_str(&format!("{dt:e},unstable\n")),
                }
            }
            std::fs::write(out.join("convergence.csv"), csv)?;
            println!("observed order {:.3}", res.order);
        }
        Command::Sweep { setup, nus, out } => {
            let cfg = setup.resolve()?;
            if nus.iter().any(|nu| !(*nu >= 0.0)) {
                bail!("collision frequencies must be nonnegative");
            }
            nus.par_iter()
                .map(|&nu| {
                    let c = SimConfig { nu, ..cfg.clone() };
                    run_one(&c, &out.join(format!("nu_{nu}")))
                })
                .collect::<Result<Vec<_>>>()?;
            println!("wrote {} runs to {}", nus.len(), out.display());
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
        }
    }
    Ok(())
}
