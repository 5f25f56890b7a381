//! `exciton`: run transport simulations, sensitivity analyses, sweeps and
//! ensembles, writing CSV/JSON tables plus a `manifest.json` per run.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! failure.

mod overrides;
mod presets;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use exciton_core::dynamics::{self, initial_state};
use exciton_core::ensemble::{self, EnsembleSpec, SweepSpec};
use exciton_core::{
    build_generator, fim, importance_by_group, sloppiness_metrics, EvolveOptions, FimOptions, FimResult, FomKind,
    Mode, NetworkConfig, SpectralKind,
};

use presets::{NetworkPreset, SweepPreset};

#[derive(Parser)]
#[command(name = "exciton", version, about = "Exciton transport and parameter sensitivity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// JSON input: a network config, or a sweep/ensemble spec.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a field of the input by dotted path, e.g. `sites.1.energy=1.9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Spectral density, overriding the input.
    #[arg(long)]
    spectrum: Option<SpectralKind>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Population dynamics and exit-time distributions.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = NetworkPreset::Square)]
        preset: NetworkPreset,
        /// Integration horizon in ns.
        #[arg(long, default_value_t = 50.0)]
        t_max: f64,
        /// Stop once the population left in the network drops below this.
        #[arg(long, default_value_t = 1e-4)]
        completion_tol: f64,
    },
    /// Fisher information matrix, spectrum and importance profile.
    Fim {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = NetworkPreset::Square)]
        preset: NetworkPreset,
        #[arg(long, default_value_t = FomKind::Arrival)]
        kind: FomKind,
    },
    /// Non-equilibrium steady state under continuous injection.
    Steady {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = NetworkPreset::Square)]
        preset: NetworkPreset,
    },
    /// Chain sweeps and the multi-geometry importance comparison.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = SweepPreset::Coupling)]
        preset: SweepPreset,
        #[arg(long)]
        kind: Option<FomKind>,
    },
    /// Random networks with parameter disorder.
    Ensemble {
        #[command(flatten)]
        common: Common,
        /// Retained sample count.
        #[arg(long)]
        samples: Option<usize>,
        /// Figure of merit; repeat to evaluate several on the same samples.
        #[arg(long)]
        kind: Vec<FomKind>,
    },
}

#[derive(Debug)]
enum Failure {
    Io(String),
    Config(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "I/O error: {m}"),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numeric(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<exciton_core::Error> for Failure {
    fn from(e: exciton_core::Error) -> Self {
        match e {
            exciton_core::Error::Io(_) | exciton_core::Error::Csv(_) => Failure::Io(e.to_string()),
            e if e.is_config() => Failure::Config(e.to_string()),
            e => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Output directory plus the list of files written, for the manifest.
struct Run {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl Run {
    fn new(dir: &Path) -> Outcome<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Outcome<BufWriter<File>> {
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Outcome<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Io(e.to_string()))?;
        std::io::Write::write_all(&mut w, b"\n")?;
        Ok(())
    }

    fn manifest(mut self, command: &str, options: Value, input: &Value) -> Outcome<()> {
        self.json("input.json", input)?;
        let manifest = json!({
            "program": "exciton",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "options": options,
            "input": input,
            "outputs": self.outputs,
        });
        let mut w = BufWriter::new(File::create(self.dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| Failure::Io(e.to_string()))?;
        std::io::Write::write_all(&mut w, b"\n")?;
        Ok(())
    }
}

/// Input document: the file if given, else the preset, with overrides
/// applied, then parsed strictly.
fn resolve<T: Serialize + DeserializeOwned>(
    common: &Common,
    default: impl FnOnce() -> Outcome<T>,
    tweak: impl FnOnce(&mut Value),
) -> Outcome<(T, Value)> {
    let base: T = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => default()?,
    };
    let mut doc = serde_json::to_value(&base).map_err(|e| Failure::Config(e.to_string()))?;
    tweak(&mut doc);
    overrides::apply_all(&mut doc, &common.sets).map_err(Failure::Config)?;
    let value: T = serde_json::from_value(doc).map_err(|e| Failure::Config(e.to_string()))?;
    let canonical = serde_json::to_value(&value).map_err(|e| Failure::Config(e.to_string()))?;
    Ok((value, canonical))
}

fn resolve_network(common: &Common, preset: NetworkPreset) -> Outcome<(NetworkConfig, Value)> {
    let (cfg, _) = resolve(
        common,
        || Ok(preset.build(common.seed)?),
        |doc| {
            if let Some(k) = common.spectrum {
                doc["spectral_kind"] = json!(k);
            }
        },
    )?;
    cfg.validate()?;
    let cfg = cfg.resolved();
    let value = serde_json::to_value(&cfg).map_err(|e| Failure::Config(e.to_string()))?;
    Ok((cfg, value))
}

fn simulate(common: &Common, preset: NetworkPreset, t_max: f64, completion_tol: f64) -> Outcome<()> {
    let (cfg, input) = resolve_network(common, preset)?;
    if !(t_max > 0.0) {
        return Err(Failure::Config("--t-max must be positive".into()));
    }
    if !(completion_tol > 0.0 && completion_tol < 1.0) {
        return Err(Failure::Config("--completion-tol must lie in (0, 1)".into()));
    }
    let gen = build_generator(&cfg, Mode::Transient)?;
    let opts = EvolveOptions {
        t_max_ns: t_max,
        completion_tol,
        ..Default::default()
    };
    let traj = dynamics::evolve(&gen, &initial_state(&gen), &opts)?;
    let arrival = dynamics::arrival_time_distribution(&traj, &gen);
    let loss = dynamics::loss_time_distribution(&traj, &gen);

    let mut run = Run::new(&common.out)?;
    dynamics::write_trajectory_csv(run.create("trajectory.csv")?, &traj, arrival.as_ref().ok(), loss.as_ref().ok())?;
    {
        let mut w = csv::Writer::from_writer(run.create("distribution.csv")?);
        let col = |d: &exciton_core::Result<exciton_core::ArrivalDistribution>, k: usize| {
            d.as_ref().map(|d| d.density[k].to_string()).unwrap_or_default()
        };
        w.write_record(["time_ns", "f_arrival", "f_loss"])?;
        for k in 0..traj.len() {
            w.write_record([traj.times_ns[k].to_string(), col(&arrival, k), col(&loss, k)])?;
        }
        w.flush()?;
    }
    let last = traj.len() - 1;
    let moments = arrival.as_ref().ok().map(dynamics::arrival_moments);
    let summary = json!({
        "completed": traj.completed,
        "completion_time_ns": traj.completion_time_ns,
        "dt_ns": traj.dt_ns,
        "steps": last,
        "p_max": traj.trap[last],
        "p_loss": traj.ground[last],
        "max_trace_error": traj.max_trace_error,
        "min_eigenvalue": traj.min_eigenvalue,
        "positivity_breaches": traj.positivity_breaches,
        "arrival_mean_ns": moments.map(|m| m.0),
        "arrival_variance_ns2": moments.map(|m| m.1),
        "arrival_error": arrival.as_ref().err().map(|e| e.to_string()),
        "loss_error": loss.as_ref().err().map(|e| e.to_string()),
    });
    run.json("summary.json", &summary)?;
    run.manifest(
        "simulate",
        json!({"t_max_ns": t_max, "completion_tol": completion_tol, "seed": common.seed}),
        &input,
    )?;
    // both files are written either way; a missing density still fails the run
    arrival?;
    loss?;
    Ok(())
}

fn io<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Io(e.to_string())
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        io(e)
    }
}

fn write_fim(run: &mut Run, prefix: &str, r: &FimResult) -> Outcome<()> {
    r.write_json(run.create(&format!("{prefix}.json"))?)?;
    r.write_matrix_csv(run.create(&format!("{prefix}_matrix.csv"))?)?;
    r.write_spectrum_csv(run.create(&format!("{prefix}_spectrum.csv"))?)?;
    r.write_importance_csv(run.create(&format!("{prefix}_importance.csv"))?)?;
    let mut w = csv::Writer::from_writer(run.create(&format!("{prefix}_groups.csv"))?);
    w.write_record(["group", "total", "mean", "min", "max"])?;
    for (g, s) in importance_by_group(r) {
        w.write_record([
            g.name().to_string(),
            s.total.to_string(),
            s.mean.to_string(),
            s.min.to_string(),
            s.max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn fim_cmd(common: &Common, preset: NetworkPreset, kind: FomKind) -> Outcome<()> {
    let (cfg, input) = resolve_network(common, preset)?;
    let opts = FimOptions::default();
    let r = fim(&cfg, kind, &opts)?;
    let mut run = Run::new(&common.out)?;
    write_fim(&mut run, "fim", &r)?;
    run.json("sloppiness.json", &sloppiness_metrics(&r))?;
    run.manifest("fim", json!({"kind": kind, "fim_options": opts, "seed": common.seed}), &input)
}

fn steady_cmd(common: &Common, preset: NetworkPreset) -> Outcome<()> {
    let (cfg, input) = resolve_network(common, preset)?;
    let gen = build_generator(&cfg, Mode::Steady)?;
    let ss = dynamics::steady_state(&gen)?;
    let hs = cfg.hilbert();
    let mut run = Run::new(&common.out)?;
    let mut w = csv::Writer::from_writer(run.create("steady_populations.csv")?);
    w.write_record(["state", "population"])?;
    w.write_record(["ground".to_string(), ss.rho[(hs.ground(), hs.ground())].re.to_string()])?;
    for i in 1..=cfg.n_sites {
        let k = hs.site(i);
        w.write_record([format!("p{i}"), ss.rho[(k, k)].re.to_string()])?;
    }
    w.write_record(["trap".to_string(), ss.rho[(hs.trap(), hs.trap())].re.to_string()])?;
    w.flush()?;
    run.json(
        "steady.json",
        &json!({
            "current_ev": ss.current,
            "current_per_ns": ss.current_per_ns(&gen),
            "residual": ss.residual,
        }),
    )?;
    run.manifest("steady", json!({"seed": common.seed}), &input)
}

fn sweep_cmd(common: &Common, preset: SweepPreset, kind: Option<FomKind>) -> Outcome<()> {
    let opts = FimOptions::default();
    if preset == SweepPreset::Fig3 {
        if common.config.is_some() || !common.sets.is_empty() {
            return Err(Failure::Config("the fig3 preset takes no --config or --set".into()));
        }
        let seed = common.seed.unwrap_or(presets::FIG3_SEED);
        let kind = kind.unwrap_or(FomKind::Arrival);
        let table = presets::fig3(seed, kind, &opts)?;
        let mut run = Run::new(&common.out)?;
        presets::write_fig3(&mut run, &table)?;
        let input = json!({"seed": seed, "kind": kind, "geometries": table.geometries});
        return run.manifest("sweep", json!({"preset": "fig3", "fim_options": opts}), &input);
    }
    let (spec, input) = resolve::<SweepSpec>(
        common,
        || Ok(preset.spec()),
        |doc| {
            if let Some(k) = common.spectrum {
                doc["base"]["spectral_kind"] = json!(k);
            }
            if let Some(k) = kind {
                doc["kind"] = json!(k);
            }
        },
    )?;
    let table = ensemble::sweep_chain(&spec, &opts)?;
    let mut run = Run::new(&common.out)?;
    table.write_csv(run.create("sweep.csv")?)?;
    table.write_json(run.create("sweep.json")?)?;
    run.manifest("sweep", json!({"preset": preset, "fim_options": opts}), &input)
}

fn ensemble_cmd(common: &Common, samples: Option<usize>, kinds: &[FomKind]) -> Outcome<()> {
    let (spec, input) = resolve::<EnsembleSpec>(
        common,
        || Ok(EnsembleSpec::default()),
        |doc| {
            if let Some(k) = common.spectrum {
                doc["base"]["spectral_kind"] = json!(k);
            }
            if let Some(s) = common.seed {
                doc["seed"] = json!(s);
            }
            if let Some(n) = samples {
                doc["samples"] = json!(n);
            }
            if let Some(k) = kinds.first() {
                doc["kind"] = json!(k);
            }
        },
    )?;
    let kinds = if kinds.is_empty() { vec![spec.kind] } else { kinds.to_vec() };
    let opts = FimOptions::default();
    let results = ensemble::run_ensemble_kinds(&spec, &kinds, &opts)?;
    let mut run = Run::new(&common.out)?;
    for r in &results {
        let p = format!("ensemble_{}", r.kind);
        r.write_json(run.create(&format!("{p}.json"))?)?;
        r.write_summary_csv(run.create(&format!("{p}_summary.csv"))?)?;
        r.write_groups_csv(run.create(&format!("{p}_groups.csv"))?)?;
        r.write_samples_csv(run.create(&format!("{p}_samples.csv"))?)?;
    }
    run.manifest("ensemble", json!({"kinds": kinds, "fim_options": opts}), &input)
}

fn dispatch(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Simulate {
            common,
            preset,
            t_max,
            completion_tol,
        } => simulate(&common, preset, t_max, completion_tol),
        Command::Fim { common, preset, kind } => fim_cmd(&common, preset, kind),
        Command::Steady { common, preset } => steady_cmd(&common, preset),
        Command::Sweep { common, preset, kind } => sweep_cmd(&common, preset, kind),
        Command::Ensemble { common, samples, kind } => ensemble_cmd(&common, samples, &kind),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("exciton: {e}");
            ExitCode::from(e.code())
        }
    }
}
