use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use normalnet_core::gnf::GnfParams;
use normalnet_core::metrics::{angular_error, AngleStat};
use normalnet_core::pipeline::{
    denoise_learned, for_each_training_chunk, init_weights, network_spec, train_network,
    DataOptions, Dataset, DatasetWriter, LearnedParams, ModelSet, PipelineConfig, PresetTable,
    TrainOptions, TupleSource,
};
use normalnet_core::voxel::{save_grid, Voxelizer};
use normalnet_core::{
    add_noise, gnf_denoise, load_mesh, save_mesh, vertex_l2_error, MeshFormat, MetricReport,
    NoiseDirection, NoiseKind, NoiseSpec, Precision, TriangleMesh,
};
use normalnet_nn::{load_weights, save_weights};

#[derive(Parser)]
#[command(name = "normalnet", version, about = "Triangle mesh denoising")]
struct Cli {
    /// JSON run configuration; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Perturb vertices of a clean mesh.
    AddNoise(AddNoise),
    /// Classical guided normal filtering.
    DenoiseGnf(DenoiseGnf),
    /// Learned normal filtering with trained networks.
    DenoiseNet(DenoiseNet),
    /// Write the grid of one face.
    Voxelize(Voxelize),
    /// Sample faces of noisy/truth pairs into a training directory.
    GenData(GenData),
    /// Train one network on a training directory.
    Train(Train),
    /// Compare a mesh against its ground truth.
    Eval(Eval),
}

/// Overrides for the shared run configuration.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    nf: Option<usize>,
    #[arg(long)]
    nv: Option<usize>,
    #[arg(long)]
    mu_g: Option<f64>,
    /// Grid half extent in cubes.
    #[arg(long)]
    ts: Option<usize>,
    #[arg(long)]
    alpha_c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Take nf, nv and mu_g from a named model preset first.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Gaussian,
    Impulsive,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    VertexNormal,
    Random,
}

#[derive(Args)]
struct AddNoise {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Standard deviation as a multiple of the mean edge length.
    #[arg(long)]
    level: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    kind: KindArg,
    /// Share of vertices moved by impulsive noise.
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long, value_enum, default_value = "vertex-normal")]
    direction: DirectionArg,
    #[command(flatten)]
    run: Overrides,
}

#[derive(Args)]
struct DenoiseGnf {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    run: Overrides,
}

#[derive(Args)]
struct DenoiseNet {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Directory of `cnn_K.nnwt` files, or one file used for every iteration.
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    run: Overrides,
}

#[derive(Args)]
struct Voxelize {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    face: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    run: Overrides,
}

#[derive(Args)]
struct GenData {
    /// Noisy meshes, paired in order with `--truth`.
    #[arg(long = "noisy", required = true)]
    noisy: Vec<PathBuf>,
    #[arg(long = "truth", required = true)]
    truth: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Faces drawn per category.
    #[arg(long, default_value_t = 45_000)]
    quota: usize,
    #[arg(long, default_value_t = 1)]
    stage: usize,
    #[command(flatten)]
    run: Overrides,
}

#[derive(Args)]
struct Train {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 80)]
    batch: usize,
    /// Continue from these weights instead of a fresh start.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[command(flatten)]
    run: Overrides,
}

#[derive(Args)]
struct Eval {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Also write the metrics as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Report the mean squared angle instead of the mean angle.
    #[arg(long)]
    squared: bool,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let base = match &cli.config {
        Some(p) => {
            PipelineConfig::load(p).with_context(|| format!("reading config {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::AddNoise(a) => add_noise_cmd(a, base),
        Command::DenoiseGnf(a) => denoise_gnf_cmd(a, base),
        Command::DenoiseNet(a) => denoise_net_cmd(a, base),
        Command::Voxelize(a) => voxelize_cmd(a, base),
        Command::GenData(a) => gen_data_cmd(a, base),
        Command::Train(a) => train_cmd(a, base),
        Command::Eval(a) => eval_cmd(a),
    }
}

fn resolve(mut cfg: PipelineConfig, o: &Overrides) -> Result<PipelineConfig> {
    if let Some(name) = &o.preset {
        let table = PresetTable::builtin();
        let p = table
            .get(name)
            .with_context(|| format!("no preset named {name}"))?;
        cfg.apply_preset(p);
    }
    macro_rules! take {
        ($($f:ident),*) => { $(if let Some(v) = o.$f { cfg.$f = v; })* };
    }
    take!(nf, nv, mu_g, ts, alpha_c, seed);
    cfg.validate()?;
    Ok(cfg)
}

fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let fmt = MeshFormat::from_path(path)?;
    load_mesh(path, fmt).with_context(|| format!("reading {}", path.display()))
}

fn write_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let fmt = MeshFormat::from_path(path)?;
    save_mesh(mesh, path, fmt, Precision::Significant(9))
        .with_context(|| format!("writing {}", path.display()))
}

fn read_truth(path: Option<&Path>) -> Result<Option<TriangleMesh>> {
    path.map(read_mesh).transpose()
}

fn print_trace(trace: &[f64]) {
    for (i, e) in trace.iter().enumerate() {
        println!("iteration {}: E_a={e:.4}", i + 1);
    }
}

fn add_noise_cmd(a: AddNoise, base: PipelineConfig) -> Result<()> {
    let cfg = resolve(base, &a.run)?;
    let mesh = read_mesh(&a.input)?;
    let spec = NoiseSpec {
        kind: match a.kind {
            KindArg::Gaussian => NoiseKind::Gaussian,
            KindArg::Impulsive => NoiseKind::Impulsive,
        },
        level: a.level,
        impulse_fraction: a.fraction,
        seed: cfg.seed,
        direction: match a.direction {
            DirectionArg::VertexNormal => NoiseDirection::VertexNormal,
            DirectionArg::Random => NoiseDirection::Random,
        },
    };
    write_mesh(&add_noise(&mesh, &spec)?, &a.out)
}

fn denoise_gnf_cmd(a: DenoiseGnf, base: PipelineConfig) -> Result<()> {
    let cfg = resolve(base, &a.run)?;
    let mesh = read_mesh(&a.input)?;
    let truth = read_truth(a.truth.as_deref())?;
    let params = GnfParams {
        mu_g: cfg.mu_g,
        nf: cfg.nf,
        nv: cfg.nv,
        ..Default::default()
    };
    let out = gnf_denoise(&mesh, &params, truth.as_ref())?;
    print_trace(&out.trace);
    if out.warnings > 0 {
        log::warn!(
            "{} faces kept their normal after a vanishing filter sum",
            out.warnings
        );
    }
    write_mesh(&out.mesh, &a.out)
}

fn denoise_net_cmd(a: DenoiseNet, base: PipelineConfig) -> Result<()> {
    let cfg = resolve(base, &a.run)?;
    let mesh = read_mesh(&a.input)?;
    let truth = read_truth(a.truth.as_deref())?;
    let spec = network_spec(cfg.ts, &cfg.mu_g_list);
    let models = ModelSet::load(spec, &a.weights)
        .with_context(|| format!("loading weights from {}", a.weights.display()))?;
    let params = LearnedParams {
        nf: cfg.nf,
        nv: cfg.nv,
        mu_g: cfg.mu_g,
        voxel: cfg.voxel(),
    };
    let out = denoise_learned(&mesh, &models, &params, truth.as_ref())?;
    print_trace(&out.trace);
    write_mesh(&out.mesh, &a.out)
}

fn voxelize_cmd(a: Voxelize, base: PipelineConfig) -> Result<()> {
    let cfg = resolve(base, &a.run)?;
    let mesh = read_mesh(&a.input)?;
    let grid = Voxelizer::new(&mesh, &cfg.voxel())?.face(a.face)?;
    info!(
        "face {}: {} occupied cubes, {} cancelled, cube size {}",
        a.face,
        grid.occupied(),
        grid.cancelled(),
        grid.cube_size()
    );
    save_grid(&grid, &a.out)?;
    Ok(())
}

fn gen_data_cmd(a: GenData, base: PipelineConfig) -> Result<()> {
    let cfg = resolve(base, &a.run)?;
    if a.noisy.len() != a.truth.len() {
        bail!(
            "{} noisy meshes but {} ground-truth meshes",
            a.noisy.len(),
            a.truth.len()
        );
    }
    let pairs = a
        .noisy
        .iter()
        .zip(&a.truth)
        .map(|(n, t)| Ok((read_mesh(n)?, read_mesh(t)?)))
        .collect::<Result<Vec<_>>>()?;
    let opts = DataOptions {
        voxel: cfg.voxel(),
        mu_g_list: cfg.mu_g_list.clone(),
        ..Default::default()
    };
    let mut writer = DatasetWriter::create(&a.out)?;
    let shortfalls =
        for_each_training_chunk(&pairs, a.quota, cfg.seed, &opts, a.stage, 256, |c| {
            c.iter().try_for_each(|t| writer.push(t).map(drop))
        })?;
    let n = writer.finish()?;
    for s in shortfalls {
        log::warn!(
            "category {} supplied only {} faces",
            s.category.label(),
            s.available
        );
    }
    println!("wrote {n} tuples to {}", a.out.display());
    Ok(())
}

fn train_cmd(a: Train, base: PipelineConfig) -> Result<()> {
    let cfg = resolve(base, &a.run)?;
    let data = Dataset::open(&a.data)
        .with_context(|| format!("opening training data {}", a.data.display()))?;
    if data.heads() != cfg.n_heads {
        bail!(
            "training data has {} target normals per tuple, config expects {}",
            data.heads(),
            cfg.n_heads
        );
    }
    let spec = network_spec(cfg.ts, &cfg.mu_g_list);
    let mut weights = match &a.init {
        Some(p) => load_weights(p)?,
        None => init_weights(&spec, cfg.seed)?,
    };
    let opts = TrainOptions {
        epochs: a.epochs,
        batch: a.batch,
        seed: cfg.seed,
        max_steps: a.max_steps,
        stop_below: None,
    };
    let report = train_network(&spec, &mut weights, &data, &opts, |step, loss| {
        if step % 50 == 0 {
            info!("step {step}: loss {loss:.6}");
        }
    })?;
    save_weights(&weights, &a.out)?;
    println!(
        "trained {} steps, final loss {:.6}",
        report.steps,
        report.last_loss().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn eval_cmd(a: Eval) -> Result<()> {
    let mesh = read_mesh(&a.input)?;
    let truth = read_truth(Some(&a.truth))?.expect("truth given");
    let stat = if a.squared {
        AngleStat::MeanSquare
    } else {
        AngleStat::Mean
    };
    let report = MetricReport {
        e_a: angular_error(&mesh, &truth, stat)?,
        e_v: vertex_l2_error(&mesh, &truth)?,
        faces: mesh.num_faces(),
        vertices: mesh.num_vertices(),
    };
    println!("E_a={} E_v={}", report.e_a, report.e_v);
    if let Some(p) = &a.json {
        fs::write(p, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
