use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use reparam_cli::{acceptance, service};
use reparam_core::constraints::{enumerate_candidates, DEFAULT_EPS_REL};
use reparam_core::csg::{tessellate_visible, Model};
use reparam_core::discovery::{
    discover_with_pool, Aggregate, DiscoveryConfig, ProjectionMethod, Projector, Variation,
    VariationSet,
};
use reparam_core::io::{self, PoolDocument, Provenance, TraceDocument, VariationDocument};
use reparam_core::numeric::{fit_to_images, FitConfig};
use reparam_core::raster::{render_targets, sample_cameras, DEFAULT_CAMERAS, DEFAULT_SIZE};
use reparam_core::reparam::{build_space, ManipulationSpace, ManipulationState};
use reparam_core::synth::{default_spec, synth_variations, SyntheticSpec};

#[derive(Parser)]
#[command(
    name = "reparam",
    version,
    about = "Constraint discovery and re-parameterization for CSG models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List candidate constraints satisfied by a model.
    Enumerate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPS_REL)]
        eps_rel: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic variations from a known constraint subset.
    Synth {
        #[arg(long)]
        model: PathBuf,
        /// Noise as a fraction of the bounding-box diagonal.
        #[arg(long, default_value_t = 0.005)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Variations to draw when no spec is given.
        #[arg(long, default_value_t = 6)]
        count: usize,
        /// Ground truth and offsets; defaults to the whole pool and random offsets.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_EPS_REL)]
        eps_rel: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model's parameters to a pack of target images.
    Fit {
        #[arg(long)]
        model: PathBuf,
        /// Directory written by `render`.
        #[arg(long)]
        images: PathBuf,
        #[arg(long, default_value_t = 30)]
        iters: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 0.001)]
        lambda: f64,
        /// Fitted model document.
        #[arg(long)]
        out: PathBuf,
        /// Also append the fit to this variation document, creating it if needed.
        #[arg(long, requires = "label")]
        append: Option<PathBuf>,
        #[arg(long)]
        label: Option<String>,
    },
    /// Discover constraints and optional parts, and write a manipulation space.
    Discover {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        variations: PathBuf,
        /// Candidate pool; enumerated from the model when omitted.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Trace document; defaults to `<out>.trace.json` next to a `.tsv` table.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, value_enum, default_value = "mean")]
        aggregate: AggregateArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_CAMERAS)]
        cameras: usize,
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
        /// Let free variables leave the range spanned by the variations.
        #[arg(long)]
        unbounded: bool,
    },
    /// Evaluate a manipulation state.
    Reparam {
        #[arg(long)]
        space: PathBuf,
        /// `default`, a slider label, or a state document.
        #[arg(long, default_value = "default")]
        state: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a model to a target pack of PNG images.
    Render {
        #[arg(long)]
        model: PathBuf,
        /// Render this variation instead of the base parameters.
        #[arg(long, requires = "label")]
        variations: Option<PathBuf>,
        #[arg(long)]
        label: Option<String>,
        /// Scale one parameter of the base, as `index=factor`.
        #[arg(long, conflicts_with = "variations")]
        perturb: Option<String>,
        #[arg(long, default_value_t = DEFAULT_CAMERAS)]
        cameras: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SIZE)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a model or an evaluated state as OBJ.
    ExportMesh {
        #[arg(long, required_unless_present = "space", conflicts_with = "space")]
        model: Option<PathBuf>,
        #[arg(long)]
        space: Option<PathBuf>,
        /// `default`, a slider label, or a state document (spaces only).
        #[arg(long, default_value = "default")]
        state: String,
        #[arg(long, default_value_t = service::MESH_SEGMENTS)]
        segments: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a manipulation space over HTTP.
    Serve {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Run acceptance criteria A1 to A10.
    Acceptance {
        /// Criteria to run, e.g. `--only A4,A7`.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Faces,
    Image,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregateArg {
    Mean,
    Max,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    init_threads()?;
    match cli.command {
        Command::Enumerate {
            model,
            eps_rel,
            out,
        } => {
            let m = io::load_model(&model)?;
            let pool = enumerate_candidates(&m, &m.flatten(), eps_rel)?;
            let text = io::to_text(&PoolDocument::new(&m, &pool)?)?;
            emit(out.as_deref(), &text)?;
            eprintln!("{} candidates", pool.len());
        }
        Command::Synth {
            model,
            sigma,
            seed,
            count,
            spec,
            eps_rel,
            out,
        } => synth(&model, sigma, seed, count, spec.as_deref(), eps_rel, &out)?,
        Command::Fit {
            model,
            images,
            iters,
            lr,
            lambda,
            out,
            append,
            label,
        } => {
            let m = io::load_model(&model)?;
            let targets = io::load_targets(&images)?;
            let config = FitConfig { iters, lr, lambda };
            let report = fit_to_images(&m, &m.flatten(), &targets, &config)?;
            eprintln!(
                "loss {:.4e} -> {:.4e} in {} iterations",
                report.losses[0],
                report.final_loss(),
                report.iterations
            );
            let params: Vec<f64> = report.params.iter().copied().collect();
            io::save_model(&out, &m.unflatten(&params)?)?;
            if let (Some(path), Some(label)) = (append, label) {
                append_variation(&m, &path, label, params)?;
            }
        }
        Command::Discover {
            model,
            variations,
            pool,
            out,
            trace,
            method,
            aggregate,
            seed,
            cameras,
            threshold,
            unbounded,
        } => {
            let config = DiscoveryConfig {
                method: method.map(|m| match m {
                    MethodArg::Faces => ProjectionMethod::Faces,
                    MethodArg::Image => ProjectionMethod::Image,
                }),
                aggregate: match aggregate {
                    AggregateArg::Mean => Aggregate::Mean,
                    AggregateArg::Max => Aggregate::Max,
                },
                seed,
                cameras,
                discrete_threshold: threshold,
                ..DiscoveryConfig::default()
            };
            let trace = trace.unwrap_or_else(|| sibling(&out, "trace.json"));
            discover(
                &model,
                &variations,
                pool.as_deref(),
                &config,
                !unbounded,
                &out,
                &trace,
            )?;
        }
        Command::Reparam { space, state, out } => {
            let space = io::load_space(&space)?;
            let st = resolve_state(&space, &state)?;
            let ev = space.evaluate(&st)?;
            for w in &ev.warnings {
                log::warn!("{w}");
            }
            let text = serde_json::to_string_pretty(&ev)? + "\n";
            emit(out.as_deref(), &text)?;
        }
        Command::Render {
            model,
            variations,
            label,
            perturb,
            cameras,
            seed,
            size,
            out,
        } => {
            let m = io::load_model(&model)?;
            let mut x = m.flatten().into_inner();
            if let (Some(path), Some(label)) = (variations, label) {
                let set = io::load_variations(&path)?.into_set(&m)?;
                let i = set
                    .position(&label)
                    .with_context(|| format!("no variation {label:?}"))?;
                x = set.variations[i].params.to_vec();
            }
            if let Some(p) = perturb {
                let (i, f) = p
                    .split_once('=')
                    .context("--perturb expects index=factor")?;
                let i: usize = i.parse().context("perturb index")?;
                let f: f64 = f.parse().context("perturb factor")?;
                ensure!(i < x.len(), "perturb index {i} outside 0..{}", x.len());
                x[i] *= f;
            }
            let cams = sample_cameras(seed, cameras, &m.aabb(&x))?;
            io::save_targets(&out, &render_targets(&m, &x, &cams, size)?)?;
        }
        Command::ExportMesh {
            model,
            space,
            state,
            segments,
            out,
        } => {
            let (m, x, visible) = match (model, space) {
                (Some(path), _) => {
                    ensure!(
                        state == "default",
                        "--state other than default needs --space"
                    );
                    let m = io::load_model(&path)?;
                    let x = m.flatten().into_inner();
                    let visible = vec![true; m.primitive_count()];
                    (m, x, visible)
                }
                (None, Some(path)) => {
                    let space = io::load_space(&path)?;
                    let ev = space.evaluate(&resolve_state(&space, &state)?)?;
                    (space.model.clone(), ev.params.into_inner(), ev.visible)
                }
                (None, None) => bail!("need --model or --space"),
            };
            let mesh = tessellate_visible(&m, &x, segments, Some(&visible))?;
            emit(out.as_deref(), &mesh.to_obj())?;
        }
        Command::Serve { space, port, host } => {
            let space = io::load_space(&space)?;
            let state = Arc::new(service::ServiceState::new(space)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                eprintln!("serving on http://{}", listener.local_addr()?);
                axum::serve(listener, service::router(state)).await?;
                anyhow::Ok(())
            })?;
        }
        Command::Acceptance { only } => {
            let ids: Vec<String> = if only.is_empty() {
                acceptance::IDS.iter().map(|s| s.to_string()).collect()
            } else {
                only
            };
            let mut failed = 0;
            for id in &ids {
                let outcome = acceptance::run(id)?;
                println!("{outcome}");
                failed += usize::from(!outcome.passed);
            }
            println!("{} of {} criteria passed", ids.len() - failed, ids.len());
            if failed > 0 {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Caps rayon's global pool at `REPARAM_THREADS` when set.
fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("REPARAM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("REPARAM_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `dir/name.ext` becomes `dir/name.ext.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn synth(
    model: &Path,
    sigma: f64,
    seed: u64,
    count: usize,
    spec: Option<&Path>,
    eps_rel: f64,
    out: &Path,
) -> Result<()> {
    let m = io::load_model(model)?;
    let pool = enumerate_candidates(&m, &m.flatten(), eps_rel)?;
    let spec: SyntheticSpec = match spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            io::from_text(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            ensure!(count > 0, "--count must be positive");
            default_spec(&m, &pool, count, sigma, seed)?
        }
    };
    let out_set = synth_variations(&m, &pool, &spec)?;
    let doc = VariationDocument::new(
        &m,
        Provenance::Synthetic,
        &out_set.set,
        Some(out_set.ground_truth),
    )?;
    io::save_variations(out, &doc)?;
    Ok(())
}

fn append_variation(m: &Model, path: &Path, label: String, params: Vec<f64>) -> Result<()> {
    let mut set = if path.exists() {
        io::load_variations(path)?.into_set(m)?
    } else {
        VariationSet::new(m.flatten(), Vec::new())?
    };
    set.variations.push(Variation::new(label, params));
    let set = VariationSet::new(set.base, set.variations)?;
    io::save_variations(
        path,
        &VariationDocument::new(m, Provenance::ExternalGenerator, &set, None)?,
    )?;
    Ok(())
}

fn discover(
    model: &Path,
    variations: &Path,
    pool: Option<&Path>,
    config: &DiscoveryConfig,
    bounded: bool,
    out: &Path,
    trace: &Path,
) -> Result<()> {
    let m = io::load_model(model)?;
    let vars = io::load_variations(variations)?
        .into_set(&m)
        .with_context(|| format!("loading {}", variations.display()))?;
    let pool = match pool {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let doc: PoolDocument = io::from_text(&text)?;
            ensure!(
                doc.base_model == io::model_hash(&m)?,
                "pool was enumerated for another model"
            );
            doc.into_pool()?
        }
        None => enumerate_candidates(&m, &vars.base, config.eps_rel)?,
    };
    let found = discover_with_pool(&m, &vars, pool, config)?;
    let projector = Projector::new(
        &m,
        found.method(),
        found.cameras.clone(),
        config.image_size,
        config.image_descent,
    )?;
    let space = build_space(
        &m,
        &vars,
        found.constraints(),
        &found.groups,
        &projector,
        bounded,
    )?;
    io::save_space(out, &space)?;
    std::fs::write(trace, io::to_text(&TraceDocument::new(&m, &found)?)?)?;
    std::fs::write(trace.with_extension("tsv"), found.trace.table())?;
    eprintln!(
        "{} of {} candidates kept; {} free dims; {} optional groups",
        found.selected().len(),
        found.pool.len(),
        space.free_dims(),
        found.groups.groups.len()
    );
    Ok(())
}

fn resolve_state(space: &ManipulationSpace, spec: &str) -> Result<ManipulationState> {
    if spec == "default" {
        return Ok(space.neutral_state());
    }
    if let Some(s) = space.variation_state(spec) {
        return Ok(s);
    }
    let text = std::fs::read_to_string(spec).with_context(|| {
        format!("{spec:?} is not default, a slider label, or a readable state file")
    })?;
    let state: ManipulationState = io::from_text(&text)?;
    space.check_state(&state)?;
    Ok(state)
}
