use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cadquery_core::fixtures;
use cadquery_core::geometry::{load_model, CadModel, LengthUnit};
use cadquery_core::qa::{
    ask, load_suite, run_benchmark, BenchMode, BenchOptions, ChatEndpointConfig, PromptTemplate,
    ProviderSpec,
};
use cadquery_core::query::{evaluate, parse};
use cadquery_core::render::{
    write_color_png, write_depth, write_face_id_png, Scene, Side, ViewSpec,
};
use cadquery_core::segcad::{filter_by_sides, segment_model, PipelineConfig, ViewSet};

#[derive(Parser)]
#[command(
    name = "cadquery",
    version,
    about = "Part retrieval and measurement queries over CAD meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render views of a model to color, face-id and depth images.
    Render(RenderArgs),
    /// Find parts matching a text prompt.
    Segment(SegmentArgs),
    /// Answer a question with a program, given directly or generated.
    Query(QueryArgs),
    /// Run a benchmark suite and write a report.
    Bench(BenchArgs),
    /// Write the fixture models and the example benchmark.
    Fixtures(FixturesArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Face-grouped OBJ file; labels and units are read from `<stem>.meta.json`.
    #[arg(long)]
    model: PathBuf,
    /// Unit of the model file, overriding the sidecar.
    #[arg(long)]
    units: Option<String>,
}

impl ModelArgs {
    fn load(&self) -> Result<CadModel> {
        let units = match &self.units {
            None => None,
            Some(u) => Some(LengthUnit::parse(u).with_context(|| format!("unknown unit `{u}`"))?),
        };
        load_model(&self.model, units).with_context(|| format!("loading {}", self.model.display()))
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON file with pipeline settings; flags below override it.
    #[arg(long)]
    pipeline_config: Option<PathBuf>,
    /// `six` (main axes) or `eight` (corners).
    #[arg(long)]
    views: Option<ViewSet>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.pipeline_config {
            Some(p) => serde_json::from_str(
                &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            )
            .with_context(|| format!("parsing {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.views {
            cfg.view_set = v;
        }
        if let Some(w) = self.width {
            cfg.render_width = w;
        }
        if let Some(h) = self.height {
            cfg.render_height = h;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `top`, `bottom`, `left`, `right`, `front`, `back`, `corner:K`, or `top@exact`.
    /// Repeatable; defaults to the six main-axis views.
    #[arg(long = "view")]
    views: Vec<ViewSpec>,
    #[arg(long, default_value_t = cadquery_core::render::DEFAULT_WIDTH)]
    width: u32,
    #[arg(long, default_value_t = cadquery_core::render::DEFAULT_HEIGHT)]
    height: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    prompt: String,
    /// `oracle` or `remote:URL`.
    #[arg(long, default_value = "oracle")]
    provider: ProviderSpec,
    /// Comma-separated sides the parts must be visible from.
    #[arg(long, value_delimiter = ',')]
    sides: Vec<Side>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Program file to run.
    #[arg(long, conflicts_with = "question")]
    program: Option<PathBuf>,
    /// Natural-language question; requires `--llm-config` or `--replay-dir`.
    #[arg(long)]
    question: Option<String>,
    #[arg(long)]
    llm_config: Option<PathBuf>,
    #[arg(long)]
    replay_dir: Option<PathBuf>,
    #[arg(long, default_value = "oracle")]
    provider: ProviderSpec,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Print the evaluation trace.
    #[arg(long)]
    trace: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Golden,
    Replay,
    Live,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Golden)]
    mode: ModeArg,
    /// Recorded completions; defaults to `replays/` next to the suite.
    #[arg(long)]
    replay_dir: Option<PathBuf>,
    /// Endpoint settings for live mode.
    #[arg(long)]
    llm_config: Option<PathBuf>,
    #[arg(long, default_value = "oracle")]
    provider: ProviderSpec,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct FixturesArgs {
    #[arg(long)]
    out: PathBuf,
    /// Also write the large throughput plate.
    #[arg(long)]
    large: bool,
}

fn file_label(view: &ViewSpec) -> String {
    view.label().replace([':', '@'], "_")
}

fn render(args: RenderArgs) -> Result<()> {
    let scene = Scene::new(Arc::new(args.model.load()?));
    let views = if args.views.is_empty() {
        ViewSet::SixMainAxes.views()
    } else {
        args.views
    };
    std::fs::create_dir_all(&args.out)?;
    for view in &views {
        let buffers = scene.render_view(view, args.width, args.height)?;
        let stem = file_label(view);
        write_color_png(&buffers, &args.out.join(format!("{stem}.png")))?;
        write_face_id_png(&buffers, &args.out.join(format!("{stem}.faces.png")))?;
        write_depth(&buffers, &args.out.join(format!("{stem}.depth")))?;
        println!("{stem}: {} model pixels", buffers.model_pixel_count());
    }
    Ok(())
}

fn segment(args: SegmentArgs) -> Result<()> {
    let cfg = args.pipeline.config()?;
    let scene = Scene::new(Arc::new(args.model.load()?));
    let provider = args.provider.build(scene.model());
    let mut parts = segment_model(&scene, &args.prompt, provider.as_ref(), &cfg)?;
    if !args.sides.is_empty() {
        let sides: BTreeSet<Side> = args.sides.iter().copied().collect();
        parts = filter_by_sides(&scene, parts, &sides, &cfg)?;
    }
    let json = serde_json::to_string_pretty(&parts)?;
    match args.out {
        Some(path) => {
            std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?
        }
        None => println!("{json}"),
    }
    eprintln!("{} part(s)", parts.len());
    Ok(())
}

fn endpoint(llm_config: Option<&Path>, replay_dir: Option<PathBuf>) -> Result<ChatEndpointConfig> {
    Ok(match (llm_config, replay_dir) {
        (_, Some(dir)) => ChatEndpointConfig::replay(dir),
        (Some(path), None) => ChatEndpointConfig::load(path)?,
        (None, None) => bail!("generating a program needs --llm-config or --replay-dir"),
    })
}

fn query(args: QueryArgs) -> Result<()> {
    let cfg = args.pipeline.config()?;
    let source = match (&args.program, &args.question) {
        (Some(path), _) => {
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
        }
        (None, Some(q)) => {
            let ep = endpoint(args.llm_config.as_deref(), args.replay_dir.clone())?;
            let program = ask(q, &ep, &PromptTemplate::default())?;
            eprintln!("program:\n{program}\n");
            program
        }
        (None, None) => bail!("pass --program or --question"),
    };
    let program = parse(&source)?;
    let scene = Scene::new(Arc::new(args.model.load()?));
    let provider = args.provider.build(scene.model());
    let answer = evaluate(&program, &scene, provider.as_ref(), &cfg)
        .map_err(|e| anyhow::anyhow!("{} error: {e}", e.category().name()))?;
    if args.trace {
        for t in &answer.trace {
            eprintln!("{}({}) = {}", t.call, t.args.join(", "), t.result);
        }
    }
    println!("{}", serde_json::to_string_pretty(&answer.value.to_json())?);
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let cfg = args.pipeline.config()?;
    let suite = load_suite(&args.suite)?;
    let mode = match args.mode {
        ModeArg::Golden => BenchMode::Golden,
        ModeArg::Replay => {
            let dir = args.replay_dir.unwrap_or_else(|| {
                args.suite
                    .parent()
                    .unwrap_or(Path::new("."))
                    .join("replays")
            });
            BenchMode::Generated(ChatEndpointConfig::replay(dir))
        }
        ModeArg::Live => {
            let path = args.llm_config.context("live mode needs --llm-config")?;
            let ep = ChatEndpointConfig::load(&path)?;
            if matches!(ep.mode, cadquery_core::qa::EndpointMode::Replay { .. }) {
                bail!(
                    "{} describes a replay endpoint; use --mode replay",
                    path.display()
                );
            }
            BenchMode::Generated(ep)
        }
    };
    let options = BenchOptions {
        workers: args.workers.max(1),
        ..BenchOptions::default()
    };
    let report = run_benchmark(&suite, &mode, &args.provider, &cfg, &options)?;
    report.write(&args.report)?;
    print!("{}", report.to_text());
    Ok(())
}

fn write_fixtures(args: FixturesArgs) -> Result<()> {
    let suite = fixtures::write_benchmark(&args.out)?;
    println!("wrote {}", suite.display());
    if args.large {
        let path = fixtures::large_plate().write_to(&args.out.join("models"))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Render(a) => render(a),
        Command::Segment(a) => segment(a),
        Command::Query(a) => query(a),
        Command::Bench(a) => bench(a),
        Command::Fixtures(a) => write_fixtures(a),
    }
}
