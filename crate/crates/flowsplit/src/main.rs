use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowsplit::core::analytic1d::SeparableScene1D;
use flowsplit::core::baselines::weickert_schnoerr;
use flowsplit::core::solver::decompose;
use flowsplit::core::synth::{
    disc_texture, flicker_frames, gen_flicker, gen_periodic_motion, gen_separable,
    gen_square_over_oscillating_bg, Extrude,
};
use flowsplit::core::{DecompositionResult, GridSpec, ScalarField3, SolverConfig};
use flowsplit::report::{iteration_csv, write_atomic, Manifest};
use flowsplit::sequence::{list_frames, BitDepth};
use flowsplit::verify::{self, VerifyOptions};
use flowsplit::{mask_common, read_flo, read_sequence, render_color, render_magnitude, write_flo, write_sequence, FlowSlice};
use image::ImageFormat;

#[derive(Parser)]
#[command(name = "flowsplit", version, about = "Split optical flow into smooth and oscillating parts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic PGM sequence and a manifest.
    Synth(SynthArgs),
    /// Decompose the flow of a sequence into u1 + u2.
    Decompose(DecomposeArgs),
    /// Data residual of the decomposition against the single-component model.
    Compare(CompareArgs),
    /// Render a .flo slice as a PNG.
    Render(RenderArgs),
    /// Run the built-in checks.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Flicker,
    Rotate,
    Square,
    Separable,
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneKind {
    Transport,
    ExpPower,
}

#[derive(Clone, Copy, ValueEnum)]
enum Depth {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

#[derive(Args)]
struct SynthArgs {
    generator: Generator,
    #[arg(long)]
    out: PathBuf,
    /// Frame width and height.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Number of frames (default depends on the generator).
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// flicker: number of [A, blank, B, blank] cycles.
    #[arg(long, default_value_t = 2)]
    repeats: usize,
    /// rotate: full turns over the sequence.
    #[arg(long, default_value_t = 1)]
    freq: u32,
    /// square: pixels per frame.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// square: background step per frame as a fraction of the width.
    #[arg(long, default_value_t = 0.05)]
    amplitude: f64,
    /// square: background period in frames.
    #[arg(long, default_value_t = 4)]
    period: usize,
    /// separable: which one-dimensional scene to extrude.
    #[arg(long, value_enum, default_value_t = SceneKind::Transport)]
    scene: SceneKind,
    /// separable: exponent of the exp-power illumination.
    #[arg(long, default_value_t = 0.75)]
    beta: f64,
    /// Bits per sample of the written frames (8 or 16).
    #[arg(long, value_enum, default_value_t = Depth::Eight)]
    depth: Depth,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-4)]
    dtau: f64,
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// ε of the penalty ν.
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// λ of the penalty ν.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Directory of PGM/PNG frames, read in file-name order.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    alpha1: f64,
    #[arg(long)]
    alpha2: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory (defaults to the input directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    alpha1: f64,
    #[arg(long, default_value_t = 0.25)]
    alpha2: f64,
    #[arg(long, default_value_t = 1e-4)]
    dtau: f64,
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderMode {
    Color,
    Magnitude,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    flo: PathBuf,
    #[arg(long, value_enum, default_value_t = RenderMode::Color)]
    mode: RenderMode,
    /// Magnitude cut-off for `magnitude` mode and for --mask-common.
    #[arg(long, default_value_t = 0.18)]
    threshold: f64,
    /// Blank out pixels where this slice is also above the threshold.
    #[arg(long)]
    mask_common: Option<PathBuf>,
    /// Magnitude of full saturation in `color` mode (default: 99th percentile).
    #[arg(long)]
    max: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run one check by name.
    #[arg(long)]
    only: Option<String>,
    /// Exponent for the `norms` check.
    #[arg(long)]
    beta: Option<f64>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self { code: 2, message: message.to_string() }
    }
}

impl From<flowsplit::Error> for Failure {
    fn from(e: flowsplit::Error) -> Self {
        match e {
            flowsplit::Error::Core(c) => c.into(),
            other => Failure::input(other),
        }
    }
}

impl From<flowsplit::core::Error> for Failure {
    fn from(e: flowsplit::core::Error) -> Self {
        let code = if matches!(e, flowsplit::core::Error::Divergence { .. }) { 3 } else { 2 };
        Self { code, message: e.to_string() }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Compare(a) => compare(a),
        Command::Render(a) => render(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn synth(a: SynthArgs) -> CmdResult {
    let mut m = Manifest::new();
    let name = match a.generator {
        Generator::Flicker => "flicker",
        Generator::Rotate => "rotate",
        Generator::Square => "square",
        Generator::Separable => "separable",
    };
    m.set("generator", name).set("size", a.size).set("seed", a.seed);
    let field = match a.generator {
        Generator::Flicker => {
            let t = a.frames.unwrap_or(4 * a.repeats);
            let (f1, f2, rect) = flicker_frames(a.size, a.size, a.seed);
            m.set("repeats", a.repeats)
                .set("changed_rect", format!("{},{},{},{}", rect.x0, rect.y0, rect.w, rect.h));
            gen_flicker(GridSpec::new(a.size, a.size, t)?, &f1, &f2, a.repeats)?
        }
        Generator::Rotate => {
            let t = a.frames.unwrap_or(16 * a.freq as usize + 1);
            m.set("freq", a.freq);
            gen_periodic_motion(GridSpec::new(a.size, a.size, t)?, &disc_texture(a.size, a.size, a.seed), a.freq)?
        }
        Generator::Square => {
            let t = a.frames.unwrap_or(16);
            let g = GridSpec::new(a.size, a.size, t)?;
            let scene = gen_square_over_oscillating_bg(g, a.speed, a.amplitude, a.period, a.seed)?;
            if scene.clipped {
                eprintln!("warning: the square leaves the frame and is clipped");
            }
            m.set("speed", a.speed).set("amplitude", a.amplitude).set("period", a.period);
            scene.field
        }
        Generator::Separable => {
            let t = a.frames.unwrap_or(16);
            let scene = match a.scene {
                SceneKind::Transport => {
                    m.set("scene", "transport");
                    SeparableScene1D::transport()
                }
                SceneKind::ExpPower => {
                    m.set("scene", "exp-power").set("beta", a.beta);
                    SeparableScene1D::exp_power(a.beta)?
                }
            };
            gen_separable(GridSpec::new(a.size, a.size, t)?, &scene, Extrude::AlongX2)?
        }
    };
    let g = field.grid();
    let depth = match a.depth {
        Depth::Eight => BitDepth::Eight,
        Depth::Sixteen => BitDepth::Sixteen,
    };
    m.set("grid", format!("{}x{}x{}", g.m(), g.n(), g.t()))
        .set("frames", g.t())
        .set("depth", depth.max_value().count_ones());
    write_sequence(&field, &a.out, "frame_", depth)?;
    write_atomic(&a.out.join("manifest.txt"), m.render().as_bytes())?;
    println!("wrote {} frames to {}", g.t(), a.out.display());
    Ok(0)
}

fn load_input(dir: &Path) -> Result<ScalarField3, Failure> {
    let frames = list_frames(dir)?;
    Ok(read_sequence(&frames)?)
}

fn config(alpha1: f64, alpha2: f64, s: &SolverArgs) -> Result<SolverConfig, Failure> {
    let cfg = SolverConfig {
        alpha1,
        alpha2,
        dtau: s.dtau,
        tol: s.tol,
        max_iter: s.max_iter,
        eps_nu: s.eps,
        lambda: s.lambda,
        ..SolverConfig::default()
    };
    cfg.validate().map_err(Failure::input)?;
    Ok(cfg)
}

fn summary(res: &DecompositionResult, cfg: &SolverConfig) -> Manifest {
    let mut m = Manifest::new();
    m.set("alpha1", cfg.alpha1)
        .set("alpha2", cfg.alpha2)
        .set("dtau", cfg.dtau)
        .set("tol", cfg.tol)
        .set("max_iter", cfg.max_iter)
        .set("eps", cfg.eps_nu)
        .set("lambda", cfg.lambda)
        .set("iterations", res.iterations)
        .set("stop_reason", format!("{:?}", res.stop_reason))
        .set("data_residual", format!("{:e}", res.data_residual))
        .set("u1_sup", format!("{:e}", res.u1.sup_magnitude()))
        .set("u2_sup", format!("{:e}", res.u2.sup_magnitude()))
        .set("u1_energy", format!("{:e}", res.u1.l2_norm_sq()))
        .set("u2_energy", format!("{:e}", res.u2.l2_norm_sq()));
    m
}

fn cmd_decompose(a: DecomposeArgs) -> CmdResult {
    let f = load_input(&a.input)?;
    let cfg = config(a.alpha1, a.alpha2, &a.solver)?;
    let res = decompose(&f, &cfg)?;
    let out = a.out.unwrap_or_else(|| a.input.clone());
    std::fs::create_dir_all(&out).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
    let total = res.total_flow();
    for t in 0..f.grid().t() {
        write_flo(&FlowSlice::from_component(&res.u1, t), out.join(format!("u1_t{t:04}.flo")))?;
        write_flo(&FlowSlice::from_component(&res.u2, t), out.join(format!("u2_t{t:04}.flo")))?;
        write_flo(&FlowSlice::from_component(&total, t), out.join(format!("sum_t{t:04}.flo")))?;
    }
    write_atomic(&out.join("report.csv"), iteration_csv(&res).as_bytes())?;
    let s = summary(&res, &cfg);
    write_atomic(&out.join("summary.txt"), s.render().as_bytes())?;
    print!("{}", s.render());
    Ok(0)
}

fn compare(a: CompareArgs) -> CmdResult {
    let f = load_input(&a.input)?;
    let s = SolverArgs { dtau: a.dtau, tol: a.tol, max_iter: a.max_iter, eps: a.eps, lambda: a.lambda };
    let cfg = config(a.alpha1, a.alpha2, &s)?;
    let ours = decompose(&f, &cfg)?;
    let single = weickert_schnoerr(&f, &cfg)?;
    let (r, b) = (ours.data_residual, single.data_residual);
    let ratio = if r == 0.0 && b == 0.0 { 1.0 } else { r / b };
    println!("decompose_residual={r:e}");
    println!("single_residual={b:e}");
    println!("ratio={ratio:e}");
    println!("u2_energy={:e}", ours.u2.l2_norm_sq());
    Ok(0)
}

fn render(a: RenderArgs) -> CmdResult {
    let mut slice = read_flo(&a.flo)?;
    if let Some(other) = &a.mask_common {
        slice = mask_common(&slice, &read_flo(other)?, a.threshold)?;
    }
    let mut buf = Cursor::new(Vec::new());
    let encoded = match a.mode {
        RenderMode::Color => render_color(&slice, a.max).write_to(&mut buf, ImageFormat::Png),
        RenderMode::Magnitude => render_magnitude(&slice, a.threshold).write_to(&mut buf, ImageFormat::Png),
    };
    encoded.map_err(Failure::input)?;
    write_atomic(&a.out, buf.get_ref())?;
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let opts = VerifyOptions { only: a.only, beta: a.beta };
    let outcomes = verify::run(&opts).map_err(|name| {
        let known: Vec<_> = verify::check_names().collect();
        Failure::input(format!("unknown check {name:?}; known: {}", known.join(", ")))
    })?;
    let mut failed = false;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed |= !o.passed;
    }
    Ok(u8::from(failed))
}
