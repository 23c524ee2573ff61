//! The `mask-reconcile` command line.
//!
//! Exit codes: 0 success, 1 usage error (bad flags or parameter values),
//! 2 data or validation error. Flags override `--config` file values, which
//! override built-in defaults.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::energy::{build_problem, oracle_trials, solve, BRUTE_FORCE_CAP};
use crate::exec::Execution;
use crate::imgio::{
    read_boxes, read_mask_png, read_pfm, read_png_image, render_boxes, write_mask_png, write_pfm,
    BBoxList, PipelineConfig, ProbMap, RgbImage, SolverKind,
};
use crate::metrics::{boxes_from_mask, evaluate_dir};
use crate::probmap::{agreement, build_probability_map_with};
use crate::weakloss::{
    boxinst_pairwise, boxinst_projection, build_bags, mil_pairwise, mil_unary, SoftMask,
    DEFAULT_TAU, DEFAULT_THETA_B,
};
use crate::Error;

#[derive(Debug, Parser)]
#[command(
    name = "mask-reconcile",
    version,
    about = "Reconcile two candidate segmentation masks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-patch GMM foreground probability map (PFM output).
    Probmap(ProbmapArgs),
    /// Resolve disagreeing pixels exactly and write the reconciled mask.
    Reconcile(ReconcileArgs),
    /// Dice / precision / recall of prediction masks against ground truth.
    Evaluate(EvaluateArgs),
    /// Tight boxes around 8-connected foreground components.
    BoxesFromMask(BoxesArgs),
    /// Evaluate box-supervision losses on a soft mask.
    Weakloss(WeaklossArgs),
    /// Compare the min-cut solver against exhaustive enumeration.
    OracleCheck(OracleArgs),
}

/// Hyperparameters shared by `probmap` and `reconcile`.
#[derive(Debug, Args, Default, Clone)]
pub struct ConfigFlags {
    /// key=value file with PipelineConfig fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub split: Option<usize>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ProbmapArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask_a: PathBuf,
    #[arg(long)]
    pub mask_b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigFlags,
}

#[derive(Debug, Args)]
pub struct ReconcileArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask_a: PathBuf,
    #[arg(long)]
    pub mask_b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse a probability map written by `probmap`.
    #[arg(long)]
    pub prob: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// graphcut or bruteforce
    #[arg(long)]
    pub solver: Option<String>,
    #[command(flatten)]
    pub cfg: ConfigFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of predicted mask PNGs.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth mask PNGs (paired by file stem).
    #[arg(long)]
    pub gt: PathBuf,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoxesArgs {
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossTerm {
    MilUnary,
    MilPairwise,
    BoxinstProj,
    BoxinstPairwise,
}

#[derive(Debug, Args)]
pub struct WeaklossArgs {
    /// Soft mask: PFM, or a PNG mask (read as {0,1}).
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub boxes: Option<PathBuf>,
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long = "loss", value_enum, required = true)]
    pub losses: Vec<LossTerm>,
    #[arg(long, default_value_t = 4)]
    pub neighbors: u8,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_THETA_B)]
    pub theta_b: f64,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Grid size as WxH; W·H must not exceed the brute-force cap.
    #[arg(long)]
    pub size: String,
    #[arg(long)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Config { .. } => Failure::Usage(e.to_string()),
            other => Failure::Data(other),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Resolves defaults, then the config file, then explicit flags.
pub fn resolve_config(
    flags: &ConfigFlags,
    lambda: Option<f64>,
    theta: Option<f64>,
    solver: Option<&str>,
) -> crate::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
    }
    if let Some(v) = flags.components {
        cfg.components = v;
    }
    if let Some(v) = flags.split {
        cfg.split = v;
    }
    if let Some(v) = flags.clip {
        cfg.clip = v;
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = lambda {
        cfg.lambda = v;
    }
    if let Some(v) = theta {
        cfg.theta = v;
    }
    if let Some(v) = solver {
        cfg.solver = v.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Effective configuration for a `probmap` or `reconcile` command line.
pub fn resolved_config<I, T>(args: I) -> crate::Result<PipelineConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    match &cli.command {
        Command::Probmap(a) => resolve_config(&a.cfg, None, None, None),
        Command::Reconcile(a) => resolve_config(&a.cfg, a.lambda, a.theta, a.solver.as_deref()),
        _ => Err(Error::InvalidParameter(
            "command takes no pipeline config".into(),
        )),
    }
}

/// Runs one invocation, writing reports to `out` and diagnostics to `err`.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let _ = write!(err, "{e}");
            return 1;
        }
    };
    let result = match cli.command {
        Command::Probmap(a) => cmd_probmap(&a, out),
        Command::Reconcile(a) => cmd_reconcile(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::BoxesFromMask(a) => cmd_boxes_from_mask(&a, out),
        Command::Weakloss(a) => cmd_weakloss(&a, out),
        Command::OracleCheck(a) => cmd_oracle_check(&a, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CmdResult {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Data(Error::io("<stdout>", e)))
}

fn load_inputs(
    image: &Path,
    mask_a: &Path,
    mask_b: &Path,
) -> std::result::Result<(RgbImage, crate::BinaryMask, crate::BinaryMask), Failure> {
    let image = read_png_image(image)?;
    let a = read_mask_png(mask_a)?;
    let b = read_mask_png(mask_b)?;
    if a.dims() != image.dims() {
        return Err(Failure::Data(Error::dims("mask A", image.dims(), a.dims())));
    }
    if b.dims() != image.dims() {
        return Err(Failure::Data(Error::dims("mask B", image.dims(), b.dims())));
    }
    Ok((image, a, b))
}

fn cmd_probmap(args: &ProbmapArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve_config(&args.cfg, None, None, None)?;
    let (image, a, b) = load_inputs(&args.image, &args.mask_a, &args.mask_b)?;
    let (map, stats) = build_probability_map_with(&image, &a, &b, &cfg, Execution::default())?;
    write_pfm(&map, &args.out)?;
    emit(out, &format!("{stats}\n"))
}

fn cmd_reconcile(args: &ReconcileArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve_config(&args.cfg, args.lambda, args.theta, args.solver.as_deref())?;
    let (image, a, b) = load_inputs(&args.image, &args.mask_a, &args.mask_b)?;
    let start = Instant::now();
    let agree = agreement(&a, &b)?;
    let prob: ProbMap = match &args.prob {
        Some(path) => {
            let map = read_pfm(path)?;
            if map.dims() != image.dims() {
                return Err(Failure::Data(Error::dims(
                    "probability map",
                    image.dims(),
                    map.dims(),
                )));
            }
            map
        }
        None => build_probability_map_with(&image, &a, &b, &cfg, Execution::default())?.0,
    };
    let problem = build_problem(&image, &prob, &agree, &cfg)?;
    if cfg.solver == SolverKind::BruteForce && problem.free_count() > BRUTE_FORCE_CAP {
        return Err(Failure::Data(Error::TooManyFreePixels {
            free: problem.free_count(),
            cap: BRUTE_FORCE_CAP,
        }));
    }
    let result = solve(&problem, cfg.solver)?;
    write_mask_png(&result.labels, &args.out)?;
    emit(
        out,
        &format!(
            "objective={:.6} o_idf={:.6} o_scf={:.6} free={} time={:.6}\n",
            result.objective,
            result.o_idf,
            result.o_scf,
            result.free_count,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn png_files(dir: &Path) -> crate::Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> CmdResult {
    let pred = png_files(&args.pred)?;
    let gt = png_files(&args.gt)?;
    let report = evaluate_dir(&pred, &gt)?;
    let csv = report.to_csv();
    match &args.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| Failure::Data(Error::io(path, e))),
        None => emit(out, &csv),
    }
}

fn cmd_boxes_from_mask(args: &BoxesArgs, out: &mut dyn Write) -> CmdResult {
    let mask = read_mask_png(&args.mask)?;
    let text = render_boxes(&boxes_from_mask(&mask));
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Data(Error::io(path, e))),
        None => emit(out, &text),
    }
}

fn read_soft_mask(path: &Path) -> crate::Result<SoftMask> {
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        Ok(SoftMask::from(&read_mask_png(path)?))
    } else {
        read_pfm(path)
    }
}

fn cmd_weakloss(args: &WeaklossArgs, out: &mut dyn Write) -> CmdResult {
    let mask = read_soft_mask(&args.mask)?;
    let boxes = |term: &str| -> std::result::Result<BBoxList, Failure> {
        match &args.boxes {
            Some(p) => Ok(read_boxes(p)?),
            None => Err(Failure::Usage(format!("--loss {term} requires --boxes"))),
        }
    };
    for term in &args.losses {
        let value = match term {
            LossTerm::MilUnary => {
                let bags = build_bags(&boxes("mil-unary")?, mask.width(), mask.height())?;
                mil_unary(&mask, &bags)?
            }
            LossTerm::MilPairwise => mil_pairwise(&mask, args.neighbors)?,
            LossTerm::BoxinstProj => boxinst_projection(&mask, &boxes("boxinst-proj")?)?,
            LossTerm::BoxinstPairwise => {
                let path = args.image.as_ref().ok_or_else(|| {
                    Failure::Usage("--loss boxinst-pairwise requires --image".into())
                })?;
                boxinst_pairwise(&mask, &read_png_image(path)?, args.tau, args.theta_b)?
            }
        };
        emit(out, &format!("loss={value}\n"))?;
    }
    Ok(())
}

fn parse_size(s: &str) -> Option<(usize, usize)> {
    let (w, h) = s.split_once(['x', 'X'])?;
    let (w, h) = (w.parse().ok()?, h.parse().ok()?);
    (w > 0 && h > 0).then_some((w, h))
}

fn cmd_oracle_check(args: &OracleArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let (w, h) = parse_size(&args.size)
        .ok_or_else(|| Failure::Usage(format!("--size must be WxH, got {:?}", args.size)))?;
    if w * h > BRUTE_FORCE_CAP {
        return Err(Failure::Usage(format!(
            "--size {w}x{h} has {} pixels, brute force is capped at {BRUTE_FORCE_CAP}",
            w * h
        )));
    }
    if args.trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    let trials = oracle_trials(w, h, args.trials, args.seed, Execution::default())?;
    let failed: Vec<_> = trials.iter().filter(|t| !t.matches()).collect();
    for t in &failed {
        let _ = writeln!(
            err,
            "mismatch trial={} seed={} size={w}x{h} graphcut={:.12} bruteforce={:.12}",
            t.trial, t.seed, t.graphcut, t.bruteforce
        );
    }
    emit(
        out,
        &format!(
            "oracle-check size={w}x{h} trials={} pass={} fail={}\n",
            trials.len(),
            trials.len() - failed.len(),
            failed.len()
        ),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(Error::InvalidData(format!(
            "{} of {} trials disagree",
            failed.len(),
            trials.len()
        ))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_parsing() {
        assert_eq!(parse_size("4x4"), Some((4, 4)));
        assert_eq!(parse_size("3X5"), Some((3, 5)));
        assert_eq!(parse_size("0x5"), None);
        assert_eq!(parse_size("45"), None);
    }

    #[test]
    fn defaults_without_flags() {
        let cfg = resolved_config([
            "mask-reconcile",
            "reconcile",
            "--image",
            "i.png",
            "--mask-a",
            "a.png",
            "--mask-b",
            "b.png",
            "--out",
            "o.png",
        ])
        .unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn flag_beats_default() {
        let cfg = resolved_config([
            "mask-reconcile",
            "probmap",
            "--image",
            "i",
            "--mask-a",
            "a",
            "--mask-b",
            "b",
            "--out",
            "o",
            "--components",
            "3",
        ])
        .unwrap();
        assert_eq!(cfg.components, 3);
    }
}
