use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Error;
use crate::harness::{
    build_report, center_prior_map, emit_report, encode_map, generate_negatives,
    load_annotations_file, map_path, read_map, score_manifest, sweep, write_annotations,
    AnnotationRecord, DatasetManifest, EvalConfig, MapSource, ReportFormat, FRAME,
};
use crate::numerics::RandomSource;
use crate::slavc::{random_gradient_check, Hyper, LocalizationMap, GRADCHECK_TOLERANCE};
use crate::training::{train, write_checkpoint, SyntheticSpec, TraceRecord, TrainConfig};

use super::{
    BaselineCenterArgs, Command, EvalArgs, Failure, GenNegativesArgs, GradcheckArgs, Outcome,
    ScoringArgs, SweepArgs, TrainToyArgs, EXIT_FAULT,
};

type CmdResult = Result<Outcome, Failure>;

pub(crate) fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => run_sweep(a),
        Command::GenNegatives(a) => gen_negatives(a),
        Command::TrainToy(a) => train_toy(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::BaselineCenter(a) => baseline_center(a),
    }
}

/// Effective configuration as `# key = value` lines.
fn echo(entries: &[(&str, &dyn Display)]) -> String {
    entries
        .iter()
        .map(|(k, v)| format!("# {k} = {v}\n"))
        .collect()
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or("-".into(), |p| p.display().to_string())
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
    .into()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn print(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

struct DirMaps {
    maps: PathBuf,
    priors: Option<PathBuf>,
}

impl MapSource for DirMaps {
    fn map(&self, record: &AnnotationRecord) -> crate::Result<LocalizationMap> {
        read_map(&map_path(&self.maps, &record.id)?)
    }

    fn prior(&self, record: &AnnotationRecord) -> crate::Result<Option<LocalizationMap>> {
        match &self.priors {
            Some(dir) if !record.negative => read_map(&map_path(dir, &record.id)?).map(Some),
            _ => Ok(None),
        }
    }
}

/// Loads the manifest and checks that every map the scoring will read
/// exists.
fn prepare(args: &ScoringArgs) -> Result<(EvalConfig, DatasetManifest, DirMaps), Failure> {
    let config = EvalConfig {
        gamma: args.gamma,
        threshold: args.threshold_mode,
        ogl_weight: args.ogl_weight,
        seed: args.seed,
        tau: args.tau,
    };
    config.validate()?;
    Hyper::new(args.tau)?;
    let manifest = load_annotations_file(&args.annotations, FRAME.0, FRAME.1)?;
    let mut missing = Vec::new();
    for r in &manifest.records {
        if !map_path(&args.maps, &r.id)?.is_file() {
            missing.push(r.id.clone());
        }
        if let (Some(dir), false) = (&args.ogl_dir, r.negative) {
            if !map_path(dir, &r.id)?.is_file() {
                missing.push(format!("{} (object prior)", r.id));
            }
        }
    }
    if !missing.is_empty() {
        const SHOWN: usize = 20;
        let mut list = missing
            .iter()
            .take(SHOWN)
            .cloned()
            .collect::<Vec<_>>()
            .join(", ");
        if missing.len() > SHOWN {
            list.push_str(&format!(", ... ({} more)", missing.len() - SHOWN));
        }
        return Err(Error::ContractViolation(format!(
            "{} map files missing: {list}",
            missing.len()
        ))
        .into());
    }
    let maps = DirMaps {
        maps: args.maps.clone(),
        priors: args.ogl_dir.clone(),
    };
    Ok((config, manifest, maps))
}

fn scoring_echo(args: &ScoringArgs) -> Vec<(&'static str, String)> {
    vec![
        ("annotations", args.annotations.display().to_string()),
        ("maps", args.maps.display().to_string()),
        ("gamma", args.gamma.to_string()),
        ("threshold-mode", args.threshold_mode.to_string()),
        ("ogl-dir", opt_path(&args.ogl_dir)),
        ("ogl-weight", args.ogl_weight.to_string()),
        ("seed", args.seed.to_string()),
        ("tau", args.tau.to_string()),
    ]
}

fn eval(args: EvalArgs) -> CmdResult {
    let (config, manifest, maps) = prepare(&args.scoring)?;
    let gts = manifest.ground_truths()?;
    let scored = score_manifest(&manifest, &gts, &maps, &config)?;
    let mut report = build_report(&scored, &manifest, &config, args.scoring.ogl_dir.is_some())?;
    report.notes.insert(
        0,
        format!("annotations {}", args.scoring.annotations.display()),
    );
    report
        .notes
        .insert(1, format!("maps {}", args.scoring.maps.display()));
    if let Some(dir) = &args.scoring.ogl_dir {
        report
            .notes
            .insert(2, format!("object priors {}", dir.display()));
    }
    let mut text = emit_report(&report, args.format)?;
    let mut entries = scoring_echo(&args.scoring);
    entries.push(("format", args.format.to_string()));
    entries.push(("out", opt_path(&args.out)));
    let pairs: Vec<(&str, &dyn Display)> = entries
        .iter()
        .map(|(k, v)| (*k, v as &dyn Display))
        .collect();
    if args.format == ReportFormat::Csv {
        text = echo(&pairs) + &text;
    }
    match &args.out {
        Some(path) => {
            write_file(path, text.as_bytes())?;
            print(&echo(&pairs));
            print(&format!(
                "wrote report for {} samples to {}\n",
                manifest.len(),
                path.display()
            ));
        }
        None => print(&text),
    }
    Ok(Outcome::Ok)
}

fn run_sweep(args: SweepArgs) -> CmdResult {
    let (config, manifest, maps) = prepare(&args.scoring)?;
    let gts = manifest.ground_truths()?;
    let csv = sweep(args.axis, args.points, &manifest, &gts, &maps, &config)?;
    let mut entries = scoring_echo(&args.scoring);
    entries.push(("axis", args.axis.to_string()));
    entries.push(("points", args.points.to_string()));
    let pairs: Vec<(&str, &dyn Display)> = entries
        .iter()
        .map(|(k, v)| (*k, v as &dyn Display))
        .collect();
    print(&(echo(&pairs) + &csv));
    Ok(Outcome::Ok)
}

fn gen_negatives(args: GenNegativesArgs) -> CmdResult {
    let manifest = load_annotations_file(&args.annotations, FRAME.0, FRAME.1)?;
    let count = match args.count.as_str() {
        "balance" => manifest.positives().saturating_sub(manifest.negatives()),
        n => n.parse::<usize>().map_err(|_| {
            Error::InvalidHyperparameter(format!(
                "--count expects a number or `balance`, got `{n}`"
            ))
        })?,
    };
    let mut rng = RandomSource::new(args.seed);
    let extended = generate_negatives(&manifest, count, args.hard_fraction, &mut rng)?;
    let mut buf = Vec::new();
    write_annotations(&extended, &mut buf)?;
    write_file(&args.out, &buf)?;
    let added = &extended.records[manifest.len()..];
    let hard = added
        .iter()
        .filter(|r| r.negative_type == crate::metrics::NegativeType::AutoHard)
        .count();
    print(&echo(&[
        ("annotations", &args.annotations.display()),
        ("count", &args.count),
        ("hard-fraction", &args.hard_fraction),
        ("seed", &args.seed),
        ("out", &args.out.display()),
    ]));
    print(&format!(
        "added {} negatives ({} auto-easy, {} auto-hard) to {} records\n",
        added.len(),
        added.len() - hard,
        hard,
        manifest.len()
    ));
    Ok(Outcome::Ok)
}

fn trace_lines(trace: &[TraceRecord]) -> Result<String, Failure> {
    let mut s = String::new();
    for r in trace {
        s.push_str(&serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?);
        s.push('\n');
    }
    Ok(s)
}

fn train_toy(args: TrainToyArgs) -> CmdResult {
    let config = TrainConfig {
        loss: args.loss,
        vdrop: args.vdrop,
        adrop: args.adrop,
        momentum: args.momentum,
        tau: args.tau,
        epochs: args.epochs,
        seed: args.seed,
        ..TrainConfig::synthetic()
    };
    config.validate()?;
    let spec = SyntheticSpec::default();
    print(&echo(&[
        ("loss", &args.loss),
        ("vdrop", &args.vdrop),
        ("adrop", &args.adrop),
        ("momentum", &args.momentum),
        ("tau", &args.tau),
        ("epochs", &args.epochs),
        ("seed", &args.seed),
        ("out", &args.out.display()),
        ("trace", &args.trace.display()),
        ("lr", &config.lr),
        ("weight-decay", &config.weight_decay),
        ("batch-size", &config.batch_size),
        ("embed-dim", &config.embed_dim),
        ("classes", &spec.classes),
        ("grid", &format!("{}x{}", spec.height, spec.width)),
        ("raw-dim", &spec.raw_dim),
        ("train-size", &spec.train_size),
        ("heldout-size", &spec.heldout_size),
    ]));
    match train(&config, &spec) {
        Ok(out) => {
            write_file(&args.trace, trace_lines(&out.trace)?.as_bytes())?;
            let mut buf = Vec::new();
            write_checkpoint(&out.state, &mut buf)?;
            write_file(&args.out, &buf)?;
            for r in &out.trace {
                print(&format!(
                    "epoch {:>3}  loss {:.4}  planted accuracy {:.4}  heldout AP {:.4}\n",
                    r.epoch, r.loss, r.planted_accuracy, r.heldout_ap
                ));
            }
            Ok(Outcome::Ok)
        }
        Err(failure) => {
            write_file(&args.trace, trace_lines(&failure.trace)?.as_bytes())?;
            let code = if failure.error.is_user_error() {
                super::EXIT_USER
            } else {
                EXIT_FAULT
            };
            Err(Failure {
                code,
                message: failure.to_string(),
            })
        }
    }
}

fn gradcheck(args: GradcheckArgs) -> CmdResult {
    if args.trials == 0 {
        return Err(Error::InvalidHyperparameter("--trials must be at least 1".into()).into());
    }
    let scale = if args.corrupt { 1.5 } else { 1.0 };
    print(&echo(&[
        ("loss", &args.loss),
        ("trials", &args.trials),
        ("seed", &args.seed),
        ("tau", &crate::slavc::DEFAULT_TAU),
        ("tolerance", &GRADCHECK_TOLERANCE),
    ]));
    let root = RandomSource::new(args.seed);
    let hyper = Hyper::default();
    let mut worst = 0.0f64;
    for t in 0..args.trials {
        let mut rng = root.derive(t as u64);
        let c = random_gradient_check(args.loss, &hyper, &mut rng, scale)?;
        worst = worst.max(c.max_relative_error);
        print(&format!(
            "trial {t:>3}  B={} H={} W={} D={}  loss {:.6}  max relative error {:.3e}\n",
            c.dims.batch, c.dims.height, c.dims.width, c.dims.dim, c.loss, c.max_relative_error
        ));
    }
    let pass = worst <= GRADCHECK_TOLERANCE;
    print(&format!(
        "max relative error {worst:.3e} over {} trials: {}\n",
        args.trials,
        if pass { "pass" } else { "FAIL" }
    ));
    Ok(if pass { Outcome::Ok } else { Outcome::Failed })
}

fn baseline_center(args: BaselineCenterArgs) -> CmdResult {
    let manifest = load_annotations_file(&args.annotations, FRAME.0, FRAME.1)?;
    let map = center_prior_map(manifest.height, manifest.width, args.radius)?;
    let bytes = encode_map(&map)?;
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    for r in &manifest.records {
        write_file(&map_path(&args.out, &r.id)?, &bytes)?;
    }
    print(&echo(&[
        ("annotations", &args.annotations.display()),
        ("out", &args.out.display()),
        ("radius", &args.radius),
    ]));
    print(&format!("wrote {} center-prior maps\n", manifest.len()));
    Ok(Outcome::Ok)
}
