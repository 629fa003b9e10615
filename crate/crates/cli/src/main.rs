use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use mistaken_core::config::{load_config, save_manifest, RunConfig, RUN_MANIFEST};
use mistaken_core::eval::{
    build_feature_table, evaluate_model, run_suite, split_dataset, train_method, EvalReport, FeatureTable, MethodSpec,
    TaskKind, TrainedMethod,
};
use mistaken_core::gen::{dataset_stats, generate_dataset, read_dataset, write_dataset, Dataset, GenError};
use mistaken_core::learn::{read_model, write_model, ModelFile};
use mistaken_core::repr::{FeatureKind, Variant};
use mistaken_core::scene::{decode_scene, encode_frame, interpolate_frame, render_svg, CharacterId, Scene, NUM_FRAMES};
use serde_json::json;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "mistaken-lab", version, about = "Generate scenes, train and evaluate mistaken-belief classifiers")]
struct Cli {
    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long, global = true, env = "MISTAKEN_LAB_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset of scenes with derived labels.
    Generate {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Dataset statistics as CSV and SVG panels.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one Multiple Image model on the first split.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Score a trained model on repeated test splits.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "all")]
        task: String,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train on altered features and evaluate on unaltered ones.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chance, bias baselines, Single Image and Multiple Image.
    Baselines {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interpolated in-between frames of one scene.
    Animate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// One SVG per frame of a scene.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Character slot to outline.
        #[arg(long)]
        highlight: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 when an I/O failure is anywhere in the cause chain, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    if e.chain().any(|c| c.is::<std::io::Error>()) {
        2
    } else {
        1
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { count, seed, out, config } => generate(count, seed, &out, config.as_deref()),
        Command::Stats { data, out } => stats(&data, &out),
        Command::Train { data, config, model, variant } => train(&data, &config, &model, variant),
        Command::Eval { data, model, task, reps, seed, out, config } => {
            eval(&data, &model, &task, reps, seed, &out, config.as_deref())
        }
        Command::Ablate { data, config, reps, out } => ablate(&data, config.as_deref(), reps, &out),
        Command::Baselines { data, config, reps, out } => baselines(&data, config.as_deref(), reps, &out),
        Command::Animate { scene, steps, out } => animate(&scene, steps, &out),
        Command::Render { scene, out, highlight } => render(&scene, &out, highlight),
    }
}

fn config_or_default(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(load_config(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory"))
            .with_context(|| format!("dataset {}", dir.display()));
    }
    let t = Instant::now();
    let d = read_dataset(dir)?;
    eprintln!("loaded {} scenes from {} in {:.1?}", d.len(), dir.display(), t.elapsed());
    Ok(d)
}

fn load_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    decode_scene(&text).with_context(|| format!("decoding {}", path.display()))
}

fn generate(count: usize, seed: u64, out: &Path, config: Option<&Path>) -> Result<()> {
    let mut cfg = config_or_default(config)?;
    cfg.count = count;
    cfg.gen_seed = seed;
    cfg.data_dir = Some(out.to_path_buf());
    cfg.validate()?;
    let t = Instant::now();
    let (dataset, feasible) = match generate_dataset(count, seed, cfg.gen_targets()) {
        Ok(d) => (d, true),
        Err(GenError::Infeasible { best, .. }) => {
            eprintln!(
                "warning: priors missed their targets; writing the closest dataset (fraction {:.4}, characters per frame {:.3})",
                best.manifest.realized_mistaken_fraction, best.manifest.realized_characters_per_frame
            );
            (*best, false)
        }
        Err(e) => return Err(e.into()),
    };
    write_dataset(&dataset, out)?;
    let m = &dataset.manifest;
    eprintln!(
        "wrote {count} scenes to {} in {:.1?}: mistaken fraction {:.4}, characters per frame {:.3}",
        out.display(),
        t.elapsed(),
        m.realized_mistaken_fraction,
        m.realized_characters_per_frame
    );
    let outcome = json!({
        "feasible": feasible,
        "realized_mistaken_fraction": m.realized_mistaken_fraction,
        "realized_characters_per_frame": m.realized_characters_per_frame,
        "adjustments": m.adjustments,
    });
    save_manifest(&cfg, "generate", outcome, &out.join(RUN_MANIFEST))?;
    Ok(())
}

fn stats(data: &Path, out: &Path) -> Result<()> {
    let dataset = load_dataset(data)?;
    let report = dataset_stats(&dataset);
    report.write_to(out)?;
    let cfg = RunConfig { data_dir: Some(data.to_path_buf()), report_dir: Some(out.to_path_buf()), ..RunConfig::default() };
    let outcome = json!({ "scenes": dataset.len(), "master_seed": dataset.manifest.master_seed });
    save_manifest(&cfg, "stats", outcome, &out.join(RUN_MANIFEST))?;
    eprintln!("wrote statistics to {}", out.display());
    Ok(())
}

fn train(data: &Path, config: &Path, model: &Path, variant: Option<Variant>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(v) = variant {
        cfg.variant = v.name().to_string();
    }
    cfg.data_dir = Some(data.to_path_buf());
    cfg.model = Some(model.to_path_buf());
    let variant = cfg.train_variant()?;
    let dataset = load_dataset(data)?;
    let split = split_dataset(dataset.len(), cfg.base_seed)?;
    let kind = FeatureKind::Image(variant);
    let t = Instant::now();
    let mut tables: HashMap<FeatureKind, Arc<FeatureTable>> = HashMap::new();
    tables.insert(kind, Arc::new(build_feature_table(&dataset, kind)?));
    eprintln!("features for {} ready in {:.1?}", variant, t.elapsed());
    let spec = MethodSpec::ablation(variant);
    let train_cfg = cfg.train_config();
    let TrainedMethod::Model { params, history, features } =
        train_method(&dataset, &spec, &split, &tables, &train_cfg, cfg.base_seed)?
    else {
        bail!("Multiple Image always trains a model");
    };
    for h in &history {
        eprintln!("epoch {:>3}  loss {:.5}  val accuracy {:.4}", h.epoch, h.train_loss, h.val_accuracy);
    }
    let dir = model.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    create_dir(dir)?;
    write_model(model, &ModelFile::new(&params, features, &train_cfg, &history))?;
    let best = history.iter().map(|h| h.val_accuracy).fold(0.0, f64::max);
    let outcome = json!({
        "split_seed": cfg.base_seed,
        "epochs": history.len(),
        "best_val_accuracy": best,
        "variant": variant.name(),
    });
    save_manifest(&cfg, "train", outcome, &dir.join(RUN_MANIFEST))?;
    eprintln!("wrote {} after {} epochs in {:.1?}", model.display(), history.len(), t.elapsed());
    Ok(())
}

fn parse_tasks(task: &str) -> Result<Vec<TaskKind>> {
    if task == "all" {
        return Ok(TaskKind::ALL.to_vec());
    }
    Ok(vec![task.parse::<TaskKind>().map_err(|e| anyhow!("--task: {e}"))?])
}

fn write_report(report: &EvalReport, title: &str, out: &Path) -> Result<()> {
    create_dir(out)?;
    write_file(&out.join("results.csv"), &report.to_csv())?;
    let md = report.to_markdown(title);
    write_file(&out.join("results.md"), &md)?;
    println!("{md}");
    Ok(())
}

fn eval(
    data: &Path,
    model: &Path,
    task: &str,
    reps: Option<usize>,
    seed: Option<u64>,
    out: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let mut cfg = config_or_default(config)?;
    let tasks = parse_tasks(task)?;
    cfg.repetitions = reps.unwrap_or(cfg.repetitions);
    cfg.base_seed = seed.unwrap_or(cfg.base_seed);
    cfg.data_dir = Some(data.to_path_buf());
    cfg.model = Some(model.to_path_buf());
    cfg.report_dir = Some(out.to_path_buf());
    let file = read_model(model)?;
    let dataset = load_dataset(data)?;
    let label = match file.features {
        FeatureKind::Image(Variant::Standard) => "Multiple Image".to_string(),
        FeatureKind::Image(v) => format!("Multiple Image ({v})"),
        FeatureKind::Baseline(b) => b.name().to_string(),
    };
    let mut report = evaluate_model(&dataset, &file.params(), file.features, &tasks, cfg.repetitions, cfg.base_seed, &label)?;
    report.notes.push(format!(
        "Fixed model {} scored on the test split of seeds {}..{}.",
        model.display(),
        cfg.base_seed,
        cfg.base_seed + cfg.repetitions as u64
    ));
    write_report(&report, "Evaluation", out)?;
    let outcome = json!({ "tasks": tasks.iter().map(|t| t.name()).collect::<Vec<_>>(), "reps": cfg.repetitions });
    save_manifest(&cfg, "eval", outcome, &out.join(RUN_MANIFEST))?;
    Ok(())
}

fn run_and_report(
    dataset: &Dataset,
    specs: &[MethodSpec],
    cfg: &RunConfig,
    reps: usize,
    (title, command, note): (&str, &str, Option<&str>),
    out: &Path,
) -> Result<()> {
    let settings = cfg.eval_settings(reps);
    let t = Instant::now();
    let mut report = run_suite(dataset, specs, &settings, &|line| eprintln!("[{:>7.1?}] {line}", t.elapsed()))?;
    report.notes.push(format!("{} scenes, {reps} repetitions from base seed {}.", dataset.len(), cfg.base_seed));
    report.notes.extend(note.map(str::to_string));
    write_report(&report, title, out)?;
    let outcome = json!({ "reps": reps, "methods": specs.iter().map(MethodSpec::label).collect::<Vec<_>>() });
    Ok(save_manifest(cfg, command, outcome, &out.join(RUN_MANIFEST))?)
}

fn ablate(data: &Path, config: Option<&Path>, reps: Option<usize>, out: &Path) -> Result<()> {
    let mut cfg = config_or_default(config)?;
    cfg.ablation_repetitions = reps.unwrap_or(cfg.ablation_repetitions);
    cfg.data_dir = Some(data.to_path_buf());
    cfg.report_dir = Some(out.to_path_buf());
    cfg.validate()?;
    let dataset = load_dataset(data)?;
    let mut specs = vec![MethodSpec::ablation(Variant::Standard)];
    specs.extend(cfg.ablation_variants()?.into_iter().filter(|&v| v != Variant::Standard).map(MethodSpec::ablation));
    let note = "Each model is trained on altered features and evaluated on unaltered ones.";
    run_and_report(&dataset, &specs, &cfg, cfg.ablation_repetitions, ("Ablations", "ablate", Some(note)), out)
}

fn baselines(data: &Path, config: Option<&Path>, reps: Option<usize>, out: &Path) -> Result<()> {
    let mut cfg = config_or_default(config)?;
    cfg.repetitions = reps.unwrap_or(cfg.repetitions);
    cfg.data_dir = Some(data.to_path_buf());
    cfg.report_dir = Some(out.to_path_buf());
    cfg.validate()?;
    let dataset = load_dataset(data)?;
    let specs = cfg.method_specs()?;
    let note = format!(
        "Every baseline uses the convolutional logistic learner at threshold 0.5, with K=1 for Time, Pose, \
         Time + Pose and Single Image and K={} for the others.",
        cfg.k
    );
    run_and_report(&dataset, &specs, &cfg, cfg.repetitions, ("Baselines", "baselines", Some(&note)), out)
}

fn animate(scene_path: &Path, steps: usize, out: &Path) -> Result<()> {
    if steps == 0 {
        bail!("--steps must be at least 1");
    }
    let scene = load_scene(scene_path)?;
    create_dir(out)?;
    let mut n = 0usize;
    let mut emit = |frame: &mistaken_core::scene::Frame| -> Result<()> {
        write_file(&out.join(format!("frame-{n:03}.json")), &encode_frame(frame, true)?)?;
        write_file(&out.join(format!("frame-{n:03}.svg")), &render_svg(frame, None))?;
        n += 1;
        Ok(())
    };
    for t in 0..NUM_FRAMES - 1 {
        for s in 0..steps {
            emit(&interpolate_frame(&scene, t, s as f64 / steps as f64)?)?;
        }
    }
    emit(&scene.frames[NUM_FRAMES - 1])?;
    let cfg = RunConfig { report_dir: Some(out.to_path_buf()), ..RunConfig::default() };
    save_manifest(&cfg, "animate", json!({ "scene": scene_path, "steps": steps, "frames": n }), &out.join(RUN_MANIFEST))?;
    eprintln!("wrote {n} frames to {}", out.display());
    Ok(())
}

fn render(scene_path: &Path, out: &Path, highlight: Option<usize>) -> Result<()> {
    let highlight = highlight.map(CharacterId::new).transpose()?;
    let scene = load_scene(scene_path)?;
    create_dir(out)?;
    for (t, frame) in scene.frames.iter().enumerate() {
        write_file(&out.join(format!("frame-{t:03}.svg")), &render_svg(frame, highlight))?;
    }
    let cfg = RunConfig { report_dir: Some(out.to_path_buf()), ..RunConfig::default() };
    let outcome = json!({ "scene": scene_path, "highlight": highlight.map(CharacterId::index) });
    save_manifest(&cfg, "render", outcome, &out.join(RUN_MANIFEST))?;
    eprintln!("wrote {} frames to {}", NUM_FRAMES, out.display());
    Ok(())
}
