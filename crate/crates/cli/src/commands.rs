use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use colontcn::data::{
    cohort_of, generate_synthetic, load_features, parse_annotations, rasterize, save_features, segmentize,
    segments_for, write_annotations, FeatureSequence, LabelClass, Manifest, VideoEntry,
};
use colontcn::metrics::MetricsReport;
use colontcn::model::{count_params, estimate_gflops, macs_per_frame, model_receptive_field, REFERENCE_FRAMES};
use colontcn::seqcore::RngState;
use colontcn::train::{
    evaluate_model, five_fold, four_fold, load_folds, predict_probabilities, run_cv, save_folds, train as fit,
    validate_folds, Checkpoint, FoldScheme, FoldSpec,
};
use serde::Serialize;

use crate::config::{synthetic_spec, Overrides, RunConfig};
use crate::exit::Failure;
use crate::render::render_svg;
use crate::Split;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub fn synth(config: Option<&Path>, n: usize, out: &Path, seed: Option<u64>) -> Result<()> {
    let spec = synthetic_spec(config, seed)?;
    let videos = generate_synthetic(&spec, n, &RngState::new(spec.seed))?;
    create_dir(&out.join("features"))?;
    create_dir(&out.join("annotations"))?;
    let mut entries = Vec::with_capacity(videos.len());
    for v in &videos {
        let feat = PathBuf::from("features").join(format!("{}.ctcnfeat", v.video_id));
        let ann = PathBuf::from("annotations").join(format!("{}.csv", v.video_id));
        save_features(&out.join(&feat), v.fps, &v.features)?;
        write(&out.join(&ann), write_annotations(&segmentize(&v.video_id, &v.labels)))?;
        entries.push(VideoEntry {
            video_id: v.video_id.clone(),
            features: feat,
            annotations: ann,
            fps: v.fps,
            cohort: cohort_of(&v.video_id).to_string(),
            fold_tags: Vec::new(),
        });
    }
    let manifest = Manifest { feature_dim: spec.feature_dim, videos: entries, base_dir: out.to_path_buf() };
    manifest.save(&out.join("manifest.json"))?;
    write(&out.join("synth.toml"), toml::to_string(&spec).expect("spec serializes"))?;
    let frames: usize = videos.iter().map(FeatureSequence::len).sum();
    println!("wrote {} videos ({frames} frames, D = {}) to {}", videos.len(), spec.feature_dim, out.display());
    Ok(())
}

struct Dataset {
    videos: Vec<FeatureSequence>,
    folds: Vec<FoldSpec>,
}

fn universe(manifest: &Manifest) -> Vec<(String, String)> {
    manifest.videos.iter().map(|v| (v.video_id.clone(), v.cohort.clone())).collect()
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let manifest = Manifest::load(cfg.manifest()?)?;
    if manifest.feature_dim != cfg.model.input_dim() {
        return Err(Failure::Config(format!(
            "model input_dim is {} but the manifest's features have {} dimensions",
            cfg.model.input_dim(),
            manifest.feature_dim
        ))
        .into());
    }
    let ids = universe(&manifest);
    let folds = match &cfg.fold.file {
        Some(f) => load_folds(f)?,
        None => match cfg.fold.scheme {
            FoldScheme::FiveFold => five_fold(&ids, cfg.fold.seed)?,
            FoldScheme::FourFold => four_fold(&ids)?,
        },
    };
    validate_folds(&folds, Some(ids.as_slice()))?;
    Ok(Dataset { videos: manifest.load_all()?, folds })
}

fn pick(videos: &[FeatureSequence], ids: &[String]) -> Vec<FeatureSequence> {
    ids.iter().filter_map(|id| videos.iter().find(|v| &v.video_id == id).cloned()).collect()
}

fn print_metrics(title: &str, r: &MetricsReport) {
    println!("{title}");
    let names: Vec<String> = r.classes.iter().map(|c| format!("{:>11}", c.class)).collect();
    let f1: Vec<String> =
        r.classes.iter().map(|c| c.f1.map_or(format!("{:>11}", "-"), |v| format!("{:>11.1}", 100.0 * v))).collect();
    println!("  F1  {}", names.join(""));
    println!("      {}", f1.join(""));
    println!("  wF1 {:.1}  wJacc {:.1}  WMAPE {:.2}%  ({} frames)", 100.0 * r.wf1, 100.0 * r.wjacc, r.wmape, r.frames);
}

pub fn train(config: Option<&Path>, overrides: &Overrides) -> Result<()> {
    let cfg = RunConfig::resolve(config, overrides)?;
    let out = cfg.out_dir()?.to_path_buf();
    let data = load_dataset(&cfg)?;
    let fold = data
        .folds
        .get(cfg.fold.index)
        .ok_or_else(|| Failure::Config(format!("fold {} requested, {} available", cfg.fold.index, data.folds.len())))?;
    create_dir(&out)?;
    write(&out.join("config.toml"), cfg.to_toml())?;
    save_folds(&out.join("folds.json"), &data.folds)?;

    let (tr, va) = (pick(&data.videos, &fold.train), pick(&data.videos, &fold.valid));
    let train_cfg = cfg.train_config();
    let outcome = fit(&train_cfg, &tr, &va)?;
    outcome.best.save(&out.join("best.ckpt"))?;
    outcome.last.save(&out.join("last.ckpt"))?;
    write(&out.join("history.jsonl"), outcome.history.to_jsonl())?;
    let report = evaluate_model(&train_cfg.model, &outcome.best.params, &va)?;
    write(&out.join("valid_report.json"), to_json(&report))?;
    println!(
        "fold {}: {} train / {} valid videos, best iteration {}",
        fold.fold_id,
        tr.len(),
        va.len(),
        outcome.best.iteration
    );
    print_metrics("validation", &report);
    Ok(())
}

pub fn cv(config: Option<&Path>, overrides: &Overrides) -> Result<()> {
    let cfg = RunConfig::resolve(config, overrides)?;
    let out = cfg.out_dir()?.to_path_buf();
    let data = load_dataset(&cfg)?;
    create_dir(&out)?;
    write(&out.join("config.toml"), cfg.to_toml())?;
    save_folds(&out.join("folds.json"), &data.folds)?;
    let run = run_cv(&data.folds, &data.videos, &cfg.train_config())?;
    for (f, o) in run.report.folds.iter().zip(&run.outcomes) {
        let dir = out.join(format!("fold{}", f.fold_id));
        create_dir(&dir)?;
        o.best.save(&dir.join("best.ckpt"))?;
        write(&dir.join("history.jsonl"), o.history.to_jsonl())?;
        print_metrics(&format!("fold {} test (best iteration {})", f.fold_id, f.best_iteration), &f.test);
    }
    write(&out.join("cv_report.json"), to_json(&run.report))?;
    let m = &run.report.mean;
    println!(
        "mean over {} folds: wF1 {:.1}  wJacc {:.1}  WMAPE {:.2}%",
        run.report.folds.len(),
        100.0 * m.wf1,
        100.0 * m.wjacc,
        m.wmape
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    checkpoint_iteration: u64,
    valid_wf1: Option<f64>,
    fold: Option<usize>,
    split: String,
    params: u64,
    gflops: f64,
    gflops_frames: u64,
    videos: Vec<String>,
    metrics: MetricsReport,
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ckpt = Checkpoint::load(path)?;
    let classes = ckpt.config.model.num_classes();
    if classes != LabelClass::TARGETS.len() {
        return Err(Failure::Data(format!(
            "{}: checkpoint predicts {classes} classes, annotations have {}",
            path.display(),
            LabelClass::TARGETS.len()
        ))
        .into());
    }
    Ok(ckpt)
}

pub fn eval(
    checkpoint: &Path,
    manifest: &Path,
    folds: Option<&Path>,
    fold: Option<usize>,
    split: Split,
    out: Option<&Path>,
) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let model = &ckpt.config.model;
    let m = Manifest::load(manifest)?;
    if m.feature_dim != model.input_dim() {
        return Err(Failure::Data(format!(
            "checkpoint expects {} feature dimensions, manifest has {}",
            model.input_dim(),
            m.feature_dim
        ))
        .into());
    }
    let ids: Vec<String> = match fold {
        None => m.videos.iter().map(|v| v.video_id.clone()).collect(),
        Some(k) => {
            let path = folds.ok_or_else(|| Failure::Config("--fold needs --folds".into()))?;
            let all = load_folds(path)?;
            validate_folds(&all, Some(universe(&m).as_slice()))?;
            let f =
                all.get(k).ok_or_else(|| Failure::Config(format!("fold {k} requested, {} available", all.len())))?;
            match split {
                Split::Train => f.train.clone(),
                Split::Valid => f.valid.clone(),
                Split::Test => f.test.clone(),
                Split::All => [&f.train[..], &f.valid[..], &f.test[..]].concat(),
            }
        }
    };
    let videos = ids
        .iter()
        .map(|id| {
            let entry = m.entry(id).ok_or_else(|| Failure::Data(format!("video {id} is not in the manifest")))?;
            Ok(m.load_video(entry)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let metrics = evaluate_model(model, &ckpt.params, &videos)?;
    let split_name = if fold.is_some() { format!("{split:?}").to_lowercase() } else { "all".into() };
    print_metrics(&format!("{} videos ({split_name})", videos.len()), &metrics);
    let report = EvalReport {
        checkpoint_iteration: ckpt.iteration,
        valid_wf1: ckpt.valid_wf1,
        fold,
        split: split_name,
        params: count_params(model),
        gflops: estimate_gflops(model, REFERENCE_FRAMES),
        gflops_frames: REFERENCE_FRAMES,
        videos: ids,
        metrics,
    };
    println!("  {} parameters, {:.3} GFLOPs at {} frames", report.params, report.gflops, REFERENCE_FRAMES);
    if let Some(p) = out {
        write(p, to_json(&report))?;
    }
    Ok(())
}

pub fn predict(checkpoint: &Path, out: &Path, probs: bool, features: &[PathBuf]) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let model = &ckpt.config.model;
    let mut stems: Vec<String> = Vec::with_capacity(features.len());
    for f in features {
        let stem = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Failure::Config(format!("{}: no file name", f.display())))?;
        if stems.contains(&stem) {
            return Err(Failure::Config(format!("two inputs would both write {stem}.csv")).into());
        }
        stems.push(stem);
    }
    create_dir(out)?;
    for (path, stem) in features.iter().zip(&stems) {
        let file = load_features(path)?;
        if file.features.cols() != model.input_dim() {
            return Err(Failure::Data(format!(
                "{}: {} feature dimensions, checkpoint expects {}",
                path.display(),
                file.features.cols(),
                model.input_dim()
            ))
            .into());
        }
        let p = predict_probabilities(model, &ckpt.params, &file.features, file.fps as f64)?;
        let labels = p.argmax_rows();
        let mut text = String::from("frame,label");
        if probs {
            for c in LabelClass::TARGETS {
                text.push_str(",p_");
                text.push_str(c.name());
            }
        }
        text.push('\n');
        for (t, &l) in labels.iter().enumerate() {
            text.push_str(&format!("{t},{}", LabelClass::TARGETS[l].name()));
            if probs {
                for v in p.row(t) {
                    text.push_str(&format!(",{v}"));
                }
            }
            text.push('\n');
        }
        let dest = out.join(format!("{stem}.csv"));
        write(&dest, text)?;
        println!("{}: {} frames -> {}", path.display(), labels.len(), dest.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct Profile {
    levels: usize,
    stages: usize,
    params: u64,
    receptive_field: u64,
    macs_per_frame: u64,
    gflops: Vec<(u64, f64)>,
}

pub fn profile(
    config: Option<&Path>,
    levels: Option<usize>,
    single_conv: bool,
    frames: &[u64],
    json: bool,
) -> Result<()> {
    let cfg = RunConfig::resolve(config, &Overrides::default())?;
    let mut model = cfg.model;
    if let Some(l) = levels {
        model.base.levels = l;
    }
    if single_conv {
        model.base.block.double_conv = false;
        model.base.block.residual = false;
    }
    model.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let frames = if frames.is_empty() { vec![REFERENCE_FRAMES] } else { frames.to_vec() };
    let p = Profile {
        levels: model.base.levels,
        stages: model.num_stages(),
        params: count_params(&model),
        receptive_field: model_receptive_field(&model),
        macs_per_frame: macs_per_frame(&model),
        gflops: frames.iter().map(|&t| (t, estimate_gflops(&model, t))).collect(),
    };
    if json {
        print!("{}", to_json(&p));
        return Ok(());
    }
    println!("levels            {}", p.levels);
    println!("stages            {}", p.stages);
    println!("parameters        {}", p.params);
    println!("receptive field   {} frames", p.receptive_field);
    println!("MACs per frame    {}", p.macs_per_frame);
    for (t, g) in &p.gflops {
        println!("GFLOPs @ {t:<8} {g:.3}");
    }
    Ok(())
}

/// Labels of one track: a per-frame label file (`frame,label,...`) or an
/// annotation file.
fn read_track(path: &Path, video: Option<&str>) -> Result<(String, Vec<LabelClass>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    let bad = |m: String| Failure::Data(format!("{}: {m}", path.display()));
    let header = text.lines().next().unwrap_or("").trim();
    if header.starts_with("video_id") {
        let segs = parse_annotations(&text).map_err(|e| bad(e.to_string()))?;
        let mut ids: Vec<&str> = segs.iter().map(|s| s.video_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        let id = match (video, ids.as_slice()) {
            (Some(v), _) => v,
            (None, [one]) => one,
            (None, _) => return Err(bad(format!("{} videos, choose one with --video", ids.len())).into()),
        };
        let own = segments_for(&segs, id);
        let end = own.last().ok_or_else(|| bad(format!("no segments for video {id}")))?.end_frame + 1;
        let labels = rasterize(&own, end as usize).map_err(|e| bad(e.to_string()))?;
        return Ok((name, labels));
    }
    if !header.starts_with("frame,label") {
        return Err(bad("expected a `frame,label` or annotation header".into()).into());
    }
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let frame: usize = cols
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| bad(format!("line {}: bad frame index", i + 1)))?;
        if frame != labels.len() {
            return Err(bad(format!("line {}: frame {frame} out of order", i + 1)).into());
        }
        let label = cols
            .next()
            .and_then(|l| LabelClass::from_name(l.trim()))
            .ok_or_else(|| bad(format!("line {}: unknown label", i + 1)))?;
        labels.push(label);
    }
    Ok((name, labels))
}

pub fn render(gt: &Path, preds: &[PathBuf], video: Option<&str>, out: &Path) -> Result<()> {
    let mut tracks = vec![read_track(gt, video)?];
    for p in preds {
        tracks.push(read_track(p, video)?);
    }
    let svg = render_svg(&tracks).map_err(Failure::Data)?;
    write(out, svg)?;
    println!("{} tracks of {} frames -> {}", tracks.len(), tracks[0].1.len(), out.display());
    Ok(())
}

pub fn folds_validate(folds: &Path, manifest: Option<&Path>) -> Result<()> {
    let specs = load_folds(folds)?;
    let ids = manifest.map(Manifest::load).transpose()?.map(|m| universe(&m));
    validate_folds(&specs, ids.as_deref())?;
    for f in &specs {
        println!("fold {}: {} train / {} valid / {} test", f.fold_id, f.train.len(), f.valid.len(), f.test.len());
    }
    println!("{} folds valid", specs.len());
    Ok(())
}
