//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::time::Instant;

use colontcn::data::{
    cohort_of, generate_synthetic, load_features, make_batch, parse_annotations, rasterize, save_features, segmentize,
    segments_for, write_annotations, FeatureSequence, LabelClass, SyntheticSpec,
};
use colontcn::loss::{
    combined_loss, combined_loss_against, focal_weighted_ce, truncated_mse, truncated_mse_against,
    weighted_cross_entropy, ClassWeights, LossConfig,
};
use colontcn::metrics::{evaluate, VideoEval};
use colontcn::model::{count_params, model_backward, model_forward_traced, receptive_field, ModelConfig, ModelParams};
use colontcn::seqcore::{
    conv1d_backward, conv1d_forward, dropout, dropout_backward, grad_check, log_softmax_backward, log_softmax_rows,
    relu, relu_backward, softmax_backward, softmax_rows, RngState, SeqMatrix,
};
use colontcn::train::{batch_loss_and_grad, five_fold, run_cv, sequence_loss_and_grad, train, CvRun, TrainConfig};
use common::{conv_assign, conv_flat, dot, random_conv, random_matrix};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn receptive_field_check() -> Check {
    let double = receptive_field(&ModelConfig::single_stage(11, 2048).base);
    let single = receptive_field(&ModelConfig::plain_tcn(14, 2048).base);
    ensure(double == 24_565, || format!("L=11 double conv gives {double}"))?;
    ensure(single == 98_299, || format!("L=14 single conv gives {single}"))?;
    Ok(format!("L11 double = {double}, L14 single = {single}"))
}

fn parameter_check() -> Check {
    let colon = count_params(&ModelConfig::single_stage(13, 2048));
    let tecno = count_params(&ModelConfig::plain_tcn(14, 2048));
    ensure(colon == 880_521, || format!("13-level model has {colon}"))?;
    ensure((tecno as f64 / 1e6 - 0.53).abs() < 0.005, || format!("14-level plain model has {tecno}"))?;
    Ok(format!("13-level = {colon}, 14-level plain = {tecno}"))
}

const EPS: f64 = 1e-6;

fn kernel_errors() -> Result<Vec<(&'static str, f64)>, String> {
    let e = |r: colontcn::Result<f64>| r.map_err(|e| e.to_string());
    let mut rng = RngState::new(2024);
    let mut out = Vec::new();

    for &(cin, cout, k, d, wn, t) in &[(3, 2, 3, 1, false, 9), (2, 4, 5, 4, true, 12), (2, 2, 7, 16, true, 10)] {
        let p0 = random_conv(&mut rng, cin, cout, k, d, wn);
        let x0 = random_matrix(&mut rng, t, cin);
        let r = random_matrix(&mut rng, t, cout);
        let n_p = conv_flat(&p0).len();
        let mut point = conv_flat(&p0);
        point.extend(x0.as_slice());
        let err = e(grad_check(
            |z| {
                let mut p = p0.clone();
                conv_assign(&mut p, &z[..n_p]);
                let x = SeqMatrix::from_vec(t, cin, z[n_p..].to_vec()).unwrap();
                let y = conv1d_forward(&x, &p).unwrap();
                let mut grads = p.zeros_like();
                let gx = conv1d_backward(&x, &p, &r, &mut grads).unwrap();
                let mut g = conv_flat(&grads);
                g.extend(gx.as_slice());
                (dot(&y, &r), g)
            },
            &point,
            EPS,
        ))?;
        out.push((if wn { "weight-normalized dilated conv" } else { "dilated conv" }, err));
    }

    let (t, c) = (8, 5);
    let x0: Vec<f64> = (0..t * c)
        .map(|_| {
            let v = 2.0 * rng.uniform() - 1.0;
            if v.abs() < 0.05 {
                v + 0.1
            } else {
                v
            }
        })
        .collect();
    let r = random_matrix(&mut rng, t, c);
    let shape = |z: &[f64]| SeqMatrix::from_vec(t, c, z.to_vec()).unwrap();
    out.push((
        "relu",
        e(grad_check(|z| (dot(&relu(&shape(z)), &r), relu_backward(&shape(z), &r).into_vec()), &x0, EPS))?,
    ));
    out.push((
        "dropout",
        e(grad_check(
            |z| {
                let (y, m) = dropout(&shape(z), 0.4, &mut RngState::new(8), true).unwrap();
                (dot(&y, &r), dropout_backward(m.as_ref(), &r).into_vec())
            },
            &x0,
            EPS,
        ))?,
    ));
    out.push((
        "log-softmax",
        e(grad_check(
            |z| {
                let lp = log_softmax_rows(&shape(z));
                (dot(&lp, &r), log_softmax_backward(&lp.map(f64::exp), &r).into_vec())
            },
            &x0,
            EPS,
        ))?,
    ));
    out.push((
        "softmax",
        e(grad_check(
            |z| {
                let p = softmax_rows(&shape(z));
                (dot(&p, &r), softmax_backward(&p, &r).into_vec())
            },
            &x0,
            EPS,
        ))?,
    ));

    let lp0 = log_softmax_rows(&random_matrix(&mut rng, t, c));
    let labels: Vec<usize> = (0..t).map(|_| rng.below(c)).collect();
    let mask: Vec<bool> = (0..t).map(|i| i != 3).collect();
    let w = ClassWeights::new((0..c).map(|_| 0.5 + rng.uniform()).collect()).unwrap();
    let as_lp = |z: &[f64]| SeqMatrix::from_vec(t, c, z.to_vec()).unwrap();
    out.push((
        "weighted cross-entropy",
        e(grad_check(
            |z| {
                let l = weighted_cross_entropy(&as_lp(z), &labels, &w, &mask).unwrap();
                (l.value, l.grad.into_vec())
            },
            lp0.as_slice(),
            EPS,
        ))?,
    ));
    out.push((
        "focal cross-entropy",
        e(grad_check(
            |z| {
                let l = focal_weighted_ce(&as_lp(z), &labels, &w, 2.0, &mask).unwrap();
                (l.value, l.grad.into_vec())
            },
            lp0.as_slice(),
            EPS,
        ))?,
    ));
    // small tau so some pairs sit in the truncated branch
    out.push((
        "truncated MSE",
        e(grad_check(
            |z| {
                let l = truncated_mse_against(&as_lp(z), &lp0, 0.6, &mask);
                (l.value, l.grad.into_vec())
            },
            lp0.as_slice(),
            EPS,
        ))?,
    ));
    Ok(out)
}

fn gradient_check() -> Check {
    let kernels = kernel_errors()?;
    let worst_kernel = kernels.iter().map(|k| k.1).fold(0.0, f64::max);
    if let Some((name, err)) = kernels.iter().find(|k| k.1 >= 1e-5) {
        return Err(format!("{name} relative error {err:.2e}"));
    }

    let mut rng = RngState::new(7);
    let (t, d, c) = (20, 8, 3);
    let mut cfg = ModelConfig::single_stage(3, d);
    cfg.base.block.channels = 4;
    cfg.base.block.dropout = 0.0;
    cfg.base.num_classes = c;
    let cfg = cfg.with_refinement(3, 1);
    let x = random_matrix(&mut rng, t, d);
    let labels: Vec<usize> = (0..t).map(|i| (i / 7) % c).collect();
    let mask: Vec<bool> = (0..t).map(|i| i != 9).collect();
    let weights = ClassWeights::new(vec![0.7, 1.4, 1.0]).unwrap();
    let loss = LossConfig::default();
    let params0 = ModelParams::init(&cfg, &RngState::new(1)).unwrap();
    let drop = RngState::new(0);
    let base = model_forward_traced(&x, &cfg, &params0, &drop, false).unwrap();
    let frozen: Vec<SeqMatrix> = base.stages.iter().map(|s| s.log_probs.clone()).collect();
    let model_err = grad_check(
        |z| {
            let mut p = params0.clone();
            p.assign_flat(z);
            let tr = model_forward_traced(&x, &cfg, &p, &drop, false).unwrap();
            let lps: Vec<SeqMatrix> = tr.stages.iter().map(|s| s.log_probs.clone()).collect();
            let l = combined_loss_against(&lps, &frozen, &labels, &weights, &loss, &mask).unwrap();
            let mut g = p.zeros_like();
            model_backward(&x, &cfg, &p, &tr, &l.grads, &mut g).unwrap();
            (l.value, g.flatten())
        },
        &params0.flatten(),
        EPS,
    )
    .map_err(|e| e.to_string())?;
    ensure(model_err < 1e-3, || format!("tiny model relative error {model_err:.2e}"))?;
    Ok(format!(
        "{} kernels worst {worst_kernel:.1e} (< 1e-5), tiny two-stage model {model_err:.1e} (< 1e-3)",
        kernels.len()
    ))
}

fn loss_check() -> Check {
    let t = 50;
    let mut rng = RngState::new(3);
    let uniform = SeqMatrix::filled(t, 9, -(9f64).ln());
    let labels: Vec<usize> = (0..t).map(|_| rng.below(9)).collect();
    let mask = vec![true; t];
    let w = ClassWeights::uniform(9);
    let ce = weighted_cross_entropy(&uniform, &labels, &w, &mask).map_err(|e| e.to_string())?.value;
    ensure((ce - 9f64.ln()).abs() < 1e-12, || format!("uniform CE {ce}"))?;

    let row: Vec<f64> = (0..9).map(|_| rng.uniform()).collect();
    let constant = log_softmax_rows(&SeqMatrix::from_rows(&vec![row; t]).unwrap());
    let flat = truncated_mse(&constant, 4.0, &mask).value;
    ensure(flat == 0.0, || format!("T-MSE on constant input {flat}"))?;

    let tau = 4.0;
    let mut worst = 0.0f64;
    for scale in [1.0, 10.0, 1e3] {
        let lp = log_softmax_rows(&random_matrix(&mut rng, t, 9).map(|v| v * scale));
        let v = truncated_mse(&lp, tau, &mask).value;
        worst = worst.max(v);
        ensure(v <= tau * tau, || format!("T-MSE {v} exceeds tau^2"))?;
    }

    let lp = log_softmax_rows(&random_matrix(&mut rng, t, 9).map(|v| 3.0 * v));
    let cfg = LossConfig::default();
    let one = combined_loss(std::slice::from_ref(&lp), &labels, &w, &cfg, &mask).map_err(|e| e.to_string())?;
    let mut gap = 0.0f64;
    for stages in 2..=4 {
        let many = combined_loss(&vec![lp.clone(); stages], &labels, &w, &cfg, &mask).map_err(|e| e.to_string())?;
        gap = gap.max((many.value - one.value).abs());
    }
    ensure(gap < 1e-12, || format!("equal stages differ by {gap:e}"))?;
    Ok(format!(
        "CE - ln 9 = {:.1e}, T-MSE const = 0, max T-MSE {worst:.3} <= 16, stage gap {gap:.1e}",
        (ce - 9f64.ln()).abs()
    ))
}

fn metric_oracle_check() -> Check {
    let mut rng = RngState::new(4242);
    let instances: Vec<_> = (0..100).map(|_| common::random_instance(&mut rng, 200)).collect();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let mut worst = 0.0f64;
    let ids: Vec<String> = (0..instances.len()).map(|i| format!("v{i}")).collect();
    for (n, (gt, pred, mask)) in instances.iter().enumerate() {
        let v = VideoEval { video_id: &ids[n], gt, pred, mask };
        let r = evaluate(&[v], 9).map_err(|e| e.to_string())?;
        let o = common::set_scores(pred, gt, mask, 9);
        for c in 0..9 {
            let row = &r.classes[c];
            ensure(
                row.support as usize == o.gt[c]
                    && row.predicted as usize == o.pred[c]
                    && r.counts.intersection[c] as usize == o.inter[c],
                || format!("instance {n} class {c}: counts differ"),
            )?;
            let f1 = row.f1.unwrap_or(o.f1[c]);
            for (a, b) in [(row.precision, o.precision[c]), (row.recall, o.recall[c]), (f1, o.f1[c])] {
                worst = worst.max((a - b).abs());
                ensure(close(a, b), || format!("instance {n} class {c}: {a} vs {b}"))?;
            }
            if o.gt[c] > 0 {
                let j = row.jaccard.ok_or_else(|| format!("instance {n} class {c}: missing Jaccard"))?;
                let oj = o.jaccard[c].unwrap();
                worst = worst.max((j - oj).abs());
                ensure(close(j, oj), || format!("instance {n} class {c}: J {j} vs {oj}"))?;
                ensure(close(f1, 2.0 * j / (1.0 + j)), || format!("instance {n} class {c}: F1 != 2J/(1+J)"))?;
            }
        }
        for (a, b) in [(r.wf1, o.wf1), (r.wjacc, o.wjacc), (r.wf1_inverse, o.wf1_inverse)] {
            worst = worst.max((a - b).abs());
            ensure(close(a, b), || format!("instance {n}: weighted score {a} vs {b}"))?;
        }
        let m = common::wmape_oracle(std::slice::from_ref(&instances[n]));
        ensure((r.wmape - m).abs() <= 1e-12 * m.max(1.0), || format!("instance {n}: WMAPE {} vs {m}", r.wmape))?;
    }
    let all: Vec<VideoEval> =
        instances.iter().zip(&ids).map(|((gt, pred, mask), id)| VideoEval { video_id: id, gt, pred, mask }).collect();
    let r = evaluate(&all, 9).map_err(|e| e.to_string())?;
    let (g, p, m): (Vec<usize>, Vec<usize>, Vec<bool>) =
        instances.iter().fold(Default::default(), |mut acc, (g, p, m)| {
            acc.0.extend(g);
            acc.1.extend(p);
            acc.2.extend(m);
            acc
        });
    let o = common::set_scores(&p, &g, &m, 9);
    ensure(close(r.wf1, o.wf1) && close(r.wjacc, o.wjacc), || "pooled weighted scores differ".into())?;
    let wm = common::wmape_oracle(&instances);
    ensure((r.wmape - wm).abs() <= 1e-12 * wm.max(1.0), || format!("pooled WMAPE {} vs {wm}", r.wmape))?;
    Ok(format!("100 instances, counts exact, worst ratio gap {worst:.1e}"))
}

fn masking_check() -> Check {
    let spec = SyntheticSpec { feature_dim: 6, ..SyntheticSpec::default() }.with_duration_scale(0.03);
    let seqs = generate_synthetic(&spec, 4, &RngState::new(10)).map_err(|e| e.to_string())?;
    let lengths: Vec<usize> = seqs.iter().map(FeatureSequence::len).collect();
    ensure(lengths.iter().any(|&l| l != lengths[0]), || "need unequal lengths".into())?;
    let mut model = ModelConfig::single_stage(3, 6).with_refinement(2, 1);
    model.base.block.channels = 8;
    let params = ModelParams::init(&model, &RngState::new(2)).map_err(|e| e.to_string())?;
    let weights = ClassWeights::uniform(9);
    let loss = LossConfig::default();
    let rngs: Vec<RngState> = (0..seqs.len() as u64).map(|b| RngState::new(100 + b)).collect();

    let mut batch = make_batch(&seqs).map_err(|e| e.to_string())?;
    let (batched, grad) =
        batch_loss_and_grad(&model, &params, &batch, &weights, &loss, &rngs, true).map_err(|e| e.to_string())?;
    let mut mean = 0.0;
    for (s, r) in seqs.iter().zip(&rngs) {
        let (v, _) =
            sequence_loss_and_grad(&model, &params, &s.features, &s.targets(), &s.mask, &weights, &loss, r, true)
                .map_err(|e| e.to_string())?;
        mean += v / seqs.len() as f64;
    }
    let gap = (batched - mean).abs();
    ensure(gap < 1e-6, || format!("batched {batched} vs mean {mean}"))?;

    for b in 0..batch.len() {
        for t in batch.lengths[b]..batch.max_len {
            batch.features[b].row_mut(t).iter_mut().for_each(|v| *v = f64::NAN);
            batch.labels[b][t] = usize::MAX;
        }
    }
    let (poisoned, pgrad) =
        batch_loss_and_grad(&model, &params, &batch, &weights, &loss, &rngs, true).map_err(|e| e.to_string())?;
    ensure(poisoned == batched && pgrad == grad, || format!("poisoned padding changed the loss: {poisoned}"))?;

    // padded evaluation: junk in masked frames must not reach any metric
    let mut rng = RngState::new(5);
    let (gt, pred, mask) = common::random_instance(&mut rng, 200);
    let clean =
        evaluate(&[VideoEval { video_id: "a", gt: &gt, pred: &pred, mask: &mask }], 9).map_err(|e| e.to_string())?;
    let (mut gt2, mut pred2, mut mask2) = (gt.clone(), pred.clone(), mask.clone());
    for t in 0..gt.len() {
        if !mask[t] {
            gt2[t] = usize::MAX;
            pred2[t] = usize::MAX;
        }
    }
    gt2.extend([usize::MAX; 17]);
    pred2.extend([usize::MAX; 17]);
    mask2.extend([false; 17]);
    let dirty =
        evaluate(&[VideoEval { video_id: "a", gt: &gt2, pred: &pred2, mask: &mask2 }], 9).map_err(|e| e.to_string())?;
    ensure(
        clean.counts == dirty.counts
            && clean.wf1 == dirty.wf1
            && clean.wjacc == dirty.wjacc
            && clean.wmape == dirty.wmape,
        || "poisoned padding changed a metric".into(),
    )?;
    Ok(format!("batched vs mean gap {gap:.1e}, NaN padding: losses, gradients and metrics unchanged"))
}

fn benchmark_data(seed: u64) -> (Vec<FeatureSequence>, Vec<colontcn::train::FoldSpec>) {
    let spec = SyntheticSpec { feature_dim: 16, seed, ..SyntheticSpec::default() };
    let data = generate_synthetic(&spec, 60, &RngState::new(spec.seed)).expect("synthetic data");
    let ids: Vec<(String, String)> =
        data.iter().map(|s| (s.video_id.clone(), cohort_of(&s.video_id).to_string())).collect();
    let folds = five_fold(&ids, seed).expect("folds");
    (data, folds)
}

fn ablated(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::synthetic_benchmark(16, seed);
    cfg.model.base.block.residual = false;
    cfg.model.base.block.double_conv = false;
    cfg
}

struct Benchmark {
    seed: u64,
    full: CvRun,
    ablated: f64,
    seconds: f64,
}

fn run_benchmark(seed: u64) -> Result<Benchmark, String> {
    let (data, folds) = benchmark_data(seed);
    let start = Instant::now();
    let full = run_cv(&folds, &data, &TrainConfig::synthetic_benchmark(16, seed)).map_err(|e| e.to_string())?;
    let seconds = start.elapsed().as_secs_f64();
    let ablated = run_cv(&folds, &data, &ablated(seed)).map_err(|e| e.to_string())?.report.mean.wf1;
    Ok(Benchmark { seed, full, ablated, seconds })
}

fn e2e_check(runs: &[Benchmark]) -> Check {
    let b = &runs[0];
    let mean = &b.full.report.mean;
    let per_fold: Vec<String> = b.full.report.folds.iter().map(|f| format!("{:.3}", f.test.wf1)).collect();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let detail = format!(
        "mean test wF1 {:.3} [{}], WMAPE {:.2}%, 5-fold runtime {:.0} s on {cores} core(s)",
        mean.wf1,
        per_fold.join(", "),
        mean.wmape,
        b.seconds
    );
    ensure(mean.wf1 >= 0.85, || format!("wF1 below 0.85: {detail}"))?;
    ensure(mean.wmape <= 10.0, || format!("WMAPE above 10%: {detail}"))?;
    ensure(b.seconds <= 1800.0, || format!("slower than 30 min: {detail}"))?;
    Ok(detail)
}

fn ablation_check(runs: &[Benchmark]) -> Check {
    let rows: Vec<String> =
        runs.iter().map(|b| format!("seed {}: {:.3} > {:.3}", b.seed, b.full.report.mean.wf1, b.ablated)).collect();
    ensure(runs.iter().all(|b| b.full.report.mean.wf1 > b.ablated), || rows.join("; "))?;
    Ok(rows.join("; "))
}

fn determinism_check(first: &Benchmark) -> Check {
    let (data, folds) = benchmark_data(first.seed);
    let f = &folds[0];
    let pick = |ids: &[String]| -> Vec<FeatureSequence> {
        ids.iter().map(|id| data.iter().find(|s| &s.video_id == id).unwrap().clone()).collect()
    };
    let cfg = TrainConfig::synthetic_benchmark(16, first.seed);
    let again = train(&cfg, &pick(&f.train), &pick(&f.valid)).map_err(|e| e.to_string())?;
    let before = &first.full.outcomes[0];
    ensure(before.history.to_jsonl() == again.history.to_jsonl(), || "history logs differ".into())?;
    let bytes = |c: &colontcn::train::Checkpoint| c.to_archive().to_bytes();
    ensure(bytes(&before.best) == bytes(&again.best), || "best checkpoints differ".into())?;
    ensure(bytes(&before.last) == bytes(&again.last), || "last checkpoints differ".into())?;
    Ok(format!(
        "fold 0 retrained: {} history records and {} + {} checkpoint bytes identical",
        again.history.iterations.len() + again.history.evals.len(),
        bytes(&again.best).len(),
        bytes(&again.last).len()
    ))
}

fn round_trip_check() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = RngState::new(77);
    for i in 0..20 {
        let (t, d) = (rng.below(300), 1 + rng.below(64));
        let m = SeqMatrix::from_vec(t, d, (0..t * d).map(|_| ((rng.uniform() - 0.5) * 1e4) as f32 as f64).collect())
            .unwrap();
        let fps = [5.0, 25.0, 29.97, 30.0][i % 4];
        let path = dir.path().join(format!("f{i}.ctcnfeat"));
        save_features(&path, fps, &m).map_err(|e| e.to_string())?;
        let back = load_features(&path).map_err(|e| e.to_string())?;
        ensure(back.features == m && back.fps == fps as f32, || format!("feature file {i} differs"))?;
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        save_features(&path, back.fps as f64, &back.features).map_err(|e| e.to_string())?;
        ensure(std::fs::read(&path).unwrap() == bytes, || format!("feature file {i} bytes differ on rewrite"))?;
    }

    for n in 0..100 {
        let videos = 1 + rng.below(3);
        let mut segs = Vec::new();
        let mut rasters = Vec::new();
        for v in 0..videos {
            let id = format!("{n:03}-{v:03}");
            let len = 1 + rng.below(2000);
            let labels: Vec<LabelClass> = common::random_runs(&mut rng, len, 10)
                .into_iter()
                .map(|i| LabelClass::from_index(i).unwrap())
                .collect();
            segs.extend(segmentize(&id, &labels));
            rasters.push((id, labels));
        }
        let text = write_annotations(&segs);
        let parsed = parse_annotations(&text).map_err(|e| format!("file {n}: {e}"))?;
        for (id, labels) in &rasters {
            let own = segments_for(&parsed, id);
            let raster = rasterize(&own, labels.len()).map_err(|e| format!("file {n}: {e}"))?;
            ensure(&raster == labels, || format!("file {n} video {id}: raster differs"))?;
            ensure(segmentize(id, &raster) == own, || format!("file {n} video {id}: segments differ"))?;
        }
        ensure(write_annotations(&parsed) == text, || format!("file {n}: text differs"))?;
    }
    Ok("20 feature files bit-exact, 100 annotation files identical".into())
}

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, start: Instant, result: Check| {
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name:<26} {detail} ({secs:.1} s)"),
            Err(why) => {
                failures += 1;
                println!("FAIL  {name:<26} {why} ({secs:.1} s)");
            }
        }
    };

    let t = Instant::now();
    report("receptive field", t, receptive_field_check());
    let t = Instant::now();
    report("parameter budget", t, parameter_check());
    let t = Instant::now();
    report("gradient integrity", t, gradient_check());
    let t = Instant::now();
    report("loss analytics", t, loss_check());
    let t = Instant::now();
    report("metric oracle", t, metric_oracle_check());
    let t = Instant::now();
    report("masking soundness", t, masking_check());
    let t = Instant::now();
    report("format round-trips", t, round_trip_check());

    let t = Instant::now();
    let runs: Result<Vec<Benchmark>, String> = (0..3).map(run_benchmark).collect();
    match runs {
        Ok(runs) => {
            report("synthetic benchmark", t, e2e_check(&runs));
            report("ablation direction", t, ablation_check(&runs));
            let t = Instant::now();
            report("determinism", t, determinism_check(&runs[0]));
        }
        Err(e) => {
            report("synthetic benchmark", t, Err(e.clone()));
            report("ablation direction", t, Err(e.clone()));
            report("determinism", t, Err(e));
        }
    }

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
