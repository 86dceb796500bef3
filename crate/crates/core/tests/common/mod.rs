//! Independent oracles shared by integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use colontcn::seqcore::{ConvParams, RngState, SeqMatrix};

/// Per-class scores recomputed from explicit frame sets.
pub struct SetScores {
    pub gt: Vec<usize>,
    pub pred: Vec<usize>,
    pub inter: Vec<usize>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub jaccard: Vec<Option<f64>>,
    pub wf1: f64,
    pub wjacc: f64,
    pub wf1_inverse: f64,
}

pub fn set_scores(pred: &[usize], gt: &[usize], mask: &[bool], classes: usize) -> SetScores {
    let frames = |labels: &[usize], c: usize| -> BTreeSet<usize> {
        (0..labels.len()).filter(|&t| mask[t] && labels[t] == c).collect()
    };
    let mut s = SetScores {
        gt: vec![],
        pred: vec![],
        inter: vec![],
        precision: vec![],
        recall: vec![],
        f1: vec![],
        jaccard: vec![],
        wf1: 0.0,
        wjacc: 0.0,
        wf1_inverse: 0.0,
    };
    for c in 0..classes {
        let g = frames(gt, c);
        let p = frames(pred, c);
        let i = g.intersection(&p).count();
        let u = g.union(&p).count();
        let pr = if p.is_empty() { 0.0 } else { i as f64 / p.len() as f64 };
        let re = if g.is_empty() { 0.0 } else { i as f64 / g.len() as f64 };
        s.f1.push(if pr + re > 0.0 { 2.0 * pr * re / (pr + re) } else { 0.0 });
        s.jaccard.push(if u == 0 { None } else { Some(i as f64 / u as f64) });
        s.precision.push(pr);
        s.recall.push(re);
        s.gt.push(g.len());
        s.pred.push(p.len());
        s.inter.push(i);
    }
    let total: usize = s.gt.iter().sum();
    let inv_total: f64 = s.gt.iter().filter(|&&n| n > 0).map(|&n| 1.0 / n as f64).sum();
    for c in 0..classes {
        if s.gt[c] > 0 {
            let w = s.gt[c] as f64 / total as f64;
            s.wf1 += w * s.f1[c];
            s.wjacc += w * s.jaccard[c].unwrap();
            s.wf1_inverse += (1.0 / s.gt[c] as f64) / inv_total * s.f1[c];
        }
    }
    s
}

/// Withdrawal MAPE from explicit counting.
pub fn wmape_oracle(videos: &[(Vec<usize>, Vec<usize>, Vec<bool>)]) -> f64 {
    let withdrawal = |l: usize| (2..=8).contains(&l);
    let mut total = 0.0;
    for (gt, pred, mask) in videos {
        let a = (0..gt.len()).filter(|&t| mask[t] && withdrawal(gt[t])).count() as f64;
        let p = (0..gt.len()).filter(|&t| mask[t] && withdrawal(pred[t])).count() as f64;
        total += (a - p).abs() / a * 100.0;
    }
    total / videos.len() as f64
}

/// Random labels made of runs, so segment structure is realistic.
pub fn random_runs(rng: &mut RngState, len: usize, classes: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let c = rng.below(classes);
        let run = 1 + rng.below(20);
        for _ in 0..run.min(len - out.len()) {
            out.push(c);
        }
    }
    out
}

/// A random evaluation instance with at least one withdrawal frame.
pub fn random_instance(rng: &mut RngState, max_len: usize) -> (Vec<usize>, Vec<usize>, Vec<bool>) {
    loop {
        let t = 1 + rng.below(max_len);
        let gt = random_runs(rng, t, 9);
        let pred: Vec<usize> = if rng.uniform() < 0.5 {
            random_runs(rng, t, 9)
        } else {
            gt.iter().map(|&g| if rng.uniform() < 0.2 { rng.below(9) } else { g }).collect()
        };
        let mask: Vec<bool> = (0..t).map(|_| rng.uniform() > 0.1).collect();
        if (0..t).any(|i| mask[i] && (2..=8).contains(&gt[i])) {
            return (gt, pred, mask);
        }
    }
}

pub fn random_matrix(rng: &mut RngState, rows: usize, cols: usize) -> SeqMatrix {
    SeqMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| 2.0 * rng.uniform() - 1.0).collect()).unwrap()
}

pub fn random_conv(rng: &mut RngState, cin: usize, cout: usize, k: usize, d: usize, wn: bool) -> ConvParams {
    let mut p = ConvParams::zeros(cin, cout, k, d, wn).unwrap();
    p.direction.iter_mut().for_each(|v| *v = 2.0 * rng.uniform() - 1.0);
    p.bias.iter_mut().for_each(|v| *v = rng.uniform() - 0.5);
    if let Some(g) = &mut p.gain {
        g.iter_mut().for_each(|v| *v = 0.5 + rng.uniform());
    }
    p
}

pub fn conv_flat(p: &ConvParams) -> Vec<f64> {
    let mut v = p.direction.clone();
    if let Some(g) = &p.gain {
        v.extend(g);
    }
    v.extend(&p.bias);
    v
}

pub fn conv_assign(p: &mut ConvParams, flat: &[f64]) {
    let n = p.direction.len();
    p.direction.copy_from_slice(&flat[..n]);
    let mut o = n;
    if let Some(g) = &mut p.gain {
        let m = g.len();
        g.copy_from_slice(&flat[o..o + m]);
        o += m;
    }
    p.bias.copy_from_slice(&flat[o..]);
}

pub fn dot(a: &SeqMatrix, b: &SeqMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}
