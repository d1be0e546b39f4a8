//! Brute-force reference implementations written straight from the
//! definitions, without sharing code with the library.

#![allow(dead_code)]

/// Direct NHWC depth-wise convolution, stride 1, zero padding `k/2`.
pub fn depthwise(x: &[f64], [n, h, w, c]: [usize; 4], kernel: &[f64], k: usize) -> Vec<f64> {
    let r = (k / 2) as isize;
    let mut out = vec![0.0; n * h * w * c];
    for b in 0..n {
        for y in 0..h as isize {
            for xx in 0..w as isize {
                for ch in 0..c {
                    let mut acc = 0.0;
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let (iy, ix) = (y + dy, xx + dx);
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let xv = x[((b * h + iy as usize) * w + ix as usize) * c + ch];
                            let kv = kernel[(((dy + r) as usize) * k + (dx + r) as usize) * c + ch];
                            acc += xv * kv;
                        }
                    }
                    out[((b * h + y as usize) * w + xx as usize) * c + ch] = acc;
                }
            }
        }
    }
    out
}

/// `out[p][j] = b[j] + Σ_i x[p][i]·W[i][j]`.
pub fn pointwise(x: &[f64], c: usize, weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let k = bias.len();
    let mut out = Vec::new();
    for px in x.chunks(c) {
        for j in 0..k {
            let mut acc = bias[j];
            for i in 0..c {
                acc += px[i] * weight[i * k + j];
            }
            out.push(acc);
        }
    }
    out
}

/// Max over `window`×`window` blocks at `stride` with no padding.
pub fn maxpool_valid(x: &[f64], [n, h, w, c]: [usize; 4], window: usize, stride: usize) -> Vec<f64> {
    let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
    let mut out = Vec::new();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut m = f64::NEG_INFINITY;
                    for dy in 0..window {
                        for dx in 0..window {
                            m = m.max(x[((b * h + oy * stride + dy) * w + ox * stride + dx) * c + ch]);
                        }
                    }
                    out.push(m);
                }
            }
        }
    }
    out
}

/// Max over the in-bounds part of a centred 3×3 window.
pub fn maxpool3_same(x: &[f64], [n, h, w, c]: [usize; 4]) -> Vec<f64> {
    let mut out = Vec::new();
    for b in 0..n {
        for y in 0..h as isize {
            for xx in 0..w as isize {
                for ch in 0..c {
                    let mut m = f64::NEG_INFINITY;
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            let (iy, ix) = (y + dy, xx + dx);
                            if iy >= 0 && ix >= 0 && iy < h as isize && ix < w as isize {
                                m = m.max(x[((b * h + iy as usize) * w + ix as usize) * c + ch]);
                            }
                        }
                    }
                    out.push(m);
                }
            }
        }
    }
    out
}

pub fn rect_sum(pixels: &[f64], width: usize, x: usize, y: usize, w: usize, h: usize) -> f64 {
    let mut s = 0.0;
    for yy in y..y + h {
        for xx in x..x + w {
            s += pixels[yy * width + xx];
        }
    }
    s
}

/// `m[t][p]` counted pixel by pixel.
pub fn confusion(pred: &[u8], truth: &[u8], k: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        m[t as usize][p as usize] += 1;
    }
    m
}

/// Per-class IoU from set intersection and union over the pixel lists.
pub fn iou_per_class(pred: &[u8], truth: &[u8], k: usize) -> Vec<Option<f64>> {
    (0..k as u8)
        .map(|c| {
            let inter = pred.iter().zip(truth).filter(|(&p, &t)| p == c && t == c).count();
            let union = pred.iter().zip(truth).filter(|(&p, &t)| p == c || t == c).count();
            (union > 0).then(|| inter as f64 / union as f64)
        })
        .collect()
}

pub fn mean_iou(pred: &[u8], truth: &[u8], k: usize, include_bg: bool) -> Option<f64> {
    let skip = usize::from(!include_bg);
    let v: Vec<f64> = iou_per_class(pred, truth, k).into_iter().skip(skip).flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn present(truth: &[u8], k: usize) -> Vec<usize> {
    (0..k).filter(|&c| truth.iter().any(|&t| t as usize == c)).collect()
}

pub fn fwiou(pred: &[u8], truth: &[u8], k: usize, weights: Option<&[f64]>) -> f64 {
    let ious = iou_per_class(pred, truth, k);
    let cls = present(truth, k);
    let w: Vec<f64> = match weights {
        None => cls
            .iter()
            .map(|&c| truth.iter().filter(|&&t| t as usize == c).count() as f64)
            .collect(),
        Some(ws) => cls.iter().map(|&c| ws[c]).collect(),
    };
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    cls.iter()
        .zip(&w)
        .map(|(&c, &wc)| wc / total * ious[c].unwrap_or(0.0))
        .sum()
}

pub fn macro_f1(pred: &[u8], truth: &[u8], k: usize) -> f64 {
    let cls = present(truth, k);
    if cls.is_empty() {
        return 0.0;
    }
    let f1s: Vec<f64> = cls
        .iter()
        .map(|&c| {
            let c = c as u8;
            let tp = pred.iter().zip(truth).filter(|(&p, &t)| p == c && t == c).count() as f64;
            let pp = pred.iter().filter(|&&p| p == c).count() as f64;
            let tt = truth.iter().filter(|&&t| t == c).count() as f64;
            let precision = if pp > 0.0 { tp / pp } else { 0.0 };
            let recall = tp / tt;
            if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            }
        })
        .collect();
    f1s.iter().sum::<f64>() / f1s.len() as f64
}

pub fn balanced_accuracy(pred: &[u8], truth: &[u8], k: usize) -> f64 {
    let cls = present(truth, k);
    if cls.is_empty() {
        return 0.0;
    }
    cls.iter()
        .map(|&c| {
            let c = c as u8;
            let tt = truth.iter().filter(|&&t| t == c).count() as f64;
            let tp = pred.iter().zip(truth).filter(|(&p, &t)| p == c && t == c).count() as f64;
            tp / tt
        })
        .sum::<f64>()
        / cls.len() as f64
}

/// Multiclass MCC as the Pearson correlation of the one-hot indicator
/// matrices of prediction and truth.
pub fn mcc(pred: &[u8], truth: &[u8], k: usize) -> f64 {
    let n = pred.len() as f64;
    let ind = |v: &[u8], i: usize, c: usize| f64::from(u8::from(v[i] as usize == c));
    let mean = |v: &[u8], c: usize| v.iter().filter(|&&x| x as usize == c).count() as f64 / n;
    let (mut cov_pt, mut cov_pp, mut cov_tt) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let (mp, mt) = (mean(pred, c), mean(truth, c));
        for i in 0..pred.len() {
            let (dp, dt) = (ind(pred, i, c) - mp, ind(truth, i, c) - mt);
            cov_pt += dp * dt;
            cov_pp += dp * dp;
            cov_tt += dt * dt;
        }
    }
    if cov_pp == 0.0 || cov_tt == 0.0 {
        0.0
    } else {
        cov_pt / (cov_pp * cov_tt).sqrt()
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
