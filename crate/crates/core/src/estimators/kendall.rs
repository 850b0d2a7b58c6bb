use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampling::SampleMatrix;

/// Sample Kendall rank correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KendallMatrix {
    pub matrix: DMatrix<f64>,
    pub n: usize,
}

fn check_n(x: &SampleMatrix) -> Result<usize> {
    let n = x.n();
    if n < 2 {
        return Err(Error::Argument(format!("Kendall matrix needs n >= 2, got {n}")));
    }
    Ok(n)
}

/// Both kernels reduce to an integer score S = Σ_{i<j} sign·sign per entry and
/// share this scaling, which is what makes them agree bit for bit.
fn scale(score: i64, n: usize) -> f64 {
    2.0 * score as f64 / (n * (n - 1)) as f64
}

/// Brute-force accumulation of `A_ij A_ijᵀ` over all pairs. O(n² p²).
pub fn kendall_matrix_naive(x: &SampleMatrix) -> Result<KendallMatrix> {
    let n = check_n(x)?;
    let p = x.p();
    let mut acc = vec![0i64; p * p];
    let mut a = vec![0i64; p];
    for i in 0..n {
        for j in i + 1..n {
            for (k, ak) in a.iter_mut().enumerate() {
                *ak = sign(x.data[(i, k)] - x.data[(j, k)]);
            }
            for k in 0..p {
                if a[k] == 0 {
                    continue;
                }
                for l in 0..p {
                    acc[k * p + l] += a[k] * a[l];
                }
            }
        }
    }
    Ok(KendallMatrix {
        matrix: DMatrix::from_fn(p, p, |k, l| scale(acc[k * p + l], n)),
        n,
    })
}

fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// One column in rank form: dense integer ranks plus the row order that sorts
/// the column, and tie bookkeeping.
struct RankedColumn {
    ranks: Vec<u32>,
    order: Vec<u32>,
    /// Σ t(t−1)/2 over tie groups.
    tied_pairs: i64,
    /// `[start, end)` ranges in `order` of tie groups of size > 1.
    tie_groups: Vec<(usize, usize)>,
}

impl RankedColumn {
    fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&a, &b| values[a as usize].total_cmp(&values[b as usize]));
        let mut ranks = vec![0u32; n];
        let mut tie_groups = Vec::new();
        let mut tied_pairs = 0i64;
        let mut rank = 0u32;
        let mut i = 0;
        while i < n {
            let mut j = i + 1;
            // -0.0 == 0.0 here, matching sign(x - y) = 0
            while j < n && values[order[j] as usize] == values[order[i] as usize] {
                j += 1;
            }
            for &o in &order[i..j] {
                ranks[o as usize] = rank;
            }
            let t = (j - i) as i64;
            if t > 1 {
                tie_groups.push((i, j));
                tied_pairs += t * (t - 1) / 2;
            }
            rank += 1;
            i = j;
        }
        Self {
            ranks,
            order,
            tied_pairs,
            tie_groups,
        }
    }
}

/// Counts pairs i < j with `v[i] > v[j]`, sorting `v` in place.
fn count_inversions(v: &mut [u32], scratch: &mut [u32]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    // bottom-up merge sort; insertion sort on short runs first
    const RUN: usize = 16;
    let mut inversions = 0i64;
    for chunk in v.chunks_mut(RUN) {
        for i in 1..chunk.len() {
            let x = chunk[i];
            let mut j = i;
            while j > 0 && chunk[j - 1] > x {
                chunk[j] = chunk[j - 1];
                j -= 1;
            }
            inversions += (i - j) as i64;
            chunk[j] = x;
        }
    }
    let mut width = RUN;
    let scratch = &mut scratch[..n];
    let mut in_v = true;
    while width < n {
        {
            let (src, dst): (&[u32], &mut [u32]) = if in_v {
                (&*v, &mut *scratch)
            } else {
                (&*scratch, &mut *v)
            };
            let mut start = 0;
            while start < n {
                let mid = (start + width).min(n);
                let end = (start + 2 * width).min(n);
                let (mut i, mut j, mut k) = (start, mid, start);
                while i < mid && j < end {
                    if src[j] < src[i] {
                        dst[k] = src[j];
                        inversions += (mid - i) as i64;
                        j += 1;
                    } else {
                        dst[k] = src[i];
                        i += 1;
                    }
                    k += 1;
                }
                dst[k..k + (mid - i)].copy_from_slice(&src[i..mid]);
                k += mid - i;
                dst[k..k + (end - j)].copy_from_slice(&src[j..end]);
                start = end;
            }
        }
        in_v = !in_v;
        width *= 2;
    }
    if !in_v {
        v.copy_from_slice(scratch);
    }
    inversions
}

/// Kendall score S = #concordant − #discordant for columns `a` and `b`
/// (Knight's algorithm): sort by `a` (ties broken by `b`), then count
/// inversions of `b`.
fn pair_score(a: &RankedColumn, b: &RankedColumn, seq: &mut Vec<u32>, scratch: &mut [u32]) -> i64 {
    let n = a.ranks.len() as i64;
    seq.clear();
    seq.extend(a.order.iter().map(|&o| b.ranks[o as usize]));
    let mut joint_ties = 0i64;
    for &(s, e) in &a.tie_groups {
        let group = &mut seq[s..e];
        group.sort_unstable();
        let mut i = 0;
        while i < group.len() {
            let mut j = i + 1;
            while j < group.len() && group[j] == group[i] {
                j += 1;
            }
            let t = (j - i) as i64;
            joint_ties += t * (t - 1) / 2;
            i = j;
        }
    }
    let discordant = count_inversions(seq, scratch);
    n * (n - 1) / 2 - a.tied_pairs - b.tied_pairs + joint_ties - 2 * discordant
}

/// Kendall matrix in O(p² n log n) via merge-sort inversion counting.
pub fn kendall_matrix_fast(x: &SampleMatrix) -> Result<KendallMatrix> {
    let n = check_n(x)?;
    let p = x.p();
    let columns: Vec<RankedColumn> = (0..p)
        .into_par_iter()
        .map(|k| RankedColumn::new(x.data.column(k).as_slice()))
        .collect();
    let rows: Vec<Vec<i64>> = (0..p)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(n), vec![0u32; n]),
            |(seq, scratch), k| {
                (k..p)
                    .map(|l| pair_score(&columns[k], &columns[l], seq, scratch))
                    .collect()
            },
        )
        .collect();
    let mut m = DMatrix::zeros(p, p);
    for (k, row) in rows.iter().enumerate() {
        for (off, &s) in row.iter().enumerate() {
            let v = scale(s, n);
            m[(k, k + off)] = v;
            m[(k + off, k)] = v;
        }
    }
    Ok(KendallMatrix { matrix: m, n })
}
