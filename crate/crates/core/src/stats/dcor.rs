//! Distance correlation with a permutation p-value.
//!
//! The V-statistic `dCov²(X,Y) = S₁ + S₂ - 2S₃` is built from
//! `S₁ = n⁻² Σ a_ij b_ij`, `S₂ = n⁻⁴ Σ a_ij Σ b_ij` and
//! `S₃ = n⁻³ Σ_i a_i· b_i·`, where `a_ij = |x_i - x_j|`. Under a permutation
//! of `y` only `S₁` and `S₃` change, so each replicate costs one `S₁`.
//! For scalar samples `S₁` is computed in `O(n log n)` by sorting on `x` and
//! sweeping a Fenwick tree over the ranks of `y`.

use crate::rng::StreamRng;
use rand::seq::SliceRandom;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DcorTest {
    /// Sample distance correlation in `[0, 1]`.
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

fn centered(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - m).collect()
}

/// Row sums `Σ_j |v_i - v_j|` in `O(n log n)`.
fn abs_row_sums(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let total: f64 = v.iter().sum();
    let mut out = vec![0.0; n];
    let mut prefix = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        // k points at or below, n-k-1 above
        out[i] = v[i] * (2.0 * k as f64 - n as f64 + 1.0) + total - 2.0 * prefix - v[i];
        prefix += v[i];
    }
    out
}

/// `Σ_{i,j} (v_i - v_j)²`.
fn sum_sq_dist(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let s: f64 = v.iter().sum();
    let s2: f64 = v.iter().map(|x| x * x).sum();
    2.0 * n * s2 - 2.0 * s * s
}

/// Fenwick tree of `(count, Σy, Σx, Σxy)` indexed by y-rank.
struct Fenwick {
    t: Vec<[f64; 4]>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            t: vec![[0.0; 4]; n + 1],
        }
    }

    fn add(&mut self, mut i: usize, v: [f64; 4]) {
        i += 1;
        while i < self.t.len() {
            for (acc, x) in self.t[i].iter_mut().zip(v) {
                *acc += x;
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Sums over ranks `0..=i`.
    fn prefix(&self, i: usize) -> [f64; 4] {
        let mut i = i + 1;
        let mut s = [0.0; 4];
        while i > 0 {
            for (acc, x) in s.iter_mut().zip(self.t[i]) {
                *acc += x;
            }
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Scalar data prepared once for repeated `S₁` evaluations.
struct ScalarPrep {
    n: usize,
    x_sorted: Vec<f64>,
    order: Vec<usize>,
}

impl ScalarPrep {
    fn new(x: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        Self {
            n: x.len(),
            x_sorted: order.iter().map(|&i| x[i]).collect(),
            order,
        }
    }

    /// `Σ_{i,j} |x_i - x_j| |y_i - y_j|` for `y` given with its ranks.
    fn cross(&self, y: &[f64], rank: &[usize]) -> f64 {
        let mut tree = Fenwick::new(self.n);
        let mut total = [0.0f64; 4];
        let mut acc = 0.0;
        for (k, &i) in self.order.iter().enumerate() {
            let (xi, yi) = (self.x_sorted[k], y[i]);
            let below = tree.prefix(rank[i]);
            let above: [f64; 4] = std::array::from_fn(|c| total[c] - below[c]);
            // pairs with x_j <= x_i: (x_i - x_j)|y_i - y_j|, sign split on y
            let part = |s: &[f64]| xi * yi * s[0] - xi * s[1] - yi * s[2] + s[3];
            acc += part(&below) - part(&above);
            let v = [1.0, yi, xi, xi * yi];
            tree.add(rank[i], v);
            for c in 0..4 {
                total[c] += v[c];
            }
        }
        2.0 * acc
    }
}

fn ranks(y: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&i, &j| y[i].total_cmp(&y[j]).then(i.cmp(&j)));
    let mut r = vec![0; y.len()];
    for (k, &i) in idx.iter().enumerate() {
        r[i] = k;
    }
    r
}

fn dcov2(n: f64, cross: f64, row_a: &[f64], row_b: &[f64], sum_a: f64, sum_b: f64) -> f64 {
    let s3: f64 = row_a.iter().zip(row_b).map(|(a, b)| a * b).sum();
    cross / (n * n) + sum_a * sum_b / (n * n * n * n) - 2.0 * s3 / (n * n * n)
}

/// Distance correlation of two scalar samples of equal length.
pub fn dcor_scalar(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "samples must pair up");
    let (x, y) = (centered(x), centered(y));
    let n = x.len() as f64;
    let (ra, rb) = (abs_row_sums(&x), abs_row_sums(&y));
    let (sa, sb) = (ra.iter().sum::<f64>(), rb.iter().sum::<f64>());
    let prep = ScalarPrep::new(&x);
    let xy = dcov2(n, prep.cross(&y, &ranks(&y)), &ra, &rb, sa, sb);
    let xx = dcov2(n, sum_sq_dist(&x), &ra, &ra, sa, sa);
    let yy = dcov2(n, sum_sq_dist(&y), &rb, &rb, sb, sb);
    correlation(xy, xx, yy)
}

fn correlation(xy: f64, xx: f64, yy: f64) -> f64 {
    let den = (xx * yy).sqrt();
    if den > 0.0 {
        (xy.max(0.0) / den).sqrt()
    } else {
        0.0
    }
}

fn p_from_counts(exceed: usize, permutations: usize) -> f64 {
    (1 + exceed) as f64 / (1 + permutations) as f64
}

/// Permutation test of independence for scalar samples.
///
/// Each replicate permutes `y` against `x`; the p-value is
/// `(1 + #{replicates ≥ observed}) / (1 + permutations)`.
pub fn dcor_permutation_test(
    x: &[f64],
    y: &[f64],
    permutations: usize,
    rng: &mut StreamRng,
) -> DcorTest {
    assert_eq!(x.len(), y.len(), "samples must pair up");
    let (x, y) = (centered(x), centered(y));
    let n = x.len() as f64;
    let (ra, rb) = (abs_row_sums(&x), abs_row_sums(&y));
    let (sa, sb) = (ra.iter().sum::<f64>(), rb.iter().sum::<f64>());
    let prep = ScalarPrep::new(&x);
    let rank_y = ranks(&y);
    let observed = dcov2(n, prep.cross(&y, &rank_y), &ra, &rb, sa, sb);
    let xx = dcov2(n, sum_sq_dist(&x), &ra, &ra, sa, sa);
    let yy = dcov2(n, sum_sq_dist(&y), &rb, &rb, sb, sb);

    let mut perm: Vec<usize> = (0..x.len()).collect();
    let mut yp = vec![0.0; x.len()];
    let mut rp = vec![0usize; x.len()];
    let mut bp = vec![0.0; x.len()];
    let mut exceed = 0;
    for _ in 0..permutations {
        perm.shuffle(rng);
        for (i, &j) in perm.iter().enumerate() {
            yp[i] = y[j];
            rp[i] = rank_y[j];
            bp[i] = rb[j];
        }
        if dcov2(n, prep.cross(&yp, &rp), &ra, &bp, sa, sb) >= observed {
            exceed += 1;
        }
    }
    DcorTest {
        statistic: correlation(observed, xx, yy),
        p_value: p_from_counts(exceed, permutations),
        permutations,
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise distances of the `x` sample (strict upper triangle) with row
/// sums; the `y` side is recomputed on the fly from a contiguous permuted
/// copy so each replicate streams through memory once.
struct VectorPrep {
    n: usize,
    tri: Vec<f64>,
    row: Vec<f64>,
    sum: f64,
}

fn row_sums(v: &[Vec<f64>]) -> Vec<f64> {
    let n = v.len();
    let mut row = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclid(&v[i], &v[j]);
            row[i] += d;
            row[j] += d;
        }
    }
    row
}

impl VectorPrep {
    fn new(v: &[Vec<f64>]) -> Self {
        let n = v.len();
        let mut tri = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                tri.push(euclid(&v[i], &v[j]));
            }
        }
        let row = row_sums(v);
        let sum = row.iter().sum();
        Self { n, tri, row, sum }
    }

    /// `Σ_{i,j} a_ij |y_i - y_j|` with `y` flattened row-major, `dim` wide.
    fn cross(&self, flat_y: &[f64], dim: usize) -> f64 {
        let mut acc = 0.0;
        let mut k = 0;
        for i in 0..self.n {
            let yi = &flat_y[i * dim..(i + 1) * dim];
            for j in i + 1..self.n {
                acc += self.tri[k] * euclid(yi, &flat_y[j * dim..(j + 1) * dim]);
                k += 1;
            }
        }
        2.0 * acc
    }

    fn self_cross(&self) -> f64 {
        2.0 * self.tri.iter().map(|d| d * d).sum::<f64>()
    }
}

/// `Σ_{i,j} |v_i - v_j|²`.
fn sq_dist_sum(v: &[Vec<f64>]) -> f64 {
    let n = v.len() as f64;
    let dim = v.first().map_or(0, Vec::len);
    (0..dim)
        .map(|c| {
            let col: Vec<f64> = v.iter().map(|r| r[c]).collect();
            let (s, s2) = (
                col.iter().sum::<f64>(),
                col.iter().map(|x| x * x).sum::<f64>(),
            );
            2.0 * n * s2 - 2.0 * s * s
        })
        .sum()
}

/// Permutation test of independence for vector-valued samples
/// (Euclidean distances).
pub fn dcor_vectors_permutation_test(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    permutations: usize,
    rng: &mut StreamRng,
) -> DcorTest {
    assert_eq!(x.len(), y.len(), "samples must pair up");
    let n = x.len() as f64;
    let dim = y.first().map_or(0, Vec::len);
    let a = VectorPrep::new(x);
    let rb = row_sums(y);
    let sb: f64 = rb.iter().sum();
    let flatten = |perm: &[usize], out: &mut Vec<f64>| {
        out.clear();
        for &j in perm {
            out.extend_from_slice(&y[j]);
        }
    };
    let mut perm: Vec<usize> = (0..x.len()).collect();
    let mut flat = Vec::with_capacity(x.len() * dim);
    flatten(&perm, &mut flat);
    let observed = dcov2(n, a.cross(&flat, dim), &a.row, &rb, a.sum, sb);
    let xx = dcov2(n, a.self_cross(), &a.row, &a.row, a.sum, a.sum);
    let yy = dcov2(n, sq_dist_sum(y), &rb, &rb, sb, sb);
    let mut bp = vec![0.0; x.len()];
    let mut exceed = 0;
    for _ in 0..permutations {
        perm.shuffle(rng);
        flatten(&perm, &mut flat);
        for (i, &j) in perm.iter().enumerate() {
            bp[i] = rb[j];
        }
        if dcov2(n, a.cross(&flat, dim), &a.row, &bp, a.sum, sb) >= observed {
            exceed += 1;
        }
    }
    DcorTest {
        statistic: correlation(observed, xx, yy),
        p_value: p_from_counts(exceed, permutations),
        permutations,
    }
}
