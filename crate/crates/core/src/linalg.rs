//! Small dense-vector kernel used everywhere else.
//!
//! All reductions run left to right over ascending indices. That fixed order
//! is what makes repeated runs bit-identical, so no routine here may be
//! replaced by a parallel or reassociated reduction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dot product in ascending index order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Euclidean norm, `sqrt(dot(v, v))`.
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `n` evenly spaced values on `[a, b]`. The first value is exactly `a` and
/// the last is `a + (b - a)`, computed as `a + (b - a) * i / (n - 1)`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let span = b - a;
    let denom = (n - 1) as f64;
    (0..n).map(|i| a + span * (i as f64 / denom)).collect()
}

/// Odd-count grid on `[-extent, extent]` that is exactly symmetric under
/// negation: index `i` maps to `extent * (2i - (n-1)) / (n-1)`, so the middle
/// entry is exactly `0.0` and `x[i] == -x[n-1-i]` bit for bit.
pub fn symmetric_linspace(extent: f64, n: usize) -> Vec<f64> {
    assert!(n >= 3 && n % 2 == 1, "symmetric grid needs odd n >= 3");
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| extent * ((2 * i) as f64 - denom) / denom)
        .collect()
}

/// Orthogonal projection of `x - start` onto the chord direction `d`.
///
/// Returns `(c, beta, residual)` where `c = (x - start)·d / (d·d)` is the
/// normalised position along the chord, `beta` is the Euclidean norm of the
/// off-chord residual `x - start - c d`, and `residual` is that vector.
///
/// `d_dot_d` must be `dot(d, d)` computed by the caller once. Because the
/// numerator uses the same summation order, `x == start + d` gives `c == 1.0`
/// and `beta == 0.0` exactly, and `x == start` gives `c == 0.0`, `beta == 0.0`
/// exactly. In one dimension the residual is identically zero, which the
/// implementation honours exactly rather than leaving rounding noise.
pub fn project_onto_chord(
    x: &[f64],
    start: &[f64],
    d: &[f64],
    d_dot_d: f64,
) -> (f64, f64, Vec<f64>) {
    debug_assert_eq!(x.len(), start.len());
    debug_assert_eq!(x.len(), d.len());
    let n = x.len();
    let mut num = 0.0;
    for i in 0..n {
        num += (x[i] - start[i]) * d[i];
    }
    let c = num / d_dot_d;
    if n == 1 {
        return (c, 0.0, vec![0.0]);
    }
    let mut residual = vec![0.0; n];
    let mut sq = 0.0;
    for i in 0..n {
        let r = (x[i] - start[i]) - c * d[i];
        residual[i] = r;
        sq += r * r;
    }
    (c, sq.sqrt(), residual)
}

/// ChaCha stream keyed by `(seed, stream)`. Distinct streams from one seed
/// are independent; the pair is written into the first 16 key bytes.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Standard normal draw via Box-Muller on two uniform draws.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // u in (0, 1]: guard the log; v in [0, 1).
    let mut u: f64 = rng.gen();
    if u == 0.0 {
        u = f64::MIN_POSITIVE;
    }
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Vector of standard normal draws.
pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| standard_normal(rng)).collect()
}

/// In-place Fisher-Yates shuffle of `0..n`.
pub fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
