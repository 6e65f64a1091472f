//! Shared test helpers: an exact-arithmetic least-squares oracle.
//!
//! Every f64 is a dyadic rational, so the normal equations of a design whose
//! entries are exact powers of f64 inputs can be formed and solved without
//! rounding. The only rounding happens in the final conversion to f64.

#![allow(dead_code)]

pub mod cases;

use num::{BigInt, BigRational, Integer, One, Signed, ToPrimitive, Zero};

pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

/// `x^k` exactly.
pub fn exact_pow(x: &BigRational, k: usize) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..k {
        out *= x;
    }
    out
}

/// Least-squares solution of `A x = B[:, c]` for every column of `B`, via
/// the exact normal equations `AᵀA x = Aᵀb`.
///
/// `design` is row-major (`rows × unknowns`), `rhs` is `rows × ncols`.
pub fn lstsq(design: &[Vec<BigRational>], rhs: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let n = design[0].len();
    let ncols = rhs[0].len();
    let mut gram = vec![vec![BigRational::zero(); n]; n];
    let mut atb = vec![vec![BigRational::zero(); ncols]; n];
    for (row, b) in design.iter().zip(rhs) {
        for i in 0..n {
            if row[i].is_zero() {
                continue;
            }
            for j in i..n {
                gram[i][j] += &row[i] * &row[j];
            }
            for c in 0..ncols {
                atb[i][c] += &row[i] * &b[c];
            }
        }
    }
    for i in 1..n {
        let (upper, lower) = gram.split_at_mut(i);
        for (j, row) in upper.iter().enumerate() {
            lower[0][j] = row[i].clone();
        }
    }
    solve(gram, atb)
}

/// Fraction-free (Bareiss) elimination on the integer-scaled augmented
/// system, then rational back substitution. Returns `n × ncols`.
fn solve(gram: Vec<Vec<BigRational>>, rhs: Vec<Vec<BigRational>>) -> Vec<Vec<BigRational>> {
    let n = gram.len();
    let ncols = rhs[0].len();
    // scale each row by the lcm of its denominators; solutions are unchanged
    let mut m: Vec<Vec<BigInt>> = gram
        .into_iter()
        .zip(rhs)
        .map(|(g, r)| {
            let row: Vec<BigRational> = g.into_iter().chain(r).collect();
            let lcm = row.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
            row.iter()
                .map(|v| (v * BigRational::from_integer(lcm.clone())).to_integer())
                .collect()
        })
        .collect();
    let width = n + ncols;
    let mut prev = BigInt::one();
    for k in 0..n {
        let pivot = (k..n)
            .find(|&r| !m[r][k].is_zero())
            .expect("oracle system is singular");
        m.swap(k, pivot);
        for i in k + 1..n {
            for j in k + 1..width {
                let v = (&m[k][k] * &m[i][j] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let mut x = vec![vec![BigRational::zero(); ncols]; n];
    for c in 0..ncols {
        for i in (0..n).rev() {
            let mut acc = BigRational::from_integer(m[i][n + c].clone());
            for j in i + 1..n {
                acc -= BigRational::from_integer(m[i][j].clone()) * &x[j][c];
            }
            x[i][c] = acc / BigRational::from_integer(m[i][i].clone());
        }
    }
    x
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("representable")
}

/// Norm-wise relative difference `max|a − b| / max|b|`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Polynomial least squares `y ≈ Σ c_k x^k` for several series at once.
/// Returns `(degree + 1) × ncols` as f64.
pub fn polyfit(xs: &[f64], ys: &[Vec<f64>], degree: usize) -> Vec<Vec<f64>> {
    let design: Vec<Vec<BigRational>> = xs
        .iter()
        .map(|&x| {
            let x = exact(x);
            (0..=degree).map(|k| exact_pow(&x, k)).collect()
        })
        .collect();
    let rhs: Vec<Vec<BigRational>> = ys.iter().map(|r| r.iter().map(|&v| exact(v)).collect()).collect();
    lstsq(&design, &rhs)
        .iter()
        .map(|r| r.iter().map(to_f64).collect())
        .collect()
}

/// Exact polynomial fit kept in rationals, for chaining stages.
pub fn polyfit_exact(xs: &[BigRational], ys: &[Vec<BigRational>], degree: usize) -> Vec<Vec<BigRational>> {
    let design: Vec<Vec<BigRational>> = xs
        .iter()
        .map(|x| (0..=degree).map(|k| exact_pow(x, k)).collect())
        .collect();
    lstsq(&design, ys)
}

pub fn is_small(x: &BigRational, tol: f64) -> bool {
    to_f64(&x.abs()) < tol
}

/// Deterministic xorshift stream for test data; independent of the crate's
/// own RNG plumbing.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }
}
