//! Dataset representation, reproducible sample splitting and the synthetic
//! benchmark generator.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::format;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::fmath;

/// Learning task for a dataset: quadratic contrast on real responses, or
/// 0/1 misclassification on binary ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Regression,
    Classification,
}

/// Data-splitting scheme. M1 grows on the first part, prunes on the second
/// and runs the final selection on the third; M2 grows and prunes on the
/// same part, keeping only a final-selection part aside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    M1,
    M2,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("dataset must have at least one row and one variable (n={n}, p={p})")]
    EmptyDataset { n: usize, p: usize },
    #[error("x has {got} entries, expected n*p = {expected}")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("{what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("response not in {{0,1}} at row {row}: {value}")]
    ResponseNotBinary { row: usize, value: f64 },
    #[error("invalid split fractions ({f1}, {f2}, {f3}): {reason}")]
    BadFractions {
        f1: f64,
        f2: f64,
        f3: f64,
        reason: String,
    },
    #[error("split produces an empty mandatory part (n1={n1}, n2={n2}, n3={n3})")]
    EmptySplitPart { n1: usize, n2: usize, n3: usize },
    #[error("generator needs n >= 1")]
    EmptyGenerator,
}

/// A fully in-memory dataset: `n` rows of `p` numeric-coded explanatory
/// variables plus a response. All variables are treated as ordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<f64>,
    n: usize,
    p: usize,
    y: Vec<f64>,
    names: Vec<String>,
    framework: Framework,
}

impl Dataset {
    /// Builds a dataset from a row-major matrix.
    ///
    /// Rejects empty data, shape mismatches, non-finite entries and, for
    /// classification, responses outside {0,1}.
    pub fn new(
        x: Vec<f64>,
        n: usize,
        p: usize,
        y: Vec<f64>,
        names: Vec<String>,
        framework: Framework,
    ) -> Result<Self, DataError> {
        if n == 0 || p == 0 {
            return Err(DataError::EmptyDataset { n, p });
        }
        if x.len() != n * p {
            return Err(DataError::ShapeMismatch {
                got: x.len(),
                expected: n * p,
            });
        }
        if y.len() != n {
            return Err(DataError::LengthMismatch {
                what: "y",
                got: y.len(),
                expected: n,
            });
        }
        if names.len() != p {
            return Err(DataError::LengthMismatch {
                what: "names",
                got: names.len(),
                expected: p,
            });
        }
        for (i, v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row: i / p,
                    col: i % p,
                });
            }
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFinite { row: i, col: p });
            }
            if framework == Framework::Classification && v != 0.0 && v != 1.0 {
                return Err(DataError::ResponseNotBinary { row: i, value: v });
            }
        }
        Ok(Dataset {
            x,
            n,
            p,
            y,
            names,
            framework,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn framework(&self) -> Framework {
        self.framework
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn x(&self, row: usize, col: usize) -> f64 {
        self.x[row * self.p + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.x[row * self.p..(row + 1) * self.p]
    }

    #[inline]
    pub fn y(&self, row: usize) -> f64 {
        self.y[row]
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    /// Replaces one column; used by the permutation-based forward test.
    pub(crate) fn with_column(&self, col: usize, values: &[f64]) -> Dataset {
        let mut out = self.clone();
        for (i, &v) in values.iter().enumerate() {
            out.x[i * self.p + col] = v;
        }
        out
    }
}

/// Disjoint index sets carving a dataset into growing, pruning and final
/// selection parts. Under M2 the pruning part is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSplit {
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
    pub i3: Vec<usize>,
    pub method: Method,
}

impl SampleSplit {
    pub fn n1(&self) -> usize {
        self.i1.len()
    }

    pub fn n2(&self) -> usize {
        self.i2.len()
    }

    pub fn n3(&self) -> usize {
        self.i3.len()
    }

    /// Rows the pruning/selection contrast is computed on: the second part
    /// under M1, the growing part itself under M2.
    pub fn pruning_rows(&self) -> &[usize] {
        match self.method {
            Method::M1 => &self.i2,
            Method::M2 => &self.i1,
        }
    }

    /// Effective sample size `n_eff` appearing in the penalties.
    pub fn n_eff(&self) -> usize {
        self.pruning_rows().len()
    }
}

fn rounded(f: f64, n: usize) -> usize {
    fmath::floor(f * n as f64 + 0.5) as usize
}

/// Splits `{0..n-1}` into three disjoint parts of sizes `round(f_k * n)`
/// (the third part takes the remainder when the fractions sum to one),
/// drawn as a seeded uniform permutation cut by sizes. Each part is
/// returned in ascending row order.
pub fn split_three(
    ds: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
    method: Method,
) -> Result<SampleSplit, DataError> {
    let (f1, f2, f3) = fractions;
    let bad = |reason: String| DataError::BadFractions { f1, f2, f3, reason };
    for f in [f1, f2, f3] {
        if !f.is_finite() || f < 0.0 {
            return Err(bad(format!("fraction {f} is negative or non-finite")));
        }
    }
    if f1 <= 0.0 {
        return Err(bad("f1 must be positive".into()));
    }
    if f3 <= 0.0 {
        return Err(bad("f3 must be positive".into()));
    }
    let sum = f1 + f2 + f3;
    if sum > 1.0 + 1e-12 {
        return Err(bad(format!("fractions sum to {sum} > 1")));
    }
    match method {
        Method::M1 if f2 <= 0.0 => {
            return Err(bad("method M1 needs f2 > 0".into()));
        }
        Method::M2 if f2 != 0.0 => {
            return Err(bad("method M2 needs f2 = 0".into()));
        }
        _ => {}
    }

    let n = ds.n();
    let n1 = rounded(f1, n);
    let n2 = rounded(f2, n);
    let n3 = if (sum - 1.0).abs() <= 1e-12 {
        (n as isize - n1 as isize - n2 as isize).max(0) as usize
    } else {
        rounded(f3, n)
    };
    let mandatory_ok = n1 >= 1 && n3 >= 1 && (method == Method::M2 || n2 >= 1);
    if !mandatory_ok || n1 + n2 + n3 > n {
        return Err(DataError::EmptySplitPart { n1, n2, n3 });
    }

    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);

    let take = |len: usize, start: usize| {
        let mut part: Vec<usize> = perm[start..start + len].to_vec();
        part.sort_unstable();
        part
    };
    let i1 = take(n1, 0);
    let i2 = take(n2, n1);
    let i3 = take(n3, n1 + n2);
    Ok(SampleSplit { i1, i2, i3, method })
}

/// Number of explanatory variables in the simulated benchmark.
pub const BREIMAN_P: usize = 10;

/// Noise level of the simulated benchmark: standard deviation sqrt(2),
/// i.e. variance 2.
pub const BREIMAN_NOISE_SD: f64 = core::f64::consts::SQRT_2;

/// The noiseless response surface of the simulated benchmark: two additive
/// regimes switched by the sign of the first variable.
pub fn breiman_signal(row: &[f64]) -> f64 {
    if row[0] > 0.0 {
        3.0 + 3.0 * row[1] + 2.0 * row[2] + row[3]
    } else {
        -3.0 + 3.0 * row[4] + 2.0 * row[5] + row[6]
    }
}

/// Generates the classic ten-variable simulated regression benchmark:
/// `X^1` uniform on {-1,1}, `X^2..X^10` uniform on {-1,0,1}, and
/// `y = signal + eps` with centered Gaussian noise of standard deviation
/// `noise_sd`. Fully determined by `seed`.
pub fn gen_breiman(n: usize, seed: u64, noise_sd: f64) -> Result<Dataset, DataError> {
    gen_breiman_extended(n, seed, noise_sd, BREIMAN_P)
}

/// Same generator with `p >= 10` variables; columns beyond the tenth are
/// extra observable noise, uniform on {-1,0,1} like `X^8..X^10`.
pub fn gen_breiman_extended(
    n: usize,
    seed: u64,
    noise_sd: f64,
    p: usize,
) -> Result<Dataset, DataError> {
    if n == 0 {
        return Err(DataError::EmptyGenerator);
    }
    assert!(p >= BREIMAN_P, "the benchmark defines at least 10 variables");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let start = x.len();
        x.push(if rng.random_range(0..2u32) == 0 { -1.0 } else { 1.0 });
        for _ in 1..p {
            x.push(rng.random_range(0..3u32) as f64 - 1.0);
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        y.push(breiman_signal(&x[start..]) + noise_sd * eps);
    }
    let names = (1..=p).map(|j| format!("X{j}")).collect();
    Dataset::new(x, n, p, y, names, Framework::Regression)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let x: Vec<f64> = (0..n * 2).map(|v| v as f64).collect();
        let y: Vec<f64> = (0..n).map(|v| v as f64).collect();
        Dataset::new(x, n, 2, y, vec!["a".into(), "b".into()], Framework::Regression).unwrap()
    }

    #[test]
    fn classification_rejects_nonbinary_response() {
        let err = Dataset::new(
            vec![0.0, 1.0, 2.0],
            3,
            1,
            vec![0.0, 1.0, 2.0],
            vec!["a".into()],
            Framework::Classification,
        )
        .unwrap_err();
        assert!(matches!(err, DataError::ResponseNotBinary { row: 2, .. }));
    }

    #[test]
    fn rejects_non_finite_cells() {
        let err = Dataset::new(
            vec![0.0, f64::NAN],
            2,
            1,
            vec![0.0, 1.0],
            vec!["a".into()],
            Framework::Regression,
        )
        .unwrap_err();
        assert_eq!(err, DataError::NonFinite { row: 1, col: 0 });
    }

    #[test]
    fn split_sizes_follow_rounding_rule() {
        let ds = toy(100);
        let s = split_three(&ds, (0.5, 0.25, 0.25), 7, Method::M1).unwrap();
        assert_eq!((s.n1(), s.n2(), s.n3()), (50, 25, 25));
        let s = split_three(&ds, (0.75, 0.0, 0.25), 7, Method::M2).unwrap();
        assert_eq!((s.n1(), s.n2(), s.n3()), (75, 0, 25));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let ds = toy(101);
        let a = split_three(&ds, (0.5, 0.25, 0.25), 9, Method::M1).unwrap();
        let b = split_three(&ds, (0.5, 0.25, 0.25), 9, Method::M1).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.i1.iter().chain(&a.i2).chain(&a.i3).copied().collect();
        let len = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), len, "parts overlap");
        assert!(all.iter().all(|&i| i < 101));
    }

    #[test]
    fn split_rounding_and_disjointness_hold_across_sizes() {
        for n in [3usize, 4, 7, 10, 33, 100, 999, 10_000] {
            let ds = toy(n);
            for fr in [(0.5, 0.25, 0.25), (0.4, 0.2, 0.4), (0.6, 0.2, 0.1)] {
                let Ok(s) = split_three(&ds, fr, 3, Method::M1) else {
                    continue;
                };
                assert_eq!(s.n1(), rounded(fr.0, n));
                assert_eq!(s.n2(), rounded(fr.1, n));
                let sum = fr.0 + fr.1 + fr.2;
                if (sum - 1.0).abs() <= 1e-12 {
                    assert_eq!(s.n1() + s.n2() + s.n3(), n);
                }
                let mut all: Vec<usize> =
                    s.i1.iter().chain(&s.i2).chain(&s.i3).copied().collect();
                let len = all.len();
                all.sort_unstable();
                all.dedup();
                assert_eq!(all.len(), len);
            }
        }
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let ds = toy(100);
        assert!(split_three(&ds, (0.0, 0.5, 0.5), 1, Method::M1).is_err());
        assert!(split_three(&ds, (0.5, 0.0, 0.5), 1, Method::M1).is_err());
        assert!(split_three(&ds, (0.5, 0.25, 0.25), 1, Method::M2).is_err());
        assert!(split_three(&ds, (0.6, 0.3, 0.3), 1, Method::M1).is_err());
        // Empty mandatory part after rounding.
        let tiny = toy(3);
        assert!(split_three(&tiny, (0.5, 0.25, 0.25), 1, Method::M1).is_err());
    }

    #[test]
    fn generator_value_ranges() {
        let ds = gen_breiman(1000, 1, BREIMAN_NOISE_SD).unwrap();
        assert_eq!(ds.p(), 10);
        assert_eq!(ds.framework(), Framework::Regression);
        for i in 0..ds.n() {
            let x1 = ds.x(i, 0);
            assert!(x1 == -1.0 || x1 == 1.0);
            for j in 1..10 {
                let v = ds.x(i, j);
                assert!(v == -1.0 || v == 0.0 || v == 1.0);
            }
        }
    }

    #[test]
    fn generator_noise_moments() {
        let n = 100_000;
        let ds = gen_breiman(n, 2, BREIMAN_NOISE_SD).unwrap();
        let resid: Vec<f64> = (0..n)
            .map(|i| ds.y(i) - breiman_signal(ds.row(i)))
            .collect();
        let mean = resid.iter().sum::<f64>() / n as f64;
        let var = resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 0.02, "noise mean {mean}");
        assert!((var - 2.0).abs() <= 0.05, "noise variance {var}");
    }

    #[test]
    fn generator_conditional_mean() {
        let ds = gen_breiman(100_000, 3, BREIMAN_NOISE_SD).unwrap();
        let rows: Vec<usize> = (0..ds.n())
            .filter(|&i| {
                ds.x(i, 0) == 1.0 && ds.x(i, 1) == 0.0 && ds.x(i, 2) == 0.0 && ds.x(i, 3) == 0.0
            })
            .collect();
        let m = rows.len();
        assert!(m > 100);
        let mean = rows.iter().map(|&i| ds.y(i)).sum::<f64>() / m as f64;
        let tol = 4.0 * (2.0 / m as f64).sqrt();
        assert!((mean - 3.0).abs() <= tol, "conditional mean {mean}, tol {tol}");
    }

    #[test]
    fn generator_is_deterministic() {
        let a = gen_breiman(50, 11, BREIMAN_NOISE_SD).unwrap();
        let b = gen_breiman(50, 11, BREIMAN_NOISE_SD).unwrap();
        assert_eq!(a, b);
    }
}
