//! Oracles that share no code with the library's numerical paths.

#![allow(dead_code)]

/// Pascal's triangle up to `n`, exact in `u128`.
pub fn pascal(n: usize) -> Vec<Vec<u128>> {
    let mut rows: Vec<Vec<u128>> = vec![vec![1]];
    for i in 1..=n {
        let prev = &rows[i - 1];
        let mut row = vec![1u128; i + 1];
        for k in 1..i {
            row[k] = prev[k - 1] + prev[k];
        }
        rows.push(row);
    }
    rows
}

/// Exact two-sided Fisher p-values for every top-left cell `k` of the
/// tables with the given margins, minimum-likelihood rule with relative
/// tie tolerance 1e-7, evaluated in integer arithmetic.
///
/// Returns `(lo, p-values for k = lo..=hi)`.
pub fn fisher_by_enumeration(
    binom: &[Vec<u128>],
    row1: usize,
    row2: usize,
    col1: usize,
) -> (usize, Vec<f64>) {
    let n = row1 + row2;
    let lo = (row1 + col1).saturating_sub(n);
    let hi = row1.min(col1);
    // P(k) = C(col1, k) C(n - col1, row1 - k) / C(n, row1)
    let num: Vec<u128> = (lo..=hi)
        .map(|k| binom[col1][k] * binom[n - col1][row1 - k])
        .collect();
    let den = binom[n][row1];
    debug_assert_eq!(num.iter().sum::<u128>(), den);
    let scale = 10_000_000u128;
    let p = num
        .iter()
        .map(|&obs| {
            let s: u128 = num
                .iter()
                .filter(|&&x| x * scale <= obs * (scale + 1))
                .sum();
            s as f64 / den as f64
        })
        .collect();
    (lo, p)
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for j in 1..m {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + j as f64 * h);
    }
    s * h / 3.0
}

/// χ² density with four degrees of freedom.
pub fn chisq4_density(x: f64) -> f64 {
    x * (-x / 2.0).exp() / 4.0
}

/// 3 Monte Carlo standard errors of a frequency `f` over `n` replicates.
pub fn three_se(f: f64, n: u64) -> f64 {
    3.0 * (f * (1.0 - f) / n as f64).sqrt()
}
