//! Stratified attribute designs with near-zero sample correlation.

use rand::seq::SliceRandom;
use rand::Rng;

/// `columns` Latin-hypercube columns of `n` values in `[0, 1)`, then
/// improved by accepting pairwise swaps that lower the summed squared
/// cross-column covariance. Swaps keep every column's marginal intact.
pub fn stratified_design(n: usize, columns: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = (0..columns)
        .map(|_| {
            let mut v: Vec<f64> = (0..n).map(|i| (i as f64 + rng.random::<f64>()) / n as f64).collect();
            v.shuffle(rng);
            v
        })
        .collect();
    if n < 3 || columns < 2 {
        return cols;
    }
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    // cross[a][b] = centred cross-product of columns a and b
    let mut cross = vec![vec![0.0; columns]; columns];
    for a in 0..columns {
        for b in 0..columns {
            cross[a][b] = (0..n).map(|i| (cols[a][i] - means[a]) * (cols[b][i] - means[b])).sum();
        }
    }
    for _ in 0..200 * n {
        let c = rng.random_range(0..columns);
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i == j {
            continue;
        }
        let dx = cols[c][j] - cols[c][i];
        let mut gain = 0.0;
        for b in (0..columns).filter(|&b| b != c) {
            let delta = dx * (cols[b][i] - cols[b][j]);
            gain += (cross[c][b] + delta).powi(2) - cross[c][b].powi(2);
        }
        if gain < 0.0 {
            for b in (0..columns).filter(|&b| b != c) {
                let delta = dx * (cols[b][i] - cols[b][j]);
                cross[c][b] += delta;
                cross[b][c] += delta;
            }
            cols[c].swap(i, j);
        }
    }
    cols
}
