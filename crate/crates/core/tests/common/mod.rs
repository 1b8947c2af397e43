#![allow(dead_code)]

use std::collections::HashMap;

use pdextract::protocols::ToyGenerator;

/// Probability that `blocks` independent draws from `dist` produce at least
/// `need` copies of `target`, by summing over every joint outcome.
pub fn enumerate_accept(dist: &[(u64, f64)], target: u64, blocks: usize, need: usize) -> f64 {
    let m = dist.len();
    let mut total = 0.0;
    let mut idx = vec![0usize; blocks];
    loop {
        let mut p = 1.0;
        let mut hits = 0;
        for &i in &idx {
            p *= dist[i].1;
            hits += usize::from(dist[i].0 == target);
        }
        if hits >= need {
            total += p;
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == blocks {
                return total;
            }
            idx[pos] += 1;
            if idx[pos] < m {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Best double-open probability of the committer who commits `c` in every
/// block and opens with one key per bit, found by enumerating the
/// receiver's joint outcomes for every candidate. Returns the value for
/// each receiver string `r` in `0..2^out_bits`.
pub fn brute_force_double_open(toy: &ToyGenerator, blocks: usize) -> Vec<f64> {
    let need = (2 * blocks).div_ceil(3);
    let keys = toy.keys() as u64;
    let mut open0: Vec<(u64, f64)> = Vec::new();
    let mut open1: HashMap<u64, f64> = HashMap::new();
    for k in 0..keys {
        for &(y, _) in toy.dist(k) {
            let p = enumerate_accept(toy.dist(k), y, blocks, need);
            open0.push((y, p));
            let e = open1.entry(y).or_insert(0.0);
            *e = e.max(p);
        }
    }
    (0..1u64 << toy.out_bits())
        .map(|r| {
            open0
                .iter()
                .map(|&(c, p0)| p0 * open1.get(&(c ^ r)).copied().unwrap_or(0.0))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// `Pr[Binomial(n, p) ≥ k]` by direct summation with exact binomial
/// coefficients.
pub fn binomial_tail(n: u64, p: f64, k: u64) -> f64 {
    let mut total = 0.0;
    let mut coef = 1.0f64;
    for j in 0..=n {
        if j > 0 {
            coef = coef * (n - j + 1) as f64 / j as f64;
        }
        if j >= k {
            total += coef * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
        }
    }
    total
}
