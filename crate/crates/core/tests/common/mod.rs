#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnkf::tt::{Core, TtMatrix, TtVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random TT-vector with the given interior ranks.
pub fn random_tt(rng: &mut ChaCha8Rng, dims: &[usize], interior: &[usize]) -> TtVector {
    let ranks = full_ranks(interior);
    let cores = dims
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let (l, r) = (ranks[k], ranks[k + 1]);
            Core::new(l, n, r, random_vec(rng, l * n * r)).unwrap()
        })
        .collect();
    TtVector::from_cores(cores).unwrap()
}

pub fn random_tt_matrix(rng: &mut ChaCha8Rng, rows: &[usize], cols: &[usize], interior: &[usize]) -> TtMatrix {
    let ranks = full_ranks(interior);
    let cores = rows
        .iter()
        .zip(cols)
        .enumerate()
        .map(|(k, (&m, &n))| {
            let (l, r) = (ranks[k], ranks[k + 1]);
            Core::new(l, m * n, r, random_vec(rng, l * m * n * r)).unwrap()
        })
        .collect();
    TtMatrix::from_cores(rows.to_vec(), cols.to_vec(), cores).unwrap()
}

fn full_ranks(interior: &[usize]) -> Vec<usize> {
    let mut r = vec![1];
    r.extend_from_slice(interior);
    r.push(1);
    r
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn rel_err(approx: &[f64], exact: &[f64]) -> f64 {
    diff_norm(approx, exact) / norm(exact).max(f64::MIN_POSITIVE)
}

/// Row-major dense product of an `m×k` and a `k×n` matrix.
pub fn dense_mul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for l in 0..k {
            let x = a[i * k + l];
            for j in 0..n {
                c[i * n + j] += x * b[l * n + j];
            }
        }
    }
    c
}

/// Checks boundary ranks of one and consistent adjacent ranks.
pub fn assert_structure(cores: &[Core]) {
    assert_eq!(cores.first().unwrap().left(), 1);
    assert_eq!(cores.last().unwrap().right(), 1);
    for w in cores.windows(2) {
        assert_eq!(w[0].right(), w[1].left());
    }
    for c in cores {
        assert_eq!(c.data().len(), c.left() * c.mode() * c.right());
    }
}
