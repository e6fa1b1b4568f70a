//! Deterministic compensated summation.
//!
//! Input is cut into fixed chunks of [`CHUNK`] terms. Each chunk is summed
//! sequentially with Neumaier compensation, then chunk totals are combined
//! by a fixed pairwise tree. The association order depends only on the
//! input length, so results are bit-identical for any rayon pool size.

use rayon::prelude::*;

pub const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn pairwise(parts: &[f64]) -> f64 {
    match parts.len() {
        0 => 0.0,
        1 => parts[0],
        n => {
            let mid = n / 2;
            let mut acc = Neumaier::default();
            acc.add(pairwise(&parts[..mid]));
            acc.add(pairwise(&parts[mid..]));
            acc.value()
        }
    }
}

/// Compensated sum of a slice.
pub fn sum(xs: &[f64]) -> f64 {
    sum_map(xs.len(), |i| xs[i])
}

/// Compensated sum of `f(0) + ... + f(n-1)` without materialising the terms.
pub fn sum_map<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Neumaier::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                acc.add(f(i));
            }
            acc.value()
        })
        .collect();
    pairwise(&parts)
}

/// Sequential compensated sum for short inner loops.
pub fn sum_iter<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = Neumaier::default();
    for x in it {
        acc.add(x);
    }
    acc.value()
}
