#![allow(dead_code)]

use lieflow::{factor_tri_orth, SquareMatrix, StructureConstants};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> SquareMatrix {
    let data = (0..n * n).map(|_| rng.gen_range(-amp..amp)).collect();
    SquareMatrix::new(n, data).unwrap()
}

/// Arbitrary antisymmetric constants; the Jacobi identity generally fails.
pub fn random_constants(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> StructureConstants {
    let mut c = StructureConstants::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in i + 1..n {
                c.set(k, i, j, rng.gen_range(-amp..amp));
            }
        }
    }
    c
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> SquareMatrix {
    loop {
        if let Ok(f) = factor_tri_orth(&random_matrix(rng, n, 1.0)) {
            return f.u;
        }
    }
}

/// Random matrix with determinant bounded away from zero.
pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> SquareMatrix {
    loop {
        let q = random_matrix(rng, n, 1.5);
        if q.det().abs() > 0.2 {
            return q;
        }
    }
}

pub fn random_antisymmetric(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> SquareMatrix {
    let mut k = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.gen_range(-amp..amp);
            k[(i, j)] = v;
            k[(j, i)] = -v;
        }
    }
    k
}

/// `max |d/dt g + 2 Rc|` relative to `max |2 Rc|`, with the derivative
/// taken between neighbouring samples and `Rc` averaged over the pair.
pub fn flow_residual(samples: &[lieflow::Sample]) -> f64 {
    let mut worst: f64 = 0.0;
    for pair in samples.windows(2) {
        let dt = pair[1].t - pair[0].t;
        if dt <= 0.0 {
            continue;
        }
        let rc = &pair[0].ricci_in_initial_frame() + &pair[1].ricci_in_initial_frame();
        let dg = (&pair[1].g - &pair[0].g).scale(1.0 / dt);
        let scale = rc.max_abs().max(f64::MIN_POSITIVE);
        worst = worst.max((&dg + &rc).max_abs() / scale);
    }
    worst
}
