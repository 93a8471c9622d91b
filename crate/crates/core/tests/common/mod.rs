#![allow(dead_code)]

use descriptor_minimax::discrete_dae::{DaeEllipsoid, DiscreteDae};
use descriptor_minimax::filter::rank_precondition;
use descriptor_minimax::{Matrix, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let a = gaussian(rng, n, n);
    &a * a.transpose() + Matrix::identity(n, n) * 0.5
}

/// Random DAE with `B_k = S = I`, observed at every step, and `[F_k; H_k]`
/// of full column rank.
pub fn random_filterable(rng: &mut ChaCha8Rng) -> (DiscreteDae, DaeEllipsoid) {
    loop {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let l = rng.random_range(1..=4);
        let t = rng.random_range(1..=10);
        let f_seq: Vec<Matrix> = (0..=t).map(|_| gaussian(rng, m, n)).collect();
        let h_seq: Vec<Matrix> = (0..=t).map(|_| gaussian(rng, l, n)).collect();
        if !f_seq.iter().zip(&h_seq).all(|(f, h)| rank_precondition(f, h, 1e-6)) {
            continue;
        }
        let c_seq = (0..t).map(|_| gaussian(rng, m, n)).collect();
        let b_seq = vec![Matrix::identity(m, m); t];
        let dae = DiscreteDae::new(f_seq, c_seq, b_seq, Matrix::identity(m, m), h_seq).unwrap();
        let q0 = spd(rng, m);
        let q1 = (0..t).map(|_| spd(rng, m)).collect();
        let q2 = (0..=t).map(|_| spd(rng, l)).collect();
        return (dae, DaeEllipsoid::new(q0, q1, q2).unwrap());
    }
}

/// Random DAE with arbitrary `B_k`, `S` and possibly unobserved terminal state.
pub fn random_general(rng: &mut ChaCha8Rng) -> (DiscreteDae, DaeEllipsoid) {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=4);
    let l = rng.random_range(1..=3);
    let p = rng.random_range(1..=3);
    let q = rng.random_range(1..=3);
    let t = rng.random_range(1..=6);
    let observed = if rng.random_bool(0.5) { t + 1 } else { t };
    let dae = DiscreteDae::new(
        (0..=t).map(|_| gaussian(rng, m, n)).collect(),
        (0..t).map(|_| gaussian(rng, m, n)).collect(),
        (0..t).map(|_| gaussian(rng, m, p)).collect(),
        gaussian(rng, m, q),
        (0..observed).map(|_| gaussian(rng, l, n)).collect(),
    )
    .unwrap();
    let bounds = DaeEllipsoid::new(
        spd(rng, q),
        (0..t).map(|_| spd(rng, p)).collect(),
        (0..observed).map(|_| spd(rng, l)).collect(),
    )
    .unwrap();
    (dae, bounds)
}

/// Observations with `sum_k (Q2k y_k, y_k) = 1/2`, which are always
/// consistent with the bounding set.
pub fn consistent_observations(rng: &mut ChaCha8Rng, dae: &DiscreteDae, bounds: &DaeEllipsoid) -> Vec<Vector> {
    let mut y: Vec<Vector> = (0..dae.observed_steps())
        .map(|_| Vector::from_fn(dae.observation_dim(), |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let form: f64 = y.iter().zip(bounds.q2_seq()).map(|(v, q)| v.dot(&(q * v))).sum();
    let scale = (0.5 / form).sqrt();
    y.iter_mut().for_each(|v| *v *= scale);
    y
}
