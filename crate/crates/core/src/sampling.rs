//! Random states, channels and isometric tensors for tests and experiments.
//!
//! All samplers take an explicit RNG so batch runs can hand each task its own
//! seeded stream.

use ndarray::{s, Array2};
use ndarray_linalg::QR;
use num_complex::Complex64 as c64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::GaussianChannel;
use crate::linalg::{block_diag, paired_block, qr_r, CMat, Mat};
use crate::majorana::CorrelationMatrix;

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Haar-distributed real orthogonal matrix (QR with sign fix).
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    if n == 0 {
        return Mat::zeros((0, 0));
    }
    let g = gaussian_matrix(n, n, rng);
    let (q, r) = qr_r(&g).expect("qr of gaussian matrix");
    let mut q = q;
    for j in 0..n {
        if r[[j, j]] < 0.0 {
            q.column_mut(j).mapv_inplace(|x| -x);
        }
    }
    q
}

/// Haar-distributed unitary matrix.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_shape_fn((n, n), |_| {
        c64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let (q, r) = g.qr().expect("qr of gaussian matrix");
    let mut q = q;
    for j in 0..n {
        let d = r[[j, j]];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c64::new(1.0, 0.0) };
        q.column_mut(j).mapv_inplace(|x| x * ph);
    }
    q
}

pub fn random_antisymmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    let g = gaussian_matrix(n, n, rng);
    (&g - &g.t()) * 0.5
}

/// Uniformly rotated pure state on `n_modes` Majoranas.
pub fn random_pure_state<R: Rng + ?Sized>(n_modes: usize, rng: &mut R) -> CorrelationMatrix {
    let o = haar_orthogonal(n_modes, rng);
    let d = paired_block(&vec![1.0; n_modes / 2]);
    CorrelationMatrix::from_numeric(o.dot(&d).dot(&o.t())).expect("rotated pure state")
}

/// Rotated state with pairing amplitudes drawn uniformly from [0, 1].
pub fn random_state<R: Rng + ?Sized>(n_modes: usize, rng: &mut R) -> CorrelationMatrix {
    let o = haar_orthogonal(n_modes, rng);
    let lambdas: Vec<f64> = (0..n_modes / 2).map(|_| rng.random::<f64>()).collect();
    let d = paired_block(&lambdas);
    CorrelationMatrix::from_numeric(o.dot(&d).dot(&o.t())).expect("rotated mixed state")
}

/// Channel with B = O₁ diag(s) O₂ᵀ, s uniform in [0, s_max], and a random
/// antisymmetric A shrunk by 0.9 until ΛᵀΛ ≤ I.
pub fn random_channel<R: Rng + ?Sized>(n_modes: usize, s_max: f64, rng: &mut R) -> GaussianChannel {
    let o1 = haar_orthogonal(n_modes, rng);
    let o2 = haar_orthogonal(n_modes, rng);
    let svals: Vec<f64> = (0..n_modes).map(|_| s_max * rng.random::<f64>()).collect();
    let b = o1.dot(&Array2::from_diag(&ndarray::Array1::from(svals))).dot(&o2.t());
    let mut a = random_antisymmetric(n_modes, rng);
    loop {
        if let Ok(ch) = GaussianChannel::new(a.clone(), b.clone()) {
            return ch;
        }
        a *= 0.9;
    }
}

/// Channel from a unitary dilation: the system and `env_modes` environment
/// Majoranas in a random pure state are rotated by a Haar orthogonal matrix
/// and the environment is discarded. These channels are CPTP by construction
/// and generically have no preserved modes.
pub fn random_dilated_channel<R: Rng + ?Sized>(
    n_modes: usize,
    env_modes: usize,
    rng: &mut R,
) -> GaussianChannel {
    let o = haar_orthogonal(n_modes + env_modes, rng);
    let ge = random_pure_state(env_modes, rng);
    let b = o.slice(s![..n_modes, ..n_modes]).to_owned();
    let ose = o.slice(s![..n_modes, n_modes..]).to_owned();
    let a = ose.dot(ge.matrix()).dot(&ose.t());
    GaussianChannel::new_numeric(a, b).expect("dilated channel is CPTP")
}

/// Channel with `n_preserved` modes evolving under a random rotation and a
/// random dissipative remainder, all conjugated by a random basis change.
pub fn random_channel_with_preserved<R: Rng + ?Sized>(
    n_modes: usize,
    n_preserved: usize,
    s_max: f64,
    rng: &mut R,
) -> GaussianChannel {
    let nd = n_modes - n_preserved;
    let inner = random_channel(nd, s_max, rng);
    let u = haar_orthogonal(n_preserved, rng);
    let rot = haar_orthogonal(n_modes, rng);
    let b = rot.dot(&block_diag(&u, inner.b())).dot(&rot.t());
    let a = rot.dot(&block_diag(&Mat::zeros((n_preserved, n_preserved)), inner.a())).dot(&rot.t());
    GaussianChannel::new_numeric(a, b).expect("conjugated channel is CPTP")
}
