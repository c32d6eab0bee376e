//! Oracles shared by the integration suites.
#![allow(dead_code)]

use hec_adapt::features::{PolicyState, STATE_DIM};
use hec_adapt::nn::{chain, Activation, Gradients, Network};
use hec_adapt::policy::BanditEnv;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Largest entrywise relative error between two gradient vectors. Entries
/// below `floor` in magnitude are compared absolutely against `floor`.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

fn random_dims(rng: &mut ChaCha8Rng, output: usize) -> Vec<usize> {
    let depth = rng.random_range(1..=3);
    let mut dims = vec![rng.random_range(2..=7)];
    for _ in 1..depth {
        dims.push(rng.random_range(2..=6));
    }
    dims.push(output);
    dims
}

fn central_difference(net: &Network, mut loss: impl FnMut(&Network) -> f64) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.param_count())
        .map(|i| {
            let orig = *probe.param_mut(i);
            *probe.param_mut(i) = orig + FD_STEP;
            let up = loss(&probe);
            *probe.param_mut(i) = orig - FD_STEP;
            let down = loss(&probe);
            *probe.param_mut(i) = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// MAE + L2 gradient of a seeded toy autoencoder-like net against central
/// differences. Targets sit at least 0.1 away from the outputs so no
/// perturbation crosses the kink of `|x|`.
pub fn mae_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_dim = rng.random_range(2..=6);
    let dims = random_dims(&mut rng, out_dim);
    let net = Network::init(&chain(&dims, Activation::Tanh, Activation::Identity), seed).unwrap();
    let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.5..1.5)).collect();
    let out = net.predict(&x).unwrap();
    let target: Vec<f64> = out
        .iter()
        .map(|o| {
            let off = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                o + off
            } else {
                o - off
            }
        })
        .collect();
    let l2 = rng.random_range(0.0..1e-2);
    let loss = |n: &Network| {
        let o = n.predict(&x).unwrap();
        o.iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / o.len() as f64
            + 0.5 * l2 * n.weight_norm_sq()
    };
    let analytic = net
        .backward_mae(&net.infer(&x).unwrap(), &target, l2)
        .unwrap()
        .flatten();
    let numeric = central_difference(&net, loss);
    max_rel_err(&analytic, &numeric, 1e-6)
}

/// `scale * ln s[a] + L2` gradient of a seeded toy softmax policy.
pub fn logprob_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let arms = rng.random_range(2..=5);
    let dims = random_dims(&mut rng, arms);
    let net = Network::init(&chain(&dims, Activation::Tanh, Activation::Softmax), seed).unwrap();
    let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
    let action = rng.random_range(0..arms);
    let scale = rng.random_range(-2.0..2.0);
    let l2 = rng.random_range(0.0..1e-2);
    let loss =
        |n: &Network| scale * n.predict(&x).unwrap()[action].ln() + 0.5 * l2 * n.weight_norm_sq();
    let grads: Gradients = net
        .backward_logprob(&net.infer(&x).unwrap(), action, scale, l2)
        .unwrap();
    let numeric = central_difference(&net, loss);
    max_rel_err(&grads.flatten(), &numeric, 1e-6)
}

pub fn random_state(rng: &mut ChaCha8Rng) -> PolicyState {
    let mut s = [0.0; STATE_DIM];
    for v in &mut s {
        *v = rng.random_range(-2.0..2.0);
    }
    PolicyState(s)
}

/// Arm 3 beats the others on every context by at least 0.1.
pub fn dominance_env(seed: u64, contexts: usize) -> BanditEnv {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..contexts).map(|_| random_state(&mut rng)).collect();
    let rewards = (0..contexts)
        .map(|_| {
            let best = rng.random_range(0.6..1.0);
            vec![
                best - rng.random_range(0.1..0.6),
                best - rng.random_range(0.1..0.6),
                best,
            ]
        })
        .collect();
    BanditEnv::new(states, rewards).unwrap()
}

/// Best arm is `argmax_k w_k . z` for a fixed random `W`; reward 1 for the
/// best arm and 0 otherwise.
pub fn separable_env(seed: u64, contexts: usize) -> BanditEnv {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<[f64; STATE_DIM]> = (0..3)
        .map(|_| {
            let mut row = [0.0; STATE_DIM];
            for v in &mut row {
                *v = rng.random_range(-1.0..1.0);
            }
            row
        })
        .collect();
    let states: Vec<PolicyState> = (0..contexts).map(|_| random_state(&mut rng)).collect();
    let rewards = states
        .iter()
        .map(|s| {
            let scores: Vec<f64> = w
                .iter()
                .map(|row| row.iter().zip(s.as_slice()).map(|(a, b)| a * b).sum())
                .collect();
            let best = (0..3)
                .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
                .unwrap();
            (0..3).map(|k| if k == best { 1.0 } else { 0.0 }).collect()
        })
        .collect();
    BanditEnv::new(states, rewards).unwrap()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
