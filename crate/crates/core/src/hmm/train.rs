#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{backward_table, default_names, forward_table, log_sum_exp, HmmError, HmmModel, LogParams};

#[derive(Debug, Clone, PartialEq)]
pub enum HmmInit {
    /// Random positive rows, normalised.
    SeededRandom(u64),
    /// Uniform rows with a small seeded perturbation.
    UniformPerturbed(u64),
    /// Start from an existing model.
    Given(HmmModel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaumWelchOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BaumWelchOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 200 }
    }
}

fn random_row(rng: &mut ChaCha8Rng, len: usize, perturbed: bool) -> Vec<f64> {
    let raw: Vec<f64> = (0..len)
        .map(|_| {
            let u: f64 = rng.random();
            if perturbed {
                1.0 + 0.1 * (u - 0.5)
            } else {
                0.05 + u
            }
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn initial_model(n: usize, m: usize, init: HmmInit) -> Result<HmmModel, HmmError> {
    let (seed, perturbed) = match init {
        HmmInit::Given(model) => {
            model.validate()?;
            if model.n != n || model.m != m {
                return Err(HmmError::Invalid(format!(
                    "initial model is {}x{}, requested {n}x{m}",
                    model.n, model.m
                )));
            }
            return Ok(model);
        }
        HmmInit::SeededRandom(s) => (s, false),
        HmmInit::UniformPerturbed(s) => (s, true),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = random_row(&mut rng, n, perturbed);
    let a = (0..n).map(|_| random_row(&mut rng, n, perturbed)).collect();
    let b = (0..n).map(|_| random_row(&mut rng, m, perturbed)).collect();
    Ok(HmmModel {
        n,
        m,
        a,
        b,
        t,
        symbol_names: default_names(m),
        seed: Some(seed),
        trace: Vec::new(),
        uniform_rows: Vec::new(),
    })
}

struct Stats {
    ll: f64,
    start: Vec<f64>,
    trans: Vec<Vec<f64>>,
    emit: Vec<Vec<f64>>,
}

fn expected_counts(lp: &LogParams, seq: &[usize], n: usize, m: usize) -> Stats {
    let alpha = forward_table(lp, seq);
    let beta = backward_table(lp, seq);
    let len = seq.len();
    let ll = log_sum_exp(alpha[len - 1].iter().copied());
    let mut st = Stats {
        ll,
        start: vec![0.0; n],
        trans: vec![vec![0.0; n]; n],
        emit: vec![vec![0.0; m]; n],
    };
    if !ll.is_finite() {
        return st;
    }
    for k in 0..len {
        for i in 0..n {
            let g = (alpha[k][i] + beta[k][i] - ll).exp();
            st.emit[i][seq[k]] += g;
            if k == 0 {
                st.start[i] = g;
            }
        }
        if k + 1 < len {
            let o = seq[k + 1];
            for i in 0..n {
                for j in 0..n {
                    st.trans[i][j] += (alpha[k][i] + lp.a[i][j] + lp.b[j][o] + beta[k + 1][j] - ll).exp();
                }
            }
        }
    }
    st
}

fn normalised(row: &[f64], fallback: &[f64]) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        row.iter().map(|x| x / s).collect()
    } else {
        fallback.to_vec()
    }
}

/// EM training over all non-empty sequences. Stops when the total
/// log-likelihood improves by less than `tol` or after `max_iter` updates.
/// The trace holds the log-likelihood of every model visited.
pub fn baum_welch(
    sequences: &[Vec<usize>],
    n: usize,
    m: usize,
    init: HmmInit,
    options: BaumWelchOptions,
) -> Result<(HmmModel, Vec<f64>), HmmError> {
    if n == 0 || m == 0 {
        return Err(HmmError::Invalid("N and M must be at least 1".into()));
    }
    let data: Vec<&Vec<usize>> = sequences.iter().filter(|s| !s.is_empty()).collect();
    if data.is_empty() {
        return Err(HmmError::NoData);
    }
    let mut model = initial_model(n, m, init)?;
    for s in &data {
        model.check_sequence(s)?;
    }

    let mut trace: Vec<f64> = Vec::new();
    let mut iter = 0;
    loop {
        let lp = model.log_params();
        // Per-sequence statistics in parallel, reduced in input order.
        let stats: Vec<Stats> = data.par_iter().map(|s| expected_counts(&lp, s, n, m)).collect();
        let ll: f64 = stats.iter().map(|s| s.ll).sum();
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(p) = prev {
            if ll - p < options.tol {
                break;
            }
        }
        if iter == options.max_iter {
            break;
        }
        iter += 1;

        let mut start = vec![0.0; n];
        let mut trans = vec![vec![0.0; n]; n];
        let mut emit = vec![vec![0.0; m]; n];
        for s in stats.iter().filter(|s| s.ll.is_finite()) {
            for i in 0..n {
                start[i] += s.start[i];
                for j in 0..n {
                    trans[i][j] += s.trans[i][j];
                }
                for k in 0..m {
                    emit[i][k] += s.emit[i][k];
                }
            }
        }
        model.t = normalised(&start, &model.t);
        model.a = (0..n).map(|i| normalised(&trans[i], &model.a[i])).collect();
        model.b = (0..n).map(|i| normalised(&emit[i], &model.b[i])).collect();
    }
    model.trace = trace.clone();
    model.validate()?;
    Ok((model, trace))
}
