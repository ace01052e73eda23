mod common;

use common::*;
use concept_workbench::hmm::{
    baum_welch, forward_likelihood, viterbi, BaumWelchOptions, HmmInit, HmmModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn forward_and_viterbi_match_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for k in 0..500 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let model = random_model(&mut rng, n, m, k % 2 == 0);
        let len = rng.random_range(1..=6);
        let obs: Vec<usize> = (0..len).map(|_| rng.random_range(0..m)).collect();
        let (total, best) = brute_force_hmm(&model, &obs);
        let fwd = forward_likelihood(&model, &obs).unwrap();
        let (path, logp) = viterbi(&model, &obs).unwrap();
        worst = worst.max(log_gap(fwd, total)).max(log_gap(logp, best));
        assert!(log_gap(fwd, total) <= 1e-9, "forward {fwd} vs {total}");
        assert!(log_gap(logp, best) <= 1e-9, "viterbi {logp} vs {best}");
        assert_eq!(path.len(), obs.len());
        if best.is_finite() {
            // The reported path attains the maximum.
            assert!(log_gap(path_probability(&model, &path, &obs).ln(), best) <= 1e-9);
        }
    }
    assert!(worst <= 1e-9);
}

#[test]
fn viterbi_ties_go_to_the_lowest_state() {
    let model = HmmModel::new(
        vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        vec![vec![1.0], vec![1.0]],
        vec![0.5, 0.5],
    )
    .unwrap();
    let (path, _) = viterbi(&model, &[0, 0, 0]).unwrap();
    assert_eq!(path, vec![0, 0, 0]);
}

#[test]
fn out_of_range_symbol_is_rejected() {
    let model = HmmModel::new(vec![vec![1.0]], vec![vec![0.5, 0.5]], vec![1.0]).unwrap();
    assert!(forward_likelihood(&model, &[0, 2]).is_err());
    assert!(viterbi(&model, &[3]).is_err());
}

#[test]
fn baum_welch_trace_never_decreases() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for run in 0..60 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let truth = random_model(&mut rng, n, m, run % 3 == 0);
        let seqs: Vec<Vec<usize>> = (0..rng.random_range(1..6))
            .map(|_| {
                let len = rng.random_range(1..=12);
                sample(&mut rng, &truth, len)
            })
            .collect();
        let init = match run % 3 {
            0 => HmmInit::SeededRandom(run),
            1 => HmmInit::UniformPerturbed(run),
            _ => HmmInit::Given(truth.clone()),
        };
        let opts = BaumWelchOptions { tol: 1e-10, max_iter: 100 };
        let (model, trace) = baum_welch(&seqs, n, m, init, opts).unwrap();
        assert!(!trace.is_empty());
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "run {run}: trace fell {} -> {}", w[0], w[1]);
        }
        model.validate().unwrap();
    }
}

#[test]
fn baum_welch_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let truth = random_model(&mut rng, 3, 3, false);
    let seqs: Vec<Vec<usize>> = (0..20).map(|_| sample(&mut rng, &truth, 15)).collect();
    let a = baum_welch(&seqs, 3, 3, HmmInit::SeededRandom(5), BaumWelchOptions::default()).unwrap();
    let b = baum_welch(&seqs, 3, 3, HmmInit::SeededRandom(5), BaumWelchOptions::default()).unwrap();
    assert_eq!(a.0.to_checkpoint(), b.0.to_checkpoint());
    assert_eq!(a.1, b.1);
}

fn two_state_truth() -> HmmModel {
    HmmModel::new(
        vec![vec![0.85, 0.15], vec![0.25, 0.75]],
        vec![vec![0.8, 0.15, 0.05], vec![0.05, 0.15, 0.8]],
        vec![0.6, 0.4],
    )
    .unwrap()
}

/// Largest entrywise difference after the better of the two state labellings.
fn aligned_gap(truth: &HmmModel, fit: &HmmModel) -> f64 {
    let gap = |perm: [usize; 2]| -> f64 {
        let mut g = 0.0f64;
        for i in 0..2 {
            g = g.max((truth.t[i] - fit.t[perm[i]]).abs());
            for j in 0..2 {
                g = g.max((truth.a[i][j] - fit.a[perm[i]][perm[j]]).abs());
            }
            for k in 0..truth.m {
                g = g.max((truth.b[i][k] - fit.b[perm[i]][k]).abs());
            }
        }
        g
    };
    gap([0, 1]).min(gap([1, 0]))
}

#[test]
fn two_state_model_is_recovered() {
    let truth = two_state_truth();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let seqs: Vec<Vec<usize>> = (0..1000).map(|_| sample(&mut rng, &truth, 20)).collect();
    let opts = BaumWelchOptions { tol: 1e-9, max_iter: 500 };
    let (fit, _) = baum_welch(&seqs, 2, 3, HmmInit::SeededRandom(3), opts).unwrap();
    let gap = aligned_gap(&truth, &fit);
    assert!(gap <= 0.05, "recovery gap {gap}");
}

#[test]
fn checkpoint_round_trip_keeps_infinite_trace() {
    let mut model = two_state_truth();
    model.trace = vec![f64::NEG_INFINITY, -3.5];
    let back = HmmModel::from_checkpoint(&model.to_checkpoint()).unwrap();
    assert_eq!(back, model);
}
