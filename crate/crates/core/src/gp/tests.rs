use super::*;
use crate::bank::BankMode;
use crate::refine::argmax;
use crate::rng::SeededRng;

fn config(eta: f64, l: f64, sigma: f64, lambda: f64, refresh: usize) -> GpConfig<f64> {
    GpConfig::new(KernelParams::new(eta, l, None).unwrap(), sigma, lambda, refresh).unwrap()
}

fn random_classes(rng: &mut SeededRng, n: usize, classes: usize) -> Vec<usize> {
    (0..n).map(|_| rng.below(classes)).collect()
}

fn full_bank(rng: &mut SeededRng, capacity: usize, dim: usize, classes: usize) -> MemoryBank<f64> {
    let mut bank = MemoryBank::new(capacity, dim, classes, BankMode::Fifo).unwrap();
    let feats = rng.normal_matrix(capacity, dim);
    bank.insert_batch(&feats, &random_classes(rng, capacity, classes)).unwrap();
    bank
}

/// Balanced bank filled with exactly `capacity / classes` samples per class.
fn full_balanced_bank(rng: &mut SeededRng, capacity: usize, dim: usize, classes: usize) -> MemoryBank<f64> {
    let mut bank = MemoryBank::new(capacity, dim, classes, BankMode::ClassBalanced).unwrap();
    let mut ids: Vec<usize> = (0..capacity).map(|i| i % classes).collect();
    rng.shuffle(&mut ids);
    bank.insert_batch(&rng.normal_matrix(capacity, dim), &ids).unwrap();
    bank
}

fn oracle_inverse(state: &GpState<f64>) -> DenseMatrix<f64> {
    direct_inverse(&state.covariance()).unwrap()
}

/// `λ·k(q, h_Q)·K⁻¹·y_Q` from scratch.
fn oracle_logits(state: &GpState<f64>, query: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    let snap = state.bank().snapshot().unwrap();
    let kq = crate::kernel::kernel_matrix(query, &snap.features, state.config().kernel()).unwrap();
    let k_inv = oracle_inverse(state);
    kq.matmul(&k_inv)
        .unwrap()
        .matmul(&snap.labels)
        .unwrap()
        .scaled(state.config().lambda())
}

#[test]
fn warmup_single_sample() {
    let mut bank = MemoryBank::new(4, 2, 3, BankMode::Fifo).unwrap();
    bank.insert_batch(&DenseMatrix::from_rows(&[[0.3, -0.7]]).unwrap(), &[1]).unwrap();
    let state = GpState::warmup(GpConfig::default(), bank).unwrap();
    let v: f64 = state.covariance_inverse()[(0, 0)];
    assert!((v - 0.5).abs() <= 1e-15);
}

#[test]
fn warmup_identical_pair() {
    let mut bank = MemoryBank::new(2, 2, 2, BankMode::Fifo).unwrap();
    let f = DenseMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
    bank.insert_batch(&f, &[0, 1]).unwrap();
    let state = GpState::warmup(GpConfig::default(), bank).unwrap();
    let want = DenseMatrix::from_rows(&[[2.0 / 3.0, -1.0 / 3.0], [-1.0 / 3.0, 2.0 / 3.0]]).unwrap();
    assert!(state.covariance_inverse().max_abs_diff(&want) < 1e-15);
    assert_eq!(state.covariance().as_slice(), &[2.0, 1.0, 1.0, 2.0]);
}

#[test]
fn warmup_residual() {
    let mut rng = SeededRng::new(11);
    let bank = full_bank(&mut rng, 96, 5, 4);
    let state = GpState::warmup(config(1.0, 1.5, 0.3, 1.0, 256), bank).unwrap();
    let prod = state.covariance().matmul(state.covariance_inverse()).unwrap();
    assert!(prod.max_abs_diff(&DenseMatrix::identity(96)) <= 1e-8);
}

#[test]
fn warmup_rejects_empty_bank() {
    let bank = MemoryBank::<f64>::new(4, 2, 2, BankMode::Fifo).unwrap();
    assert!(matches!(GpState::warmup(GpConfig::default(), bank), Err(Error::EmptyBank)));
}

#[test]
fn config_validation() {
    let k = KernelParams::default();
    assert!(GpConfig::new(k, 0.0, 1.0, 1).is_err());
    assert!(GpConfig::new(k, 1.0, -1.0, 1).is_err());
    assert!(GpConfig::new(k, 1.0, 1.0, 0).is_err());
    assert!(GpConfig::new(k, 0.1, 2.0, 5).is_ok());
}

#[test]
fn fifo_stream_matches_direct_inverse() {
    let mut rng = SeededRng::new(5);
    let bank = full_bank(&mut rng, 128, 4, 5);
    let mut state = GpState::warmup(config(1.0, 2.0, 0.5, 1.0, usize::MAX), bank).unwrap();
    let sizes = [1, 4, 8, 16];
    for step in 0..60 {
        let b = sizes[step % 4];
        let feats = rng.normal_matrix(b, 4);
        state.insert(&feats, &random_classes(&mut rng, b, 5)).unwrap();
        let err = state.covariance_inverse().max_rel_diff(&oracle_inverse(&state));
        assert!(err <= 1e-8, "step {step}: rel err {err:e}");
    }
    assert_eq!(state.refreshes(), 0);
}

#[test]
fn balanced_stream_with_repeated_slots() {
    let mut rng = SeededRng::new(6);
    let bank = full_balanced_bank(&mut rng, 24, 3, 4);
    let mut state = GpState::warmup(config(1.0, 1.0, 0.4, 1.0, usize::MAX), bank).unwrap();
    for step in 0..50 {
        // quota is 6: a batch of 8 draws from 2 classes revisits slots
        let ids: Vec<usize> = (0..8).map(|_| rng.below(2)).collect();
        let feats = rng.normal_matrix(8, 3);
        let written = state.insert(&feats, &ids).unwrap();
        assert_eq!(written.len(), 8);
        let err = state.covariance_inverse().max_rel_diff(&oracle_inverse(&state));
        assert!(err <= 1e-8, "step {step}: rel err {err:e}");
    }
}

#[test]
fn warmup_append_inserts_match_direct_inverse() {
    let mut rng = SeededRng::new(8);
    let mut bank = MemoryBank::new(40, 3, 3, BankMode::Fifo).unwrap();
    bank.insert_batch(&rng.normal_matrix(1, 3), &[2]).unwrap();
    let mut state = GpState::warmup(config(1.0, 1.0, 0.5, 1.0, usize::MAX), bank).unwrap();
    while !state.bank().is_full() {
        let feats = rng.normal_matrix(7, 3);
        state.insert(&feats, &random_classes(&mut rng, 7, 3)).unwrap();
        assert_eq!(state.slots(), state.bank().occupied_slots().as_slice());
        let err = state.covariance_inverse().max_rel_diff(&oracle_inverse(&state));
        assert!(err <= 1e-8, "rel err {err:e}");
    }
}

#[test]
fn identical_replacement_is_a_no_op() {
    let mut rng = SeededRng::new(9);
    let bank = full_bank(&mut rng, 64, 3, 4);
    let mut state = GpState::warmup(config(1.0, 1.0, 0.5, 1.0, usize::MAX), bank).unwrap();
    let before = state.covariance_inverse().clone();
    // the bank was filled in slot order, so slots 0..8 are the oldest
    let slots: Vec<usize> = (0..8).collect();
    let feats = DenseMatrix::from_fn(8, 3, |i, j| state.bank().feature(slots[i])[j]);
    let ids: Vec<usize> = slots.iter().map(|&s| state.bank().class_of(s).unwrap()).collect();
    assert_eq!(state.insert(&feats, &ids).unwrap(), slots);
    assert!(state.covariance_inverse().max_rel_diff(&before) <= 1e-10);
}

#[test]
fn replacing_everything_matches_warmup() {
    let mut rng = SeededRng::new(10);
    let bank = full_bank(&mut rng, 32, 4, 3);
    let cfg = config(1.0, 2.0, 0.5, 1.0, usize::MAX);
    let mut state = GpState::warmup(cfg, bank).unwrap();
    let feats = rng.normal_matrix(32, 4);
    let ids = random_classes(&mut rng, 32, 3);
    state.insert(&feats, &ids).unwrap();
    let fresh = GpState::warmup(cfg, state.bank().clone()).unwrap();
    assert!(state.covariance_inverse().max_rel_diff(fresh.covariance_inverse()) <= 1e-8);
}

#[test]
fn refresh_period_triggers_rebuild() {
    let mut rng = SeededRng::new(12);
    let bank = full_bank(&mut rng, 16, 2, 2);
    let mut state = GpState::warmup(config(1.0, 1.0, 0.5, 1.0, 3), bank).unwrap();
    for i in 1..=7u64 {
        state.insert(&rng.normal_matrix(2, 2), &[0, 1]).unwrap();
        assert_eq!(state.generation(), i);
    }
    assert_eq!(state.refreshes(), 2);
    assert_eq!(state.updates_since_refresh(), 1);
    let err = state.covariance_inverse().max_rel_diff(&oracle_inverse(&state));
    assert!(err <= 1e-8);
}

#[test]
fn failed_insert_leaves_state_untouched() {
    let mut rng = SeededRng::new(13);
    let bank = full_balanced_bank(&mut rng, 8, 2, 4);
    let mut state = GpState::warmup(config(1.0, 1.0, 0.5, 1.0, 256), bank).unwrap();
    let before = state.clone();
    let feats = rng.normal_matrix(2, 2);
    assert!(matches!(
        state.insert(&feats, &[1, 4]),
        Err(Error::ClassOutOfRange { class: 4, .. })
    ));
    assert!(matches!(
        state.insert(&rng.normal_matrix(2, 3), &[0, 1]),
        Err(Error::DimensionMismatch(_))
    ));
    assert_eq!(state.generation(), before.generation());
    assert_eq!(state.covariance_inverse(), before.covariance_inverse());
    assert_eq!(state.bank().snapshot().unwrap().features, before.bank().snapshot().unwrap().features);
}

#[test]
fn posterior_single_sample_closed_form() {
    let mut bank = MemoryBank::new(1, 2, 3, BankMode::Fifo).unwrap();
    let h = DenseMatrix::from_rows(&[[0.4, 1.1]]).unwrap();
    bank.insert_batch(&h, &[2]).unwrap();
    let state = GpState::warmup(GpConfig::default(), bank).unwrap();
    let post = state.posterior_logits(&h).unwrap();
    let want = DenseMatrix::from_rows(&[[0.0, 0.0, 0.5]]).unwrap();
    assert!(post.logits.max_abs_diff(&want) <= 1e-15);
}

#[test]
fn posterior_far_query_vanishes() {
    let mut rng = SeededRng::new(14);
    let bank = full_bank(&mut rng, 20, 2, 3);
    let state = GpState::warmup(config(1.0, 1.0, 0.5, 1.0, 256), bank).unwrap();
    let q = DenseMatrix::from_rows(&[[1e3, -1e3]]).unwrap();
    assert!(state.posterior_logits(&q).unwrap().logits.max_abs() <= 1e-9);
}

#[test]
fn posterior_matches_oracle_after_stream() {
    let mut rng = SeededRng::new(15);
    let bank = full_bank(&mut rng, 80, 3, 4);
    let mut state = GpState::warmup(config(1.5, 1.2, 0.3, 4.0, usize::MAX), bank).unwrap();
    for _ in 0..20 {
        state.insert(&rng.normal_matrix(4, 3), &random_classes(&mut rng, 4, 4)).unwrap();
    }
    let q = rng.normal_matrix(16, 3);
    let post = state.posterior_logits(&q).unwrap();
    assert_eq!(post.generation, 20);
    assert!(post.logits.max_rel_diff(&oracle_logits(&state, &q)) <= 1e-8);
    assert!(state.posterior_logits(&rng.normal_matrix(1, 2)).is_err());
}

#[test]
fn lambda_does_not_change_argmax() {
    let mut rng = SeededRng::new(16);
    let bank = full_bank(&mut rng, 40, 2, 3);
    let a = GpState::warmup(config(1.0, 1.0, 0.5, 0.1, 256), bank.clone()).unwrap();
    let b = GpState::warmup(config(1.0, 1.0, 0.5, 37.0, 256), bank).unwrap();
    let q = rng.normal_matrix(50, 2);
    let la = a.posterior_logits(&q).unwrap().logits;
    let lb = b.posterior_logits(&q).unwrap().logits;
    for (ra, rb) in la.row_iter().zip(lb.row_iter()) {
        assert_eq!(argmax(ra), argmax(rb));
    }
}

#[test]
fn mirrored_classes_get_equal_logits() {
    let mut bank = MemoryBank::new(4, 2, 2, BankMode::Fifo).unwrap();
    let f = DenseMatrix::from_rows(&[[1.0, 0.5], [-1.0, 0.5], [2.0, -1.0], [-2.0, -1.0]]).unwrap();
    bank.insert_batch(&f, &[0, 1, 0, 1]).unwrap();
    let state = GpState::warmup(config(1.0, 1.0, 0.5, 3.0, 256), bank).unwrap();
    let q = DenseMatrix::from_rows(&[[0.0, 0.0], [0.0, 2.5], [0.0, -7.0]]).unwrap();
    let logits = state.posterior_logits(&q).unwrap().logits;
    for row in logits.row_iter() {
        assert!((row[0] - row[1]).abs() <= 1e-10);
    }
}

#[test]
fn similarity_examples() {
    let mut bank = MemoryBank::new(3, 2, 2, BankMode::Fifo).unwrap();
    bank.insert_batch(&DenseMatrix::from_rows(&[[1.0, 1.0]]).unwrap(), &[1]).unwrap();
    let k = KernelParams::default();
    let q = DenseMatrix::from_rows(&[[1.0, 1.0]]).unwrap();
    assert_eq!(similarity_logits(&bank, &q, &k).unwrap().as_slice(), &[0.0, 1.0]);

    let mut bank = MemoryBank::new(2, 2, 2, BankMode::Fifo).unwrap();
    let f = DenseMatrix::from_rows(&[[0.7, 0.0], [0.0, -0.7]]).unwrap();
    bank.insert_batch(&f, &[0, 0]).unwrap();
    let q = DenseMatrix::from_rows(&[[0.0, 0.0]]).unwrap();
    let mass = similarity_logits(&bank, &q, &k).unwrap();
    let want = 2.0 * (-0.49f64 / 2.0).exp();
    assert!((mass[(0, 0)] - want).abs() <= 1e-15);
    assert_eq!(mass[(0, 1)], 0.0);
}

#[test]
fn tiny_eta_recovers_similarity() {
    let mut rng = SeededRng::new(17);
    let bank = full_bank(&mut rng, 50, 3, 4);
    let cfg = config(1e-8, 1.0, 1.0, 2.0, 256);
    let state = GpState::warmup(cfg, bank).unwrap();
    let q = rng.normal_matrix(20, 3);
    let mu = state.posterior_logits(&q).unwrap().logits.scaled(cfg.noise() / cfg.lambda());
    let sim = similarity_logits(state.bank(), &q, cfg.kernel()).unwrap();
    assert!(mu.max_abs_diff(&sim) <= 1e-6 * (1.0 + sim.max_abs()));
    // relative to the mass itself the gap is of order η·n/σ²
    assert!(mu.max_abs_diff(&sim) <= 1e-6 * sim.max_abs());
}

#[test]
fn large_sigma_approaches_similarity() {
    let mut rng = SeededRng::new(18);
    let bank = full_bank(&mut rng, 30, 2, 3);
    let q = rng.normal_matrix(10, 2);
    let gap = |sigma: f64| {
        let cfg = config(1.0, 1.0, sigma, 1.0, 256);
        let state = GpState::warmup(cfg, bank.clone()).unwrap();
        let mu = state.posterior_logits(&q).unwrap().logits.scaled(cfg.noise());
        let sim = similarity_logits(&bank, &q, cfg.kernel()).unwrap();
        mu.max_abs_diff(&sim) / sim.max_abs()
    };
    let (g1, g2, g3) = (gap(10.0), gap(100.0), gap(1000.0));
    assert!(g2 < g1 && g3 < g2);
    assert!(g3 < 1e-4);
}

#[test]
fn distinct_runs_split_on_repeats() {
    assert_eq!(distinct_runs(&[0, 1, 2]), vec![(0, 3)]);
    assert_eq!(distinct_runs(&[2, 4, 2, 4, 6]), vec![(0, 2), (2, 5)]);
    assert_eq!(distinct_runs(&[]), Vec::<(usize, usize)>::new());
}

#[test]
fn linear_separable_1d() {
    let x = DenseMatrix::from_vec(8, 1, vec![-4.0, -3.5, -3.0, -2.5, 2.5, 3.0, 3.5, 4.0]).unwrap();
    let y = [0, 0, 0, 0, 1, 1, 1, 1];
    let model = linear_fit(&x, &y, 2, 2000, 0.05).unwrap();
    let logits = linear_logits(&model, &x).unwrap();
    for (row, &c) in logits.row_iter().zip(&y) {
        assert_eq!(argmax(row), c);
    }
}

#[test]
fn linear_loss_is_non_increasing() {
    let mut rng = SeededRng::new(19);
    let n = 90;
    let ids: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let x = DenseMatrix::from_fn(n, 2, |i, j| {
        let c = ids[i] as f64;
        let centre = if j == 0 { c.cos() * 2.0 } else { c.sin() * 2.0 };
        centre + rng.normal()
    });
    for lr in [0.01, 0.05, 0.1] {
        let (_, losses) = linear_fit_traced(&x, &ids, 3, 500, lr).unwrap();
        assert_eq!(losses.len(), 501);
        assert!((losses[0] - 3f64.ln()).abs() < 1e-12);
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "lr {lr}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn linear_symmetric_boundary_through_origin() {
    let pts = [[1.0, 0.3], [2.0, -0.5], [1.5, 1.0], [0.7, -1.2]];
    let mut rows = Vec::new();
    let mut ids = Vec::new();
    for p in pts {
        rows.push(p);
        ids.push(0);
        rows.push([-p[0], -p[1]]);
        ids.push(1);
    }
    let x = DenseMatrix::from_rows(&rows).unwrap();
    let model = linear_fit(&x, &ids, 2, 2000, 0.05).unwrap();
    // boundary: (w0 - w1)·x + (b0 - b1) = 0; distance from the origin
    let dw: Vec<f64> = (0..2).map(|j| model.weights[(0, j)] - model.weights[(1, j)]).collect();
    let db = model.bias[0] - model.bias[1];
    let dist = db.abs() / dw.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(dist <= 1e-3, "distance {dist:e}");
}

#[test]
fn linear_degenerate_inputs() {
    let x = DenseMatrix::from_vec(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
    assert!(matches!(linear_fit(&x, &[0, 0, 0], 2, 10, 0.1), Err(Error::DegenerateData(_))));
    assert!(matches!(linear_fit(&x, &[0, 1, 2], 2, 10, 0.1), Err(Error::ClassOutOfRange { .. })));
    assert!(linear_fit(&x, &[0, 1], 2, 10, 0.1).is_err());
}

#[test]
fn zero_model_is_uniform() {
    let model = LinearModel::<f64>::zeros(5, 3);
    let q = DenseMatrix::from_rows(&[[1.0, -2.0, 3.0]]).unwrap();
    let logits = linear_logits(&model, &q).unwrap();
    assert_eq!(logits.as_slice(), &[0.0; 5]);
    assert_eq!(crate::refine::confidence(logits.row(0)), 0.2);
    assert!(linear_logits(&model, &DenseMatrix::zeros(1, 2)).is_err());
}

#[test]
fn linear_logits_are_affine() {
    let model: LinearModel<f64> = LinearModel {
        weights: DenseMatrix::from_rows(&[[1.0, -2.0], [0.5, 3.0], [-1.0, 0.0]]).unwrap(),
        bias: vec![0.1, -0.2, 0.3],
    };
    let q = DenseMatrix::from_rows(&[[1.0, 2.0], [-3.0, 0.5], [-1.0, 1.25]]).unwrap();
    let l = linear_logits(&model, &q).unwrap();
    for c in 0..3 {
        let mid = 0.5 * (l[(0, c)] + l[(1, c)]);
        assert!((l[(2, c)] - mid).abs() <= 1e-14);
    }
    assert!((l[(0, 0)] - (1.0 - 4.0 + 0.1)).abs() <= 1e-15);
}

#[test]
fn linear_confidence_saturates_far_away() {
    let x = DenseMatrix::from_rows(&[[-1.0, 0.0], [-1.2, 0.3], [1.0, 0.0], [1.1, -0.2]]).unwrap();
    let model = linear_fit(&x, &[0, 0, 1, 1], 2, 2000, 0.05).unwrap();
    let far = DenseMatrix::from_rows(&[[1e3, 0.0]]).unwrap();
    let logits = linear_logits(&model, &far).unwrap();
    assert_eq!(argmax(logits.row(0)), 1);
    assert!(crate::refine::confidence(logits.row(0)) > 1.0 - 1e-9);
}
