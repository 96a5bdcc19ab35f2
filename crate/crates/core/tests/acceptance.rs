//! Acceptance suite: one test per release gate, each printing a PASS line
//! with the measured quantity next to its pinned tolerance.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use ndarray::{Array2, ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use sevc_core::autograd::nn::{zeros, ParamStore};
use sevc_core::autograd::{Tape, Var};
use sevc_core::corpus::{
    make_toy_corpus, noise, split_by_sentence, synthesize_noisy, FeatureStore, NoiseKind,
    PairedManifest, SpeakerAttribute, DEFAULT_TEST_NOISES, DEFAULT_TRAIN_NOISES,
};
use sevc_core::eval::{dtw_cost, mcd, MelCepstra, CEPSTRUM_ORDER};
use sevc_core::losses::{
    adversarial_losses, autovc_loss, classification_losses, combine_discriminator_loss,
    combine_generator_loss, cycle_loss, gradient_penalty, gradient_penalty_with, identity_loss,
    Lambdas,
};
use sevc_core::models::{
    add_autovc_params, add_classifier_params, add_discriminator_params, add_se_params,
    autovc_forward, classify, discriminate, encode, se_forward, se_loss, ModelProfile,
};
use sevc_core::signal::{
    build_mel_filterbank, measure_snr_db, mix_at_snr, stft, Waveform, FRAME_LENGTH, HOP_LENGTH,
    N_BINS, N_MELS, SAMPLE_RATE,
};
use sevc_core::trainer::{
    build_variant, load_checkpoint, save_checkpoint, stage_gan, stage_joint_se_vc,
    stage_pretrain_se, Checkpoint, TrainConfig, Variant,
};

const T: usize = 96;
const K: usize = 2;

fn pass(criterion: u32, name: &str, detail: String) {
    println!("ACCEPTANCE {criterion} {name}: PASS ({detail})");
}

fn random_wave(rng: &mut ChaCha8Rng, n: usize) -> Waveform {
    Waveform::new(
        (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        SAMPLE_RATE,
    )
    .unwrap()
}

// ---------------------------------------------------------------- criterion 1

/// Periodic Hann window and centered reflect padding, restated from the
/// published frame contract.
fn oracle_padded(samples: &[f64]) -> Vec<f64> {
    let pad = FRAME_LENGTH / 2;
    let n = samples.len();
    let mut out: Vec<f64> = (0..pad).map(|i| samples[pad - i]).collect();
    out.extend_from_slice(samples);
    out.extend((0..pad).map(|i| samples[n - 2 - i]));
    out
}

fn oracle_dft(padded: &[f64], start: usize) -> Vec<(f64, f64)> {
    let window: Vec<f64> = (0..FRAME_LENGTH)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / FRAME_LENGTH as f64).cos()))
        .collect();
    (0..N_BINS)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for n in 0..FRAME_LENGTH {
                let x = padded[start + n] * window[n];
                let ang = -2.0 * std::f64::consts::PI * (k * n) as f64 / FRAME_LENGTH as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            (re, im)
        })
        .collect()
}

#[test]
fn criterion_1_dsp_oracles() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    let mut worst_rel = 0.0f64;
    for _ in 0..50 {
        let wave = random_wave(&mut rng, 1600);
        let spec = stft(&wave).unwrap();
        let padded = oracle_padded(&wave.samples);
        let max_mag = spec.frames.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for t in 0..spec.n_frames() {
            let oracle = oracle_dft(&padded, t * HOP_LENGTH);
            for b in 0..N_BINS {
                let d = spec.frames[[t, b]];
                let diff = ((d.re - oracle[b].0).powi(2) + (d.im - oracle[b].1).powi(2)).sqrt();
                worst_rel = worst_rel.max(diff / max_mag);
            }
        }
    }
    assert!(worst_rel < 1e-6, "stft vs naive dft: {worst_rel}");

    let mut worst_snr = 0.0f64;
    for snr in -5..=20 {
        let clean = random_wave(&mut rng, 8000);
        let noise = random_wave(&mut rng, 8000);
        let mix = mix_at_snr(&clean, &noise, snr as f64).unwrap();
        let got = measure_snr_db(&mix.wave, &clean, mix.peak_scale);
        worst_snr = worst_snr.max((got - snr as f64).abs());
    }
    assert!(worst_snr < 0.01, "snr error {worst_snr} dB");

    // Mel filterbank structure: full band coverage, unimodal triangular rows,
    // peak normalization.
    let fb = build_mel_filterbank(N_MELS, 0.0, 8000.0, N_BINS).unwrap();
    for b in 1..N_BINS - 1 {
        let col: f64 = (0..N_MELS).map(|m| fb.weights[[m, b]]).sum();
        assert!(col > 0.0, "bin {b} uncovered");
    }
    for m in 0..N_MELS {
        let row: Vec<f64> = (0..N_BINS).map(|b| fb.weights[[m, b]]).collect();
        let peak = row.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-9, "row {m} not peak-normalized");
        let nonzero: Vec<f64> = row.iter().cloned().filter(|v| *v > 0.0).collect();
        let peak_idx = nonzero
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(nonzero[..=peak_idx]
            .windows(2)
            .all(|w| w[0] <= w[1] + 1e-12));
        assert!(nonzero[peak_idx..].windows(2).all(|w| w[0] + 1e-12 >= w[1]));
    }

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 30.0, "dsp oracle suite took {secs:.1}s");
    pass(1, "dsp-oracles", format!("stft rel {worst_rel:.2e} < 1e-6, snr err {worst_snr:.4} dB < 0.01, mel structure ok, {secs:.1}s < 30s"));
}

// ---------------------------------------------------------------- shared nets

fn stores(seed: u64) -> (ParamStore, ParamStore, ParamStore, ParamStore) {
    let p = ModelProfile::tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut se = ParamStore::new();
    add_se_params(&mut se, &mut rng, &p);
    let mut vc = ParamStore::new();
    add_autovc_params(&mut vc, &mut rng, &p, K);
    let mut disc = ParamStore::new();
    add_discriminator_params(&mut disc, &mut rng, &p, K);
    let mut cls = ParamStore::new();
    add_classifier_params(&mut cls, &mut rng, &p, K);
    (se, vc, disc, cls)
}

fn random_lms(rng: &mut ChaCha8Rng, t: usize) -> ArrayD<f64> {
    ArrayD::from_shape_fn(IxDyn(&[t, N_MELS]), |_| rng.gen_range(-4.0..1.0))
}

fn attr(i: usize) -> SpeakerAttribute {
    SpeakerAttribute::new(i, K).unwrap()
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_loss_unit_values() {
    let started = Instant::now();
    let p = ModelProfile::tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(202);

    // D == 0.5 everywhere once the final conv is zeroed -> L_adv_D = 2 ln 2.
    let (_, _, mut disc, _) = stores(2020);
    let shape = disc.get("disc.conv4.w").shape().to_vec();
    disc.set("disc.conv4.w", zeros(&shape));
    let bshape = disc.get("disc.conv4.b").shape().to_vec();
    disc.set("disc.conv4.b", zeros(&bshape));
    let mut tape = Tape::new();
    let ld = disc.lift(&mut tape);
    let real = tape.leaf(random_lms(&mut rng, T));
    let fake = tape.leaf(random_lms(&mut rng, T));
    let (l_adv_d, _) =
        adversarial_losses(&mut tape, &ld, &p, &[(real, attr(0))], &[(fake, attr(1))]).unwrap();
    let got = tape.scalar_value(l_adv_d);
    let adv_err = (got - 2.0 * 2.0_f64.ln()).abs();
    assert!(adv_err < 1e-6, "L_adv_D {got} vs 2 ln 2");

    // Uniform classifier posterior with K = 8 -> L_cls = ln 8.
    let profile = ModelProfile::tiny();
    let mut cls8 = ParamStore::new();
    add_classifier_params(&mut cls8, &mut ChaCha8Rng::seed_from_u64(2021), &profile, 8);
    let shape = cls8.get("cls.conv4.w").shape().to_vec();
    cls8.set("cls.conv4.w", zeros(&shape));
    let bshape = cls8.get("cls.conv4.b").shape().to_vec();
    cls8.set("cls.conv4.b", zeros(&bshape));
    let mut tape = Tape::new();
    let lc = cls8.lift(&mut tape);
    let x = tape.leaf(random_lms(&mut rng, T));
    let a8 = SpeakerAttribute::new(3, 8).unwrap();
    let (l_cls, _) =
        classification_losses(&mut tape, &lc, &profile, &[(x, a8)], &[(x, a8)]).unwrap();
    let got = tape.scalar_value(l_cls);
    let cls_err = (got - 8.0_f64.ln()).abs();
    assert!(cls_err < 1e-6, "L_cls {got} vs ln 8");

    // L1/MSE identity and constant-offset cases via the SE loss (MSE) and
    // identity loss path are covered by direct tape arithmetic here.
    let mut tape = Tape::new();
    let a = tape.leaf(random_lms(&mut rng, 8));
    let mse_same = {
        let d = tape.sub(a, a);
        let sq = tape.mul(d, d);
        tape.mean(sq)
    };
    assert!(tape.scalar_value(mse_same).abs() < 1e-12);
    let b = tape.add_scalar(a, 0.25);
    let mse_off = {
        let d = tape.sub(b, a);
        let sq = tape.mul(d, d);
        tape.mean(sq)
    };
    assert!((tape.scalar_value(mse_off) - 0.0625).abs() < 1e-6);
    let l1_off = {
        let d = tape.sub(b, a);
        let ab = tape.abs(d);
        tape.mean(ab)
    };
    assert!((tape.scalar_value(l1_off) - 0.25).abs() < 1e-6);

    // Gradient penalty: constant scorer -> 1; unit-gradient scorer -> 0.
    let mut tape = Tape::new();
    let real = vec![random_lms(&mut rng, 8)];
    let fake = vec![random_lms(&mut rng, 8)];
    let mut gp_rng = ChaCha8Rng::seed_from_u64(2022);
    let gp_const = gradient_penalty_with(&mut tape, &real, &fake, &mut gp_rng, |tape, _| {
        Ok(tape.scalar(3.0))
    })
    .unwrap();
    let gp_const_err = (tape.scalar_value(gp_const) - 1.0).abs();
    assert!(
        gp_const_err < 1e-6,
        "constant-D penalty {}",
        tape.scalar_value(gp_const)
    );

    // Unit gradient: s(u) = u[0,0] has gradient norm exactly 1.
    let gp_unit = gradient_penalty_with(&mut tape, &real, &fake, &mut gp_rng, |tape, u| {
        let mut pick = ArrayD::zeros(IxDyn(&[8, N_MELS]));
        pick[[0, 0]] = 1.0;
        let mask = tape.leaf(pick);
        let prod = tape.mul(u, mask);
        Ok(tape.sum(prod))
    })
    .unwrap();
    let gp_unit_err = tape.scalar_value(gp_unit).abs();
    assert!(gp_unit_err < 1e-6, "unit-gradient penalty {gp_unit_err}");

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 10.0, "loss unit suite took {secs:.1}s");
    pass(2, "loss-unit-values", format!("2ln2 err {adv_err:.2e}, ln8 err {cls_err:.2e}, gp errs {gp_const_err:.2e}/{gp_unit_err:.2e}, {secs:.1}s < 10s"));
}

// ---------------------------------------------------------------- criterion 3

/// Central finite difference on `n_probe` deterministic parameter picks,
/// compared against the autograd gradient of the same objective.
fn fd_check(
    name: &str,
    stores_in: &[&ParamStore],
    wrt: usize,
    n_probe: usize,
    richardson: bool,
    eval: impl Fn(&[&ParamStore]) -> (f64, Vec<ArrayD<f64>>),
) -> f64 {
    const STEP: f64 = 1e-5;
    let (_, grads) = eval(stores_in);
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let store = stores_in[wrt];
    let mut worst = 0.0f64;
    for probe in 0..n_probe {
        let tensor_idx = probe % store.len();
        let n = store.values()[tensor_idx].len();
        let flat = rng.gen_range(0..n);

        let perturb = |delta: f64| -> f64 {
            let mut bumped = store.clone();
            bumped.values_mut()[tensor_idx].as_slice_mut().unwrap()[flat] += delta;
            let mut alt: Vec<&ParamStore> = stores_in.to_vec();
            alt[wrt] = &bumped;
            eval(&alt).0
        };
        // The penalty objective carries high curvature, so its central
        // difference is Richardson-extrapolated to knock out the quadratic
        // truncation term.
        let cd = |h: f64| (perturb(h) - perturb(-h)) / (2.0 * h);
        let fd = if richardson {
            (4.0 * cd(STEP / 2.0) - cd(STEP)) / 3.0
        } else {
            cd(STEP)
        };
        let auto = grads[tensor_idx].as_slice().unwrap()[flat];
        if fd.abs().max(auto.abs()) < 1e-7 {
            // Both sides vanish; the difference is finite-difference roundoff.
            continue;
        }
        let rel = (fd - auto).abs() / fd.abs().max(auto.abs());
        assert!(
            rel <= 1e-3,
            "{name} probe {probe}: fd {fd} vs autograd {auto} (rel {rel})"
        );
        worst = worst.max(rel);
    }
    worst
}

fn grads_of(tape: &mut Tape, loss: Var, lifted_vars: &[Var]) -> Vec<ArrayD<f64>> {
    let gs = tape.grad(loss, lifted_vars);
    gs.iter().map(|g| tape.value(*g).to_owned()).collect()
}

#[test]
fn criterion_3_gradient_suite() {
    let started = Instant::now();
    let p = ModelProfile::tiny();
    let lam = Lambdas::default();
    let (se, vc, disc, cls) = stores(3030);
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let noisy = random_lms(&mut rng, T);
    let clean = random_lms(&mut rng, T);
    let fake_frozen = random_lms(&mut rng, T);

    // SE denoising MSE wrt SE parameters.
    let w_se = fd_check("se_loss", &[&se], 0, 10, false, |s| {
        let mut tape = Tape::new();
        let l = s[0].lift(&mut tape);
        let x = tape.leaf(noisy.clone());
        let y = tape.leaf(clean.clone());
        let out = se_forward(&mut tape, &l, &p, x);
        let loss = se_loss(&mut tape, out, y).unwrap();
        let grads = grads_of(&mut tape, loss, &l.vars);
        (tape.scalar_value(loss), grads)
    });

    // Eq. 5 reconstruction objective wrt converter parameters.
    let w_vc = fd_check("autovc_loss", &[&vc], 0, 10, false, |s| {
        let mut tape = Tape::new();
        let l = s[0].lift(&mut tape);
        let y = tape.leaf(clean.clone());
        let loss = autovc_loss(&mut tape, &l, &p, y, &attr(0), lam.auto).unwrap();
        let grads = grads_of(&mut tape, loss, &l.vars);
        (tape.scalar_value(loss), grads)
    });

    // Eq. 6 discriminator objective (adversarial + gradient penalty) wrt D.
    let w_d = fd_check("L_D", &[&disc], 0, 10, true, |s| {
        let mut tape = Tape::new();
        let l = s[0].lift(&mut tape);
        let real = tape.leaf(clean.clone());
        let fake = tape.leaf(fake_frozen.clone());
        let (adv_d, _) =
            adversarial_losses(&mut tape, &l, &p, &[(real, attr(0))], &[(fake, attr(1))]).unwrap();
        let mut gp_rng = ChaCha8Rng::seed_from_u64(3031);
        let gp = gradient_penalty(
            &mut tape,
            &l,
            &p,
            &[clean.clone()],
            &[fake_frozen.clone()],
            &[attr(1)],
            &mut gp_rng,
        )
        .unwrap();
        let loss = combine_discriminator_loss(&mut tape, adv_d, gp, &lam);
        let grads = grads_of(&mut tape, loss, &l.vars);
        (tape.scalar_value(loss), grads)
    });

    // Eq. 6 classifier objective wrt C.
    let w_c = fd_check("L_C", &[&cls], 0, 10, false, |s| {
        let mut tape = Tape::new();
        let l = s[0].lift(&mut tape);
        let real = tape.leaf(clean.clone());
        let fake = tape.leaf(fake_frozen.clone());
        let (l_c, _) =
            classification_losses(&mut tape, &l, &p, &[(real, attr(0))], &[(fake, attr(1))])
                .unwrap();
        let grads = grads_of(&mut tape, l_c, &l.vars);
        (tape.scalar_value(l_c), grads)
    });

    // Eq. 6 generator objective wrt the converter, with D, C, SE frozen.
    let w_f = fd_check("L_F", &[&vc, &se, &disc, &cls], 0, 10, false, |s| {
        let mut tape = Tape::new();
        let lvc = s[0].lift(&mut tape);
        let lse = s[1].lift(&mut tape);
        let ldisc = s[2].lift(&mut tape);
        let lcls = s[3].lift(&mut tape);
        let x = tape.leaf(noisy.clone());
        let y = tape.leaf(clean.clone());
        let fake =
            sevc_core::models::generator_forward(&mut tape, &lse, &lvc, &p, x, &attr(0), &attr(1))
                .unwrap();
        let real = tape.leaf(clean.clone());
        let (_, adv_f) = adversarial_losses(
            &mut tape,
            &ldisc,
            &p,
            &[(real, attr(0))],
            &[(fake, attr(1))],
        )
        .unwrap();
        let (_, cls_f) =
            classification_losses(&mut tape, &lcls, &p, &[(real, attr(0))], &[(fake, attr(1))])
                .unwrap();
        let cyc = cycle_loss(&mut tape, &lse, &lvc, &p, x, y, &attr(0), &attr(1)).unwrap();
        let idm = identity_loss(&mut tape, &lse, &lvc, &p, x, y, &attr(0)).unwrap();
        let loss = combine_generator_loss(&mut tape, adv_f, cls_f, cyc, idm, &lam);
        let grads = grads_of(&mut tape, loss, &lvc.vars);
        (tape.scalar_value(loss), grads)
    });

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 120.0, "gradient suite took {secs:.1}s");
    pass(3, "gradient-suite", format!(
        "worst rel err: se {w_se:.2e}, autovc {w_vc:.2e}, L_D {w_d:.2e}, L_C {w_c:.2e}, L_F {w_f:.2e} (all <= 1e-3), {secs:.1}s < 120s"
    ));
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_mcd_oracles() {
    let started = Instant::now();
    let order = CEPSTRUM_ORDER;

    let a = MelCepstra {
        frames: Array2::zeros((1, order + 1)),
        order,
    };
    let mut shifted = Array2::zeros((1, order + 1));
    shifted[[0, 0]] = 9.0;
    shifted[[0, 5]] = 1.0;
    let b = MelCepstra {
        frames: shifted,
        order,
    };
    // Closed form (10/ln 10)*sqrt(2) for a unit sum of squared differences.
    let want = 10.0 / std::f64::consts::LN_10 * 2.0_f64.sqrt();
    let single_err = (mcd(&a, &b).unwrap() - want).abs();
    assert!(single_err < 1e-6);
    assert!(mcd(&a, &a).unwrap().abs() < 1e-12);

    fn brute(a: &MelCepstra, b: &MelCepstra, i: usize, j: usize) -> f64 {
        let d: f64 = (1..=a.order)
            .map(|k| (a.frames[[i, k]] - b.frames[[j, k]]).powi(2))
            .sum::<f64>()
            .sqrt();
        if i == 0 && j == 0 {
            return d;
        }
        let mut best = f64::INFINITY;
        if i > 0 {
            best = best.min(brute(a, b, i - 1, j));
        }
        if j > 0 {
            best = best.min(brute(a, b, i, j - 1));
        }
        if i > 0 && j > 0 {
            best = best.min(brute(a, b, i - 1, j - 1));
        }
        d + best
    }

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for m in 1..=6 {
        for n in 1..=6 {
            let a = MelCepstra {
                frames: Array2::from_shape_fn((m, 4), |_| rng.gen_range(-1.0..1.0)),
                order: 3,
            };
            let b = MelCepstra {
                frames: Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0)),
                order: 3,
            };
            let got = dtw_cost(&a, &b).unwrap();
            let want = brute(&a, &b, m - 1, n - 1);
            worst = worst.max((got - want).abs());
        }
    }
    assert!(worst < 1e-9, "dtw vs brute force: {worst}");

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 30.0, "mcd oracle suite took {secs:.1}s");
    pass(4, "mcd-oracles", format!("single-pair err {single_err:.2e} < 1e-6, dtw worst {worst:.2e}, identity 0, {secs:.1}s < 30s"));
}

// ----------------------------------------------------- corpus/training helpers

fn build_corpus(dir: &std::path::Path, seed: u64) -> (PairedManifest, PairedManifest) {
    let clean = make_toy_corpus(&dir.join("clean"), 4, 6, seed).unwrap();
    let (train_clean, test_clean) = split_by_sentence(&clean, 2, 6).unwrap();
    let render = |kinds: &[NoiseKind]| -> Vec<(String, Waveform)> {
        kinds
            .iter()
            .map(|k| {
                (
                    k.name().to_string(),
                    noise::generate(*k, SAMPLE_RATE as usize, seed),
                )
            })
            .collect()
    };
    let train = synthesize_noisy(
        &train_clean,
        &render(&DEFAULT_TRAIN_NOISES),
        &[5.0, 10.0, 15.0],
        &dir.join("noisy-train"),
    )
    .unwrap();
    let test = synthesize_noisy(
        &test_clean,
        &render(&DEFAULT_TEST_NOISES),
        &[5.0, 10.0, 15.0],
        &dir.join("noisy-test"),
    )
    .unwrap();
    (train, test)
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_reproducibility() {
    let started = Instant::now();
    let cfg = TrainConfig {
        stage2_steps: 8,
        stage3_steps: 8,
        stage4_steps: 4,
        batch_size: 1,
        seed: 505,
        ..TrainConfig::default()
    };

    let run = || {
        let dir = TempDir::new().unwrap();
        let (train, _) = build_corpus(dir.path(), cfg.seed);
        let mut fs_store = FeatureStore::new();
        let (se_ck, log2) = stage_pretrain_se(&cfg, &train, &mut fs_store).unwrap();
        let (joint, log3) = stage_joint_se_vc(&cfg, &train, &mut fs_store, &se_ck).unwrap();
        let (gan, log4) = stage_gan(&cfg, &train, &mut fs_store, &joint).unwrap();
        let ck_path = dir.path().join("final.ck");
        save_checkpoint(&gan, &ck_path).unwrap();
        let bytes = std::fs::read(&ck_path).unwrap();
        let mut log = log2;
        log.extend(log3);
        log.extend(log4);
        (bytes, log)
    };

    let (bytes_a, log_a) = run();
    let (bytes_b, log_b) = run();
    assert!(log_a.losses_match(&log_b, 1e-9), "training logs diverged");
    assert_eq!(bytes_a, bytes_b, "checkpoints are not bit-identical");

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 1200.0, "reproducibility suite took {secs:.1}s");
    pass(
        5,
        "reproducibility",
        format!(
        "{} log records equal at 1e-9, checkpoints bit-identical ({} bytes), {secs:.1}s < 1200s",
        log_a.records.len(),
        bytes_a.len()
    ),
    );
}

// ------------------------------------------------------------ criteria 6 & 7

struct Ablation {
    /// variant -> per-seed mean MCD.
    means: BTreeMap<&'static str, Vec<f64>>,
    baseline: f64,
    /// jt-SE+VC per-noise means, averaged over seeds.
    jt_by_noise: BTreeMap<String, f64>,
}

fn ablation() -> &'static Ablation {
    static RESULT: OnceLock<Ablation> = OnceLock::new();
    RESULT.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let (train, test) = build_corpus(dir.path(), 7);

        let mut means: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
        let mut jt_noise_sums: BTreeMap<String, f64> = BTreeMap::new();
        let seeds = [31, 32, 33];
        for &seed in &seeds {
            let cfg = TrainConfig {
                stage2_steps: 100,
                stage3_steps: 300,
                stage4_steps: 20,
                batch_size: 4,
                seed,
                ..TrainConfig::default()
            };
            let mut fs_store = FeatureStore::new();
            for variant in [
                Variant::Autovc,
                Variant::SeVc,
                Variant::JtSeVc,
                Variant::Estargan,
            ] {
                let (ck, _) = build_variant(variant, &cfg, &train, &mut fs_store).unwrap();
                let report =
                    sevc_core::eval::evaluate_variant(&ck, &test, &mut fs_store, variant.name())
                        .unwrap();
                means
                    .entry(variant.name())
                    .or_default()
                    .push(report.overall_mean());
                if variant == Variant::JtSeVc {
                    for (noise, (mean, _)) in report.by_noise() {
                        *jt_noise_sums.entry(noise).or_insert(0.0) += mean;
                    }
                }
            }
        }
        let mut fs_store = FeatureStore::new();
        let baseline = sevc_core::eval::evaluate_noisy_baseline(&test, &mut fs_store)
            .unwrap()
            .overall_mean();
        let jt_by_noise = jt_noise_sums
            .into_iter()
            .map(|(k, v)| (k, v / seeds.len() as f64))
            .collect();
        Ablation {
            means,
            baseline,
            jt_by_noise,
        }
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn criterion_6_ablation_direction() {
    let started = Instant::now();
    let abl = ablation();
    let jt = mean(&abl.means["jt_se_vc"]);
    let cascade = mean(&abl.means["se_vc"]);
    let autovc = mean(&abl.means["autovc"]);
    let estargan = mean(&abl.means["estargan"]);

    assert!(
        jt < cascade,
        "jt-SE+VC {jt:.3} must beat SE+VC {cascade:.3}"
    );
    for (name, v) in [
        ("autovc", autovc),
        ("se_vc", cascade),
        ("jt_se_vc", jt),
        ("estargan", estargan),
    ] {
        assert!(
            v < abl.baseline,
            "{name} {v:.3} must beat noisy baseline {:.3}",
            abl.baseline
        );
    }
    // Reported, not gated: full-scale results place EStarGAN ahead of jt-SE+VC.
    let gan_ordering = if estargan < jt {
        "holds"
    } else {
        "does not hold"
    };

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 7200.0, "ablation took {secs:.1}s");
    pass(6, "ablation-direction", format!(
        "3-seed means (dB): autovc {autovc:.2}, se_vc {cascade:.2}, jt_se_vc {jt:.2}, estargan {estargan:.2}, noisy baseline {:.2}; jt<se_vc and all<baseline; estargan<jt {gan_ordering} (not gated); {secs:.0}s < 7200s",
        abl.baseline
    ));
}

#[test]
fn criterion_7_per_noise_spread() {
    let abl = ablation();
    assert_eq!(abl.jt_by_noise.len(), 2, "expected the two held-out noises");
    let lo = abl
        .jt_by_noise
        .values()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = abl
        .jt_by_noise
        .values()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    assert!(
        spread < 1.0,
        "per-noise spread {spread:.3} dB must stay under 1.0 dB"
    );
    let detail: Vec<String> = abl
        .jt_by_noise
        .iter()
        .map(|(k, v)| format!("{k} {v:.2} dB"))
        .collect();
    pass(
        7,
        "per-noise-spread",
        format!("{}; spread {spread:.3} dB < 1.0 dB", detail.join(", ")),
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_checkpoint_roundtrip_forward() {
    let cfg = TrainConfig {
        seed: 808,
        ..TrainConfig::default()
    };
    let ck = Checkpoint::init(&cfg, K);
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("probe.ck");
    save_checkpoint(&ck, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();

    let p = ModelProfile::tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let probe = random_lms(&mut rng, T);

    let forward_all = |ck: &Checkpoint| -> Vec<Vec<u64>> {
        let mut tape = Tape::new();
        let lse = ck.se.as_ref().unwrap().lift(&mut tape);
        let lvc = ck.vc.lift(&mut tape);
        let ldisc = ck.disc.lift(&mut tape);
        let lcls = ck.cls.lift(&mut tape);
        let x = tape.leaf(probe.clone());
        let enhanced = se_forward(&mut tape, &lse, &p, x);
        let code = encode(&mut tape, &lvc, &p, x, &attr(0)).unwrap();
        let (_, converted) = autovc_forward(&mut tape, &lvc, &p, x, &attr(0), &attr(1)).unwrap();
        let d = discriminate(&mut tape, &ldisc, &p, x, &attr(1)).unwrap();
        let c = classify(&mut tape, &lcls, &p, x, K).unwrap();
        [enhanced, code, converted, d, c]
            .iter()
            .map(|v| tape.value(*v).iter().map(|x| x.to_bits()).collect())
            .collect()
    };

    let before = forward_all(&ck);
    let after = forward_all(&back);
    assert_eq!(before, after, "forward outputs changed across save/load");
    pass(8, "checkpoint-roundtrip", format!(
        "enhancer, encoder, converter, discriminator, classifier outputs bit-identical on a {T}x{N_MELS} probe"
    ));
}
