mod common;

use common::oracles::{moments, oracle_samples, sampler_moments, standard_errors, TARGETS};
use molgen::latentdiff::{
    ancestral_step, cfg_predict, q_sample, respaced_ladder, sample_chains, Condition, Denoiser, DenoiserConfig,
    NoiseSchedule, ScheduleKind,
};
use numcore::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn q_sample_marginal_moments() {
    let schedule = NoiseSchedule::new(ScheduleKind::Cosine, 100).unwrap();
    let t = 50;
    let a = schedule.alpha_bar(t);
    let z0 = [1.3, -0.7];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws: Vec<Vec<f64>> = (0..100_000)
        .map(|_| {
            let eps: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
            q_sample(&schedule, &z0, t, &eps).unwrap()
        })
        .collect();
    for d in 0..2 {
        let (mean, var, n) = moments(draws.iter().map(|z| z[d]));
        let (se_m, se_v) = standard_errors(1.0 - a, n);
        assert!((mean - a.sqrt() * z0[d]).abs() < 3.0 * se_m, "dim {d}: mean {mean}");
        assert!((var - (1.0 - a)).abs() < 3.0 * se_v, "dim {d}: var {var}");
    }
}

#[test]
fn q_sample_endpoints() {
    let schedule = NoiseSchedule::new(ScheduleKind::Cosine, 100).unwrap();
    assert_eq!(q_sample(&schedule, &[0.4], 0, &[9.0]).unwrap(), vec![0.4]);
    assert!(q_sample(&schedule, &[0.4], 101, &[0.0]).is_err());
}

#[test]
fn ancestral_step_by_hand() {
    let schedule = NoiseSchedule::from_alpha_bars(vec![1.0, 0.9, 0.8]).unwrap();
    // α_t = 0.8 / 0.9, β_t = 1 − α_t
    let alpha_t: f64 = 0.8 / 0.9;
    let beta_t = 1.0 - alpha_t;
    let c_pred = 0.9f64.sqrt() * beta_t / (1.0 - 0.8);
    let c_z = alpha_t.sqrt() * (1.0 - 0.9) / (1.0 - 0.8);
    let expected = c_pred * 0.5 + c_z * 1.0;
    let got = ancestral_step(&schedule, &[1.0], &[0.5], 2, &[0.0]).unwrap();
    assert!((got[0] - expected).abs() < 1e-12, "{} vs {expected}", got[0]);

    let sigma = ((1.0 - 0.9) * beta_t / (1.0 - 0.8)).sqrt();
    let noisy = ancestral_step(&schedule, &[1.0], &[0.5], 2, &[1.0]).unwrap();
    assert!((noisy[0] - expected - sigma).abs() < 1e-12);
}

#[test]
fn clean_latents_map_to_the_previous_signal_level() {
    // from z_t = √ᾱ_t x0 with a perfect prediction, the noise-free step
    // lands on √ᾱ_s x0
    for kind in [ScheduleKind::Cosine, ScheduleKind::Linear] {
        let schedule = NoiseSchedule::new(kind, 100).unwrap();
        let ladder = respaced_ladder(100, 30).unwrap();
        for pair in ladder.windows(2) {
            let (t, s) = (pair[0], pair[1]);
            let k = schedule.coefficients(s, t).unwrap();
            let sum = k.pred + k.zt * schedule.alpha_bar(t).sqrt();
            assert!((sum - schedule.alpha_bar(s).sqrt()).abs() < 1e-12, "{kind:?} {t}->{s}");
        }
    }
}

#[test]
fn first_step_is_noise_free() {
    for kind in [ScheduleKind::Cosine, ScheduleKind::Linear] {
        let schedule = NoiseSchedule::new(kind, 100).unwrap();
        assert_eq!(schedule.sigma2(0, 1).unwrap(), 0.0);
        assert_eq!(schedule.coefficients(0, 1).unwrap().sigma, 0.0);
        assert_eq!(schedule.coefficients(0, 37).unwrap().pred, 1.0);
        assert_eq!(schedule.coefficients(0, 37).unwrap().zt, 0.0);
    }
}

fn denoiser() -> Denoiser {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    Denoiser::new(
        DenoiserConfig {
            latent_dim: 4,
            cond_dim: 3,
            hidden: 16,
            layers: 3,
        },
        &mut rng,
    )
    .unwrap()
}

#[test]
fn unit_guidance_is_the_conditional_pass() {
    let den = denoiser();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let zt = numcore::init::normal_matrix(&mut rng, 3, 4, 1.0);
    let rows = [[0.3, -1.0, 2.0], [0.0, 0.5, 0.5]];
    let cond = [Condition::Text(&rows[0]), Condition::Null, Condition::Text(&rows[1])];
    for t in [1, 50, 100] {
        let guided = cfg_predict(&den, &zt, t, &cond, 1.0).unwrap();
        let plain = den.predict(&zt, t, &cond).unwrap();
        assert_eq!(guided.data(), plain.data());
    }
}

#[test]
fn guidance_mixes_both_passes() {
    let den = denoiser();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let zt = numcore::init::normal_matrix(&mut rng, 2, 4, 1.0);
    let row = [1.0, 2.0, -1.0];
    let cond = [Condition::Text(&row), Condition::Text(&row)];
    let c = den.predict(&zt, 10, &cond).unwrap();
    let u = den.predict(&zt, 10, &[Condition::Null, Condition::Null]).unwrap();
    let g = cfg_predict(&den, &zt, 10, &cond, 2.0).unwrap();
    for ((g, c), u) in g.data().iter().zip(c.data()).zip(u.data()) {
        assert!((g - (2.0 * c - u)).abs() < 1e-12);
    }
    assert_eq!(cfg_predict(&den, &zt, 10, &cond, 0.0).unwrap().data(), u.data());
}

#[test]
fn gaussian_oracle_recovers_the_data_distribution() {
    let schedule = NoiseSchedule::new(ScheduleKind::Cosine, 1000).unwrap();
    let ladder = respaced_ladder(1000, 1000).unwrap();
    let out = oracle_samples(&schedule, &ladder, 10_000, 11);
    for (d, &(m, s2)) in TARGETS.iter().enumerate() {
        let (mean, var, n) = moments(out.iter().map(|z| z[d]));
        let (se_m, se_v) = standard_errors(s2, n);
        assert!((mean - m).abs() < 3.0 * se_m, "dim {d}: mean {mean} vs {m}");
        assert!((var - s2).abs() < 3.0 * se_v, "dim {d}: var {var} vs {s2}");
    }
}

#[test]
fn respaced_sampler_matches_its_exact_moments() {
    let schedule = NoiseSchedule::new(ScheduleKind::Cosine, 100).unwrap();
    let ladder = respaced_ladder(100, 50).unwrap();
    let out = oracle_samples(&schedule, &ladder, 10_000, 12);
    for (d, &(m, s2)) in TARGETS.iter().enumerate() {
        let (em, ev) = sampler_moments(&schedule, &ladder, m, s2);
        let (mean, var, n) = moments(out.iter().map(|z| z[d]));
        let (se_m, se_v) = standard_errors(ev, n);
        assert!((mean - em).abs() < 3.0 * se_m, "dim {d}: mean {mean} vs {em}");
        assert!((var - ev).abs() < 3.0 * se_v, "dim {d}: var {var} vs {ev}");
    }
}

#[test]
fn point_mass_oracle_lands_exactly() {
    let schedule = NoiseSchedule::new(ScheduleKind::Cosine, 100).unwrap();
    let ladder = respaced_ladder(100, 50).unwrap();
    let target = [0.25, -2.0];
    let out = sample_chains(&schedule, &ladder, 2, 300, 9, |zt, _, _| {
        Ok(Tensor::from_fn(zt.rows(), 2, |_, j| target[j]))
    })
    .unwrap();
    for z in out {
        for (a, b) in z.iter().zip(target) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn chains_depend_only_on_seed_and_index() {
    let schedule = NoiseSchedule::new(ScheduleKind::Cosine, 100).unwrap();
    let ladder = respaced_ladder(100, 10).unwrap();
    let a = oracle_samples(&schedule, &ladder, 600, 5);
    let b = oracle_samples(&schedule, &ladder, 300, 5);
    assert_eq!(&a[..300], &b[..]);
    assert_ne!(oracle_samples(&schedule, &ladder, 1, 6)[0], a[0]);
}
