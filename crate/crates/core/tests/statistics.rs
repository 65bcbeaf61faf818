//! Statistical oracles for the samplers, the chain and the likelihood gradient.

mod common;

use coopinit::ebm::{exact_loglik_grad_oracle, GridSpec};
use coopinit::metrics;
use coopinit::rng;
use coopinit::trainer::{self, ModelConfig, RunSetup, TrainConfig};
use coopinit::{DatasetSpec, Descriptor, LangevinConfig, Mlp, MlpConfig};
use common::criteria::{self, normal_cdf};

#[test]
fn ring_density_integrates_to_one() {
    let spec = DatasetSpec::canonical_ring();
    let bins = 1000;
    let h = 10.0 / bins as f64;
    let mut total = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let x = [-5.0 + (i as f64 + 0.5) * h, -5.0 + (j as f64 + 0.5) * h];
            total += spec.log_density(&x).exp() * h * h;
        }
    }
    assert!((total - 1.0).abs() < 1e-3, "{total}");
}

#[test]
fn ring_histogram_matches_the_density_in_total_variation() {
    let spec = DatasetSpec::canonical_ring();
    let (lo, hi, bins) = (-2.5, 2.5, 50);
    let w = (hi - lo) / bins as f64;
    let n = 1_000_000;
    let x = spec.sample_batch(n, &mut rng::stream(17, 0)).unwrap();
    let mut counts = vec![0usize; bins * bins];
    let mut outside = 0usize;
    for row in x.iter_rows() {
        let (i, j) = (((row[0] - lo) / w).floor(), ((row[1] - lo) / w).floor());
        if (0.0..bins as f64).contains(&i) && (0.0..bins as f64).contains(&j) {
            counts[i as usize * bins + j as usize] += 1;
        } else {
            outside += 1;
        }
    }
    // Exact bin masses: each component factorizes over the axes.
    let centers = spec.mode_centers();
    let sigma = spec.sigma();
    let axis_mass = |mu: f64, k: usize| {
        let a = lo + k as f64 * w;
        normal_cdf((a + w - mu) / sigma) - normal_cdf((a - mu) / sigma)
    };
    let k = centers.rows() as f64;
    let mut tv = 0.0;
    let mut inside_mass = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let p: f64 = centers.iter_rows().map(|c| axis_mass(c[0], i) * axis_mass(c[1], j)).sum::<f64>() / k;
            inside_mass += p;
            tv += (counts[i * bins + j] as f64 / n as f64 - p).abs();
        }
    }
    tv += (outside as f64 / n as f64 - (1.0 - inside_mass)).abs();
    assert!(0.5 * tv < 0.02, "{}", 0.5 * tv);
}

#[test]
fn ring_occupancy_is_multinomial() {
    let spec = DatasetSpec::ring(8, 2.0, 0.02);
    let n = 80_000;
    let x = spec.sample_batch(n, &mut rng::stream(18, 0)).unwrap();
    let cov = metrics::mode_coverage(&x, &spec.mode_centers(), 0.02, 10.0, Some(1)).unwrap();
    let p = 1.0 / 8.0;
    let band = 3.0 * (n as f64 * p * (1.0 - p)).sqrt();
    for &c in &cov.per_mode_counts {
        assert!((c as f64 - n as f64 * p).abs() <= band, "{:?}", cov.per_mode_counts);
    }
}

#[test]
fn long_chains_pass_a_ks_test_against_the_gibbs_law() {
    let s = criteria::langevin_stationarity(200, 100_000, 1_000, 2).unwrap();
    assert!(s.ks < 0.02, "KS {}", s.ks);
    assert!(criteria::stationarity_verdict(&s).pass);
}

#[test]
fn likelihood_gradient_is_unbiased_against_enumeration() {
    let v = criteria::gradient_unbiasedness(4).unwrap();
    assert!(v.pass, "{}", v.detail);
}

#[test]
fn uniform_gibbs_oracle_is_data_phase_minus_flat_average() {
    let spec = criteria::line_dataset();
    // Hidden layer random, output weights zero: constant score, non-zero gradient.
    let cfg = MlpConfig::new(1, vec![6], 1, coopinit::Activation::Tanh, 3);
    let mut net = Mlp::new(cfg).unwrap();
    let (w, _) = net.layer_mut(1);
    w.iter_mut().for_each(|v| *v = 0.0);
    let (_, b) = net.layer_mut(0);
    b.iter_mut().enumerate().for_each(|(i, v)| *v = 0.4 * i as f64 - 1.0);
    let d = Descriptor::new(net).unwrap();
    let grid = GridSpec::new(-8.0, 8.0, 512).with_boundary_tolerance(1.0);
    let oracle = exact_loglik_grad_oracle(&d, &spec, grid).unwrap();

    let points = grid.points();
    let dens: Vec<f64> = points.iter_rows().map(|x| spec.log_density(x).exp()).collect();
    let z: f64 = dens.iter().sum();
    let mut direct = vec![0.0; d.net.param_count()];
    for (i, x) in points.iter_rows().enumerate() {
        let one = coopinit::Matrix::from_rows(&[x]).unwrap();
        let g = d.mean_param_grad(&one, None).unwrap();
        for (acc, gk) in direct.iter_mut().zip(&g) {
            *acc += (dens[i] / z - 1.0 / 512.0) * gk;
        }
    }
    assert!(common::rel_err(&oracle, &direct) < 1e-8);
    assert!(direct.iter().any(|v| v.abs() > 1e-3));
}

fn line_setup(seed: u64, sigma: f64) -> RunSetup {
    let mut train = TrainConfig {
        n_coop: 200_000,
        n_adv: 0,
        seed,
        eval_every: 50_000,
        ..TrainConfig::default()
    };
    train.langevin = LangevinConfig {
        eta: 0.1,
        ..LangevinConfig::default()
    };
    RunSetup {
        train,
        models: ModelConfig::toy(1, seed),
        dataset: DatasetSpec::line_1d(3, 2.0, sigma),
    }
}

#[test]
fn cooperative_training_on_the_line_learns_all_modes() {
    // Narrower modes than the chain noise (√(2η) ≈ 0.45) make the descriptor diverge.
    let setup = line_setup(0, 0.5);
    let out = trainer::run(&setup, &mut ()).unwrap();
    let last = out.records.last().unwrap();
    assert_eq!(last.modes_covered, 3, "{:?}", out.records);

    // The trained descriptor prefers data over far-away points.
    let real = setup.dataset.sample_batch(1_000, &mut rng::stream(1, 1)).unwrap();
    let far = coopinit::Matrix::from_fn(1_000, 1, |i, _| if i % 2 == 0 { 6.0 } else { -6.0 });
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let d = &out.state.descriptor;
    assert!(mean(d.score(&real).unwrap()) > mean(d.score(&far).unwrap()));
}

#[test]
fn exact_gradient_ascent_learns_the_same_modes() {
    let setup = line_setup(0, 0.5);
    let mut d = Descriptor::new(Mlp::new(setup.models.descriptor.clone()).unwrap()).unwrap();
    let mut adam = coopinit::AdamState::new(d.net.param_count(), coopinit::AdamParams::default().with_lr(1e-2));
    let grid = GridSpec::new(-8.0, 8.0, 512).with_boundary_tolerance(1.0);
    for _ in 0..300 {
        let g = exact_loglik_grad_oracle(&d, &setup.dataset, grid).unwrap();
        adam.step(d.net.params_mut(), &g, true).unwrap();
    }
    let gibbs = coopinit::GibbsGrid::new(&d, grid).unwrap();
    let x = gibbs.sample(2_000, &mut rng::stream(2, 2));
    let cov = metrics::mode_coverage(&x, &setup.dataset.mode_centers(), 0.5, 3.0, None).unwrap();
    assert_eq!(cov.modes_covered, 3, "{:?}", cov);
}
