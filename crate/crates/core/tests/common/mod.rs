//! Shared oracles for the integration tests.
#![allow(dead_code)]

pub mod criteria;

use coopinit::adversarial::{self, AdversarialConfig, LossKind};
use coopinit::rng::{self, Rng};
use coopinit::{Activation, Descriptor, Generator, Matrix, Mlp, MlpConfig};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-5;

/// `‖a − b‖∞ / max(‖a‖∞, ‖b‖∞, 1e-12)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let inf = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0_f64, |m, x| m.max(x.abs()));
    let diff = inf(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = inf(&mut a.iter().copied()).max(inf(&mut b.iter().copied())).max(1e-12);
    diff / scale
}

pub fn central_diff(f: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|k| {
            q[k] = p[k] + h;
            let up = f(&q);
            q[k] = p[k] - h;
            let down = f(&q);
            q[k] = p[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// True when no `±h` probe changes the activation pattern.
pub fn kink_free(pattern: &dyn Fn(&[f64]) -> Vec<bool>, p: &[f64], h: f64) -> bool {
    let base = pattern(p);
    let mut q = p.to_vec();
    for k in 0..p.len() {
        for s in [h, -h] {
            q[k] = p[k] + s;
            if pattern(&q) != base {
                return false;
            }
        }
        q[k] = p[k];
    }
    true
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FdReport {
    pub instances: usize,
    pub redrawn: usize,
    pub max_rel_err: f64,
}

/// One drawn instance: analytic gradient, scalar function, and (for
/// piecewise-linear nets) the activation pattern the function depends on.
pub struct Instance {
    pub point: Vec<f64>,
    pub analytic: Vec<f64>,
    pub f: Box<dyn Fn(&[f64]) -> f64>,
    pub pattern: Option<Box<dyn Fn(&[f64]) -> Vec<bool>>>,
}

pub fn run_fd(count: usize, seed: u64, mut draw: impl FnMut(&mut Rng) -> Option<Instance>) -> FdReport {
    let mut rng = rng::stream(seed, 77);
    let mut report = FdReport::default();
    while report.instances < count {
        let Some(inst) = draw(&mut rng) else {
            report.redrawn += 1;
            continue;
        };
        if let Some(p) = &inst.pattern {
            if !kink_free(p.as_ref(), &inst.point, FD_STEP) {
                report.redrawn += 1;
                continue;
            }
        }
        let fd = central_diff(inst.f.as_ref(), &inst.point, FD_STEP);
        report.max_rel_err = report.max_rel_err.max(rel_err(&inst.analytic, &fd));
        report.instances += 1;
    }
    report
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * normal(rng))
}

pub fn random_activation(rng: &mut Rng) -> Activation {
    if rng.random::<bool>() {
        Activation::Tanh
    } else {
        Activation::LeakyRelu {
            slope: rng.random_range(0.05..0.5),
        }
    }
}

/// A small random net with non-zero biases.
pub fn random_net(rng: &mut Rng, input: usize, output: usize, act: Activation) -> Mlp {
    let layers = rng.random_range(1..=2);
    let hidden = (0..layers).map(|_| rng.random_range(2..=6)).collect();
    let mut net = Mlp::new(MlpConfig::new(input, hidden, output, act, rng.random())).unwrap();
    let n_layers = net.config().layer_dims().len() - 1;
    for l in 0..n_layers {
        let (_, b) = net.layer_mut(l);
        for v in b.iter_mut() {
            *v = 0.3 * normal(rng);
        }
    }
    net
}

pub fn with_params(net: &Mlp, p: &[f64]) -> Mlp {
    Mlp::from_params(net.config().clone(), p.to_vec()).unwrap()
}

fn is_leaky(net: &Mlp) -> bool {
    matches!(net.config().activation, Activation::LeakyRelu { .. })
}

fn pattern_of(net: &Mlp, batches: &[&Matrix]) -> Vec<bool> {
    batches
        .iter()
        .flat_map(|b| net.forward_cached(b).unwrap().activation_pattern())
        .collect()
}

pub fn param_grad_instance(rng: &mut Rng) -> Option<Instance> {
    let act = random_activation(rng);
    let (din, dout, n) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=5));
    let net = random_net(rng, din, dout, act);
    let x = random_matrix(rng, n, din, 1.0);
    let u = random_matrix(rng, n, dout, 1.0);
    let analytic = net.param_grad(&x, &u).unwrap();
    let point = net.params().to_vec();
    let leaky = is_leaky(&net);
    let (n2, x2) = (net.clone(), x.clone());
    let f = move |p: &[f64]| {
        let out = with_params(&n2, p).forward(&x2).unwrap();
        out.as_slice().iter().zip(u.as_slice()).map(|(a, b)| a * b).sum()
    };
    let pattern = leaky.then(|| {
        Box::new(move |p: &[f64]| pattern_of(&with_params(&net, p), &[&x])) as Box<dyn Fn(&[f64]) -> Vec<bool>>
    });
    Some(Instance {
        point,
        analytic,
        f: Box::new(f),
        pattern,
    })
}

pub fn input_grad_instance(rng: &mut Rng) -> Option<Instance> {
    let act = random_activation(rng);
    let (din, n) = (rng.random_range(1..=3), rng.random_range(1..=5));
    let mut net = random_net(rng, din, 1, act);
    if rng.random::<bool>() {
        net = Mlp::from_params(
            net.config().clone().with_quadratic_confinement(rng.random_range(0.1..2.0)),
            net.params().to_vec(),
        )
        .unwrap();
    }
    let x = random_matrix(rng, n, din, 1.0);
    let analytic = net.input_grad(&x).unwrap().into_vec();
    let point = x.as_slice().to_vec();
    let leaky = is_leaky(&net);
    let net2 = net.clone();
    let f = move |p: &[f64]| {
        let xp = Matrix::from_vec(n, din, p.to_vec()).unwrap();
        net2.forward(&xp).unwrap().as_slice().iter().sum()
    };
    let pattern = leaky.then(|| {
        Box::new(move |p: &[f64]| {
            let xp = Matrix::from_vec(n, din, p.to_vec()).unwrap();
            pattern_of(&net, &[&xp])
        }) as Box<dyn Fn(&[f64]) -> Vec<bool>>
    });
    Some(Instance {
        point,
        analytic,
        f: Box::new(f),
        pattern,
    })
}

pub fn teaching_instance(rng: &mut Rng) -> Option<Instance> {
    let act = random_activation(rng);
    let (dz, dx, n) = (rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(1..=5));
    let g = Generator::new(random_net(rng, dz, dx, act));
    let z = g.sample_latents(n, rng).unwrap();
    let target = random_matrix(rng, n, dx, 1.0);
    let (_, analytic) = g.teaching_loss_grad(&z, &target).unwrap();
    let point = g.net.params().to_vec();
    let leaky = is_leaky(&g.net);
    let (net, z2) = (g.net.clone(), z.clone());
    let f = move |p: &[f64]| {
        let out = with_params(&net, p).forward(&z2).unwrap();
        out.as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64
    };
    let net = g.net.clone();
    let pattern = leaky.then(|| {
        Box::new(move |p: &[f64]| pattern_of(&with_params(&net, p), &[&z])) as Box<dyn Fn(&[f64]) -> Vec<bool>>
    });
    Some(Instance {
        point,
        analytic,
        f: Box::new(f),
        pattern,
    })
}

/// Adversarial configurations covered by the suite: every loss, plus NS
/// with an R1 term.
pub fn adversarial_variants() -> Vec<(&'static str, AdversarialConfig)> {
    let base = |loss| AdversarialConfig {
        loss,
        ..Default::default()
    };
    vec![
        ("ns", base(LossKind::Ns)),
        ("hinge", base(LossKind::Hinge)),
        ("was", base(LossKind::Was)),
        ("was_gp", base(LossKind::WasGp)),
        (
            "ns+r1",
            AdversarialConfig {
                gamma: 0.7,
                ..base(LossKind::Ns)
            },
        ),
    ]
}

/// Hinge losses have kinks at logits ±1.
fn hinge_safe(cfg: &AdversarialConfig, real: &[f64], fake: &[f64]) -> bool {
    cfg.loss != LossKind::Hinge
        || real.iter().all(|s| (s - 1.0).abs() > 1e-3) && fake.iter().all(|s| (s + 1.0).abs() > 1e-3)
}

pub fn d_loss_instance(cfg: AdversarialConfig) -> impl FnMut(&mut Rng) -> Option<Instance> {
    move |rng| {
        let act = random_activation(rng);
        let (din, n) = (rng.random_range(1..=3), rng.random_range(1..=5));
        let d = Descriptor::new(random_net(rng, din, 1, act)).unwrap();
        let real = random_matrix(rng, n, din, 1.0);
        let fake = random_matrix(rng, n, din, 1.0);
        let alphas: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        if !hinge_safe(&cfg, &d.score(&real).unwrap(), &d.score(&fake).unwrap()) {
            return None;
        }
        let analytic = adversarial::d_loss_with_alphas(&cfg, &d, &real, &fake, Some(&alphas))
            .unwrap()
            .grad;
        let point = d.net.params().to_vec();
        let leaky = is_leaky(&d.net);
        let xbar = adversarial::interpolate(&real, &fake, &alphas).unwrap();
        let net = d.net.clone();
        let (r2, f2, a2) = (real.clone(), fake.clone(), alphas.clone());
        let f = move |p: &[f64]| {
            let d = Descriptor::new(with_params(&net, p)).unwrap();
            adversarial::d_loss_with_alphas(&cfg, &d, &r2, &f2, Some(&a2))
                .unwrap()
                .loss
        };
        let net = d.net.clone();
        let pattern = leaky.then(|| {
            Box::new(move |p: &[f64]| pattern_of(&with_params(&net, p), &[&real, &fake, &xbar]))
                as Box<dyn Fn(&[f64]) -> Vec<bool>>
        });
        Some(Instance {
            point,
            analytic,
            f: Box::new(f),
            pattern,
        })
    }
}

pub fn g_loss_instance(cfg: AdversarialConfig) -> impl FnMut(&mut Rng) -> Option<Instance> {
    move |rng| {
        let dx = rng.random_range(1..=3);
        let dz = rng.random_range(1..=4);
        let n = rng.random_range(1..=5);
        let (da, ga) = (random_activation(rng), random_activation(rng));
        let d = Descriptor::new(random_net(rng, dx, 1, da)).unwrap();
        let g = Generator::new(random_net(rng, dz, dx, ga));
        let z = g.sample_latents(n, rng).unwrap();
        let analytic = adversarial::g_loss(&cfg, &d, &g, &z).unwrap().grad;
        let point = g.net.params().to_vec();
        let leaky = is_leaky(&d.net) || is_leaky(&g.net);
        let (dn, gn, z2) = (d.clone(), g.net.clone(), z.clone());
        let f = move |p: &[f64]| {
            let g = Generator::new(with_params(&gn, p));
            adversarial::g_loss(&cfg, &dn, &g, &z2).unwrap().loss
        };
        let gn = g.net.clone();
        let pattern = leaky.then(|| {
            Box::new(move |p: &[f64]| {
                let g = with_params(&gn, p);
                let cache = g.forward_cached(&z).unwrap();
                let mut pat = cache.activation_pattern();
                pat.extend(pattern_of(&d.net, &[cache.output()]));
                pat
            }) as Box<dyn Fn(&[f64]) -> Vec<bool>>
        });
        Some(Instance {
            point,
            analytic,
            f: Box::new(f),
            pattern,
        })
    }
}

pub fn r1_instance(rng: &mut Rng) -> Option<Instance> {
    let act = random_activation(rng);
    let (din, n) = (rng.random_range(1..=3), rng.random_range(1..=5));
    let d = Descriptor::new(random_net(rng, din, 1, act)).unwrap();
    let real = random_matrix(rng, n, din, 1.0);
    let analytic = adversarial::r1_penalty(&d, &real).unwrap().grad;
    let point = d.net.params().to_vec();
    let leaky = is_leaky(&d.net);
    let (net, r2) = (d.net.clone(), real.clone());
    let f = move |p: &[f64]| {
        let d = Descriptor::new(with_params(&net, p)).unwrap();
        adversarial::r1_penalty(&d, &r2).unwrap().loss
    };
    let net = d.net.clone();
    let pattern = leaky.then(|| {
        Box::new(move |p: &[f64]| pattern_of(&with_params(&net, p), &[&real])) as Box<dyn Fn(&[f64]) -> Vec<bool>>
    });
    Some(Instance {
        point,
        analytic,
        f: Box::new(f),
        pattern,
    })
}

/// Every gradient the suite covers, by name, at `count` instances each.
pub fn gradient_suite(count: usize) -> Vec<(String, FdReport)> {
    let mut out = vec![
        ("param_grad".to_string(), run_fd(count, 1, param_grad_instance)),
        ("input_grad".to_string(), run_fd(count, 2, input_grad_instance)),
        ("teaching_loss_grad".to_string(), run_fd(count, 3, teaching_instance)),
        ("r1_penalty".to_string(), run_fd(count, 4, r1_instance)),
    ];
    for (i, (name, cfg)) in adversarial_variants().into_iter().enumerate() {
        out.push((format!("d_loss[{name}]"), run_fd(count, 10 + i as u64, d_loss_instance(cfg))));
        out.push((format!("g_loss[{name}]"), run_fd(count, 20 + i as u64, g_loss_instance(cfg))));
    }
    out
}
