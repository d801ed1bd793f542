//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one result line; exits non-zero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use hystup::dataset::generate_dataset;
use hystup::dynamics::{
    integrate, BilinearSpring, GroundMotion, Hysteresis, InitialConditions, LinearSdof,
    LinearSpring, TakedaSpring,
};
use hystup::mcmc::{init_replicas, FnTarget, ProposalScales};
use hystup::posterior::{burn_thin, summarize, PosteriorSummary};
use hystup::seeding::derive_seed;
use hystup::signal::{compute_frf, synth_motion};
use hystup::simulator::Observation;
use hystup::vae::{standard_normal, train, Workspace};
use hystup::{
    latent_log_likelihood, run_replica_exchange, CandidateLikelihood, Dataset, DatasetConfig,
    FeatureSpec, LatentGaussian, LogLikelihood, McmcConfig, ModelSpec, ParamRanges, SimContext,
    SynthSpec, TrainConfig, Vae, VaeArch,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// ---------------------------------------------------------------- 1

fn ln_normal(z: f64, mu: f64, sigma: f64) -> f64 {
    let u = (z - mu) / sigma;
    -0.5 * u * u - sigma.ln() - 0.5 * (2.0 * PI).ln()
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * eps {
        return left + right + diff / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, eps: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = h / 6.0 * (f0 + 4.0 * fm + f1);
            simpson(f, x0, x1, f0, fm, f1, whole, eps / pieces as f64, 40)
        })
        .sum()
}

/// Log of the integral by quadrature, shifted by the integrand's maximum.
fn log_integral_by_quadrature(mu: [f64; 2], sigma: [f64; 2]) -> f64 {
    let g = |z: f64| ln_normal(z, mu[0], sigma[0]) + ln_normal(z, mu[1], sigma[1]) - ln_normal(z, 0.0, 1.0);
    let (mut lo, mut hi) = (-20.0, 20.0);
    for _ in 0..200 {
        let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if g(a) < g(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let z_star = 0.5 * (lo + hi);
    let g_star = g(z_star);
    let half = 40.0 * sigma[0].max(sigma[1]);
    let f = |z: f64| (g(z) - g_star).exp();
    g_star + integrate_adaptive(&f, z_star - half, z_star + half, 64, 1e-13).ln()
}

fn likelihood_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let prior = LatentGaussian::<f64>::standard(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mu = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let sigma = [rng.random_range(0.05..0.7), rng.random_range(0.05..0.7)];
        let obs = LatentGaussian {
            mu: vec![mu[0]],
            sigma: vec![sigma[0]],
        };
        let sim = LatentGaussian {
            mu: vec![mu[1]],
            sigma: vec![sigma[1]],
        };
        let closed = match latent_log_likelihood(&obs, &sim, &prior) {
            Ok(LogLikelihood::Valid(v)) => v,
            other => return outcome(false, format!("{mu:?} {sigma:?} gave {other:?}")),
        };
        let quad = log_integral_by_quadrature(mu, sigma);
        worst = worst.max(((closed - quad).exp() - 1.0).abs());
    }
    outcome(worst < 1e-6, format!("max relative error {worst:.2e} over 1000 triples"))
}

// ---------------------------------------------------------------- 2

fn free_vibration_error(dt: f64) -> f64 {
    let (m, k, zeta, u0) = (1.0, (2.0 * PI).powi(2), 0.05, 0.01);
    let model = LinearSdof::new(vec![m], vec![LinearSpring { k }], zeta).unwrap();
    let n = (5.0 / dt).round() as usize + 1;
    let ground = GroundMotion::new(dt, vec![0.0; n], "rest").unwrap();
    let init = InitialConditions {
        disp: vec![u0],
        vel: vec![0.0],
    };
    let rec = integrate(&model, &ground, &init).unwrap();
    let w = (k / m).sqrt();
    let wd = w * (1.0 - zeta * zeta).sqrt();
    let err = rec.rel_disp[0]
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let t = i as f64 * dt;
            let exact = u0 * (-zeta * w * t).exp() * ((wd * t).cos() + zeta * w / wd * (wd * t).sin());
            (u - exact).abs()
        })
        .fold(0.0, f64::max);
    err / u0
}

fn dynamics_oracle() -> Outcome {
    let coarse = free_vibration_error(0.001);
    let fine = free_vibration_error(0.0005);
    let ratio = coarse / fine;
    outcome(
        coarse < 0.005 && ratio >= 3.5,
        format!("peak error {:.3}% at dt=0.001 s, halving dt reduces it {ratio:.2}x", 100.0 * coarse),
    )
}

// ---------------------------------------------------------------- 3

fn frf_oracle() -> Outcome {
    let (f0, zeta) = (2.0, 0.05);
    // Band filtering leaves a faint ripple after the envelope ends; taper it
    // off and append silence so the oscillator is at rest when the record ends.
    let spec = SynthSpec {
        fs: 200.0,
        ..SynthSpec::default()
    };
    let raw = synth_motion(&spec, 11).unwrap();
    let end = spec.envelope.2 * spec.duration;
    let mut samples: Vec<f64> = raw
        .samples
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let t = i as f64 * raw.dt;
            let w = ((end - t) / 2.0).clamp(0.0, 1.0);
            a * (0.5 - 0.5 * (PI * w).cos())
        })
        .collect();
    samples.resize(samples.len() + (30.0 * spec.fs) as usize, 0.0);
    let motion = GroundMotion::new(raw.dt, samples, "tapered").unwrap();
    let w0 = 2.0 * PI * f0;
    let model = LinearSdof::new(vec![1.0], vec![LinearSpring { k: w0 * w0 }], zeta).unwrap();
    let rec = integrate(&model, &motion, &InitialConditions::default()).unwrap();
    let frf = compute_frf(&motion, &rec.abs_acc[0], None).unwrap();
    let mut worst: f64 = 0.0;
    let mut bins = 0;
    for k in 0..frf.values.len() {
        let f = frf.frequency(k);
        if !(0.5..=4.0).contains(&f) {
            continue;
        }
        let w = 2.0 * PI * f;
        let num = (w0 * w0, 2.0 * zeta * w0 * w);
        let den = (w0 * w0 - w * w, 2.0 * zeta * w0 * w);
        let exact = ((num.0 * num.0 + num.1 * num.1) / (den.0 * den.0 + den.1 * den.1)).sqrt();
        worst = worst.max(rel_err(frf.values[k].norm(), exact));
        bins += 1;
    }
    outcome(worst < 0.02, format!("max amplitude error {:.2}% over {bins} bins in 0.5-4 Hz", 100.0 * worst))
}

// ---------------------------------------------------------------- 4

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for net in 0..20 {
        let depth = rng.random_range(1..=3);
        let arch = VaeArch {
            input_dim: rng.random_range(2..12),
            z_dim: rng.random_range(1..5),
            hidden: (0..depth).map(|_| rng.random_range(2..9)).collect(),
            leaky_slope: 0.01,
        };
        let batch = rng.random_range(1..4);
        let vae = Vae::<f64>::init(arch.clone(), net).unwrap();
        let x: Vec<f64> = standard_normal(&mut rng, arch.input_dim * batch);
        let eps: Vec<f64> = standard_normal(&mut rng, arch.z_dim * batch);
        let mut ws = Workspace::default();
        let mut grad = vec![0.0; vae.n_params()];
        vae.loss_and_grad(&x, &eps, 1.0, &mut grad, &mut ws).unwrap();
        let mut probe = vae.clone();
        let mut scratch = vec![0.0; vae.n_params()];
        let h = 1e-4;
        for i in 0..vae.n_params() {
            let orig = probe.params[i];
            let mut central = |step: f64| {
                probe.params[i] = orig + step;
                let up = probe.loss_and_grad(&x, &eps, 1.0, &mut scratch, &mut ws).unwrap().total;
                probe.params[i] = orig - step;
                let dn = probe.loss_and_grad(&x, &eps, 1.0, &mut scratch, &mut ws).unwrap().total;
                probe.params[i] = orig;
                (up - dn) / (2.0 * step)
            };
            // The narrow step loses tiny gradients to round-off, the
            // extrapolated wide one breaks when a leaky-ReLU kink falls inside
            // its stencil. A wrong gradient disagrees with both.
            let narrow = central(h / 10.0);
            let wide = (4.0 * central(h / 2.0) - central(h)) / 3.0;
            let err = [narrow, wide]
                .map(|fd| (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6))
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(err);
            checked += 1;
        }
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e} over {checked} parameters of 20 networks"))
}

// ---------------------------------------------------------------- 5

/// Path through `turns` in steps of at most `scale / 40`, landing exactly on
/// every turning point.
fn path(turns: &[f64], scale: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut at = 0.0;
    for &to in turns {
        let n = ((to - at).abs() / scale * 40.0).ceil().max(1.0) as usize;
        for i in 1..n {
            out.push(at + (to - at) * i as f64 / n as f64);
        }
        out.push(to);
        at = to;
    }
    out
}

fn forces<H: Hysteresis<f64>>(h: &H, path: &[f64]) -> Vec<f64> {
    let mut st = h.initial_state();
    path.iter()
        .map(|&d| {
            let (f, _, next) = h.trial(&st, d);
            st = next;
            f
        })
        .collect()
}

fn work(path: &[f64], f: &[f64]) -> f64 {
    let mut prev = (0.0, 0.0);
    let mut w = 0.0;
    for (&d, &fi) in path.iter().zip(f) {
        w += 0.5 * (fi + prev.1) * (d - prev.0);
        prev = (d, fi);
    }
    w
}

fn random_takeda(rng: &mut ChaCha8Rng) -> TakedaSpring<f64> {
    TakedaSpring {
        k: rng.random_range(20.0..200.0),
        d_c: rng.random_range(0.25..2.0),
        d_y: rng.random_range(2.01..8.0),
        alpha1: rng.random_range(0.05..0.25),
        alpha2: rng.random_range(0.0..0.05),
        beta: rng.random_range(0.0..1.0),
        gamma: rng.random_range(0.0..1.0),
        slip: true,
    }
}

/// Work of the second traversal of the symmetric cycle `0 -> a -> -a -> 0`.
fn repeated_cycle_work<H: Hysteresis<f64>>(h: &H, a: f64, scale: f64) -> f64 {
    let once = path(&[a, -a, 0.0], scale);
    let twice = path(&[a, -a, 0.0, a, -a, 0.0], scale);
    let f = forces(h, &twice);
    work(&twice, &f) - work(&once, &f[..once.len()])
}

fn hysteresis_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_diff: f64 = 0.0;
    for _ in 0..100 {
        let mut h = random_takeda(&mut rng);
        h.gamma = 0.0;
        let turns: Vec<f64> = (0..rng.random_range(4..12))
            .map(|_| rng.random_range(-4.0..4.0) * h.d_y)
            .collect();
        let p = path(&turns, h.d_y);
        let with = forces(&h, &p);
        let without = forces(&h.without_slip(), &p);
        let scale = h.reference_force();
        for (a, b) in with.iter().zip(&without) {
            worst_diff = worst_diff.max((a - b).abs() / scale);
        }
    }
    let (mut neg_takeda, mut neg_bilinear) = (0, 0);
    let (mut min_takeda, mut min_bilinear) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..1000 {
        let h = random_takeda(&mut rng);
        let a = rng.random_range(0.1..4.0) * h.d_y;
        let w = repeated_cycle_work(&h, a, h.d_y) / (h.k * h.d_y * h.d_y);
        min_takeda = min_takeda.min(w);
        if w < -1e-9 {
            neg_takeda += 1;
        }
        let b = BilinearSpring {
            k: rng.random_range(1.0..100.0),
            d_y: rng.random_range(0.1..2.0),
            alpha: rng.random_range(0.0..0.5),
        };
        let turns: Vec<f64> = (0..2)
            .map(|_| rng.random_range(-4.0..4.0) * b.d_y)
            .chain([0.0])
            .collect();
        let prefix: Vec<f64> = (0..rng.random_range(0..6))
            .map(|_| rng.random_range(-4.0..4.0) * b.d_y)
            .chain([0.0])
            .collect();
        let head = path(&prefix, b.d_y);
        let full = path(&[prefix.clone(), turns].concat(), b.d_y);
        let f = forces(&b, &full);
        let w = (work(&full, &f) - work(&head, &f[..head.len()])) / (b.k * b.d_y * b.d_y);
        min_bilinear = min_bilinear.min(w);
        if w < -1e-9 {
            neg_bilinear += 1;
        }
    }
    outcome(
        worst_diff <= 1e-12 && neg_takeda == 0 && neg_bilinear == 0,
        format!(
            "gamma=0 max force difference {worst_diff:.1e} of the reference force; \
             negative cycles takeda {neg_takeda}/1000 (min {min_takeda:.3e}), \
             bilinear {neg_bilinear}/1000 (min {min_bilinear:.3e})"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn sampler_oracle() -> Outcome {
    let mean = [1.0, -2.0];
    let sd = [0.5, 2.0];
    let rho = 0.5;
    let det = 1.0 - rho * rho;
    let target = FnTarget(move |th: &[f64]| {
        let u = (th[0] - mean[0]) / sd[0];
        let v = (th[1] - mean[1]) / sd[1];
        Ok(LogLikelihood::Valid(-0.5 * (u * u - 2.0 * rho * u * v + v * v) / det))
    });
    let bounds = ParamRanges::new(&[
        ("x", mean[0] - 8.0 * sd[0], mean[0] + 8.0 * sd[0]),
        ("y", mean[1] - 8.0 * sd[1], mean[1] + 8.0 * sd[1]),
    ]);
    let cfg = McmcConfig {
        temperatures: vec![1.0, 2.0, 4.0, 8.0],
        steps_per_exchange: 100,
        n_exchanges: 250,
        burn_in: 2500,
        thin: 1,
        proposal_scales: ProposalScales::Uniform(0.15),
        scale_with_temperature: false,
        seed: 6,
    };
    let start = [mean[0] + 2.0 * sd[0], mean[1] - 2.0 * sd[1]];
    let chains = match run_replica_exchange(&cfg, &target, &bounds, &start) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("sampler aborted: {}", e.error)),
    };
    let total = chains.len() * chains.replicas();
    let mut pass = total >= 100_000;
    let mut parts = Vec::new();
    for j in 0..2 {
        let xs = burn_thin(&chains.series(0, j), cfg.burn_in, 1).unwrap();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let batches = 50;
        let size = xs.len() / batches;
        let means: Vec<f64> = xs
            .chunks_exact(size)
            .map(|c| c.iter().sum::<f64>() / size as f64)
            .collect();
        let bm = means.iter().sum::<f64>() / means.len() as f64;
        let se = (means.iter().map(|x| (x - bm).powi(2)).sum::<f64>() / (means.len() - 1) as f64
            / means.len() as f64)
            .sqrt();
        let z = (m - mean[j]).abs() / se;
        let var_err = rel_err(var, sd[j] * sd[j]);
        pass &= z < 3.0 && var_err < 0.10;
        parts.push(format!("mean off by {z:.2} SE, variance off by {:.1}%", 100.0 * var_err));
    }
    outcome(pass, format!("{total} steps; x: {}; y: {}", parts[0], parts[1]))
}

// ---------------------------------------------------------------- 7 and 8

const MASTER_SEED: u64 = 7;

struct Scaled {
    ctx: SimContext<f64>,
    clean: SimContext<f64>,
    ranges: ParamRanges,
    dataset: Dataset,
    vae: Vae<f32>,
    setup: String,
}

fn features() -> FeatureSpec {
    FeatureSpec {
        fft_len: Some(10_000),
        ..FeatureSpec::default()
    }
}

fn observe(clean: &SimContext<f64>, target: &[f64]) -> Observation<f64> {
    clean.observe(target, 0.1, derive_seed(MASTER_SEED, &[2])).unwrap()
}

/// Shared by both scaled criteria: one motion, one noisy input realisation,
/// one 5000-sample dataset and one trained network.
fn scaled() -> &'static Scaled {
    static CELL: OnceLock<Scaled> = OnceLock::new();
    CELL.get_or_init(|| {
        let t0 = Instant::now();
        let model = ModelSpec::BilinearSdof { zeta: 0.05 };
        let motion = synth_motion(&SynthSpec::default(), derive_seed(MASTER_SEED, &[1])).unwrap();
        let clean = SimContext::new(model.clone(), features(), motion).unwrap();
        let noisy_input = observe(&clean, &[2.0, 0.6, 0.1]).input;
        let ctx = SimContext::new(model, features(), noisy_input).unwrap();
        let ranges = ParamRanges::bilinear_sdof();
        let dataset = generate_dataset(
            &ctx,
            &ranges,
            &DatasetConfig {
                count: 5000,
                seed: derive_seed(MASTER_SEED, &[3]),
                ..DatasetConfig::default()
            },
        )
        .unwrap();
        let data: Vec<f32> = dataset.standardized_features();
        let arch = VaeArch::new(dataset.manifest.width, 10);
        let mut vae = Vae::<f32>::init(arch, derive_seed(MASTER_SEED, &[4])).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-4,
            epochs: 200,
            seed: derive_seed(MASTER_SEED, &[5]),
            ..TrainConfig::default()
        };
        let report = train(&mut vae, &data, &cfg, |_| {}).unwrap();
        let last = report.epochs.last().unwrap();
        let setup = format!(
            "dataset 5000 ({:.0}% past yield), final loss {:.1}, setup {:.0}s",
            100.0 * dataset.manifest.nonlinear_fraction,
            last.loss,
            t0.elapsed().as_secs_f64()
        );
        Scaled {
            ctx,
            clean,
            ranges,
            dataset,
            vae,
            setup,
        }
    })
}

fn desk_mcmc(k: u64) -> McmcConfig {
    McmcConfig {
        n_exchanges: 100,
        burn_in: 1000,
        thin: 3,
        seed: derive_seed(derive_seed(MASTER_SEED, &[6]), &[k]),
        ..McmcConfig::default()
    }
}

fn posterior(target: &[f64], k: u64) -> Result<PosteriorSummary, String> {
    let s = scaled();
    let obs = observe(&s.clean, target);
    let lik = CandidateLikelihood::new(
        s.ctx.clone(),
        s.vae.clone(),
        s.dataset.manifest.standardizer.clone(),
        s.ranges.clone(),
        &obs.features.values,
    )
    .map_err(|e| e.to_string())?;
    let (_, start) = init_replicas(&s.dataset, &lik.obs, &s.vae).map_err(|e| e.to_string())?;
    let cfg = desk_mcmc(k);
    let chains = run_replica_exchange(&cfg, &lik, &s.ranges, &start).map_err(|e| e.error.to_string())?;
    let names = s.ranges.names();
    let columns: Vec<Vec<f64>> = (0..names.len())
        .map(|j| burn_thin(&chains.series(0, j), cfg.burn_in, cfg.thin).unwrap())
        .collect();
    summarize(&names, &columns, 64).map_err(|e| e.to_string())
}

fn scaled_recovery() -> Outcome {
    let target = [2.0, 0.6, 0.1];
    let post = match posterior(&target, 0) {
        Ok(p) => p,
        Err(e) => return outcome(false, e),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, &t) in post.params.iter().zip(&target) {
        let inside = p.lower95 <= t && t <= p.upper95;
        pass &= inside;
        parts.push(format!(
            "{} {t} in [{:.4}, {:.4}]{}",
            p.name,
            p.lower95,
            p.upper95,
            if inside { "" } else { " (outside)" }
        ));
    }
    let mean_err = rel_err(post.params[0].mean, 2.0);
    pass &= mean_err < 0.02;
    outcome(
        pass,
        format!(
            "{}; f0 mean {:.4} ({:.2}% off); {}",
            scaled().setup,
            post.params[0].mean,
            100.0 * mean_err,
            parts.join(", ")
        ),
    )
}

fn width_trend() -> Outcome {
    let mut widths = Vec::new();
    for (k, r) in [0.5, 0.7, 0.9].into_iter().enumerate() {
        match posterior(&[2.0, r, 0.001], k as u64) {
            Ok(p) => widths.push((p.params[0].std, p.params[1].std)),
            Err(e) => return outcome(false, format!("yield_ratio {r}: {e}")),
        }
    }
    let non_decreasing = widths.windows(2).all(|w| w[1].1 >= w[0].1);
    let (f0_w, yr_w) = widths[2];
    let ratio = f0_w / yr_w;
    outcome(
        non_decreasing && ratio < 0.25,
        format!(
            "yield_ratio widths {:.4}, {:.4}, {:.4}; f0 width at 0.9 is {:.1}% of yield_ratio width",
            widths[0].1,
            widths[1].1,
            widths[2].1,
            100.0 * ratio
        ),
    )
}

// ---------------------------------------------------------------- 9

fn protocol_arithmetic() -> Outcome {
    let cfg = McmcConfig::default();
    let motion = synth_motion(&SynthSpec::default(), 9).unwrap();
    let mdof = SimContext::new(
        ModelSpec::TakedaMdof {
            masses: vec![2.0e5; 3],
            zeta: 0.04,
            observed: vec![1, 2, 3],
        },
        FeatureSpec::default(),
        motion.clone(),
    )
    .unwrap();
    let sdof = SimContext::new(ModelSpec::BilinearSdof { zeta: 0.05 }, FeatureSpec::default(), motion).unwrap();
    let got = (
        cfg.samples_per_replica(),
        cfg.retained_samples(),
        mdof.feature_width(),
        sdof.feature_width(),
    );
    outcome(
        got == (100_000, 3_000, 3072, 1024),
        format!(
            "{} samples per replica, {} retained, feature widths MDOF {} / SDOF {}",
            got.0, got.1, got.2, got.3
        ),
    )
}

// ---------------------------------------------------------------- 10

fn paper_scale_statement() -> Outcome {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let readme = std::fs::read_to_string(root.join("README.md")).unwrap_or_default();
    let stated = readme.contains("KMMH16") && readme.contains("not reproduc");
    let configs = ["mdof-caseA-paper.toml", "mdof-caseB-paper.toml", "sdof-grid-paper.toml"];
    let missing: Vec<_> = configs
        .iter()
        .filter(|c| !root.join("crates/cli/configs").join(c).exists())
        .collect();
    outcome(
        stated && missing.is_empty(),
        format!(
            "peak-floor-acceleration tables and MDOF posterior shapes need the KMMH16 record and \
             100k-sample/1000-epoch training: not reproduced here (README statement {}, paper-scale \
             configs {})",
            if stated { "present" } else { "MISSING" },
            if missing.is_empty() {
                "present".to_string()
            } else {
                format!("missing {missing:?}")
            }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "likelihood vs quadrature", likelihood_oracle),
        (2, "free vibration", dynamics_oracle),
        (3, "FRF transmissibility", frf_oracle),
        (4, "VAE gradient check", gradient_check),
        (5, "hysteresis invariants", hysteresis_invariants),
        (6, "sampler on a 2-D Gaussian", sampler_oracle),
        (7, "scaled SDOF recovery", scaled_recovery),
        (8, "posterior width trend", width_trend),
        (9, "protocol arithmetic", protocol_arithmetic),
        (10, "paper-scale results", paper_scale_statement),
    ];
    // HYSTUP_ACCEPTANCE_ONLY=1,2,9 runs a subset.
    let only: Option<Vec<u32>> = std::env::var("HYSTUP_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    for (n, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t0 = Instant::now();
        let r = check();
        let verdict = match (n, r.pass) {
            (10, true) => "NOT REPRODUCIBLE AT DESK SCALE (documented)",
            (_, true) => "PASS",
            (_, false) => "FAIL",
        };
        if !r.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {name}: {verdict} - {} [{:.1}s]",
            r.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
