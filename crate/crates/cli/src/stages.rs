use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hystup::dataset::generate_dataset;
use hystup::mcmc::init_replicas;
use hystup::posterior::{burn_thin, summarize, width_study};
use hystup::seeding::derive_seed;
use hystup::signal::synth_motion;
use hystup::simulator::Observation;
use hystup::vae::{load_checkpoint, save_checkpoint, train};
use hystup::{
    run_replica_exchange, CandidateLikelihood, ChainStore, Dataset, GroundMotion, ModelSpec,
    PosteriorSummary, Real, SimContext, Vae, VaeArch,
};
use serde::{Deserialize, Serialize};

use crate::config::{slot, PipelineConfig, Precision};
use crate::output::{read_chain, write_chain, write_csv, write_json};

pub const DATASET_FILE: &str = "dataset.bin";
pub const DATASET_MANIFEST: &str = "dataset.json";
pub const CHECKPOINT_FILE: &str = "vae.bin";
pub const LOSS_FILE: &str = "loss.csv";

pub fn target_dir(out: &Path, k: usize) -> PathBuf {
    out.join(format!("target-{k}"))
}

fn clean_motion(cfg: &PipelineConfig) -> anyhow::Result<GroundMotion<f64>> {
    match (&cfg.motion.file, &cfg.motion.synth) {
        (Some(path), _) => Ok(GroundMotion::read(path)?),
        (None, Some(spec)) => Ok(synth_motion(spec, derive_seed(cfg.seed, &[slot::MOTION]))?),
        (None, None) => bail!("no motion configured"),
    }
}

/// Noisy observations of every target plus the simulation context driven by
/// the noisy input, which is what the dataset and the sampler see. All
/// targets share one input noise realisation.
pub fn observe(cfg: &PipelineConfig) -> anyhow::Result<(SimContext<f64>, Vec<Observation<f64>>)> {
    let motion = clean_motion(cfg)?;
    let clean = SimContext::new(cfg.model.clone(), cfg.features.clone(), motion)?;
    let seed = derive_seed(cfg.seed, &[slot::OBSERVATION]);
    let obs = cfg
        .observation
        .targets
        .iter()
        .enumerate()
        .map(|(k, t)| {
            clean
                .observe(t, cfg.observation.noise_sigma, seed)
                .with_context(|| format!("simulating target {k} {t:?}"))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let ctx = SimContext::new(cfg.model.clone(), cfg.features.clone(), obs[0].input.clone())?;
    Ok((ctx, obs))
}

pub fn simulate(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let (ctx, obs) = observe(cfg)?;
    let out = &cfg.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    ctx.input.write(out.join("input.txt"))?;
    let floors = cfg.model.observed_floors();
    for (k, o) in obs.iter().enumerate() {
        let dir = target_dir(out, k);
        fs::create_dir_all(&dir)?;
        let mut header = vec!["time".to_string(), "ground".to_string()];
        header.extend(floors.iter().map(|f| format!("floor{f}")));
        let rows = (0..o.input.len()).map(|i| {
            let mut row = vec![i as f64 * o.input.dt, o.input.samples[i]];
            row.extend(o.outputs.iter().map(|y| y[i]));
            row
        });
        write_csv(&dir.join("response.csv"), &header, rows)?;

        let f = &o.features;
        let mut header = vec!["frequency".to_string()];
        header.extend(f.channel_map.iter().cloned());
        let rows = (0..f.n_points).map(|i| {
            let mut row = vec![f.f_start + f.df * i as f64];
            row.extend((0..f.channels()).map(|c| f.channel(c)[i]));
            row
        });
        write_csv(&dir.join("frf.csv"), &header, rows)?;
        log::info!(
            "target {k}: peak response {:.1} gal",
            o.outputs
                .iter()
                .flatten()
                .fold(0.0f64, |m, a| m.max(a.abs()))
        );
    }
    Ok(())
}

pub fn dataset(cfg: &PipelineConfig) -> anyhow::Result<Dataset> {
    let (ctx, _) = observe(cfg)?;
    let ds = generate_dataset(&ctx, cfg.ranges(), &cfg.dataset)?;
    fs::create_dir_all(&cfg.out)?;
    ds.save(cfg.out.join(DATASET_FILE))?;
    write_json(&cfg.out.join(DATASET_MANIFEST), &ds.manifest)?;
    log::info!(
        "dataset: {} samples of width {}, {:.0}% past yield",
        ds.len(),
        ds.manifest.width,
        100.0 * ds.manifest.nonlinear_fraction
    );
    Ok(ds)
}

/// Loads the dataset and checks it was produced by this config.
fn load_dataset(cfg: &PipelineConfig) -> anyhow::Result<Dataset> {
    let path = cfg.out.join(DATASET_FILE);
    let ds = Dataset::load(&path).with_context(|| "run the dataset stage first".to_string())?;
    let m = &ds.manifest;
    let mismatch = if m.model != cfg.model {
        Some("model")
    } else if m.features != cfg.features {
        Some("features")
    } else if &m.ranges != cfg.ranges() {
        Some("ranges")
    } else {
        None
    };
    if let Some(what) = mismatch {
        bail!(
            "incompatible artifacts: {} was generated with a different {what} section",
            path.display()
        );
    }
    Ok(ds)
}

fn arch(cfg: &PipelineConfig, width: usize) -> VaeArch {
    VaeArch {
        input_dim: width,
        z_dim: cfg.vae.z_dim,
        hidden: cfg.vae.hidden.clone(),
        leaky_slope: cfg.vae.leaky_slope,
    }
}

pub fn train_vae(cfg: &PipelineConfig) -> anyhow::Result<()> {
    match cfg.vae.precision {
        Precision::F32 => train_as::<f32>(cfg),
        Precision::F64 => train_as::<f64>(cfg),
    }
}

fn train_as<T: Real>(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let ds = load_dataset(cfg)?;
    let data: Vec<T> = ds.standardized_features();
    let mut vae = Vae::<T>::init(
        arch(cfg, ds.manifest.width),
        derive_seed(cfg.seed, &[slot::VAE_INIT]),
    )?;
    let every = (cfg.vae.train.epochs / 20).max(1);
    let report = train(&mut vae, &data, &cfg.vae.train, |e| {
        if (e.epoch + 1) % every == 0 {
            log::info!(
                "epoch {}: loss {:.3} (recon {:.3}, kl {:.3})",
                e.epoch + 1,
                e.loss,
                e.recon,
                e.kl
            );
        }
    })?;
    save_checkpoint(&vae, cfg.out.join(CHECKPOINT_FILE))?;
    let header = ["epoch", "loss", "recon", "kl"].map(String::from);
    let rows = report
        .epochs
        .iter()
        .map(|e| vec![(e.epoch + 1) as f64, e.loss, e.recon, e.kl]);
    write_csv(&cfg.out.join(LOSS_FILE), &header, rows)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub target: Vec<f64>,
    pub start_index: usize,
    pub start: Vec<f64>,
    pub samples_per_replica: usize,
    pub temperatures: Vec<f64>,
    pub acceptance_rates: Vec<f64>,
    pub swap_rates: Vec<f64>,
    pub mcmc: hystup::McmcConfig,
}

pub fn update(cfg: &PipelineConfig) -> anyhow::Result<()> {
    match cfg.vae.precision {
        Precision::F32 => update_as::<f32>(cfg),
        Precision::F64 => update_as::<f64>(cfg),
    }
}

fn update_as<T: Real>(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let ds = load_dataset(cfg)?;
    let vae: Vae<T> = load_checkpoint(cfg.out.join(CHECKPOINT_FILE))
        .with_context(|| "run the train stage first".to_string())?;
    vae.check_layout(ds.manifest.width, cfg.vae.z_dim)
        .context("incompatible artifacts: checkpoint does not fit the dataset")?;
    let (ctx, obs) = observe(cfg)?;
    for (k, o) in obs.iter().enumerate() {
        let target = &cfg.observation.targets[k];
        log::info!("target {k}: {target:?}");
        let lik = CandidateLikelihood::new(
            ctx.clone(),
            vae.clone(),
            ds.manifest.standardizer.clone(),
            cfg.ranges().clone(),
            &o.features.values,
        )?;
        let (start_index, start) = init_replicas(&ds, &lik.obs, &vae)?;
        log::info!("replicas start at dataset sample {start_index}: {start:?}");
        let mut mcmc = cfg.mcmc.clone();
        mcmc.seed = derive_seed(cfg.mcmc.seed, &[k as u64]);
        let dir = target_dir(&cfg.out, k);
        fs::create_dir_all(&dir)?;
        let chains = match run_replica_exchange(&mcmc, &lik, cfg.ranges(), &start) {
            Ok(c) => c,
            Err(aborted) => {
                write_chains(&dir, &aborted.chains)?;
                return Err(aborted.error)
                    .with_context(|| format!("target {k}: partial chains kept in {}", dir.display()));
            }
        };
        write_chains(&dir, &chains)?;
        let summary = RunSummary {
            target: target.clone(),
            start_index,
            start,
            samples_per_replica: chains.len(),
            acceptance_rates: (0..chains.replicas()).map(|r| chains.acceptance_rate(r)).collect(),
            swap_rates: (0..chains.replicas().saturating_sub(1))
                .map(|p| chains.swap_rate(p))
                .collect(),
            temperatures: chains.temperatures.clone(),
            mcmc,
        };
        write_json(&dir.join("run.json"), &summary)?;
    }
    Ok(())
}

fn write_chains(dir: &Path, chains: &ChainStore) -> anyhow::Result<()> {
    for r in 0..chains.replicas() {
        write_chain(&dir.join(format!("chain-r{r}.csv")), chains, r)?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub target: Vec<f64>,
    pub burn_in: usize,
    pub thin: usize,
    pub posterior: PosteriorSummary,
}

pub fn analyze(cfg: &PipelineConfig) -> anyhow::Result<Vec<AnalysisSummary>> {
    let names = cfg.model.param_names();
    let mut all = Vec::new();
    for (k, target) in cfg.observation.targets.iter().enumerate() {
        let dir = target_dir(&cfg.out, k);
        let path = dir.join("chain-r0.csv");
        let (header, rows) =
            read_chain(&path).with_context(|| "run the update stage first".to_string())?;
        if header != names {
            bail!(
                "incompatible artifacts: {} holds {header:?}, the model has {names:?}",
                path.display()
            );
        }
        let rows = burn_thin(&rows, cfg.mcmc.burn_in, cfg.mcmc.thin)?;
        let columns: Vec<Vec<f64>> = (0..names.len())
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let posterior = summarize(&names, &columns, cfg.analysis.kde_points)?;
        for p in &posterior.params {
            log::info!(
                "target {k} {}: mean {:.4}, std {:.4}, 95% [{:.4}, {:.4}]",
                p.name,
                p.mean,
                p.std,
                p.lower95,
                p.upper95
            );
            if let Some(kde) = &p.kde {
                let header = ["x", "density"].map(String::from);
                let rows = kde.grid.iter().zip(&kde.density).map(|(&x, &d)| vec![x, d]);
                write_csv(&dir.join(format!("kde-{}.csv", p.name)), &header, rows)?;
            }
        }
        let summary = AnalysisSummary {
            target: target.clone(),
            burn_in: cfg.mcmc.burn_in,
            thin: cfg.mcmc.thin,
            posterior,
        };
        write_json(&dir.join("summary.json"), &summary)?;
        all.push(summary);
    }
    if matches!(cfg.model, ModelSpec::BilinearSdof { .. }) && all.len() > 1 {
        let runs: Vec<_> = all
            .iter()
            .map(|s| (s.target.clone(), s.posterior.clone()))
            .collect();
        let table = width_study(&runs)?;
        let mut header = vec!["alpha".to_string(), "yield_ratio".to_string()];
        header.extend(names.iter().map(|n| format!("std_{n}")));
        let rows = table.iter().map(|r| {
            let mut row = vec![r.alpha, r.yield_ratio];
            row.extend(r.widths.iter().map(|w| w.1));
            row
        });
        write_csv(&cfg.out.join("widths.csv"), &header, rows)?;
    }
    Ok(all)
}
