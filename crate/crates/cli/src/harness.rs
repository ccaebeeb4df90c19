//! Simulation loops over replications with per-replication random streams.

use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use symtest_core::condsym::{
    cp_test, kci_test, multiple_correlation_statistic, transform_responses, CondSpec, CpConfig, KciConfig,
};
use symtest_core::groups::representative_inversion;
use symtest_core::invariance::{
    cw_test, inversion_mc_test, mc_invariance_test, power_estimate_with, transformation_two_sample_test,
    InvarianceStatistic, McConfig,
};
use symtest_core::kernels::median_heuristic;
use symtest_core::mmd::Landmarks;
use symtest_core::{Generator, GroupSpec, KernelDescriptor, KernelSpec, Points, PowerEstimate, RngStream, TestResult};

use crate::config::{ExperimentConfig, Method};
use crate::data::{load_dataset, Dataset};
use crate::error::{CliError, Result};
use crate::report::SimulationReport;

/// Where replications draw their rows from.
#[derive(Debug, Clone)]
pub enum Source {
    Generator(Generator),
    Dataset(Dataset),
}

/// One replication's test rows and disjoint training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub x: Points,
    pub y: Option<Points>,
    pub train_x: Points,
    pub train_y: Option<Points>,
}

fn split(x: Points, y: Option<Points>, n: usize) -> Replicate {
    let total = x.len();
    let (test, train): (Vec<usize>, Vec<usize>) = ((0..n).collect(), (n..total).collect());
    Replicate {
        x: x.select(&test),
        y: y.as_ref().map(|y| y.select(&test)),
        train_x: x.select(&train),
        train_y: y.as_ref().map(|y| y.select(&train)),
    }
}

impl Source {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        match (&cfg.generator, &cfg.dataset) {
            (Some(g), _) => Ok(Source::Generator(cfg.parse_generator(g)?)),
            (None, Some(d)) => Ok(Source::Dataset(load_dataset(d)?)),
            (None, None) => Err(CliError::config("either generator or dataset is required")),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Source::Generator(g) => g.dim(),
            Source::Dataset(d) => d.x.dim(),
        }
    }

    pub fn has_responses(&self) -> bool {
        match self {
            Source::Generator(g) => g.is_conditional(),
            Source::Dataset(d) => d.y.is_some(),
        }
    }

    /// `n` test rows and `n_train` training rows. Dataset rows are drawn
    /// without replacement, so the two parts never share a row.
    pub fn draw(&self, n: usize, n_train: usize, stream: RngStream) -> Result<Replicate> {
        let mut rng = stream.rng();
        let total = n + n_train;
        match self {
            Source::Generator(g) => {
                let s = g.sample(total, &mut rng)?;
                Ok(split(s.x, s.y, n))
            }
            Source::Dataset(d) => {
                if total > d.len() {
                    return Err(CliError::TooFewValues { needed: total, got: d.len() });
                }
                let idx = sample_indices(&mut rng, d.len(), total).into_vec();
                let sub = d.select(&idx);
                Ok(split(sub.x, sub.y, n))
            }
        }
    }
}

/// Resolves a kernel, computing median bandwidths on `train` (or on `test`
/// when no training rows were drawn).
fn resolve(desc: &KernelDescriptor, train: &Points, test: &Points) -> Result<KernelSpec> {
    let source = if train.len() >= 2 { train } else { test };
    Ok(desc.resolve(source)?)
}

fn inversion_kernel(desc: &KernelDescriptor, spec: &GroupSpec, train: &Points, test: &Points) -> Result<KernelSpec> {
    match desc {
        KernelDescriptor::Rbf(symtest_core::kernels::Bandwidth::Median) => {
            let source = if train.len() >= 2 { train } else { test };
            let rows: Vec<Vec<f64>> = source
                .rows()
                .map(|x| Ok(representative_inversion(spec, x)?.flatten()))
                .collect::<Result<_>>()?;
            Ok(KernelSpec::rbf(median_heuristic(&Points::from_rows(&rows)?)?)?)
        }
        other => Ok(other.resolve(test)?),
    }
}

fn responses<'a>(p: &'a Option<Points>, what: &str) -> Result<&'a Points> {
    p.as_ref().ok_or_else(|| CliError::config(format!("{what} needs responses")))
}

/// Runs the configured test on one replicate.
pub fn run_test(cfg: &ExperimentConfig, spec: &GroupSpec, rep: &Replicate, stream: RngStream) -> Result<TestResult> {
    let kx = cfg.parse_kernel(&cfg.kernel)?;
    let res = match cfg.method {
        Method::Mmd | Method::Nmmd => {
            let k = resolve(&kx, &rep.train_x, &rep.x)?;
            let statistic = match cfg.method {
                Method::Mmd => InvarianceStatistic::MmdU,
                _ => InvarianceStatistic::MmdNystrom {
                    landmarks: Landmarks::Random(cfg.projections()),
                },
            };
            let mc = McConfig {
                m: cfg.m,
                b: cfg.b,
                statistic,
                ..McConfig::default()
            };
            mc_invariance_test(&rep.x, spec, &mc, &k, stream)?
        }
        Method::Cw => cw_test(&rep.x, spec, cfg.projections(), cfg.l, cfg.b, stream)?,
        Method::Inversion => {
            let k = inversion_kernel(&kx, spec, &rep.train_x, &rep.x)?;
            inversion_mc_test(&rep.x, spec, cfg.b, &k, stream)?
        }
        Method::TwoSample => {
            let k = resolve(&kx, &rep.train_x, &rep.x)?;
            transformation_two_sample_test(&rep.x, spec, &k, cfg.b, cfg.alpha, stream)?
        }
        Method::Kci | Method::Cp => {
            let y = responses(&rep.y, cfg.method.name())?;
            let cond = CondSpec::new(*spec, cfg.response)?;
            let (tx, ty) = if rep.train_x.len() >= 2 {
                (&rep.train_x, responses(&rep.train_y, "training")?)
            } else {
                (&rep.x, y)
            };
            let train = transform_responses(tx, ty, &cond)?;
            let ky = cfg.parse_kernel(&cfg.kernel_y)?.resolve(&train.z)?;
            let km = cfg.parse_kernel(&cfg.kernel_m)?.resolve(&train.m)?;
            if cfg.method == Method::Kci {
                let kci = KciConfig {
                    epsilon: cfg.epsilon,
                    b: cfg.b,
                    ..KciConfig::new(kx.resolve(&train.x)?, ky, km)
                };
                kci_test(&rep.x, y, &cond, &kci, cfg.alpha, stream)?
            } else {
                let data = transform_responses(&rep.x, y, &cond)?;
                let cp = CpConfig { ky, km, s: cfg.s, b: cfg.b };
                cp_test(&data, &cp, multiple_correlation_statistic, cfg.alpha, stream)?
            }
        }
    };
    Ok(res.at_level(cfg.alpha))
}

/// Runs `f` on a pool of the configured width, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::config(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn prepare(cfg: &ExperimentConfig) -> Result<(Source, GroupSpec)> {
    cfg.validate()?;
    let source = Source::from_config(cfg)?;
    if cfg.method.is_conditional() && !source.has_responses() {
        return Err(CliError::config("conditional tests need responses"));
    }
    let spec = cfg.group_spec(source.dim())?;
    Ok((source, spec))
}

/// Replication `r` draws its rows from `seed/r/0` and runs its test on
/// `seed/r/1`, so results do not depend on the thread count.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<SimulationReport> {
    let (source, spec) = prepare(cfg)?;
    run_simulation_with(cfg, &source, &spec)
}

/// [`run_simulation`] with an already loaded source.
pub fn run_simulation_with(cfg: &ExperimentConfig, source: &Source, spec: &GroupSpec) -> Result<SimulationReport> {
    let root = RngStream::new(cfg.seed);
    let n_train = cfg.training_rows();
    let runs = with_threads(cfg.threads, || {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let s = root.substream(r as u64);
                let rep = source.draw(cfg.n, n_train, s.substream(0))?;
                let t0 = Instant::now();
                let res = run_test(cfg, spec, &rep, s.substream(1))?;
                Ok((res.p_value, res.statistic, t0.elapsed().as_secs_f64()))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let p = runs.iter().map(|r| r.0).collect();
    let t = runs.iter().map(|r| r.1).collect();
    let wall = cfg.record_timing.then(|| runs.iter().map(|r| r.2).collect());
    SimulationReport::new(cfg.clone(), p, t, wall)
}

/// The test on replication 0 of the configured seed.
pub fn run_single(cfg: &ExperimentConfig) -> Result<TestResult> {
    let (source, spec) = prepare(cfg)?;
    let s = RngStream::new(cfg.seed).substream(0);
    let rep = source.draw(cfg.n, cfg.training_rows(), s.substream(0))?;
    with_threads(cfg.threads, || run_test(cfg, &spec, &rep, s.substream(1)))?
}

/// Bootstrap power estimate on the dataset of replication 0.
pub fn run_power(cfg: &ExperimentConfig) -> Result<PowerEstimate> {
    if cfg.method.is_conditional() {
        return Err(CliError::config("power estimation supports invariance tests only"));
    }
    let (source, spec) = prepare(cfg)?;
    let s = RngStream::new(cfg.seed).substream(0);
    let rep = source.draw(cfg.n, cfg.training_rows(), s.substream(0))?;
    with_threads(cfg.threads, || {
        power_estimate_with(&rep.x, cfg.c, cfg.b, cfg.m, cfg.alpha, s.substream(1), |xc, st| {
            let boot = Replicate { x: xc.clone(), ..rep.clone() };
            run_test(cfg, &spec, &boot, st).map_err(|e| match e {
                CliError::Core(c) => c,
                other => symtest_core::Error::BadParameters(other.to_string()),
            })
        })
    })?
    .map_err(CliError::from)
}
