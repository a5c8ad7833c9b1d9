use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{Experiment, LimitConstant, Params, RunConfig};
use super::records::{to_json_string, Payload, RecordWriter, ResultRecord, ResultsHeader};
use crate::error::{GmcError, Result};
use crate::fft::FftWorkspace;
use crate::fields::CircleFieldSampler;
use crate::gmc::build_measure;
use crate::grid::GridSpec;
use crate::integrals;
use crate::rng::{rng_from_seed, seed_for_replica, substream};
use crate::spectrum::{
    capacity_sum, convolution_power, fejer_density_with, fourier_coefficients_with, l1_distance,
    rescale_coefficient, riesz_energy_with, s_star,
};
use crate::stats::{
    block_max, dyadic_blocks, energy_distance_test, fourth_moment_curve, ks_test, median,
    phase_uniformity_test, EstimateReport, LimitLawReference, TestReport,
};
use crate::toy_model::{
    conditional_projection, conditional_variance_split, conditional_variance_split_exact,
    projection_second_moment, projection_second_moment_discrete, projection_second_moment_finite,
    increment_split_discrete, toy_second_moment_discrete, toy_z_n, BmPairSampler,
};

/// Replicas dispatched to the pool per batch; records are written after each batch.
const BATCH: usize = 256;

/// Stream tag for the energy-test permutations.
const PERMUTATION_STREAM: u64 = 0x7065_726d;

/// Sum of `xs` by a fixed binary tree, independent of how the values were produced.
pub fn tree_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let (l, r) = xs.split_at(xs.len() / 2);
        tree_sum(l) + tree_sum(r)
    }
}

/// Mean and `s/√n` standard error with tree summation.
pub fn tree_estimate(xs: &[f64]) -> EstimateReport {
    let n = xs.len();
    if n == 0 {
        return EstimateReport::new(f64::NAN, f64::NAN, 0);
    }
    let mean = tree_sum(xs) / n as f64;
    if n == 1 {
        return EstimateReport::new(mean, 0.0, 1);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = tree_sum(&dev) / (n - 1) as f64;
    EstimateReport::new(mean, (var / n as f64).sqrt(), n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replica_index: u64,
    pub seed: u64,
    pub message: String,
}

/// Configuration echo in the report. Worker count and paths are left out so
/// that the report depends only on what was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub experiment: Experiment,
    pub gamma_sq: f64,
    pub grid_m: usize,
    pub n_modes: usize,
    pub n_max: usize,
    pub replicas: usize,
    pub master_seed: u64,
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    pub n: Option<u64>,
    pub estimate: EstimateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTest {
    pub name: String,
    pub report: TestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub n: Option<u64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub version: String,
    pub config: ConfigEcho,
    pub completed: usize,
    pub failed: usize,
    pub estimates: Vec<NamedEstimate>,
    pub tests: Vec<NamedTest>,
    pub values: Vec<NamedValue>,
}

impl AggregateReport {
    pub fn estimate(&self, name: &str, n: Option<u64>) -> Option<&EstimateReport> {
        self.estimates
            .iter()
            .find(|e| e.name == name && e.n == n)
            .map(|e| &e.estimate)
    }

    pub fn test(&self, name: &str) -> Option<&TestReport> {
        self.tests.iter().find(|t| t.name == name).map(|t| &t.report)
    }

    pub fn value(&self, name: &str, n: Option<u64>) -> Option<f64> {
        self.values
            .iter()
            .find(|v| v.name == name && v.n == n)
            .map(|v| v.value)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    /// `quantity,n,value,std_error,n_replicas` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,n,value,std_error,n_replicas\n");
        let n_str = |n: Option<u64>| n.map(|v| v.to_string()).unwrap_or_default();
        for e in &self.estimates {
            s.push_str(&format!(
                "{},{},{:.16e},{:.16e},{}\n",
                e.name,
                n_str(e.n),
                e.estimate.value,
                e.estimate.std_error,
                e.estimate.n_replicas
            ));
        }
        for v in &self.values {
            s.push_str(&format!("{},{},{:.16e},,\n", v.name, n_str(v.n), v.value));
        }
        for t in &self.tests {
            s.push_str(&format!("{}_statistic,,{:.16e},,\n", t.name, t.report.statistic));
            s.push_str(&format!("{}_p_value,,{:.16e},,\n", t.name, t.report.p_value));
        }
        s
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<ResultRecord>,
    pub failures: Vec<Failure>,
    pub report: AggregateReport,
}

/// Per-worker samplers and scratch space.
enum Worker {
    Circle {
        sampler: CircleFieldSampler,
        fft: FftWorkspace,
    },
    Toy {
        sampler: BmPairSampler,
        t: f64,
    },
    Deterministic,
}

impl Worker {
    fn new(cfg: &RunConfig, params: &Params) -> Result<Self> {
        Ok(match params {
            Params::Kappa => Worker::Deterministic,
            Params::ToyModel { a, n, fine_scale, .. } => {
                let t = *n as f64 / a;
                Worker::Toy {
                    sampler: BmPairSampler::new(GridSpec::unit_interval(cfg.grid_m)?, t, *fine_scale)?,
                    t,
                }
            }
            _ => Worker::Circle {
                sampler: CircleFieldSampler::new(cfg.n_modes, GridSpec::circle(cfg.grid_m)?)?,
                fft: FftWorkspace::new(),
            },
        })
    }
}

/// Errors found while setting up a run are configuration errors.
fn rejected(e: GmcError) -> GmcError {
    match e {
        GmcError::Config(_) | GmcError::Parse { .. } => e,
        other => GmcError::Config(other.to_string()),
    }
}

/// State shared by all replicas of a run.
struct Shared {
    cfg: RunConfig,
    params: Params,
    gamma: f64,
    reference: Option<LimitLawReference>,
}

impl Shared {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let params = cfg.validate()?;
        let gamma = cfg.gamma_sq.sqrt();
        let reference = match &params {
            Params::LimitLaw { constant, .. } => Some(
                match constant {
                    LimitConstant::Kappa => LimitLawReference::new(gamma),
                    LimitConstant::UnitFrequency => integrals::kappa_unit_frequency(gamma)
                        .and_then(|c| LimitLawReference::with_constant(gamma, c.value)),
                }
                .map_err(rejected)?,
            ),
            _ => None,
        };
        Ok(Shared {
            cfg: cfg.clone(),
            params,
            gamma,
            reference,
        })
    }

    fn replica(&self, worker: &mut Worker, index: u64) -> Result<Payload> {
        let seed = seed_for_replica(self.cfg.master_seed, index);
        let gamma = self.gamma;
        match worker {
            Worker::Deterministic => {
                let k = integrals::kappa(gamma)?;
                Ok(Payload::Kappa { value: k.value })
            }
            Worker::Toy { sampler, t } => {
                let Params::ToyModel { n, inner, .. } = self.params else {
                    unreachable!("toy worker only runs the toy model")
                };
                let n = n as i64;
                let pair = sampler.sample(seed);
                let z_n = toy_z_n(&pair.fine(), gamma, n)?;
                let projection = conditional_projection(&pair.coarse, gamma, n)?;
                let split = if inner == 0 {
                    conditional_variance_split_exact(&pair.coarse, gamma, n, *t, pair.big_t)?
                } else {
                    conditional_variance_split(sampler, &pair, seed, gamma, n, inner)?.0
                };
                Ok(Payload::ToyModel {
                    z_n,
                    projection,
                    split,
                })
            }
            Worker::Circle { sampler, fft } => {
                let mut rng = rng_from_seed(seed);
                let field = sampler.sample(&mut rng);
                let measure = build_measure(&field, gamma)?;
                let series = fourier_coefficients_with(fft, &measure, self.cfg.n_max)?;
                let pick = |ns: &[u64]| ns.iter().map(|&n| (n, series.at(n as usize))).collect();
                Ok(match &self.params {
                    Params::Decay {
                        ns,
                        beta,
                        block_first,
                        block_last,
                    } => {
                        let blocks = if *block_last > 0 {
                            dyadic_blocks(*block_first, *block_last)
                        } else {
                            Vec::new()
                        };
                        let c = series.nonnegative();
                        Payload::Decay {
                            total_mass: measure.total_mass(),
                            coefficients: pick(ns),
                            block_maxima: blocks.iter().map(|&(lo, hi)| block_max(c, *beta, lo, hi)).collect(),
                            block_maxima_plain: blocks.iter().map(|&(lo, hi)| block_max(c, 0.0, lo, hi)).collect(),
                        }
                    }
                    Params::FourthMoment { ns } => Payload::FourthMoment {
                        coefficients: pick(ns),
                    },
                    Params::LimitLaw { n, .. } => {
                        let coefficient = series.at(*n as usize);
                        let mut ref_rng = rng_from_seed(substream(seed, 1));
                        let ref_field = sampler.sample(&mut ref_rng);
                        let reference_mass = build_measure(&ref_field, 2.0 * gamma)?.total_mass();
                        let reference = self
                            .reference
                            .as_ref()
                            .expect("reference built for limit_law")
                            .sample(reference_mass, &mut ref_rng);
                        Payload::LimitLaw {
                            coefficient,
                            rescaled: rescale_coefficient(coefficient, *n as usize, gamma),
                            reference_mass,
                            reference,
                        }
                    }
                    Params::Capacity { s } => Payload::Capacity {
                        total_mass: measure.total_mass(),
                        riesz_energy: riesz_energy_with(fft, &measure, *s)?,
                        capacity_sum: capacity_sum(&series, *s)?,
                    },
                    Params::Convolve {
                        d,
                        ks,
                        density_points,
                    } => {
                        let conv = convolution_power(&series, *d)?;
                        let mut densities = Vec::with_capacity(ks.len());
                        for &k in ks {
                            densities.push(fejer_density_with(fft, &conv, k, *density_points)?);
                        }
                        let l1_differences = densities.windows(2).map(|w| l1_distance(&w[0], &w[1])).collect();
                        let all = densities.iter().flatten();
                        Payload::Convolve {
                            l1_differences,
                            min_density: all.clone().copied().fold(f64::INFINITY, f64::min),
                            max_density: all.copied().fold(f64::NEG_INFINITY, f64::max),
                        }
                    }
                    Params::ToyModel { .. } | Params::Kappa => unreachable!("not a circle experiment"),
                })
            }
        }
    }
}

fn run_batches(
    shared: &Shared,
    mut sink: impl FnMut(std::result::Result<ResultRecord, Failure>) -> Result<()>,
) -> Result<()> {
    let cfg = &shared.cfg;
    // surfaces sampler construction errors before any replica runs
    drop(Worker::new(cfg, &shared.params).map_err(rejected)?);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| GmcError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let total = if shared.params == Params::Kappa { 1 } else { cfg.replicas };
    let mut start = 0;
    while start < total {
        let end = (start + BATCH * cfg.workers).min(total);
        let batch: Vec<_> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map_init(
                    || Worker::new(cfg, &shared.params).expect("worker construction checked above"),
                    |worker, i| {
                        let index = i as u64;
                        let seed = seed_for_replica(cfg.master_seed, index);
                        let clock = Instant::now();
                        let outcome = catch_unwind(AssertUnwindSafe(|| shared.replica(worker, index)));
                        let message = match outcome {
                            Ok(Ok(payload)) => {
                                return Ok(ResultRecord {
                                    replica_index: index,
                                    seed,
                                    payload,
                                    wall_time_ms: clock.elapsed().as_millis() as u64,
                                })
                            }
                            Ok(Err(e)) => e.to_string(),
                            Err(panic) => panic
                                .downcast_ref::<String>()
                                .cloned()
                                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                                .unwrap_or_else(|| "replica panicked".into()),
                        };
                        // a panicking replica may leave its worker in a bad state
                        *worker = Worker::new(cfg, &shared.params).expect("worker construction checked above");
                        Err(Failure {
                            replica_index: index,
                            seed,
                            message,
                        })
                    },
                )
                .collect()
        });
        for item in batch {
            sink(item)?;
        }
        start = end;
    }
    Ok(())
}

/// Runs all replicas in memory and aggregates them.
pub fn run_replicas(cfg: &RunConfig) -> Result<RunOutcome> {
    let shared = Shared::new(cfg)?;
    let mut records = Vec::with_capacity(cfg.replicas);
    let mut failures = Vec::new();
    run_batches(&shared, |item| {
        match item {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
        Ok(())
    })?;
    let report = aggregate_with(&shared, &records, failures.len())?;
    Ok(RunOutcome {
        records,
        failures,
        report,
    })
}

pub fn report_path(output: &Path) -> PathBuf {
    with_suffix(output, ".report.json")
}

pub fn failures_path(output: &Path) -> PathBuf {
    with_suffix(output, ".failures.json")
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Runs an experiment, streaming records to `cfg.output_path` in replica
/// order. Failed replicas are listed in `<output>.failures.json`; the
/// aggregate report goes to `<output>.report.json`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutcome> {
    let shared = Shared::new(cfg)?;
    let out = PathBuf::from(&cfg.output_path);
    let mut writer = RecordWriter::create(&out, &ResultsHeader::new(Some(cfg.clone())))?;
    let mut records = Vec::with_capacity(cfg.replicas);
    let mut failures = Vec::new();
    run_batches(&shared, |item| {
        match item {
            Ok(r) => {
                writer.write(&r)?;
                records.push(r);
            }
            Err(f) => failures.push(f),
        }
        Ok(())
    })?;
    if !failures.is_empty() {
        std::fs::write(failures_path(&out), to_json_string(&failures)?)?;
    }
    let report = aggregate_with(&shared, &records, failures.len())?;
    std::fs::write(report_path(&out), report.to_json()?)?;
    Ok(RunOutcome {
        records,
        failures,
        report,
    })
}

/// Rebuilds the aggregate report from stored records.
pub fn aggregate(cfg: &RunConfig, records: &[ResultRecord]) -> Result<AggregateReport> {
    let shared = Shared::new(cfg)?;
    let failed = cfg.replicas.saturating_sub(records.len());
    aggregate_with(&shared, records, if shared.params == Params::Kappa { 0 } else { failed })
}

fn aggregate_with(shared: &Shared, records: &[ResultRecord], failed: usize) -> Result<AggregateReport> {
    let cfg = &shared.cfg;
    let mut sorted: Vec<&ResultRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.replica_index);
    let mut rep = AggregateReport {
        version: env!("CARGO_PKG_VERSION").into(),
        config: ConfigEcho {
            experiment: cfg.experiment,
            gamma_sq: cfg.gamma_sq,
            grid_m: cfg.grid_m,
            n_modes: cfg.n_modes,
            n_max: cfg.n_max,
            replicas: cfg.replicas,
            master_seed: cfg.master_seed,
            params: shared.params.clone(),
        },
        completed: sorted.len(),
        failed,
        estimates: Vec::new(),
        tests: Vec::new(),
        values: Vec::new(),
    };
    let gamma = shared.gamma;
    let a = cfg.gamma_sq;
    let est = |rep: &mut AggregateReport, name: &str, n: Option<u64>, xs: &[f64]| {
        rep.estimates.push(NamedEstimate {
            name: name.into(),
            n,
            estimate: tree_estimate(xs),
        })
    };
    let val = |rep: &mut AggregateReport, name: &str, n: Option<u64>, value: f64| {
        rep.values.push(NamedValue {
            name: name.into(),
            n,
            value,
        })
    };
    let mismatch = || GmcError::Input("record payload does not match the experiment".into());

    match &shared.params {
        Params::Decay { ns, .. } => {
            let mut masses = Vec::new();
            let mut coeffs: Vec<Vec<Complex64>> = vec![Vec::new(); ns.len()];
            let mut blocks: Vec<Vec<f64>> = Vec::new();
            let mut blocks_plain: Vec<Vec<f64>> = Vec::new();
            for r in &sorted {
                let Payload::Decay {
                    total_mass,
                    coefficients,
                    block_maxima,
                    block_maxima_plain,
                } = &r.payload
                else {
                    return Err(mismatch());
                };
                masses.push(*total_mass);
                for (i, (_, c)) in coefficients.iter().enumerate() {
                    coeffs[i].push(*c);
                }
                blocks.push(block_maxima.clone());
                blocks_plain.push(block_maxima_plain.clone());
            }
            est(&mut rep, "total_mass", None, &masses);
            let discrete = if a < 1.0 {
                integrals::circle_second_moment_discrete(gamma, cfg.n_modes, &GridSpec::circle(cfg.grid_m)?)?
            } else {
                Vec::new()
            };
            for (i, &n) in ns.iter().enumerate() {
                let sq: Vec<f64> = coeffs[i].iter().map(|c| c.norm_sqr()).collect();
                est(&mut rep, "second_moment", Some(n), &sq);
                let scale = (n as f64).powf(1.0 - a);
                let scaled: Vec<f64> = sq.iter().map(|v| v * scale).collect();
                est(&mut rep, "scaled_second_moment", Some(n), &scaled);
                if a < 1.0 {
                    let q = integrals::circle_second_moment(n, gamma)?;
                    val(&mut rep, "second_moment_oracle", Some(n), q.value);
                    val(&mut rep, "second_moment_discrete", Some(n), discrete[n as usize]);
                }
            }
            if let Some(first) = blocks.first() {
                let nb = first.len();
                if nb > 0 {
                    let ok = blocks.iter().filter(|m| m.windows(2).all(|w| w[1] <= w[0])).count();
                    val(&mut rep, "fraction_non_increasing", None, ok as f64 / blocks.len() as f64);
                    for b in 0..nb {
                        let col: Vec<f64> = blocks.iter().map(|m| m[b]).collect();
                        let col_plain: Vec<f64> = blocks_plain.iter().map(|m| m[b]).collect();
                        val(&mut rep, "block_median", Some(b as u64), median(&col));
                        val(&mut rep, "block_median_plain", Some(b as u64), median(&col_plain));
                    }
                }
            }
            if a < 1.0 {
                let k = integrals::kappa(gamma)?.value;
                val(&mut rep, "kappa_times_2pi", None, k * std::f64::consts::TAU);
                val(
                    &mut rep,
                    "kappa_unit_frequency_times_2pi",
                    None,
                    integrals::kappa_unit_frequency(gamma)?.value * std::f64::consts::TAU,
                );
            }
        }
        Params::FourthMoment { ns } => {
            let mut samples: Vec<(u64, Vec<Complex64>)> = ns.iter().map(|&n| (n, Vec::new())).collect();
            for r in &sorted {
                let Payload::FourthMoment { coefficients } = &r.payload else {
                    return Err(mismatch());
                };
                for (i, (_, c)) in coefficients.iter().enumerate() {
                    samples[i].1.push(*c);
                }
            }
            for (n, cs) in &samples {
                let fourth: Vec<f64> = cs.iter().map(|c| c.norm_sqr().powi(2)).collect();
                est(&mut rep, "fourth_moment", Some(*n), &fourth);
            }
            let curve = fourth_moment_curve(&samples, a)?;
            if let Some(slope) = curve.slope {
                rep.estimates.push(NamedEstimate {
                    name: "fourth_moment_slope".into(),
                    n: None,
                    estimate: slope,
                });
            }
            val(&mut rep, "flagged_frequencies", None, curve.flagged.len() as f64);
            for (n, ratio) in curve.dyadic_ratios() {
                val(&mut rep, "dyadic_ratio", Some(n), ratio);
            }
        }
        Params::LimitLaw {
            n,
            permutations,
            bins,
            ..
        } => {
            let mut rescaled = Vec::new();
            let mut reference = Vec::new();
            let mut masses = Vec::new();
            for r in &sorted {
                let Payload::LimitLaw {
                    rescaled: z,
                    reference: w,
                    reference_mass,
                    ..
                } = &r.payload
                else {
                    return Err(mismatch());
                };
                rescaled.push(*z);
                reference.push(*w);
                masses.push(*reference_mass);
            }
            let sq: Vec<f64> = rescaled.iter().map(|z| z.norm_sqr()).collect();
            est(&mut rep, "rescaled_second_moment", Some(*n), &sq);
            est(&mut rep, "reference_mass", None, &masses);
            let constant = shared.reference.as_ref().map(|r| r.constant).unwrap_or(f64::NAN);
            val(&mut rep, "reference_constant", None, constant);
            val(&mut rep, "reference_constant_times_2pi", None, constant * std::f64::consts::TAU);
            if !rescaled.is_empty() {
                let seed = substream(cfg.master_seed, PERMUTATION_STREAM);
                let push = |rep: &mut AggregateReport, name: &str, report: TestReport| {
                    rep.tests.push(NamedTest {
                        name: name.into(),
                        report,
                    })
                };
                push(&mut rep, "energy", energy_distance_test(&rescaled, &reference, *permutations, seed)?);
                let ma: Vec<f64> = rescaled.iter().map(|z| z.norm()).collect();
                let mb: Vec<f64> = reference.iter().map(|z| z.norm()).collect();
                push(&mut rep, "ks_modulus", ks_test(&ma, &mb)?);
                push(&mut rep, "phase", phase_uniformity_test(&rescaled, *bins)?);
            }
        }
        Params::Capacity { s } => {
            let mut energy = Vec::new();
            let mut sums = Vec::new();
            for r in &sorted {
                let Payload::Capacity {
                    riesz_energy,
                    capacity_sum,
                    ..
                } = &r.payload
                else {
                    return Err(mismatch());
                };
                energy.push(*riesz_energy);
                sums.push(*capacity_sum);
            }
            est(&mut rep, "riesz_energy", None, &energy);
            est(&mut rep, "capacity_sum", None, &sums);
            let ratios: Vec<f64> = energy.iter().zip(&sums).map(|(e, c)| e / c).collect();
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            val(&mut rep, "ratio_min", None, lo);
            val(&mut rep, "ratio_max", None, hi);
            val(&mut rep, "ratio_spread", None, hi / lo);
            val(&mut rep, "s_star", None, s_star(gamma));
            val(&mut rep, "s", None, *s);
        }
        Params::Convolve { ks, .. } => {
            let mut diffs: Vec<Vec<f64>> = vec![Vec::new(); ks.len().saturating_sub(1)];
            let mut decreasing = 0;
            let mut worst = f64::INFINITY;
            for r in &sorted {
                let Payload::Convolve {
                    l1_differences,
                    min_density,
                    max_density,
                } = &r.payload
                else {
                    return Err(mismatch());
                };
                for (i, d) in l1_differences.iter().enumerate() {
                    diffs[i].push(*d);
                }
                if l1_differences.windows(2).all(|w| w[1] < w[0]) {
                    decreasing += 1;
                }
                worst = worst.min(min_density / max_density);
            }
            for (i, d) in diffs.iter().enumerate() {
                est(&mut rep, "l1_difference", Some(ks[i + 1] as u64), d);
            }
            val(&mut rep, "fraction_decreasing", None, decreasing as f64 / sorted.len().max(1) as f64);
            val(&mut rep, "worst_min_over_max", None, worst);
        }
        Params::ToyModel { a: a_cut, n, fine_scale, .. } => {
            let scale = (*n as f64).powf(1.0 - a);
            let mut proj_sq = Vec::new();
            let mut z_sq = Vec::new();
            let mut inc_sq = Vec::new();
            let (mut z_re, mut p_re, mut re, mut im, mut diff, mut cross) =
                (vec![], vec![], vec![], vec![], vec![], vec![]);
            for r in &sorted {
                let Payload::ToyModel {
                    z_n,
                    projection,
                    split,
                } = &r.payload
                else {
                    return Err(mismatch());
                };
                proj_sq.push(scale * projection.norm_sqr());
                z_sq.push(scale * z_n.norm_sqr());
                inc_sq.push(scale * (z_n - projection).norm_sqr());
                z_re.push(z_n.re);
                p_re.push(projection.re);
                re.push(split.real);
                im.push(split.imag);
                diff.push(split.real - split.imag);
                cross.push(split.cross);
            }
            est(&mut rep, "scaled_projection_second_moment", Some(*n), &proj_sq);
            est(&mut rep, "scaled_z_second_moment", Some(*n), &z_sq);
            est(&mut rep, "scaled_increment_second_moment", Some(*n), &inc_sq);
            est(&mut rep, "z_real_mean", Some(*n), &z_re);
            est(&mut rep, "projection_real_mean", Some(*n), &p_re);
            est(&mut rep, "split_real", Some(*n), &re);
            est(&mut rep, "split_imag", Some(*n), &im);
            est(&mut rep, "split_difference", Some(*n), &diff);
            est(&mut rep, "split_cross", Some(*n), &cross);
            let grid = GridSpec::unit_interval(cfg.grid_m)?;
            let t = *n as f64 / a_cut;
            val(&mut rep, "projection_second_moment_limit", None, projection_second_moment(gamma, *a_cut)?.value);
            val(
                &mut rep,
                "projection_second_moment_finite",
                None,
                projection_second_moment_finite(gamma, *n, *a_cut)?.value,
            );
            val(
                &mut rep,
                "projection_second_moment_discrete",
                None,
                projection_second_moment_discrete(gamma, *n, t, &grid)?,
            );
            let oracle = increment_split_discrete(gamma, *n as i64, t, *fine_scale, &grid)?;
            val(&mut rep, "split_real_discrete", None, oracle.real);
            val(&mut rep, "split_imag_discrete", None, oracle.imag);
            val(&mut rep, "split_cross_discrete", None, oracle.cross);
            val(
                &mut rep,
                "scaled_z_second_moment_discrete",
                None,
                scale * toy_second_moment_discrete(gamma, *n, *fine_scale, &grid)?,
            );
        }
        Params::Kappa => {
            let k = integrals::kappa(gamma)?;
            if !k.converged {
                return Err(GmcError::Numeric(format!("κ did not converge: {k:?}")));
            }
            val(&mut rep, "kappa", None, k.value);
            val(&mut rep, "kappa_error_estimate", None, k.abs_error_estimate);
            val(&mut rep, "kappa_closed_form", None, integrals::kappa_closed_form(gamma)?);
            val(&mut rep, "kappa_unit_frequency", None, integrals::kappa_unit_frequency(gamma)?.value);
            for n in [0u64, 1, 4, 16, 64] {
                val(&mut rep, "circle_second_moment", Some(n), integrals::circle_second_moment(n, gamma)?.value);
            }
            if a < 0.5 {
                let tail = integrals::second_moment_tail_constant(gamma)?;
                val(&mut rep, "tail_constant", None, tail.value);
                val(&mut rep, "tail_constant_relative_change", None, tail.relative_change);
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_sum_is_order_fixed() {
        let xs: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        assert_eq!(tree_sum(&xs), tree_sum(&xs.clone()));
        assert!((tree_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-12);
        let e = tree_estimate(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.value, 2.5);
    }

    #[test]
    fn single_replica_matches_direct_composition() {
        let mut cfg = RunConfig::new(Experiment::Decay, 0.25, 256);
        cfg.replicas = 1;
        cfg.master_seed = 42;
        cfg = cfg.with_extra("ns", "1,5,17");
        let out = run_replicas(&cfg).unwrap();
        let seed = seed_for_replica(42, 0);
        let field = crate::fields::sample_circle_field(128, GridSpec::circle(256).unwrap(), &mut rng_from_seed(seed)).unwrap();
        let series = crate::spectrum::fourier_coefficients(&build_measure(&field, 0.5).unwrap(), 128).unwrap();
        let Payload::Decay { coefficients, .. } = &out.records[0].payload else {
            panic!("wrong payload")
        };
        assert_eq!(out.records[0].seed, seed);
        for (n, c) in coefficients {
            assert_eq!(*c, series.at(*n as usize));
        }
    }

    #[test]
    fn invalid_config_rejected_before_work() {
        let mut cfg = RunConfig::new(Experiment::Capacity, 0.25, 256);
        cfg.n_modes = 1000;
        assert_eq!(run_replicas(&cfg).unwrap_err().exit_code(), 2);
    }
}
