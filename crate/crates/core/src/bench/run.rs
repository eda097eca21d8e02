use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auc, outlier_precision, recall, AUC_MAX};
use super::scenario::{generate_scenario, ScenarioConfig};
use super::{BenchError, BenchObject};
use crate::correspondence::Correspondence;
use crate::encoding::SurfaceEncoding;
use crate::solver::{
    hierarchical_solve, plain_kabsch_report, ransac_kabsch_report, RansacParams, SolveError, SolveReport, SolverConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub enum SolverKind {
    Plain,
    Ransac(RansacParams),
    Hierarchical(SolverConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub label: String,
    pub kind: SolverKind,
}

impl SolverSpec {
    pub fn plain() -> Self {
        SolverSpec {
            label: "plain".into(),
            kind: SolverKind::Plain,
        }
    }

    pub fn ransac(params: RansacParams) -> Self {
        SolverSpec {
            label: "ransac".into(),
            kind: SolverKind::Ransac(params),
        }
    }

    pub fn hierarchical(cfg: SolverConfig) -> Self {
        SolverSpec {
            label: "hierarchical".into(),
            kind: SolverKind::Hierarchical(cfg),
        }
    }

    pub fn labeled(self, label: impl Into<String>) -> Self {
        SolverSpec {
            label: label.into(),
            ..self
        }
    }

    /// Runs on one scene. RANSAC draws from a stream derived from both its
    /// own seed and the scene seed.
    pub fn run(
        &self,
        enc: &SurfaceEncoding,
        corrs: &[Correspondence],
        scene_seed: u64,
    ) -> Result<SolveReport, SolveError> {
        match &self.kind {
            SolverKind::Plain => plain_kabsch_report(enc, corrs),
            SolverKind::Ransac(params) => {
                let params = RansacParams {
                    seed: params.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ scene_seed,
                    ..params.clone()
                };
                ransac_kabsch_report(enc, corrs, &params)
            }
            SolverKind::Hierarchical(cfg) => hierarchical_solve(enc, corrs, cfg),
        }
    }
}

/// A named scenario configuration; every seed of a plan is run under it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioVariant {
    pub label: String,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub variants: Vec<ScenarioVariant>,
    pub solvers: Vec<SolverSpec>,
    pub first_seed: u64,
    pub seeds: u64,
    /// Evaluate per-record outlier precision (needs ground-truth labels).
    pub precision: bool,
}

impl BenchPlan {
    pub fn new(config: ScenarioConfig, solvers: Vec<SolverSpec>, seeds: u64) -> Self {
        BenchPlan {
            variants: vec![ScenarioVariant {
                label: String::new(),
                config,
            }],
            solvers,
            first_seed: 0,
            seeds,
            precision: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Plain Kabsch, RANSAC and the hierarchical solver side by side.
    Table3,
    /// Per-iteration outlier precision of the hierarchical solver.
    Table2,
    /// Sweep of the initial level `m_default` over 5..=16.
    Fig4,
    /// Point noise and dropped points against the clean baseline.
    Noise,
    /// Sweep of the pruning multiplier.
    Beta,
}

pub const FIG4_LEVELS: std::ops::RangeInclusive<u32> = 5..=16;
pub const BETA_SWEEP: [f64; 4] = [1.5, 2.0, 3.0, 5.0];

impl Preset {
    pub fn plan(self, seeds: u64) -> BenchPlan {
        let hier = SolverSpec::hierarchical(SolverConfig::default());
        let base = ScenarioConfig::default();
        match self {
            Preset::Table3 => BenchPlan::new(
                base,
                vec![SolverSpec::plain(), SolverSpec::ransac(RansacParams::default()), hier],
                seeds,
            ),
            Preset::Table2 => BenchPlan {
                precision: true,
                ..BenchPlan::new(base, vec![hier], seeds)
            },
            Preset::Fig4 => BenchPlan::new(
                base,
                FIG4_LEVELS
                    .map(|m| {
                        SolverSpec::hierarchical(SolverConfig {
                            m_default: m,
                            ..SolverConfig::default()
                        })
                        .labeled(format!("m{m}"))
                    })
                    .collect(),
                seeds,
            ),
            Preset::Noise => BenchPlan {
                variants: vec![
                    ScenarioVariant {
                        label: "baseline".into(),
                        config: base.clone(),
                    },
                    ScenarioVariant {
                        label: "noise10".into(),
                        config: ScenarioConfig {
                            point_noise: 10.0,
                            ..base.clone()
                        },
                    },
                    ScenarioVariant {
                        label: "drop20".into(),
                        config: ScenarioConfig {
                            drop_fraction: 0.2,
                            ..base
                        },
                    },
                ],
                ..BenchPlan::new(ScenarioConfig::default(), vec![hier], seeds)
            },
            Preset::Beta => BenchPlan::new(
                base,
                BETA_SWEEP
                    .iter()
                    .map(|&beta| {
                        SolverSpec::hierarchical(SolverConfig {
                            inlier_multiplier: beta,
                            ..SolverConfig::default()
                        })
                        .labeled(format!("beta{beta}"))
                    })
                    .collect(),
                seeds,
            ),
        }
    }
}

/// One solver on one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    /// Solver label, suffixed with `/variant` for multi-scenario plans.
    pub solver: String,
    pub seed: u64,
    pub add: f64,
    pub add_s: f64,
    /// `max(0, 1 - add_s / 100 mm)`; averaging it over seeds gives the AUC.
    pub auc: f64,
    pub time_ms: f64,
    pub iterations: usize,
    pub final_inliers: usize,
    pub error: Option<String>,
    /// Outlier precision per iteration record, when requested.
    pub precision: Option<Vec<f64>>,
    /// Active correspondences per iteration record.
    pub inliers_per_step: Vec<usize>,
}

pub fn run_benchmark(obj: &BenchObject, plan: &BenchPlan) -> Result<Vec<BenchRow>, BenchError> {
    for v in &plan.variants {
        v.config.validate()?;
    }
    let jobs: Vec<(&ScenarioVariant, u64)> = plan
        .variants
        .iter()
        .flat_map(|v| (plan.first_seed..plan.first_seed + plan.seeds).map(move |s| (v, s)))
        .collect();
    let tagged = plan.variants.len() > 1;
    let per_job: Vec<Vec<BenchRow>> = jobs
        .par_iter()
        .map(|&(variant, seed)| {
            let scenario = generate_scenario(&obj.encoding, obj.diameter, &variant.config.with_seed(seed))?;
            plan.solvers
                .iter()
                .map(|spec| {
                    let label = if tagged {
                        format!("{}/{}", spec.label, variant.label)
                    } else {
                        spec.label.clone()
                    };
                    let start = Instant::now();
                    let result = spec.run(&obj.encoding, &scenario.correspondences, seed);
                    let time_ms = start.elapsed().as_secs_f64() * 1e3;
                    Ok(match result {
                        Ok(report) => {
                            let add = obj.model.add(&report.pose, &scenario.pose);
                            let add_s = obj.model.add_s(&report.pose, &scenario.pose);
                            let precision = if plan.precision {
                                Some(outlier_precision(&report, &scenario.correspondences, &obj.encoding)?)
                            } else {
                                None
                            };
                            BenchRow {
                                solver: label,
                                seed,
                                add,
                                add_s,
                                auc: auc(&[add_s], AUC_MAX),
                                time_ms,
                                iterations: report.iterations.len(),
                                final_inliers: report.inliers.len(),
                                error: None,
                                precision,
                                inliers_per_step: report.iterations.iter().map(|r| r.inliers).collect(),
                            }
                        }
                        Err(e) => BenchRow {
                            solver: label,
                            seed,
                            add: f64::INFINITY,
                            add_s: f64::INFINITY,
                            auc: 0.0,
                            time_ms,
                            iterations: 0,
                            final_inliers: 0,
                            error: Some(e.to_string()),
                            precision: None,
                            inliers_per_step: Vec::new(),
                        },
                    })
                })
                .collect()
        })
        .collect::<Result<_, BenchError>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Aggregate over the seeds of one solver label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSummary {
    pub solver: String,
    pub runs: usize,
    pub failures: usize,
    /// Percent of runs with ADD below a tenth of the diameter.
    pub add_recall: f64,
    pub add_s_recall: f64,
    /// Percent.
    pub auc: f64,
    pub mean_time_ms: f64,
    /// Median over seeds of the outlier precision at each record.
    pub median_precision: Option<Vec<f64>>,
}

/// Summaries in first-appearance order of the solver labels.
pub fn summarize(rows: &[BenchRow], diameter: f64) -> Vec<SolverSummary> {
    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.solver.as_str()) {
            labels.push(&r.solver);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let group: Vec<&BenchRow> = rows.iter().filter(|r| r.solver == label).collect();
            let adds: Vec<f64> = group.iter().map(|r| r.add).collect();
            let add_s: Vec<f64> = group.iter().map(|r| r.add_s).collect();
            SolverSummary {
                solver: label.to_string(),
                runs: group.len(),
                failures: group.iter().filter(|r| r.error.is_some()).count(),
                add_recall: 100.0 * recall(&adds, diameter),
                add_s_recall: 100.0 * recall(&add_s, diameter),
                auc: 100.0 * auc(&add_s, AUC_MAX),
                mean_time_ms: group.iter().map(|r| r.time_ms).sum::<f64>() / group.len() as f64,
                median_precision: median_precision(&group),
            }
        })
        .collect()
}

fn median_precision(group: &[&BenchRow]) -> Option<Vec<f64>> {
    let series: Vec<&Vec<f64>> = group.iter().filter_map(|r| r.precision.as_ref()).collect();
    let steps = series.iter().map(|s| s.len()).max()?;
    Some(
        (0..steps)
            .map(|k| {
                let mut v: Vec<f64> = series.iter().filter_map(|s| s.get(k).copied()).collect();
                v.sort_by(f64::total_cmp);
                let n = v.len();
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    (v[n / 2 - 1] + v[n / 2]) / 2.0
                }
            })
            .collect(),
    )
}

#[derive(Serialize)]
struct CsvRow<'a> {
    solver: &'a str,
    seed: u64,
    add: f64,
    add_s: f64,
    auc: f64,
    time_ms: f64,
    iterations: usize,
    final_inliers: usize,
}

/// One line per row. With `timing` off the `time_ms` column is written as 0
/// so that repeated runs produce identical files.
pub fn write_rows_csv<W: Write>(out: W, rows: &[BenchRow], timing: bool) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            solver: &r.solver,
            seed: r.seed,
            add: r.add,
            add_s: r.add_s,
            auc: r.auc,
            time_ms: if timing { r.time_ms } else { 0.0 },
            iterations: r.iterations,
            final_inliers: r.final_inliers,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: `solver,seed,step,precision,inliers`.
pub fn write_precision_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["solver", "seed", "step", "precision", "inliers"])?;
    for r in rows {
        let Some(precision) = &r.precision else { continue };
        for (step, (p, n)) in precision.iter().zip(&r.inliers_per_step).enumerate() {
            w.write_record([
                r.solver.clone(),
                r.seed.to_string(),
                step.to_string(),
                p.to_string(),
                n.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Wide format: one ADD column per solver label, one row per seed in
/// ascending seed order.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<(), BenchError> {
    let mut labels: Vec<&str> = Vec::new();
    let mut seeds: Vec<u64> = Vec::new();
    for r in rows {
        if !labels.contains(&r.solver.as_str()) {
            labels.push(&r.solver);
        }
        if !seeds.contains(&r.seed) {
            seeds.push(r.seed);
        }
    }
    seeds.sort_unstable();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&labels)?;
    for seed in seeds {
        let record: Vec<String> = labels
            .iter()
            .map(|label| {
                rows.iter()
                    .find(|r| r.seed == seed && r.solver == *label)
                    .map_or(f64::NAN, |r| r.add)
                    .to_string()
            })
            .collect();
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Optional TOML overrides for a preset.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    pub seeds: Option<u64>,
    pub first_seed: Option<u64>,
    /// Keys of [`ScenarioConfig`] applied on top of every variant.
    pub scenario: Option<toml::Table>,
    /// Replaces the preset's solver list.
    pub solver: Option<Vec<SolverEntry>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverName {
    Plain,
    Ransac,
    Hierarchical,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    pub kind: SolverName,
    pub label: Option<String>,
    pub ransac: Option<RansacParams>,
    pub hierarchical: Option<SolverConfig>,
}

impl SolverEntry {
    pub fn into_spec(self) -> SolverSpec {
        let spec = match self.kind {
            SolverName::Plain => SolverSpec::plain(),
            SolverName::Ransac => SolverSpec::ransac(self.ransac.unwrap_or_default()),
            SolverName::Hierarchical => SolverSpec::hierarchical(self.hierarchical.unwrap_or_default()),
        };
        match self.label {
            Some(label) => spec.labeled(label),
            None => spec,
        }
    }
}

impl BenchFile {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        Ok(toml::from_str(text)?)
    }

    pub fn apply(self, plan: &mut BenchPlan) -> Result<(), BenchError> {
        if let Some(seeds) = self.seeds {
            plan.seeds = seeds;
        }
        if let Some(first) = self.first_seed {
            plan.first_seed = first;
        }
        if let Some(overrides) = self.scenario {
            for variant in &mut plan.variants {
                let mut table = toml::Table::try_from(&variant.config)?;
                table.extend(overrides.clone());
                variant.config = table.try_into()?;
            }
        }
        if let Some(solvers) = self.solver {
            plan.solvers = solvers.into_iter().map(SolverEntry::into_spec).collect();
        }
        Ok(())
    }
}
