//! Command implementations behind the `gfree` binary: run, analytic, validate.
//!
//! Every command writes into an output directory through [`OutputSet`], which
//! stages files under temporary names and only renames them into place once
//! the whole command has succeeded.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::analytic::{
    optimize_ring_densities, success_probability, success_probability_quadrature, AnalyticError, CellModel, Optimized,
};
use crate::scenario::{ConfigError, ScenarioConfig};
use crate::sim::rng::replication_seed;
use crate::sim::{run_replication, ReplicationOutput, RunOptions, SimError};

/// Version of the CSV and JSON layouts written by this module.
pub const SCHEMA_VERSION: u32 = 1;

pub const METRICS_HEADER: &str = "variant,replication,device,packet_index,replica,time_s,power_dbm,subchannel,code,repetitions,snr_ok,sir_ok,ack,reward,energy_j";
pub const OCCUPANCY_HEADER: &str = "variant,replication,t_start_s,subchannel,transmissions";
pub const PLAN_HEADER: &str = "ring,r_inner_m,r_outer_m,code,density_per_m2,share,duty";
pub const SUCCESS_HEADER: &str = "z_m,code,p_success,p_success_quadrature";

/// Largest relative gap tolerated between closed-form and quadrature success.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analytic(AnalyticError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("validation gate failed: {0}")]
    Gate(String),
}

impl From<AnalyticError> for HarnessError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::Unsupported(_) | AnalyticError::EmptyCodeSet => HarnessError::Config(ConfigError::Invalid {
                field: "action_space".into(),
                message: e.to_string(),
            }),
            other => HarnessError::Analytic(other),
        }
    }
}

impl HarnessError {
    /// Process exit status: 3 config, 4 runtime, 5 validation gate.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Sim(SimError::Config(_)) => 3,
            HarnessError::Gate(_) => 5,
            _ => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Files staged in one output directory; dropped unfinished, they are removed.
pub struct OutputSet {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
            committed: false,
        })
    }

    /// Opens a staged file that becomes `name` on commit.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<fs::File>, HarnessError> {
        let tmp = self.dir.join(format!(".{name}.partial"));
        let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        self.staged.push((tmp, self.dir.join(name)));
        Ok(BufWriter::new(file))
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), HarnessError> {
        let mut w = self.create(name)?;
        let path = self.dir.join(name);
        w.write_all(contents.as_bytes()).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))
    }

    pub fn commit(mut self) -> Result<Vec<PathBuf>, HarnessError> {
        let mut done = Vec::new();
        for (tmp, path) in &self.staged {
            if let Err(e) = fs::rename(tmp, path) {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                return Err(io_err(path)(e));
            }
            done.push(path.clone());
        }
        self.committed = true;
        Ok(done)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for (tmp, _) in &self.staged {
                let _ = fs::remove_file(tmp);
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantSummary {
    pub label: String,
    pub policy: &'static str,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub steady_state_success: MeanStd,
    pub convergence_packet_index: Vec<Option<usize>>,
    pub mean_energy_per_packet_j: f64,
    pub energy_per_delivered_packet_j: Option<f64>,
    pub delivery_rate: f64,
    pub ack_rate: f64,
    pub packets: u64,
    pub transmissions: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub replications: u32,
    pub variants: Vec<VariantSummary>,
}

fn summarize(label: &str, cfg: &ScenarioConfig, outputs: &[ReplicationOutput]) -> VariantSummary {
    let steady: Vec<f64> = outputs.iter().map(|o| o.metrics.steady_state_success()).collect();
    let packets: u64 = outputs.iter().map(|o| o.metrics.total_packets).sum();
    let delivered: u64 = outputs.iter().map(|o| o.metrics.total_delivered).sum();
    let acks: u64 = outputs.iter().map(|o| o.metrics.total_acks).sum();
    let energy: f64 = outputs.iter().map(|o| o.metrics.total_energy_j).sum();
    let ratio = |a: f64, b: u64| if b == 0 { 0.0 } else { a / b as f64 };
    VariantSummary {
        label: label.to_string(),
        policy: cfg.policy.as_str(),
        alpha: cfg.learning.alpha,
        beta: cfg.effective_beta(),
        rho: cfg.learning.rho,
        steady_state_success: MeanStd::of(&steady),
        convergence_packet_index: outputs.iter().map(|o| o.metrics.convergence_index()).collect(),
        mean_energy_per_packet_j: ratio(energy, packets),
        energy_per_delivered_packet_j: (delivered > 0).then(|| energy / delivered as f64),
        delivery_rate: ratio(delivered as f64, packets),
        ack_rate: ratio(acks as f64, packets),
        packets,
        transmissions: outputs.iter().map(|o| o.transmissions as u64).sum(),
    }
}

fn metrics_rows(out: &mut String, label: &str, replication: u32, rep: &ReplicationOutput) {
    let rewards: HashMap<(usize, u64), f64> = rep.packets.iter().map(|p| ((p.device, p.packet_index), p.reward)).collect();
    for r in &rep.records {
        let reward = rewards.get(&(r.device, r.packet_index)).copied().unwrap_or(0.0);
        let _ = writeln!(
            out,
            "{label},{replication},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.device,
            r.packet_index,
            r.replica,
            r.t_start,
            r.action.power_dbm,
            r.action.subchannel,
            r.action.code,
            r.action.repetitions,
            r.snr_ok as u8,
            r.sir_ok as u8,
            r.ack_delivered as u8,
            reward,
            r.energy_j
        );
    }
}

fn occupancy_rows(out: &mut String, label: &str, replication: u32, rep: &ReplicationOutput) {
    for b in &rep.metrics.buckets {
        for (sc, n) in b.occupancy.iter().enumerate() {
            let _ = writeln!(out, "{label},{replication},{},{sc},{n}", b.t_start);
        }
    }
}

/// Runs every variant of `cfg` with `replications` paired replications
/// derived from `seed`, and writes `metrics.csv`, `occupancy.csv` and
/// `summary.json` into `out_dir`.
///
/// Replications run on the current rayon pool in batches of its size, so
/// per-transmission records never pile up for the whole run.
pub fn run_command(cfg: &ScenarioConfig, seed: u64, replications: Option<u32>, out_dir: &Path) -> Result<RunSummary, HarnessError> {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    if let Some(r) = replications {
        cfg.replications = r;
    }
    cfg.validate()?;

    let mut files = OutputSet::new(out_dir)?;
    let metrics_path = out_dir.join("metrics.csv");
    let occupancy_path = out_dir.join("occupancy.csv");
    let mut metrics = files.create("metrics.csv")?;
    let mut occupancy = files.create("occupancy.csv")?;
    writeln!(metrics, "# gfree metrics v{SCHEMA_VERSION}\n{METRICS_HEADER}").map_err(io_err(&metrics_path))?;
    writeln!(occupancy, "# gfree occupancy v{SCHEMA_VERSION}\n{OCCUPANCY_HEADER}").map_err(io_err(&occupancy_path))?;

    let opts = RunOptions {
        keep_records: true,
        ..RunOptions::default()
    };
    let batch = rayon::current_num_threads().max(1) as u32;
    let mut variants = Vec::new();
    for (label, vcfg) in cfg.expand() {
        let mut kept = Vec::new();
        let mut start = 0;
        while start < cfg.replications {
            let end = (start + batch).min(cfg.replications);
            let outputs: Vec<Result<ReplicationOutput, SimError>> = {
                use rayon::prelude::*;
                (start..end)
                    .into_par_iter()
                    .map(|r| run_replication(&vcfg, replication_seed(seed, r), &opts))
                    .collect()
            };
            for (r, out) in (start..end).zip(outputs) {
                let mut out = out?;
                let mut text = String::new();
                metrics_rows(&mut text, &label, r, &out);
                metrics.write_all(text.as_bytes()).map_err(io_err(&metrics_path))?;
                text.clear();
                occupancy_rows(&mut text, &label, r, &out);
                occupancy.write_all(text.as_bytes()).map_err(io_err(&occupancy_path))?;
                out.records = Vec::new();
                out.learners = Vec::new();
                kept.push(out);
            }
            start = end;
        }
        variants.push(summarize(&label, &vcfg, &kept));
    }
    metrics.flush().map_err(io_err(&metrics_path))?;
    occupancy.flush().map_err(io_err(&occupancy_path))?;
    drop(metrics);
    drop(occupancy);

    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.name.clone(),
        seed,
        replications: cfg.replications,
        variants,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    files.write("summary.json", &(json + "\n"))?;
    files.commit()?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyticSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub beta: f64,
    pub objective: f64,
    pub method: crate::analytic::SearchMethod,
    pub evaluated: usize,
    /// Largest relative gap between closed-form and quadrature success.
    pub cross_check_max_rel_gap: f64,
}

/// Optimizes the ring plan for `cfg`, checks the closed form against
/// quadrature over the emitted distance table, and writes `plan.csv`,
/// `success.csv` and `analytic.json`.
pub fn analytic_command(cfg: &ScenarioConfig, out_dir: &Path) -> Result<(Optimized, AnalyticSummary), HarnessError> {
    cfg.validate()?;
    let model = CellModel::from_scenario(cfg)?;
    let edges = model.ring_edges(cfg.analytic.rings, cfg.analytic.ring_edges_m.as_deref());
    let beta = cfg.effective_beta();
    let best = optimize_ring_densities(&model, beta, &edges, cfg.analytic.grid_step)?;

    let mut plan = format!("# gfree plan v{SCHEMA_VERSION}\n{PLAN_HEADER}\n");
    for (j, ring) in best.plan.rings.iter().enumerate() {
        for (i, &c) in best.plan.codes.iter().enumerate() {
            let density = best.plan.densities[j][i];
            let share = if best.plan.density > 0.0 { density / best.plan.density } else { 0.0 };
            let _ = writeln!(
                plan,
                "{j},{},{},{c},{density},{share},{}",
                ring.r_inner, ring.r_outer, best.plan.duty[i]
            );
        }
    }

    let points = cfg.analytic.table_points;
    let mut table = format!("# gfree success v{SCHEMA_VERSION}\n{SUCCESS_HEADER}\n");
    let mut worst: f64 = 0.0;
    for k in 1..=points {
        let z = model.radius_m * k as f64 / points as f64;
        for &c in &best.plan.codes {
            let closed = success_probability(c, z, &best.plan, &model)?;
            let numeric = success_probability_quadrature(c, z, &best.plan, &model)?;
            let gap = (closed - numeric).abs() / closed.abs().max(1e-300);
            worst = worst.max(if closed == numeric { 0.0 } else { gap });
            let _ = writeln!(table, "{z},{c},{closed},{numeric}");
        }
    }
    if !(worst <= CROSS_CHECK_TOLERANCE) {
        return Err(HarnessError::Gate(format!(
            "closed-form and quadrature success differ by {worst:.3e} (limit {CROSS_CHECK_TOLERANCE:e})"
        )));
    }

    let summary = AnalyticSummary {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.name.clone(),
        beta,
        objective: best.objective,
        method: best.method,
        evaluated: best.evaluated,
        cross_check_max_rel_gap: worst,
    };
    let mut files = OutputSet::new(out_dir)?;
    files.write("plan.csv", &plan)?;
    files.write("success.csv", &table)?;
    files.write("analytic.json", &(serde_json::to_string_pretty(&summary).expect("serializes") + "\n"))?;
    files.commit()?;
    Ok((best, summary))
}

/// One-line description of a valid scenario.
pub fn describe(cfg: &ScenarioConfig) -> String {
    let labels: Vec<String> = cfg.expand().into_iter().map(|(l, _)| l).collect();
    format!(
        "{}: policy {}, {} subchannel(s), {} power level(s), codes {:?}, {} replication(s), variants [{}]",
        if cfg.name.is_empty() { "scenario" } else { &cfg.name },
        cfg.policy.as_str(),
        cfg.action_space.subchannels,
        cfg.action_space.powers_dbm.len(),
        cfg.action_space.codes,
        cfg.replications,
        labels.join(", ")
    )
}

/// Applies the `GFREE_WORKERS` environment variable to the global rayon pool.
pub fn configure_workers() -> Result<usize, HarnessError> {
    let Ok(value) = std::env::var("GFREE_WORKERS") else {
        return Ok(rayon::current_num_threads());
    };
    let n: usize = value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        HarnessError::Config(ConfigError::Invalid {
            field: "GFREE_WORKERS".into(),
            message: format!("`{value}` is not a positive integer"),
        })
    })?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(rayon::current_num_threads())
}
