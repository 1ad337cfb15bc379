//! Experiment driver: single runs, seeded sweeps over communication
//! parameters, metric records, and plot-data export.

use crate::baselines::{dmdda_allocate, fts_allocate, jain_index, no_fusion, Allocation};
use crate::optimizer::ProblemInstance;
use crate::scenario::{build_scenario, ScenarioConfig};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("unknown scheme '{0}' (expected pacp, fts, dmdda, or nofusion)")]
    UnknownScheme(String),
    #[error("unknown sweep parameter '{0}' (expected tx_power, bandwidth, num_cavs, max_range, noise_offset, or energy_budget)")]
    UnknownParameter(String),
    #[error("sweep needs at least one value and one seed")]
    EmptySweep,
    #[error("no records to emit")]
    NoRecords,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("emitted solution failed feasibility: {0}")]
    InfeasibleRecord(String),
    #[error(transparent)]
    Pipeline(#[from] crate::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Pacp,
    Fts,
    Dmdda,
    NoFusion,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Pacp, Scheme::Fts, Scheme::Dmdda, Scheme::NoFusion];

    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "pacp" => Ok(Scheme::Pacp),
            "fts" => Ok(Scheme::Fts),
            "dmdda" | "dmdda-emulated" => Ok(Scheme::Dmdda),
            "nofusion" | "no-fusion" => Ok(Scheme::NoFusion),
            other => Err(CliError::UnknownScheme(other.to_string())),
        }
    }

    /// Output label; the throughput baseline is marked as an emulation.
    pub fn tag(&self) -> &'static str {
        match self {
            Scheme::Pacp => "pacp",
            Scheme::Fts => "fts",
            Scheme::Dmdda => "dmdda-emulated",
            Scheme::NoFusion => "nofusion",
        }
    }
}

/// Swept communication parameter, mapped onto its config field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    TxPower,
    Bandwidth,
    NumCavs,
    MaxRange,
    NoiseOffset,
    EnergyBudget,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "tx_power" => Ok(Self::TxPower),
            "bandwidth" => Ok(Self::Bandwidth),
            "num_cavs" => Ok(Self::NumCavs),
            "max_range" => Ok(Self::MaxRange),
            "noise_offset" => Ok(Self::NoiseOffset),
            "energy_budget" => Ok(Self::EnergyBudget),
            other => Err(CliError::UnknownParameter(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::TxPower => "tx_power",
            Self::Bandwidth => "bandwidth",
            Self::NumCavs => "num_cavs",
            Self::MaxRange => "max_range",
            Self::NoiseOffset => "noise_offset",
            Self::EnergyBudget => "energy_budget",
        }
    }

    pub fn apply(&self, config: &mut ScenarioConfig, value: f64) {
        match self {
            Self::TxPower => config.tx_power_w = value,
            Self::Bandwidth => config.bandwidth_hz = value,
            Self::NumCavs => config.num_vehicles = value as usize,
            Self::MaxRange => config.road_length_m = value,
            Self::NoiseOffset => config.noise_offset_db = value,
            Self::EnergyBudget => config.energy_budget_j = value,
        }
    }
}

/// One pipeline execution distilled into the metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub scheme: &'static str,
    pub param: String,
    pub value: f64,
    pub utility: f64,
    pub u_r: f64,
    pub u_p: f64,
    pub throughput_bps: f64,
    pub jain: f64,
    pub coverage_m2: f64,
    pub links: usize,
    pub iters: usize,
    pub wall_ms: u64,
}

pub const CSV_HEADER: &str =
    "seed,scheme,param,value,utility,u_r,u_p,throughput_bps,jain,coverage_m2,links,iters,wall_ms";

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.scheme,
            self.param,
            self.value,
            self.utility,
            self.u_r,
            self.u_p,
            self.throughput_bps,
            self.jain,
            self.coverage_m2,
            self.links,
            self.iters,
            self.wall_ms
        )
    }
}

/// Read a config file; `None` gives the defaults.
pub fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::ConfigRead {
                path: p.to_path_buf(),
                source,
            })?;
            let config: ScenarioConfig =
                serde_json::from_str(&text).map_err(|source| CliError::ConfigParse {
                    path: p.to_path_buf(),
                    source,
                })?;
            config
                .validate()
                .map_err(|e| CliError::Pipeline(crate::Error::Scenario(e)))?;
            Ok(config)
        }
    }
}

/// Execute one scheme on one seeded scenario and distill the record.
///
/// The solution is re-verified against every model constraint before the
/// record is returned.
pub fn run_scheme(
    config: &ScenarioConfig,
    scheme: Scheme,
    param: &str,
    value: f64,
    timing: bool,
) -> Result<RunRecord, CliError> {
    let state = build_scenario(config).map_err(crate::Error::from)?;
    let inst = ProblemInstance::from_scenario(&state, config)?;
    record_for(&inst, scheme, param, value, timing)
}

/// Evaluate one scheme on an already-built instance.
pub fn record_for(
    inst: &ProblemInstance,
    scheme: Scheme,
    param: &str,
    value: f64,
    timing: bool,
) -> Result<RunRecord, CliError> {
    let start = Instant::now();
    let config = &inst.config;

    let (alloc, iters) = match scheme {
        Scheme::Pacp => {
            let res = inst.alternate()?;
            let subchannels = vec![1u32; res.links.len()];
            (
                Allocation {
                    scheme: "pacp",
                    links: res.links,
                    rates: res.rates,
                    subchannels,
                },
                res.iterations,
            )
        }
        Scheme::Fts => (fts_allocate(inst).map_err(crate::Error::from)?, 1),
        Scheme::Dmdda => (dmdda_allocate(inst)?, 1),
        Scheme::NoFusion => (no_fusion(inst), 1),
    };

    let report = inst.feasibility_check(&alloc.links, &alloc.rates);
    if !report.is_feasible() {
        return Err(CliError::InfeasibleRecord(format!(
            "seed {} scheme {}: {:?}",
            config.seed,
            alloc.scheme,
            report.violations()
        )));
    }

    // Priority-weighted raw throughput over established links.
    let mut u_r = 0.0;
    let mut rate_alloc = Vec::new();
    for l in alloc.links.iter() {
        u_r += inst.priorities.get(l.tx, l.rx) * alloc.rates.d_at(l.tx, l.rx);
        rate_alloc.push(alloc.rates.u_at(l.tx, l.rx));
    }
    // Fused perceived area per receiver, own region included.
    let mut u_p = 0.0;
    for &rx in &inst.receivers {
        u_p += inst.fused_coverage_area(&alloc.links, rx);
    }
    let utility = config.weight_quality * u_r + config.weight_region * u_p;
    let jain = if rate_alloc.is_empty() {
        0.0
    } else {
        jain_index(&rate_alloc).unwrap_or(0.0)
    };

    Ok(RunRecord {
        seed: config.seed,
        scheme: alloc.scheme,
        param: param.to_string(),
        value,
        utility,
        u_r,
        u_p,
        throughput_bps: alloc.rates.total_throughput(),
        jain,
        coverage_m2: u_p,
        links: alloc.links.len(),
        iters,
        wall_ms: if timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        },
    })
}

/// `run` subcommand: one (config, scheme, seed) cell appended to
/// `<out>/records.csv`.
pub fn run(
    config_path: Option<&Path>,
    scheme: Scheme,
    seed: Option<u64>,
    out_dir: &Path,
    timing: bool,
) -> Result<RunRecord, CliError> {
    let mut config = load_config(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let record = run_scheme(&config, scheme, "none", 0.0, timing)?;
    append_records(&out_dir.join("records.csv"), std::slice::from_ref(&record))?;
    Ok(record)
}

/// `sweep` subcommand: Cartesian product of scheme x value x seed, executed
/// in a work pool and written out in a fixed order.
pub fn sweep(
    config_path: Option<&Path>,
    schemes: &[Scheme],
    param: SweepParam,
    values: &[f64],
    num_seeds: u64,
    out_dir: &Path,
    timing: bool,
) -> Result<Vec<RunRecord>, CliError> {
    if schemes.is_empty() || values.is_empty() || num_seeds == 0 {
        return Err(CliError::EmptySweep);
    }
    let base = load_config(config_path)?;
    let mut cells = Vec::new();
    for &scheme in schemes {
        for &value in values {
            for s in 0..num_seeds {
                cells.push((scheme, value, base.seed + s));
            }
        }
    }
    let mut records = cells
        .par_iter()
        .map(|&(scheme, value, seed)| {
            let mut config = base.clone();
            config.seed = seed;
            param.apply(&mut config, value);
            run_scheme(&config, scheme, param.name(), value, timing)
        })
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| {
        a.scheme
            .cmp(b.scheme)
            .then(a.value.partial_cmp(&b.value).unwrap())
            .then(a.seed.cmp(&b.seed))
    });

    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write_records(&out_dir.join("records.csv"), &records)?;
    emit_plotdata(&records, out_dir)?;
    Ok(records)
}

fn append_records(path: &Path, records: &[RunRecord]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let mut text = if path.exists() {
        std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?
    } else {
        format!("{CSV_HEADER}\n")
    };
    for r in records {
        writeln!(text, "{}", r.csv_row()).expect("string write cannot fail");
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_records(path: &Path, records: &[RunRecord]) -> Result<(), CliError> {
    let mut text = format!("{CSV_HEADER}\n");
    for r in records {
        writeln!(text, "{}", r.csv_row()).expect("string write cannot fail");
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Mean and sample standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Write per-figure series files: for each metric, one row per
/// (scheme, swept value) holding mean and standard deviation over seeds.
pub fn emit_plotdata(records: &[RunRecord], out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if records.is_empty() {
        return Err(CliError::NoRecords);
    }
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    type Metric = fn(&RunRecord) -> f64;
    let metrics: [(&str, Metric); 3] = [
        ("utility", |r| r.utility),
        ("throughput", |r| r.throughput_bps),
        ("coverage", |r| r.coverage_m2),
    ];
    let mut groups: Vec<(&'static str, f64)> = records
        .iter()
        .map(|r| (r.scheme, r.value))
        .collect::<Vec<_>>();
    groups.sort_by(|a, b| a.0.cmp(b.0).then(a.1.partial_cmp(&b.1).unwrap()));
    groups.dedup();

    let mut written = Vec::new();
    for (name, extract) in metrics {
        let mut text = String::from("scheme,value,mean,std,n\n");
        for &(scheme, value) in &groups {
            let xs: Vec<f64> = records
                .iter()
                .filter(|r| r.scheme == scheme && r.value == value)
                .map(extract)
                .collect();
            let (mean, std) = mean_std(&xs);
            writeln!(text, "{scheme},{value},{mean},{std},{}", xs.len())
                .expect("string write cannot fail");
        }
        let path = out_dir.join(format!("plot_{name}.csv"));
        std::fs::write(&path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

/// `oracle` subcommand: greedy vs exhaustive optimum on seeded small
/// instances; returns (instances checked, bound violations).
pub fn oracle(
    instances: usize,
    max_n: usize,
    max_k: usize,
    verbose: bool,
) -> Result<(usize, usize), CliError> {
    let outcomes = crate::optimizer::oracle_suite(instances, max_n, max_k)?;
    let mut violations = 0;
    for o in &outcomes {
        if !o.bound_ok {
            violations += 1;
        }
        if verbose || !o.bound_ok {
            let ratio = if o.opt_utility > 0.0 {
                o.greedy_utility / o.opt_utility
            } else {
                1.0
            };
            println!(
                "seed {:3}  n={} k={}  greedy/opt = {:.4}  {}",
                o.seed,
                o.n,
                o.k,
                ratio,
                if o.bound_ok { "ok" } else { "VIOLATION" }
            );
        }
    }
    Ok((outcomes.len(), violations))
}

/// Dump a vehicle's BEV raster as a portable graymap for inspection.
pub fn dump_bev(
    config_path: Option<&Path>,
    seed: Option<u64>,
    vehicle: usize,
    out: &Path,
) -> Result<(), CliError> {
    let mut config = load_config(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let state = build_scenario(&config).map_err(crate::Error::from)?;
    if vehicle >= state.vehicles.len() {
        return Err(CliError::Pipeline(crate::Error::Scenario(
            crate::scenario::ScenarioError::InvalidConfig(format!(
                "vehicle index {vehicle} out of range (n = {})",
                state.vehicles.len()
            )),
        )));
    }
    let grid = crate::scenario::rasterize_bev(
        &state.vehicles[vehicle],
        &state.objects,
        &config,
        config.seed,
    );
    let mut text = format!("P2\n{} {}\n255\n", grid.side, grid.side);
    for iy in (0..grid.side).rev() {
        let row: Vec<&str> = (0..grid.side)
            .map(|ix| if grid.get(ix, iy) { "255" } else { "0" })
            .collect();
        writeln!(text, "{}", row.join(" ")).expect("string write cannot fail");
    }
    std::fs::write(out, text).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })
}
