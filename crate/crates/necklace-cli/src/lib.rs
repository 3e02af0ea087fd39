//! Command implementations behind the `necklace` binary.
//!
//! Data goes to standard output (or `--output`); progress notes go to
//! standard error. Numbers are printed with 17 significant digits so reruns
//! are byte-identical and values round-trip through parsing.

pub mod config;

use config::{OutputFormat, RunConfig};
use necklace_core::designer::{
    design, log_log_slope, verify_design, DesignRequest, DesignerError,
};
use necklace_core::graph_model::NecklaceParams;
use necklace_core::monodromy::HillPoint;
use necklace_core::spectrum::{dispersion_k, scan_bands, scan_bands_source, HillSource, TableNecklace};
use necklace_core::truncated_scattering::{
    reflection_formula, solve_scattering_oracle, ScatteringError, TruncatedNecklace,
};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write as _;

/// Errors carrying their process exit code: 2 for configuration problems,
/// 1 for numerical failures.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub exit_code: u8,
}

impl CliError {
    pub fn config(message: String) -> Self {
        Self {
            message,
            exit_code: 2,
        }
    }

    pub fn numeric(message: String) -> Self {
        Self {
            message,
            exit_code: 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<DesignerError> for CliError {
    fn from(e: DesignerError) -> Self {
        match e {
            // a zero arch coupling is a configuration-level invalidity
            DesignerError::Degenerate => CliError::config(format!("{e}")),
            other => CliError::numeric(format!("{other}")),
        }
    }
}

/// 17 significant digits; round-trips exactly through f64 parsing.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runtime overrides shared by the subcommands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub grid: Option<usize>,
    pub cells: Option<usize>,
    pub eps: Option<f64>,
    pub sigma0: Option<f64>,
    pub jobs: Option<usize>,
    pub output: Option<String>,
    pub format: Option<OutputFormat>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(scan) = cfg.scan.as_mut() {
            if let Some(v) = self.sigma_min {
                scan.sigma_min = v;
            }
            if let Some(v) = self.sigma_max {
                scan.sigma_max = v;
            }
            if let Some(v) = self.grid {
                scan.grid = v;
            }
        } else if self.sigma_min.is_some() || self.sigma_max.is_some() || self.grid.is_some() {
            cfg.scan = Some(config::ScanConfig {
                sigma_min: self.sigma_min.unwrap_or(0.1),
                sigma_max: self.sigma_max.unwrap_or(10.0),
                grid: self.grid.unwrap_or(1000),
            });
        }
        if let Some(v) = self.cells {
            cfg.truncation = Some(config::TruncationConfig { n_cells: v });
        }
        if let Some(design) = cfg.design.as_mut() {
            if let Some(v) = self.eps {
                design.eps = v;
            }
            if let Some(v) = self.sigma0 {
                design.sigma0 = v;
            }
        } else if self.eps.is_some() || self.sigma0.is_some() {
            cfg.design = Some(config::DesignConfig {
                sigma0: self.sigma0.unwrap_or(1.0),
                eps: self.eps.unwrap_or(0.05),
                branch_offsets: None,
                eps_sweep: None,
                n_cells: None,
            });
        }
        if self.output.is_some() || self.format.is_some() {
            let out = cfg.output.get_or_insert(config::OutputConfig {
                format: None,
                path: None,
            });
            if let Some(p) = &self.output {
                out.path = Some(p.clone());
            }
            if let Some(f) = self.format {
                out.format = Some(f);
            }
        }
    }
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| CliError::numeric(format!("thread pool: {e}")))
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match cfg.output.as_ref().and_then(|o| o.path.as_deref()) {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::numeric(format!("writing {path}: {e}"))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::numeric(format!("stdout: {e}")))
        }
    }
}

fn output_format(cfg: &RunConfig) -> OutputFormat {
    cfg.output
        .as_ref()
        .and_then(|o| o.format)
        .unwrap_or(OutputFormat::Csv)
}

fn rows_to_csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::with_capacity(rows.len() * 64 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn rows_to_json(header: &str, rows: &[Vec<String>]) -> String {
    let keys: Vec<&str> = header.split(',').collect();
    let mut objs = Vec::with_capacity(rows.len());
    for row in rows {
        let mut map = serde_json::Map::new();
        for (k, v) in keys.iter().zip(row.iter()) {
            map.insert(
                (*k).to_string(),
                if v.is_empty() {
                    serde_json::Value::Null
                } else {
                    serde_json::Value::String(v.clone())
                },
            );
        }
        objs.push(serde_json::Value::Object(map));
    }
    let mut text = serde_json::to_string_pretty(&objs).expect("serializable");
    text.push('\n');
    text
}

fn render(cfg: &RunConfig, header: &str, rows: &[Vec<String>]) -> String {
    match output_format(cfg) {
        OutputFormat::Csv => rows_to_csv(header, rows),
        OutputFormat::Json => rows_to_json(header, rows),
    }
}

/// `bands`: Hill discriminant over the scan grid with pole rows interleaved
/// and each row tagged with the band that contains it.
pub fn cmd_bands(mut cfg: RunConfig, ov: &Overrides) -> Result<(), CliError> {
    ov.apply(&mut cfg);
    let scan = cfg.scan_or_err()?;
    let window = (scan.sigma_min, scan.sigma_max);
    let pool = thread_pool(ov.jobs)?;

    // scan through either the constant or the table-driven source
    let table = cfg.condition_table()?;
    let (structure, hill_at): (_, Box<dyn Fn(f64) -> HillPoint + Sync>) = match &table {
        Some((table, wave)) => {
            let src = TableNecklace {
                l1: cfg.necklace.l1,
                l2: cfg.necklace.l2,
                l3: cfg.necklace.l3,
                table,
                wave: *wave,
            };
            let bs = scan_bands_source(&src, window, scan.grid)
                .map_err(|e| CliError::numeric(format!("scan: {e}")))?;
            let src = TableNecklace {
                l1: cfg.necklace.l1,
                l2: cfg.necklace.l2,
                l3: cfg.necklace.l3,
                table,
                wave: *wave,
            };
            (bs, Box::new(move |s| src.hill(s)))
        }
        None => {
            let params = cfg.params()?;
            let bs = scan_bands(&params, window, scan.grid)
                .map_err(|e| CliError::numeric(format!("scan: {e}")))?;
            (bs, Box::new(move |s| params.hill(s)))
        }
    };
    if !structure.is_grid_adequate() {
        eprintln!(
            "advisory: grid too coarse for {} cell(s) with sub-step structure",
            structure.coarse_cells.len()
        );
    }

    let step = (window.1 - window.0) / (scan.grid - 1) as f64;
    let grid_sigmas: Vec<f64> = (0..scan.grid)
        .map(|i| {
            if i + 1 == scan.grid {
                window.1
            } else {
                window.0 + i as f64 * step
            }
        })
        .collect();
    let values: Vec<HillPoint> = pool.install(|| {
        grid_sigmas
            .par_iter()
            .map(|&s| hill_at(s))
            .collect()
    });

    // merge grid rows and pole rows in sigma order
    let band_id = |s: f64| -> String {
        structure
            .bands
            .iter()
            .position(|&(a, b)| a <= s && s <= b)
            .map(|i| i.to_string())
            .unwrap_or_default()
    };
    let mut rows: Vec<(f64, Vec<String>)> = Vec::with_capacity(grid_sigmas.len() + structure.poles.len());
    for (s, h) in grid_sigmas.iter().zip(values.iter()) {
        let (f_str, is_pole) = match h {
            HillPoint::Value(f) => (fmt_f64(*f), 0u8),
            HillPoint::Pole => (String::new(), 1),
        };
        rows.push((
            *s,
            vec![fmt_f64(*s), f_str, is_pole.to_string(), band_id(*s)],
        ));
    }
    for &p in &structure.poles {
        rows.push((p, vec![fmt_f64(p), String::new(), "1".into(), String::new()]));
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let rows: Vec<Vec<String>> = rows.into_iter().map(|(_, r)| r).collect();
    eprintln!(
        "bands: {} rows, {} band(s), {} pole(s)",
        rows.len(),
        structure.bands.len(),
        structure.poles.len()
    );
    emit(&cfg, &render(&cfg, "sigma,F,is_pole,band_id", &rows))
}

/// `dispersion`: k(sigma) and V_g per band; rows inside the differentiation
/// margin of an edge are omitted.
pub fn cmd_dispersion(mut cfg: RunConfig, ov: &Overrides) -> Result<(), CliError> {
    ov.apply(&mut cfg);
    let scan = cfg.scan_or_err()?;
    let params = cfg.params()?;
    let period_length = cfg.period_length_or_default(&params);
    let window = (scan.sigma_min, scan.sigma_max);
    let structure = scan_bands(&params, window, scan.grid)
        .map_err(|e| CliError::numeric(format!("scan: {e}")))?;
    let pool = thread_pool(ov.jobs)?;

    let per_band: Vec<Vec<Vec<String>>> = pool.install(|| {
        structure
            .bands
            .par_iter()
            .enumerate()
            .map(|(band_idx, &(lo, hi))| {
                // trim ends by a hair so every sample is strictly interior
                let pad = (hi - lo) * 1e-9;
                let pts =
                    match dispersion_k(&params, (lo + pad, hi - pad), scan.grid.max(8), period_length)
                    {
                        Ok(p) => p,
                        Err(_) => return Vec::new(),
                    };
                pts.into_iter()
                    .filter_map(|p| {
                        p.vg.map(|vg| {
                            vec![
                                fmt_f64(p.sigma),
                                fmt_f64(p.k),
                                fmt_f64(vg),
                                band_idx.to_string(),
                            ]
                        })
                    })
                    .collect()
            })
            .collect()
    });
    let rows: Vec<Vec<String>> = per_band.into_iter().flatten().collect();
    eprintln!("dispersion: {} rows over {} band(s)", rows.len(), structure.bands.len());
    emit(&cfg, &render(&cfg, "sigma,k,vg,band_id", &rows))
}

/// `reflect`: closed-form and oracle reflection over the scan grid.
pub fn cmd_reflect(mut cfg: RunConfig, ov: &Overrides) -> Result<(), CliError> {
    ov.apply(&mut cfg);
    let scan = cfg.scan_or_err()?;
    let params = cfg.params()?;
    let n_cells = cfg
        .truncation
        .as_ref()
        .map(|t| t.n_cells)
        .ok_or_else(|| CliError::config("reflect requires a \"truncation\" block or --cells".into()))?;
    let tn = TruncatedNecklace::new(params, n_cells)
        .ok_or_else(|| CliError::config("truncation.n_cells must be at least 1".into()))?;
    let window = (scan.sigma_min, scan.sigma_max);
    let step = (window.1 - window.0) / (scan.grid - 1) as f64;
    let pool = thread_pool(ov.jobs)?;

    let rows: Vec<Vec<String>> = pool.install(|| {
        (0..scan.grid)
            .into_par_iter()
            .map(|i| {
                let sigma = if i + 1 == scan.grid {
                    window.1
                } else {
                    window.0 + i as f64 * step
                };
                let (formula_str, mut flag) = match reflection_formula(&tn, sigma) {
                    Ok(f) => (fmt_f64(f.value), String::new()),
                    Err(ScatteringError::BandEdge { .. }) => (String::new(), "edge".into()),
                    Err(ScatteringError::OutsideBand { f }) if f.is_infinite() => {
                        (String::new(), "pole".into())
                    }
                    Err(ScatteringError::OutsideBand { .. }) => (String::new(), "gap".into()),
                    Err(_) => (String::new(), "singular".into()),
                };
                let (r_str, t_str, defect_str) = match solve_scattering_oracle(&tn, sigma) {
                    Ok(res) => (
                        fmt_f64(res.r.norm()),
                        fmt_f64(res.t.norm()),
                        fmt_f64(res.unitarity_defect),
                    ),
                    Err(_) => {
                        flag = "singular".into();
                        (String::new(), String::new(), String::new())
                    }
                };
                vec![fmt_f64(sigma), formula_str, r_str, t_str, defect_str, flag]
            })
            .collect()
    });
    eprintln!("reflect: {} rows at N = {n_cells}", rows.len());
    emit(
        &cfg,
        &render(
            &cfg,
            "sigma,formula_r,oracle_r,oracle_t,unitarity_defect,flag",
            &rows,
        ),
    )
}

#[derive(Serialize)]
struct DesignReport {
    config: RunConfig,
    result: DesignResultReport,
    verification: DiagnosticsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_sweep: Option<SweepReport>,
}

#[derive(Serialize)]
struct DesignResultReport {
    x: f64,
    y: f64,
    gamma: f64,
    l1: f64,
    l2: f64,
    l3: f64,
    swapped: bool,
    #[serde(rename = "A")]
    a: [[f64; 3]; 3],
    diagnostics: DiagnosticsReport,
}

#[derive(Serialize)]
struct DiagnosticsReport {
    f_at_sigma0: f64,
    hs_defect: f64,
    pole_sigma: f64,
    pole_distance: f64,
    band: (f64, f64),
    passband: (f64, f64),
    min_group_velocity: f64,
    oracle_reflection_at_sigma0: f64,
    n_cells: usize,
}

impl From<&necklace_core::designer::DesignDiagnostics> for DiagnosticsReport {
    fn from(d: &necklace_core::designer::DesignDiagnostics) -> Self {
        Self {
            f_at_sigma0: d.f_at_sigma0,
            hs_defect: d.hs_defect,
            pole_sigma: d.pole_sigma,
            pole_distance: d.pole_distance,
            band: d.band,
            passband: d.passband,
            min_group_velocity: d.min_group_velocity,
            oracle_reflection_at_sigma0: d.oracle_reflection_at_sigma0,
            n_cells: d.n_cells,
        }
    }
}

#[derive(Serialize)]
struct SweepReport {
    entries: Vec<SweepEntry>,
    slope_pole_distance: f64,
    slope_min_group_velocity: f64,
    slope_oracle_reflection: f64,
}

#[derive(Serialize)]
struct SweepEntry {
    eps: f64,
    pole_distance: f64,
    min_group_velocity: f64,
    oracle_reflection_at_sigma0: f64,
}

/// `design`: run the parameter design, re-verify through the public APIs,
/// and emit a JSON report plus a Hill-discriminant CSV of the surrounding
/// window (written next to the report when an output path is given).
pub fn cmd_design(mut cfg: RunConfig, ov: &Overrides) -> Result<(), CliError> {
    ov.apply(&mut cfg);
    let dc = cfg
        .design
        .clone()
        .ok_or_else(|| CliError::config("design requires a \"design\" block or --eps/--sigma0".into()))?;
    let n = &cfg.necklace;
    let a = n.a.ok_or_else(|| {
        CliError::config("design needs a constant \"A\" (tables are scan-only)".into())
    })?;
    let vc = necklace_core::graph_model::VertexCondition::new(a)
        .map_err(|e| CliError::config(format!("necklace.A: {e}")))?;

    let mut req = DesignRequest::new(vc, dc.sigma0, dc.eps);
    if let Some(off) = dc.branch_offsets {
        req.branch_offsets = off;
    }
    let result = design(&req)?;
    let n_cells = dc.n_cells.unwrap_or(result.diagnostics.n_cells);
    let verification = verify_design(&result, n_cells)?;

    let eps_sweep = match &dc.eps_sweep {
        Some(list) if list.len() >= 2 => {
            let mut entries = Vec::with_capacity(list.len());
            for &eps in list {
                let mut sweep_req = req;
                sweep_req.eps = eps;
                let r = design(&sweep_req)?;
                entries.push(SweepEntry {
                    eps,
                    pole_distance: r.diagnostics.pole_distance,
                    min_group_velocity: r.diagnostics.min_group_velocity,
                    oracle_reflection_at_sigma0: r.diagnostics.oracle_reflection_at_sigma0,
                });
            }
            let pts = |f: fn(&SweepEntry) -> f64| -> Vec<(f64, f64)> {
                entries.iter().map(|e| (e.eps, f(e))).collect()
            };
            Some(SweepReport {
                slope_pole_distance: log_log_slope(&pts(|e| e.pole_distance)),
                slope_min_group_velocity: log_log_slope(&pts(|e| e.min_group_velocity)),
                slope_oracle_reflection: log_log_slope(&pts(|e| e.oracle_reflection_at_sigma0)),
                entries,
            })
        }
        _ => None,
    };

    let report = DesignReport {
        config: cfg.clone(),
        result: DesignResultReport {
            x: result.x,
            y: result.y,
            gamma: result.gamma,
            l1: result.params.l1,
            l2: result.params.l2,
            l3: result.params.l3,
            swapped: result.swapped,
            a: *result.params.vc.entries(),
            diagnostics: (&result.diagnostics).into(),
        },
        verification: (&verification).into(),
        eps_sweep,
    };
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::numeric(format!("report: {e}")))?;
    json.push('\n');

    // verification CSV: the Hill landscape around sigma0
    let span = (12.0 * result.diagnostics.pole_distance).max(0.02 * result.sigma0);
    let window = ((result.sigma0 - span).max(1e-6), result.sigma0 + span);
    let csv = hill_csv(&result.params, window, 4001)?;

    match cfg.output.as_ref().and_then(|o| o.path.as_deref()) {
        Some(path) => {
            std::fs::write(path, &json)
                .map_err(|e| CliError::numeric(format!("writing {path}: {e}")))?;
            let csv_path = format!("{path}.verify.csv");
            std::fs::write(&csv_path, &csv)
                .map_err(|e| CliError::numeric(format!("writing {csv_path}: {e}")))?;
            eprintln!("design: report {path}, verification CSV {csv_path}");
        }
        None => {
            eprintln!("design: no --output given; verification CSV suppressed");
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(json.as_bytes())
                .map_err(|e| CliError::numeric(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn hill_csv(
    params: &NecklaceParams,
    window: (f64, f64),
    grid: usize,
) -> Result<String, CliError> {
    let structure = scan_bands(params, window, grid)
        .map_err(|e| CliError::numeric(format!("verification scan: {e}")))?;
    let step = (window.1 - window.0) / (grid - 1) as f64;
    let band_id = |s: f64| -> String {
        structure
            .bands
            .iter()
            .position(|&(a, b)| a <= s && s <= b)
            .map(|i| i.to_string())
            .unwrap_or_default()
    };
    let mut rows: Vec<(f64, String)> = Vec::with_capacity(grid + structure.poles.len());
    for i in 0..grid {
        let s = if i + 1 == grid {
            window.1
        } else {
            window.0 + i as f64 * step
        };
        let mut line = String::new();
        match params.hill(s) {
            HillPoint::Value(f) => {
                let _ = write!(line, "{},{},0,{}", fmt_f64(s), fmt_f64(f), band_id(s));
            }
            HillPoint::Pole => {
                let _ = write!(line, "{},,1,", fmt_f64(s));
            }
        }
        rows.push((s, line));
    }
    for &p in &structure.poles {
        rows.push((p, format!("{},,1,", fmt_f64(p))));
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out = String::from("sigma,F,is_pole,band_id\n");
    for (_, line) in rows {
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}
