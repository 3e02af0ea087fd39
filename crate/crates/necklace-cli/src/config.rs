//! JSON run configuration and its conversion into core types.

use necklace_core::graph_model::{ConditionTable, NecklaceParams, VertexCondition, WaveContext};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub necklace: NecklaceConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wave: Option<WaveConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignConfig>,
    /// Period length L for group velocities; defaults to l2 + l3.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NecklaceConfig {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    /// Constant vertex condition, 3x3 row-major. Exactly one of `A` and
    /// `A_table` must be present.
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<[[f64; 3]; 3]>,
    /// Frequency-dependent condition: rows keyed by eps*omega, linearly
    /// interpolated. Accepted by `bands` only and requires `wave`.
    #[serde(rename = "A_table", skip_serializing_if = "Option::is_none")]
    pub a_table: Option<Vec<TableRow>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub eps_omega: f64,
    #[serde(rename = "A")]
    pub a: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WaveConfig {
    pub epsilon: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub grid: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub n_cells: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignConfig {
    pub sigma0: f64,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_offsets: Option<(u32, u32)>,
    /// When present, `design` runs once per entry and appends a log-log
    /// slope table for the pole distance, minimum group velocity and the
    /// reflection at sigma0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_sweep: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cells: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl RunConfig {
    pub fn load(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {path}: {e}")))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config {path}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let n = &self.necklace;
        if !(n.l2 > 0.0 && n.l1 >= n.l2 && n.l3 > 0.0) {
            return Err(CliError::config(
                "necklace lengths must satisfy l1 >= l2 > 0 and l3 > 0".into(),
            ));
        }
        match (&n.a, &n.a_table) {
            (None, None) => {
                return Err(CliError::config(
                    "necklace: one of \"A\" or \"A_table\" is required".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "necklace: \"A\" and \"A_table\" are mutually exclusive".into(),
                ))
            }
            _ => {}
        }
        if let Some(scan) = &self.scan {
            if !(scan.sigma_min > 0.0 && scan.sigma_max > scan.sigma_min) {
                return Err(CliError::config(
                    "scan: window must satisfy 0 < sigma_min < sigma_max".into(),
                ));
            }
            if scan.grid < 2 {
                return Err(CliError::config("scan: grid must be at least 2".into()));
            }
        }
        Ok(())
    }

    /// Constant-condition necklace parameters; errors when the config uses a
    /// condition table instead.
    pub fn params(&self) -> Result<NecklaceParams, CliError> {
        let n = &self.necklace;
        let a = n.a.ok_or_else(|| {
            CliError::config("this command needs a constant \"A\" (tables are scan-only)".into())
        })?;
        let vc = VertexCondition::new(a)
            .map_err(|e| CliError::config(format!("necklace.A: {e}")))?;
        NecklaceParams::new(n.l1, n.l2, n.l3, vc)
            .map_err(|e| CliError::config(format!("necklace lengths: {e}")))
    }

    pub fn condition_table(&self) -> Result<Option<(ConditionTable, WaveContext)>, CliError> {
        let Some(rows) = &self.necklace.a_table else {
            return Ok(None);
        };
        let wave = self.wave.ok_or_else(|| {
            CliError::config("\"A_table\" requires a \"wave\" block to map sigma onto eps*omega".into())
        })?;
        let wave = WaveContext::new(wave.epsilon, wave.lambda0, wave.lambda1)
            .map_err(|e| CliError::config(format!("wave: {e}")))?;
        let mut table = Vec::with_capacity(rows.len());
        for row in rows {
            let vc = VertexCondition::new(row.a)
                .map_err(|e| CliError::config(format!("A_table at {}: {e}", row.eps_omega)))?;
            table.push((row.eps_omega, vc));
        }
        let table =
            ConditionTable::new(table).map_err(|e| CliError::config(format!("A_table: {e}")))?;
        Ok(Some((table, wave)))
    }

    pub fn scan_or_err(&self) -> Result<ScanConfig, CliError> {
        self.scan
            .ok_or_else(|| CliError::config("this command requires a \"scan\" block".into()))
    }

    pub fn period_length_or_default(&self, params: &NecklaceParams) -> f64 {
        self.period_length.unwrap_or(params.l2 + params.l3)
    }
}
