//! Run configuration: one TOML document with a section per component, patched by `--set`.

use std::path::Path;

use pdlab_core::emfac::TrainConfig;
use pdlab_core::engine::GameConfig;
use pdlab_core::geometry::{NashParams, Point3, SurfaceParams};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub defender: [f64; 3],
    /// Attacker speed over defender speed.
    pub v: f64,
    pub radius: f64,
    pub theta_samples: usize,
    pub slices: usize,
    pub radial_tol: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        let p = SurfaceParams::default();
        SurfaceConfig {
            defender: [0.2, 0.2, 0.0],
            v: 0.8,
            radius: p.radius,
            theta_samples: p.theta_samples,
            slices: p.slices,
            radial_tol: p.radial_tol,
        }
    }
}

impl SurfaceConfig {
    pub fn params(&self) -> SurfaceParams {
        SurfaceParams {
            radius: self.radius,
            theta_samples: self.theta_samples,
            slices: self.slices,
            radial_tol: self.radial_tol,
        }
    }

    pub fn defender(&self) -> Point3 {
        Point3::from_array(self.defender)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameConfig,
    pub train: TrainConfig,
    pub nash: NashParams,
    pub surface: SurfaceConfig,
}

impl RunConfig {
    /// Reads `path` (or starts empty), applies `KEY=VALUE` overrides with dotted keys, then
    /// replaces every seed with `seed` when given.
    pub fn load(path: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                text.parse::<Table>().map_err(|e| CliError::Config(format!("{}: {}", p.display(), e.message())))?
            }
            None => Table::new(),
        };
        Self::from_table(table, sets, seed)
    }

    pub fn from_table(mut table: Table, sets: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        for s in sets {
            apply_set(&mut table, s)?;
        }
        fn section<T: serde::de::DeserializeOwned>(table: &mut Table, name: &str) -> Result<T, CliError> {
            table
                .remove(name)
                .unwrap_or_else(|| Value::Table(Table::new()))
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Config(format!("[{name}] {}", e.message())))
        }
        let mut cfg = RunConfig {
            game: section(&mut table, "game")?,
            train: section(&mut table, "train")?,
            nash: section(&mut table, "nash")?,
            surface: section(&mut table, "surface")?,
        };
        if let Some(extra) = table.keys().next() {
            return Err(CliError::Config(format!("unknown section [{extra}]")));
        }
        if let Some(seed) = seed {
            cfg.game.seed = seed;
            cfg.train.seed = seed;
            cfg.nash.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.game.validate().map_err(|e| CliError::Config(format!("game: {e}")))?;
        self.train.validate().map_err(|e| CliError::Config(format!("train: {e}")))?;
        let s = &self.surface;
        if !(s.v > 0.0 && s.radius > 0.0 && s.theta_samples > 0 && s.slices > 0 && s.radial_tol > 0.0) {
            return Err(CliError::Config("surface: v, radius, theta_samples, slices and radial_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn to_table(&self) -> Table {
        Table::try_from(self).expect("config serializes to a table")
    }
}

/// `a.b.c=value`. The value is read as a TOML literal, falling back to a bare string.
fn apply_set(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set {assignment}: expected KEY=VALUE")))?;
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("--set {assignment}: empty key segment")));
    }
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set {assignment}: {p} is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
