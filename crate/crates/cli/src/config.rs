//! Run configuration: a TOML file with `[problem]` and `[solver]` sections,
//! patched by `--set section.key=value` overrides.
//!
//! ```toml
//! seed = 7
//! [problem]
//! m = 200
//! [solver]
//! step = 40.0
//! sequence = "cyclic"
//! ```

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;
use tkz::apps::experiments::{SolverOverrides, SolverSpec};
use toml::{Table, Value};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig<P> {
    experiment: Option<String>,
    seed: Option<u64>,
    #[serde(default)]
    problem: P,
    #[serde(default)]
    solver: SolverOverrides,
}

/// Fully resolved settings of one run; written back next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolved<P> {
    pub experiment: String,
    pub seed: u64,
    pub problem: P,
    pub solver: SolverSpec,
}

pub fn read_table(path: &Path) -> Result<Table, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.parse::<Table>().map_err(|e| format!("{}: {e}", path.display()))
}

/// Parses a right-hand side as a TOML value, falling back to a bare string.
fn parse_value(s: &str) -> Value {
    match format!("v = {s}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(s.to_string()),
    }
}

/// Applies one `dotted.key=value` override.
pub fn apply_set(table: &mut Table, assignment: &str) -> Result<(), String> {
    let (key, value) =
        assignment.split_once('=').ok_or_else(|| format!("--set expects key=value, got '{assignment}'"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("bad key '{key}'"));
    }
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut t = table;
    for p in path {
        let entry = t.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = entry.as_table_mut().ok_or_else(|| format!("'{p}' is not a section"))?;
    }
    t.insert(last.to_string(), parse_value(value.trim()));
    Ok(())
}

/// Resolves the settings of a run of `experiment`. The seed falls back to
/// `seed_override`, the file's `seed` and then the library default.
pub fn resolve<P: DeserializeOwned + Default>(
    experiment: &str,
    table: Table,
    seed_override: Option<u64>,
    defaults: impl Fn(&P) -> SolverSpec,
) -> Result<Resolved<P>, String> {
    let raw: RawConfig<P> = Value::Table(table).try_into().map_err(|e: toml::de::Error| e.message().to_string())?;
    if let Some(e) = &raw.experiment {
        if e != experiment {
            return Err(format!("config is for '{e}', not '{experiment}'"));
        }
    }
    let solver = defaults(&raw.problem).apply(&raw.solver);
    let seed = seed_override.or(raw.seed).unwrap_or(tkz::random::DEFAULT_SEED);
    // Config files store integers as i64.
    if i64::try_from(seed).is_err() {
        return Err(format!("seed {seed} exceeds {}", i64::MAX));
    }
    Ok(Resolved { experiment: experiment.to_string(), seed, problem: raw.problem, solver })
}
