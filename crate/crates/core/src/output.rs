//! Atomic file emission and the CSV dialect.
//!
//! All reals are written with 17 significant digits so files round-trip
//! exactly; rows use LF endings and `.` decimals. Files land via a
//! temporary in the target directory plus rename, so interrupted runs
//! never leave corrupt output behind.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::full_info::{StrategyTableFull, ValueTableFull};
use crate::partial_info::ValueTablePartial;
use crate::simulate::{EventKind, SimulationPath};

/// 17 significant digits: exact f64 round-trip.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write bytes atomically (temp file in the same directory, then rename).
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_csv<I>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Observed-regime tables: one row per (time, state). States are 1-based
/// in the file.
pub fn write_full_table_csv(
    value: &ValueTableFull,
    strategy: &StrategyTableFull,
    path: &Path,
) -> Result<()> {
    let states = value.coeffs[0].len();
    let rows = value.times.iter().enumerate().flat_map(|(n, &t)| {
        let value = &value.coeffs[n];
        let control = &strategy.controls[n];
        (0..states)
            .map(|i| {
                format!("{},{},{},{}", real(t), i + 1, real(value[i]), real(control[i]))
            })
            .collect::<Vec<_>>()
    });
    write_csv(path, "t,state,beta_or_gamma,h_star", rows)
}

/// Belief-space tables: one row per (time, belief) node.
pub fn write_partial_table_csv(table: &ValueTablePartial, path: &Path) -> Result<()> {
    let grid = &table.grid;
    let rows = (0..=grid.n_t).flat_map(|n| {
        let t = grid.time(n);
        (0..=grid.n_pi)
            .map(move |k| {
                format!(
                    "{},{},{},{}",
                    real(t),
                    real(grid.belief(k)),
                    real(table.values[n][k]),
                    real(table.controls[n][k])
                )
            })
            .collect::<Vec<_>>()
    });
    write_csv(path, "t,pi,value,h_star", rows)
}

/// Event log of one simulated path: (t, kind, detail) rows where detail
/// is the 1-based atom index of a price jump or "i->j" for a transition.
pub fn write_path_events_csv(path: &SimulationPath, file: &Path) -> Result<()> {
    let rows = path.events.iter().map(|e| match e.kind {
        EventKind::PriceJump { atom } => {
            format!("{},price_jump,{}", real(e.time), atom + 1)
        }
        EventKind::ChainTransition { from, to } => {
            format!("{},chain_transition,{}->{}", real(e.time), from + 1, to + 1)
        }
    });
    write_csv(file, "t,kind,detail", rows)
}

/// Reporting-grid rows of one simulated path. The belief column holds the
/// bull probability, empty in observed-regime mode.
pub fn write_path_grid_csv(path: &SimulationPath, file: &Path) -> Result<()> {
    let rows = path.report_times.iter().enumerate().map(|(i, &t)| {
        let pi = path
            .filter_probs
            .as_ref()
            .map(|rows| real(rows[i][0]))
            .unwrap_or_default();
        format!(
            "{},{},{},{}",
            real(t),
            real(path.wealth_samples[i]),
            pi,
            path.chain_states[i] + 1
        )
    });
    write_csv(file, "t,wealth,pi,chain_state", rows)
}

pub fn write_json_pretty<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}
