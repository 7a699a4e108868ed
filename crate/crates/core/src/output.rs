//! Result files. Every CSV starts with a `# schema: <name>/v<k>` line
//! followed by a header row.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::experiments::{EnergyRow, InfeasibilityRow};
use crate::scene::Scene;
use crate::solvers::SolveReport;
use crate::techniques::Assignment;

pub const CASE_A_SCHEMA: &str = "isac-case-a-sweep/v1";
pub const CASE_B_SCHEMA: &str = "isac-case-b-sweep/v1";
pub const SCENE_SCHEMA: &str = "isac-scene/v1";
pub const BEAMPATTERN_SCHEMA: &str = "isac-beampattern/v1";
pub const TRACE_SCHEMA: &str = "isac-trace/v1";
pub const MANIFEST_SCHEMA: &str = "isac-manifest/v1";

pub const CASE_A_COLUMNS: [&str; 6] = ["scheme", "gamma_db", "infeasibility", "failures", "ci_halfwidth", "n_setups"];
pub const CASE_B_COLUMNS: [&str; 5] = ["scheme", "n_antennas", "mean_energy_j", "ci_halfwidth", "n_setups"];

/// Writes `rows` as CSV under a schema line. Floats use the shortest
/// round-trip representation, so equal results give equal bytes.
pub fn write_csv<W: Write, R: Serialize>(mut out: W, schema: &str, rows: &[R]) -> Result<()> {
    writeln!(out, "# schema: {schema}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Same as [`write_csv`] for rows without a serde form.
pub fn write_table<W: Write>(mut out: W, schema: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    writeln!(out, "# schema: {schema}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn case_a_csv<W: Write>(out: W, rows: &[InfeasibilityRow]) -> Result<()> {
    write_csv(out, CASE_A_SCHEMA, rows)
}

pub fn case_b_csv<W: Write>(out: W, rows: &[EnergyRow]) -> Result<()> {
    write_csv(out, CASE_B_SCHEMA, rows)
}

/// One row per node. `serving_bs` is filled for CUs when an association is
/// known; `role` is one of `bs`, `rx_bs`, `cu`, `st`, `clutter`.
pub fn scene_csv<W: Write>(out: W, scene: &Scene, assignment: Option<&Assignment>) -> Result<()> {
    let rx = assignment.and_then(|a| a.rx_bs());
    let mut rows = Vec::new();
    let row = |role: &str, i: usize, p: [f64; 2], antennas: String, serving: String| vec![role.to_string(), i.to_string(), p[0].to_string(), p[1].to_string(), antennas, serving];
    for (b, &p) in scene.bs_positions.iter().enumerate() {
        let role = if rx == Some(b) { "rx_bs" } else { "bs" };
        rows.push(row(role, b, p, scene.bs_antennas[b].to_string(), String::new()));
    }
    for (k, &p) in scene.cu_positions.iter().enumerate() {
        let serving = assignment
            .and_then(|a| a.user_assoc.iter().position(|r| r.get(k).copied().unwrap_or(false)))
            .map_or(String::new(), |b| b.to_string());
        rows.push(row("cu", k, p, String::new(), serving));
    }
    for (s, &p) in scene.st_positions.iter().enumerate() {
        rows.push(row("st", s, p, String::new(), String::new()));
    }
    for (c, &p) in scene.clutter_positions.iter().enumerate() {
        rows.push(row("clutter", c, p, String::new(), String::new()));
    }
    write_table(out, SCENE_SCHEMA, &["role", "index", "x_m", "y_m", "antennas", "serving_bs"], &rows)
}

/// Beampattern samples in degrees with the ideal level at each angle.
pub fn beampattern_csv<W: Write>(out: W, theta_rad: &[f64], gain: &[f64], ideal: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = theta_rad
        .iter()
        .zip(gain)
        .zip(ideal)
        .map(|((t, g), d)| vec![t.to_degrees().to_string(), g.to_string(), d.to_string()])
        .collect();
    write_table(out, BEAMPATTERN_SCHEMA, &["theta_deg", "gain", "ideal"], &rows)
}

/// Objective after each outer iteration of every named solve. The final
/// constraint violation is reported on the last row of each solve only.
pub fn trace_csv<W: Write>(out: W, solves: &[(String, &SolveReport<f64>)]) -> Result<()> {
    let mut rows = Vec::new();
    for (name, r) in solves {
        let last = r.trace.len().saturating_sub(1);
        for (i, f) in r.trace.iter().enumerate() {
            let viol = if i == last { r.max_violation.to_string() } else { String::new() };
            rows.push(vec![name.clone(), i.to_string(), f.to_string(), viol]);
        }
    }
    write_table(out, TRACE_SCHEMA, &["design", "iteration", "objective", "max_violation"], &rows)
}

/// Echo of a run for exact replay.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub schema: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub master_seed: u64,
    pub setup_seeds: &'a [u64],
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch; the only field that differs between replays.
    pub timestamp_unix: u64,
}

impl<'a, C: Serialize> Manifest<'a, C> {
    pub fn new(command: &'a str, config: &'a C, master_seed: u64, setup_seeds: &'a [u64], outputs: Vec<String>) -> Self {
        let timestamp_unix = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self {
            schema: MANIFEST_SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            master_seed,
            setup_seeds,
            outputs,
            timestamp_unix,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
