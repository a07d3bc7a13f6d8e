//! Bit-stable trajectory CSV export and re-import.
//!
//! The schema is frozen:
//!   t,H,I,E,J_norm,omega_x,omega_y,l1_to_eq,sup_ratio,H_bound,L1_bound
//! Numbers are written in shortest round-trip decimal form, one row per
//! record in time order, newline-terminated. Identical inputs produce
//! byte-identical files.

use anyhow::{bail, Context};
use vicsek_circle::rates::EnvelopePoint;
use vicsek_circle::solver::Trajectory;

pub const TRAJECTORY_HEADER: &str =
    "t,H,I,E,J_norm,omega_x,omega_y,l1_to_eq,sup_ratio,H_bound,L1_bound";

/// One exported row; envelope columns are NaN when no envelope is known.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub h: f64,
    pub i: f64,
    pub e: f64,
    pub j_norm: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub l1_to_eq: f64,
    pub sup_ratio: f64,
    pub h_bound: f64,
    pub l1_bound: f64,
}

pub fn rows_from_trajectory(
    trajectory: &Trajectory,
    envelopes: Option<&[EnvelopePoint]>,
) -> Vec<TrajectoryRow> {
    trajectory
        .records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let d = &rec.diagnostics;
            let (h_bound, l1_bound) = match envelopes {
                Some(env) => (env[i].h_bound, env[i].l1_bound),
                None => (f64::NAN, f64::NAN),
            };
            TrajectoryRow {
                t: d.t,
                h: d.relative_entropy,
                i: d.fisher_information,
                e: d.free_energy,
                j_norm: d.momentum.magnitude(),
                omega_x: d.omega.x(),
                omega_y: d.omega.y(),
                l1_to_eq: d.l1_to_equilibrium,
                sup_ratio: d.sup_ratio,
                h_bound,
                l1_bound,
            }
        })
        .collect()
}

pub fn emit_trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.t,
            r.h,
            r.i,
            r.e,
            r.j_norm,
            r.omega_x,
            r.omega_y,
            r.l1_to_eq,
            r.sup_ratio,
            r.h_bound,
            r.l1_bound
        ));
    }
    out
}

pub fn parse_trajectory_csv(text: &str) -> anyhow::Result<Vec<TrajectoryRow>> {
    let mut lines = text.lines();
    let header = lines.next().context("empty trajectory CSV")?;
    if header != TRAJECTORY_HEADER {
        bail!("unexpected trajectory CSV header: '{header}'");
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            bail!("row {} has {} fields, expected 11", idx + 2, fields.len());
        }
        let parse = |k: usize| -> anyhow::Result<f64> {
            fields[k]
                .parse::<f64>()
                .with_context(|| format!("row {}, column {}", idx + 2, k + 1))
        };
        rows.push(TrajectoryRow {
            t: parse(0)?,
            h: parse(1)?,
            i: parse(2)?,
            e: parse(3)?,
            j_norm: parse(4)?,
            omega_x: parse(5)?,
            omega_y: parse(6)?,
            l1_to_eq: parse(7)?,
            sup_ratio: parse(8)?,
            h_bound: parse(9)?,
            l1_bound: parse(10)?,
        });
    }
    Ok(rows)
}

/// JSON-lines rendering of the same rows.
pub fn emit_trajectory_jsonl(rows: &[TrajectoryRow]) -> anyhow::Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}
