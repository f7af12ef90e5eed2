//! Plot-ready tables derived from a finished run directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::Settings;
use crate::run::{verify_manifest, RunDir, MANIFEST};
use crate::UsageError;

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let mut r =
            csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| UsageError(format!("column {name} missing")).into())
    }

    /// Selected columns, each optionally followed by a derived one.
    fn project(&self, cols: &[(&str, Option<(&str, fn(f64) -> f64)>)]) -> Result<Vec<u8>> {
        let idx = cols
            .iter()
            .map(|(c, _)| self.col(c))
            .collect::<Result<Vec<_>>>()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = Vec::new();
        for (c, derived) in cols {
            header.push(c.to_string());
            if let Some((name, _)) = derived {
                header.push(name.to_string());
            }
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut out = Vec::new();
            for ((_, derived), &i) in cols.iter().zip(&idx) {
                out.push(row[i].clone());
                if let Some((_, f)) = derived {
                    let v: f64 = row[i].parse().unwrap_or(f64::NAN);
                    out.push(f(v).to_string());
                }
            }
            w.write_record(&out)?;
        }
        Ok(w.into_inner()?)
    }
}

fn label(dir: &Path) -> Option<bool> {
    let text = std::fs::read_to_string(dir.join("summary.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    v.get("control")?.as_bool()
}

fn has_artifacts(dir: &Path) -> Result<bool> {
    if !dir.is_dir() {
        return Err(UsageError(format!("{} is not a directory", dir.display())).into());
    }
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if !name.starts_with('.') && name != MANIFEST {
            return Ok(true);
        }
    }
    Ok(false)
}

pub fn export(run_dir: &Path, compare: Option<&Path>, out: Option<PathBuf>) -> Result<u8> {
    if !has_artifacts(run_dir)? {
        return Err(UsageError(format!("{} holds no run artifacts", run_dir.display())).into());
    }
    verify_manifest(run_dir)?;
    if let Some(other) = compare {
        if !has_artifacts(other)? {
            return Err(UsageError(format!("{} holds no run artifacts", other.display())).into());
        }
        verify_manifest(other)?;
    }
    let mut run = RunDir::open(&out.unwrap_or_else(|| run_dir.join("plots")))?;
    run.inputs.push(run_dir.display().to_string());
    let mut produced = 0;

    let trace = run_dir.join("trace.csv");
    if trace.exists() {
        let t = Table::read(&trace)?;
        let csv = t.project(&[
            ("n", None),
            ("osc", Some(("log10_osc", f64::log10))),
            ("osc_normalized", None),
            ("budget", Some(("log10_budget", f64::log10))),
            ("within_budget", None),
        ])?;
        run.write("oscillation.csv", &csv)?;
        produced += 1;
    }
    let raster = run_dir.join("raster.csv");
    if raster.exists() {
        let t = Table::read(&raster)?;
        let csv = t.project(&[
            ("a", None),
            ("r", None),
            ("margin", None),
            ("delta", None),
            ("feasible", None),
        ])?;
        run.write("margin_raster.csv", &csv)?;
        produced += 1;
    }
    let sweep = run_dir.join("green_sweep.csv");
    if sweep.exists() {
        let t = Table::read(&sweep)?;
        let csv = t.project(&[
            ("scale", Some(("log2_scale", f64::log2))),
            ("min_ratio", None),
            ("median_ratio", None),
            ("max_ratio", None),
        ])?;
        run.write("green_ratio.csv", &csv)?;
        produced += 1;
    }
    let cmp = run_dir.join("comparison.csv");
    if cmp.exists() {
        let t = Table::read(&cmp)?;
        let csv = t.project(&[
            ("depth", None),
            ("cell", None),
            ("ratio", None),
            ("ci_lo", None),
            ("ci_hi", None),
            ("flagged", None),
        ])?;
        run.write("wos_band.csv", &csv)?;
        produced += 1;
    }

    if let Some(other) = compare {
        run.inputs.push(other.display().to_string());
        let (first, second) = match (label(run_dir), label(other)) {
            (Some(false), Some(true)) => ("calibrated", "control"),
            (Some(true), Some(false)) => ("control", "calibrated"),
            _ => ("first", "second"),
        };
        let mut merged = 0;
        for (file, key, value, out_name) in [
            (
                "trace.csv",
                "n",
                "osc_normalized",
                "oscillation_comparison.csv",
            ),
            ("comparison.csv", "cell", "ratio", "wos_comparison.csv"),
        ] {
            let (pa, pb) = (run_dir.join(file), other.join(file));
            if !(pa.exists() && pb.exists()) {
                continue;
            }
            let (ta, tb) = (Table::read(&pa)?, Table::read(&pb)?);
            let pick = |t: &Table| -> Result<BTreeMap<u64, String>> {
                let (k, v) = (t.col(key)?, t.col(value)?);
                t.rows
                    .iter()
                    .map(|r| {
                        Ok((
                            r[k].parse::<u64>().context("non-integer key")?,
                            r[v].clone(),
                        ))
                    })
                    .collect()
            };
            let (ma, mb) = (pick(&ta)?, pick(&tb)?);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                key.to_string(),
                format!("{first}_{value}"),
                format!("{second}_{value}"),
                format!("{second}_over_{first}"),
            ])?;
            let mut rows = 0;
            for (k, va) in &ma {
                if let Some(vb) = mb.get(k) {
                    let ratio = vb.parse::<f64>().unwrap_or(f64::NAN)
                        / va.parse::<f64>().unwrap_or(f64::NAN);
                    w.write_record([k.to_string(), va.clone(), vb.clone(), ratio.to_string()])?;
                    rows += 1;
                }
            }
            if rows == 0 {
                return Err(
                    UsageError(format!("{file} of the two runs share no {key} values")).into(),
                );
            }
            run.write(out_name, &w.into_inner()?)?;
            merged += 1;
        }
        if merged == 0 {
            return Err(UsageError("the two runs have no comparable artifacts".into()).into());
        }
        produced += merged;
    }

    if produced == 0 {
        return Err(UsageError(format!("no exportable artifacts in {}", run_dir.display())).into());
    }
    run.finish("export", Settings::default(), None)?;
    Ok(0)
}
