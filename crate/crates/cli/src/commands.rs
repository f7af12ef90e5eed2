use std::path::PathBuf;

use anyhow::Result;
use equicantor::calibrate::{run_construction_with, Construction, RunOptions};
use equicantor::feasibility::{feasible, search_max_delta, SearchOptions};
use equicantor::verify::{
    ahlfors_report, dyadic_cell_ratios, green_ratio_sweep, measure_comparison, ring_estimate,
    wos_sample, WosOptions,
};
use equicantor::{potential_profile, GeneratorSpec, KernelSpec, Vec2};
use serde_json::json;

use crate::config::Settings;
use crate::run::RunDir;
use crate::UsageError;

fn out_dir(out: Option<PathBuf>, subcommand: &str) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from("runs").join(subcommand))
}

fn spec_of(s: &Settings, n: usize) -> Result<GeneratorSpec> {
    Ok(GeneratorSpec::new(s.alphabet()?, s.r(), s.a(), n.max(1))?)
}

/// Settings with every default written out, as recorded in the manifest.
fn pinned(s: &Settings, n: usize) -> Result<Settings> {
    Ok(Settings {
        a: Some(s.a()),
        r: Some(s.r()),
        alphabet: Some(s.alphabet()?.to_string()),
        n: Some(n),
        seed: Some(s.seed()),
        control: Some(s.control.unwrap_or(false)),
        ..s.clone()
    })
}

fn construct(s: &Settings, n: usize, quiet: bool) -> Result<Construction> {
    let spec = spec_of(s, n)?;
    let kernel = KernelSpec::for_spec(&spec)?;
    let opts = RunOptions {
        method: s.method()?,
        err_budget: s.budget,
        force: s.force.unwrap_or(false),
        control: s.control.unwrap_or(false),
        diagnostics_through: if matches!(kernel, KernelSpec::Log) {
            n.min(8)
        } else {
            0
        },
        ..RunOptions::default()
    };
    Ok(run_construction_with(&spec, n, &opts, |row| {
        if !quiet {
            eprintln!(
                "generation {}/{n}: oscillation {:.3e} (budget {:.3e}){}",
                row.n,
                row.osc,
                row.budget,
                if row.within_budget {
                    ""
                } else {
                    "  OVER BUDGET"
                }
            );
        }
    })?)
}

pub fn calibrate(s: Settings, inputs: Vec<String>, out: Option<PathBuf>) -> Result<u8> {
    let n = s.n.unwrap_or(12);
    let settings = Settings {
        method: Some(s.method()?.to_string()),
        force: Some(s.force.unwrap_or(false)),
        ..pinned(&s, n)?
    };
    let mut run = RunDir::open(&out_dir(out, "calibrate"))?;
    run.inputs = inputs;
    let c = construct(&settings, n, false)?;
    run.write_with("trace.csv", |b| c.trace.write_csv_with(b, false))?;
    run.write_with("profile.csv", |b| c.profile.write_csv(b))?;
    run.write_with("level.csv", |b| c.level.write_csv(b))?;
    let doc = c.params.to_document(&c.spec);
    run.write_json("params.json", &doc)?;
    let last = c.trace.rows.last().expect("at least one generation");
    let (lo, hi) = c
        .params
        .iter_all()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(v), h.max(v))
        });
    let ok = c.trace.all_within_budget();
    run.write_json(
        "summary.json",
        &json!({
            "n": n,
            "alphabet": c.spec.alphabet.to_string(),
            "a": c.spec.a,
            "r": c.spec.r,
            "delta": c.spec.delta(),
            "width": c.trace.width,
            "control": c.trace.control,
            "method": settings.method,
            "c_n": last.c_n,
            "oscillation": last.osc,
            "osc_normalized": last.osc_normalized,
            "budget": last.budget,
            "coefficient_min": if lo.is_finite() { Some(lo) } else { None },
            "coefficient_max": if hi.is_finite() { Some(hi) } else { None },
            "all_within_budget": ok,
        }),
    )?;
    run.timings_ms = c.trace.rows.iter().map(|r| r.wall_ms).collect();
    let spec = c.spec;
    run.finish("calibrate", settings, Some(spec))?;
    // the control run is a measurement, not a claim
    Ok(if ok || c.trace.control { 0 } else { 1 })
}

pub fn bounds(s: Settings, inputs: Vec<String>, out: Option<PathBuf>) -> Result<u8> {
    let alphabet = s.alphabet()?;
    let settings = Settings {
        a: Some(s.a()),
        r: Some(s.r()),
        alphabet: Some(alphabet.to_string()),
        search: Some(s.search.unwrap_or(false)),
        ..s.clone()
    };
    let mut run = RunDir::open(&out_dir(out, "bounds"))?;
    run.inputs = inputs;
    let report = feasible(s.a(), s.r(), alphabet)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    run.write_json("report.json", &report)?;
    if settings.search == Some(true) {
        let res = search_max_delta(alphabet, &SearchOptions::default())?;
        run.write_with("raster.csv", |b| res.write_raster_csv(b))?;
        run.write_json(
            "search.json",
            &json!({ "alphabet": alphabet.to_string(), "best": res.best, "evaluated": res.evaluated }),
        )?;
        match &res.best {
            Some(best) => eprintln!(
                "best feasible: a = {}, r = {}, delta = {:.5}",
                best.a, best.r, best.delta
            ),
            None => eprintln!("no feasible point on the search grid"),
        }
    }
    run.finish("bounds", settings, None)?;
    Ok(0)
}

pub fn green(s: Settings, inputs: Vec<String>, out: Option<PathBuf>) -> Result<u8> {
    let n = s.n.unwrap_or(12);
    let samples = s.samples.unwrap_or(32);
    let settings = Settings {
        samples: Some(samples),
        ..pinned(&s, n)?
    };
    let mut run = RunDir::open(&out_dir(out, "green"))?;
    run.inputs = inputs;
    let c = construct(&settings, n, true)?;
    let kernel = KernelSpec::Log;
    let mut ring = csv::Writer::from_writer(Vec::new());
    ring.write_record(["n", "radius", "samples", "constant", "min"])?;
    let mut constants = Vec::new();
    for k in 4.min(n)..=n.min(10) {
        let level = c.params.level(&c.spec, k)?;
        let profile = potential_profile(&level, &kernel)?;
        let est = ring_estimate(&level, &profile, 64)?;
        constants.push(est.constant);
        ring.write_record([
            k.to_string(),
            est.radius.to_string(),
            est.samples.to_string(),
            est.constant.to_string(),
            est.min.to_string(),
        ])?;
    }
    run.write("ring_estimate.csv", &ring.into_inner()?)?;
    let scales: Vec<f64> = (2..=10).map(|j| 2f64.powi(-j)).collect();
    let sweep = green_ratio_sweep(&c.level, &c.profile, &scales, samples, settings.seed())?;
    run.write_with("green_sweep.csv", |b| sweep.write_csv(b))?;
    let mut pts = csv::Writer::from_writer(Vec::new());
    pts.write_record([
        "y_x", "y_y", "dist", "dist_lo", "dist_hi", "g_value", "ratio", "ratio_lo", "ratio_hi",
    ])?;
    for e in &sweep.estimates {
        pts.write_record([
            e.y.x.to_string(),
            e.y.y.to_string(),
            e.dist.to_string(),
            e.dist_bracket.0.to_string(),
            e.dist_bracket.1.to_string(),
            e.value.to_string(),
            e.ratio.to_string(),
            e.ratio_bracket.0.to_string(),
            e.ratio_bracket.1.to_string(),
        ])?;
    }
    run.write("green_points.csv", &pts.into_inner()?)?;
    let (cmin, cmax) = constants
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    run.write_json(
        "summary.json",
        &json!({
            "n": n,
            "delta": sweep.delta,
            "seed": sweep.seed,
            "ratio_min": sweep.min,
            "ratio_max": sweep.max,
            "ratio_spread": sweep.spread,
            "ring_constants": constants,
            "ring_variation": if cmax > 0.0 { (cmax - cmin) / cmax } else { 0.0 },
        }),
    )?;
    let spec = c.spec;
    run.finish("green", settings, Some(spec))?;
    Ok(0)
}

pub fn ahlfors(s: Settings, inputs: Vec<String>, out: Option<PathBuf>) -> Result<u8> {
    let n = s.n.unwrap_or(10);
    let samples = s.samples.unwrap_or(1000);
    let settings = Settings {
        samples: Some(samples),
        ..pinned(&s, n)?
    };
    let mut run = RunDir::open(&out_dir(out, "ahlfors"))?;
    run.inputs = inputs;
    let c = construct(&settings, n, true)?;
    let report = ahlfors_report(&c.level, samples, settings.seed());
    let cells = if c.level.len() <= 1 << 12 {
        let ratios = dyadic_cell_ratios(&c.level);
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &(_, v)| {
                (l.min(v), h.max(v))
            });
        let (sep_lo, sep_hi) = c.spec.bilipschitz_factors();
        Some(json!({
            "cells": ratios.len(),
            "min": lo,
            "max": hi,
            "ratio": hi / lo,
            "bracket_bound": (sep_hi / sep_lo).powf(c.spec.delta()),
        }))
    } else {
        None
    };
    run.write_json(
        "ahlfors.json",
        &json!({ "balls": report, "dyadic_cells": cells }),
    )?;
    let spec = c.spec;
    run.finish("ahlfors", settings, Some(spec))?;
    Ok(0)
}

pub fn wos(s: Settings, inputs: Vec<String>, out: Option<PathBuf>) -> Result<u8> {
    let depth = s.depth.unwrap_or(3);
    let n = s.n.unwrap_or(depth + 3);
    if depth > n {
        return Err(UsageError(format!("depth {depth} exceeds the generation {n}")).into());
    }
    let pole = s.pole.unwrap_or([0.0, 3.0]);
    let walks = s.walks.unwrap_or(100_000);
    let settings = Settings {
        depth: Some(depth),
        walks: Some(walks),
        pole: Some(pole),
        ..pinned(&s, n)?
    };
    let mut run = RunDir::open(&out_dir(out, "wos"))?;
    run.inputs = inputs;
    let c = construct(&settings, n, true)?;
    let opts = WosOptions {
        pole: Vec2::new(pole[0], pole[1]),
        eps: settings.eps,
        walks,
        depth,
        seed: settings.seed(),
        ..WosOptions::default()
    };
    let res = wos_sample(&c.level, &opts)?;
    run.write_with("wos_counts.csv", |b| res.write_csv(b))?;
    let cmp = measure_comparison(&res, depth)?;
    for w in &cmp.warnings {
        eprintln!("warning: {w}");
    }
    run.write_with("comparison.csv", |b| cmp.write_csv(b))?;
    let mut bands = Vec::new();
    for k in 0..=depth {
        bands.push(json!({ "depth": k, "band": measure_comparison(&res, k)?.band }));
    }
    run.write_json(
        "summary.json",
        &json!({
            "seed": res.seed,
            "walks": res.walks,
            "depth": res.depth,
            "generation": res.generation,
            "control": settings.control,
            "pole": [res.pole.x, res.pole.y],
            "eps_wos": res.eps_wos,
            "r_out": res.r_out,
            "hits": res.hits(),
            "censored": res.censored,
            "censored_fraction": res.censored_fraction(),
            "mean_steps": res.mean_steps(),
            "max_steps": res.max_steps,
            "reentries": res.reentries,
            "band": cmp.band,
            "bands": bands,
            "passed": res.passed(),
        }),
    )?;
    let spec = c.spec;
    run.finish("wos", settings, Some(spec))?;
    if !res.passed() {
        eprintln!(
            "censored fraction {:.4} exceeds 1%: the run is not usable",
            res.censored_fraction()
        );
        return Ok(1);
    }
    Ok(0)
}
