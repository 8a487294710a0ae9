use std::path::PathBuf;

use clap::Args;
use ndarray::Array2;
use serde::Serialize;
use smooth_ntf::panel::build_temperature_grid;
use smooth_ntf::panelio::{format_time, write_panel};
use smooth_ntf::splinequad::SplineSystem;
use smooth_ntf::synthgen::{generate, GroundTruth, PlantSpec};

use crate::config::Settings;
use crate::error::{CliError, CliResult};
use crate::output::{write_factor, write_json};

const SPEC_KEYS: &[&str] = &[
    "rank",
    "times",
    "temp_min",
    "temp_max",
    "temp_resolution",
    "regimes",
    "sites",
    "days",
    "clusters",
    "cluster_jitter",
    "noise_sd",
    "climate_spread",
    "weather_sd",
    "shuffle_days",
    "seed",
];

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `key = value` plant specification; unset keys keep their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the seed in the specification.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "synth-out")]
    out: PathBuf,
}

fn read_spec(args: &SynthArgs) -> CliResult<PlantSpec> {
    let file = Settings::load(args.spec.as_deref(), SPEC_KEYS)?;
    let d = PlantSpec::default();
    Ok(PlantSpec {
        rank: file.pick_or(None, "rank", d.rank)?,
        times: file.pick_or(None, "times", d.times)?,
        temp_min: file.pick_or(None, "temp_min", d.temp_min)?,
        temp_max: file.pick_or(None, "temp_max", d.temp_max)?,
        temp_resolution: file.pick_or(None, "temp_resolution", d.temp_resolution)?,
        regimes: file.pick_or(None, "regimes", d.regimes)?,
        sites: file.pick_or(None, "sites", d.sites)?,
        days: file.pick_or(None, "days", d.days)?,
        clusters: file.pick_or(None, "clusters", d.clusters)?,
        cluster_jitter: file.pick_or(None, "cluster_jitter", d.cluster_jitter)?,
        noise_sd: file.pick_or(None, "noise_sd", d.noise_sd)?,
        climate_spread: file.pick_or(None, "climate_spread", d.climate_spread)?,
        weather_sd: file.pick_or(None, "weather_sd", d.weather_sd)?,
        shuffle_days: file.pick_or(None, "shuffle_days", d.shuffle_days)?,
        templates: None,
        seed: file.pick_or(args.seed, "seed", d.seed)?,
    })
}

#[derive(Serialize)]
struct TruthFile<'a> {
    spec: &'a PlantSpec,
    truth: &'a GroundTruth,
}

pub fn run(args: SynthArgs) -> CliResult<()> {
    let spec = read_spec(&args)?;
    let syn = generate::<f64>(&spec)?;
    let out = &args.out;
    write_panel(&syn.panel, out)?;

    let mut w = csv::Writer::from_path(out.join("truth_labels.csv"))?;
    w.write_record(["site", "label"])?;
    for (site, label) in syn.panel.sites().iter().zip(&syn.truth.labels) {
        w.write_record([site.clone(), (label + 1).to_string()])?;
    }
    w.flush()?;
    write_json(&out.join("truth.json"), &TruthFile { spec: &spec, truth: &syn.truth })?;

    let grid = build_temperature_grid(&syn.panel, spec.temp_resolution)?;
    let intraday = SplineSystem::periodic(syn.panel.intraday_grid(), 24.0)?;
    let thermal = SplineSystem::natural(grid.values())?;
    let f = syn.truth.factors_on(&intraday, &thermal);
    let hours: Vec<Vec<String>> = syn
        .panel
        .intraday_grid()
        .iter()
        .map(|&u| vec![u.to_string(), format_time(u)])
        .collect();
    write_factor(&out.join("truth_A.csv"), &["hour", "time"], &hours, &f.a)?;
    let temps: Vec<Vec<String>> = grid.values().iter().map(|t| vec![t.to_string()]).collect();
    write_factor(&out.join("truth_B.csv"), &["temp"], &temps, &f.b)?;
    let nn = syn.panel.n_sites();
    let rows: Vec<Vec<String>> = (0..f.c.nrows())
        .map(|m| vec![syn.panel.sites()[m % nn].clone(), (m / nn + 1).to_string()])
        .collect();
    write_factor(&out.join("truth_C.csv"), &["site", "regime"], &rows, &f.c)?;
    let templates = Array2::from_shape_fn(
        (syn.truth.templates.len(), syn.truth.templates.first().map_or(0, |t| t.len())),
        |(c, r)| syn.truth.templates[c][r],
    );
    let labels: Vec<Vec<String>> = (1..=templates.nrows()).map(|c| vec![c.to_string()]).collect();
    write_factor(&out.join("truth_templates.csv"), &["cluster"], &labels, &templates)?;

    if syn.panel.observed_count() == 0 {
        return Err(CliError::Degenerate("generated panel has no observed days".into()));
    }
    println!(
        "{} sites x {} days x {} times, K = {}, wrote {}",
        nn,
        syn.panel.n_days(),
        syn.panel.n_times(),
        grid.len(),
        out.display()
    );
    Ok(())
}
