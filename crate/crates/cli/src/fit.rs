use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use log::{info, warn};
use ndarray::Array2;
use serde::Serialize;
use smooth_ntf::panel::{
    assemble_tensors, build_temperature_grid, day_tensor, normalize_by_daily_mean,
};
use smooth_ntf::panelio::{format_time, read_panel};
use smooth_ntf::solver::{fit, fit_baseline_ntf_weighted, FactorSet, FitReport, SolverConfig, Termination};
use smooth_ntf::splinequad::SplineSystem;
use smooth_ntf::{LoadPanelF64, Tensor3F64};

use crate::config::{Settings, RUN_KEYS};
use crate::error::{CliError, CliResult};
use crate::output::{write_factor, write_json, write_series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Smooth,
    Baseline,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "smooth" => Ok(Mode::Smooth),
            "baseline" => Ok(Mode::Baseline),
            other => Err(format!("unknown mode `{other}` (expected smooth or baseline)")),
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// `key = value` file with any of the options below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Loads CSV (`site,day,time,load`).
    #[arg(long)]
    loads: Option<PathBuf>,
    /// Temperatures CSV (`site,day,temp`); required in smooth mode.
    #[arg(long)]
    temps: Option<PathBuf>,
    /// Regimes CSV (`site,day,regime`, 1-based); all days share one regime without it.
    #[arg(long)]
    regimes: Option<PathBuf>,
    /// Number of components [default: 6].
    #[arg(long)]
    rank: Option<usize>,
    /// Intra-day curvature penalty weight [default: 3000].
    #[arg(long)]
    alpha: Option<f64>,
    /// Thermal curvature penalty weight [default: 3000].
    #[arg(long)]
    beta: Option<f64>,
    /// Temperature bin width in degrees [default: 1].
    #[arg(long)]
    temp_resolution: Option<f64>,
    /// Relative-improvement stopping threshold [default: 1e-5].
    #[arg(long)]
    tol: Option<f64>,
    /// Sweep budget [default: 500].
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// Initialization seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// `smooth` or `baseline` [default: smooth].
    #[arg(long)]
    mode: Option<Mode>,
    /// Scale each site by its average daily consumption [default: true].
    #[arg(long)]
    normalize: Option<bool>,
    /// Output directory [default: fit-out].
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Fully resolved fit settings, echoed into `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub loads: PathBuf,
    pub temps: Option<PathBuf>,
    pub regimes: Option<PathBuf>,
    pub rank: usize,
    pub alpha: f64,
    pub beta: f64,
    pub temp_resolution: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
    pub mode: Mode,
    pub normalize: bool,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn resolve(args: FitArgs) -> CliResult<Self> {
        let file = Settings::load(args.config.as_deref(), RUN_KEYS)?;
        let defaults = SolverConfig::<f64>::default();
        let loads = file
            .pick(args.loads, "loads")?
            .ok_or_else(|| CliError::input("no loads file given (--loads)"))?;
        Ok(Self {
            loads,
            temps: file.pick(args.temps, "temps")?,
            regimes: file.pick(args.regimes, "regimes")?,
            rank: file.pick_or(args.rank, "rank", defaults.rank)?,
            alpha: file.pick_or(args.alpha, "alpha", defaults.alpha)?,
            beta: file.pick_or(args.beta, "beta", defaults.beta)?,
            temp_resolution: file.pick_or(args.temp_resolution, "temp_resolution", 1.0)?,
            tol: file.pick_or(args.tol, "tol", defaults.tol)?,
            max_sweeps: file.pick_or(args.max_sweeps, "max_sweeps", defaults.max_sweeps)?,
            seed: file.pick_or(args.seed, "seed", defaults.seed)?,
            mode: file.pick_or(args.mode, "mode", Mode::Smooth)?,
            normalize: file.pick_or(args.normalize, "normalize", true)?,
            out: file.pick_or(args.out, "out", PathBuf::from("fit-out"))?,
        })
    }

    fn solver(&self) -> SolverConfig<f64> {
        SolverConfig {
            rank: self.rank,
            alpha: self.alpha,
            beta: self.beta,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    fit: &'a FitReport<f64>,
    /// `‖W ∘ X‖²` of the fitted tensor.
    data_norm: f64,
    /// Weighted loss of the returned iterate over `data_norm`.
    relative_loss: f64,
    times: usize,
    second_mode: usize,
    regimes: usize,
    sites: usize,
    temp_grid: Option<Vec<f64>>,
    site_scales: Option<Vec<SiteScale>>,
}

#[derive(Serialize)]
struct SiteScale {
    site: String,
    scale: f64,
}

fn weighted_norm(w: &Tensor3F64, x: &Tensor3F64) -> f64 {
    w.as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(w, x)| (w * x) * (w * x))
        .sum()
}

struct Fitted {
    factors: FactorSet<f64>,
    report: FitReport<f64>,
    data_norm: f64,
    temp_grid: Option<Vec<f64>>,
}

fn fit_smooth(panel: &LoadPanelF64, cfg: &RunConfig) -> CliResult<Fitted> {
    let grid = build_temperature_grid(panel, cfg.temp_resolution)?;
    let pair = assemble_tensors(panel, &grid)?;
    let intraday = SplineSystem::periodic(panel.intraday_grid(), 24.0)?;
    let thermal = SplineSystem::natural(grid.values())?;
    info!(
        "smooth fit: I = {}, K = {}, E = {}, N = {}",
        panel.n_times(),
        grid.len(),
        panel.regime_count(),
        panel.n_sites()
    );
    let (factors, report) = fit(&pair, &intraday, &thermal, &cfg.solver())?;
    Ok(Fitted {
        factors,
        report,
        data_norm: weighted_norm(&pair.w, &pair.x),
        temp_grid: Some(grid.values().to_vec()),
    })
}

fn fit_baseline(panel: &LoadPanelF64, cfg: &RunConfig) -> CliResult<Fitted> {
    let (w, x) = day_tensor(panel);
    info!(
        "baseline fit: I = {}, J = {}, N = {}",
        panel.n_times(),
        panel.n_days(),
        panel.n_sites()
    );
    let (factors, report) = fit_baseline_ntf_weighted(&w, &x, &cfg.solver())?;
    Ok(Fitted {
        factors,
        report,
        data_norm: weighted_norm(&w, &x),
        temp_grid: None,
    })
}

fn column(mat: &Array2<f64>, r: usize) -> impl Iterator<Item = f64> + '_ {
    mat.column(r).into_iter().copied()
}

fn write_outputs(panel: &LoadPanelF64, cfg: &RunConfig, fitted: &Fitted, scales: Option<&[f64]>) -> CliResult<()> {
    let out = &cfg.out;
    let plot = out.join("plotdata");
    std::fs::create_dir_all(&plot)?;
    let f = &fitted.factors;
    let hours: Vec<String> = panel.intraday_grid().iter().map(|u| u.to_string()).collect();
    let hour_rows: Vec<Vec<String>> = panel
        .intraday_grid()
        .iter()
        .map(|&u| vec![u.to_string(), format_time(u)])
        .collect();
    write_factor(&out.join("A.csv"), &["hour", "time"], &hour_rows, &f.a)?;

    let (second_label, second): (&str, Vec<String>) = match &fitted.temp_grid {
        Some(grid) => ("temp", grid.iter().map(|t| t.to_string()).collect()),
        None => ("day", panel.days().to_vec()),
    };
    let second_rows: Vec<Vec<String>> = second.iter().map(|s| vec![s.clone()]).collect();
    write_factor(&out.join("B.csv"), &[second_label], &second_rows, &f.b)?;

    let slabs = f.c.nrows() / panel.n_sites();
    let site_rows: Vec<Vec<String>> = (0..slabs)
        .flat_map(|e| {
            panel
                .sites()
                .iter()
                .map(move |s| vec![s.clone(), (e + 1).to_string()])
        })
        .collect();
    write_factor(&out.join("C.csv"), &["site", "regime"], &site_rows, &f.c)?;

    let second_file = if fitted.temp_grid.is_some() { "thermal" } else { "day" };
    for r in 0..f.rank() {
        write_series(
            &plot.join(format!("signature_{}.csv", r + 1)),
            ["hour", "value"],
            &hours,
            column(&f.a, r),
        )?;
        write_series(
            &plot.join(format!("{second_file}_{}.csv", r + 1)),
            [second_label, "value"],
            &second,
            column(&f.b, r),
        )?;
    }

    let report = Report {
        config: cfg,
        fit: &fitted.report,
        data_norm: fitted.data_norm,
        relative_loss: fitted.report.final_terms().loss / fitted.data_norm.max(f64::MIN_POSITIVE),
        times: f.a.nrows(),
        second_mode: f.b.nrows(),
        regimes: slabs,
        sites: panel.n_sites(),
        temp_grid: fitted.temp_grid.clone(),
        site_scales: scales.map(|s| {
            panel
                .sites()
                .iter()
                .zip(s)
                .map(|(site, &scale)| SiteScale {
                    site: site.clone(),
                    scale,
                })
                .collect()
        }),
    };
    write_json(&out.join("report.json"), &report)
}

fn load(cfg: &RunConfig) -> CliResult<LoadPanelF64> {
    let temps: Option<&Path> = match cfg.mode {
        Mode::Smooth => Some(cfg.temps.as_deref().ok_or_else(|| {
            CliError::input("smooth mode needs a temperature file (--temps)")
        })?),
        Mode::Baseline => None,
    };
    Ok(read_panel(&cfg.loads, temps, cfg.regimes.as_deref())?)
}

pub fn run(args: FitArgs) -> CliResult<()> {
    let cfg = RunConfig::resolve(args)?;
    cfg.solver().validate()?;
    let raw = load(&cfg)?;
    if raw.observed_count() == 0 {
        return Err(CliError::Degenerate("no observed site-days".into()));
    }
    let (panel, scales) = if cfg.normalize {
        let (panel, scales) = normalize_by_daily_mean(&raw)?;
        (panel, Some(scales))
    } else {
        (raw, None)
    };
    let fitted = match cfg.mode {
        Mode::Smooth => fit_smooth(&panel, &cfg)?,
        Mode::Baseline => fit_baseline(&panel, &cfg)?,
    };
    match fitted.report.termination {
        Termination::Stalled => warn!(
            "objective increased twice in a row; returning the iterate of sweep {}",
            fitted.report.best_sweep
        ),
        Termination::MaxSweeps => warn!("sweep budget of {} exhausted before convergence", cfg.max_sweeps),
        Termination::Converged => {}
    }
    for event in &fitted.report.column_events {
        warn!(
            "component {} ({:?} mode) {} at sweep {}",
            event.component + 1,
            event.mode,
            if event.frozen { "frozen" } else { "reset" },
            event.sweep
        );
    }
    write_outputs(&panel, &cfg, &fitted, scales.as_deref())?;
    let terms = fitted.report.final_terms();
    println!(
        "{} sweeps ({:?}), loss {:.6e}, penalty {:.6e}, wrote {}",
        fitted.report.sweeps,
        fitted.report.termination,
        terms.loss,
        terms.penalty,
        cfg.out.display()
    );
    Ok(())
}
