use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::Args;
use ndarray::Array2;
use serde::Serialize;
use smooth_ntf::features::{adjusted_rand_index, kmeans, select_k_by_silhouette, silhouette, site_features};

use crate::config::{Settings, RUN_KEYS};
use crate::error::{CliError, CliResult};
use crate::output::write_json;

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Site activations written by `fit` (`site,regime,comp1,…`).
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Fixed number of clusters; without it k is chosen by silhouette.
    #[arg(long)]
    k: Option<usize>,
    /// Smallest k tried by silhouette selection [default: 2].
    #[arg(long)]
    k_min: Option<usize>,
    /// Largest k tried by silhouette selection [default: min(9, sites)].
    #[arg(long)]
    k_max: Option<usize>,
    /// K-means seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// K-means restarts [default: 10].
    #[arg(long)]
    restarts: Option<usize>,
    /// Reference labels (`site,label`) to score the clustering against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Expected number of regimes in the factor file.
    #[arg(long)]
    regime_count: Option<usize>,
    /// Expected number of sites in the factor file.
    #[arg(long)]
    site_count: Option<usize>,
    /// Output directory [default: cluster-out].
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Site activations read back from `C.csv`.
struct SiteActivations {
    sites: Vec<String>,
    regimes: usize,
    /// Rows `e·N + n`.
    c: Array2<f64>,
}

fn read_activations(path: &Path) -> CliResult<SiteActivations> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let header = reader.headers()?.clone();
    if header.len() < 3 || &header[0] != "site" || &header[1] != "regime" {
        return Err(CliError::input(format!(
            "{}, line 1: expected header `site,regime,comp1,...`",
            path.display()
        )));
    }
    let rank = header.len() - 2;
    let mut sites: Vec<String> = Vec::new();
    let mut site_ids: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<(u64, usize, usize, Vec<f64>)> = Vec::new();
    let mut regimes = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: &str| CliError::input(format!("{}, line {line}: {what}", path.display()));
        let regime: usize = record[1].parse().map_err(|_| bad("regime must be a positive integer"))?;
        if regime == 0 {
            return Err(bad("regimes are 1-based"));
        }
        let values = record
            .iter()
            .skip(2)
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| bad("activations must be finite numbers"))?;
        let n = *site_ids.entry(record[0].to_string()).or_insert_with(|| {
            sites.push(record[0].to_string());
            sites.len() - 1
        });
        regimes = regimes.max(regime);
        rows.push((line, n, regime - 1, values));
    }
    let nn = sites.len();
    if nn == 0 {
        return Err(CliError::input(format!("{}: no activation rows", path.display())));
    }
    let mut c = Array2::<f64>::zeros((regimes * nn, rank));
    let mut filled = vec![false; regimes * nn];
    for (line, n, e, values) in rows {
        let m = e * nn + n;
        if filled[m] {
            return Err(CliError::input(format!(
                "{}, line {line}: duplicate row for site `{}` regime {}",
                path.display(),
                sites[n],
                e + 1
            )));
        }
        filled[m] = true;
        c.row_mut(m).assign(&ndarray::Array1::from(values));
    }
    if let Some(m) = filled.iter().position(|&f| !f) {
        return Err(CliError::input(format!(
            "{}: no row for site `{}` regime {}",
            path.display(),
            sites[m % nn],
            m / nn + 1
        )));
    }
    Ok(SiteActivations { sites, regimes, c })
}

fn read_truth(path: &Path, sites: &[String]) -> CliResult<Vec<usize>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut by_site: HashMap<String, String> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        if record.len() < 2 {
            let line = record.position().map_or(0, |p| p.line());
            return Err(CliError::input(format!("{}, line {line}: expected `site,label`", path.display())));
        }
        by_site.insert(record[0].to_string(), record[1].to_string());
    }
    let mut ids: HashMap<String, usize> = HashMap::new();
    sites
        .iter()
        .map(|s| {
            let label = by_site
                .get(s)
                .ok_or_else(|| CliError::input(format!("{}: no label for site `{s}`", path.display())))?;
            let next = ids.len();
            Ok(*ids.entry(label.clone()).or_insert(next))
        })
        .collect()
}

#[derive(Serialize)]
struct Score {
    k: usize,
    silhouette: f64,
}

#[derive(Serialize)]
struct Summary {
    sites: usize,
    regimes: usize,
    k: usize,
    /// Mean silhouette of the returned labels; absent for a single cluster.
    silhouette: Option<f64>,
    inertia: f64,
    /// Every candidate k tried by silhouette selection.
    scores: Vec<Score>,
    /// Adjusted Rand index against `--truth`, when given.
    ari: Option<f64>,
}

enum Choice {
    Fixed(usize),
    Range(usize, usize),
}

pub fn run(args: ClusterArgs) -> CliResult<()> {
    let file = Settings::load(args.config.as_deref(), RUN_KEYS)?;
    let factors: PathBuf = file
        .pick(args.factors, "factors")?
        .ok_or_else(|| CliError::input("no factor file given (--factors)"))?;
    let seed = file.pick_or(args.seed, "seed", 0u64)?;
    let restarts = file.pick_or(args.restarts, "restarts", 10usize)?;
    let truth: Option<PathBuf> = file.pick(args.truth, "truth")?;
    let out = file.pick_or(args.out, "out", PathBuf::from("cluster-out"))?;

    let acts = read_activations(&factors)?;
    let nn = acts.sites.len();
    if let Some(e) = file.pick(args.regime_count, "regime_count")? {
        if e != acts.regimes {
            return Err(CliError::input(format!("expected {e} regimes, factor file has {}", acts.regimes)));
        }
    }
    if let Some(n) = file.pick(args.site_count, "site_count")? {
        if n != nn {
            return Err(CliError::input(format!("expected {n} sites, factor file has {nn}")));
        }
    }
    let feats = site_features(&acts.c, acts.regimes, nn)?;

    let range_flags = args.k_min.is_some() || args.k_max.is_some();
    let fixed = if range_flags { args.k } else { file.pick(args.k, "k")? };
    let choice = match fixed {
        Some(k) => Choice::Fixed(k),
        None => {
            let k_min = file.pick_or(args.k_min, "k_min", 2usize)?;
            let k_max = match file.pick(args.k_max, "k_max")? {
                Some(k) => k,
                None => 9.min(nn),
            };
            Choice::Range(k_min, k_max)
        }
    };
    let too_many = |k: usize| CliError::input(format!("cannot form {k} clusters from {nn} sites"));
    let (labels, summary_k, scores) = match choice {
        Choice::Fixed(k) => {
            if k == 0 || k > nn {
                return Err(too_many(k));
            }
            (kmeans(&feats, k, seed, restarts)?.labels, k, Vec::new())
        }
        Choice::Range(k_min, k_max) => {
            if k_max > nn {
                return Err(too_many(k_max));
            }
            let sel = select_k_by_silhouette(&feats, k_min, k_max, seed, restarts)?;
            let scores = sel
                .scores
                .iter()
                .map(|&(k, silhouette)| Score { k, silhouette })
                .collect();
            (sel.labels, sel.best_k, scores)
        }
    };
    let distinct = {
        let mut l = labels.clone();
        l.sort_unstable();
        l.dedup();
        l.len()
    };
    let score = if distinct >= 2 {
        Some(silhouette(&feats, &labels)?)
    } else {
        None
    };
    let inertia = labels
        .iter()
        .enumerate()
        .map(|(p, &l)| {
            let members: Vec<usize> = (0..nn).filter(|&q| labels[q] == l).collect();
            let centroid = members
                .iter()
                .fold(ndarray::Array1::<f64>::zeros(feats.ncols()), |acc, &q| acc + feats.row(q))
                / members.len() as f64;
            (&feats.row(p) - &centroid).mapv(|d| d * d).sum()
        })
        .sum();
    let ari = match &truth {
        Some(path) => Some(adjusted_rand_index(&labels, &read_truth(path, &acts.sites)?)?),
        None => None,
    };

    std::fs::create_dir_all(&out)?;
    let mut w = csv::Writer::from_path(out.join("labels.csv"))?;
    w.write_record(["site", "cluster"])?;
    for (site, l) in acts.sites.iter().zip(&labels) {
        w.write_record([site.clone(), (l + 1).to_string()])?;
    }
    w.flush()?;
    let summary = Summary {
        sites: nn,
        regimes: acts.regimes,
        k: summary_k,
        silhouette: score,
        inertia,
        scores,
        ari,
    };
    write_json(&out.join("silhouette.json"), &summary)?;
    match summary.ari {
        Some(ari) => println!("k = {summary_k}, ARI = {ari:.4}, wrote {}", out.display()),
        None => println!("k = {summary_k}, wrote {}", out.display()),
    }
    Ok(())
}
