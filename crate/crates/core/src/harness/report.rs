//! Report types, CSV emission/parsing, flag computation, and plots.
//! Flags are a pure function of (experiment name, series) so the CLI can
//! re-derive any verdict from metrics.csv without re-simulating.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::plot::line_plot;
use crate::harness::tolerances as tol;

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { name: name.into(), points }
    }

    pub fn scalar(name: impl Into<String>, value: f64) -> Self {
        Series { name: name.into(), points: vec![(0.0, value)] }
    }
}

#[derive(Debug, Clone)]
pub struct Flag {
    pub name: String,
    pub passed: bool,
    /// The measured number the flag judges.
    pub value: f64,
    /// The threshold it is judged against (meaning depends on the flag).
    pub threshold: f64,
}

impl Flag {
    fn le(name: &str, value: f64, threshold: f64) -> Self {
        Flag { name: name.into(), passed: value <= threshold, value, threshold }
    }

    fn ge(name: &str, value: f64, threshold: f64) -> Self {
        Flag { name: name.into(), passed: value >= threshold, value, threshold }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub experiment: String,
    pub series: Vec<Series>,
    pub flags: Vec<Flag>,
    pub runtime_secs: f64,
    pub config_echo: String,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }
}

pub type SeriesMap = BTreeMap<String, Vec<(f64, f64)>>;

pub fn metrics_csv(series: &[Series]) -> String {
    let mut out = String::from("series,x,y\n");
    for s in series {
        for (x, y) in &s.points {
            out.push_str(&format!("{},{x},{y}\n", s.name));
        }
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<SeriesMap> {
    let mut map = SeriesMap::new();
    let mut lines = text.lines();
    match lines.next() {
        Some("series,x,y") => {}
        other => {
            return Err(Error::InvalidInput(format!("metrics.csv: bad header {other:?}")));
        }
    }
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (name, xs, ys) = (parts.next(), parts.next(), parts.next());
        let (Some(name), Some(xs), Some(ys)) = (name, xs, ys) else {
            return Err(Error::InvalidInput(format!("metrics.csv line {}: {line:?}", i + 2)));
        };
        let x: f64 = xs
            .parse()
            .map_err(|_| Error::InvalidInput(format!("metrics.csv line {}: bad x", i + 2)))?;
        let y: f64 = ys
            .parse()
            .map_err(|_| Error::InvalidInput(format!("metrics.csv line {}: bad y", i + 2)))?;
        map.entry(name.to_string()).or_default().push((x, y));
    }
    Ok(map)
}

fn series_map(series: &[Series]) -> SeriesMap {
    series.iter().map(|s| (s.name.clone(), s.points.clone())).collect()
}

fn get<'a>(m: &'a SeriesMap, name: &str) -> Result<&'a [(f64, f64)]> {
    m.get(name)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::InvalidInput(format!("flags: missing series {name:?}")))
}

fn scalar(m: &SeriesMap, name: &str) -> Result<f64> {
    let pts = get(m, name)?;
    if pts.len() != 1 {
        return Err(Error::InvalidInput(format!("flags: series {name:?} is not a scalar")));
    }
    Ok(pts[0].1)
}

fn last_y(pts: &[(f64, f64)]) -> Result<f64> {
    pts.last().map(|p| p.1).ok_or_else(|| Error::InvalidInput("flags: empty series".into()))
}

fn lookup_x(pts: &[(f64, f64)], x: f64) -> Result<f64> {
    pts.iter()
        .find(|(px, _)| (px - x).abs() <= 1e-9 * (1.0 + x.abs()))
        .map(|p| p.1)
        .ok_or_else(|| Error::InvalidInput(format!("flags: no point at x = {x}")))
}

/// Plain least-squares slope of y against x.
fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Recompute every pass/fail flag from the series alone.
pub fn compute_flags(experiment: &str, m: &SeriesMap) -> Result<Vec<Flag>> {
    let mut flags = Vec::new();
    match experiment {
        "exp_invariance" => {
            if let Some(w1_ref) = m.get("w1_corrected_vs_ref") {
                // multiplicative variant
                let corrected = last_y(w1_ref)?;
                let ablated = last_y(get(m, "w1_ablated_vs_ref")?)?;
                flags.push(Flag::le(
                    "w1_corrected_vs_ref",
                    corrected,
                    tol::INVARIANCE_W1_MULTIPLICATIVE,
                ));
                flags.push(Flag::ge(
                    "ablation_ratio",
                    ablated / corrected,
                    tol::INVARIANCE_ABLATION_RATIO,
                ));
                flags.push(Flag::ge("corrected_not_worse", ablated - corrected, 0.0));
            } else {
                let worst = get(m, "w1_vs_gibbs")?
                    .iter()
                    .map(|p| p.1)
                    .fold(f64::NEG_INFINITY, f64::max);
                flags.push(Flag::le("w1_vs_gibbs_max", worst, tol::INVARIANCE_W1_ADDITIVE));
            }
        }
        "exp_hwang" => {
            let slope = scalar(m, "fitted_slope")?;
            let band = get(m, "slope_band")?;
            let (lo, hi) = (band[0].1, band[1].1);
            flags.push(Flag::ge("slope_above_band_lo", slope, lo));
            flags.push(Flag::le("slope_below_band_hi", slope, hi));
            if let Some(weights) = m.get("nu_star_weight") {
                let mut worst: f64 = 0.0;
                for (i, &(_, w)) in weights.iter().enumerate() {
                    let masses = get(m, &format!("basin_mass_{i}"))?;
                    worst = worst.max((last_y(masses)? - w).abs());
                }
                flags.push(Flag::le("basin_mass_error", worst, tol::HWANG_MASS_TOL));
            }
        }
        "exp_contraction" => {
            let dist = get(m, "mean_distance")?;
            let (first, last) = (dist[0].1, last_y(dist)?);
            flags.push(Flag::ge("distance_contracts", first - last, 0.0));
            if let Some(rate) = m.get("fitted_rate") {
                let rate = rate[0].1;
                if let Some(analytic) = m.get("analytic_rate") {
                    let analytic = analytic[0].1;
                    flags.push(Flag::le(
                        "rate_rel_error",
                        (rate - analytic).abs() / analytic,
                        tol::CONTRACTION_RATE_REL,
                    ));
                }
                if let Some(alpha0) = m.get("alpha0") {
                    flags.push(Flag::ge(
                        "rate_vs_alpha0",
                        rate,
                        tol::CONTRACTION_ALPHA0_FACTOR * alpha0[0].1,
                    ));
                }
            }
        }
        "exp_anneal" => {
            let frac = get(m, "frac_near_global")?;
            flags.push(Flag::ge("final_near_fraction", last_y(frac)?, tol::ANNEAL_NEAR_FRACTION));
            let main_mass = last_y(get(m, "basin_mass_plateau")?)?;
            let neg_mass = last_y(get(m, "basin_mass_negcontrol")?)?;
            flags.push(Flag::le(
                "negcontrol_basin_mass",
                neg_mass,
                tol::ANNEAL_NEGCONTROL_FACTOR * main_mass,
            ));
            let w1 = get(m, "w1_nu_an")?;
            let tail = &w1[w1.len().saturating_sub(10)..];
            flags.push(Flag::le("w1_trend_slope_last10", linear_slope(tail), 0.0));
        }
        "exp_compare_sigma" => {
            let cons = get(m, "steps_constant")?;
            let rms = get(m, "steps_rmsprop")?;
            let kappas: Vec<f64> = cons.iter().map(|p| p.0).collect();
            let k_ill = kappas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let k_well = kappas.iter().copied().fold(f64::INFINITY, f64::min);
            let ratio_ill = lookup_x(rms, k_ill)? / lookup_x(cons, k_ill)?;
            let ratio_well = lookup_x(rms, k_well)? / lookup_x(cons, k_well)?;
            flags.push(Flag {
                name: "ratio_ill_conditioned".into(),
                passed: ratio_ill < 1.0,
                value: ratio_ill,
                threshold: 1.0,
            });
            flags.push(Flag::le(
                "ratio_well_conditioned",
                (ratio_well - 1.0).abs(),
                tol::COMPARE_WELL_CONDITIONED_TOL,
            ));
        }
        "exp_gibbs_chain" => {
            let norm = get(m, "normalized_w1")?;
            let hi = norm.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let lo = norm.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            flags.push(Flag::le("normalized_band", hi / lo, tol::GIBBS_CHAIN_BAND_RATIO));
            let w1 = get(m, "w1_successive")?;
            let bound = get(m, "coupling_bound")?;
            let mut worst = f64::INFINITY;
            for ((_, w), (_, b)) in w1.iter().zip(bound) {
                worst = worst.min(b - w);
            }
            flags.push(Flag::ge("coupling_dominates", worst, 0.0));
            let gap = get(m, "gap_normalized")?;
            let ghi = gap.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let glo = gap.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            flags.push(Flag::le("gap_band", ghi / glo, tol::GIBBS_CHAIN_BAND_RATIO));
            if let Some(mc) = m.get("mc_coupling_cost") {
                let se = get(m, "mc_coupling_se")?;
                let mut worst_excess = f64::NEG_INFINITY;
                for ((n, est), (_, s)) in mc.iter().zip(se) {
                    let b = lookup_x(bound, *n)?;
                    worst_excess = worst_excess.max((est - b) / s.max(1e-300));
                }
                flags.push(Flag::le(
                    "mc_within_bound",
                    worst_excess,
                    tol::GIBBS_CHAIN_MC_SIGMAS,
                ));
            }
        }
        other => return Err(Error::UnknownName(format!("experiment {other}"))),
    }
    Ok(flags)
}

pub fn verdict_text(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for f in &report.flags {
        out.push_str(&format!(
            "{} {}: value={} threshold={}\n",
            if f.passed { "PASS" } else { "FAIL" },
            f.name,
            f.value,
            f.threshold
        ));
    }
    out.push_str(&format!(
        "VERDICT: {}\n",
        if report.all_passed() { "PASS" } else { "FAIL" }
    ));
    out.push_str(&format!("runtime_secs: {:.3}\n", report.runtime_secs));
    out
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

/// SVG plots as (filename, content), derived from the series alone so the
/// CLI `report` subcommand can regenerate them from metrics.csv.
pub fn render_plots(experiment: &str, m: &SeriesMap) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (name, pts) in m {
        if pts.len() < 2 {
            continue;
        }
        let svg = line_plot(&format!("{experiment}: {name}"), "x", name, pts, false, false);
        out.push((format!("{}.svg", sanitize(name)), svg));
    }
    // log-log rate plot with the fitted slope in the title
    if let (Some(w1), Some(slope)) = (m.get("w1_nu_star"), m.get("fitted_slope")) {
        if w1.len() >= 2 {
            let title =
                format!("{experiment}: W1(nu_a, nu*) vs a, fitted slope {:.3}", slope[0].1);
            out.push((
                "rate_loglog.svg".into(),
                line_plot(&title, "a (log)", "W1 (log)", w1, true, true),
            ));
        }
    }
    if let (Some(d), Some(rate)) = (m.get("mean_distance"), m.get("fitted_rate")) {
        let title = format!("{experiment}: mean distance, fitted rate {:.3}", rate[0].1);
        out.push((
            "distance_semilog.svg".into(),
            line_plot(&title, "t", "mean distance (log)", d, false, true),
        ));
    }
    out
}

/// Write metrics.csv, config.echo, verdict.txt, and SVG plots into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.csv"), metrics_csv(&report.series))?;
    fs::write(dir.join("config.echo"), &report.config_echo)?;
    fs::write(dir.join("verdict.txt"), verdict_text(report))?;
    let m = series_map(&report.series);
    for (name, svg) in render_plots(&report.experiment, &m) {
        fs::write(dir.join(name), svg)?;
    }
    Ok(())
}

/// Output directory for a config: <outdir>/<experiment>/<tag>/.
pub fn report_dir(outdir: &Path, experiment: &str, tag: &str) -> PathBuf {
    outdir.join(experiment).join(tag)
}

pub(crate) fn finish(
    experiment: &str,
    config_echo: String,
    series: Vec<Series>,
    started: std::time::Instant,
) -> Result<ExperimentReport> {
    let m = series_map(&series);
    let flags = compute_flags(experiment, &m)?;
    Ok(ExperimentReport {
        experiment: experiment.to_string(),
        series,
        flags,
        runtime_secs: started.elapsed().as_secs_f64(),
        config_echo,
    })
}
