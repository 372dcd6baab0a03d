//! Flat key = value experiment configuration with per-experiment defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};

pub const EXPERIMENTS: [&str; 6] = [
    "exp_invariance",
    "exp_hwang",
    "exp_contraction",
    "exp_anneal",
    "exp_compare_sigma",
    "exp_gibbs_chain",
];

/// Resolved configuration: defaults for the named experiment overlaid
/// with user keys. Values stay as strings; typed accessors parse on use.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub outdir: PathBuf,
    pub tag: String,
    map: BTreeMap<String, String>,
}

/// Parse `key = value` lines; '#' starts a comment, blank lines ignored.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidInput(format!(
                "config line {}: expected key = value, got {raw:?}",
                ln + 1
            )));
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() || v.is_empty() {
            return Err(Error::InvalidInput(format!("config line {}: empty key or value", ln + 1)));
        }
        if map.insert(k.clone(), v).is_some() {
            return Err(Error::InvalidInput(format!("config line {}: duplicate key {k}", ln + 1)));
        }
    }
    Ok(map)
}

fn defaults_for(experiment: &str) -> Result<Vec<(&'static str, &'static str)>> {
    Ok(match experiment {
        "exp_invariance" => vec![
            ("potential", "quadratic1d(1)"),
            ("field", "constant(1)"),
            ("a", "1.0"),
            ("gamma", "0.001"),
            ("horizon", "1.0"),
            ("record_at", "0.25,0.5,0.75,1.0"),
            ("n_chains", "100000"),
            ("ref_h", "0.00025"),
            ("ref_chains", "50000"),
        ],
        "exp_hwang" => vec![
            ("potential", "double_well_1d(2,8)"),
            ("ladder", "0.4,0.3,0.2,0.15,0.1,0.07,0.05"),
        ],
        "exp_contraction" => vec![
            ("potential", "quadratic1d(1)"),
            ("field", "constant(1)"),
            ("a", "0.5"),
            ("gamma", "0.001"),
            ("horizon", "2.0"),
            ("n_pairs", "100"),
            ("n_records", "50"),
            ("x0", "1.0"),
            ("y0", "-1.0"),
            ("box", "-10,10"),
        ],
        "exp_anneal" => vec![
            ("potential", "global_local_1d"),
            ("field", "constant(1)"),
            ("schedule.A", "1.0"),
            ("schedule.C_T", "3.6"),
            ("schedule.beta", "0.5"),
            ("schedule.eps", "1.0"),
            ("steps.gamma1", "0.3"),
            ("steps.alpha", "0.51"),
            ("n_chains", "1000"),
            ("aux_chains", "300"),
            ("n_plateaus", "20"),
            ("radius", "0.2"),
            ("basin_boundary", "0.0"),
            ("x0", "-1.0"),
            ("box", "-4,5"),
            ("sens_chains", "200"),
            ("sens_multipliers", "0.5,2.0"),
        ],
        "exp_compare_sigma" => vec![
            ("lambda", "0.1"),
            ("gamma", "0.0199"),
            ("a", "0.02"),
            ("threshold_excess", "0.09"),
            ("kappa_well", "1"),
            ("kappa_ill", "100"),
            ("x0", "0.3,2.0"),
            ("n_chains", "64"),
            ("max_steps", "2000"),
        ],
        "exp_gibbs_chain" => vec![
            ("potential", "quadratic1d(1)"),
            ("schedule.A", "1.0"),
            ("schedule.C_T", "1.0"),
            ("schedule.beta", "1.0"),
            ("n_min", "10"),
            ("n_max", "1000"),
            ("mc_n", "4000"),
            ("mc_points", "10,100,1000"),
        ],
        other => return Err(Error::UnknownName(format!("experiment {other}"))),
    })
}

impl ExperimentConfig {
    /// Build from a parsed key map. Unknown keys are rejected so typos
    /// fail loudly instead of being silently ignored.
    pub fn from_map(mut map: BTreeMap<String, String>) -> Result<Self> {
        let experiment = map
            .remove("experiment")
            .ok_or_else(|| Error::InvalidInput("config: missing key 'experiment'".into()))?;
        let defaults = defaults_for(&experiment)?;
        let seed = match map.remove("seed") {
            Some(s) => s
                .parse::<u64>()
                .map_err(|_| Error::InvalidInput(format!("config: bad seed {s:?}")))?,
            None => 1,
        };
        let outdir = PathBuf::from(map.remove("outdir").unwrap_or_else(|| "out".into()));
        let tag = map.remove("tag").unwrap_or_else(|| format!("seed{seed}"));
        for key in map.keys() {
            if !defaults.iter().any(|(k, _)| k == key) {
                return Err(Error::InvalidInput(format!(
                    "config: unknown key {key:?} for {experiment}"
                )));
            }
        }
        for (k, v) in defaults {
            map.entry(k.to_string()).or_insert_with(|| v.to_string());
        }
        Ok(ExperimentConfig { experiment, seed, outdir, tag, map })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_map(parse_config_text(text)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !self.map.contains_key(key) {
            return Err(Error::InvalidInput(format!(
                "config: unknown key {key:?} for {}",
                self.experiment
            )));
        }
        self.map.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.map
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::InvalidInput(format!("config: missing key {key:?}")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let s = self.str(key)?;
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidInput(format!("config: key {key} = {s:?} is not a number")))?;
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("config: key {key} = {s:?} is not finite")));
        }
        Ok(v)
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let s = self.str(key)?;
        s.parse()
            .map_err(|_| Error::InvalidInput(format!("config: key {key} = {s:?} is not an integer")))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let s = self.str(key)?;
        s.split(',')
            .map(|p| {
                p.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("config: key {key} = {s:?} is not a number list"))
                })
            })
            .collect()
    }

    /// Canonical echo of the effective configuration, sorted by key.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("experiment = {}\n", self.experiment));
        out.push_str(&format!("outdir = {}\n", self.outdir.display()));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("tag = {}\n", self.tag));
        for (k, v) in &self.map {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
