//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # Case I, four sites
//! k = 4
//! n_per_site = 100000
//! beta0 = -1, -0.5, 0, 0.5, 1
//! cases = I, I, I, I        # or `case = I` for every site
//! target_cr = 0.2
//! r0 = 200
//! r = 200, 400, 600, 800
//! delta = 0.1
//! replications = 200
//! master_seed = 20240601
//! ```
//!
//! Omitted keys keep the defaults of [`SimConfig::homogeneous`] for Case I with
//! four sites. `DSUBCOX_SEED` in the environment overrides `master_seed`.

use std::path::Path;

use dsubcox_core::datagen::{CaseTag, SimConfig};

use crate::error::{HarnessError, Result};

pub const SEED_ENV: &str = "DSUBCOX_SEED";

pub const DEFAULT_BETA0: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

fn list<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(|v| v.trim().parse().map_err(|_| format!("{key}: cannot parse `{}`", v.trim())))
        .collect()
}

fn one<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("{key}: cannot parse `{value}`"))
}

fn cases(value: &str) -> std::result::Result<Vec<CaseTag>, String> {
    value
        .split(',')
        .map(|v| CaseTag::from_numeral(v.trim()).ok_or_else(|| format!("unknown case `{}` (use I, II, III or IV)", v.trim())))
        .collect()
}

/// Parses configuration text; `origin` labels error messages.
pub fn parse_config(text: &str, origin: &Path) -> Result<SimConfig> {
    let mut cfg = SimConfig::homogeneous(CaseTag::NormalEquiCorr, 4, DEFAULT_BETA0.to_vec());
    let mut single_case = None;
    let mut explicit_cases = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| HarnessError::data(origin, format!("line {}: {msg}", i + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let parsed: std::result::Result<(), String> = (|| {
            match key {
                "k" => cfg.k = one(key, value)?,
                "n_per_site" => cfg.n_per_site = one(key, value)?,
                "beta0" => cfg.beta0 = list(key, value)?,
                "case" => single_case = Some(cases(value)?.into_iter().next().ok_or("case: empty")?),
                "cases" => {
                    cfg.cases = cases(value)?;
                    explicit_cases = true;
                }
                "target_cr" => cfg.target_cr = one(key, value)?,
                "r0" => cfg.r0 = one(key, value)?,
                "r" => cfg.r = list(key, value)?,
                "delta" => cfg.delta = one(key, value)?,
                "replications" => cfg.replications = one(key, value)?,
                "master_seed" => cfg.master_seed = one(key, value)?,
                _ => return Err(format!("unknown key `{key}`")),
            }
            Ok(())
        })();
        parsed.map_err(bad)?;
    }
    if explicit_cases && single_case.is_some() {
        return Err(HarnessError::data(origin, "give either `case` or `cases`, not both"));
    }
    if let Some(case) = single_case {
        cfg.cases = vec![case; cfg.k];
    } else if !explicit_cases {
        cfg.cases = vec![cfg.cases[0]; cfg.k];
    }
    apply_seed_override(&mut cfg.master_seed, std::env::var(SEED_ENV).ok().as_deref())?;
    cfg.validate().map_err(|e| HarnessError::data(origin, e.to_string()))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text, path)
}

/// Replaces `seed` with the override value when one is set.
pub fn apply_seed_override(seed: &mut u64, value: Option<&str>) -> Result<()> {
    if let Some(v) = value {
        *seed = v
            .trim()
            .parse()
            .map_err(|_| HarnessError::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))?;
    }
    Ok(())
}

/// Serializes `cfg` in the format [`parse_config`] reads.
pub fn render_config(cfg: &SimConfig) -> String {
    let join = |v: Vec<String>| v.join(", ");
    format!(
        "k = {}\nn_per_site = {}\nbeta0 = {}\ncases = {}\ntarget_cr = {}\nr0 = {}\nr = {}\ndelta = {}\nreplications = {}\nmaster_seed = {}\n",
        cfg.k,
        cfg.n_per_site,
        join(cfg.beta0.iter().map(f64::to_string).collect()),
        join(cfg.cases.iter().map(|c| c.numeral().to_string()).collect()),
        cfg.target_cr,
        cfg.r0,
        join(cfg.r.iter().map(usize::to_string).collect()),
        cfg.delta,
        cfg.replications,
        cfg.master_seed
    )
}
