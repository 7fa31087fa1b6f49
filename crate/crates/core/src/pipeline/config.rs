//! Flag-value parsers and the optional `key=value` config file.
//!
//! Config keys are flag names without the leading dashes (`max-lv=4`,
//! `cv=kfold:5:7`). Blank lines and `#` comments are ignored. A boolean flag is
//! enabled by `true`, `yes` or `1`.

use crate::pls::FoldSpec;

use super::{PipelineError, Result};

/// `loo`, `kfold:K` (seeded by `seed`) or `kfold:K:SEED`.
pub fn parse_cv_spec(s: &str, seed: u64) -> Result<FoldSpec> {
    let spec: FoldSpec = s.parse().map_err(PipelineError::Usage)?;
    let explicit_seed = s.trim().split(':').count() == 3;
    Ok(match spec {
        FoldSpec::KFold { k, .. } if !explicit_seed => FoldSpec::KFold { k, seed },
        other => other,
    })
}

/// `N` or `N1,N2`, each at least 1.
pub fn parse_lv_caps(s: &str) -> Result<Vec<usize>> {
    let caps = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| PipelineError::Usage(format!("--max-lv `{s}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if caps.is_empty() || caps.len() > 2 || caps.contains(&0) {
        return Err(PipelineError::Usage(format!("--max-lv `{s}`: expected N or N1,N2 with values >= 1")));
    }
    Ok(caps)
}

/// `(key, value)` pairs in file order.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| PipelineError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() || k == "config" {
            return Err(PipelineError::Usage(format!("config line {}: invalid key `{k}`", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Turns config pairs into command-line arguments. `flags` lists the keys that
/// take no value.
pub fn config_to_args(pairs: &[(String, String)], flags: &[&str]) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (k, v) in pairs {
        if flags.contains(&k.as_str()) {
            match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => args.push(format!("--{k}")),
                "false" | "no" | "0" => {}
                _ => return Err(PipelineError::Usage(format!("config `{k}`: expected true or false, got `{v}`"))),
            }
        } else {
            args.push(format!("--{k}"));
            args.push(v.clone());
        }
    }
    Ok(args)
}
