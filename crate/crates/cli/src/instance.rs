//! Instance files: either a Blaschke-Potapov product or a de Branges pair.

use std::fs;
use std::path::Path;

use modelspace_core::debranges::DeBrangesJson;
use modelspace_core::domains::DomainKind;
use modelspace_core::inner::InnerSpecJson;
use serde_json::Value;

use crate::CliError;

pub enum Instance {
    Inner(InnerSpecJson),
    DeBranges(DeBrangesJson),
}

impl Instance {
    pub fn domain(&self) -> DomainKind {
        match self {
            Instance::Inner(s) => s.domain,
            Instance::DeBranges(s) => s.domain,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Instance::Inner(_) => "inner",
            Instance::DeBranges(_) => "de_branges",
        }
    }
}

/// Read an instance file, keeping the raw JSON for the report echo.
pub fn load(path: &Path) -> Result<(Instance, Value), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("{} is not valid JSON: {e}", path.display())))?;
    let is_de_branges = raw.get("e_plus").is_some();
    let instance = if is_de_branges {
        serde_json::from_value(raw.clone()).map(Instance::DeBranges)
    } else {
        serde_json::from_value(raw.clone()).map(Instance::Inner)
    }
    .map_err(|e| {
        let what = if is_de_branges { "de Branges" } else { "inner function" };
        CliError::Invalid(format!("{} does not match the {what} schema: {e}", path.display()))
    })?;
    Ok((instance, raw))
}

/// Parse `RE,IM`.
pub fn parse_complex(s: &str) -> Result<[f64; 2], String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected RE,IM, got {s:?}"))?;
    let re: f64 = re.trim().parse().map_err(|e| format!("bad real part {re:?}: {e}"))?;
    let im: f64 = im.trim().parse().map_err(|e| format!("bad imaginary part {im:?}: {e}"))?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(format!("alpha must be finite, got {s:?}"));
    }
    Ok([re, im])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_pairs() {
        assert_eq!(parse_complex("0.5,-0.25").unwrap(), [0.5, -0.25]);
        assert_eq!(parse_complex(" -1 , 2 ").unwrap(), [-1.0, 2.0]);
        assert!(parse_complex("0.5").is_err());
        assert!(parse_complex("nan,0").is_err());
    }
}
