//! Optional TOML/JSON configuration files. Every command's options struct
//! has only `Option` fields; values given on the command line win over the
//! file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

fn read_file(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| CliError::io(path, e))?,
        _ => serde_json::from_str(&text).map_err(|e| CliError::io(path, e))?,
    };
    let Value::Object(mut map) = value else {
        return Err(CliError::io(path, "configuration must be a table/object"));
    };
    // a run manifest can be replayed directly
    if map.contains_key("command") && map.contains_key("config") {
        if let Some(Value::Object(inner)) = map.remove("config") {
            return Ok(Value::Object(inner));
        }
    }
    Ok(Value::Object(map))
}

/// Overlays the non-null fields of `flags` on the contents of `path`.
pub fn merge_with_file<T>(flags: &T, path: Option<&Path>) -> CliResult<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let Some(path) = path else {
        return Ok(serde_json::from_value(to_object(flags)?.into()).expect("round trip"));
    };
    let Value::Object(mut base) = read_file(path)? else {
        unreachable!("read_file returns objects")
    };
    let known = to_object(&T::default())?;
    if let Some(key) = base.keys().find(|k| !known.contains_key(*k)) {
        return Err(CliError::Usage(format!(
            "unknown key `{key}` in {}",
            path.display()
        )));
    }
    for (k, v) in to_object(flags)? {
        if !v.is_null() {
            base.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(base))
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn to_object<T: Serialize>(value: &T) -> CliResult<Map<String, Value>> {
    match serde_json::to_value(value) {
        Ok(Value::Object(m)) => Ok(m),
        _ => Err(CliError::Numeric(
            "options do not serialize to an object".into(),
        )),
    }
}

/// Accepts plain numbers as well as `pi`, `pi/k` and `k*pi`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    let pi = std::f64::consts::PI;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
    let value = if t == "pi" {
        pi
    } else if let Some(d) = t.strip_prefix("pi/") {
        pi / num(d)?
    } else if let Some(k) = t.strip_suffix("*pi") {
        num(k)? * pi
    } else {
        num(&t)?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{s}` is not a finite angle"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        let pi = std::f64::consts::PI;
        assert_eq!(parse_angle("pi/10").unwrap(), pi / 10.0);
        assert_eq!(parse_angle("2*pi").unwrap(), 2.0 * pi);
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert!(parse_angle("pi/x").is_err());
        assert!(parse_angle("").is_err());
    }
}
