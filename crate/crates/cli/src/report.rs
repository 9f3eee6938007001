//! JSON report assembly and output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
const SIG_DIGITS: usize = 6;

/// Rounds to six significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every floating-point number in the tree. Non-finite values become null.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(num) if num.is_f64() => {
            let x = num.as_f64().unwrap_or(f64::NAN);
            *v = serde_json::Number::from_f64(round_sig(x)).map(Value::Number).unwrap_or(Value::Null);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn to_json<T: Serialize>(report: &T) -> CliResult<String> {
    let mut v = serde_json::to_value(report).map_err(|e| CliError::Usage(format!("cannot serialize report: {e}")))?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Usage(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or standard output when absent.
pub fn emit(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io { path: p.display().to_string(), detail: e.to_string() }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io { path: "<stdout>".into(), detail: e.to_string() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(round_sig(0.123456789), 0.123457);
        assert_eq!(round_sig(123456789.0), 123457000.0);
        assert_eq!(round_sig(-1.0e-7 / 3.0), -3.33333e-8);
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn rounding_walks_nested_values() {
        let mut v = serde_json::json!({"a": [1.23456789, 2], "b": {"c": f64::NAN}});
        round_value(&mut v);
        assert_eq!(v, serde_json::json!({"a": [1.23457, 2], "b": {"c": null}}));
    }
}
