//! Canonical JSON: sorted keys, integers verbatim, every other number
//! printed with 9 significant digits. Used for content hashes.

use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn to_canonical_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(0.0)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_value(&map[key], out);
            }
            out.push('}');
        }
    }
}

/// Nine significant digits in scientific notation; negative zero prints as zero.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000e0".to_string();
    }
    format!("{x:.8e}")
}

pub fn hash_value(value: &Value) -> String {
    hex::encode(Sha256::digest(to_canonical_string(value).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sorts_keys_and_fixes_floats() {
        let v = json!({"b": 1.0, "a": [1, -0.0, 0.1 + 0.2], "c": "x"});
        assert_eq!(
            to_canonical_string(&v),
            r#"{"a":[1,0.00000000e0,3.00000000e-1],"b":1.00000000e0,"c":"x"}"#
        );
    }

    #[test]
    fn float_noise_below_nine_digits_hashes_equal() {
        assert_eq!(hash_value(&json!([0.1 + 0.2])), hash_value(&json!([0.3])));
        assert_ne!(hash_value(&json!([0.3])), hash_value(&json!([0.31])));
    }
}
