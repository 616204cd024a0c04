//! JSON and CSV emission.
//!
//! Floating-point values are written with 17 significant digits so that every
//! double round-trips. Object keys come out sorted, which together with the
//! fixed number format makes output byte-for-byte reproducible. The `timing`
//! member is written on a single line so it can be stripped before comparing
//! runs.

use serde::Serializer;
use serde_json::Value;

/// Serializes non-finite values as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_f64(v, s),
        None => s.serialize_none(),
    }
}

/// `%.17g`-style rendering, always with a decimal point or exponent.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if neg { "-" } else { "" };
    if (-5..17).contains(&exp) {
        if exp >= 0 {
            let int_len = exp as usize + 1;
            let (int_part, frac) = if digits.len() > int_len {
                (digits[..int_len].to_string(), digits[int_len..].to_string())
            } else {
                (format!("{digits:0<int_len$}"), String::new())
            };
            let frac = if frac.is_empty() { "0".to_string() } else { frac };
            format!("{sign}{int_part}.{frac}")
        } else {
            let zeros = "0".repeat((-exp - 1) as usize);
            format!("{sign}0.{zeros}{digits}")
        }
    } else {
        let (head, tail) = digits.split_at(1);
        let tail = if tail.is_empty() { "0" } else { tail };
        format!("{sign}{head}.{tail}e{exp}")
    }
}

fn write_scalar(v: &Value, out: &mut String) {
    match v {
        Value::Number(n) if n.is_f64() => out.push_str(&format_f64(n.as_f64().expect("f64"))),
        other => out.push_str(&other.to_string()),
    }
}

fn write_compact(v: &Value, out: &mut String) {
    match v {
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_compact(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_compact(item, out);
            }
            out.push('}');
        }
        scalar => write_scalar(scalar, out),
    }
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(items) => items.iter().all(|i| !matches!(i, Value::Array(_) | Value::Object(_))),
        Value::Object(_) => false,
        _ => true,
    }
}

fn write_pretty(v: &Value, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth + 1);
    match v {
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                out.push_str(&pad);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                if k == "timing" || is_flat(item) {
                    write_compact(item, out);
                } else {
                    write_pretty(item, depth + 1, out);
                }
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&"  ".repeat(depth));
            out.push('}');
        }
        Value::Array(items) if !is_flat(v) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad);
                write_pretty(item, depth + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&"  ".repeat(depth));
            out.push(']');
        }
        other => write_compact(other, out),
    }
}

/// Renders a JSON document with sorted keys and 17-digit floats.
pub fn to_json_string(v: &Value) -> String {
    let mut out = String::new();
    write_pretty(v, 0, &mut out);
    out.push('\n');
    out
}

/// Renders a JSON value on one line with sorted keys and 17-digit floats.
pub fn to_compact_string(v: &Value) -> String {
    let mut out = String::new();
    write_compact(v, &mut out);
    out
}

/// Flattens an object of scalars to a two-line CSV (header and values).
/// Nested objects are flattened with dotted keys; arrays are skipped.
pub fn to_csv_row(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, cols: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) => {
                for (k, item) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, item, cols);
                }
            }
            Value::Array(_) => {}
            Value::String(s) => cols.push((prefix.to_string(), csv_field(s))),
            scalar => {
                let mut s = String::new();
                write_scalar(scalar, &mut s);
                cols.push((prefix.to_string(), s));
            }
        }
    }
    let mut cols = Vec::new();
    walk("", v, &mut cols);
    let header: Vec<&str> = cols.iter().map(|(k, _)| k.as_str()).collect();
    let values: Vec<&str> = cols.iter().map(|(_, v)| v.as_str()).collect();
    format!("{}\n{}\n", header.join(","), values.join(","))
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn number_format() {
        assert_eq!(format_f64(1.0), "1.0");
        assert_eq!(format_f64(0.1), "0.10000000000000001");
        assert_eq!(format_f64(-2.5e-7), "-2.4999999999999999e-7");
        assert_eq!(format_f64(-(2f64.powi(-20))), "-9.5367431640625e-7");
        assert_eq!(format_f64(123456.0), "123456.0");
        assert_eq!(format_f64(1e20), "1.0e20");
        assert_eq!(format_f64(0.00012), "0.00012");
    }

    #[test]
    fn timing_on_one_line() {
        let v = json!({"b": 1, "a": {"x": 0.5}, "timing": {"wall_seconds": 1.5}});
        let s = to_json_string(&v);
        assert!(s.contains("\"timing\": {\"wall_seconds\": 1.5}"), "{s}");
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn csv_flattening() {
        let v = json!({"estimate": {"mean": 0.5, "replicas": 10}, "command": "tail", "xs": [1, 2]});
        assert_eq!(to_csv_row(&v), "command,estimate.mean,estimate.replicas\ntail,0.5,10\n");
    }

    proptest! {
        #[test]
        fn round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let s = format_f64(x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
