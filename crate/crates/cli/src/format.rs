//! Fixed number formatting shared by every output file.

use serde::Serialize;
use serde_json::{Number, Value};

/// 17 significant digits in lowercase e-notation; `nan`, `inf`, `-inf` for
/// non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn normalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("float number");
            *v = fmt_f64(x).parse::<Number>().map(Value::Number).unwrap_or(Value::Null);
        }
        Value::Array(items) => items.iter_mut().for_each(normalize),
        Value::Object(map) => map.values_mut().for_each(normalize),
        _ => {}
    }
}

/// A JSON tree with every float rewritten by [`fmt_f64`]; non-finite
/// floats become `null`. The JSON number parser writes the exponent with an
/// explicit sign, so `1e0` appears as `1.0000000000000000e+0`.
pub fn to_value<T: Serialize>(item: &T) -> Value {
    let mut v = serde_json::to_value(item).expect("serializable");
    normalize(&mut v);
    v
}

pub fn to_json_line<T: Serialize>(item: &T) -> String {
    serde_json::to_string(&to_value(item)).expect("serializable")
}

pub fn to_json_pretty<T: Serialize>(item: &T) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(item)).expect("serializable");
    s.push('\n');
    s
}

/// The comment line that opens every CSV and data file.
pub fn config_header<T: Serialize>(config: &T) -> String {
    format!("# config: {}\n", to_json_line(config))
}
