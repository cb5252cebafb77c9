//! Locale-free number formatting and the frozen CSV schema.

use immune_sim::experiments::SurvivalEstimate;
use serde_json::{json, Map, Value};

pub const CSV_HEADER: &str = "model,dim,lambda,r,trials,survivors,estimate,ci_low,ci_high,seed,wall_time_s";

const SIG_DIGITS: i32 = 9;

/// `printf("%.9g")`: nine significant digits, trailing zeros trimmed,
/// scientific notation outside `1e-5 <= |x| < 1e9`.
pub fn g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (SIG_DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG_DIGITS {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (SIG_DIGITS - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A JSON number carrying the same nine significant digits as the CSV, or
/// the string `"inf"` for infinities.
pub fn num(x: f64) -> Value {
    if x.is_infinite() {
        return Value::String(g9(x));
    }
    g9(x)
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn dim_field(est: &SurvivalEstimate) -> String {
    est.params.dim.map(|d| d.to_string()).unwrap_or_default()
}

pub fn csv_row(est: &SurvivalEstimate, seed: u64, wall_time: bool) -> String {
    let p = &est.params;
    [
        p.model.as_str().to_string(),
        dim_field(est),
        g9(p.lambda),
        g9(p.r),
        est.trials.to_string(),
        est.survivors.to_string(),
        g9(est.estimate),
        g9(est.ci_low),
        g9(est.ci_high),
        seed.to_string(),
        g9(if wall_time { est.wall_time_s } else { 0.0 }),
    ]
    .join(",")
}

/// The CSV fields as a JSON object, plus `extra` appended in order.
pub fn json_row(est: &SurvivalEstimate, seed: u64, wall_time: bool, extra: Map<String, Value>) -> Value {
    let p = &est.params;
    let mut row = json!({
        "model": p.model.as_str(),
        "dim": p.dim,
        "lambda": num(p.lambda),
        "r": num(p.r),
        "trials": est.trials,
        "survivors": est.survivors,
        "estimate": num(est.estimate),
        "ci_low": num(est.ci_low),
        "ci_high": num(est.ci_high),
        "seed": seed,
        "wall_time_s": num(if wall_time { est.wall_time_s } else { 0.0 }),
    });
    row.as_object_mut().expect("object").extend(extra);
    row
}
