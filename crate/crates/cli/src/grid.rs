//! Grid syntax for sweep axes: comma-separated items, each a number or an
//! inclusive range `lo:hi:step`.

const ENDPOINT_SLACK: f64 = 1e-12;

pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(format!("empty item in grid '{spec}'"));
        }
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [x] => out.push(number(x)?),
            [lo, hi, step] => out.extend(range(number(lo)?, number(hi)?, number(step)?)?),
            _ => return Err(format!("'{item}' is neither a number nor lo:hi:step")),
        }
    }
    Ok(out)
}

fn number(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

/// `lo, lo + step, ...` up to `hi`; a point within 1e-12 of `hi` is snapped to
/// it, and every point is rounded to 12 significant digits so `0:0.3:0.1`
/// yields `0.3` rather than `0.30000000000000004`.
fn range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(step > 0.0) {
        return Err(format!("range step must be positive, got {step}"));
    }
    if lo > hi {
        return Err(format!("range start {lo} exceeds end {hi}"));
    }
    let mut out = Vec::new();
    for k in 0u64.. {
        let x = clean(lo + k as f64 * step);
        if (x - hi).abs() <= ENDPOINT_SLACK {
            out.push(hi);
            break;
        }
        if x > hi {
            break;
        }
        out.push(x);
    }
    Ok(out)
}

fn clean(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}
