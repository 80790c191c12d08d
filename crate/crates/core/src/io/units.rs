//! Unit-suffixed scalars in configuration files: times (`ps`, `ns`, `us`,
//! `s`) and angles (`deg`, `rad`).

use crate::error::{Error, Result};

fn split_suffix<'a>(key: &str, text: &'a str, units: &[&'a str]) -> Result<(f64, &'a str)> {
    let t = text.trim();
    // longest suffix first so "ps" is not read as "s"
    let mut sorted = units.to_vec();
    sorted.sort_by_key(|u| std::cmp::Reverse(u.len()));
    for u in sorted {
        if let Some(num) = t.strip_suffix(u) {
            let v: f64 = num
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {text:?} as a number with unit {u}")))?;
            if !v.is_finite() {
                return Err(Error::Config(format!("{key}: {text:?} is not finite")));
            }
            return Ok((v, u));
        }
    }
    Err(Error::Config(format!(
        "{key}: {text:?} needs a unit suffix (one of {})",
        units.join(", ")
    )))
}

/// Seconds from a suffixed time such as `"25ps"`.
pub fn parse_time(key: &str, text: &str) -> Result<f64> {
    let (v, u) = split_suffix(key, text, &["ps", "ns", "us", "s"])?;
    Ok(match u {
        "ps" => v * 1e-12,
        "ns" => v * 1e-9,
        "us" => v * 1e-6,
        _ => v,
    })
}

/// Radians from a suffixed angle such as `"40deg"` or `"0.5rad"`.
pub fn parse_angle(key: &str, text: &str) -> Result<f64> {
    let (v, u) = split_suffix(key, text, &["deg", "rad"])?;
    Ok(if u == "deg" { v.to_radians() } else { v })
}

/// Exact, round-trippable time string in seconds.
pub fn format_time(seconds: f64) -> String {
    format!("{seconds:e}s")
}

/// Exact, round-trippable angle string in radians.
pub fn format_angle(radians: f64) -> String {
    format!("{radians:e}rad")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_suffixes() {
        assert!((parse_time("t", "25ps").unwrap() - 25e-12).abs() < 1e-24);
        assert!((parse_time("t", "1.5 ns").unwrap() - 1.5e-9).abs() < 1e-21);
        assert_eq!(parse_time("t", "2s").unwrap(), 2.0);
        assert!((parse_angle("a", "180deg").unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(parse_angle("a", "0.5rad").unwrap(), 0.5);
    }

    #[test]
    fn rejects_missing_units() {
        for bad in ["25", "25 m", "ps", "nan ps"] {
            let e = parse_time("sensor.bin_width", bad).unwrap_err();
            assert!(e.to_string().contains("sensor.bin_width"), "{e}");
        }
        assert!(parse_angle("scene.fov", "40").is_err());
    }

    #[test]
    fn formatting_round_trips_exactly() {
        for v in [25e-12, 1.0 / 3.0 * 1e-9, 0.0] {
            assert_eq!(parse_time("t", &format_time(v)).unwrap(), v);
        }
        for a in [0.1, std::f64::consts::PI - 1e-9] {
            assert_eq!(parse_angle("a", &format_angle(a)).unwrap(), a);
        }
    }
}
