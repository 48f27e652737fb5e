//! Symbolic angle expressions.
//!
//! Sweep directories and table rows are keyed by multiples of π/16, so angles
//! written as `k*pi/16` keep their exact rational form next to the radian value.
//! Plain decimal input is accepted and carries no rational form.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An angle in radians, optionally remembering that it is an exact rational multiple of π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle {
    radians: f64,
    /// Reduced `(numerator, denominator)` of the multiple of π, denominator > 0.
    pi_ratio: Option<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse angle expression {input:?}: {reason}")]
pub struct AngleParseError {
    input: String,
    reason: &'static str,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Angle {
    pub fn from_radians(radians: f64) -> Self {
        Angle {
            radians,
            pi_ratio: None,
        }
    }

    /// `num·π/den`. Panics if `den` is zero.
    pub fn pi_fraction(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator in angle fraction");
        let (mut num, mut den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = gcd(num, den).max(1);
        num /= g;
        den /= g;
        Angle {
            radians: num as f64 * PI / den as f64,
            pi_ratio: Some((num, den)),
        }
    }

    pub fn radians(&self) -> f64 {
        self.radians
    }

    pub fn pi_ratio(&self) -> Option<(i64, i64)> {
        self.pi_ratio
    }

    /// `k` when the angle is exactly `k·π/16`.
    pub fn sixteenths(&self) -> Option<i64> {
        let (num, den) = self.pi_ratio?;
        (16 % den == 0).then(|| num * (16 / den))
    }

    /// Human-readable row label, e.g. `6π/16`.
    pub fn label(&self) -> String {
        match (self.sixteenths(), self.pi_ratio) {
            (Some(0), _) => "0".to_string(),
            (Some(k), _) => format!("{k}π/16"),
            (None, Some((num, den))) => format!("{num}π/{den}"),
            (None, None) => format!("{:.4}", self.radians),
        }
    }

    /// Directory name of a sweep bucket, e.g. `phi_6pi16`.
    pub fn dir_name(&self) -> String {
        match (self.sixteenths(), self.pi_ratio) {
            (Some(k), _) => format!("phi_{k}pi16"),
            (None, Some((num, den))) => format!("phi_{num}pi{den}"),
            (None, None) => format!("phi_{:.6}rad", self.radians),
        }
    }

    /// Inverse of [`Angle::dir_name`].
    pub fn from_dir_name(name: &str) -> Option<Self> {
        let body = name.strip_prefix("phi_")?;
        if let Some(rad) = body.strip_suffix("rad") {
            return rad
                .parse()
                .ok()
                .filter(|r: &f64| r.is_finite())
                .map(Angle::from_radians);
        }
        let (num, den) = body.split_once("pi")?;
        let (num, den): (i64, i64) = (num.parse().ok()?, den.parse().ok()?);
        (den > 0).then(|| Angle::pi_fraction(num, den))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pi_ratio {
            Some((0, _)) => write!(f, "0"),
            Some((num, 1)) => write!(f, "{num}*pi"),
            Some((num, den)) => write!(f, "{num}*pi/{den}"),
            None => write!(f, "{}", self.radians),
        }
    }
}

impl FromStr for Angle {
    type Err = AngleParseError;

    /// Accepts `k*pi/d`, `kpi/d`, `pi/d`, `-pi`, `k*π/d`, `0.999*pi/2` and plain radians.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| AngleParseError {
            input: s.to_string(),
            reason,
        };
        let compact: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase()
            .replace('π', "pi");
        if compact.is_empty() {
            return Err(err("empty expression"));
        }

        let Some((coeff, rest)) = compact.split_once("pi") else {
            let radians: f64 = compact.parse().map_err(|_| err("not a number"))?;
            if !radians.is_finite() {
                return Err(err("not finite"));
            }
            if radians == 0.0 {
                return Ok(Angle::pi_fraction(0, 1));
            }
            return Ok(Angle::from_radians(radians));
        };

        let coeff = coeff.strip_suffix('*').unwrap_or(coeff);
        let den: i64 = match rest {
            "" => 1,
            r => {
                let digits = r
                    .strip_prefix('/')
                    .ok_or_else(|| err("expected '/' after pi"))?;
                let d: i64 = digits
                    .parse()
                    .map_err(|_| err("denominator must be an integer"))?;
                if d <= 0 {
                    return Err(err("denominator must be positive"));
                }
                d
            }
        };

        match coeff {
            "" | "+" => Ok(Angle::pi_fraction(1, den)),
            "-" => Ok(Angle::pi_fraction(-1, den)),
            c => {
                if let Ok(num) = c.parse::<i64>() {
                    Ok(Angle::pi_fraction(num, den))
                } else {
                    let k: f64 = c.parse().map_err(|_| err("bad coefficient"))?;
                    if !k.is_finite() {
                        return Err(err("not finite"));
                    }
                    Ok(Angle::from_radians(k * PI / den as f64))
                }
            }
        }
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Expr(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(r) => Ok(Angle::from_radians(r)),
            Raw::Expr(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
