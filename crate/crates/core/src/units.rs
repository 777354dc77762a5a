//! Quantity strings such as `"0.085 mm"` or `"80 GPa"`.
//!
//! SI-prefixed units are applied by shifting the decimal exponent before
//! parsing, so `"0.085 mm"` yields exactly the double nearest `8.5e-5`.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Pressure,
    Angle,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Length => "length (m, cm, mm, um)",
            Dimension::Pressure => "pressure (Pa, kPa, MPa, GPa)",
            Dimension::Angle => "angle (rad, mrad, deg)",
        })
    }
}

enum Scale {
    Decimal(i32),
    Degrees,
}

fn scale(unit: &str, dim: Dimension) -> Option<Scale> {
    use Dimension::*;
    Some(match (dim, unit) {
        (Length, "m") => Scale::Decimal(0),
        (Length, "cm") => Scale::Decimal(-2),
        (Length, "mm") => Scale::Decimal(-3),
        (Length, "um" | "µm") => Scale::Decimal(-6),
        (Pressure, "Pa") => Scale::Decimal(0),
        (Pressure, "kPa") => Scale::Decimal(3),
        (Pressure, "MPa") => Scale::Decimal(6),
        (Pressure, "GPa") => Scale::Decimal(9),
        (Angle, "rad") => Scale::Decimal(0),
        (Angle, "mrad") => Scale::Decimal(-3),
        (Angle, "deg") => Scale::Degrees,
        _ => return None,
    })
}

/// Parses `"<number> <unit>"` into SI base units.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_alphabetic())
        .last()
        .map(|(i, _)| i);
    let Some(split) = split else {
        return Err(format!("missing unit in {text:?}; expected a {dim}"));
    };
    let (number, unit) = (text[..split].trim(), &text[split..]);
    let scale = scale(unit, dim).ok_or_else(|| format!("unknown unit {unit:?} in {text:?}; expected a {dim}"))?;
    let bad = || format!("invalid number {number:?} in {text:?}");
    let value = match scale {
        Scale::Decimal(0) => number.parse::<f64>().map_err(|_| bad())?,
        Scale::Decimal(shift) => {
            let (mantissa, exp) = match number.find(['e', 'E']) {
                Some(i) => (&number[..i], number[i + 1..].parse::<i32>().map_err(|_| bad())?),
                None => (number, 0),
            };
            mantissa.parse::<f64>().map_err(|_| bad())?;
            format!("{mantissa}e{}", exp + shift).parse::<f64>().map_err(|_| bad())?
        }
        Scale::Degrees => number.parse::<f64>().map_err(|_| bad())?.to_radians(),
    };
    if !value.is_finite() {
        return Err(format!("non-finite value in {text:?}"));
    }
    Ok(value)
}

/// Formats an SI value so that [`parse_quantity`] reads it back exactly.
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    let unit = match dim {
        Dimension::Length => "m",
        Dimension::Pressure => "Pa",
        Dimension::Angle => "rad",
    };
    format!("{value:?} {unit}")
}
