//! Law-file parsing.
//!
//! ```text
//! # two children at +1/-1
//! kind = tabulated
//! row = 1/4 : 1 1
//! row = 1/2 : 1 -1
//! row = 1/4 : -1 -1
//! ```
//!
//! Entries are separated by newlines or `;`. An entry holding several
//! `key=value` tokens separated by whitespace is also accepted, so
//! `kind=fixed_gaussian b=2 mean=0 sd=1` works inline.

use std::path::Path;

use num_traits::CheckedAdd;

use super::{Rational, ReproductionLaw};
use crate::error::{Error, Result};

/// Parses `p/q`, integer and plain decimal literals into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Schema(format!("not a rational literal: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let frac_part = frac_part.trim_end_matches('0');
    let mut value = Rational::from_integer(if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? });
    if !frac_part.is_empty() {
        let digits: i64 = frac_part.parse().map_err(|_| bad())?;
        let scale = 10i64.checked_pow(frac_part.len() as u32).ok_or_else(bad)?;
        value = value.checked_add(&Rational::new(digits, scale)).ok_or_else(bad)?;
    }
    Ok(if neg { -value } else { value })
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Schema(format!("{key}: not a number: {s:?}")))
}

fn entries(text: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for raw in text.split(['\n', ';']) {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.matches('=').count() > 1 {
            for tok in line.split_whitespace() {
                if let Some((k, v)) = tok.split_once('=') {
                    out.push((k.trim().to_string(), v.trim().to_string()));
                } else {
                    out.push((tok.to_string(), String::new()));
                }
            }
        } else if let Some((k, v)) = line.split_once('=') {
            out.push((k.trim().to_string(), v.trim().to_string()));
        } else {
            out.push((line.to_string(), String::new()));
        }
    }
    out
}

/// Parses law-file text (see the module docs for the schema).
pub fn parse_law(text: &str) -> Result<ReproductionLaw> {
    let mut kind = None;
    let mut rows = Vec::new();
    let mut offspring = Vec::new();
    let mut scalars: Vec<(String, String)> = Vec::new();
    for (key, value) in entries(text) {
        match key.as_str() {
            "kind" => {
                if kind.replace(value.clone()).is_some() {
                    return Err(Error::Schema("duplicate key `kind`".into()));
                }
            }
            "row" => {
                let (p, ds) = value
                    .split_once(':')
                    .ok_or_else(|| Error::Schema(format!("row needs `prob : displacements`, got {value:?}")))?;
                let prob = parse_rational(p)?;
                let ds = ds.split_whitespace().map(parse_rational).collect::<Result<Vec<_>>>()?;
                rows.push((prob, ds));
            }
            "offspring" => {
                let (k, p) = value
                    .split_once(':')
                    .ok_or_else(|| Error::Schema(format!("offspring needs `count : prob`, got {value:?}")))?;
                let k: u32 = k
                    .trim()
                    .parse()
                    .map_err(|_| Error::Schema(format!("offspring count {k:?}")))?;
                offspring.push((k, parse_rational(p)?));
            }
            "mu" | "b" | "mean" | "sd" => {
                if scalars.iter().any(|(k, _)| *k == key) {
                    return Err(Error::Schema(format!("duplicate key `{key}`")));
                }
                scalars.push((key, value));
            }
            other => return Err(Error::Schema(format!("unknown key `{other}`"))),
        }
    }
    let get = |name: &str| -> Result<&str> {
        scalars
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Schema(format!("missing key `{name}`")))
    };
    let expect_only = |allowed: &[&str]| -> Result<()> {
        for (k, _) in &scalars {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Schema(format!("key `{k}` does not apply to this kind")));
            }
        }
        Ok(())
    };
    let kind = kind.ok_or_else(|| Error::Schema("missing key `kind`".into()))?;
    match kind.as_str() {
        "tabulated" => {
            expect_only(&[])?;
            if !offspring.is_empty() {
                return Err(Error::Schema("`offspring` does not apply to tabulated laws".into()));
            }
            ReproductionLaw::tabulated(rows)
        }
        family @ ("poisson_gaussian" | "fixed_gaussian" | "mixed_gaussian") => {
            if !rows.is_empty() {
                return Err(Error::Schema("`row` only applies to tabulated laws".into()));
            }
            let mean = parse_f64("mean", get("mean")?)?;
            let sd = parse_f64("sd", get("sd")?)?;
            match family {
                "poisson_gaussian" => {
                    expect_only(&["mu", "mean", "sd"])?;
                    ReproductionLaw::poisson_gaussian(parse_f64("mu", get("mu")?)?, mean, sd)
                }
                "fixed_gaussian" => {
                    expect_only(&["b", "mean", "sd"])?;
                    let b = get("b")?;
                    let b: u32 = b.parse().map_err(|_| Error::Schema(format!("b: not a count: {b:?}")))?;
                    ReproductionLaw::fixed_gaussian(b, mean, sd)
                }
                _ => {
                    expect_only(&["mean", "sd"])?;
                    ReproductionLaw::mixed_gaussian(offspring, mean, sd)
                }
            }
        }
        other => Err(Error::Schema(format!("unknown kind `{other}`"))),
    }
}

/// Loads a law from a file path, or parses the argument inline when no such
/// file exists.
pub fn load_law(arg: &str) -> Result<ReproductionLaw> {
    let path = Path::new(arg);
    if !arg.contains('=') && path.is_file() {
        let text = std::fs::read_to_string(path)?;
        parse_law(&text)
    } else {
        parse_law(arg)
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::LawKind;
    use super::*;

    #[test]
    fn rational_literals() {
        assert_eq!(parse_rational("1/4").unwrap(), r(1, 4));
        assert_eq!(parse_rational("-0.25").unwrap(), r(-1, 4));
        assert_eq!(parse_rational("+3").unwrap(), int(3));
        assert_eq!(parse_rational(".5").unwrap(), r(1, 2));
        assert_eq!(parse_rational("0.476812").unwrap(), r(476812, 1_000_000));
        assert!(parse_rational("1e3").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn inline_fixed_gaussian() {
        let law = parse_law("kind=fixed_gaussian b=2 mean=0 sd=1").unwrap();
        assert_eq!(law.kind(), LawKind::FixedGaussian);
        assert_eq!(law.to_string(), "kind = fixed_gaussian\nb = 2\nmean = 0.0\nsd = 1.0\n");
    }

    #[test]
    fn tabulated_c2pm1() {
        let text = "# C2PM1\nkind = tabulated\nrow = 1/4 : +1 +1\nrow = 1/2 : 1 -1\nrow = 1/4 : -1 -1\n";
        let law = parse_law(text).unwrap();
        let expected = c2pm1();
        assert_eq!(law.as_tabulated().unwrap().rows(), expected.as_tabulated().unwrap().rows());
        let again = parse_law(&law.to_string()).unwrap();
        assert_eq!(again.to_string(), law.to_string());
    }

    #[test]
    fn probability_errors() {
        let err = parse_law("kind = tabulated; row = 0.5 : 1; row = 0.6 : -1").unwrap_err();
        assert_eq!(err.to_string(), "probabilities sum to 1.1");
        let err = parse_law("kind = tabulated; row = 1 :").unwrap_err();
        assert_eq!(err, Error::AllExtinct);
    }

    #[test]
    fn mixed_and_poisson() {
        let law = parse_law("kind = mixed_gaussian; offspring = 0 : 0.6; offspring = 2 : 0.4; mean = 0; sd = 1").unwrap();
        assert_eq!(law.mean_offspring_exact(), Some(r(4, 5)));
        let law = parse_law("kind=poisson_gaussian mu=2 mean=0 sd=1").unwrap();
        assert_eq!(law.kind(), LawKind::PoissonGaussian);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse_law("b = 2"), Err(Error::Schema(_))));
        assert!(matches!(parse_law("kind = gamma"), Err(Error::Schema(_))));
        assert!(matches!(parse_law("kind=fixed_gaussian b=2 mean=0"), Err(Error::Schema(_))));
        assert!(matches!(parse_law("kind=fixed_gaussian b=2 mean=0 sd=1 mu=3"), Err(Error::Schema(_))));
        assert!(matches!(parse_law("kind = tabulated; row = 1/2 1"), Err(Error::Schema(_))));
    }
}
