//! Versioned text table of lifting filters.

use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::error::{Result, SheqError};

const STANDARD_TABLE: &str = include_str!("../../data/filters_v1.txt");

/// Supported table version.
pub const FILTER_TABLE_VERSION: u32 = 1;

/// Exact rational `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn parse(s: &str) -> Result<Self> {
        let bad = || SheqError::Format(format!("bad filter tap '{s}'"));
        if let Some((n, d)) = s.split_once('/') {
            let num: i64 = n.trim().parse().map_err(|_| bad())?;
            let den: i64 = d.trim().parse().map_err(|_| bad())?;
            if den <= 0 {
                return Err(bad());
            }
            return Ok(Self { num, den });
        }
        // finite decimal: scale by a power of ten
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10i64.pow(frac.len() as u32);
        let digits = format!("{int}{frac}");
        let num: i64 = digits.parse().map_err(|_| bad())?;
        Ok(Self { num, den })
    }
}

impl std::fmt::Display for Rational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Lifting filters of the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTable {
    pub version: u32,
    pub family: String,
    pub coarsest_level: u32,
    pub predict_interior: [Rational; 2],
    pub update_interior: [Rational; 2],
    pub update_left: [Rational; 2],
    pub update_right: [Rational; 2],
}

/// Filter taps as floating point numbers, used by the transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterTaps {
    pub predict: [f64; 2],
    pub update: [f64; 2],
    pub update_left: [f64; 2],
    pub update_right: [f64; 2],
}

impl FilterTable {
    /// The table shipped with the crate.
    pub fn standard() -> &'static FilterTable {
        static TABLE: OnceLock<FilterTable> = OnceLock::new();
        TABLE.get_or_init(|| FilterTable::parse(STANDARD_TABLE).expect("bundled filter table is valid"))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut family = None;
        let mut coarsest = None;
        let mut filters: Vec<(String, [Rational; 2])> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: &str| SheqError::Format(format!("line {}: {msg}", lineno + 1));
            match fields[0] {
                "version" if fields.len() == 2 => {
                    version = Some(fields[1].parse::<u32>().map_err(|_| err("bad version"))?)
                }
                "family" if fields.len() == 2 => family = Some(fields[1].to_string()),
                "coarsest_level" if fields.len() == 2 => {
                    coarsest = Some(fields[1].parse::<u32>().map_err(|_| err("bad level"))?)
                }
                "filter" if fields.len() == 4 => {
                    let taps = [Rational::parse(fields[2])?, Rational::parse(fields[3])?];
                    filters.push((fields[1].to_string(), taps));
                }
                _ => return Err(err(&format!("unrecognized entry '{line}'"))),
            }
        }
        let version = version.ok_or_else(|| SheqError::Format("missing version".into()))?;
        if version != FILTER_TABLE_VERSION {
            return Err(SheqError::Format(format!(
                "unsupported filter table version {version}"
            )));
        }
        let get = |name: &str| -> Result<[Rational; 2]> {
            let mut found = filters.iter().filter(|(n, _)| n == name);
            let first = found
                .next()
                .ok_or_else(|| SheqError::Format(format!("missing filter {name}")))?;
            if found.next().is_some() {
                return Err(SheqError::Format(format!("duplicate filter {name}")));
            }
            Ok(first.1)
        };
        let table = Self {
            version,
            family: family.ok_or_else(|| SheqError::Format("missing family".into()))?,
            coarsest_level: coarsest.ok_or_else(|| SheqError::Format("missing coarsest_level".into()))?,
            predict_interior: get("predict_interior")?,
            update_interior: get("update_interior")?,
            update_left: get("update_left")?,
            update_right: get("update_right")?,
        };
        if filters.len() != 4 {
            return Err(SheqError::Format("unknown filter name in table".into()));
        }
        if table.coarsest_level != super::index::J0 {
            return Err(SheqError::Format(format!(
                "table is for coarsest level {}, basis uses {}",
                table.coarsest_level,
                super::index::J0
            )));
        }
        Ok(table)
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "version {}", self.version);
        let _ = writeln!(s, "family {}", self.family);
        let _ = writeln!(s, "coarsest_level {}", self.coarsest_level);
        for (name, taps) in [
            ("predict_interior", &self.predict_interior),
            ("update_interior", &self.update_interior),
            ("update_left", &self.update_left),
            ("update_right", &self.update_right),
        ] {
            let _ = writeln!(s, "filter {name} {} {}", taps[0], taps[1]);
        }
        s
    }

    pub fn taps(&self) -> FilterTaps {
        let v = |t: &[Rational; 2]| [t[0].value(), t[1].value()];
        FilterTaps {
            predict: v(&self.predict_interior),
            update: v(&self.update_interior),
            update_left: v(&self.update_left),
            update_right: v(&self.update_right),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_table_values() {
        let t = FilterTable::standard();
        assert_eq!(t.version, 1);
        let taps = t.taps();
        assert_eq!(taps.predict, [0.5, 0.5]);
        assert_eq!(taps.update, [0.25, 0.25]);
        assert_eq!(taps.update_left, [0.75, -0.25]);
        assert_eq!(taps.update_right, [-0.25, 0.75]);
    }

    #[test]
    fn serialize_round_trip() {
        let t = FilterTable::standard();
        let again = FilterTable::parse(&t.serialize()).unwrap();
        assert_eq!(&again, t);
    }

    #[test]
    fn decimal_taps() {
        let text = FilterTable::standard().serialize().replace("1/4 1/4", "0.25 .25");
        let t = FilterTable::parse(&text).unwrap();
        assert_eq!(t.taps().update, [0.25, 0.25]);
    }

    #[test]
    fn malformed_tables_rejected() {
        assert!(FilterTable::parse("version 2\n").is_err());
        let text = FilterTable::standard().serialize();
        assert!(FilterTable::parse(&text.replace("filter update_left", "filter update_leftt")).is_err());
        assert!(FilterTable::parse(&text.replace("3/4", "3/0")).is_err());
        assert!(FilterTable::parse(&format!("{text}bogus line\n")).is_err());
    }
}
