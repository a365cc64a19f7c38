//! Two-line element set parsing, checksum validation and re-serialization.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::frames::wrap_two_pi;
use crate::time::UtcInstant;

/// Length of a TLE data line including the checksum column.
pub const LINE_LENGTH: usize = 69;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TleError {
    #[error("line {line}: checksum mismatch (expected {expected}, found {found})")]
    ChecksumMismatch { line: usize, expected: u8, found: char },
    #[error("line {line}: malformed field in columns {start}-{end}: {reason}")]
    MalformedField { line: usize, start: usize, end: usize, reason: String },
    #[error("line {line}: truncated record")]
    TruncatedRecord { line: usize },
    #[error("line {line}: duplicate NORAD id {norad_id}")]
    DuplicateNoradId { line: usize, norad_id: u32 },
    #[error("checksum input must be 68 or 69 characters, got {0}")]
    WrongLength(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constellation {
    Starlink,
    Navstar,
    Other,
}

impl Constellation {
    /// Infers the constellation from a satellite name.
    pub fn from_name(name: &str) -> Self {
        let upper = name.trim().to_ascii_uppercase();
        if upper.starts_with("STARLINK") {
            Constellation::Starlink
        } else if upper.starts_with("NAVSTAR") || upper.starts_with("GPS") {
            Constellation::Navstar
        } else {
            Constellation::Other
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Constellation::Starlink => "starlink",
            Constellation::Navstar => "navstar",
            Constellation::Other => "other",
        }
    }
}

/// Fixed-width "implied decimal point" field such as `-11606-4`
/// meaning -0.11606e-4.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImpliedExponent {
    pub mantissa: i32,
    pub exponent: i8,
    /// Keeps `+0` and `-0` exponents distinguishable for re-serialization.
    pub exponent_negative: bool,
}

impl ImpliedExponent {
    pub const ZERO: ImpliedExponent = ImpliedExponent { mantissa: 0, exponent: 0, exponent_negative: true };

    pub fn value(&self) -> f64 {
        let mut scale = 1e-5;
        let mut e = self.exponent;
        while e > 0 {
            scale *= 10.0;
            e -= 1;
        }
        while e < 0 {
            scale /= 10.0;
            e += 1;
        }
        self.mantissa as f64 * scale
    }

    fn parse(field: &str) -> Option<Self> {
        let b = field.as_bytes();
        if b.len() != 8 {
            return None;
        }
        let sign = match b[0] {
            b' ' | b'+' => 1,
            b'-' => -1,
            _ => return None,
        };
        let digits = field[1..6].trim();
        let mantissa: i32 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
        let exponent_negative = match b[6] {
            b'-' => true,
            b'+' | b' ' => false,
            _ => return None,
        };
        let mag = (b[7] as char).to_digit(10)? as i8;
        Some(ImpliedExponent { mantissa: sign * mantissa, exponent: if exponent_negative { -mag } else { mag }, exponent_negative })
    }

    fn format(&self) -> String {
        let sign = if self.mantissa < 0 { '-' } else { ' ' };
        let esign = if self.exponent_negative { '-' } else { '+' };
        format!("{sign}{:05}{esign}{}", self.mantissa.unsigned_abs(), self.exponent.unsigned_abs())
    }
}

/// One parsed element set.
#[derive(Clone, Debug, PartialEq)]
pub struct TleRecord {
    pub name: String,
    pub norad_id: u32,
    pub classification: char,
    pub international_designator: String,
    pub epoch: UtcInstant,
    /// First derivative of mean motion / 2 (rev/day^2).
    pub mean_motion_dot: f64,
    pub mean_motion_ddot: ImpliedExponent,
    pub bstar: ImpliedExponent,
    pub ephemeris_type: u8,
    pub element_set_number: u32,
    pub inclination: f64,
    pub raan: f64,
    pub eccentricity: f64,
    pub arg_perigee: f64,
    pub mean_anomaly: f64,
    /// Revolutions per day.
    pub mean_motion: f64,
    pub revolution_number: u32,
    pub constellation: Constellation,
}

impl TleRecord {
    /// B* drag term in inverse Earth radii.
    pub fn bstar_value(&self) -> f64 {
        self.bstar.value()
    }

    /// Re-serializes both data lines in the fixed-width column layout,
    /// checksums included.
    pub fn to_lines(&self) -> (String, String) {
        let (year, doy) = self.epoch.year_day();
        let ndot = format!("{:.8}", self.mean_motion_dot.abs());
        let ndot = ndot.strip_prefix('0').unwrap_or(&ndot);
        let ndot_sign = if self.mean_motion_dot < 0.0 { '-' } else { ' ' };
        let mut l1 = String::with_capacity(LINE_LENGTH);
        let _ = write!(
            l1,
            "1 {:05}{} {:<8} {:02}{:012.8} {}{} {} {} {} {:>4}",
            self.norad_id,
            self.classification,
            self.international_designator,
            year.rem_euclid(100),
            doy,
            ndot_sign,
            ndot,
            self.mean_motion_ddot.format(),
            self.bstar.format(),
            self.ephemeris_type,
            self.element_set_number,
        );
        let ecc = format!("{:.7}", self.eccentricity);
        let mut l2 = String::with_capacity(LINE_LENGTH);
        let _ = write!(
            l2,
            "2 {:05} {:8.4} {:8.4} {} {:8.4} {:8.4} {:11.8}{:>5}",
            self.norad_id,
            self.inclination.to_degrees(),
            self.raan.to_degrees(),
            &ecc[2..],
            self.arg_perigee.to_degrees(),
            self.mean_anomaly.to_degrees(),
            self.mean_motion,
            self.revolution_number,
        );
        for line in [&mut l1, &mut l2] {
            let c = checksum(line).expect("formatted line is 68 characters");
            line.push((b'0' + c) as char);
        }
        (l1, l2)
    }
}

/// Mod-10 TLE checksum over the first 68 columns: digits count their value,
/// `-` counts one, everything else zero.
pub fn checksum(line: &str) -> Result<u8, TleError> {
    let n = line.chars().count();
    if n != 68 && n != 69 {
        return Err(TleError::WrongLength(n));
    }
    let sum: u32 = line
        .chars()
        .take(68)
        .map(|c| match c {
            '0'..='9' => c as u32 - '0' as u32,
            '-' => 1,
            _ => 0,
        })
        .sum();
    Ok((sum % 10) as u8)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TleCatalog {
    pub records: Vec<TleRecord>,
    /// Calendar date of the newest epoch in the catalog.
    pub source_date: Option<(i32, u32, u32)>,
}

impl TleCatalog {
    pub fn new(records: Vec<TleRecord>) -> Self {
        let source_date = records
            .iter()
            .max_by(|a, b| a.epoch.seconds_since(&b.epoch).partial_cmp(&0.0).unwrap_or(core::cmp::Ordering::Equal))
            .map(|r| r.epoch.date());
        TleCatalog { records, source_date }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, norad_id: u32) -> Option<&TleRecord> {
        self.records.iter().find(|r| r.norad_id == norad_id)
    }

    /// Order-preserving subset of one constellation.
    pub fn filter_constellation(&self, c: Constellation) -> TleCatalog {
        TleCatalog::new(self.records.iter().filter(|r| r.constellation == c).cloned().collect())
    }

    /// Serializes the catalog in three-line form (name line first when present).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            if !r.name.is_empty() {
                out.push_str(&r.name);
                out.push('\n');
            }
            let (l1, l2) = r.to_lines();
            out.push_str(&l1);
            out.push('\n');
            out.push_str(&l2);
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseMode {
    /// Abort on the first malformed record.
    Strict,
    /// Skip malformed records, reporting them.
    Lenient,
}

/// Outcome of catalog parsing: the validated records plus any records that
/// were skipped in lenient mode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParseReport {
    pub catalog: TleCatalog,
    pub skipped: Vec<TleError>,
}

/// Parses a catalog of two- or three-line element sets.
pub fn parse_tle_file(text: &str, mode: ParseMode) -> Result<ParseReport, TleError> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end())).filter(|(_, l)| !l.is_empty()).collect();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = BTreeSet::new();
    let mut i = 0;
    while i < lines.len() {
        let (ln, first) = lines[i];
        let (name, name_consumed) = if is_data_line(first, '1') { ("", 0) } else { (strip_name(first), 1) };
        let l1 = lines.get(i + name_consumed).copied();
        let l2 = lines.get(i + name_consumed + 1).copied();
        let result = match (l1, l2) {
            (Some(a), Some(b)) if is_data_line(a.1, '1') && is_data_line(b.1, '2') => {
                i += name_consumed + 2;
                parse_record(name, a, b)
            }
            _ => {
                // resynchronize on the next line that could start a record
                i += 1;
                while i < lines.len() && is_data_line(lines[i].1, '2') {
                    i += 1;
                }
                Err(TleError::TruncatedRecord { line: ln })
            }
        };
        let result = result.and_then(|r| {
            if seen.insert(r.norad_id) {
                Ok(r)
            } else {
                Err(TleError::DuplicateNoradId { line: ln, norad_id: r.norad_id })
            }
        });
        match (result, mode) {
            (Ok(r), _) => records.push(r),
            (Err(e), ParseMode::Strict) => return Err(e),
            (Err(e), ParseMode::Lenient) => skipped.push(e),
        }
    }
    Ok(ParseReport { catalog: TleCatalog::new(records), skipped })
}

fn is_data_line(line: &str, tag: char) -> bool {
    let mut chars = line.chars();
    chars.next() == Some(tag) && chars.next() == Some(' ')
}

fn strip_name(line: &str) -> &str {
    // 3LE files prefix the name line with "0 "
    line.strip_prefix("0 ").unwrap_or(line).trim()
}

struct Columns<'a> {
    line_no: usize,
    text: &'a str,
}

impl<'a> Columns<'a> {
    /// One-based inclusive column range.
    fn raw(&self, start: usize, end: usize) -> &'a str {
        &self.text[start - 1..end]
    }

    fn err(&self, start: usize, end: usize, reason: &str) -> TleError {
        TleError::MalformedField { line: self.line_no, start, end, reason: reason.to_string() }
    }

    fn parse<T: core::str::FromStr>(&self, start: usize, end: usize, what: &str) -> Result<T, TleError> {
        self.raw(start, end).trim().parse().map_err(|_| self.err(start, end, what))
    }
}

fn validate_line(line_no: usize, text: &str) -> Result<Columns<'_>, TleError> {
    if !text.is_ascii() || text.len() != LINE_LENGTH {
        return Err(TleError::MalformedField {
            line: line_no,
            start: 1,
            end: text.len(),
            reason: format!("data line must be {LINE_LENGTH} ASCII characters"),
        });
    }
    let expected = checksum(text)?;
    let found = text.as_bytes()[68] as char;
    if found.to_digit(10) != Some(expected as u32) {
        return Err(TleError::ChecksumMismatch { line: line_no, expected, found });
    }
    Ok(Columns { line_no, text })
}

fn parse_record(name: &str, (n1, t1): (usize, &str), (n2, t2): (usize, &str)) -> Result<TleRecord, TleError> {
    let c1 = validate_line(n1, t1)?;
    let c2 = validate_line(n2, t2)?;

    let norad_id: u32 = c1.parse(3, 7, "catalog number")?;
    let norad_2: u32 = c2.parse(3, 7, "catalog number")?;
    if norad_2 != norad_id {
        return Err(c2.err(3, 7, "catalog number differs from line 1"));
    }
    let classification = c1.raw(8, 8).chars().next().unwrap_or('U');
    let international_designator = c1.raw(10, 17).trim_end().to_string();

    let yy: i32 = c1.parse(19, 20, "epoch year")?;
    let doy: f64 = c1.parse(21, 32, "epoch day")?;
    if !(1.0..367.0).contains(&doy) {
        return Err(c1.err(21, 32, "epoch day out of range"));
    }
    let year = if yy < 57 { 2000 + yy } else { 1900 + yy };
    let epoch = UtcInstant::from_year_day(year, doy);

    let ndot_text = c1.raw(34, 43);
    let mean_motion_dot: f64 = ndot_text.trim().replace(' ', "").parse().map_err(|_| c1.err(34, 43, "mean motion derivative"))?;
    let mean_motion_ddot = ImpliedExponent::parse(c1.raw(45, 52)).ok_or_else(|| c1.err(45, 52, "mean motion second derivative"))?;
    let bstar = ImpliedExponent::parse(c1.raw(54, 61)).ok_or_else(|| c1.err(54, 61, "bstar"))?;
    let ephemeris_type: u8 = c1.parse(63, 63, "ephemeris type").or_else(|e| if c1.raw(63, 63) == " " { Ok(0) } else { Err(e) })?;
    let element_set_number: u32 = c1.parse(65, 68, "element set number")?;

    let deg = |c: &Columns, s, e, what| -> Result<f64, TleError> {
        let v: f64 = c.parse(s, e, what)?;
        if !(0.0..=360.0).contains(&v) {
            return Err(c.err(s, e, what));
        }
        Ok(v.to_radians())
    };
    let inclination = deg(&c2, 9, 16, "inclination")?;
    if inclination > core::f64::consts::PI {
        return Err(c2.err(9, 16, "inclination above 180 degrees"));
    }
    let raan = wrap_two_pi(deg(&c2, 18, 25, "right ascension")?);
    let ecc_digits = c2.raw(27, 33);
    if !ecc_digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(c2.err(27, 33, "eccentricity"));
    }
    let eccentricity: f64 = format!("0.{ecc_digits}").parse().map_err(|_| c2.err(27, 33, "eccentricity"))?;
    let arg_perigee = wrap_two_pi(deg(&c2, 35, 42, "argument of perigee")?);
    let mean_anomaly = wrap_two_pi(deg(&c2, 44, 51, "mean anomaly")?);
    let mean_motion: f64 = c2.parse(53, 63, "mean motion")?;
    if !(mean_motion > 0.0) {
        return Err(c2.err(53, 63, "mean motion must be positive"));
    }
    let revolution_number: u32 = {
        let raw = c2.raw(64, 68).trim();
        if raw.is_empty() {
            0
        } else {
            raw.parse().map_err(|_| c2.err(64, 68, "revolution number"))?
        }
    };

    Ok(TleRecord {
        name: name.to_string(),
        norad_id,
        classification,
        international_designator,
        epoch,
        mean_motion_dot,
        mean_motion_ddot,
        bstar,
        ephemeris_type,
        element_set_number,
        inclination,
        raan,
        eccentricity,
        arg_perigee,
        mean_anomaly,
        mean_motion,
        revolution_number,
        constellation: Constellation::from_name(name),
    })
}
