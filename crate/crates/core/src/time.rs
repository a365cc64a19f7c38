//! UTC time handling.
//!
//! Instants are stored as a whole-day count since 2000-01-01T00:00:00 UTC plus
//! seconds into that day, so sub-microsecond differences survive arithmetic
//! that would be lost in a single large `f64`. Leap seconds are ignored.

use core::fmt;

const SECONDS_PER_DAY: f64 = 86_400.0;
const J2000_JD: f64 = 2_451_545.0;

/// A UTC instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtcInstant {
    day: i64,
    sec: f64,
}

/// Error returned when parsing an ISO-8601 timestamp.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid UTC timestamp (expected YYYY-MM-DDTHH:MM:SS[.fff][Z])")]
pub struct ParseTimeError;

impl UtcInstant {
    /// 2000-01-01T00:00:00 UTC.
    pub const EPOCH_2000: UtcInstant = UtcInstant { day: 0, sec: 0.0 };

    fn normalized(day: i64, sec: f64) -> Self {
        let whole = (sec / SECONDS_PER_DAY).floor();
        let mut day = day + whole as i64;
        let mut sec = sec - whole * SECONDS_PER_DAY;
        // floor() can leave sec == 86400 after rounding
        if sec >= SECONDS_PER_DAY {
            sec -= SECONDS_PER_DAY;
            day += 1;
        }
        if sec < 0.0 {
            sec = 0.0;
        }
        UtcInstant { day, sec }
    }

    pub fn from_calendar(year: i32, month: u32, day: u32, hour: u32, minute: u32, second: f64) -> Self {
        let days = days_from_civil(year, month, day) - days_from_civil(2000, 1, 1);
        Self::normalized(days, hour as f64 * 3600.0 + minute as f64 * 60.0 + second)
    }

    /// Builds an instant from a year and a one-based fractional day of year,
    /// the layout used by TLE epochs (`001.5` is noon on January 1st).
    pub fn from_year_day(year: i32, day_of_year: f64) -> Self {
        let start = days_from_civil(year, 1, 1) - days_from_civil(2000, 1, 1);
        let whole = day_of_year.floor();
        Self::normalized(start + whole as i64 - 1, (day_of_year - whole) * SECONDS_PER_DAY)
    }

    /// Year and one-based fractional day of year.
    pub fn year_day(&self) -> (i32, f64) {
        let (year, _, _) = civil_from_days(self.day + days_from_civil(2000, 1, 1));
        let start = days_from_civil(year, 1, 1) - days_from_civil(2000, 1, 1);
        (year, (self.day - start + 1) as f64 + self.sec / SECONDS_PER_DAY)
    }

    /// Calendar date (year, month, day).
    pub fn date(&self) -> (i32, u32, u32) {
        civil_from_days(self.day + days_from_civil(2000, 1, 1))
    }

    /// Seconds since midnight of the instant's UTC day.
    pub fn seconds_of_day(&self) -> f64 {
        self.sec
    }

    pub fn add_seconds(self, dt: f64) -> Self {
        Self::normalized(self.day, self.sec + dt)
    }

    /// `self - earlier` in seconds.
    pub fn seconds_since(&self, earlier: &UtcInstant) -> f64 {
        (self.day - earlier.day) as f64 * SECONDS_PER_DAY + (self.sec - earlier.sec)
    }

    /// Julian date split into a whole-ish part and a day fraction.
    fn julian_days_since_j2000(&self) -> (f64, f64) {
        (self.day as f64, self.sec / SECONDS_PER_DAY - 0.5)
    }

    /// Whole microseconds since the 2000-01-01 epoch, for use as a lookup key.
    pub fn micros(&self) -> i64 {
        self.day * 86_400_000_000 + (self.sec * 1e6).round() as i64
    }

    pub fn julian_date(&self) -> f64 {
        let (d, f) = self.julian_days_since_j2000();
        J2000_JD + d + f
    }

    /// Greenwich mean sidereal time in radians, IAU-82 expression with UT1 = UTC.
    pub fn gmst(&self) -> f64 {
        let (d, f) = self.julian_days_since_j2000();
        let t = (d + f) / 36_525.0;
        // 876600 h * 3600 s/h * T = 86400 * (JD - J2000), which is the day fraction mod 86400
        let mut gmst_sec =
            67_310.548_41 + SECONDS_PER_DAY * f.rem_euclid_one() + 8_640_184.812_866 * t + 0.093_104 * t * t - 6.2e-6 * t * t * t;
        gmst_sec %= SECONDS_PER_DAY;
        if gmst_sec < 0.0 {
            gmst_sec += SECONDS_PER_DAY;
        }
        gmst_sec / SECONDS_PER_DAY * 2.0 * core::f64::consts::PI
    }

    /// Parses `YYYY-MM-DDTHH:MM:SS[.fff][Z]` (a space is accepted in place of `T`).
    pub fn parse_iso8601(text: &str) -> Result<Self, ParseTimeError> {
        let s = text.trim().trim_end_matches('Z');
        let b = s.as_bytes();
        if b.len() < 19 || b[4] != b'-' || b[7] != b'-' || (b[10] != b'T' && b[10] != b' ') || b[13] != b':' || b[16] != b':' {
            return Err(ParseTimeError);
        }
        let int = |r: core::ops::Range<usize>| -> Result<u32, ParseTimeError> {
            s.get(r).ok_or(ParseTimeError)?.parse::<u32>().map_err(|_| ParseTimeError)
        };
        let year = int(0..4)? as i32;
        let month = int(5..7)?;
        let day = int(8..10)?;
        let hour = int(11..13)?;
        let minute = int(14..16)?;
        let second: f64 = s[17..].parse().map_err(|_| ParseTimeError)?;
        if !(1..=12).contains(&month)
            || day == 0
            || day > days_in_month(year, month)
            || hour > 23
            || minute > 59
            || !(0.0..60.0).contains(&second)
        {
            return Err(ParseTimeError);
        }
        Ok(Self::from_calendar(year, month, day, hour, minute, second))
    }
}

impl fmt::Display for UtcInstant {
    /// ISO-8601 with millisecond resolution.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (y, mo, d) = self.date();
        let ms_total = (self.sec * 1000.0).round() as i64;
        let (ms_total, day_carry) = if ms_total >= 86_400_000 { (ms_total - 86_400_000, 1) } else { (ms_total, 0) };
        let (y, mo, d) = if day_carry == 1 { civil_from_days(self.day + 1 + days_from_civil(2000, 1, 1)) } else { (y, mo, d) };
        let h = ms_total / 3_600_000;
        let mi = (ms_total / 60_000) % 60;
        let s = (ms_total / 1000) % 60;
        let ms = ms_total % 1000;
        write!(f, "{y:04}-{mo:02}-{d:02}T{h:02}:{mi:02}:{s:02}.{ms:03}Z")
    }
}

trait RemOne {
    fn rem_euclid_one(self) -> f64;
}

impl RemOne for f64 {
    fn rem_euclid_one(self) -> f64 {
        self - self.floor()
    }
}

fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

// Howard Hinnant's civil calendar algorithms, days relative to 1970-01-01.
fn days_from_civil(year: i32, month: u32, day: u32) -> i64 {
    let y = if month <= 2 { year as i64 - 1 } else { year as i64 };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let m = month as i64;
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + day as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i32, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    ((if m <= 2 { y + 1 } else { y }) as i32, m, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calendar_round_trip() {
        let t = UtcInstant::from_calendar(2024, 2, 29, 13, 5, 7.25);
        assert_eq!(t.date(), (2024, 2, 29));
        assert!((t.seconds_of_day() - (13.0 * 3600.0 + 5.0 * 60.0 + 7.25)).abs() < 1e-9);
    }

    #[test]
    fn year_day_matches_calendar() {
        let t = UtcInstant::from_year_day(2024, 1.5);
        assert_eq!(t, UtcInstant::from_calendar(2024, 1, 1, 12, 0, 0.0));
        let (y, d) = UtcInstant::from_calendar(2023, 12, 31, 6, 0, 0.0).year_day();
        assert_eq!(y, 2023);
        assert!((d - 365.25).abs() < 1e-12);
    }

    #[test]
    fn second_arithmetic_is_exact_across_days() {
        let t0 = UtcInstant::from_calendar(2026, 1, 30, 23, 59, 59.5);
        let t1 = t0.add_seconds(1.0);
        assert_eq!(t1.date(), (2026, 1, 31));
        assert!((t1.seconds_since(&t0) - 1.0).abs() < 1e-12);
        assert!((t0.add_seconds(-86_400.0 * 3.0).seconds_since(&t0) + 259_200.0).abs() < 1e-9);
    }

    #[test]
    fn gmst_reference_value() {
        // Vallado example 3-5: 1992-08-20 12:14:00 UT1 -> GMST 152.578787810 deg
        let t = UtcInstant::from_calendar(1992, 8, 20, 12, 14, 0.0);
        let deg = t.gmst().to_degrees();
        assert!((deg - 152.578_787_81).abs() < 1e-6, "{deg}");
    }

    #[test]
    fn iso_parse_and_display() {
        let t = UtcInstant::parse_iso8601("2026-01-30T15:00:00.250Z").unwrap();
        assert_eq!(alloc::format!("{t}"), "2026-01-30T15:00:00.250Z");
        assert!(UtcInstant::parse_iso8601("2026-02-30T00:00:00Z").is_err());
        assert!(UtcInstant::parse_iso8601("garbage").is_err());
    }
}
