#![allow(dead_code)]

use leonav_core::frames::{enu_frame_at, GeodeticPosition};
use leonav_core::propagate::mean_motion_for_altitude;
use leonav_core::tle::ImpliedExponent;
use leonav_core::{Constellation, EnuFrame, TleRecord, UtcInstant};

pub fn epoch() -> UtcInstant {
    UtcInstant::from_calendar(2026, 1, 30, 15, 0, 0.0)
}

pub fn site() -> GeodeticPosition {
    GeodeticPosition::from_degrees(43.0848638, -77.6786127, 170.0).unwrap()
}

pub fn frame() -> EnuFrame {
    enu_frame_at(&site())
}

pub fn circular(norad_id: u32, altitude: f64, incl_deg: f64, raan_deg: f64, ma_deg: f64) -> TleRecord {
    TleRecord {
        name: format!("STARLINK-{norad_id}"),
        norad_id,
        classification: 'U',
        international_designator: "26001A".into(),
        epoch: epoch(),
        mean_motion_dot: 0.0,
        mean_motion_ddot: ImpliedExponent::ZERO,
        bstar: ImpliedExponent::ZERO,
        ephemeris_type: 0,
        element_set_number: 999,
        inclination: incl_deg.to_radians(),
        raan: raan_deg.to_radians(),
        eccentricity: 0.0,
        arg_perigee: 0.0,
        mean_anomaly: ma_deg.to_radians(),
        mean_motion: mean_motion_for_altitude(altitude),
        revolution_number: 1,
        constellation: Constellation::Starlink,
    }
}
