//! Synthetic Walker-style constellations emitted as TLE text.
//!
//! Stands in for an archived catalog snapshot: several Starlink-like shells
//! and a 30-satellite Navstar-like constellation in six planes.

use leonav_core::propagate::mean_motion_for_altitude;
use leonav_core::tle::{parse_tle_file, Constellation, ImpliedExponent, ParseMode, TleCatalog, TleError, TleRecord};
use leonav_core::UtcInstant;

/// One Walker delta shell: `planes` equally spaced RAANs with `per_plane`
/// satellites each, inter-plane phasing `phasing` (Walker F).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shell {
    pub altitude_m: f64,
    pub inclination_deg: f64,
    pub planes: u32,
    pub per_plane: u32,
    pub phasing: u32,
}

/// Starlink-like shells, roughly the 2025–2026 deployment.
pub const STARLINK_SHELLS: [Shell; 6] = [
    Shell { altitude_m: 550_000.0, inclination_deg: 53.0, planes: 72, per_plane: 22, phasing: 17 },
    Shell { altitude_m: 540_000.0, inclination_deg: 53.2, planes: 72, per_plane: 22, phasing: 11 },
    Shell { altitude_m: 570_000.0, inclination_deg: 70.0, planes: 36, per_plane: 20, phasing: 5 },
    Shell { altitude_m: 560_000.0, inclination_deg: 97.6, planes: 10, per_plane: 43, phasing: 3 },
    Shell { altitude_m: 530_000.0, inclination_deg: 43.0, planes: 28, per_plane: 120, phasing: 13 },
    Shell { altitude_m: 525_000.0, inclination_deg: 53.0, planes: 28, per_plane: 120, phasing: 7 },
];

/// Navstar-like: six planes of five, 55°, semi-synchronous.
pub const NAVSTAR_SHELL: Shell = Shell { altitude_m: 20_180_000.0, inclination_deg: 55.0, planes: 6, per_plane: 5, phasing: 1 };

pub const STARLINK_FIRST_ID: u32 = 44_000;
pub const NAVSTAR_FIRST_ID: u32 = 40_000;

fn shell_records(
    shell: &Shell,
    first_id: u32,
    name: impl Fn(u32) -> String,
    epoch: UtcInstant,
    launch: &str,
    raan_offset: f64,
) -> Vec<TleRecord> {
    let total = shell.planes * shell.per_plane;
    let mut out = Vec::with_capacity(total as usize);
    for p in 0..shell.planes {
        for s in 0..shell.per_plane {
            let idx = p * shell.per_plane + s;
            let raan = raan_offset + 360.0 * p as f64 / shell.planes as f64;
            let ma = 360.0 * s as f64 / shell.per_plane as f64 + 360.0 * (shell.phasing * p) as f64 / total as f64;
            let id = first_id + idx;
            out.push(TleRecord {
                name: name(id),
                norad_id: id,
                classification: 'U',
                international_designator: format!("{launch}{}", (b'A' + (idx % 26) as u8) as char),
                epoch,
                mean_motion_dot: 0.0,
                mean_motion_ddot: ImpliedExponent::ZERO,
                bstar: ImpliedExponent::ZERO,
                ephemeris_type: 0,
                element_set_number: 999,
                inclination: shell.inclination_deg.to_radians(),
                raan: (raan % 360.0).to_radians(),
                eccentricity: 1e-4,
                arg_perigee: 90f64.to_radians(),
                mean_anomaly: (ma % 360.0).to_radians(),
                mean_motion: mean_motion_for_altitude(shell.altitude_m),
                revolution_number: 1000 + idx % 9000,
                constellation: Constellation::from_name(&name(id)),
            });
        }
    }
    out
}

/// All synthetic records with element epoch `epoch`.
pub fn synthetic_records(epoch: UtcInstant) -> Vec<TleRecord> {
    let mut out = Vec::new();
    let mut first = STARLINK_FIRST_ID;
    for (k, shell) in STARLINK_SHELLS.iter().enumerate() {
        out.extend(shell_records(
            shell,
            first,
            |id| format!("STARLINK-{}", id - STARLINK_FIRST_ID + 1000),
            epoch,
            &format!("2{}0{:02}", k % 6, 10 + k),
            7.0 * k as f64,
        ));
        first += shell.planes * shell.per_plane;
    }
    out.extend(shell_records(
        &NAVSTAR_SHELL,
        NAVSTAR_FIRST_ID,
        |id| format!("GPS BIIF-{} (PRN {:02})", id - NAVSTAR_FIRST_ID + 1, id - NAVSTAR_FIRST_ID + 1),
        epoch,
        "14045",
        12.0,
    ));
    out
}

/// Three-line TLE text of the synthetic catalog.
pub fn synthetic_catalog_text(epoch: UtcInstant) -> String {
    let mut text = String::new();
    for r in synthetic_records(epoch) {
        let (l1, l2) = r.to_lines();
        text.push_str(&r.name);
        text.push('\n');
        text.push_str(&l1);
        text.push('\n');
        text.push_str(&l2);
        text.push('\n');
    }
    text
}

/// The synthetic catalog as it would be read back from its TLE text, so the
/// in-memory elements carry the same quantization as a file.
pub fn synthetic_catalog(epoch: UtcInstant) -> Result<TleCatalog, TleError> {
    Ok(parse_tle_file(&synthetic_catalog_text(epoch), ParseMode::Strict)?.catalog)
}
