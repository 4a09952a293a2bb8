//! Trace ingestion and coordinate conversion.
//!
//! Raw GPS fixes are parsed from CSV, converted to a local East-North-Up
//! frame anchored at the first fix of the trace, and resampled to a uniform
//! grid so every downstream consumer sees equally spaced samples.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// WGS-84 semi-major axis in meters.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// First eccentricity squared, e2 = f(2 - f).
const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Tolerance when comparing timestamps that should land on the same grid
/// instant.
pub const TIME_TOL_S: f64 = 1e-9;

/// A raw geodetic GPS fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticFix {
    /// Trace time in seconds, monotone within a trace.
    pub t: f64,
    /// Latitude in degrees, WGS-84.
    pub lat: f64,
    /// Longitude in degrees, WGS-84.
    pub lon: f64,
    /// Altitude in meters above the ellipsoid.
    pub alt: f64,
}

impl GeodeticFix {
    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() {
            return Err(Error::invalid("fix", "non-finite timestamp"));
        }
        if !(-90.0..=90.0).contains(&self.lat) || !self.lat.is_finite() {
            return Err(Error::invalid("fix", format!("latitude {} out of range", self.lat)));
        }
        if !(-180.0..=180.0).contains(&self.lon) || !self.lon.is_finite() {
            return Err(Error::invalid("fix", format!("longitude {} out of range", self.lon)));
        }
        if !self.alt.is_finite() {
            return Err(Error::invalid("fix", "non-finite altitude"));
        }
        Ok(())
    }
}

/// One sample of a trajectory in the local ENU frame, elevation dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnuSample {
    /// Seconds.
    pub t: f64,
    /// Meters East of the reference.
    pub x: f64,
    /// Meters North of the reference.
    pub y: f64,
}

/// A time series of 2D positions in a local East-North frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnuTrajectory {
    /// Frame origin. Traces parsed directly from ENU CSV carry a placeholder
    /// origin at (0, 0, 0); tracking error is translation invariant.
    pub reference: GeodeticFix,
    /// Samples in strictly increasing time order.
    pub samples: Vec<EnuSample>,
    /// Nominal sample rate. Exact after [`resample`].
    pub rate_hz: f64,
}

impl EnuTrajectory {
    pub fn new(reference: GeodeticFix, samples: Vec<EnuSample>, rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        for pair in samples.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(Error::invalid("trajectory", "timestamps not strictly increasing"));
            }
        }
        Ok(EnuTrajectory { reference, samples, rate_hz })
    }

    /// Trace time spanned by the samples.
    pub fn duration(&self) -> f64 {
        self.samples.last().unwrap().t - self.samples[0].t
    }

    /// True when consecutive deltas equal `1/rate_hz` within [`TIME_TOL_S`].
    pub fn is_uniform(&self, rate_hz: f64) -> bool {
        let dt = 1.0 / rate_hz;
        self.samples
            .windows(2)
            .all(|p| ((p[1].t - p[0].t) - dt).abs() <= TIME_TOL_S)
    }
}

/// Input trace format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    /// CSV with header `t,lat,lon,alt` (s, deg, deg, m).
    Geodetic,
    /// CSV with header `t,x,y` (s, m, m); bypasses conversion.
    Enu,
}

/// Result of [`parse_trace`].
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedTrace {
    Geodetic(Vec<GeodeticFix>),
    Enu(EnuTrajectory),
}

const GEODETIC_HEADER: [&str; 4] = ["t", "lat", "lon", "alt"];
const ENU_HEADER: [&str; 3] = ["t", "x", "y"];

/// Parse a header-bearing CSV trace. Rows are returned in file order and
/// timestamps must be strictly increasing; violations report the offending
/// 1-based file line.
pub fn parse_trace<R: Read>(source: R, format: TraceFormat) -> Result<ParsedTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let expected: &[&str] = match format {
        TraceFormat::Geodetic => &GEODETIC_HEADER,
        TraceFormat::Enu => &ENU_HEADER,
    };
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedTrace { line: 1, msg: e.to_string() })?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::MalformedTrace { line: 1, msg: "missing header".into() });
    }
    if headers.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::MalformedTrace {
            line: 1,
            msg: format!("expected header `{}`, got `{}`", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut line = 1u64;
    let mut last_t: Option<f64> = None;
    match format {
        TraceFormat::Geodetic => {
            let mut fixes = Vec::new();
            for record in reader.deserialize::<GeodeticFix>() {
                line += 1;
                let fix = record.map_err(|e| malformed_row(line, e))?;
                fix.validate()
                    .map_err(|e| Error::MalformedTrace { line, msg: e.to_string() })?;
                check_monotone(&mut last_t, fix.t, line)?;
                fixes.push(fix);
            }
            if fixes.is_empty() {
                return Err(Error::EmptyTrace);
            }
            Ok(ParsedTrace::Geodetic(fixes))
        }
        TraceFormat::Enu => {
            let mut samples = Vec::new();
            for record in reader.deserialize::<EnuSample>() {
                line += 1;
                let s = record.map_err(|e| malformed_row(line, e))?;
                if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite()) {
                    return Err(Error::MalformedTrace { line, msg: "non-finite field".into() });
                }
                check_monotone(&mut last_t, s.t, line)?;
                samples.push(s);
            }
            if samples.is_empty() {
                return Err(Error::EmptyTrace);
            }
            let rate = nominal_rate(&samples);
            let reference = GeodeticFix { t: samples[0].t, lat: 0.0, lon: 0.0, alt: 0.0 };
            Ok(ParsedTrace::Enu(EnuTrajectory::new(reference, samples, rate)?))
        }
    }
}

fn malformed_row(line: u64, e: csv::Error) -> Error {
    // csv reports its own position for parse failures; prefer ours so the
    // message always names a line.
    Error::MalformedTrace { line, msg: e.to_string() }
}

fn check_monotone(last_t: &mut Option<f64>, t: f64, line: u64) -> Result<()> {
    if let Some(prev) = *last_t {
        if t <= prev {
            return Err(Error::NonMonotoneTimestamp { line });
        }
    }
    *last_t = Some(t);
    Ok(())
}

fn nominal_rate(samples: &[EnuSample]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let span = samples.last().unwrap().t - samples[0].t;
    (samples.len() - 1) as f64 / span
}

/// Offset of a fix relative to a reference, in the reference's ENU frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnuVec {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

fn geodetic_to_ecef(fix: &GeodeticFix) -> [f64; 3] {
    let lat = fix.lat.to_radians();
    let lon = fix.lon.to_radians();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();
    // Prime vertical radius of curvature.
    let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
    [
        (n + fix.alt) * cos_lat * cos_lon,
        (n + fix.alt) * cos_lat * sin_lon,
        (n * (1.0 - WGS84_E2) + fix.alt) * sin_lat,
    ]
}

/// Convert a geodetic fix to East/North/Up meters relative to `reference`
/// via the geodetic -> ECEF -> ENU chain.
pub fn geodetic_to_enu(fix: &GeodeticFix, reference: &GeodeticFix) -> EnuVec {
    let p = geodetic_to_ecef(fix);
    let p0 = geodetic_to_ecef(reference);
    let dx = p[0] - p0[0];
    let dy = p[1] - p0[1];
    let dz = p[2] - p0[2];

    let lat = reference.lat.to_radians();
    let lon = reference.lon.to_radians();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();

    EnuVec {
        x: -sin_lon * dx + cos_lon * dy,
        y: -sin_lat * cos_lon * dx - sin_lat * sin_lon * dy + cos_lat * dz,
        z: cos_lat * cos_lon * dx + cos_lat * sin_lon * dy + sin_lat * dz,
    }
}

/// Convert a geodetic trace to an ENU trajectory anchored at its first fix.
/// Elevation is converted but dropped; tracking error is 2D.
pub fn to_enu_trajectory(fixes: &[GeodeticFix]) -> Result<EnuTrajectory> {
    if fixes.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let reference = fixes[0];
    let samples: Vec<EnuSample> = fixes
        .iter()
        .map(|f| {
            let v = geodetic_to_enu(f, &reference);
            EnuSample { t: f.t, x: v.x, y: v.y }
        })
        .collect();
    let rate = nominal_rate(&samples);
    EnuTrajectory::new(reference, samples, rate)
}

/// Resample a trajectory onto the uniform grid `t0 + k/rate_hz` spanning the
/// original time range, interpolating linearly between neighbors. Grid
/// points that coincide with an input sample (within [`TIME_TOL_S`]) take
/// the sample value exactly, so resampling an already-uniform trajectory is
/// an identity.
pub fn resample(traj: &EnuTrajectory, rate_hz: f64) -> Result<EnuTrajectory> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::invalid("rate_hz", "must be positive and finite"));
    }
    let s = &traj.samples;
    if s.len() < 2 {
        return Err(Error::TooFewSamples { got: s.len(), need: 2 });
    }
    let t0 = s[0].t;
    let t_end = s[s.len() - 1].t;
    let steps = ((t_end - t0) * rate_hz + TIME_TOL_S).floor() as usize;

    let mut out = Vec::with_capacity(steps + 1);
    let mut seg = 0usize;
    for k in 0..=steps {
        let t = t0 + k as f64 / rate_hz;
        while seg + 2 < s.len() && s[seg + 1].t <= t {
            seg += 1;
        }
        let (a, b) = (s[seg], s[seg + 1]);
        let sample = if (t - a.t).abs() <= TIME_TOL_S {
            EnuSample { t, x: a.x, y: a.y }
        } else if (t - b.t).abs() <= TIME_TOL_S {
            EnuSample { t, x: b.x, y: b.y }
        } else {
            let w = (t - a.t) / (b.t - a.t);
            EnuSample { t, x: a.x + w * (b.x - a.x), y: a.y + w * (b.y - a.y) }
        };
        out.push(sample);
    }
    EnuTrajectory::new(traj.reference, out, rate_hz)
}

/// Write a trajectory in the ENU CSV format accepted by [`parse_trace`].
pub fn write_enu_csv<W: Write>(writer: W, traj: &EnuTrajectory) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(ENU_HEADER)?;
    for s in &traj.samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fix(t: f64, lat: f64, lon: f64, alt: f64) -> GeodeticFix {
        GeodeticFix { t, lat, lon, alt }
    }

    #[test]
    fn parse_single_geodetic_row() {
        let csv = "t,lat,lon,alt\n0.0,42.0,-83.0,200.0\n";
        match parse_trace(csv.as_bytes(), TraceFormat::Geodetic).unwrap() {
            ParsedTrace::Geodetic(fixes) => {
                assert_eq!(fixes.len(), 1);
                assert_eq!(fixes[0], fix(0.0, 42.0, -83.0, 200.0));
            }
            other => panic!("unexpected parse result: {other:?}"),
        }
    }

    #[test]
    fn parse_empty_data_section() {
        let csv = "t,lat,lon,alt\n";
        match parse_trace(csv.as_bytes(), TraceFormat::Geodetic) {
            Err(Error::EmptyTrace) => {}
            other => panic!("expected empty trace error, got {other:?}"),
        }
    }

    #[test]
    fn parse_missing_header() {
        match parse_trace(&b""[..], TraceFormat::Geodetic) {
            Err(Error::MalformedTrace { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_wrong_header() {
        let csv = "time,lat,lon,alt\n0,42,-83,200\n";
        match parse_trace(csv.as_bytes(), TraceFormat::Geodetic) {
            Err(Error::MalformedTrace { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
    }

    #[test]
    fn parse_reports_malformed_row_line() {
        let csv = "t,x,y\n0.0,1.0,2.0\n0.1,oops,2.0\n";
        match parse_trace(csv.as_bytes(), TraceFormat::Enu) {
            Err(Error::MalformedTrace { line: 3, .. }) => {}
            other => panic!("expected line-3 error, got {other:?}"),
        }
    }

    #[test]
    fn parse_shuffled_timestamps_names_line() {
        // Permutation of a valid 3-row file; monotonicity first breaks on
        // file line 3.
        let csv = "t,lat,lon,alt\n0.2,42.0,-83.0,200.0\n0.0,42.0,-83.0,200.0\n0.1,42.0,-83.0,200.0\n";
        match parse_trace(csv.as_bytes(), TraceFormat::Geodetic) {
            Err(Error::NonMonotoneTimestamp { line: 3 }) => {}
            other => panic!("expected non-monotone at line 3, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_out_of_range_latitude() {
        let csv = "t,lat,lon,alt\n0.0,95.0,-83.0,200.0\n";
        match parse_trace(csv.as_bytes(), TraceFormat::Geodetic) {
            Err(Error::MalformedTrace { line: 2, .. }) => {}
            other => panic!("expected range error at line 2, got {other:?}"),
        }
    }

    #[test]
    fn parse_accepts_crlf() {
        let csv = "t,x,y\r\n0.0,1.0,2.0\r\n0.1,2.0,3.0\r\n";
        match parse_trace(csv.as_bytes(), TraceFormat::Enu).unwrap() {
            ParsedTrace::Enu(traj) => assert_eq!(traj.samples.len(), 2),
            other => panic!("unexpected parse result: {other:?}"),
        }
    }

    #[test]
    fn enu_at_reference_is_zero() {
        let r = fix(0.0, 42.0, -83.0, 200.0);
        let v = geodetic_to_enu(&r, &r);
        assert_eq!((v.x, v.y, v.z), (0.0, 0.0, 0.0));
    }

    #[test]
    fn enu_small_latitude_step() {
        let r = fix(0.0, 42.0, -83.0, 200.0);
        let f = fix(1.0, 42.0 + 1e-5, -83.0, 200.0);
        let v = geodetic_to_enu(&f, &r);
        // Independent oracle: meridian radius of curvature at the reference
        // latitude times the latitude arc.
        let lat = r.lat.to_radians();
        let m = WGS84_A * (1.0 - WGS84_E2) / (1.0 - WGS84_E2 * lat.sin().powi(2)).powf(1.5);
        let expected = (m + r.alt) * 1e-5_f64.to_radians();
        assert!((v.y - expected).abs() / expected < 0.01, "y = {}, oracle = {}", v.y, expected);
        assert!(v.x.abs() < 1e-3);
    }

    #[test]
    fn enu_swap_negates_to_first_order() {
        // ~10 m separation.
        let a = fix(0.0, 42.0, -83.0, 200.0);
        let b = fix(1.0, 42.0 + 6.3e-5, -83.0 + 6.3e-5, 200.0);
        let ab = geodetic_to_enu(&b, &a);
        let ba = geodetic_to_enu(&a, &b);
        assert!((ab.x + ba.x).abs() < 1e-4, "x: {} vs {}", ab.x, ba.x);
        assert!((ab.y + ba.y).abs() < 1e-4, "y: {} vs {}", ab.y, ba.y);
    }

    #[test]
    fn enu_distance_matches_haversine_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let r = fix(0.0, 42.3, -83.7, 180.0);
        for _ in 0..200 {
            // Separations up to ~1 km.
            let dlat = rng.random_range(-0.009..0.009);
            let dlon = rng.random_range(-0.009..0.009);
            let f = fix(1.0, r.lat + dlat, r.lon + dlon, 180.0);
            let v = geodetic_to_enu(&f, &r);
            let enu_dist = (v.x * v.x + v.y * v.y).sqrt();
            if enu_dist < 1.0 {
                continue;
            }
            // Haversine on a sphere of local mean radius.
            let lat = r.lat.to_radians();
            let m = WGS84_A * (1.0 - WGS84_E2) / (1.0 - WGS84_E2 * lat.sin().powi(2)).powf(1.5);
            let n = WGS84_A / (1.0 - WGS84_E2 * lat.sin().powi(2)).sqrt();
            let radius = (m * n).sqrt() + r.alt;
            let (la1, la2) = (r.lat.to_radians(), f.lat.to_radians());
            let dla = la2 - la1;
            let dlo = (f.lon - r.lon).to_radians();
            let h = (dla / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlo / 2.0).sin().powi(2);
            let oracle = 2.0 * radius * h.sqrt().asin();
            let rel = (enu_dist - oracle).abs() / oracle;
            assert!(rel < 0.01, "dist {enu_dist} vs oracle {oracle} (rel {rel})");
        }
    }

    fn uniform_traj(n: usize, rate: f64) -> EnuTrajectory {
        let samples = (0..n)
            .map(|k| {
                let t = k as f64 / rate;
                EnuSample { t, x: 3.0 * t, y: -t }
            })
            .collect();
        EnuTrajectory::new(fix(0.0, 0.0, 0.0, 0.0), samples, rate).unwrap()
    }

    #[test]
    fn resample_is_identity_on_uniform_input() {
        let traj = uniform_traj(50, 10.0);
        let out = resample(&traj, 10.0).unwrap();
        assert_eq!(out.samples, traj.samples);
    }

    #[test]
    fn resample_linear_midpoint() {
        let samples = vec![EnuSample { t: 0.0, x: 0.0, y: 0.0 }, EnuSample { t: 1.0, x: 10.0, y: 0.0 }];
        let traj = EnuTrajectory::new(fix(0.0, 0.0, 0.0, 0.0), samples, 1.0).unwrap();
        let out = resample(&traj, 10.0).unwrap();
        assert_eq!(out.samples.len(), 11);
        let mid = out.samples[5];
        assert!((mid.t - 0.5).abs() <= TIME_TOL_S);
        assert!((mid.x - 5.0).abs() < 1e-12);
    }

    #[test]
    fn resample_jittered_trace_lands_on_grid() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let mut t = 0.0;
        let mut samples = Vec::new();
        for _ in 0..100 {
            samples.push(EnuSample { t, x: t * 2.0, y: (t * 0.7).sin() });
            // 10 Hz +/- 0.3 Hz worth of jitter on each step.
            let rate = 10.0 + rng.random_range(-0.3..0.3);
            t += 1.0 / rate;
        }
        let traj = EnuTrajectory::new(fix(0.0, 0.0, 0.0, 0.0), samples, 10.0).unwrap();
        let out = resample(&traj, 10.0).unwrap();
        for pair in out.samples.windows(2) {
            assert!(((pair[1].t - pair[0].t) - 0.1).abs() <= TIME_TOL_S);
        }
        assert!(out.is_uniform(10.0));
    }

    #[test]
    fn resample_rejects_single_sample() {
        let traj = EnuTrajectory::new(
            fix(0.0, 0.0, 0.0, 0.0),
            vec![EnuSample { t: 0.0, x: 0.0, y: 0.0 }],
            10.0,
        )
        .unwrap();
        assert!(matches!(resample(&traj, 10.0), Err(Error::TooFewSamples { got: 1, need: 2 })));
    }

    #[test]
    fn enu_csv_round_trip() {
        let traj = uniform_traj(20, 10.0);
        let mut buf = Vec::new();
        write_enu_csv(&mut buf, &traj).unwrap();
        match parse_trace(buf.as_slice(), TraceFormat::Enu).unwrap() {
            ParsedTrace::Enu(parsed) => assert_eq!(parsed.samples, traj.samples),
            other => panic!("unexpected parse result: {other:?}"),
        }
    }
}
