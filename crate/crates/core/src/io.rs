//! Text serialization helpers shared by the CSV and report writers.

use std::io::{Read, Write};

use thiserror::Error;

use crate::collapse::SpotRecord;
use crate::phases::Phase;

/// Locale-free float formatting with 17 significant digits, enough for a
/// bit-exact round trip through `str::parse::<f64>`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // Normalizes -0.0 as well.
        return "0".to_string();
    }
    format!("{v:.16e}")
}

/// Column order of `spots.csv`.
pub const SPOT_COLUMNS: [&str; 9] = [
    "trial_id",
    "cluster_index",
    "x",
    "z",
    "alpha1",
    "alpha2",
    "K",
    "registered",
    "scan_length",
];

#[derive(Debug, Error)]
pub enum SpotsError {
    #[error("spots csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("spots csv header must be {expected}, got {found}")]
    Header { expected: String, found: String },
    #[error("spots csv line {line}: bad {column} value {value:?}")]
    Field { line: u64, column: &'static str, value: String },
}

/// Writes spot records as CSV with a header row.
pub fn write_spots<W: Write>(out: W, spots: &[SpotRecord<f64>]) -> Result<(), SpotsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SPOT_COLUMNS)?;
    for s in spots {
        w.write_record([
            s.trial_id.to_string(),
            s.cluster_index.to_string(),
            fmt_f64(s.x),
            fmt_f64(s.z),
            fmt_f64(s.alpha1.value()),
            fmt_f64(s.alpha2.value()),
            fmt_f64(s.coverage),
            u8::from(s.registered).to_string(),
            s.scan_length.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads spot records written by [`write_spots`].
pub fn read_spots<R: Read>(input: R) -> Result<Vec<SpotRecord<f64>>, SpotsError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(SPOT_COLUMNS.iter().copied()) {
        return Err(SpotsError::Header {
            expected: SPOT_COLUMNS.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut spots = Vec::new();
    for row in r.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        fn get<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, line: u64) -> Result<T, SpotsError> {
            let v = row.get(i).unwrap_or("");
            v.parse().map_err(|_| SpotsError::Field {
                line,
                column: SPOT_COLUMNS[i],
                value: v.to_string(),
            })
        }
        let registered: u8 = get(&row, 7, line)?;
        if registered > 1 {
            return Err(SpotsError::Field {
                line,
                column: SPOT_COLUMNS[7],
                value: registered.to_string(),
            });
        }
        spots.push(SpotRecord {
            trial_id: get(&row, 0, line)?,
            cluster_index: get(&row, 1, line)?,
            x: get(&row, 2, line)?,
            z: get(&row, 3, line)?,
            alpha1: Phase::new(get(&row, 4, line)?),
            alpha2: Phase::new(get(&row, 5, line)?),
            coverage: get(&row, 6, line)?,
            registered: registered == 1,
            scan_length: get(&row, 8, line)?,
        });
    }
    Ok(spots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spots_round_trip() {
        let spots = vec![
            SpotRecord {
                trial_id: 7,
                cluster_index: 3,
                x: -1.25e-6,
                z: 3.0e-9,
                alpha1: Phase::new(0.001),
                alpha2: Phase::new(6.0),
                coverage: 1.5e-5,
                registered: true,
                scan_length: 12,
            },
            SpotRecord {
                trial_id: 9,
                cluster_index: 0,
                x: 0.0,
                z: 0.1,
                alpha1: Phase::new(1.0 / 3.0),
                alpha2: Phase::new(0.3333),
                coverage: 0.2,
                registered: false,
                scan_length: 1,
            },
        ];
        let mut buf = Vec::new();
        write_spots(&mut buf, &spots).unwrap();
        assert!(buf.starts_with(b"trial_id,cluster_index,x,z,alpha1,alpha2,K,registered,scan_length\n"));
        assert_eq!(read_spots(buf.as_slice()).unwrap(), spots);
        assert!(matches!(read_spots(&b"a,b\n1,2\n"[..]), Err(SpotsError::Header { .. })));
    }

    proptest! {
        #[test]
        fn round_trips_bit_exactly(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let back: f64 = fmt_f64(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), if v == 0.0 { 0.0f64.to_bits() } else { v.to_bits() });
        }
    }
}
