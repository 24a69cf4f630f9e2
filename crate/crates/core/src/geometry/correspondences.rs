//! Paired scanner/BIM coordinates used for registration.

use std::io::{Read, Write};
use std::path::Path;

use super::cloud::Point3;
use super::GeometryError;

pub const CORRESPONDENCE_HEADER: [&str; 6] = ["sx", "sy", "sz", "dx", "dy", "dz"];

/// Reads `(scanner, bim)` pairs.
pub fn read_correspondences<R: Read>(reader: R) -> Result<Vec<(Point3, Point3)>, GeometryError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(CORRESPONDENCE_HEADER) {
        return Err(GeometryError::MalformedLine {
            line: 1,
            reason: format!("unexpected correspondence header {header:?}"),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 6 {
            return Err(GeometryError::MalformedLine {
                line,
                reason: "expected 6 fields".into(),
            });
        }
        let mut v = [0.0f64; 6];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = rec[k].trim().parse().map_err(|_| GeometryError::MalformedLine {
                line,
                reason: format!("bad {}: {:?}", CORRESPONDENCE_HEADER[k], &rec[k]),
            })?;
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        out.push((Point3::new(v[0], v[1], v[2]), Point3::new(v[3], v[4], v[5])));
    }
    Ok(out)
}

pub fn read_correspondences_file(path: &Path) -> Result<Vec<(Point3, Point3)>, GeometryError> {
    read_correspondences(std::fs::File::open(path)?)
}

pub fn write_correspondences<W: Write>(
    writer: W,
    pairs: &[(Point3, Point3)],
) -> Result<(), GeometryError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CORRESPONDENCE_HEADER)?;
    for (s, d) in pairs {
        w.write_record([s.x, s.y, s.z, d.x, d.y, d.z].iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let pairs = vec![
            (Point3::new(0.1, -2.5, 1e-17), Point3::new(9.0, 7.0, 3.0)),
            (Point3::new(1.0 / 3.0, 2.0, 3.0), Point3::new(-0.0, 1.5, 2.25)),
        ];
        let mut buf = Vec::new();
        write_correspondences(&mut buf, &pairs).unwrap();
        assert_eq!(read_correspondences(buf.as_slice()).unwrap(), pairs);
    }

    #[test]
    fn bad_field_reports_line() {
        let text = "sx,sy,sz,dx,dy,dz\n0,0,0,1,1,1\n0,x,0,1,1,1\n";
        match read_correspondences(text.as_bytes()) {
            Err(GeometryError::MalformedLine { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_correspondences("a,b,c,d,e,f\n".as_bytes()).is_err());
    }
}
