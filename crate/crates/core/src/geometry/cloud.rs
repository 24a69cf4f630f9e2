//! Point clouds and their ASCII interchange formats.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// A point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(p: [f64; 3]) -> Self {
        Self::new(p[0], p[1], p[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// Which coordinate system a cloud is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Frame {
    /// Raw scanner coordinates.
    Scanner,
    /// Registered into the BIM coordinate system.
    Bim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    XyzAscii,
    PlyAscii,
}

impl CloudFormat {
    /// Picks a format from the file extension (`.ply` → PLY, anything else → XYZ).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => CloudFormat::PlyAscii,
            _ => CloudFormat::XyzAscii,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub capture_date: Option<NaiveDate>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, frame: Frame) -> Self {
        Self {
            points,
            capture_date: None,
            frame,
        }
    }

    pub fn with_capture_date(mut self, date: NaiveDate) -> Self {
        self.capture_date = Some(date);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reads a cloud from disk. The result is always tagged [`Frame::Scanner`].
pub fn load_point_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud, GeometryError> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let points = match format {
        CloudFormat::XyzAscii => parse_xyz(reader)?,
        CloudFormat::PlyAscii => parse_ply(reader)?,
    };
    if points.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(PointCloud::new(points, Frame::Scanner))
}

fn parse_coord(tok: Option<&str>, line: usize) -> Result<f64, GeometryError> {
    let tok = tok.ok_or_else(|| GeometryError::MalformedLine {
        line,
        reason: "expected three coordinates".into(),
    })?;
    let v: f64 = tok.parse().map_err(|_| GeometryError::MalformedLine {
        line,
        reason: format!("not a number: {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(GeometryError::MalformedLine {
            line,
            reason: "non-finite coordinate".into(),
        });
    }
    Ok(v)
}

fn parse_xyz<R: BufRead>(reader: R) -> Result<Vec<Point3>, GeometryError> {
    let mut points = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let x = parse_coord(toks.next(), idx + 1)?;
        let y = parse_coord(toks.next(), idx + 1)?;
        let z = parse_coord(toks.next(), idx + 1)?;
        points.push(Point3::new(x, y, z));
    }
    Ok(points)
}

fn parse_ply<R: BufRead>(reader: R) -> Result<Vec<Point3>, GeometryError> {
    let mut lines = reader.lines().enumerate();
    let header_err = |line: usize, reason: &str| GeometryError::MalformedLine {
        line,
        reason: reason.to_string(),
    };

    match lines.next() {
        Some((_, Ok(l))) if l.trim() == "ply" => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => return Err(header_err(1, "missing 'ply' magic")),
    }

    let mut vertex_count: Option<usize> = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    let mut header_done = false;
    for (idx, line) in lines.by_ref() {
        let line = line?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(header_err(idx + 1, "only ascii PLY is supported"));
                }
            }
            ["element", "vertex", n] => {
                vertex_count = Some(
                    n.parse()
                        .map_err(|_| header_err(idx + 1, "bad vertex count"))?,
                );
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", "list", ..] if in_vertex => {
                return Err(header_err(idx + 1, "list properties on vertices are not supported"))
            }
            ["property", _ty, name] if in_vertex => props.push(name.to_string()),
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => {}
        }
    }
    if !header_done {
        return Err(header_err(0, "missing end_header"));
    }
    let n = vertex_count.ok_or_else(|| header_err(0, "no vertex element"))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let (ix, iy, iz) = match (col("x"), col("y"), col("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(header_err(0, "vertex element lacks x/y/z properties")),
    };

    let mut points = Vec::with_capacity(n);
    for (idx, line) in lines {
        if points.len() == n {
            break;
        }
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < props.len() {
            return Err(header_err(idx + 1, "too few vertex properties"));
        }
        points.push(Point3::new(
            parse_coord(Some(toks[ix]), idx + 1)?,
            parse_coord(Some(toks[iy]), idx + 1)?,
            parse_coord(Some(toks[iz]), idx + 1)?,
        ));
    }
    if points.len() != n {
        return Err(header_err(0, "fewer vertices than declared in header"));
    }
    Ok(points)
}

/// Writes a cloud so that [`load_point_cloud`] returns bit-identical coordinates.
pub fn save_point_cloud(
    cloud: &PointCloud,
    path: &Path,
    format: CloudFormat,
) -> Result<(), GeometryError> {
    let mut out = String::with_capacity(cloud.len() * 48);
    if format == CloudFormat::PlyAscii {
        let _ = write!(
            out,
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
            cloud.len()
        );
    }
    for p in &cloud.points {
        // `{}` on f64 prints the shortest string that parses back to the same value.
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn three_line_xyz() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.xyz");
        fs::write(&path, "0 0 0\n1 0 0\n0 1 0\n").unwrap();
        let cloud = load_point_cloud(&path, CloudFormat::XyzAscii).unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.points[1], Point3::new(1.0, 0.0, 0.0));
        assert_eq!(cloud.frame, Frame::Scanner);
    }

    #[test]
    fn comments_are_skipped() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.xyz");
        fs::write(&path, "# header\n1\t2 3\n\n# tail\n").unwrap();
        let cloud = load_point_cloud(&path, CloudFormat::XyzAscii).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.xyz");
        fs::write(&path, "").unwrap();
        assert!(matches!(
            load_point_cloud(&path, CloudFormat::XyzAscii),
            Err(GeometryError::EmptyCloud)
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.xyz");
        fs::write(&path, "0 0 0\n1 zero 0\n").unwrap();
        match load_point_cloud(&path, CloudFormat::XyzAscii) {
            Err(GeometryError::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "0 0\n").unwrap();
        assert!(matches!(
            load_point_cloud(&path, CloudFormat::XyzAscii),
            Err(GeometryError::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn ply_skips_extra_properties() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.ply");
        fs::write(
            &path,
            "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\nproperty float intensity\n\
             property float x\nproperty float y\nproperty float z\nproperty uchar red\n\
             element face 0\nproperty list uchar int vertex_indices\nend_header\n\
             0.5 1 2 3 255\n0.7 4 5 6 0\n",
        )
        .unwrap();
        let cloud = load_point_cloud(&path, CloudFormat::PlyAscii).unwrap();
        assert_eq!(
            cloud.points,
            vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]
        );
    }

    #[test]
    fn ply_rejects_binary() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.ply");
        fs::write(&path, "ply\nformat binary_little_endian 1.0\nend_header\n").unwrap();
        assert!(load_point_cloud(&path, CloudFormat::PlyAscii).is_err());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(CloudFormat::from_path(Path::new("a.PLY")), CloudFormat::PlyAscii);
        assert_eq!(CloudFormat::from_path(Path::new("a.xyz")), CloudFormat::XyzAscii);
        assert_eq!(CloudFormat::from_path(Path::new("a.txt")), CloudFormat::XyzAscii);
    }

    #[test]
    fn ply_save_load_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.ply");
        let cloud = PointCloud::new(
            vec![Point3::new(0.1, -2.5e-7, 1.0 / 3.0), Point3::new(1e10, 0.0, -0.0)],
            Frame::Scanner,
        );
        save_point_cloud(&cloud, &path, CloudFormat::PlyAscii).unwrap();
        let back = load_point_cloud(&path, CloudFormat::PlyAscii).unwrap();
        assert_eq!(back.points, cloud.points);
    }
}
