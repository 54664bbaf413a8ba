//! Scan, trajectory and plot-data files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Pose};
use crate::mapping::PlaneMap;
use crate::planning::Tree;

/// Little-endian `f32` x, y, z triplets.
pub fn encode_scan_bin(points: &[Point3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * 12);
    for p in points {
        for v in p.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_scan_bin(bytes: &[u8]) -> Result<Vec<Point3>> {
    if !bytes.len().is_multiple_of(12) {
        return Err(Error::Parse(format!("binary scan length {} is not a multiple of 12", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(12)
        .map(|c| {
            let f = |i: usize| f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]) as f64;
            Point3::new(f(0), f(4), f(8))
        })
        .collect())
}

/// One `x,y,z` per line; blank lines and `#` comments are skipped.
pub fn parse_scan_csv(text: &str) -> Result<Vec<Point3>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("csv line {}: {e}", i + 1)))?;
        if vals.len() != 3 {
            return Err(Error::Parse(format!("csv line {}: expected 3 values, got {}", i + 1, vals.len())));
        }
        out.push(Point3::new(vals[0], vals[1], vals[2]));
    }
    Ok(out)
}

pub fn format_scan_csv(points: &[Point3]) -> String {
    let mut s = String::with_capacity(points.len() * 32);
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.x, p.y, p.z);
    }
    s
}

pub fn read_scan(path: &Path) -> Result<Vec<Point3>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("txt") => parse_scan_csv(&fs::read_to_string(path)?),
        _ => decode_scan_bin(&fs::read(path)?),
    }
}

/// Scan files (`.bin` or `.csv`) in lexicographic order.
pub fn list_scans(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("bin" | "csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Parse(format!("no .bin or .csv scans in {}", dir.display())));
    }
    Ok(files)
}

/// Every `stride`-th scan in `dir`, numbered by position in the full list.
pub fn read_scans_dir(dir: &Path, stride: usize) -> Result<Vec<PointCloud>> {
    list_scans(dir)?
        .iter()
        .enumerate()
        .step_by(stride.max(1))
        .map(|(k, p)| Ok(PointCloud::new(read_scan(p)?, k as u64)))
        .collect()
}

pub fn write_scans_dir(dir: &Path, clouds: &[PointCloud]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    clouds
        .iter()
        .map(|c| {
            let path = dir.join(format!("scan_{:06}.bin", c.frame_id));
            fs::write(&path, encode_scan_bin(&c.points))?;
            Ok(path)
        })
        .collect()
}

/// `timestamp tx ty tz qx qy qz qw` per line.
pub fn format_trajectory(timestamps: &[f64], poses: &[Pose]) -> Result<String> {
    if timestamps.len() != poses.len() {
        return Err(Error::LengthMismatch { left: timestamps.len(), right: poses.len() });
    }
    let mut s = String::new();
    for (ts, p) in timestamps.iter().zip(poses) {
        let t = p.translation;
        let q = p.quaternion_xyzw();
        let _ = writeln!(s, "{ts} {} {} {} {} {} {} {}", t.x, t.y, t.z, q[0], q[1], q[2], q[3]);
    }
    Ok(s)
}

pub fn parse_trajectory(text: &str) -> Result<(Vec<f64>, Vec<Pose>)> {
    let mut ts = Vec::new();
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("trajectory line {}: {e}", i + 1)))?;
        if v.len() != 8 {
            return Err(Error::Parse(format!("trajectory line {}: expected 8 values, got {}", i + 1, v.len())));
        }
        let q = [v[4], v[5], v[6], v[7]];
        let qn = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(qn > 0.0) {
            return Err(Error::Parse(format!("trajectory line {}: zero quaternion", i + 1)));
        }
        ts.push(v[0]);
        poses.push(Pose::from_quaternion_xyzw([v[1], v[2], v[3]], q.map(|c| c / qn)));
    }
    Ok((ts, poses))
}

/// `frame,x,y,z` for plotting; `gt_x,gt_y,gt_z` are appended when given.
pub fn trajectory_csv(est: &[Pose], gt: Option<&[Pose]>) -> String {
    let mut s = String::from(if gt.is_some() { "frame,x,y,z,gt_x,gt_y,gt_z\n" } else { "frame,x,y,z\n" });
    for (k, p) in est.iter().enumerate() {
        let t = p.translation;
        let _ = write!(s, "{k},{},{},{}", t.x, t.y, t.z);
        if let Some(g) = gt.and_then(|g| g.get(k)) {
            let _ = write!(s, ",{},{},{}", g.translation.x, g.translation.y, g.translation.z);
        }
        s.push('\n');
    }
    s
}

/// `plane,corner,x,y,z` for each of the four corners of every map plane.
pub fn map_corners_csv(map: &PlaneMap) -> String {
    let mut s = String::from("plane,corner,x,y,z\n");
    for (i, p) in map.planes.iter().enumerate() {
        for (j, c) in p.corners().iter().enumerate() {
            let _ = writeln!(s, "{i},{j},{},{},{}", c.x, c.y, c.z);
        }
    }
    s
}

pub fn tree_edges_csv(tree: &Tree) -> String {
    let mut s = String::from("x0,y0,z0,x1,y1,z1\n");
    for (c, p) in tree.edges() {
        let (a, b) = (tree.nodes[p], tree.nodes[c]);
        let _ = writeln!(s, "{},{},{},{},{},{}", a.x, a.y, a.z, b.x, b.y, b.z);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::so3;

    #[test]
    fn binary_round_trip_is_f32_exact() {
        let pts = vec![Point3::new(1.0, -2.5, 3.25), Point3::new(0.1, 0.2, 0.3)];
        let bytes = encode_scan_bin(&pts);
        assert_eq!(bytes.len(), 24);
        let back = decode_scan_bin(&bytes).unwrap();
        assert_eq!(back[0], pts[0]);
        assert!((back[1] - pts[1]).norm() < 1e-7);
        assert!(decode_scan_bin(&bytes[..13]).is_err());
    }

    #[test]
    fn csv_parsing() {
        let pts = parse_scan_csv("# header\n1,2,3\n\n 4 , 5 , 6 \n").unwrap();
        assert_eq!(pts, vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]);
        assert!(parse_scan_csv("1,2\n").is_err());
        assert!(parse_scan_csv("1,2,x\n").is_err());
        assert_eq!(parse_scan_csv(&format_scan_csv(&pts)).unwrap(), pts);
    }

    #[test]
    fn scans_dir_is_lexicographic() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.csv"), "2,0,0\n").unwrap();
        fs::write(dir.path().join("a.bin"), encode_scan_bin(&[Point3::new(1.0, 0.0, 0.0)])).unwrap();
        fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        let clouds = read_scans_dir(dir.path(), 1).unwrap();
        assert_eq!(clouds.len(), 2);
        assert_eq!(clouds[0].points[0].x, 1.0);
        assert_eq!(clouds[1].points[0].x, 2.0);
        assert_eq!(clouds[1].frame_id, 1);
        assert_eq!(read_scans_dir(dir.path(), 2).unwrap().len(), 1);
        assert!(read_scans_dir(&dir.path().join("missing"), 1).is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let poses = vec![Pose::identity(), Pose::new(so3::rot_z(0.7), Vec3::new(1.0, 2.0, 3.0)).unwrap()];
        let text = format_trajectory(&[0.0, 0.1], &poses).unwrap();
        assert!(text.lines().next().unwrap() == "0 0 0 0 0 0 0 1");
        let (ts, back) = parse_trajectory(&text).unwrap();
        assert_eq!(ts, vec![0.0, 0.1]);
        assert!((back[1].rotation - poses[1].rotation).amax() < 1e-12);
        assert!(parse_trajectory("0 1 2 3\n").is_err());
        assert!(format_trajectory(&[0.0], &poses).is_err());
    }
}
