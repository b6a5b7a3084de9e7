//! ASCII point-cloud readers and writers, and the key-value run config.

mod config;

pub use config::{Length, RunConfig};

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::SiteEstimate;
use crate::geom::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudFormat {
    /// Whitespace-separated `x y z [nx ny nz]` per line.
    Xyz,
    /// `format ascii 1.0` only.
    Ply,
    /// `v x y z` lines; everything else is ignored.
    Obj,
}

impl CloudFormat {
    pub fn from_extension(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "xyz" | "txt" | "pts" | "asc" => Some(CloudFormat::Xyz),
            "ply" => Some(CloudFormat::Ply),
            "obj" => Some(CloudFormat::Obj),
            _ => None,
        }
    }

    /// Guesses the format of a file without a known extension.
    pub fn sniff(text: &str) -> Option<Self> {
        let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'))?;
        if first == "ply" {
            return Some(CloudFormat::Ply);
        }
        if first.starts_with("v ") || first.starts_with("o ") || first.starts_with("g ") || first.starts_with("mtllib") {
            return Some(CloudFormat::Obj);
        }
        let numeric = first.split_whitespace().filter(|t| t.parse::<f64>().is_ok()).count();
        (numeric >= 3).then_some(CloudFormat::Xyz)
    }
}

impl fmt::Display for CloudFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CloudFormat::Xyz => "xyz",
            CloudFormat::Ply => "ply",
            CloudFormat::Obj => "obj",
        })
    }
}

/// Points with optional per-point normals and quality.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CloudFile {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub quality: Option<Vec<f64>>,
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<CloudFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"ply") {
        let header_end = bytes.windows(10).position(|w| w == b"end_header").unwrap_or(bytes.len());
        let header = String::from_utf8_lossy(&bytes[..header_end]);
        if header.lines().any(|l| l.trim().starts_with("format binary")) {
            return Err(Error::BinaryPly(path.to_path_buf()));
        }
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::UnknownFormat(path.to_path_buf()))?;
    let format = CloudFormat::from_extension(path)
        .or_else(|| CloudFormat::sniff(&text))
        .ok_or_else(|| Error::UnknownFormat(path.to_path_buf()))?;
    parse_cloud(&text, format, path)
}

/// Parses `text`; `path` only labels errors.
pub fn parse_cloud(text: &str, format: CloudFormat, path: &Path) -> Result<CloudFile> {
    match format {
        CloudFormat::Xyz => parse_xyz(text, path),
        CloudFormat::Ply => parse_ply(text, path),
        CloudFormat::Obj => parse_obj(text, path),
    }
}

fn numbers(tokens: &[&str], path: &Path, line: usize) -> Result<Vec<f64>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("expected a finite number, found `{t}`")))
        })
        .collect()
}

fn parse_xyz(text: &str, path: &Path) -> Result<CloudFile> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut all_have_normals = true;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
        if tokens.len() < 3 {
            return Err(Error::parse(path, i + 1, format!("expected at least 3 coordinates, found {}", tokens.len())));
        }
        let v = numbers(&tokens, path, i + 1)?;
        points.push(Vec3::new(v[0], v[1], v[2]));
        if v.len() >= 6 {
            normals.push(Vec3::new(v[3], v[4], v[5]));
        } else {
            all_have_normals = false;
        }
    }
    Ok(CloudFile {
        normals: (all_have_normals && !points.is_empty()).then_some(normals),
        points,
        quality: None,
    })
}

fn parse_obj(text: &str, path: &Path) -> Result<CloudFile> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("v") {
            continue;
        }
        let rest: Vec<&str> = tokens.collect();
        if rest.len() < 3 {
            return Err(Error::parse(path, i + 1, "vertex needs 3 coordinates"));
        }
        let v = numbers(&rest[..3], path, i + 1)?;
        points.push(Vec3::new(v[0], v[1], v[2]));
    }
    Ok(CloudFile {
        points,
        ..CloudFile::default()
    })
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<String>,
    has_list: bool,
}

const PLY_SCALARS: [&str; 16] = [
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16", "uint16", "int32",
    "uint32", "float32", "float64",
];

fn parse_ply(text: &str, path: &Path) -> Result<CloudFile> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, m: String| Error::parse(path, line, m);
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(err(1, "missing `ply` magic".into())),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_format = false;
    let mut header_done = false;
    for (i, raw) in lines.by_ref() {
        let n = i + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", "1.0"] => saw_format = true,
            ["format", kind, ..] if kind.starts_with("binary") => return Err(Error::BinaryPly(path.to_path_buf())),
            ["format", ..] => return Err(err(n, format!("unsupported format line `{}`", raw.trim()))),
            ["element", name, count] => {
                let count = count.parse().map_err(|_| err(n, format!("bad element count `{count}`")))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    has_list: false,
                });
            }
            ["property", "list", _, _, name] => {
                let e = elements.last_mut().ok_or_else(|| err(n, "property before any element".into()))?;
                e.properties.push(name.to_string());
                e.has_list = true;
            }
            ["property", ty, name] => {
                if !PLY_SCALARS.contains(ty) {
                    return Err(err(n, format!("unknown property type `{ty}`")));
                }
                let e = elements.last_mut().ok_or_else(|| err(n, "property before any element".into()))?;
                e.properties.push(name.to_string());
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(err(n, format!("malformed header line `{}`", raw.trim()))),
        }
    }
    if !header_done {
        return Err(err(text.lines().count(), "header has no `end_header`".into()));
    }
    if !saw_format {
        return Err(err(2, "header has no `format ascii 1.0` line".into()));
    }
    let mut out = CloudFile::default();
    for e in &elements {
        if e.name != "vertex" {
            for _ in 0..e.count {
                if lines.next().is_none() {
                    return Err(err(text.lines().count(), format!("file ends inside element `{}`", e.name)));
                }
            }
            continue;
        }
        if e.has_list {
            return Err(err(0, "list properties on vertices are not supported".into()));
        }
        let col = |name: &str| e.properties.iter().position(|p| p == name);
        let (x, y, z) = match (col("x"), col("y"), col("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(err(0, "vertex element lacks x, y, z properties".into())),
        };
        let normal_cols = match (col("nx"), col("ny"), col("nz")) {
            (Some(a), Some(b), Some(c)) => Some([a, b, c]),
            _ => None,
        };
        let quality_col = col("quality");
        let mut normals = Vec::new();
        let mut quality = Vec::new();
        for _ in 0..e.count {
            let (i, raw) = lines
                .next()
                .ok_or_else(|| err(text.lines().count(), "file ends inside the vertex element".into()))?;
            let tokens: Vec<&str> = raw.split_whitespace().collect();
            if tokens.len() != e.properties.len() {
                return Err(err(
                    i + 1,
                    format!("expected {} values, found {}", e.properties.len(), tokens.len()),
                ));
            }
            let v = numbers(&tokens, path, i + 1)?;
            out.points.push(Vec3::new(v[x], v[y], v[z]));
            if let Some([a, b, c]) = normal_cols {
                normals.push(Vec3::new(v[a], v[b], v[c]));
            }
            if let Some(q) = quality_col {
                quality.push(v[q]);
            }
        }
        out.normals = normal_cols.map(|_| normals);
        out.quality = quality_col.map(|_| quality);
        return Ok(out);
    }
    Err(err(0, "no vertex element".into()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `cloud` in `format`. Coordinates use the shortest representation
/// that parses back to the same `f64`.
pub fn write_cloud_to<W: Write>(out: &mut W, cloud: &CloudFile, format: CloudFormat) -> std::io::Result<()> {
    let n = cloud.points.len();
    let normals = cloud.normals.as_ref().filter(|v| v.len() == n);
    let quality = cloud.quality.as_ref().filter(|v| v.len() == n);
    match format {
        CloudFormat::Xyz => {
            for (i, p) in cloud.points.iter().enumerate() {
                write!(out, "{} {} {}", p.x, p.y, p.z)?;
                if let Some(nv) = normals {
                    write!(out, " {} {} {}", nv[i].x, nv[i].y, nv[i].z)?;
                }
                writeln!(out)?;
            }
        }
        CloudFormat::Obj => {
            for p in &cloud.points {
                writeln!(out, "v {} {} {}", p.x, p.y, p.z)?;
            }
        }
        CloudFormat::Ply => {
            writeln!(out, "ply\nformat ascii 1.0\nelement vertex {n}")?;
            writeln!(out, "property double x\nproperty double y\nproperty double z")?;
            if normals.is_some() {
                writeln!(out, "property double nx\nproperty double ny\nproperty double nz")?;
            }
            if quality.is_some() {
                writeln!(out, "property double quality")?;
            }
            writeln!(out, "end_header")?;
            for (i, p) in cloud.points.iter().enumerate() {
                write!(out, "{} {} {}", p.x, p.y, p.z)?;
                if let Some(nv) = normals {
                    write!(out, " {} {} {}", nv[i].x, nv[i].y, nv[i].z)?;
                }
                if let Some(q) = quality {
                    write!(out, " {}", q[i])?;
                }
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

/// Writes to `path`, picking the format from its extension (PLY otherwise).
pub fn write_cloud(path: impl AsRef<Path>, cloud: &CloudFile) -> Result<()> {
    let path = path.as_ref();
    let format = CloudFormat::from_extension(path).unwrap_or(CloudFormat::Ply);
    let mut out = create(path)?;
    write_cloud_to(&mut out, cloud, format)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Scalar stored in the `quality` column of an estimate file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QualityMode {
    #[default]
    Curvature,
    Feature,
}

impl FromStr for QualityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curvature" => Ok(QualityMode::Curvature),
            "feature" => Ok(QualityMode::Feature),
            _ => Err(Error::InvalidParameter(format!(
                "unknown quality `{s}` (expected curvature or feature)"
            ))),
        }
    }
}

/// `x y z nx ny nz quality` per estimate; invalid ones get quality -1.
pub fn estimates_to_cloud(estimates: &[SiteEstimate], mode: QualityMode) -> CloudFile {
    CloudFile {
        points: estimates.iter().map(|e| e.point).collect(),
        normals: Some(estimates.iter().map(|e| e.normal).collect()),
        quality: Some(
            estimates
                .iter()
                .map(|e| match (e.valid, mode) {
                    (false, _) => -1.0,
                    (true, QualityMode::Curvature) => e.mean_abs_curvature,
                    (true, QualityMode::Feature) => e.feature_score,
                })
                .collect(),
        ),
    }
}

pub fn write_estimates_to<W: Write>(out: &mut W, estimates: &[SiteEstimate], mode: QualityMode) -> std::io::Result<()> {
    write_cloud_to(out, &estimates_to_cloud(estimates, mode), CloudFormat::Ply)
}

/// Always PLY, whatever the extension.
pub fn write_estimates(path: impl AsRef<Path>, estimates: &[SiteEstimate], mode: QualityMode) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    write_estimates_to(&mut out, estimates, mode)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub const ESTIMATE_CSV_HEADER: &str =
    "x,y,z,nx,ny,nz,min_x,min_y,min_z,max_x,max_y,max_z,l0,l1,l2,mean_abs_curvature,feature_score,is_feature,valid";

/// Every field of every estimate, one CSV row each.
pub fn write_estimates_csv_to<W: Write>(out: &mut W, estimates: &[SiteEstimate]) -> std::io::Result<()> {
    writeln!(out, "{ESTIMATE_CSV_HEADER}")?;
    for e in estimates {
        let mut row: Vec<String> = Vec::with_capacity(19);
        for v in [e.point, e.normal, e.dir_min, e.dir_max] {
            row.extend([v.x, v.y, v.z].iter().map(f64::to_string));
        }
        row.extend(e.eigenvalues.iter().map(f64::to_string));
        row.push(e.mean_abs_curvature.to_string());
        row.push(e.feature_score.to_string());
        row.push((e.is_feature as u8).to_string());
        row.push((e.valid as u8).to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Opens `path` for buffered writing, mapping failures to [`Error::Io`].
pub fn create_file(path: impl Into<PathBuf>) -> Result<BufWriter<fs::File>> {
    create(&path.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::SymTensor3;

    fn parse(text: &str, format: CloudFormat) -> Result<CloudFile> {
        parse_cloud(text, format, Path::new("mem"))
    }

    const PLY3: &str = "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

    #[test]
    fn xyz_two_points() {
        let c = parse("0 0 0\n1 0 0\n", CloudFormat::Xyz).unwrap();
        assert_eq!(c.points, vec![Vec3::ZERO, Vec3::X]);
        assert!(c.normals.is_none());
        let with_n = parse("0 0 0 0 0 1\n# comment\n\n1 0 0 0 0 1\n", CloudFormat::Xyz).unwrap();
        assert_eq!(with_n.normals.unwrap(), vec![Vec3::Z; 2]);
    }

    #[test]
    fn ply_three_vertices() {
        let c = parse(PLY3, CloudFormat::Ply).unwrap();
        assert_eq!(c.points.len(), 3);
        assert_eq!(c.points[2], Vec3::Y);
    }

    #[test]
    fn non_numeric_reports_line() {
        match parse("a b c\n", CloudFormat::Xyz) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse("0 0 0\n\n1 x 0\n", CloudFormat::Xyz) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad_ply = PLY3.replace("\n1 0 0\n", "\n1 nan? 0\n");
        match parse(&bad_ply, CloudFormat::Ply) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_ply_headers() {
        assert!(matches!(
            parse(&PLY3.replace("ascii", "binary_little_endian"), CloudFormat::Ply),
            Err(Error::BinaryPly(_))
        ));
        assert!(parse(&PLY3.replace("end_header", "end_headr"), CloudFormat::Ply).is_err());
        assert!(parse(&PLY3.replace("property float z\n", ""), CloudFormat::Ply).is_err());
        assert!(parse(&PLY3.replace("element vertex 3", "element vertex 4"), CloudFormat::Ply).is_err());
        assert!(parse(&PLY3.replace("float y", "quad y"), CloudFormat::Ply).is_err());
    }

    #[test]
    fn obj_vertices_only() {
        let c = parse("# cube\nv 1 2 3\nvn 0 0 1\nv 4 5 6\nf 1 2 2\n", CloudFormat::Obj).unwrap();
        assert_eq!(c.points, vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn sniffing() {
        assert_eq!(CloudFormat::sniff(PLY3), Some(CloudFormat::Ply));
        assert_eq!(CloudFormat::sniff("v 0 0 0"), Some(CloudFormat::Obj));
        assert_eq!(CloudFormat::sniff("# x\n0.5 1 2"), Some(CloudFormat::Xyz));
        assert_eq!(CloudFormat::sniff("hello"), None);
        assert_eq!(CloudFormat::from_extension(Path::new("a/b.PLY")), Some(CloudFormat::Ply));
    }

    #[test]
    fn files_round_trip_and_binary_rejected() {
        let dir = std::env::temp_dir().join(format!("dvcm-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let cloud = CloudFile {
            points: vec![Vec3::new(0.1, -2.5e-7, 3.0), Vec3::new(1.0 / 3.0, 2.0 / 7.0, -1e10)],
            normals: Some(vec![Vec3::Z, Vec3::new(0.6, 0.8, 0.0)]),
            quality: None,
        };
        for name in ["c.xyz", "c.ply", "c.obj"] {
            let p = dir.join(name);
            write_cloud(&p, &cloud).unwrap();
            let back = read_cloud(&p).unwrap();
            assert_eq!(back.points, cloud.points);
            if name != "c.obj" {
                assert_eq!(back.normals, cloud.normals);
            }
        }
        let bin = dir.join("b.ply");
        fs::write(&bin, b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nend_header\n\x00\xff").unwrap();
        assert!(matches!(read_cloud(&bin), Err(Error::BinaryPly(_))));
        let unknown = dir.join("u.dat");
        fs::write(&unknown, "hello\n").unwrap();
        assert!(matches!(read_cloud(&unknown), Err(Error::UnknownFormat(_))));
        assert!(matches!(read_cloud(dir.join("missing.xyz")), Err(Error::Io { .. })));
        fs::remove_dir_all(&dir).unwrap();
    }

    fn sample_estimates() -> Vec<SiteEstimate> {
        let m = SymTensor3::new(3.0, 0.5, 0.0, 2.0, 0.1, 1.0);
        let mut v = vec![
            SiteEstimate::from_tensor(Vec3::new(1.0, 2.0, 3.0), &m, 0.5),
            SiteEstimate::from_tensor(Vec3::ZERO, &SymTensor3::ZERO, 0.5),
        ];
        v.push(SiteEstimate::from_tensor(Vec3::X, &SymTensor3::diag(1.0, 1.0, 1.0), 0.5));
        v
    }

    #[test]
    fn estimates_file() {
        let est = sample_estimates();
        let mut buf = Vec::new();
        write_estimates_to(&mut buf, &est[..1], QualityMode::Curvature).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("element vertex 1\n"));
        let back = parse(&text, CloudFormat::Ply).unwrap();
        let n = back.normals.unwrap()[0];
        assert!((n - est[0].normal).norm() < 1e-6);
        assert!((back.quality.unwrap()[0] - est[0].mean_abs_curvature).abs() < 1e-9);

        let mut buf = Vec::new();
        write_estimates_to(&mut buf, &est, QualityMode::Feature).unwrap();
        let back = parse(&String::from_utf8(buf).unwrap(), CloudFormat::Ply).unwrap();
        let q = back.quality.unwrap();
        assert_eq!(q[1], -1.0);
        assert!((0.0..=1.0).contains(&q[0]) && (0.0..=1.0).contains(&q[2]));
    }

    #[test]
    fn estimates_csv() {
        let est = sample_estimates();
        let mut buf = Vec::new();
        write_estimates_csv_to(&mut buf, &est).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let cols = ESTIMATE_CSV_HEADER.split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
        assert!(lines[2].ends_with(",0,0"));
        let first: Vec<f64> = lines[1].split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!(first[12], est[0].eigenvalues[0]);
    }
}
