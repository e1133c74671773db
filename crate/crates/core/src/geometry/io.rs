//! Point-cloud files (ASCII XYZ read/write, ASCII PLY read) and atomic
//! file replacement.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{GeometryError, Point, PointCloud, Provenance};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GeometryError + '_ {
    move |source| GeometryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Format {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// One `x y z` line per point, shortest round-trip decimal formatting.
pub fn xyz_string(pc: &PointCloud) -> String {
    let mut out = String::with_capacity(pc.len() * 48);
    for p in pc.points() {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out
}

pub fn write_xyz(path: &Path, pc: &PointCloud) -> Result<(), GeometryError> {
    atomic_write(path, xyz_string(pc).as_bytes()).map_err(io_err(path))
}

/// Reads whitespace-separated `x y z` lines; blank lines and `#` comments
/// are skipped, extra columns (normals, colors) are ignored.
pub fn read_xyz(path: &Path) -> Result<PointCloud, GeometryError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        points.push(parse_xyz_fields(line).ok_or_else(|| format_err(path, n + 1, "expected `x y z`"))?);
    }
    ingested(path, points)
}

fn parse_xyz_fields(line: &str) -> Option<Point> {
    let mut it = line.split_whitespace().map(str::parse::<f64>);
    let (x, y, z) = (it.next()?.ok()?, it.next()?.ok()?, it.next()?.ok()?);
    Some(Point::new(x, y, z))
}

fn ingested(path: &Path, points: Vec<Point>) -> Result<PointCloud, GeometryError> {
    PointCloud::new(
        points,
        Provenance::Ingested {
            path: path.to_path_buf(),
        },
    )
}

/// ASCII PLY, vertex element only; `x`, `y`, `z` may sit at any property
/// position.
pub fn read_ply(path: &Path) -> Result<PointCloud, GeometryError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(format_err(path, 1, "missing `ply` magic")),
    }
    let mut vertex_count: Option<usize> = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    let mut elements_before_vertex = false;
    loop {
        let (n, line) = lines
            .next()
            .ok_or_else(|| format_err(path, 0, "missing `end_header`"))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["end_header"] => break,
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(format_err(path, n + 1, format!("unsupported PLY format `{fmt}`")));
                }
            }
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(count.parse().map_err(|_| format_err(path, n + 1, "bad vertex count"))?);
                } else if vertex_count.is_none() {
                    elements_before_vertex = true;
                }
            }
            ["property", .., name] if in_vertex => props.push(name.to_string()),
            _ => {}
        }
    }
    if elements_before_vertex {
        return Err(format_err(path, 0, "vertex element must come first"));
    }
    let count = vertex_count.ok_or_else(|| format_err(path, 0, "no vertex element"))?;
    let col = |axis: &str| {
        props
            .iter()
            .position(|p| p == axis)
            .ok_or_else(|| format_err(path, 0, format!("missing property `{axis}`")))
    };
    let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);
    let mut points = Vec::with_capacity(count);
    for (n, line) in lines.take(count) {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| format_err(path, n + 1, "non-numeric vertex field"))?;
        if vals.len() < props.len() {
            return Err(format_err(path, n + 1, "short vertex line"));
        }
        points.push(Point::new(vals[cx], vals[cy], vals[cz]));
    }
    if points.len() != count {
        return Err(format_err(path, 0, "fewer vertices than declared"));
    }
    ingested(path, points)
}

/// Dispatches on extension: `.ply` is PLY, anything else XYZ.
pub fn read_cloud(path: &Path) -> Result<PointCloud, GeometryError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("ply") => read_ply(path),
        _ => read_xyz(path),
    }
}

/// Sorted `.xyz`/`.ply` files in a directory.
pub fn cloud_files(dir: &Path) -> Result<Vec<PathBuf>, GeometryError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("xyz" | "ply")
            )
        })
        .collect();
    files.sort();
    Ok(files)
}
