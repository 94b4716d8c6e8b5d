//! Command-line spellings of maps, complexes, regions and points.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use degree_forge::degree::Region;
use degree_forge::geometry::meshes;
use degree_forge::geometry::{pt, Point2, SimplicialComplex};
use degree_forge::maps::{MapSpec, SampledMap};
use degree_forge::pl_approx::PLMap;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{io_err, CliError, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Pretty JSON with a trailing newline; the byte layout depends only on the value.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(degree_forge::Error::from)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, to_json(value)?).map_err(io_err(path))
}

fn numbers(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("{what}: bad number {t:?}")))
        })
        .collect()
}

/// `x,y`.
pub fn parse_point(s: &str) -> Result<Point2> {
    match numbers(s, "point")?.as_slice() {
        [x, y] => Ok(pt(*x, *y)),
        _ => Err(CliError::Input(format!("point needs two coordinates, got {s:?}"))),
    }
}

/// Resolves a map spec; `plmap:<path>` and `*.json` load a PL map file.
pub fn load_map(spec: &str) -> Result<Arc<dyn SampledMap>> {
    let spec: MapSpec = spec.parse()?;
    match spec.builtin() {
        Some(f) => Ok(f),
        None => match &spec {
            MapSpec::PlMap { path } => Ok(Arc::new(read_json::<PLMap>(Path::new(path))?)),
            _ => unreachable!("only PL maps need file access"),
        },
    }
}

/// Built-in meshes:
/// `square` (unit square, two triangles),
/// `grid:x0,y0,x1,y1,n`,
/// `annulus:r_in,r_out,rings,sectors`,
/// `annulus-graded:r_in,r_out,rings`,
/// `disk:cx,cy,r,rings,sectors`;
/// anything else is read as a complex JSON file.
pub fn load_complex(spec: &str) -> Result<SimplicialComplex> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let count = |x: f64| -> Result<usize> {
        if x >= 1.0 && x.fract() == 0.0 {
            Ok(x as usize)
        } else {
            Err(CliError::Input(format!("{head}: expected a positive integer, got {x}")))
        }
    };
    let c = match (head, numbers(rest, head).ok().as_deref()) {
        ("square", _) if rest.is_empty() => meshes::unit_square(),
        ("grid", Some(&[x0, y0, x1, y1, n])) => meshes::square_grid(pt(x0, y0), pt(x1, y1), count(n)?)?,
        ("annulus", Some(&[a, b, rings, sectors])) => meshes::annulus(a, b, count(rings)?, count(sectors)?)?,
        ("annulus-graded", Some(&[a, b, rings])) => meshes::annulus_graded(a, b, count(rings)?)?,
        ("disk", Some(&[x, y, r, rings, sectors])) => meshes::disk(pt(x, y), r, count(rings)?, count(sectors)?)?,
        ("square" | "grid" | "annulus" | "annulus-graded" | "disk", _) => {
            return Err(CliError::Input(format!("malformed complex spec {spec:?}")));
        }
        _ => read_json(Path::new(spec))?,
    };
    Ok(c)
}

/// `disk:cx,cy,r[,segments]`, inline JSON, or a JSON file.
pub fn load_region(spec: &str) -> Result<Region> {
    if let Some(rest) = spec.strip_prefix("disk:") {
        let v = numbers(rest, "disk")?;
        let segments = match v.get(3) {
            None => 1024,
            Some(&n) if n >= 3.0 && n.fract() == 0.0 => n as usize,
            Some(n) => return Err(CliError::Input(format!("disk: bad segment count {n}"))),
        };
        return match v[..v.len().min(3)] {
            [x, y, r] => Ok(Region::disk(pt(x, y), r, segments)?),
            _ => Err(CliError::Input("disk needs cx,cy,r".into())),
        };
    }
    let trimmed = spec.trim_start();
    if trimmed.starts_with('{') {
        return serde_json::from_str(trimmed).map_err(|e| CliError::Input(format!("region JSON: {e}")));
    }
    read_json(Path::new(spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_points_and_regions() {
        assert_eq!(parse_point("0.25, -1").unwrap(), pt(0.25, -1.0));
        assert!(parse_point("1").is_err());
        let r = load_region("disk:0,0,1,64").unwrap();
        assert_eq!(r.boundary().len(), 64);
        let r = load_region(r#"{"center": [0, 0], "radius": 2, "segments": 16}"#).unwrap();
        assert_eq!(r.boundary().len(), 16);
        assert!(load_region("disk:0,0").is_err());
    }

    #[test]
    fn builtin_complexes() {
        assert_eq!(load_complex("square").unwrap().num_triangles(), 2);
        assert_eq!(load_complex("grid:0,0,1,1,3").unwrap().num_triangles(), 18);
        assert_eq!(load_complex("annulus:0.2,1,2,12").unwrap().num_triangles(), 48);
        assert!(load_complex("annulus:0.2,1,2").is_err());
        assert!(load_complex("annulus:0.2,1,2.5,12").is_err());
        assert!(matches!(load_complex("missing.json"), Err(CliError::Io { .. })));
    }

    #[test]
    fn builtin_maps() {
        let f = load_map("square").unwrap();
        assert_eq!(f.eval(pt(0.0, 1.0)), pt(-1.0, 0.0));
        assert!(load_map("bogus").is_err());
    }
}
