use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, MapIoError};

const EPS: f64 = 1e-9;

/// A named convex polygon in world coordinates.
///
/// Vertices are stored as given; `orientation` records whether they run
/// counter-clockwise (+1) or clockwise (-1).
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: String,
    pub vertices: Vec<(f64, f64)>,
    orientation: f64,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

impl Region {
    /// Validates the polygon: at least three vertices, no repeated
    /// consecutive vertex, turns of one sign (collinear allowed) and a
    /// single winding.
    pub fn new(id: impl Into<String>, vertices: Vec<(f64, f64)>) -> Result<Self, MapIoError> {
        let id = id.into();
        let bad = |why: &str| MapIoError::Validation(format!("region {id:?}: {why}"));
        let n = vertices.len();
        if n < 3 {
            return Err(bad("needs at least 3 vertices"));
        }
        if vertices.iter().any(|v| !v.0.is_finite() || !v.1.is_finite()) {
            return Err(bad("non-finite vertex"));
        }
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if (a.0 - b.0).abs() < EPS && (a.1 - b.1).abs() < EPS {
                return Err(bad("repeated vertex"));
            }
        }
        let mut sign = 0.0;
        let mut turning = 0.0;
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            let z = cross(a, b, c);
            if z.abs() > EPS {
                if sign != 0.0 && z.signum() != sign {
                    return Err(bad("polygon is not convex"));
                }
                sign = z.signum();
            }
            let h1 = (b.1 - a.1).atan2(b.0 - a.0);
            let h2 = (c.1 - b.1).atan2(c.0 - b.0);
            turning += crate::grid::wrap_angle(h2 - h1);
        }
        if sign == 0.0 {
            return Err(bad("polygon is degenerate"));
        }
        if (turning.abs() - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(bad("polygon is not convex (winds more than once)"));
        }
        Ok(Self {
            id,
            vertices,
            orientation: sign,
        })
    }

    /// Point-in-polygon with the boundary counted as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            self.orientation * cross(a, b, (x, y)) >= -EPS
        })
    }

    /// Axis-aligned bounds `(x_min, y_min, x_max, y_max)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), &(x, y)| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        )
    }

    /// Polygon grown outward by `margin` with mitered corners.
    pub fn offset(&self, margin: f64) -> Region {
        // Drop collinear vertices so every corner has a well-defined miter.
        let n = self.vertices.len();
        let corners: Vec<(f64, f64)> = (0..n)
            .filter(|&i| {
                let prev = self.vertices[(i + n - 1) % n];
                let next = self.vertices[(i + 1) % n];
                cross(prev, self.vertices[i], next).abs() > EPS
            })
            .map(|i| self.vertices[i])
            .collect();
        let m = corners.len();
        let s = self.orientation;
        // Outward unit normal of edge a -> b.
        let normal = |a: (f64, f64), b: (f64, f64)| {
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len = dx.hypot(dy);
            (s * dy / len, -s * dx / len)
        };
        let vertices = (0..m)
            .map(|i| {
                let prev = corners[(i + m - 1) % m];
                let cur = corners[i];
                let next = corners[(i + 1) % m];
                let n1 = normal(prev, cur);
                let n2 = normal(cur, next);
                // Miter direction is n1 + n2 scaled so that its projection on
                // each normal equals the margin.
                let bis = (n1.0 + n2.0, n1.1 + n2.1);
                let k = margin / (1.0 + n1.0 * n2.0 + n1.1 * n2.1);
                (cur.0 + bis.0 * k, cur.1 + bis.1 * k)
            })
            .collect();
        Region {
            id: self.id.clone(),
            vertices,
            orientation: s,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionFile {
    regions: Vec<RegionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionEntry {
    id: String,
    vertices: Vec<[f64; 2]>,
}

pub fn parse_regions(text: &str) -> Result<Vec<Region>, MapIoError> {
    let file: RegionFile =
        serde_yaml::from_str(text).map_err(|e| MapIoError::Config(format!("regions: {e}")))?;
    let mut seen = HashSet::new();
    file.regions
        .into_iter()
        .map(|entry| {
            if !seen.insert(entry.id.clone()) {
                return Err(MapIoError::Validation(format!("duplicate region id {:?}", entry.id)));
            }
            Region::new(entry.id, entry.vertices.into_iter().map(|[x, y]| (x, y)).collect())
        })
        .collect()
}

pub fn load_regions(path: &Path) -> Result<Vec<Region>, MapIoError> {
    parse_regions(&read_text(path)?)
}

pub fn write_regions(regions: &[Region], path: &Path) -> Result<(), MapIoError> {
    let file = RegionFile {
        regions: regions
            .iter()
            .map(|r| RegionEntry {
                id: r.id.clone(),
                vertices: r.vertices.iter().map(|&(x, y)| [x, y]).collect(),
            })
            .collect(),
    };
    let text = serde_yaml::to_string(&file).map_err(|e| MapIoError::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| MapIoError::io(path, e))
}
