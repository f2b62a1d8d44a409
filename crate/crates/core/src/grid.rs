//! Grid geometry shared by every map, mask and cost layer.
//!
//! Cells are addressed as `(col, row)`. Row 0 is the bottom (y-min) row and
//! the world position of a cell is its center:
//! `origin + (col + 0.5, row + 0.5) * resolution`.

use serde::{Deserialize, Serialize};

/// Placement and size of a row-major cell grid in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    /// Meters per cell.
    pub resolution: f64,
    /// World x of the outer corner of cell (0, 0).
    pub origin_x: f64,
    /// World y of the outer corner of cell (0, 0).
    pub origin_y: f64,
    pub width: usize,
    pub height: usize,
}

impl GridMeta {
    pub fn new(resolution: f64, origin_x: f64, origin_y: f64, width: usize, height: usize) -> Self {
        assert!(resolution > 0.0, "grid resolution must be positive");
        assert!(width >= 1 && height >= 1, "grid must have at least one cell");
        Self {
            resolution,
            origin_x,
            origin_y,
            width,
            height,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn cell_of_index(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn in_bounds(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    /// World coordinates of the center of a cell.
    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.resolution,
            self.origin_y + (row as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing a world point, unbounded (may be negative or past the edge).
    pub fn world_to_cell_unchecked(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.origin_x) / self.resolution).floor() as i64,
            ((y - self.origin_y) / self.resolution).floor() as i64,
        )
    }

    /// Cell containing a world point, or `None` outside the grid.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (c, r) = self.world_to_cell_unchecked(x, y);
        self.in_bounds(c, r).then_some((c as usize, r as usize))
    }

    /// World-space extent `(x_min, y_min, x_max, y_max)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.width as f64 * self.resolution,
            self.origin_y + self.height as f64 * self.resolution,
        )
    }

    /// Same cell layout, allowing for float noise in resolution and origin.
    pub fn same_geometry(&self, other: &GridMeta) -> bool {
        const EPS: f64 = 1e-9;
        self.width == other.width
            && self.height == other.height
            && (self.resolution - other.resolution).abs() < EPS
            && (self.origin_x - other.origin_x).abs() < EPS
            && (self.origin_y - other.origin_y).abs() < EPS
    }
}

/// Planar pose in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub const fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw }
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn cell_center_convention() {
        let m = GridMeta::new(0.5, -1.0, 2.0, 4, 3);
        assert_eq!(m.cell_center(0, 0), (-0.75, 2.25));
        assert_eq!(m.world_to_cell(-0.75, 2.25), Some((0, 0)));
        assert_eq!(m.world_to_cell(-1.01, 2.25), None);
        assert_eq!(m.world_to_cell(0.99, 3.49), Some((3, 2)));
        assert_eq!(m.world_to_cell(1.0, 3.0), None);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn world_cell_roundtrip(
            res in 0.01f64..2.0,
            ox in -50.0f64..50.0,
            oy in -50.0f64..50.0,
            w in 1usize..64,
            h in 1usize..64,
            c in 0usize..64,
            r in 0usize..64,
        ) {
            let m = GridMeta::new(res, ox, oy, w, h);
            let (c, r) = (c % w, r % h);
            let (x, y) = m.cell_center(c, r);
            prop_assert_eq!(m.world_to_cell(x, y), Some((c, r)));
        }
    }
}
