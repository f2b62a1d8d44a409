use std::path::Path;

use super::meta::{load_meta, MapMeta};
use super::pgm::{decode_pgm, encode_pgm16, encode_pgm8, Pgm};
use super::{read_file, MapIoError};
use crate::costmap::CostGrid;
use crate::grid::GridMeta;

/// Lane pixels are hundredths of a degree.
pub const CENTIDEGREES_PER_DEGREE: f64 = 100.0;
/// 16-bit lane pixel meaning "no lane here".
pub const NO_LANE: u16 = 65535;
const MAX_LANE_VALUE: u16 = 35999;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occupancy {
    Free,
    Occupied,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub meta: GridMeta,
    pub cells: Vec<Occupancy>,
}

impl OccupancyGrid {
    pub fn filled(meta: GridMeta, value: Occupancy) -> Self {
        Self {
            cells: vec![value; meta.len()],
            meta,
        }
    }

    pub fn get(&self, col: usize, row: usize) -> Occupancy {
        self.cells[self.meta.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize, value: Occupancy) {
        let i = self.meta.index(col, row);
        self.cells[i] = value;
    }
}

/// Binary prohibition mask: `true` where the mask image is black.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    pub meta: GridMeta,
    pub cells: Vec<bool>,
}

impl MaskGrid {
    pub fn empty(meta: GridMeta) -> Self {
        Self {
            cells: vec![false; meta.len()],
            meta,
        }
    }

    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        let i = self.meta.index(col, row);
        self.cells[i] = value;
    }
}

/// Per-cell lane direction in centidegrees (`0..=35999`) or `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneGrid {
    pub meta: GridMeta,
    pub cells: Vec<Option<u16>>,
}

impl LaneGrid {
    pub fn empty(meta: GridMeta) -> Self {
        Self {
            cells: vec![None; meta.len()],
            meta,
        }
    }

    pub fn set(&mut self, col: usize, row: usize, centidegrees: Option<u16>) {
        assert!(centidegrees.is_none_or(|v| v <= MAX_LANE_VALUE));
        let i = self.meta.index(col, row);
        self.cells[i] = centidegrees;
    }

    /// Lane angle of a cell in radians.
    pub fn angle(&self, index: usize) -> Option<f64> {
        self.cells[index].map(centidegrees_to_radians)
    }
}

pub fn centidegrees_to_radians(v: u16) -> f64 {
    (f64::from(v) / CENTIDEGREES_PER_DEGREE).to_radians()
}

fn grid_meta(meta: &MapMeta, pgm: &Pgm) -> Result<GridMeta, MapIoError> {
    if meta.width.is_some_and(|w| w != pgm.width) || meta.height.is_some_and(|h| h != pgm.height) {
        return Err(MapIoError::Consistency(format!(
            "image is {}x{}, meta declares {}x{}",
            pgm.width,
            pgm.height,
            meta.width.map_or("?".into(), |w| w.to_string()),
            meta.height.map_or("?".into(), |h| h.to_string()),
        )));
    }
    let (ox, oy) = meta.origin_xy();
    Ok(GridMeta::new(meta.resolution, ox, oy, pgm.width, pgm.height))
}

/// Image rows run top to bottom; grid rows run bottom to top.
fn image_to_grid<T: Copy>(width: usize, height: usize, image: &[T]) -> Vec<T> {
    (0..height)
        .rev()
        .flat_map(|r| image[r * width..(r + 1) * width].iter().copied())
        .collect()
}

fn read_pgm(path: &Path, maxval: u16) -> Result<Pgm, MapIoError> {
    let pgm = decode_pgm(&read_file(path)?)
        .map_err(|e| MapIoError::Format(format!("{}: {e}", path.display())))?;
    if pgm.maxval != maxval {
        return Err(MapIoError::Format(format!(
            "{}: maxval {} (expected {maxval})",
            path.display(),
            pgm.maxval
        )));
    }
    Ok(pgm)
}

/// Classifies a pixel by its occupancy fraction `(255 - p) / 255`.
pub(crate) fn classify_pixel(p: u8, meta: &MapMeta) -> Occupancy {
    let p = f64::from(p);
    let f = if meta.negate == 1 { p / 255.0 } else { (255.0 - p) / 255.0 };
    if f > meta.occupied_thresh {
        Occupancy::Occupied
    } else if f < meta.free_thresh {
        Occupancy::Free
    } else {
        Occupancy::Unknown
    }
}

pub fn load_occupancy_map(image_path: &Path, meta_path: &Path) -> Result<OccupancyGrid, MapIoError> {
    let meta = load_meta(meta_path)?;
    let pgm = read_pgm(image_path, 255)?;
    let gm = grid_meta(&meta, &pgm)?;
    let cells = image_to_grid(pgm.width, pgm.height, &pgm.pixels)
        .into_iter()
        .map(|p| classify_pixel(p as u8, &meta))
        .collect();
    Ok(OccupancyGrid { meta: gm, cells })
}

pub fn load_prohibition_mask(image_path: &Path, meta_path: &Path) -> Result<MaskGrid, MapIoError> {
    let meta = load_meta(meta_path)?;
    let pgm = read_pgm(image_path, 255)?;
    let gm = grid_meta(&meta, &pgm)?;
    let cells = image_to_grid(pgm.width, pgm.height, &pgm.pixels)
        .into_iter()
        .map(|p| p == 0)
        .collect();
    Ok(MaskGrid { meta: gm, cells })
}

pub fn load_lane_mask(image_path: &Path, meta_path: &Path) -> Result<LaneGrid, MapIoError> {
    let meta = load_meta(meta_path)?;
    let pgm = read_pgm(image_path, 65535)?;
    let gm = grid_meta(&meta, &pgm)?;
    if let Some(i) = pgm
        .pixels
        .iter()
        .position(|&v| v > MAX_LANE_VALUE && v != NO_LANE)
    {
        return Err(MapIoError::Format(format!(
            "{}: lane pixel {i} has value {} outside 0..=35999 and is not the no-lane value",
            image_path.display(),
            pgm.pixels[i]
        )));
    }
    let cells = image_to_grid(pgm.width, pgm.height, &pgm.pixels)
        .into_iter()
        .map(|v| (v != NO_LANE).then_some(v))
        .collect();
    Ok(LaneGrid { meta: gm, cells })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), MapIoError> {
    std::fs::write(path, bytes).map_err(|e| MapIoError::io(path, e))
}

/// Writes the grid as an 8-bit PGM, top row first, cost values verbatim.
pub fn write_costmap_snapshot(grid: &CostGrid, path: &Path) -> Result<(), MapIoError> {
    let m = &grid.meta;
    let image = image_to_grid(m.width, m.height, &grid.cells);
    write_bytes(path, &encode_pgm8(m.width, m.height, &image))
}

/// Reads a snapshot written by [`write_costmap_snapshot`]; returns
/// `(width, height, cells)` with cells in grid (bottom-row-first) order.
pub fn read_costmap_snapshot(path: &Path) -> Result<(usize, usize, Vec<u8>), MapIoError> {
    let pgm = read_pgm(path, 255)?;
    let cells = image_to_grid(pgm.width, pgm.height, &pgm.pixels)
        .into_iter()
        .map(|p| p as u8)
        .collect();
    Ok((pgm.width, pgm.height, cells))
}

/// Writes an occupancy grid using map-server pixel conventions
/// (occupied 0, free 254, unknown 205). Also used for prohibition masks.
pub fn write_occupancy_image(grid: &OccupancyGrid, path: &Path) -> Result<(), MapIoError> {
    let m = &grid.meta;
    let pixels: Vec<u8> = grid
        .cells
        .iter()
        .map(|c| match c {
            Occupancy::Occupied => 0,
            Occupancy::Free => 254,
            Occupancy::Unknown => 205,
        })
        .collect();
    write_bytes(path, &encode_pgm8(m.width, m.height, &image_to_grid(m.width, m.height, &pixels)))
}

pub fn write_lane_mask(grid: &LaneGrid, path: &Path) -> Result<(), MapIoError> {
    let m = &grid.meta;
    let pixels: Vec<u16> = grid.cells.iter().map(|c| c.unwrap_or(NO_LANE)).collect();
    write_bytes(path, &encode_pgm16(m.width, m.height, &image_to_grid(m.width, m.height, &pixels)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_io::write_meta;
    use tempfile::TempDir;

    fn meta_file(dir: &TempDir) -> std::path::PathBuf {
        let p = dir.path().join("map.yaml");
        write_meta(&MapMeta::new(0.1, 0.0, 0.0), &p).unwrap();
        p
    }

    #[test]
    fn pixel_classification() {
        let m = MapMeta::new(0.1, 0.0, 0.0);
        assert_eq!(classify_pixel(0, &m), Occupancy::Occupied);
        assert_eq!(classify_pixel(254, &m), Occupancy::Free);
        // (255 - 128) / 255 = 0.498, between 0.196 and 0.65
        assert!(((255.0 - 128.0) / 255.0 - 0.498f64).abs() < 1e-3);
        assert_eq!(classify_pixel(128, &m), Occupancy::Unknown);
    }

    #[test]
    fn threshold_partition_is_total() {
        let m = MapMeta::new(0.1, 0.0, 0.0);
        let mut seen = [0usize; 3];
        for p in 0..=255u8 {
            let idx = match classify_pixel(p, &m) {
                Occupancy::Free => 0,
                Occupancy::Occupied => 1,
                Occupancy::Unknown => 2,
            };
            seen[idx] += 1;
        }
        assert_eq!(seen.iter().sum::<usize>(), 256);
        assert!(seen.iter().all(|&n| n > 0));
    }

    #[test]
    fn occupancy_rows_flip() {
        let dir = TempDir::new().unwrap();
        let meta = meta_file(&dir);
        let img = dir.path().join("m.pgm");
        // top row black, bottom row white
        std::fs::write(&img, encode_pgm8(2, 2, &[0, 0, 254, 254])).unwrap();
        let g = load_occupancy_map(&img, &meta).unwrap();
        assert_eq!(g.get(0, 0), Occupancy::Free);
        assert_eq!(g.get(1, 1), Occupancy::Occupied);
    }

    #[test]
    fn declared_dims_must_match() {
        let dir = TempDir::new().unwrap();
        let meta = dir.path().join("m.yaml");
        std::fs::write(&meta, "resolution: 0.1\norigin: [0, 0, 0]\nwidth: 3\nheight: 2\n").unwrap();
        let img = dir.path().join("m.pgm");
        std::fs::write(&img, encode_pgm8(2, 2, &[0; 4])).unwrap();
        assert!(matches!(load_occupancy_map(&img, &meta), Err(MapIoError::Consistency(_))));
    }

    #[test]
    fn lane_values() {
        let dir = TempDir::new().unwrap();
        let meta = meta_file(&dir);
        let img = dir.path().join("lane.pgm");
        std::fs::write(&img, encode_pgm16(3, 1, &[9000, NO_LANE, 0])).unwrap();
        let g = load_lane_mask(&img, &meta).unwrap();
        assert_eq!(g.cells, vec![Some(9000), None, Some(0)]);
        assert!((g.angle(0).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

        std::fs::write(&img, encode_pgm16(3, 1, &[0, 42000, 0])).unwrap();
        let e = load_lane_mask(&img, &meta).unwrap_err();
        assert!(matches!(e, MapIoError::Format(ref m) if m.contains("pixel 1")), "{e}");

        // 8-bit image offered as a lane mask
        std::fs::write(&img, encode_pgm8(1, 1, &[0])).unwrap();
        assert!(matches!(load_lane_mask(&img, &meta), Err(MapIoError::Format(_))));
    }

    #[test]
    fn lane_totality() {
        for v in [0u16, 1, 35999, 36000, 50000, 65534, 65535] {
            let accepted = v <= MAX_LANE_VALUE;
            let sentinel = v == NO_LANE;
            let rejected = !accepted && !sentinel;
            assert_eq!(u8::from(accepted) + u8::from(sentinel) + u8::from(rejected), 1);
        }
    }

    #[test]
    fn snapshot_examples() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("s.pgm");
        let meta = GridMeta::new(0.1, 0.0, 0.0, 4, 4);
        let mut grid = CostGrid::new(meta);
        write_costmap_snapshot(&grid, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..bytes.len() - 16], b"P5\n4 4\n255\n");
        assert!(bytes[bytes.len() - 16..].iter().all(|&b| b == 0));

        grid.cells[5] = 254;
        write_costmap_snapshot(&grid, &path).unwrap();
        let (w, h, cells) = read_costmap_snapshot(&path).unwrap();
        assert_eq!((w, h), (4, 4));
        assert_eq!(cells, grid.cells);
        let raw = std::fs::read(&path).unwrap();
        assert_eq!(raw.iter().filter(|&&b| b == 254).count(), 1);
    }

    #[test]
    fn snapshot_roundtrip_all_values() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("all.pgm");
        let meta = GridMeta::new(0.1, 0.0, 0.0, 16, 16);
        let mut grid = CostGrid::new(meta);
        for (i, c) in grid.cells.iter_mut().enumerate() {
            *c = i as u8;
        }
        write_costmap_snapshot(&grid, &path).unwrap();
        assert_eq!(read_costmap_snapshot(&path).unwrap().2, grid.cells);
    }
}
