use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, MapIoError};

/// Map-server style metadata that accompanies a mask image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub resolution: f64,
    /// `[x, y, yaw]` of the lower-left corner of the image.
    pub origin: Vec<f64>,
    #[serde(default = "default_occupied")]
    pub occupied_thresh: f64,
    #[serde(default = "default_free")]
    pub free_thresh: f64,
    #[serde(default)]
    pub negate: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
}

fn default_occupied() -> f64 {
    0.65
}

fn default_free() -> f64 {
    0.196
}

impl MapMeta {
    pub fn new(resolution: f64, origin_x: f64, origin_y: f64) -> Self {
        Self {
            image: None,
            resolution,
            origin: vec![origin_x, origin_y, 0.0],
            occupied_thresh: default_occupied(),
            free_thresh: default_free(),
            negate: 0,
            width: None,
            height: None,
        }
    }

    fn validate(&self) -> Result<(), MapIoError> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(MapIoError::Config(format!("resolution must be > 0, got {}", self.resolution)));
        }
        if !(2..=3).contains(&self.origin.len()) || self.origin.iter().any(|v| !v.is_finite()) {
            return Err(MapIoError::Config("origin must be [x, y, yaw]".into()));
        }
        if self.origin.get(2).is_some_and(|yaw| yaw.abs() > 1e-9) {
            return Err(MapIoError::Config("rotated map origins are not supported".into()));
        }
        if !(0.0 <= self.free_thresh
            && self.free_thresh < self.occupied_thresh
            && self.occupied_thresh <= 1.0)
        {
            return Err(MapIoError::Config(format!(
                "thresholds must satisfy 0 <= free ({}) < occupied ({}) <= 1",
                self.free_thresh, self.occupied_thresh
            )));
        }
        if self.negate > 1 {
            return Err(MapIoError::Config("negate must be 0 or 1".into()));
        }
        Ok(())
    }

    pub fn origin_xy(&self) -> (f64, f64) {
        (self.origin[0], self.origin[1])
    }
}

pub fn parse_meta(text: &str) -> Result<MapMeta, MapIoError> {
    let meta: MapMeta =
        serde_yaml::from_str(text).map_err(|e| MapIoError::Config(format!("map meta: {e}")))?;
    meta.validate()?;
    Ok(meta)
}

pub fn load_meta(path: &Path) -> Result<MapMeta, MapIoError> {
    parse_meta(&read_text(path)?).map_err(|e| match e {
        MapIoError::Config(m) => MapIoError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_meta(meta: &MapMeta, path: &Path) -> Result<(), MapIoError> {
    let text = serde_yaml::to_string(meta).map_err(|e| MapIoError::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| MapIoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_applied() {
        let m = parse_meta("resolution: 0.05\norigin: [-1.0, 2.0, 0.0]\n").unwrap();
        assert_eq!(m.occupied_thresh, 0.65);
        assert_eq!(m.free_thresh, 0.196);
        assert_eq!(m.origin_xy(), (-1.0, 2.0));
    }

    #[test]
    fn missing_required_key() {
        let e = parse_meta("origin: [0, 0, 0]\n").unwrap_err();
        assert!(matches!(e, MapIoError::Config(ref m) if m.contains("resolution")), "{e}");
        assert!(matches!(parse_meta("resolution: 0.1\n"), Err(MapIoError::Config(_))));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse_meta("resolution: 0\norigin: [0, 0, 0]\n").is_err());
        assert!(parse_meta("resolution: 0.1\norigin: [0, 0, 0]\nfree_thresh: 0.9\n").is_err());
    }
}
