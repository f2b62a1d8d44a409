use serde::{Deserialize, Serialize};

use super::{Cost, CostGrid, INSCRIBED, LETHAL, MAX_NON_OBSTACLE};

const DIST_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflationConfig {
    /// Meters; cells this close to a lethal cell get the inscribed cost.
    pub inscribed_radius: f64,
    /// Meters; no cost is added beyond this distance.
    pub inflation_radius: f64,
    /// Exponential decay rate, 1/m.
    pub scale: f64,
}

impl InflationConfig {
    /// Defaults derived from a robot radius.
    pub fn for_radius(radius: f64) -> Self {
        Self {
            inscribed_radius: radius,
            inflation_radius: 3.0 * radius,
            scale: 3.0,
        }
    }

    /// Cost contributed at distance `d` from the nearest lethal cell, or
    /// `None` past the inflation radius.
    pub fn cost_at(&self, d: f64) -> Option<Cost> {
        if d <= DIST_EPS {
            Some(LETHAL)
        } else if d <= self.inscribed_radius + DIST_EPS {
            Some(INSCRIBED)
        } else if d <= self.inflation_radius + DIST_EPS {
            Some(decay_cost(self.scale, d - self.inscribed_radius))
        } else {
            None
        }
    }
}

/// `round(252 * exp(-scale * excess))`.
pub fn decay_cost(scale: f64, excess: f64) -> Cost {
    (f64::from(MAX_NON_OBSTACLE) * (-scale * excess).exp()).round() as Cost
}

/// Inflates every lethal cell of `grid`. Each output cell is the maximum of
/// its input cost and the cost implied by its distance to the nearest lethal
/// cell; unknown cells pass through.
pub fn inflate(grid: &CostGrid, cfg: &InflationConfig) -> CostGrid {
    let meta = grid.meta;
    let (w, h) = (meta.width as i64, meta.height as i64);
    let res = meta.resolution;
    let reach = (cfg.inflation_radius / res + DIST_EPS).floor() as i64;

    // Kernel of (dc, dr, cost), distances measured between cell centers.
    let mut kernel = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let d = ((dc * dc + dr * dr) as f64).sqrt() * res;
            if let Some(c) = cfg.cost_at(d) {
                kernel.push((dc, dr, c));
            }
        }
    }

    let lethal = |c: i64, r: i64| grid.cells[(r * w + c) as usize] == LETHAL;
    let mut out = grid.clone();
    for r in 0..h {
        for c in 0..w {
            if !lethal(c, r) {
                continue;
            }
            // The nearest lethal cell to any non-lethal cell lies on the
            // boundary of the lethal set, so interior cells need no stamp.
            let interior = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().all(|&(dc, dr)| {
                let (nc, nr) = (c + dc, r + dr);
                nc < 0 || nr < 0 || nc >= w || nr >= h || lethal(nc, nr)
            });
            if interior {
                continue;
            }
            for &(dc, dr, cost) in &kernel {
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc >= w || nr >= h {
                    continue;
                }
                let cell = &mut out.cells[(nr * w + nc) as usize];
                if cost > *cell {
                    *cell = cost;
                }
            }
        }
    }
    out
}
