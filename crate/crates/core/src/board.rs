use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point, Rect};

#[derive(Debug, Error, PartialEq)]
pub enum BoardError {
    #[error("board {0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("gap {gap} mm must be at least twice the resolution {resolution} mm")]
    GapBelowResolution { gap: f64, resolution: f64 },
    #[error("minimum feature {min_feature} mm must be at least the gap {gap} mm")]
    FeatureBelowGap { min_feature: f64, gap: f64 },
    #[error("margin {margin} mm leaves no usable area on a {width}x{height} mm board")]
    MarginTooLarge {
        margin: f64,
        width: f64,
        height: f64,
    },
}

/// Physical board and fabrication parameters.
///
/// `gap` is the width of the subtracted channel between zones of different
/// nets; `min_feature` is the narrowest zone that still survives weeding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Board {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub resolution: f64,
    pub gap: f64,
    pub min_feature: f64,
    /// Douglas-Peucker tolerance used when vectorizing zones.
    pub simplify_tolerance: f64,
}

impl Default for Board {
    fn default() -> Self {
        Self {
            width: 100.0,
            height: 70.0,
            margin: 2.0,
            resolution: 0.2,
            gap: 1.0,
            min_feature: 2.0,
            simplify_tolerance: 0.1,
        }
    }
}

impl Board {
    pub fn new(width: f64, height: f64) -> Result<Self, BoardError> {
        Self {
            width,
            height,
            ..Self::default()
        }
        .validated()
    }

    /// Checks every invariant and returns the board unchanged when they hold.
    pub fn validated(self) -> Result<Self, BoardError> {
        for (name, v) in [
            ("width", self.width),
            ("height", self.height),
            ("resolution", self.resolution),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(BoardError::NonPositive(name, v));
            }
        }
        if !(self.margin >= 0.0) {
            return Err(BoardError::NonPositive("margin", self.margin));
        }
        if !(self.simplify_tolerance >= 0.0) {
            return Err(BoardError::NonPositive(
                "simplify tolerance",
                self.simplify_tolerance,
            ));
        }
        if !(self.gap >= 2.0 * self.resolution - 1e-12) {
            return Err(BoardError::GapBelowResolution {
                gap: self.gap,
                resolution: self.resolution,
            });
        }
        if !(self.min_feature >= self.gap - 1e-12) {
            return Err(BoardError::FeatureBelowGap {
                min_feature: self.min_feature,
                gap: self.gap,
            });
        }
        if !(self.margin * 2.0 < self.width.min(self.height)) {
            return Err(BoardError::MarginTooLarge {
                margin: self.margin,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self)
    }

    pub fn nx(&self) -> usize {
        cells_for(self.width, self.resolution)
    }

    pub fn ny(&self) -> usize {
        cells_for(self.height, self.resolution)
    }

    pub fn outline(&self) -> Rect {
        Rect::new(0.0, 0.0, self.width, self.height)
    }

    /// Board minus the margin band.
    pub fn usable(&self) -> Rect {
        Rect::new(
            self.margin,
            self.margin,
            self.width - self.margin,
            self.height - self.margin,
        )
    }

    /// Whether `p` lies in the border band that is never conductive.
    pub fn in_margin(&self, p: Point) -> bool {
        p.x < self.margin
            || p.y < self.margin
            || p.x > self.width - self.margin
            || p.y > self.height - self.margin
    }

    /// Smallest allowed center distance between cells of different nets.
    pub fn clearance(&self) -> f64 {
        self.gap - 2.0 * self.resolution
    }
}

fn cells_for(len: f64, r: f64) -> usize {
    ((len / r) - 1e-9).ceil().max(1.0) as usize
}
