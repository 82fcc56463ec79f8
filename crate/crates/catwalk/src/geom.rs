//! Pixel-space geometry shared by the renderer and the grounding metrics.

use serde::{Deserialize, Serialize};

/// Inclusive pixel rectangle: both corner pixels belong to the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct PixelBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl From<[u32; 4]> for PixelBox {
    fn from(v: [u32; 4]) -> Self {
        PixelBox { x0: v[0], y0: v[1], x1: v[2], y1: v[3] }
    }
}

impl From<PixelBox> for [u32; 4] {
    fn from(b: PixelBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

impl PixelBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1, "degenerate box ({x0},{y0})-({x1},{y1})");
        PixelBox { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    /// Pixel count, counting both inclusive corners.
    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn contains_point(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn contains(&self, other: &PixelBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    /// Proper containment: `other` lies inside with no shared edge.
    pub fn strictly_contains(&self, other: &PixelBox) -> bool {
        self.x0 < other.x0 && self.y0 < other.y0 && self.x1 > other.x1 && self.y1 > other.y1
    }

    pub fn intersects(&self, other: &PixelBox) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    pub fn intersection(&self, other: &PixelBox) -> Option<PixelBox> {
        if !self.intersects(other) {
            return None;
        }
        Some(PixelBox::new(
            self.x0.max(other.x0),
            self.y0.max(other.y0),
            self.x1.min(other.x1),
            self.y1.min(other.y1),
        ))
    }

    /// Smallest box covering both.
    pub fn hull(&self, other: &PixelBox) -> PixelBox {
        PixelBox::new(
            self.x0.min(other.x0),
            self.y0.min(other.y0),
            self.x1.max(other.x1),
            self.y1.max(other.y1),
        )
    }

    pub fn in_bounds(&self, width: u32, height: u32) -> bool {
        self.x1 < width && self.y1 < height
    }
}

/// Intersection over union with inclusive pixel counting.
pub fn iou(a: &PixelBox, b: &PixelBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |r| r.area());
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_identical_is_one() {
        let a = PixelBox::new(3, 4, 10, 12);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint_is_zero() {
        let a = PixelBox::new(0, 0, 4, 4);
        let b = PixelBox::new(10, 10, 12, 12);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_half_overlap_hand_case() {
        // 10x10 boxes overlapping in a 5x10 strip: 50 / (100 + 100 - 50).
        let a = PixelBox::new(0, 0, 9, 9);
        let b = PixelBox::new(5, 0, 14, 9);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn strict_containment_rejects_shared_edge() {
        let outer = PixelBox::new(0, 0, 10, 10);
        let touching = PixelBox::new(0, 2, 5, 5);
        let inner = PixelBox::new(1, 1, 9, 9);
        assert!(outer.contains(&touching));
        assert!(!outer.strictly_contains(&touching));
        assert!(outer.strictly_contains(&inner));
    }
}
