use crate::geo::GridSpec;

/// Axis-aligned square box in cell units, centered on `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub row: f64,
    pub col: f64,
    pub size: f64,
}

impl BBox {
    pub fn new(row: f64, col: f64, size: u32) -> Self {
        Self { row, col, size: size as f64 }
    }

    fn span(c: f64, s: f64) -> (f64, f64) {
        (c - s / 2.0, c + s / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.size * self.size
    }

    /// Whether the center lies inside `spec`.
    pub fn centered_in(&self, spec: &GridSpec) -> bool {
        spec.contains_cell(self.row, self.col)
    }
}

/// Intersection over union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let overlap = |(a0, a1): (f64, f64), (b0, b1): (f64, f64)| (a1.min(b1) - a0.max(b0)).max(0.0);
    let ih = overlap(BBox::span(a.row, a.size), BBox::span(b.row, b.size));
    let iw = overlap(BBox::span(a.col, a.size), BBox::span(b.col, b.size));
    let inter = ih * iw;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}
