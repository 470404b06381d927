//! Boxes, IoU, and normalized center/size coordinates.
//!
//! Pixel boxes use corner coordinates `(x1, y1, x2, y2)` with `x2 >= x1`,
//! `y2 >= y1`. The model consumes [`Quad`] values: center and size
//! normalized by the frame dimensions, so every component lies in `[0, 1]`.
//! A missing object is encoded as the all-zero quad.

use serde::{Deserialize, Serialize};

/// Detection category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Hand,
    Object,
}

/// Role an instance plays in an interaction slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Subject,
    Object,
    Null,
}

impl Role {
    /// Row index into the identity embedding table.
    pub fn embedding_index(self) -> usize {
        match self {
            Role::Subject => 0,
            Role::Object => 1,
            Role::Null => 2,
        }
    }
}

/// An axis-aligned box in pixel coordinates with its detection metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64, category: Category) -> Self {
        BBox { x1, y1, x2, y2, category, instance_id: None, score: None }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Clamp the box to the frame `[0, w] x [0, h]`. A box fully outside the
    /// frame degenerates to a zero-area sliver on the border.
    pub fn clamp_to_frame(&self, w: f64, h: f64) -> BBox {
        let mut b = self.clone();
        b.x1 = b.x1.clamp(0.0, w);
        b.x2 = b.x2.clamp(0.0, w);
        b.y1 = b.y1.clamp(0.0, h);
        b.y2 = b.y2.clamp(0.0, h);
        b
    }
}

/// Intersection over union of two boxes. Degenerate boxes (zero area) have
/// zero overlap with everything, giving IoU 0 unless both union terms vanish;
/// the `0/0` case is defined as 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let iy = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Normalized center/size coordinates. The all-zero quad means "absent".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Quad {
    pub const ZERO: Quad = Quad { cx: 0.0, cy: 0.0, w: 0.0, h: 0.0 };

    pub fn is_zero(&self) -> bool {
        *self == Quad::ZERO
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }
}

/// Encode a box (or absence) into normalized coordinates. The box is clamped
/// to the frame first, so every component of the result is in `[0, 1]`.
pub fn encode(b: Option<&BBox>, frame_w: f64, frame_h: f64) -> Quad {
    assert!(frame_w > 0.0 && frame_h > 0.0, "encode: non-positive frame dimensions");
    match b {
        None => Quad::ZERO,
        Some(b) => {
            let b = b.clamp_to_frame(frame_w, frame_h);
            let (cx, cy) = b.center();
            Quad {
                cx: cx / frame_w,
                cy: cy / frame_h,
                w: b.width() / frame_w,
                h: b.height() / frame_h,
            }
        }
    }
}

/// Inverse of [`encode`] for present boxes; mainly for tests.
pub fn decode(q: &Quad, frame_w: f64, frame_h: f64, category: Category) -> BBox {
    let cx = q.cx * frame_w;
    let cy = q.cy * frame_h;
    let w = q.w * frame_w;
    let h = q.h * frame_h;
    BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0, category)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obox(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2, Category::Object)
    }

    #[test]
    fn iou_identical_boxes_is_one() {
        // [TRIVIAL]
        let a = obox(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint_boxes_is_zero() {
        // [TRIVIAL]
        let a = obox(0.0, 0.0, 1.0, 1.0);
        let b = obox(5.0, 5.0, 6.0, 6.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_half_overlap_oracle() {
        // [DERIVED] a=(0,0,2,2), b=(1,0,3,2): inter = 1*2 = 2,
        // union = 4 + 4 - 2 = 6, IoU = 1/3.
        let a = obox(0.0, 0.0, 2.0, 2.0);
        let b = obox(1.0, 0.0, 3.0, 2.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn iou_degenerate_box_is_zero() {
        // [TRIVIAL] zero-area boxes overlap nothing; 0/0 defined as 0.
        let a = obox(1.0, 1.0, 1.0, 1.0);
        let b = obox(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &b), 0.0);
        assert_eq!(iou(&a, &a), 0.0);
    }

    #[test]
    fn encode_centered_half_box() {
        // [DERIVED] box (25,25,75,75) in a 100x100 frame -> (0.5, 0.5, 0.5, 0.5).
        let b = obox(25.0, 25.0, 75.0, 75.0);
        let q = encode(Some(&b), 100.0, 100.0);
        assert_eq!(q, Quad { cx: 0.5, cy: 0.5, w: 0.5, h: 0.5 });
    }

    #[test]
    fn encode_full_frame_box() {
        // [DERIVED] the full frame maps to (0.5, 0.5, 1, 1).
        let b = obox(0.0, 0.0, 320.0, 240.0);
        let q = encode(Some(&b), 320.0, 240.0);
        assert_eq!(q, Quad { cx: 0.5, cy: 0.5, w: 1.0, h: 1.0 });
    }

    #[test]
    fn encode_absent_is_zero_quad() {
        // [TRIVIAL]
        assert!(encode(None, 100.0, 100.0).is_zero());
    }

    #[test]
    fn encode_clamps_out_of_frame() {
        // [DERIVED] (-10, 0, 30, 40) in 100x100 clamps to (0, 0, 30, 40):
        // center (15, 20), size (30, 40), normalized by 100.
        let b = obox(-10.0, 0.0, 30.0, 40.0);
        let q = encode(Some(&b), 100.0, 100.0);
        assert_eq!(q, Quad { cx: 0.15, cy: 0.2, w: 0.3, h: 0.4 });
    }

    #[test]
    fn decode_inverts_encode_for_in_frame_boxes() {
        let b = obox(12.5, 30.0, 200.0, 150.0);
        let q = encode(Some(&b), 320.0, 240.0);
        let back = decode(&q, 320.0, 240.0, Category::Object);
        assert!((back.x1 - b.x1).abs() < 1e-12);
        assert!((back.y1 - b.y1).abs() < 1e-12);
        assert!((back.x2 - b.x2).abs() < 1e-12);
        assert!((back.y2 - b.y2).abs() < 1e-12);
    }

    #[test]
    fn encode_is_scale_invariant() {
        // [DERIVED] scaling the frame and box together leaves the quad
        // unchanged up to floating point.
        let b = obox(10.0, 20.0, 50.0, 90.0);
        let b2 = obox(25.0, 50.0, 125.0, 225.0);
        let q1 = encode(Some(&b), 100.0, 100.0);
        let q2 = encode(Some(&b2), 250.0, 250.0);
        assert!((q1.cx - q2.cx).abs() < 1e-12);
        assert!((q1.cy - q2.cy).abs() < 1e-12);
        assert!((q1.w - q2.w).abs() < 1e-12);
        assert!((q1.h - q2.h).abs() < 1e-12);
    }

    #[test]
    fn role_embedding_indices_are_stable() {
        // [TRIVIAL] table layout: subject, object, null.
        assert_eq!(Role::Subject.embedding_index(), 0);
        assert_eq!(Role::Object.embedding_index(), 1);
        assert_eq!(Role::Null.embedding_index(), 2);
    }
}
