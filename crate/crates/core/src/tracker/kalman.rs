//! Constant-velocity Kalman filter over box observations.
//!
//! State (8): center x, center y, area, aspect ratio, then the velocities of
//! the first four. The aspect-ratio velocity is pinned at zero (zero initial
//! variance and zero process noise), matching the usual constant-aspect
//! assumption.
//!
//! Detections here come from annotation boxes, which are near-exact, so the
//! measurement and process noise are set several orders of magnitude below
//! detector-grade values. This makes the filter lock onto noiseless
//! constant-velocity motion to well below 1e-6 within a few frames while
//! keeping the same diagonal structure as the classic tracker settings.

use crate::geometry::{BBox, Category};

/// Initial covariance diagonal: loose on the unobserved velocities.
pub const INIT_COV_DIAG: [f64; 8] = [10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4, 0.0];

/// Measurement noise diagonal for (cx, cy, area, aspect).
pub const MEASUREMENT_NOISE_DIAG: [f64; 4] = [1e-4, 1e-4, 1e-3, 1e-3];

/// Process noise diagonal.
pub const PROCESS_NOISE_DIAG: [f64; 8] = [1e-4, 1e-4, 1e-4, 1e-4, 1e-6, 1e-6, 1e-8, 0.0];

/// Filter state: mean vector and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: [f64; 8],
    pub cov: [[f64; 8]; 8],
}

/// Measurement vector (cx, cy, area, aspect) of a box. Degenerate boxes get
/// aspect 0.
pub fn measurement_from_box(b: &BBox) -> [f64; 4] {
    let (cx, cy) = b.center();
    let w = b.width();
    let h = b.height();
    let aspect = if h > 0.0 { w / h } else { 0.0 };
    [cx, cy, w * h, aspect]
}

/// Convert a state mean back to a box. Negative area or aspect (possible
/// transiently from the linear model) degenerates to a point box.
pub fn state_to_bbox(s: &KalmanState, category: Category) -> BBox {
    let [cx, cy, area, aspect, ..] = s.mean;
    let (w, h) = if area > 0.0 && aspect > 0.0 {
        let w = (area * aspect).sqrt();
        (w, area / w)
    } else {
        (0.0, 0.0)
    };
    BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0, category)
}

impl KalmanState {
    /// Start a track at a detection: position from the measurement, zero
    /// velocities with large variance (except the pinned aspect velocity).
    pub fn from_box(b: &BBox) -> Self {
        let z = measurement_from_box(b);
        let mut mean = [0.0; 8];
        mean[..4].copy_from_slice(&z);
        let mut cov = [[0.0; 8]; 8];
        for i in 0..8 {
            cov[i][i] = INIT_COV_DIAG[i];
        }
        KalmanState { mean, cov }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.mean[0], self.mean[1])
    }
}

fn symmetrize(p: &mut [[f64; 8]; 8]) {
    for i in 0..8 {
        for j in (i + 1)..8 {
            let avg = 0.5 * (p[i][j] + p[j][i]);
            p[i][j] = avg;
            p[j][i] = avg;
        }
    }
}

/// Advance one frame under the constant-velocity model.
pub fn kalman_predict(s: &KalmanState) -> KalmanState {
    let mut mean = s.mean;
    for i in 0..4 {
        mean[i] += s.mean[i + 4];
    }
    // P' = F P F^T + Q with F = [[I, I], [0, I]] in 4-dim blocks.
    let p = &s.cov;
    let mut fp = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            let mut v = p[i][j];
            if i < 4 {
                v += p[i + 4][j];
            }
            fp[i][j] = v;
        }
    }
    let mut cov = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            let mut v = fp[i][j];
            if j < 4 {
                v += fp[i][j + 4];
            }
            cov[i][j] = v;
        }
    }
    for i in 0..8 {
        cov[i][i] += PROCESS_NOISE_DIAG[i];
    }
    symmetrize(&mut cov);
    KalmanState { mean, cov }
}

/// Invert a 4x4 matrix by Gauss-Jordan with partial pivoting. Returns `None`
/// if a pivot vanishes.
fn invert4(m: &[[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut a = *m;
    let mut inv = [[0.0; 4]; 4];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..4 {
        let mut pivot = col;
        for r in (col + 1)..4 {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..4 {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..4 {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..4 {
                        a[r][j] -= f * a[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Measurement update with an explicit measurement-noise diagonal.
///
/// Uses the Joseph-form covariance update followed by symmetrization, so the
/// covariance stays symmetric positive semidefinite under roundoff. A
/// singular innovation covariance is regularized by adding 1e-9 to its
/// diagonal until it inverts; the update never fails.
pub fn kalman_update_with_noise(s: &KalmanState, b: &BBox, r_diag: &[f64; 4]) -> KalmanState {
    let z = measurement_from_box(b);
    let p = &s.cov;

    // Innovation covariance S = H P H^T + R (top-left 4x4 block of P plus R).
    let mut sm = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            sm[i][j] = p[i][j];
        }
        sm[i][i] += r_diag[i];
    }
    let mut bump = 0.0;
    let s_inv = loop {
        let mut trial = sm;
        for (i, row) in trial.iter_mut().enumerate() {
            row[i] += bump;
        }
        if let Some(inv) = invert4(&trial) {
            break inv;
        }
        bump = if bump == 0.0 { 1e-9 } else { bump * 10.0 };
    };

    // Gain K = P H^T S^{-1} (8x4).
    let mut k = [[0.0; 4]; 8];
    for i in 0..8 {
        for j in 0..4 {
            let mut v = 0.0;
            for l in 0..4 {
                v += p[i][l] * s_inv[l][j];
            }
            k[i][j] = v;
        }
    }

    let mut mean = s.mean;
    for i in 0..8 {
        let mut dv = 0.0;
        for j in 0..4 {
            dv += k[i][j] * (z[j] - s.mean[j]);
        }
        mean[i] += dv;
    }
    // Keep the pinned aspect velocity at exactly zero.
    mean[7] = 0.0;

    // Joseph form: P' = (I - K H) P (I - K H)^T + K R K^T.
    let mut a = [[0.0; 8]; 8]; // I - K H
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
        for j in 0..4 {
            row[j] -= k[i][j];
        }
    }
    let mut ap = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            let mut v = 0.0;
            for l in 0..8 {
                v += a[i][l] * p[l][j];
            }
            ap[i][j] = v;
        }
    }
    let mut cov = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            let mut v = 0.0;
            for l in 0..8 {
                v += ap[i][l] * a[j][l];
            }
            for l in 0..4 {
                v += k[i][l] * r_diag[l] * k[j][l];
            }
            cov[i][j] = v;
        }
    }
    symmetrize(&mut cov);
    KalmanState { mean, cov }
}

/// Measurement update with the default measurement noise.
pub fn kalman_update(s: &KalmanState, b: &BBox) -> KalmanState {
    kalman_update_with_noise(s, b, &MEASUREMENT_NOISE_DIAG)
}
