//! Small dense symmetric solves for the normal equations.

/// Relative pivot threshold after unit-diagonal scaling.
const RANK_TOLERANCE: f64 = 1e-10;

/// Inverts the symmetric `p x p` matrix `a` (row-major) by Gauss-Jordan
/// elimination with partial pivoting. The matrix is first scaled to unit
/// diagonal so the rank test is independent of column scale.
///
/// Returns the index of the first dependent column on failure.
pub(crate) fn invert_symmetric(a: &[f64], p: usize) -> Result<Vec<f64>, usize> {
    debug_assert_eq!(a.len(), p * p);
    let scale: Vec<f64> = (0..p)
        .map(|i| {
            let d = a[i * p + i];
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    if let Some(bad) = scale.iter().position(|&s| s == 0.0) {
        return Err(bad);
    }

    // augmented [S A S | I]
    let w = 2 * p;
    let mut m = vec![0.0; p * w];
    for i in 0..p {
        for j in 0..p {
            m[i * w + j] = a[i * p + j] * scale[i] * scale[j];
        }
        m[i * w + p + i] = 1.0;
    }
    for col in 0..p {
        let pivot_row = (col..p)
            .max_by(|&r1, &r2| m[r1 * w + col].abs().total_cmp(&m[r2 * w + col].abs()))
            .unwrap_or(col);
        let pivot = m[pivot_row * w + col];
        if pivot.abs() <= RANK_TOLERANCE || !pivot.is_finite() {
            return Err(col);
        }
        if pivot_row != col {
            for j in 0..w {
                m.swap(col * w + j, pivot_row * w + j);
            }
        }
        let inv = 1.0 / pivot;
        for j in 0..w {
            m[col * w + j] *= inv;
        }
        for r in 0..p {
            if r == col {
                continue;
            }
            let f = m[r * w + col];
            if f != 0.0 {
                for j in 0..w {
                    m[r * w + j] -= f * m[col * w + j];
                }
            }
        }
    }
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            out[i * p + j] = m[i * w + p + j] * scale[i] * scale[j];
        }
    }
    Ok(out)
}

pub(crate) fn mat_vec(a: &[f64], p: usize, x: &[f64]) -> Vec<f64> {
    (0..p).map(|i| (0..p).map(|j| a[i * p + j] * x[j]).sum()).collect()
}
