//! Dense LU with partial pivoting for the small determinants used by the
//! Wronskian and kernel code.

/// Determinant of the row-major `n x n` matrix `a` (consumed as workspace).
pub fn lu_determinant(mut a: Vec<f64>, n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    let mut det = 1.0;
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_abs = a[col * n + col].abs();
        for row in (col + 1)..n {
            let v = a[row * n + col].abs();
            if v > pivot_abs {
                pivot_abs = v;
                pivot_row = row;
            }
        }
        if pivot_abs == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            det = -det;
        }
        let pivot = a[col * n + col];
        det *= pivot;
        for row in (col + 1)..n {
            let factor = a[row * n + col] / pivot;
            if factor != 0.0 {
                for k in (col + 1)..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
            }
        }
    }
    det
}

/// Solves `a z = b` for the row-major `n x n` matrix `a`; `None` when a pivot
/// vanishes.
pub fn lu_solve(mut a: Vec<f64>, n: usize, mut b: Vec<f64>) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))?;
        if a[pivot_row * n + col] == 0.0 {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / pivot;
            if factor != 0.0 {
                for k in (col + 1)..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    Some(b)
}

/// Product of the row max-norms, the scale against which a determinant is
/// judged singular.
pub fn row_norm_scale(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|r| a[r * n..(r + 1) * n].iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_determinants() {
        assert_eq!(lu_determinant(vec![3.0], 1), 3.0);
        assert_eq!(lu_determinant(vec![1.0, 2.0, 3.0, 4.0], 2), -2.0);
        // requires a row swap
        let d = lu_determinant(vec![0.0, 1.0, 1.0, 0.0], 2);
        assert_eq!(d, -1.0);
        let d = lu_determinant(vec![2.0, 0.0, 1.0, 1.0, 3.0, 2.0, 1.0, 1.0, 2.0], 3);
        assert!((d - 6.0).abs() < 1e-14, "{d}");
    }

    #[test]
    fn repeated_rows_vanish() {
        let d = lu_determinant(vec![1.0, 2.0, 3.0, 0.5, 0.25, 4.0, 1.0, 2.0, 3.0], 3);
        assert!(d.abs() < 1e-15);
        assert_eq!(lu_determinant(vec![0.0; 4], 2), 0.0);
    }

    #[test]
    fn solves_small_systems() {
        let z = lu_solve(vec![0.0, 2.0, 1.0, 1.0], 2, vec![4.0, 3.0]).unwrap();
        assert_eq!(z, vec![1.0, 2.0]);
        let a = vec![2.0, 0.0, 1.0, 1.0, 3.0, 2.0, 1.0, 1.0, 2.0];
        let z = lu_solve(a, 3, vec![3.0, 6.0, 4.0]).unwrap();
        for v in z {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!(lu_solve(vec![1.0, 2.0, 2.0, 4.0], 2, vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn scale_is_product_of_row_maxima() {
        assert_eq!(row_norm_scale(&[1.0, -3.0, 0.5, 2.0], 2), 6.0);
    }
}
