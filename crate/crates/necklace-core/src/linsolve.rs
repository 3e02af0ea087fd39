//! Dense complex linear solve with partial pivoting.
//!
//! The scattering oracle assembles one 6N x 6N complex system per frequency;
//! at desk scale a plain in-place LU is all that is needed.

use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

pub(crate) struct Singular;

/// Solves `a x = b` in place (row-major `a`, length n*n). On success `b`
/// holds the solution. `a` is destroyed either way.
pub(crate) fn solve_in_place(
    n: usize,
    a: &mut [Complex64],
    b: &mut [Complex64],
) -> Result<(), Singular> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut scale: f64 = 0.0;
    for x in a.iter() {
        scale = scale.max(x.norm_sqr());
    }
    let scale = scale.sqrt();
    if scale == 0.0 {
        return Err(Singular);
    }
    let tol = 1e-14 * scale;

    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        // pivot search on column k
        let mut best = k;
        let mut best_mag = a[piv[k] * n + k].norm_sqr();
        for (ri, &row) in piv.iter().enumerate().skip(k + 1) {
            let mag = a[row * n + k].norm_sqr();
            if mag > best_mag {
                best = ri;
                best_mag = mag;
            }
        }
        piv.swap(k, best);
        let pk = piv[k];
        let pivot = a[pk * n + k];
        if pivot.norm() <= tol {
            return Err(Singular);
        }
        for &row in piv.iter().skip(k + 1) {
            let factor = a[row * n + k] / pivot;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            a[row * n + k] = factor;
            for j in (k + 1)..n {
                let upd = a[pk * n + j] * factor;
                a[row * n + j] -= upd;
            }
            b[row] -= b[pk] * factor;
        }
    }
    // back substitution into a scratch ordered by pivot rows
    let mut x = alloc::vec![Complex64::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let pk = piv[k];
        let mut acc = b[pk];
        for j in (k + 1)..n {
            acc -= a[pk * n + j] * x[j];
        }
        x[k] = acc / a[pk * n + k];
    }
    b.copy_from_slice(&x);
    Ok(())
}
