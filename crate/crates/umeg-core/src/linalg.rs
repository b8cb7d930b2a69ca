//! Dense f64 kernels used by the network forward/backward passes.
//!
//! All loops run in a fixed order, so results are bitwise reproducible for
//! equal inputs regardless of how callers schedule work.

/// `c += a * b` for row-major `a` (m x k), `b` (k x n), `c` (m x n).
pub fn matmul_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            if a_ip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (c_val, &b_val) in c_row.iter_mut().zip(b_row) {
                *c_val += a_ip * b_val;
            }
        }
    }
}

/// `c = a * b`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    matmul_acc(a, b, &mut c, m, k, n);
    c
}

/// `c += a^T * b` for row-major `a` (r x m), `b` (r x n), `c` (m x n).
/// Used for weight gradients: rows of `a`/`b` are accumulated in order.
pub fn matmul_at_acc(a: &[f64], b: &[f64], c: &mut [f64], r: usize, m: usize, n: usize) {
    debug_assert_eq!(a.len(), r * m);
    debug_assert_eq!(b.len(), r * n);
    debug_assert_eq!(c.len(), m * n);
    for row in 0..r {
        let a_row = &a[row * m..(row + 1) * m];
        let b_row = &b[row * n..(row + 1) * n];
        for (i, &a_val) in a_row.iter().enumerate() {
            if a_val == 0.0 {
                continue;
            }
            let c_row = &mut c[i * n..(i + 1) * n];
            for (c_val, &b_val) in c_row.iter_mut().zip(b_row) {
                *c_val += a_val * b_val;
            }
        }
    }
}

/// `c += a * b^T` for row-major `a` (m x k), `b` (n x k), `c` (m x n).
pub fn matmul_bt_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (j, c_val) in c_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (&a_val, &b_val) in a_row.iter().zip(b_row) {
                acc += a_val * b_val;
            }
            *c_val += acc;
        }
    }
}

/// In-place ReLU; returns the input buffer.
pub fn relu_inplace(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Multiplies `grad` by the ReLU mask of `activated` (post-activation values).
pub fn relu_backward_inplace(grad: &mut [f64], activated: &[f64]) {
    debug_assert_eq!(grad.len(), activated.len());
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (y_val, &x_val) in y.iter_mut().zip(x) {
        *y_val += alpha * x_val;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
