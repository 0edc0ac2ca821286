//! Householder QR for small dense row-major matrices.

/// Reduced QR of an `m x n` row-major matrix with `m >= n`.
/// Returns `(q, r)` with `q` of shape `m x n` and `r` of shape `n x n`.
pub fn householder_qr(a: &[f64], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= n, "expected a tall or square matrix, got {m}x{n}");
    assert_eq!(a.len(), m * n);
    let mut r = a.to_vec();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|i| r[i * n + k]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2 = v.iter().map(|x| x * x).sum::<f64>();
        if vnorm2 == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * r[i * n + j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                r[i * n + j] -= f * v[i - k];
            }
        }
        let scale = (2.0 / vnorm2).sqrt();
        v.iter_mut().for_each(|x| *x *= scale);
        reflectors.push(v);
    }
    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of the identity.
    let mut q = vec![0.0; m * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    for k in (0..n).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * q[i * n + j]).sum();
            for i in k..m {
                q[i * n + j] -= dot * v[i - k];
            }
        }
    }
    let mut r_top = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            r_top[i * n + j] = r[i * n + j];
        }
    }
    (q, r_top)
}
