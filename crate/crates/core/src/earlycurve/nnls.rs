//! Non-negative least squares (Lawson–Hanson active set).

/// Least squares on a subset of columns via Householder QR. `cols` holds
/// the full column-major matrix; only columns in `set` are used.
fn lstsq(cols: &[Vec<f64>], set: &[usize], b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let n = set.len();
    let mut a: Vec<Vec<f64>> = set.iter().map(|&j| cols[j].clone()).collect();
    let mut y = b.to_vec();
    for k in 0..n {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v = a[k][k..].to_vec();
        v[0] -= alpha;
        let vv = v.iter().map(|x| x * x).sum::<f64>();
        if vv == 0.0 {
            continue;
        }
        let reflect = |col: &mut [f64]| {
            let d = v.iter().zip(col.iter()).map(|(p, q)| p * q).sum::<f64>() * 2.0 / vv;
            for (c, p) in col.iter_mut().zip(&v) {
                *c -= d * p;
            }
        };
        for col in a.iter_mut().skip(k) {
            reflect(&mut col[k..]);
        }
        reflect(&mut y[k..]);
    }
    let mut x = vec![0.0; n];
    for k in (0..n.min(m)).rev() {
        let mut s = y[k];
        for j in k + 1..n {
            s -= a[j][k] * x[j];
        }
        x[k] = if a[k][k].abs() > 1e-300 { s / a[k][k] } else { 0.0 };
    }
    x
}

/// Minimises `‖Ax − b‖` subject to `x ≥ 0`. `cols` is `A` column by column.
pub fn nnls(cols: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = cols.len();
    let scale = cols
        .iter()
        .flat_map(|c| c.iter())
        .chain(b)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let tol = 1e-12 * scale * scale * b.len() as f64;
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let residual_grad = |x: &[f64]| -> Vec<f64> {
        let r: Vec<f64> = (0..b.len())
            .map(|i| b[i] - (0..n).map(|j| cols[j][i] * x[j]).sum::<f64>())
            .collect();
        cols.iter().map(|c| c.iter().zip(&r).map(|(a, r)| a * r).sum()).collect()
    };
    for _ in 0..3 * n + 10 {
        let w = residual_grad(&x);
        let Some(t) = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]))
        else {
            break;
        };
        passive[t] = true;
        loop {
            let set: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = lstsq(cols, &set, b);
            if z.iter().all(|&v| v > 0.0) {
                for (k, &j) in set.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            // Step back towards the feasible region until a variable hits zero.
            let mut alpha = f64::INFINITY;
            for (k, &j) in set.iter().enumerate() {
                if z[k] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[k]));
                }
            }
            for (k, &j) in set.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
                if x[j] <= 1e-15 * scale {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}
