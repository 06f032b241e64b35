//! Central finite-difference weights of arbitrary even order.

/// Weights `w_k`, `k = 1..=m`, of the order-`2m` central first derivative:
/// `u'(x) ≈ Σ_k w_k (u(x + kΔ) − u(x − kΔ)) / Δ`.
pub fn first_derivative(order: usize) -> Vec<f64> {
    let m = half_width(order);
    (1..=m)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * ratio(m, k) / k as f64
        })
        .collect()
}

/// Weights `w_0, w_1, …, w_m` of the order-`2m` central second derivative:
/// `u''(x) ≈ (w_0 u(x) + Σ_k w_k (u(x + kΔ) + u(x − kΔ))) / Δ²`.
pub fn second_derivative(order: usize) -> Vec<f64> {
    let m = half_width(order);
    let mut w = vec![0.0; m + 1];
    for k in 1..=m {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        w[k] = 2.0 * sign * ratio(m, k) / (k * k) as f64;
    }
    w[0] = -2.0 * w[1..].iter().sum::<f64>();
    w
}

pub fn half_width(order: usize) -> usize {
    assert!(order >= 2 && order.is_multiple_of(2), "stencil order must be even and >= 2, got {order}");
    order / 2
}

/// `(m!)² / ((m − k)! (m + k)!)`
fn ratio(m: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for t in 1..=k {
        r *= (m + 1 - t) as f64 / (m + t) as f64;
    }
    r
}
