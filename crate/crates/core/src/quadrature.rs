//! Gauss–Legendre rules.

/// Nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `∫_a^b f` with an `n`-point rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    nodes.0.iter().zip(&nodes.1).map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_high_degree_polynomials() {
        for n in [1, 2, 5, 12, 33] {
            let q = gauss_legendre(n);
            assert!((q.1.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let p = 2 * n - 1;
            let got = integrate(|t| t.powi(p as i32) + t.powi(p as i32 - 1), 0.0, 1.0, &q);
            let want = 1.0 / (p + 1) as f64 + 1.0 / p as f64;
            assert!((got - want).abs() < 1e-13, "n = {n}");
        }
    }
}
