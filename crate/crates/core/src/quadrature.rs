//! Quadrature primitives: composite Gauss-Legendre panels and a 4th-order
//! cumulative rule for equally spaced samples.

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // evaluate P_n(x) and P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        // recompute derivative at the converged node for the weight
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = pk;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of `f` over [a, b] with `panels`
/// subintervals and an `order`-point rule per panel.
pub fn integrate_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Cumulative integral `I[k] = ∫_{x_0}^{x_k} f` of equally spaced samples,
/// 4th-order accurate (3-panel one-sided rules at the ends, a centered
/// 4-point rule in the interior). `I[0] = 0`.
pub fn cumulative_integral4(f: &[f64], h: f64) -> Vec<f64> {
    let m = f.len();
    let mut out = vec![0.0; m];
    if m < 2 {
        return out;
    }
    if m < 4 {
        // fall back to trapezoid for very short runs
        for i in 1..m {
            out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
        }
        return out;
    }
    out[1] = h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
    for i in 1..m - 2 {
        out[i + 1] = out[i] + h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]);
    }
    out[m - 1] = out[m - 2] + h / 24.0 * (f[m - 4] - 5.0 * f[m - 3] + 19.0 * f[m - 2] + 9.0 * f[m - 1]);
    out
}
