use crate::scalar::Scalar;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes come from Newton iteration on the Legendre polynomial, started at
/// the Chebyshev-like approximation; accurate to machine precision for the
/// small orders used here.
pub fn gauss_legendre<S: Scalar>(n: usize) -> (Vec<S>, Vec<S>) {
    assert!(n >= 1);
    let mut nodes = vec![S::zero(); n];
    let mut weights = vec![S::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = S::lit(-x);
        nodes[n - 1 - i] = S::lit(x);
        weights[i] = S::lit(w);
        weights[n - 1 - i] = S::lit(w);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
