//! Central finite differences, used as independent oracles for the analytic
//! derivatives.

pub fn central_gradient<const N: usize>(f: impl Fn(&[f64; N]) -> f64, x: &[f64; N], h: f64) -> [f64; N] {
    let mut g = [0.0; N];
    for i in 0..N {
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

pub fn central_hessian<const N: usize>(f: impl Fn(&[f64; N]) -> f64, x: &[f64; N], h: f64) -> [[f64; N]; N] {
    let mut hess = [[0.0; N]; N];
    let f0 = f(x);
    for i in 0..N {
        for j in i..N {
            let v = if i == j {
                let mut xp = *x;
                let mut xm = *x;
                xp[i] += h;
                xm[i] -= h;
                (f(&xp) - 2.0 * f0 + f(&xm)) / (h * h)
            } else {
                let shifted = |si: f64, sj: f64| {
                    let mut y = *x;
                    y[i] += si * h;
                    y[j] += sj * h;
                    f(&y)
                };
                (shifted(1.0, 1.0) - shifted(1.0, -1.0) - shifted(-1.0, 1.0) + shifted(-1.0, -1.0))
                    / (4.0 * h * h)
            };
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Second derivative of a scalar function by the three-point stencil.
pub fn second_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Richardson extrapolation to `h → 0` of samples `values[k] = F(h0 / 2^k)`
/// assuming an expansion in integer powers of `h`. Returns the tableau's
/// final diagonal entry and the difference to the previous one.
pub fn richardson(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mut t: Vec<Vec<f64>> = vec![values.to_vec()];
    for m in 1..n {
        let prev = &t[m - 1];
        let factor = 2f64.powi(m as i32);
        let row: Vec<f64> = (0..prev.len() - 1)
            .map(|k| (factor * prev[k + 1] - prev[k]) / (factor - 1.0))
            .collect();
        t.push(row);
    }
    let best = t[n - 1][0];
    let previous = if n >= 2 { t[n - 2][1] } else { best };
    (best, (best - previous).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_recovers_polynomial_limit() {
        let f = |h: f64| 2.0 + 3.0 * h - 5.0 * h * h + h * h * h;
        let vals: Vec<f64> = (0..6).map(|k| f(0.1 / 2f64.powi(k))).collect();
        let (v, _) = richardson(&vals);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hessian_of_quadratic() {
        let f = |x: &[f64; 2]| 3.0 * x[0] * x[0] + x[0] * x[1] - 2.0 * x[1] * x[1];
        let h = central_hessian(f, &[0.3, -0.2], 1e-4);
        assert!((h[0][0] - 6.0).abs() < 1e-6);
        assert!((h[0][1] - 1.0).abs() < 1e-6);
        assert!((h[1][1] + 4.0).abs() < 1e-6);
    }
}
