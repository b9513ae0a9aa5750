/// Central-difference gradient `(f(w+ε) − f(w−ε)) / 2ε` of a scalar
/// function, one coordinate at a time.
pub fn finite_diff_grad<F>(scalar_fn: F, params: &[f64], eps: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut w = params.to_vec();
    (0..w.len())
        .map(|i| {
            let orig = w[i];
            w[i] = orig + eps;
            let plus = scalar_fn(&w);
            w[i] = orig - eps;
            let minus = scalar_fn(&w);
            w[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}
