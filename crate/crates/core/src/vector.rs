//! Small dense-vector helpers. Everything in the crate is desk-scale (a
//! handful of goods), so plain slices beat a linear-algebra dependency.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|x| x * k).collect()
}

/// `y += k * x`
pub fn axpy(y: &mut [f64], k: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += k * xi;
    }
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(a: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in a.iter().enumerate().skip(1) {
        if x > a[best] {
            best = j;
        }
    }
    best
}

/// Numerically stable softmax of `u / temperature`.
pub fn softmax(u: &[f64], temperature: f64) -> Vec<f64> {
    let m = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = u.iter().map(|x| ((x - m) / temperature).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// `temperature * ln Σ exp(u_j / temperature)`, computed stably.
pub fn log_sum_exp(u: &[f64], temperature: f64) -> f64 {
    let m = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = u.iter().map(|x| ((x - m) / temperature).exp()).sum();
    m + temperature * z.ln()
}

/// Shannon entropy in nats with `0 ln(1/0) = 0`.
pub fn entropy(x: &[f64]) -> f64 {
    x.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum()
}
