//! Closed-form upper bounds on `H(n, p, σ)` with all constants set to 1.
//! `log x` is `max(1, log2 x)` throughout.

fn lg(x: f64) -> f64 {
    x.log2().max(1.0)
}

/// Matrix multiplication: `n / p^{2/3} + σ log p`.
pub fn matmul(n: usize, p: usize, sigma: f64) -> f64 {
    let (n, p) = (n as f64, p as f64);
    n / p.powf(2.0 / 3.0) + sigma * lg(p)
}

/// Space-efficient matrix multiplication: `n / √p + σ √p`.
pub fn matmul_space(n: usize, p: usize, sigma: f64) -> f64 {
    let (n, p) = (n as f64, p as f64);
    n / p.sqrt() + sigma * p.sqrt()
}

/// FFT: `(n/p + σ) log n / log(n/p)`.
pub fn fft(n: usize, p: usize, sigma: f64) -> f64 {
    let (n, p) = (n as f64, p as f64);
    (n / p + sigma) * lg(n) / lg(n / p)
}

/// Sorting: `(n/p + σ) (log n / log(n/p))^{log_{3/2} 4}`.
pub fn sort(n: usize, p: usize, sigma: f64) -> f64 {
    let (n, p) = (n as f64, p as f64);
    let e = 4f64.ln() / 1.5f64.ln();
    (n / p + sigma) * (lg(n) / lg(n / p)).powf(e)
}

/// 1-D stencil with `σ = 0`: `n 4^{√log n}`.
pub fn stencil_1d(n: usize) -> f64 {
    let n = n as f64;
    n * 4f64.powf(lg(n).sqrt())
}

/// 2-D stencil with `σ = 0`: `n^2 / √p · 8^{√log n}`.
pub fn stencil_2d(n: usize, p: usize) -> f64 {
    let (n, p) = (n as f64, p as f64);
    n * n / p.sqrt() * 8f64.powf(lg(n).sqrt())
}

/// Broadcast: `max{2, σ} log_{max{2, σ}} p`.
pub fn broadcast(p: usize, sigma: f64) -> f64 {
    let b = sigma.max(2.0);
    b * (p as f64).log2().max(0.0) / b.log2()
}

/// The bound for a problem id, if one is known.
pub fn for_problem(id: &str, n: usize, p: usize, sigma: f64) -> Option<f64> {
    Some(match id {
        "matmul" => matmul(n, p, sigma),
        "matmul_space_efficient" => matmul_space(n, p, sigma),
        "fft" => fft(n, p, sigma),
        "columnsort" => sort(n, p, sigma),
        "stencil_1d" => stencil_1d(n),
        "stencil_2d" => stencil_2d(n, p),
        "broadcast_aware" | "broadcast_oblivious" => broadcast(p, sigma),
        _ => return None,
    })
}
