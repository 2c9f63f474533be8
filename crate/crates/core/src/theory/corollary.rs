//! Specializations to a single spike `a·e₁` and a flat target `a` on `s` coordinates.

/// Spike-dominated level for a flat target with `r ≤ r★` (the `n`-free prefactor
/// multiplies `n^{1/r − 1/(2(p−1))}`).
pub fn flat_growth(s: usize, a: f64, sigma: f64, q: f64, p: f64, r: f64, n: f64) -> f64 {
    let s = s as f64;
    let tau_sq = s * a * a + sigma * sigma;
    tau_sq.powf(0.5 * (q + 1.0)) / (s * a.abs().powf(q)) * n.powf(1.0 / r - 1.0 / (2.0 * (p - 1.0)))
}

/// Spike-dominated plateau for a flat target with `r > r★`: `s^{1/r−1}(sa²+σ²)/|a|`.
pub fn flat_plateau(s: usize, a: f64, sigma: f64, r: f64) -> f64 {
    let sf = s as f64;
    sf.powf(1.0 / r - 1.0) * (sf * a * a + sigma * sigma) / a.abs()
}

/// Noiseless flat plateau `s^{1/r}|a|`.
pub fn flat_noiseless_plateau(s: usize, a: f64, r: f64) -> f64 {
    (s as f64).powf(1.0 / r) * a.abs()
}

/// Single-spike plateau `τ² = a² + σ²` in units of `|a|` (`τ²` for `a = 1`).
pub fn spike_plateau(a: f64, sigma: f64) -> f64 {
    flat_plateau(1, a, sigma, 1.0)
}

/// Single-spike bulk law at fixed `d`: `τ (d−1)^{1/r−1} n^{1/2}`.
pub fn spike_bulk(d: usize, sigma: f64, r: f64, n: f64) -> f64 {
    (1.0 + sigma * sigma).sqrt() * ((d - 1) as f64).powf(1.0 / r - 1.0) * n.sqrt()
}

/// `n★ = (κ_bulk (sa²+σ²)^{q/2} / (s|a|^q))^{2/(q−2)}`.
pub fn flat_n_star(kappa_bulk: f64, s: usize, a: f64, sigma: f64, q: f64) -> f64 {
    let sf = s as f64;
    let tau_q = (sf * a * a + sigma * sigma).powf(0.5 * q);
    (kappa_bulk * tau_q / (sf * a.abs().powf(q))).powf(2.0 / (q - 2.0))
}
