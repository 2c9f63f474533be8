//! Closed-form ℓr scaling predictions for minimum-ℓp interpolators.
//!
//! Every `≍` relation is evaluated with its hidden constant set to 1, so the
//! values are meaningful for slopes, plateaus and orderings, not for levels.
//! Powers are combined in log space to stay finite at large `q`.

pub mod corollary;

use log::warn;
use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{gen_target, lr_norm, pow_sum, DesignSpec, TargetSpec};
use crate::solver::conjugate_exponent;

/// Width of the crossover band: `n ∈ [n★/3, 3n★]`.
pub const CROSSOVER_FACTOR: f64 = 3.0;

/// `m_t = E|Z|^t = 2^{t/2} Γ((t+1)/2) / √π`.
pub fn gaussian_abs_moment(t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::DomainError(format!("moment order t = {t} must be positive")));
    }
    Ok(ln_abs_moment(t).exp())
}

fn ln_abs_moment(t: f64) -> f64 {
    0.5 * t * std::f64::consts::LN_2 + libm::lgamma(0.5 * (t + 1.0)) - 0.5 * std::f64::consts::PI.ln()
}

/// `r★ = 2(p − 1)`.
pub fn r_threshold(p: f64) -> Result<f64> {
    conjugate_exponent(p)?;
    Ok(2.0 * (p - 1.0))
}

/// Scalar summaries of w★ that enter the predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WStarSummary {
    /// `W_q = Σ_{j∈S} |w★_j|^q`.
    pub w_q: f64,
    /// `τ_s² = ‖w★‖² + σ²`.
    pub tau_s_sq: f64,
    /// `‖w★‖_{(q−1)r}`.
    pub norm_qm1r: f64,
    pub l2: f64,
    pub s: usize,
    /// Common magnitude for spike and flat targets.
    pub a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    /// `(d − s)/n`.
    pub kappa_bulk: f64,
    pub sigma: f64,
    pub w_star_summary: WStarSummary,
    /// `Some(κ)` when `d` grows as `κn`; used for slopes of the unified bound.
    pub design_kappa: Option<f64>,
    /// Weight of the `O(τ^q(s n^{q/2} + s^{1+q/2}))` remainder in the ray scale.
    pub remainder_weight: f64,
}

impl TheoryInputs {
    /// Summaries from an explicit w★ whose support is its nonzero entries.
    #[allow(clippy::too_many_arguments)]
    pub fn from_w_star(w_star: ArrayView1<'_, f64>, n: usize, d: usize, sigma: f64, p: f64, r: f64, a: Option<f64>, design_kappa: Option<f64>) -> Result<Self> {
        let q = conjugate_exponent(p)?;
        if !(r > 0.0) {
            return Err(Error::DomainError(format!("r = {r} must be positive")));
        }
        if !(1.0..=p).contains(&r) {
            warn!("r = {r} lies outside [1, p = {p}]");
        }
        let s = w_star.iter().filter(|&&v| v != 0.0).count();
        let l2 = lr_norm(w_star, 2.0);
        let summary = WStarSummary {
            w_q: pow_sum(w_star, q),
            tau_s_sq: l2 * l2 + sigma * sigma,
            norm_qm1r: lr_norm(w_star, (q - 1.0) * r),
            l2,
            s,
            a,
        };
        if n == 0 {
            return Err(Error::DomainError("n must be at least 1".into()));
        }
        Ok(Self {
            p,
            q,
            r,
            n,
            d,
            s,
            kappa_bulk: d.saturating_sub(s) as f64 / n as f64,
            sigma,
            w_star_summary: summary,
            design_kappa,
            remainder_weight: 1.0,
        })
    }

    pub fn from_target(target: &TargetSpec, design: &DesignSpec, sigma: f64, p: f64, r: f64, n: usize) -> Result<Self> {
        let d = design.resolve_d(n)?;
        let w = gen_target(target, target.support_size())?;
        Self::from_w_star(w.view(), n, d, sigma, p, r, target.magnitude(), design.kappa())
    }

    /// Same target and exponents at a different `(n, d)`.
    pub fn at(&self, n: usize, d: usize) -> Self {
        Self { n, d, kappa_bulk: d.saturating_sub(self.s) as f64 / n as f64, ..self.clone() }
    }

    pub fn tau_s(&self) -> f64 {
        self.w_star_summary.tau_s_sq.sqrt()
    }

    pub fn r_star(&self) -> f64 {
        2.0 * (self.p - 1.0)
    }

    fn is_boundary(&self) -> bool {
        self.q <= 2.0
    }

    /// `d` at a continuous sample size, following the design.
    fn d_at(&self, n: f64) -> f64 {
        match self.design_kappa {
            Some(k) => k * n,
            None => self.d as f64,
        }
    }

    /// `d` at an integer sample size: the stored `d` at the stored `n`.
    fn d_at_or_fixed(&self, n: usize) -> f64 {
        if n == self.n {
            self.d as f64
        } else {
            self.d_at(n as f64)
        }
    }
}

/// `n★` and whether `p = 2` made it infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NStar {
    pub value: f64,
    pub boundary: bool,
}

/// `n★ = (κ_bulk τ_s^q / W_q)^{2/(q−2)}`; `+∞` with `boundary = true` at `p = 2`.
pub fn transition_n_star(inputs: &TheoryInputs) -> NStar {
    if inputs.is_boundary() {
        return NStar { value: f64::INFINITY, boundary: true };
    }
    let q = inputs.q;
    let ln = inputs.kappa_bulk.ln() + 0.5 * q * inputs.w_star_summary.tau_s_sq.ln() - inputs.w_star_summary.w_q.ln();
    NStar { value: (2.0 / (q - 2.0) * ln).exp(), boundary: false }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn ln_or_neg_inf(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `ln t★` at continuous `n` and `d`.
fn ln_t_star(inputs: &TheoryInputs, n: f64, d: f64) -> f64 {
    let q = inputs.q;
    let s = inputs.s as f64;
    let tau_sq = inputs.w_star_summary.tau_s_sq;
    let ln_tau_q = 0.5 * q * tau_sq.ln();
    let ln_n = n.ln();
    let spike = q * ln_n + ln_or_neg_inf(inputs.w_star_summary.w_q);
    let bulk = ln_or_neg_inf(d - s) + ln_abs_moment(q) + ln_tau_q + 0.5 * q * ln_n;
    let remainder = ln_or_neg_inf(inputs.remainder_weight)
        + ln_tau_q
        + log_sum_exp(&[ln_or_neg_inf(s) + 0.5 * q * ln_n, (1.0 + 0.5 * q) * ln_or_neg_inf(s)]);
    let ln_den = log_sum_exp(&[spike, bulk, remainder]);
    (tau_sq.ln() + ln_n - ln_den) / (q - 1.0)
}

/// Predicted ray scale `t★`.
pub fn ray_scale_prediction(inputs: &TheoryInputs, n: usize) -> f64 {
    ln_t_star(inputs, n as f64, inputs.d_at_or_fixed(n)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    BulkDominated,
    SpikeDominated,
    Crossover,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::BulkDominated => "bulk",
            Regime::SpikeDominated => "spike",
            Regime::Crossover => "crossover",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "bulk" => Some(Regime::BulkDominated),
            "spike" => Some(Regime::SpikeDominated),
            "crossover" => Some(Regime::Crossover),
            _ => None,
        }
    }
}

/// Bulk below `n★/3`, spike above `3n★`, crossover in between.
pub fn classify_regime(n_star: f64, n: f64) -> Regime {
    if n < n_star / CROSSOVER_FACTOR {
        Regime::BulkDominated
    } else if n > CROSSOVER_FACTOR * n_star {
        Regime::SpikeDominated
    } else {
        Regime::Crossover
    }
}

pub fn regime_prediction(inputs: &TheoryInputs, n: usize) -> Regime {
    classify_regime(transition_n_star(inputs).value, n as f64)
}

/// The three competing contributions to `‖ŵ‖_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    pub spike_main: f64,
    pub bulk: f64,
    pub spike_remainder: f64,
}

impl Terms {
    pub fn max(&self) -> f64 {
        self.spike_main.max(self.bulk).max(self.spike_remainder)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub regime: Regime,
    pub n_star: f64,
    pub r_star: f64,
    /// Predicted `d ln‖ŵ‖_r / d ln n`.
    pub slope: f64,
    pub terms: Terms,
}

fn remainder_exponent(inputs: &TheoryInputs) -> f64 {
    (1.0 / inputs.r).max(0.5 * (inputs.q - 1.0))
}

fn ln_unified_terms(inputs: &TheoryInputs, n: f64, d: f64) -> [f64; 3] {
    let q = inputs.q;
    let ln_t = ln_t_star(inputs, n, d);
    let ln_n = n.ln();
    let ln_ray = (q - 1.0) * (ln_t + 0.5 * inputs.w_star_summary.tau_s_sq.ln() + 0.5 * ln_n);
    let spike_main = (q - 1.0) * (ln_t + ln_n + ln_or_neg_inf(inputs.w_star_summary.norm_qm1r));
    let bulk = ln_or_neg_inf(d - inputs.s as f64) / inputs.r + ln_ray;
    let rem = remainder_exponent(inputs) * ln_or_neg_inf(inputs.s as f64) + ln_ray;
    [spike_main, bulk, rem]
}

fn ln_max3(t: &[f64; 3]) -> f64 {
    t[0].max(t[1]).max(t[2])
}

/// Three-term max with `t★` from [`ray_scale_prediction`].
pub fn unified_norm_prediction(inputs: &TheoryInputs, n: usize) -> Result<Prediction> {
    let nf = n as f64;
    let d = inputs.d_at_or_fixed(n);
    let lt = ln_unified_terms(inputs, nf, d);
    let h: f64 = 1e-4;
    let (lo, hi) = (nf * (-h).exp(), nf * h.exp());
    let slope = (ln_max3(&ln_unified_terms(inputs, hi, inputs.d_at(hi))) - ln_max3(&ln_unified_terms(inputs, lo, inputs.d_at(lo)))) / (2.0 * h);
    let terms = Terms { spike_main: lt[0].exp(), bulk: lt[1].exp(), spike_remainder: lt[2].exp() };
    let n_star = transition_n_star(inputs).value;
    Ok(Prediction {
        value: terms.max(),
        regime: classify_regime(n_star, nf),
        n_star,
        r_star: inputs.r_star(),
        slope,
        terms,
    })
}

/// Spike-dominated closed form; the growth branch applies for `r ≤ r★`.
pub fn spike_dominated_prediction(inputs: &TheoryInputs, n: usize) -> Result<Prediction> {
    if inputs.is_boundary() {
        return Err(Error::BoundaryP);
    }
    let q = inputs.q;
    let ws = &inputs.w_star_summary;
    let r_star = inputs.r_star();
    let (value, slope) = if inputs.r <= r_star {
        let e = 1.0 / inputs.r - 1.0 / (2.0 * (inputs.p - 1.0));
        let ln = 0.5 * (q + 1.0) * ws.tau_s_sq.ln() - ws.w_q.ln() + e * (n as f64).ln();
        (ln.exp(), e)
    } else {
        let ln = ws.tau_s_sq.ln() - ws.w_q.ln() + (q - 1.0) * ws.norm_qm1r.ln();
        (ln.exp(), 0.0)
    };
    let n_star = transition_n_star(inputs).value;
    Ok(Prediction {
        value,
        regime: classify_regime(n_star, n as f64),
        n_star,
        r_star,
        slope,
        terms: Terms { spike_main: value, bulk: 0.0, spike_remainder: 0.0 },
    })
}

/// Bulk-dominated closed form: the max of three power laws in `n`.
pub fn bulk_dominated_prediction(inputs: &TheoryInputs, n: usize) -> Result<Prediction> {
    let q = inputs.q;
    let r = inputs.r;
    let ws = &inputs.w_star_summary;
    let k = inputs.kappa_bulk;
    let ln_n = (n as f64).ln();
    let ln_tau = 0.5 * ws.tau_s_sq.ln();
    let exps = [1.0 / r - 0.5, 0.5 * q - 1.0, -0.5];
    let bulk = (1.0 / r - 1.0) * k.ln() + ln_tau + exps[0] * ln_n;
    let spike = -k.ln() + (2.0 - q) * ln_tau + (q - 1.0) * ln_or_neg_inf(ws.norm_qm1r) + exps[1] * ln_n;
    let rem = -k.ln() + ln_tau + remainder_exponent(inputs) * ln_or_neg_inf(inputs.s as f64) + exps[2] * ln_n;
    let terms = Terms { spike_main: spike.exp(), bulk: bulk.exp(), spike_remainder: rem.exp() };
    let slope = if bulk >= spike && bulk >= rem {
        exps[0]
    } else if spike >= rem {
        exps[1]
    } else {
        exps[2]
    };
    let n_star = transition_n_star(inputs).value;
    Ok(Prediction {
        value: terms.max(),
        regime: classify_regime(n_star, n as f64),
        n_star,
        r_star: inputs.r_star(),
        slope,
        terms,
    })
}

/// The regime-specific formula matching `n` (unified bound in the crossover band).
pub fn regime_specific_prediction(inputs: &TheoryInputs, n: usize) -> Result<Prediction> {
    match regime_prediction(inputs, n) {
        Regime::SpikeDominated => spike_dominated_prediction(inputs, n),
        Regime::BulkDominated => bulk_dominated_prediction(inputs, n),
        Regime::Crossover => unified_norm_prediction(inputs, n),
    }
}
