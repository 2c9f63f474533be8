use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::rng::{fill_standard_normal, rng_from_seed};
use super::target::{gen_target, TargetSpec};
use crate::error::{Error, Result};
use crate::linalg::matvec;

/// How the ambient dimension follows the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DesignSpec {
    FixedD(usize),
    /// `d = ⌈κ n⌉`.
    Proportional(f64),
}

impl DesignSpec {
    pub fn resolve_d(&self, n: usize) -> Result<usize> {
        let d = match *self {
            DesignSpec::FixedD(d) => d,
            DesignSpec::Proportional(kappa) => {
                if !(kappa > 1.0) || !kappa.is_finite() {
                    return Err(Error::SpecInvalid(format!("kappa = {kappa} must exceed 1")));
                }
                // Shave one ulp-scale bit so that e.g. 1.1 * 100 resolves to 110.
                let raw = kappa * n as f64;
                (raw - raw * 1e-12).ceil() as usize
            }
        };
        if d <= n {
            return Err(Error::SpecInvalid(format!("need d > n, got d = {d}, n = {n}")));
        }
        Ok(d)
    }

    /// κ if the design is proportional.
    pub fn kappa(&self) -> Option<f64> {
        match *self {
            DesignSpec::Proportional(k) => Some(k),
            DesignSpec::FixedD(_) => None,
        }
    }
}

/// `Y = X w★ + ξ` with i.i.d. standard normal `X` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub xi: Array1<f64>,
    pub w_star: Array1<f64>,
    pub sigma: f64,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub s: usize,
}

impl ProblemInstance {
    /// Assemble an instance from explicit data (no sampling).
    pub fn from_parts(x: Array2<f64>, y: Array1<f64>, w_star: Array1<f64>, sigma: f64, s: usize) -> Result<Self> {
        let (n, d) = x.dim();
        crate::error::check_len(n, y.len())?;
        crate::error::check_len(d, w_star.len())?;
        let x = x.as_standard_layout().into_owned();
        Ok(Self { x, xi: Array1::zeros(n), y, w_star, sigma, seed: 0, n, d, s })
    }

    pub fn x_slice(&self) -> &[f64] {
        self.x.as_slice().expect("instances are stored row-major")
    }
}

/// Sample an instance. X is drawn first (row by row), then ξ.
pub fn gen_instance(target: &TargetSpec, design: &DesignSpec, sigma: f64, n: usize, seed: u64) -> Result<ProblemInstance> {
    if n == 0 {
        return Err(Error::SpecInvalid("n must be at least 1".into()));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::SpecInvalid(format!("sigma = {sigma} must be a finite nonnegative number")));
    }
    let d = design.resolve_d(n)?;
    let w_star = gen_target(target, d)?;
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; n * d];
    fill_standard_normal(&mut rng, &mut x);
    let mut xi = vec![0.0; n];
    fill_standard_normal(&mut rng, &mut xi);

    // Only the support contributes; skipping exact zeros keeps Y bit-identical to X w★.
    let support: Vec<usize> = (0..d).filter(|&j| w_star[j] != 0.0).collect();
    let mut y = vec![0.0; n];
    if support.len() * 4 < d {
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &x[i * d..(i + 1) * d];
            *yi = support.iter().map(|&j| row[j] * w_star[j]).sum();
        }
    } else {
        matvec(&x, n, d, w_star.as_slice().unwrap(), &mut y);
    }
    for (yi, &e) in y.iter_mut().zip(&xi) {
        *yi += sigma * e;
    }
    Ok(ProblemInstance {
        x: Array2::from_shape_vec((n, d), x).expect("shape matches buffer"),
        y: Array1::from_vec(y),
        xi: Array1::from_vec(xi),
        w_star,
        sigma,
        seed,
        n,
        d,
        s: target.support_size(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_spike_labels_are_first_column() {
        let inst = gen_instance(&TargetSpec::single_spike(), &DesignSpec::FixedD(10), 0.0, 3, 7).unwrap();
        for i in 0..3 {
            assert_eq!(inst.y[i], inst.x[[i, 0]]);
        }
    }

    #[test]
    fn proportional_design_resolves_d() {
        let inst = gen_instance(&TargetSpec::single_spike(), &DesignSpec::Proportional(2.5), 0.1, 100, 1).unwrap();
        assert_eq!(inst.d, 250);
        assert_eq!(DesignSpec::Proportional(1.1).resolve_d(100).unwrap(), 110);
    }

    #[test]
    fn underparameterized_is_rejected() {
        let r = gen_instance(&TargetSpec::single_spike(), &DesignSpec::FixedD(5), 0.0, 5, 1);
        assert!(matches!(r, Err(Error::SpecInvalid(_))));
        assert!(DesignSpec::Proportional(1.0).resolve_d(10).is_err());
    }

    #[test]
    fn same_seed_same_bytes() {
        let t = TargetSpec::flat(3);
        let a = gen_instance(&t, &DesignSpec::FixedD(30), 0.3, 12, 99).unwrap();
        let b = gen_instance(&t, &DesignSpec::FixedD(30), 0.3, 12, 99).unwrap();
        let bits = |v: &ProblemInstance| v.x.iter().chain(v.y.iter()).map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = gen_instance(&t, &DesignSpec::FixedD(30), 0.3, 12, 100).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn labels_follow_model() {
        let t = TargetSpec::flat(40);
        let inst = gen_instance(&t, &DesignSpec::FixedD(50), 0.2, 8, 5).unwrap();
        let pred = inst.x.dot(&inst.w_star) + &(inst.xi.clone() * 0.2);
        for (a, b) in pred.iter().zip(inst.y.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
