use ndarray::Array1;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::rng::rng_from_seed;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetKind {
    SingleSpike,
    FlatSupport,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Signs {
    #[default]
    AllPositive,
    Rademacher(u64),
}

/// Ground-truth vector supported on its first `s` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub kind: TargetKind,
    pub s: usize,
    /// Per-coordinate magnitude. Defaults to 1 for a single spike and 1/√s for a flat support.
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub custom_values: Option<Vec<f64>>,
    #[serde(default)]
    pub signs: Signs,
}

impl TargetSpec {
    pub fn single_spike() -> Self {
        Self { kind: TargetKind::SingleSpike, s: 1, a: None, custom_values: None, signs: Signs::AllPositive }
    }

    pub fn flat(s: usize) -> Self {
        Self { kind: TargetKind::FlatSupport, s, a: None, custom_values: None, signs: Signs::AllPositive }
    }

    pub fn custom(values: Vec<f64>) -> Self {
        Self { kind: TargetKind::Custom, s: values.len(), a: None, custom_values: Some(values), signs: Signs::AllPositive }
    }

    pub fn support_size(&self) -> usize {
        match self.kind {
            TargetKind::SingleSpike => 1,
            _ => self.s,
        }
    }

    /// Magnitude of each support coordinate; `None` for custom targets.
    pub fn magnitude(&self) -> Option<f64> {
        match self.kind {
            TargetKind::SingleSpike => Some(self.a.unwrap_or(1.0)),
            TargetKind::FlatSupport => Some(self.a.unwrap_or(1.0 / (self.s as f64).sqrt())),
            TargetKind::Custom => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.support_size() == 0 {
            return Err(Error::SpecInvalid("support size s must be at least 1".into()));
        }
        if let Some(a) = self.a {
            if !a.is_finite() {
                return Err(Error::SpecInvalid(format!("magnitude a = {a} is not finite")));
            }
        }
        if self.kind == TargetKind::Custom {
            match &self.custom_values {
                Some(v) if v.len() == self.s => {}
                Some(v) => {
                    return Err(Error::SpecInvalid(format!(
                        "custom target has {} values but s = {}",
                        v.len(),
                        self.s
                    )))
                }
                None => return Err(Error::SpecInvalid("custom target without values".into())),
            }
        }
        Ok(())
    }

    /// Short label used in CSV records.
    pub fn label(&self) -> &'static str {
        match self.kind {
            TargetKind::SingleSpike => "single_spike",
            TargetKind::FlatSupport => "flat",
            TargetKind::Custom => "custom",
        }
    }
}

/// Build w★ of length `d`; nonzeros sit on coordinates `0..s`.
pub fn gen_target(spec: &TargetSpec, d: usize) -> Result<Array1<f64>> {
    spec.validate()?;
    let s = spec.support_size();
    if s > d {
        return Err(Error::SpecInvalid(format!("support size {s} exceeds dimension {d}")));
    }
    let mut w = Array1::zeros(d);
    match (&spec.custom_values, spec.magnitude()) {
        (_, Some(a)) => w.slice_mut(ndarray::s![..s]).fill(a),
        (Some(v), None) => w.slice_mut(ndarray::s![..s]).assign(&ndarray::ArrayView1::from(v.as_slice())),
        (None, None) => unreachable!("validated above"),
    }
    if let Signs::Rademacher(seed) = spec.signs {
        let mut rng = rng_from_seed(seed);
        for wi in w.iter_mut().take(s) {
            if rng.random::<bool>() {
                *wi = -*wi;
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_spike_is_e1() {
        let w = gen_target(&TargetSpec::single_spike(), 4).unwrap();
        assert_eq!(w.to_vec(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn flat_default_has_unit_l2() {
        let w = gen_target(&TargetSpec::flat(4), 8).unwrap();
        assert_eq!(w.to_vec(), vec![0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0]);
        let w = gen_target(&TargetSpec::flat(50), 100).unwrap();
        assert!((w.dot(&w) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn flat_with_one_coordinate_is_a_spike() {
        let spec = TargetSpec { a: Some(1.0), ..TargetSpec::flat(1) };
        assert_eq!(gen_target(&spec, 3).unwrap().to_vec(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn spec_errors() {
        assert!(matches!(gen_target(&TargetSpec::flat(5), 4), Err(Error::SpecInvalid(_))));
        let mut c = TargetSpec::custom(vec![1.0, 2.0]);
        c.s = 3;
        assert!(matches!(gen_target(&c, 10), Err(Error::SpecInvalid(_))));
    }

    #[test]
    fn rademacher_signs_keep_magnitudes() {
        let spec = TargetSpec { signs: Signs::Rademacher(3), ..TargetSpec::flat(16) };
        let w = gen_target(&spec, 20).unwrap();
        assert!(w.iter().take(16).all(|v| (v.abs() - 0.25).abs() < 1e-15));
        assert!(w.iter().take(16).any(|&v| v < 0.0));
        assert_eq!(w, gen_target(&spec, 20).unwrap());
    }
}
