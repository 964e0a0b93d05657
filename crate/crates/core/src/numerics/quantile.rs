use crate::error::{Error, Result};

/// An ordered batch of finite real values.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    values: Vec<f64>,
}

impl SampleBatch {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite sample value {bad}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Result<f64> {
        if self.values.is_empty() {
            return Err(Error::EmptyBatch);
        }
        Ok(self.values.iter().sum::<f64>() / self.values.len() as f64)
    }

    /// Values in ascending order.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Type-7 quantile of already sorted values.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile level {q} outside [0, 1]")));
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Empirical quantile with linear interpolation between closest ranks
/// (the "type 7" convention).
pub fn empirical_quantile(s: &SampleBatch, q: f64) -> Result<f64> {
    quantile_sorted(&s.sorted(), q)
}
