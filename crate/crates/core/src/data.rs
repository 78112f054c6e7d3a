use crate::error::{Error, Result};

/// An ordered real-valued sample.
///
/// `shift` records a constant that has been subtracted from every value, so
/// that fitted location estimates can be reported on the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    shift: f64,
}

impl Dataset {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidData("dataset is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("value #{i} is not finite ({})", values[i])));
        }
        Ok(Self { values, shift: 0.0 })
    }

    /// Subtracts `c` from every value and adds it to the recorded shift.
    pub fn shifted(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v - c).collect(), shift: self.shift + c }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Values on the original scale (shift added back).
    pub fn original_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v + self.shift).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Unbiased sample variance; zero for a single observation.
    pub fn variance(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }
}

impl TryFrom<Vec<f64>> for Dataset {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}
