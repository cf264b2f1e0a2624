use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive range `lo, lo + step, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl StepRange {
    pub const fn new(lo: f64, hi: f64, step: f64) -> Self {
        Self { lo, hi, step }
    }

    /// A range holding the single value `x`.
    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x, step: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.step.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite range {self}")));
        }
        if self.step <= 0.0 {
            return Err(Error::InvalidGrid(format!("step must be positive in {self}")));
        }
        if self.hi < self.lo {
            return Err(Error::InvalidGrid(format!("hi < lo in {self}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        // 1e-9 absorbs representation error in (hi - lo) / step.
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Points are computed by index, never by accumulation; the final point
    /// is snapped to `hi` when the step divides the range.
    pub fn points(&self) -> Vec<f64> {
        let n = self.len();
        let exact = ((self.hi - self.lo) / self.step - (n - 1) as f64).abs() < 1e-9;
        (0..n)
            .map(|i| {
                if i + 1 == n && exact {
                    self.hi
                } else {
                    self.lo + i as f64 * self.step
                }
            })
            .collect()
    }
}

impl fmt::Display for StepRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

impl FromStr for StepRange {
    type Err = Error;

    /// Parses `lo:hi:step`, or a bare number for a single point.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidGrid(format!("cannot parse `{t}` in range `{s}`")))
        };
        let range = match parts.as_slice() {
            [x] => Self::point(num(x)?),
            [lo, hi, step] => Self::new(num(lo)?, num(hi)?, num(step)?),
            _ => {
                return Err(Error::InvalidGrid(format!(
                    "expected `lo:hi:step` or a single value, got `{s}`"
                )))
            }
        };
        range.validate()?;
        Ok(range)
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linspace {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Linspace {
    pub const fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !(self.lo.is_finite() && self.hi.is_finite()) || self.hi < self.lo {
            return Err(Error::InvalidGrid(format!(
                "invalid axis {}:{}:{}",
                self.lo, self.hi, self.n
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let span = self.hi - self.lo;
        let last = (self.n - 1) as f64;
        (0..self.n)
            .map(|i| {
                if i + 1 == self.n {
                    self.hi
                } else {
                    self.lo + span * i as f64 / last
                }
            })
            .collect()
    }
}

impl FromStr for Linspace {
    type Err = Error;

    /// Parses `lo:hi:n`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidGrid(format!("expected `lo:hi:n`, got `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(bad());
        };
        let axis = Self::new(
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
            n.trim().parse().map_err(|_| bad())?,
        );
        axis.validate()?;
        Ok(axis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_range_hits_both_ends() {
        let pts = StepRange::new(0.1, 0.99, 0.01).points();
        assert_eq!(pts.len(), 90);
        assert_eq!(pts[0], 0.1);
        assert_eq!(*pts.last().unwrap(), 0.99);
        let v = StepRange::new(0.05, 1.0, 0.01).points();
        assert_eq!(v.len(), 96);
        assert_eq!(*v.last().unwrap(), 1.0);
        assert!(v.iter().all(|&x| x <= 1.0));
    }

    #[test]
    fn step_range_single_point_and_parse() {
        assert_eq!(StepRange::point(0.4).points(), vec![0.4]);
        assert_eq!("0.4".parse::<StepRange>().unwrap().points(), vec![0.4]);
        let r: StepRange = "0.1:0.5:0.1".parse().unwrap();
        assert_eq!(r.len(), 5);
        assert!("0.1:0.5".parse::<StepRange>().is_err());
        assert!("0.1:0.5:0".parse::<StepRange>().is_err());
        assert!("a:b:c".parse::<StepRange>().is_err());
        assert!("0.5:0.1:0.1".parse::<StepRange>().is_err());
    }

    #[test]
    fn linspace_endpoints() {
        let pts = Linspace::new(0.02, 1.0, 200).points();
        assert_eq!(pts.len(), 200);
        assert_eq!(pts[0], 0.02);
        assert_eq!(pts[199], 1.0);
        assert_eq!(Linspace::new(0.3, 0.3, 1).points(), vec![0.3]);
        assert!("0:1:0".parse::<Linspace>().is_err());
    }
}
