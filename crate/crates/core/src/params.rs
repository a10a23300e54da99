use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Model rates. `theta` is always derived from `c` and `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    c: f64,
    lambda: f64,
}

/// Position relative to the phase transition at `theta = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Regime {
    /// `theta < 1`: the block count comes down from infinity and `∞` is recurrent.
    Subcritical,
    /// `theta == 1`: boundary case; `∞` is absorbing.
    Critical,
    /// `theta > 1`: `∞` is absorbing.
    Supercritical,
}

impl Regime {
    /// Whether `∞` is an absorbing state (`theta >= 1`).
    pub fn is_absorbing(self) -> bool {
        !matches!(self, Regime::Subcritical)
    }
}

impl ModelParams {
    /// Coalescence rate per pair `c > 0` and fragmentation rate per block
    /// `lambda >= 0`. `lambda = 0` is pure Kingman and is accepted so that
    /// the no-fragmentation limit can be simulated.
    pub fn new(c: f64, lambda: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::domain(format!("coalescence rate c must be finite and > 0, got {c}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::domain(format!("fragmentation rate lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { c, lambda })
    }

    /// Pure Kingman coalescent (`lambda = 0`).
    pub fn kingman(c: f64) -> Result<Self> {
        Self::new(c, 0.0)
    }

    #[inline]
    pub fn c(&self) -> f64 {
        self.c
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        2.0 * self.lambda / self.c
    }

    pub fn regime(&self) -> Regime {
        let theta = self.theta();
        if theta < 1.0 {
            Regime::Subcritical
        } else if theta == 1.0 {
            Regime::Critical
        } else {
            Regime::Supercritical
        }
    }

    /// Rate of the transition `j -> j - 1`: `c * C(j, 2)`.
    #[inline]
    pub fn coalescence_rate(&self, j: u64) -> f64 {
        let j = j as f64;
        0.5 * self.c * j * (j - 1.0)
    }

    /// Rate of the shatter transition `j -> ∞`: `lambda * j`.
    #[inline]
    pub fn fragmentation_rate(&self, j: u64) -> f64 {
        self.lambda * j as f64
    }

    #[inline]
    pub fn total_rate(&self, j: u64) -> f64 {
        self.coalescence_rate(j) + self.fragmentation_rate(j)
    }

    /// Errors unless `0 < theta < 1`.
    pub fn require_subcritical(&self) -> Result<f64> {
        let theta = self.theta();
        if theta > 0.0 && theta < 1.0 {
            Ok(theta)
        } else {
            Err(Error::Regime { theta })
        }
    }

    /// Errors unless `lambda > 0`.
    pub fn require_fragmentation(&self) -> Result<()> {
        if self.lambda > 0.0 {
            Ok(())
        } else {
            Err(Error::domain("operation requires lambda > 0"))
        }
    }
}

impl Serialize for ModelParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("ModelParams", 3)?;
        s.serialize_field("c", &self.c)?;
        s.serialize_field("lambda", &self.lambda)?;
        s.serialize_field("theta", &self.theta())?;
        s.end()
    }
}
