//! Physical constants of the emitter array and the regulator of the
//! reciprocal-space lattice sums.
//!
//! Lengths are measured in units of the transition wavelength and rates in
//! units of the single-atom linewidth by default (`lambda = 1`, `gamma0 = 1`).
//! Energies are detunings from the bare transition frequency, so the large
//! optical frequency never enters the arithmetic.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Transition wavelength.
    pub lambda: f64,
    /// Single-atom free-space linewidth; the unit of energy and rate.
    pub gamma0: f64,
    /// Zeeman shift in units of `gamma0`. The sign sets the field direction.
    pub mu_b: f64,
    /// Nearest-neighbour distance, same length unit as `lambda`.
    pub spacing: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            gamma0: 1.0,
            mu_b: 12.0,
            spacing: 0.05,
        }
    }
}

impl PhysicalParams {
    pub fn new(lambda: f64, gamma0: f64, mu_b: f64, spacing: f64) -> Result<Self> {
        let p = Self {
            lambda,
            gamma0,
            mu_b,
            spacing,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters in natural units (`lambda = gamma0 = 1`).
    pub fn natural(mu_b: f64, spacing: f64) -> Self {
        Self {
            lambda: 1.0,
            gamma0: 1.0,
            mu_b,
            spacing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Domain(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.gamma0.is_finite() && self.gamma0 > 0.0) {
            return Err(Error::Domain(format!(
                "gamma0 must be > 0, got {}",
                self.gamma0
            )));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::Domain(format!(
                "spacing must be > 0, got {}",
                self.spacing
            )));
        }
        if !self.mu_b.is_finite() {
            return Err(Error::Domain("mu_b must be finite".into()));
        }
        Ok(())
    }

    /// Transition wavenumber `2 pi / lambda`.
    pub fn k(&self) -> f64 {
        2.0 * PI / self.lambda
    }

    /// Prefactor `3 pi gamma0 c / omega_A = 3 pi gamma0 / k` multiplying the
    /// Green's function in the coupling.
    pub fn coupling_prefactor(&self) -> f64 {
        3.0 * PI * self.gamma0 / self.k()
    }

    /// Zeeman shift as an energy.
    pub fn zeeman(&self) -> f64 {
        self.mu_b * self.gamma0
    }

    pub fn with_mu_b(mut self, mu_b: f64) -> Self {
        self.mu_b = mu_b;
        self
    }

    pub fn with_spacing(mut self, spacing: f64) -> Self {
        self.spacing = spacing;
        self
    }
}

/// Gaussian momentum regulator for the reciprocal lattice sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    /// Width of the Gaussian cut-off.
    pub a_ho: f64,
    /// Relative magnitude below which reciprocal terms are dropped.
    pub g_cutoff: f64,
}

impl RegularizationParams {
    /// Default regulator for spacing `a`: `a_ho = a / 20`, terms below
    /// `1e-12` of the running sum dropped.
    pub fn for_spacing(a: f64) -> Self {
        Self {
            a_ho: a / 20.0,
            g_cutoff: 1e-12,
        }
    }

    pub fn validate(&self, lambda: f64) -> Result<()> {
        if !(self.a_ho.is_finite() && self.a_ho > 0.0) {
            return Err(Error::Domain(format!(
                "a_ho must be > 0, got {}",
                self.a_ho
            )));
        }
        if self.a_ho >= 0.1 * lambda {
            return Err(Error::Domain(format!(
                "a_ho = {} is not small compared with lambda = {}",
                self.a_ho, lambda
            )));
        }
        if !(self.g_cutoff > 0.0 && self.g_cutoff < 1.0) {
            return Err(Error::Domain(format!(
                "g_cutoff must lie in (0, 1), got {}",
                self.g_cutoff
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumber_times_wavelength_is_two_pi() {
        for lambda in [1.0, 0.79, 2.6, 1e-3] {
            let p = PhysicalParams::new(lambda, 1.0, 0.0, 0.05 * lambda).unwrap();
            assert!((p.k() * p.lambda - 2.0 * PI).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PhysicalParams::new(-1.0, 1.0, 0.0, 0.05).is_err());
        assert!(PhysicalParams::new(1.0, 0.0, 0.0, 0.05).is_err());
        assert!(PhysicalParams::new(1.0, 1.0, 0.0, -0.05).is_err());
        assert!(PhysicalParams::new(1.0, 1.0, -12.0, 0.05).is_ok());
        let bad = RegularizationParams {
            a_ho: 0.0,
            g_cutoff: 1e-12,
        };
        assert!(bad.validate(1.0).is_err());
        let bad = RegularizationParams {
            a_ho: 0.001,
            g_cutoff: 1.0,
        };
        assert!(bad.validate(1.0).is_err());
    }
}
