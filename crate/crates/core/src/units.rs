//! Unit bookkeeping.
//!
//! Configurations are always written in eV, ns, nm and K. Internally every
//! energy is divided by [`UnitSystem::energy_unit_ev`] and time is measured
//! in ħ per internal energy unit, so the generator is dimensionless.

use serde::{Deserialize, Serialize};

/// Reduced Planck constant in eV·s.
pub const HBAR_EV_S: f64 = 6.582119569e-16;
/// Boltzmann constant in eV/K.
pub const KB_EV_PER_K: f64 = 8.617333262e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub hbar_ev_s: f64,
    /// Size of the internal energy unit in eV (1 for eV, 1e-3 for meV).
    pub energy_unit_ev: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::ev()
    }
}

impl UnitSystem {
    pub fn ev() -> Self {
        Self {
            hbar_ev_s: HBAR_EV_S,
            energy_unit_ev: 1.0,
        }
    }

    pub fn mev() -> Self {
        Self {
            hbar_ev_s: HBAR_EV_S,
            energy_unit_ev: 1e-3,
        }
    }

    /// Energy in eV to internal units.
    pub fn energy(&self, ev: f64) -> f64 {
        ev / self.energy_unit_ev
    }

    pub fn energy_to_ev(&self, internal: f64) -> f64 {
        internal * self.energy_unit_ev
    }

    /// Boltzmann constant in internal energy units per kelvin.
    pub fn kb(&self) -> f64 {
        KB_EV_PER_K / self.energy_unit_ev
    }

    /// Length of one internal time unit in ns.
    pub fn time_unit_ns(&self) -> f64 {
        self.hbar_ev_s / self.energy_unit_ev * 1e9
    }

    pub fn ns_to_internal(&self, ns: f64) -> f64 {
        ns / self.time_unit_ns()
    }

    pub fn internal_to_ns(&self, t: f64) -> f64 {
        t * self.time_unit_ns()
    }

    /// Lifetime in ns to a decay rate in internal energy units.
    pub fn lifetime_to_rate(&self, tau_ns: f64) -> f64 {
        1.0 / self.ns_to_internal(tau_ns)
    }

    pub fn rate_to_lifetime(&self, rate: f64) -> f64 {
        self.internal_to_ns(1.0 / rate)
    }

    /// Rate in internal energy units to a rate per ns.
    pub fn rate_per_ns(&self, rate: f64) -> f64 {
        rate / self.time_unit_ns()
    }
}
