//! Phonon spectral densities, the non-secular Bloch-Redfield tensor, the
//! Lindblad channels, and assembly of the full Liouvillian.
//!
//! Superoperators act on column-major vectorized density matrices (see
//! [`crate::linalg::vectorize`]).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SuperOperator, I, ONE};
use crate::model::{build_hamiltonian_in, HilbertIndex, NetworkConfig, Operator, SpectralKind};
use crate::units::UnitSystem;

/// Rate prefactor: the real part of the one-sided bath correlation transform
/// is `π · S(ω)`.
pub const RATE_PREFACTOR: f64 = std::f64::consts::PI;

/// Pure-dephasing rate per unit λ_ph produced by the flat infinite-temperature
/// spectrum: `γ = 2π λ_ph` for each site projector.
pub const DEPHASING_PER_COUPLING: f64 = 2.0 * RATE_PREFACTOR;

/// Bohr frequencies smaller than this fraction of the spectral radius are
/// treated as exact degeneracies.
const DEGENERACY_REL_TOL: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-10;

/// Phonon noise kernel. All energies are in one consistent unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub kind: SpectralKind,
    pub lambda_ph: f64,
    pub omega_c: f64,
    /// `k_B · T_ph` in the same energy unit.
    pub thermal_energy: f64,
}

impl SpectralDensity {
    pub fn new(kind: SpectralKind, lambda_ph: f64, omega_c: f64, thermal_energy: f64) -> Result<Self> {
        if kind == SpectralKind::J1 {
            if !(thermal_energy > 0.0) {
                return Err(Error::InvalidConfig("J1 requires T_ph > 0".into()));
            }
            if !(omega_c > 0.0) {
                return Err(Error::InvalidConfig("J1 requires omega_c > 0".into()));
            }
        }
        if !(lambda_ph >= 0.0) {
            return Err(Error::InvalidConfig("lambda_ph must be non-negative".into()));
        }
        Ok(Self {
            kind,
            lambda_ph,
            omega_c,
            thermal_energy,
        })
    }

    pub fn from_config(config: &NetworkConfig, units: &UnitSystem) -> Result<Self> {
        Self::new(
            config.spectral_kind,
            units.energy(config.lambda_ph),
            units.energy(config.omega_c),
            units.kb() * config.t_ph,
        )
    }

    /// `S(ω)`; positive frequencies are emission.
    pub fn kernel(&self, omega: f64) -> f64 {
        let step = if omega > 0.0 { 1.0 } else { 0.0 };
        match self.kind {
            SpectralKind::J3 => self.lambda_ph,
            SpectralKind::J2 => self.lambda_ph * step,
            SpectralKind::J1 => {
                if omega == 0.0 {
                    return 0.0;
                }
                let x = omega.abs() / self.omega_c;
                let occupation = 1.0 / (omega.abs() / self.thermal_energy).exp_m1();
                self.lambda_ph * x * x * x * (-x * x).exp() * (occupation + step)
            }
        }
    }

    /// One-sided transition rate `π · S(ω)`.
    pub fn rate(&self, omega: f64) -> f64 {
        RATE_PREFACTOR * self.kernel(omega)
    }
}

pub fn noise_kernel(sd: &SpectralDensity, omega: f64) -> f64 {
    sd.kernel(omega)
}

/// Site projectors `|i⟩⟨i|`, one per site.
pub fn coupling_operators(hs: &HilbertIndex) -> Vec<Operator> {
    hs.sites().map(|i| linalg::projector(hs.dim(), i)).collect()
}

/// Superoperator of `-i[H, ·]`.
pub fn commutator(h: &Operator) -> SuperOperator {
    (linalg::left(h) - linalg::right(h)) * (-I)
}

/// Superoperator of `L ρ L† − ½{L†L, ρ}`.
pub fn lindblad_dissipator(l: &Operator) -> SuperOperator {
    let ldl = l.adjoint() * l;
    linalg::sandwich(l, &l.adjoint()) - (linalg::left(&ldl) + linalg::right(&ldl)) * Complex64::new(0.5, 0.0)
}

/// Non-secular Bloch-Redfield tensor without Lamb shifts.
///
/// For each coupling operator `A` the eigenbasis matrix
/// `X_ab = Γ(ε_b − ε_a) A_ab` is rotated back to the site basis, and
/// `R ρ = Σ (X ρ A − A X ρ) + h.c.`, which equals the usual sum over Bohr
/// frequency pairs with the imaginary (principal value) parts dropped.
pub fn redfield_tensor(h: &Operator, coupling_ops: &[Operator], sd: &SpectralDensity) -> Result<SuperOperator> {
    let d = h.nrows();
    let eig = linalg::hermitian_eigen(h, HERMITIAN_TOL)?;
    let mut out = SuperOperator::zeros(d * d, d * d);
    if sd.lambda_ph == 0.0 {
        return Ok(out);
    }
    let scale = eig.values.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let tol = DEGENERACY_REL_TOL * scale.max(f64::MIN_POSITIVE);
    let mut rates = Operator::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let mut omega = eig.values[b] - eig.values[a];
            if omega.abs() <= tol {
                omega = 0.0;
            }
            rates[(a, b)] = ONE * sd.rate(omega);
        }
    }
    let u = &eig.vectors;
    let identity = Operator::identity(d, d);
    for a_op in coupling_ops {
        let a_eig = u.adjoint() * a_op * u;
        let x_eig = a_eig.component_mul(&rates);
        let x = u * x_eig * u.adjoint();
        let ax = a_op * &x;
        let xda = x.adjoint() * a_op;
        out += linalg::sandwich(&x, a_op);
        out -= linalg::sandwich(&ax, &identity);
        out += linalg::sandwich(a_op, &x.adjoint());
        out -= linalg::sandwich(&identity, &xda);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Single exciton, absorbing trap.
    Transient,
    /// Continuous injection from ground into the source, extraction recycled
    /// back to ground.
    Steady,
}

/// Which terms of the master equation are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channels {
    pub redfield: bool,
    pub trap: bool,
    pub decay: bool,
    pub injection: bool,
}

impl Channels {
    pub fn all() -> Self {
        Self {
            redfield: true,
            trap: true,
            decay: true,
            injection: true,
        }
    }

    pub fn coherent_only() -> Self {
        Self {
            redfield: false,
            trap: false,
            decay: false,
            injection: false,
        }
    }
}

impl Default for Channels {
    fn default() -> Self {
        Self::all()
    }
}

/// Liouvillian acting on vectorized density matrices, with the physical
/// rates needed to turn populations into exit fluxes.
#[derive(Debug, Clone)]
pub struct Generator {
    pub matrix: SuperOperator,
    pub hilbert: HilbertIndex,
    pub units: UnitSystem,
    pub mode: Mode,
    pub channels: Channels,
    pub source: usize,
    pub sink: usize,
    /// Trap (or recycling) extraction rate, internal energy units.
    pub trap_rate: f64,
    /// Per-site recombination rates, internal energy units.
    pub decay_rates: Vec<f64>,
    pub injection_rate: f64,
    /// Spread of the site-block eigenvalues, internal energy units.
    pub max_gap: f64,
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.hilbert.dim()
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        linalg::unvectorize(&(&self.matrix * linalg::vectorize(rho)), self.dim())
    }

    /// Largest deviation of `Σ_a G[aa, ·]` from zero.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim();
        (0..d * d)
            .map(|c| {
                (0..d)
                    .map(|a| self.matrix[(linalg::vec_index(a, a, d), c)])
                    .sum::<num_complex::Complex64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Trap extraction rate per ns.
    pub fn trap_rate_per_ns(&self) -> f64 {
        self.units.rate_per_ns(self.trap_rate)
    }

    /// Recombination rates per ns, one per site.
    pub fn decay_rates_per_ns(&self) -> Vec<f64> {
        self.decay_rates.iter().map(|&r| self.units.rate_per_ns(r)).collect()
    }
}

pub fn build_generator(config: &NetworkConfig, mode: Mode) -> Result<Generator> {
    build_generator_with(config, mode, Channels::all(), &UnitSystem::ev())
}

pub fn build_generator_with(
    config: &NetworkConfig,
    mode: Mode,
    channels: Channels,
    units: &UnitSystem,
) -> Result<Generator> {
    config.validate()?;
    let hs = config.hilbert();
    let d = hs.dim();
    let h = build_hamiltonian_in(config, units)?;
    let mut matrix = commutator(&h);

    if channels.redfield {
        let sd = SpectralDensity::from_config(config, units)?;
        matrix += redfield_tensor(&h, &coupling_operators(&hs), &sd)?;
    }

    let source = hs.site(config.source());
    let sink = hs.site(config.sink());
    let trap_rate = if channels.trap { units.energy(config.gamma_trap) } else { 0.0 };
    if trap_rate > 0.0 {
        let target = match mode {
            Mode::Transient => hs.trap(),
            Mode::Steady => hs.ground(),
        };
        let l = linalg::transition(d, target, sink) * ONE.scale(trap_rate.sqrt());
        matrix += lindblad_dissipator(&l);
    }

    let decay_rates: Vec<f64> = config
        .sites
        .iter()
        .map(|s| if channels.decay { units.lifetime_to_rate(s.lifetime) } else { 0.0 })
        .collect();
    for (i, &rate) in decay_rates.iter().enumerate() {
        if rate > 0.0 {
            let l = linalg::transition(d, hs.ground(), hs.site(i + 1)) * ONE.scale(rate.sqrt());
            matrix += lindblad_dissipator(&l);
        }
    }

    let injection_rate = match mode {
        Mode::Steady if channels.injection => units.energy(config.gamma_inj),
        _ => 0.0,
    };
    if injection_rate > 0.0 {
        let l = linalg::transition(d, source, hs.ground()) * ONE.scale(injection_rate.sqrt());
        matrix += lindblad_dissipator(&l);
    }

    let site_block = h.view((1, 1), (hs.n_sites(), hs.n_sites())).into_owned();
    let eig = linalg::hermitian_eigen(&site_block, HERMITIAN_TOL)?;
    let max_gap = eig.values.last().unwrap_or(&0.0) - eig.values.first().unwrap_or(&0.0);

    let gen = Generator {
        matrix,
        hilbert: hs,
        units: *units,
        mode,
        channels,
        source,
        sink,
        trap_rate,
        decay_rates,
        injection_rate,
        max_gap,
    };
    if !gen.is_finite() {
        return Err(Error::NonFiniteGenerator);
    }
    Ok(gen)
}
