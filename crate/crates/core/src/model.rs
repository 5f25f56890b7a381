//! Network description and the single-excitation system Hamiltonian.
//!
//! The Hilbert space is ordered as `ground, site 1, ..., site N, trap`, so
//! site `i` (1-based) sits at index `i`. Ground and trap are reachable only
//! through dissipative channels; the Hamiltonian never touches them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::UnitSystem;

pub type Operator = DMatrix<Complex64>;

/// Dipole constant in eV·nm³ giving 80 meV at 1 nm and 10 meV at 2 nm.
pub const DEFAULT_DIPOLE_CONSTANT: f64 = 0.08;
pub const DEFAULT_SITE_ENERGY: f64 = 2.0;
pub const DEFAULT_LIFETIME_NS: f64 = 10.0;
pub const DEFAULT_TEMPERATURE: f64 = 300.0;
pub const DEFAULT_PHONON_COUPLING: f64 = 0.01;
pub const DEFAULT_TRAP_RATE: f64 = 0.001;
pub const DEFAULT_INJECTION_RATE: f64 = 0.0001;
pub const DEFAULT_CUTOFF: f64 = 0.1;

const MIN_SEPARATION_NM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpectralKind {
    /// Super-Ohmic with Gaussian cutoff and thermal occupation.
    J1,
    /// Flat, zero temperature (emission only).
    J2,
    /// Flat, infinite temperature (site-basis pure dephasing).
    J3,
}

impl std::str::FromStr for SpectralKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "J1" => Ok(SpectralKind::J1),
            "J2" => Ok(SpectralKind::J2),
            "J3" => Ok(SpectralKind::J3),
            other => Err(Error::InvalidConfig(format!("unknown spectral kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for SpectralKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Spherical coordinates relative to site 1.
///
/// `theta` is the polar angle from +z, `phi` the azimuth from +x.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spherical {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    /// On-site energy in eV.
    pub energy: f64,
    /// Recombination lifetime in ns.
    pub lifetime: f64,
    pub position: Spherical,
}

impl SiteSpec {
    pub fn new(energy: f64, lifetime: f64, position: Spherical) -> Self {
        Self {
            energy,
            lifetime,
            position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub sites: Vec<SiteSpec>,
    /// Dipole constant in eV·nm³.
    #[serde(rename = "J", default = "default_j")]
    pub dipole_constant: f64,
    #[serde(default = "default_trap")]
    pub gamma_trap: f64,
    #[serde(default)]
    pub gamma_inj: f64,
    #[serde(default = "default_lambda")]
    pub lambda_ph: f64,
    #[serde(rename = "T_ph", default = "default_temperature")]
    pub t_ph: f64,
    #[serde(default = "default_kind")]
    pub spectral_kind: SpectralKind,
    #[serde(default = "default_cutoff")]
    pub omega_c: f64,
    #[serde(default = "default_source")]
    pub source_index: usize,
    #[serde(default)]
    pub sink_index: Option<usize>,
}

fn default_j() -> f64 {
    DEFAULT_DIPOLE_CONSTANT
}
fn default_trap() -> f64 {
    DEFAULT_TRAP_RATE
}
fn default_lambda() -> f64 {
    DEFAULT_PHONON_COUPLING
}
fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_kind() -> SpectralKind {
    SpectralKind::J1
}
fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}
fn default_source() -> usize {
    1
}

impl NetworkConfig {
    /// A network with default transport parameters and the given site
    /// positions (Cartesian, nm). Positions are shifted so site 1 is at the
    /// origin.
    pub fn from_positions(positions: &[[f64; 3]]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one site".into()));
        }
        let origin = positions[0];
        let sites = positions
            .iter()
            .map(|p| {
                let rel = [p[0] - origin[0], p[1] - origin[1], p[2] - origin[2]];
                SiteSpec::new(DEFAULT_SITE_ENERGY, DEFAULT_LIFETIME_NS, from_cartesian(rel))
            })
            .collect::<Vec<_>>();
        let cfg = Self {
            n_sites: sites.len(),
            sites,
            dipole_constant: DEFAULT_DIPOLE_CONSTANT,
            gamma_trap: DEFAULT_TRAP_RATE,
            gamma_inj: 0.0,
            lambda_ph: DEFAULT_PHONON_COUPLING,
            t_ph: DEFAULT_TEMPERATURE,
            spectral_kind: SpectralKind::J1,
            omega_c: DEFAULT_CUTOFF,
            source_index: 1,
            sink_index: Some(positions.len()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Degenerate linear chain along +x with the given nearest-neighbour
    /// spacing.
    pub fn chain(n: usize, spacing_nm: f64) -> Result<Self> {
        let positions = (0..n)
            .map(|i| [i as f64 * spacing_nm, 0.0, 0.0])
            .collect::<Vec<_>>();
        Self::from_positions(&positions)
    }

    /// Degenerate chain of `n` sites spanning a fixed source-sink distance.
    pub fn chain_spanning(n: usize, source_sink_nm: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig("spanning chain needs two sites".into()));
        }
        Self::chain(n, source_sink_nm / (n - 1) as f64)
    }

    /// Planar square in the xy plane with the sink diagonally opposite the
    /// source.
    pub fn square(side_nm: f64) -> Result<Self> {
        Self::from_positions(&[
            [0.0, 0.0, 0.0],
            [side_nm, 0.0, 0.0],
            [0.0, side_nm, 0.0],
            [side_nm, side_nm, 0.0],
        ])
    }

    pub fn with_spectrum(mut self, kind: SpectralKind) -> Self {
        self.spectral_kind = kind;
        self
    }

    pub fn with_phonon_coupling(mut self, lambda_ph: f64) -> Self {
        self.lambda_ph = lambda_ph;
        self
    }

    pub fn with_injection(mut self, gamma_inj: f64) -> Self {
        self.gamma_inj = gamma_inj;
        self
    }

    pub fn source(&self) -> usize {
        self.source_index
    }

    pub fn sink(&self) -> usize {
        self.sink_index.unwrap_or(self.n_sites)
    }

    /// Fill in defaulted fields so the config serializes fully resolved.
    pub fn resolved(mut self) -> Self {
        self.sink_index = Some(self.sink());
        self
    }

    pub fn hilbert(&self) -> HilbertIndex {
        HilbertIndex::new(self.n_sites)
    }

    pub fn cartesian_positions(&self) -> Vec<[f64; 3]> {
        self.sites.iter().map(|s| to_cartesian(&s.position)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_sites == 0 {
            return bad("N must be at least 1".into());
        }
        if self.sites.len() != self.n_sites {
            return bad(format!("N = {} but {} sites given", self.n_sites, self.sites.len()));
        }
        for (i, s) in self.sites.iter().enumerate() {
            let idx = i + 1;
            if !(s.energy > 0.0 && s.energy.is_finite()) {
                return bad(format!("site {idx}: energy must be positive"));
            }
            if !(s.lifetime > 0.0) {
                return bad(format!("site {idx}: lifetime must be positive"));
            }
            let p = s.position;
            if !(p.r.is_finite() && p.theta.is_finite() && p.phi.is_finite()) {
                return bad(format!("site {idx}: non-finite position"));
            }
            if idx == 1 && p.r != 0.0 {
                return bad("site 1 must sit at the origin (r = 0)".into());
            }
            if idx > 1 && !(p.r > 0.0) {
                return bad(format!("site {idx}: r must be positive"));
            }
        }
        let rates = [
            ("J", self.dipole_constant),
            ("gamma_trap", self.gamma_trap),
            ("gamma_inj", self.gamma_inj),
            ("lambda_ph", self.lambda_ph),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if self.spectral_kind == SpectralKind::J1 {
            if !(self.omega_c > 0.0) {
                return bad("J1 requires omega_c > 0".into());
            }
            if !(self.t_ph > 0.0) {
                return bad("J1 requires T_ph > 0".into());
            }
        } else if !(self.t_ph >= 0.0) {
            return bad("T_ph must be non-negative".into());
        }
        let in_range = |i: usize| (1..=self.n_sites).contains(&i);
        if !in_range(self.source_index) {
            return bad(format!("source_index {} out of range", self.source_index));
        }
        if !in_range(self.sink()) {
            return bad(format!("sink_index {} out of range", self.sink()));
        }
        Ok(())
    }
}

/// Basis ordering `ground, sites 1..=N, trap`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertIndex {
    n_sites: usize,
}

impl HilbertIndex {
    pub fn new(n_sites: usize) -> Self {
        Self { n_sites }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.n_sites + 2
    }

    pub fn ground(&self) -> usize {
        0
    }

    /// Index of 1-based site `i`.
    pub fn site(&self, i: usize) -> usize {
        debug_assert!((1..=self.n_sites).contains(&i));
        i
    }

    pub fn trap(&self) -> usize {
        self.n_sites + 1
    }

    pub fn sites(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_sites
    }
}

pub fn to_cartesian(p: &Spherical) -> [f64; 3] {
    let (st, ct) = p.theta.sin_cos();
    let (sp, cp) = p.phi.sin_cos();
    [p.r * st * cp, p.r * st * sp, p.r * ct]
}

pub fn from_cartesian(v: [f64; 3]) -> Spherical {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if r == 0.0 {
        return Spherical::default();
    }
    Spherical {
        r,
        theta: (v[2] / r).clamp(-1.0, 1.0).acos(),
        phi: v[1].atan2(v[0]),
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Isotropic dipolar hopping `J / |r_i - r_j|^3` (eV for J in eV·nm³).
pub fn dipole_coupling(pos_i: &[f64; 3], pos_j: &[f64; 3], j: f64) -> Result<f64> {
    let d = distance(pos_i, pos_j);
    if d < MIN_SEPARATION_NM {
        return Err(Error::DegenerateGeometry(0, 0));
    }
    Ok(j / (d * d * d))
}

fn pairwise_couplings(config: &NetworkConfig) -> Result<Vec<(usize, usize, f64)>> {
    let pos = config.cartesian_positions();
    let mut out = Vec::with_capacity(pos.len() * pos.len().saturating_sub(1) / 2);
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            let v = dipole_coupling(&pos[i], &pos[j], config.dipole_constant)
                .map_err(|_| Error::DegenerateGeometry(i + 1, j + 1))?;
            out.push((i, j, v));
        }
    }
    Ok(out)
}

/// Hamiltonian in eV.
pub fn build_hamiltonian(config: &NetworkConfig) -> Result<Operator> {
    build_hamiltonian_in(config, &UnitSystem::ev())
}

/// Hamiltonian in the internal energy unit of `units`.
pub fn build_hamiltonian_in(config: &NetworkConfig, units: &UnitSystem) -> Result<Operator> {
    config.validate()?;
    let hs = config.hilbert();
    let mut h = Operator::zeros(hs.dim(), hs.dim());
    for (i, s) in config.sites.iter().enumerate() {
        let k = hs.site(i + 1);
        h[(k, k)] = Complex64::new(units.energy(s.energy), 0.0);
    }
    for (i, j, v) in pairwise_couplings(config)? {
        let (a, b) = (hs.site(i + 1), hs.site(j + 1));
        let v = Complex64::new(units.energy(v), 0.0);
        h[(a, b)] = v;
        h[(b, a)] = v;
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingStats {
    /// Mean |V| over nearest-neighbour pairs, eV.
    pub mean: f64,
    pub max: f64,
}

/// Coupling statistics over nearest-neighbour pairs, where each site's
/// neighbour is its closest other site and duplicate pairs count once.
pub fn nn_coupling_stats(config: &NetworkConfig) -> Result<CouplingStats> {
    if config.n_sites < 2 {
        return Err(Error::InvalidConfig("coupling stats need at least two sites".into()));
    }
    let pos = config.cartesian_positions();
    let mut pairs = std::collections::BTreeSet::new();
    for i in 0..pos.len() {
        let nearest = (0..pos.len())
            .filter(|&j| j != i)
            .min_by(|&a, &b| distance(&pos[i], &pos[a]).total_cmp(&distance(&pos[i], &pos[b])))
            .expect("at least two sites");
        pairs.insert((i.min(nearest), i.max(nearest)));
    }
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for &(i, j) in &pairs {
        let v = dipole_coupling(&pos[i], &pos[j], config.dipole_constant)
            .map_err(|_| Error::DegenerateGeometry(i + 1, j + 1))?
            .abs();
        sum += v;
        max = max.max(v);
    }
    Ok(CouplingStats {
        mean: sum / pairs.len() as f64,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn max_abs(m: &Operator) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn polar_and_equatorial_axes() {
        let p = to_cartesian(&Spherical { r: 1.0, theta: 0.0, phi: 1.234 });
        assert_abs_diff_eq!(p[0], 0.0);
        assert_abs_diff_eq!(p[1], 0.0);
        assert_abs_diff_eq!(p[2], 1.0);
        let q = to_cartesian(&Spherical { r: 2.0, theta: FRAC_PI_2, phi: 0.0 });
        assert_abs_diff_eq!(q[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q[1], 0.0);
        assert_abs_diff_eq!(q[2], 0.0, epsilon = 1e-15);
        assert_eq!(to_cartesian(&Spherical::default()), [0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn cartesian_round_trip(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
            prop_assume!(x.abs() + y.abs() + z.abs() > 1e-3);
            let back = to_cartesian(&from_cartesian([x, y, z]));
            for (a, b) in back.iter().zip([x, y, z]) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn hamiltonian_is_rotation_invariant(
            a in 0.0f64..2.0 * PI, b in 0.0f64..PI, c in 0.0f64..2.0 * PI,
            seed_pos in proptest::collection::vec(-3.0f64..3.0, 9),
        ) {
            let mut pos = vec![[0.0; 3]];
            for k in 0..3 {
                pos.push([seed_pos[3 * k], seed_pos[3 * k + 1], seed_pos[3 * k + 2]]);
            }
            prop_assume!(pos.iter().enumerate().all(|(i, p)| pos[i + 1..].iter().all(|q| distance(p, q) > 0.3)));
            // Z-Y-Z Euler rotation
            let rz = |t: f64| [[t.cos(), -t.sin(), 0.0], [t.sin(), t.cos(), 0.0], [0.0, 0.0, 1.0]];
            let ry = |t: f64| [[t.cos(), 0.0, t.sin()], [0.0, 1.0, 0.0], [-t.sin(), 0.0, t.cos()]];
            let mul = |m: [[f64; 3]; 3], v: [f64; 3]| {
                [0, 1, 2].map(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
            };
            let rotated: Vec<_> = pos.iter().map(|&p| mul(rz(a), mul(ry(b), mul(rz(c), p)))).collect();
            let h0 = build_hamiltonian(&NetworkConfig::from_positions(&pos).unwrap()).unwrap();
            let h1 = build_hamiltonian(&NetworkConfig::from_positions(&rotated).unwrap()).unwrap();
            prop_assert!(max_abs(&(&h0 - h1)) < 1e-12 * max_abs(&h0));
        }
    }

    #[test]
    fn coupling_follows_cubic_law() {
        let o = [0.0; 3];
        let v1 = dipole_coupling(&o, &[1.0, 0.0, 0.0], 0.08).unwrap();
        let v2 = dipole_coupling(&o, &[2.0, 0.0, 0.0], 0.08).unwrap();
        assert_abs_diff_eq!(v1, 0.08, epsilon = 1e-15);
        assert_abs_diff_eq!(v2, 0.01, epsilon = 1e-15);
        assert_eq!(v1 / v2, 8.0);
        assert!(matches!(
            dipole_coupling(&o, &o, 0.08),
            Err(Error::DegenerateGeometry(..))
        ));
    }

    #[test]
    fn single_site_hamiltonian() {
        let h = build_hamiltonian(&NetworkConfig::chain(1, 1.0).unwrap()).unwrap();
        assert_eq!(h.shape(), (3, 3));
        assert_eq!(h[(1, 1)], Complex64::new(2.0, 0.0));
        let nonzero = h.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn chain_hamiltonian_structure() {
        let cfg = NetworkConfig::chain(4, 3.0).unwrap();
        let h = build_hamiltonian(&cfg).unwrap();
        let hs = cfg.hilbert();
        for i in hs.sites() {
            assert_eq!(h[(i, i)].re, 2.0);
        }
        let nn = h[(1, 2)].re;
        assert_abs_diff_eq!(nn, 0.08 / 27.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(2, 3)].re, nn, epsilon = 1e-16);
        assert_abs_diff_eq!(h[(3, 4)].re, nn, epsilon = 1e-16);
        assert_abs_diff_eq!(h[(1, 3)].re, nn / 8.0, epsilon = 1e-16);
        assert_abs_diff_eq!(max_abs(&(&h - h.adjoint())), 0.0);
        for k in 0..hs.dim() {
            for &edge in &[hs.ground(), hs.trap()] {
                assert_eq!(h[(edge, k)].norm(), 0.0);
                assert_eq!(h[(k, edge)].norm(), 0.0);
            }
        }
    }

    #[test]
    fn coincident_sites_rejected() {
        let cfg = NetworkConfig::from_positions(&[[0.0; 3], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        // validation passes (r > 0), the Hamiltonian build fails
        let err = build_hamiltonian(&cfg.unwrap()).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry(2, 3)));
    }

    #[test]
    fn nn_stats() {
        let s = nn_coupling_stats(&NetworkConfig::chain(4, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(s.mean, 0.08, epsilon = 1e-14);
        let s = nn_coupling_stats(&NetworkConfig::chain(4, 2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(s.mean, 0.01, epsilon = 1e-14);
        let pair = NetworkConfig::chain(2, 1.7).unwrap();
        let s = nn_coupling_stats(&pair).unwrap();
        assert_abs_diff_eq!(s.mean, 0.08 / 1.7f64.powi(3), epsilon = 1e-15);
        assert_eq!(s.mean, s.max);
    }

    #[test]
    fn config_json_round_trip_and_unknown_keys() {
        let cfg = NetworkConfig::square(1.0).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"N\":4") && text.contains("\"T_ph\"") && text.contains("\"J\""));
        let back: NetworkConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["bogus"] = 1.into();
        assert!(serde_json::from_value::<NetworkConfig>(v).is_err());
    }

    #[test]
    fn validation_errors() {
        let mut cfg = NetworkConfig::chain(3, 1.0).unwrap();
        cfg.sites[1].energy = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::chain(3, 1.0).unwrap();
        cfg.omega_c = 0.0;
        assert!(cfg.validate().is_err());
        cfg.spectral_kind = SpectralKind::J3;
        assert!(cfg.validate().is_ok());
        cfg.sink_index = Some(7);
        assert!(cfg.validate().is_err());
    }
}
