//! Fisher information of the exit-time distributions with respect to the
//! (log-)parameters of a network, and the importance profile derived from
//! its eigen-decomposition.
//!
//! Every derivative is a central difference in `ln θ` (angles stay linear).
//! All perturbed models are evaluated on the base run's time grid, extended
//! a little past completion, so integrands are compared pointwise.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, DistributionKind, EvolveOptions, TimeGrid};
use crate::environment::{build_generator_with, Channels, Mode};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen_desc;
use crate::model::NetworkConfig;
use crate::units::UnitSystem;

/// Eigenvalues below this fraction of the largest are structural zeros.
pub const NULL_THRESHOLD: f64 = 1e-10;

/// Population still in the network at the end of the shared grid above
/// which a perturbed run is rejected.
pub const UNFINISHED_MAX: f64 = 1e-2;

/// Grid points per block of the FIM quadrature.
const GRAM_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Energy,
    Lifetime,
    Position,
    Environment,
}

impl Group {
    pub fn name(&self) -> &'static str {
        match self {
            Group::Energy => "energy",
            Group::Lifetime => "lifetime",
            Group::Position => "position",
            Group::Environment => "environment",
        }
    }
}

/// Figure of merit whose sensitivity is analysed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FomKind {
    Arrival,
    Loss,
    Steady,
}

impl FomKind {
    fn distribution(self) -> Option<DistributionKind> {
        match self {
            FomKind::Arrival => Some(DistributionKind::Arrival),
            FomKind::Loss => Some(DistributionKind::Loss),
            FomKind::Steady => None,
        }
    }
}

impl std::str::FromStr for FomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arrival" => Ok(FomKind::Arrival),
            "loss" => Ok(FomKind::Loss),
            "steady" => Ok(FomKind::Steady),
            other => Err(Error::InvalidConfig(format!("unknown figure of merit {other:?}"))),
        }
    }
}

impl std::fmt::Display for FomKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FomKind::Arrival => "arrival",
            FomKind::Loss => "loss",
            FomKind::Steady => "steady",
        };
        f.write_str(s)
    }
}

/// A physical knob of a [`NetworkConfig`]. Site indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Knob {
    Energy(usize),
    Lifetime(usize),
    Radius(usize),
    Polar(usize),
    Azimuth(usize),
    TrapRate,
    PhononCoupling,
    Temperature,
}

impl Knob {
    pub fn label(&self) -> String {
        match *self {
            Knob::Energy(i) => format!("E{i}"),
            Knob::Lifetime(i) => format!("t{i}"),
            Knob::Radius(i) => format!("r1{i}"),
            Knob::Polar(i) => format!("a1{i}"),
            Knob::Azimuth(i) => format!("p1{i}"),
            Knob::TrapRate => "G_trap".into(),
            Knob::PhononCoupling => "lam".into(),
            Knob::Temperature => "T".into(),
        }
    }

    pub fn group(&self) -> Group {
        match self {
            Knob::Energy(_) => Group::Energy,
            Knob::Lifetime(_) => Group::Lifetime,
            Knob::Radius(_) | Knob::Polar(_) | Knob::Azimuth(_) => Group::Position,
            Knob::TrapRate | Knob::PhononCoupling | Knob::Temperature => Group::Environment,
        }
    }

    /// Angles are differentiated linearly, everything else in `ln θ`.
    pub fn is_log(&self) -> bool {
        !matches!(self, Knob::Polar(_) | Knob::Azimuth(_))
    }

    pub fn get(&self, c: &NetworkConfig) -> f64 {
        match *self {
            Knob::Energy(i) => c.sites[i - 1].energy,
            Knob::Lifetime(i) => c.sites[i - 1].lifetime,
            Knob::Radius(i) => c.sites[i - 1].position.r,
            Knob::Polar(i) => c.sites[i - 1].position.theta,
            Knob::Azimuth(i) => c.sites[i - 1].position.phi,
            Knob::TrapRate => c.gamma_trap,
            Knob::PhononCoupling => c.lambda_ph,
            Knob::Temperature => c.t_ph,
        }
    }

    pub fn set(&self, c: &mut NetworkConfig, v: f64) {
        match *self {
            Knob::Energy(i) => c.sites[i - 1].energy = v,
            Knob::Lifetime(i) => c.sites[i - 1].lifetime = v,
            Knob::Radius(i) => c.sites[i - 1].position.r = v,
            Knob::Polar(i) => c.sites[i - 1].position.theta = v,
            Knob::Azimuth(i) => c.sites[i - 1].position.phi = v,
            Knob::TrapRate => c.gamma_trap = v,
            Knob::PhononCoupling => c.lambda_ph = v,
            Knob::Temperature => c.t_ph = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub label: String,
    pub knob: Knob,
    pub log: bool,
    pub group: Group,
    pub value: f64,
}

/// Ordered parameter list: `E_1..E_N, τ_1..τ_N, (r, θ, φ)_{1i} for i = 2..N,
/// Γ_trap, λ_ph, T_ph`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub entries: Vec<Parameter>,
}

impl ParameterVector {
    pub fn standard(config: &NetworkConfig) -> Self {
        let n = config.n_sites;
        let mut knobs: Vec<Knob> = (1..=n).map(Knob::Energy).collect();
        knobs.extend((1..=n).map(Knob::Lifetime));
        for i in 2..=n {
            knobs.extend([Knob::Radius(i), Knob::Polar(i), Knob::Azimuth(i)]);
        }
        knobs.extend([Knob::TrapRate, Knob::PhononCoupling, Knob::Temperature]);
        Self::from_knobs(config, knobs)
    }

    pub fn from_knobs(config: &NetworkConfig, knobs: impl IntoIterator<Item = Knob>) -> Self {
        let entries = knobs
            .into_iter()
            .map(|k| Parameter {
                label: k.label(),
                knob: k,
                log: k.is_log(),
                group: k.group(),
                value: k.get(config),
            })
            .collect();
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|p| p.label.clone()).collect()
    }

    pub fn groups(&self) -> Vec<Group> {
        self.entries.iter().map(|p| p.group).collect()
    }

    /// Copy of `config` with entry `mu` moved by `h`: `θ·e^h` for log
    /// entries, `θ + h` for angles.
    pub fn perturb(&self, config: &NetworkConfig, mu: usize, h: f64) -> Result<NetworkConfig> {
        let p = self
            .entries
            .get(mu)
            .ok_or_else(|| Error::InvalidConfig(format!("parameter index {mu} out of range")))?;
        let mut out = config.clone();
        let v = p.knob.get(config);
        p.knob.set(&mut out, if p.log { v * h.exp() } else { v + h });
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FimOptions {
    /// Central-difference step in `ln θ` (radians for angles).
    pub step: f64,
    /// Grid points where `f < noise_floor · max f` are dropped from the
    /// quadrature.
    pub noise_floor: f64,
    /// Fractional extension of the shared grid past base completion.
    pub grid_extension: f64,
    pub evolve: EvolveOptions,
    pub units: UnitSystem,
    /// Smallest steady-state current (eV) accepted for scalar sensitivity.
    pub current_floor: f64,
}

impl Default for FimOptions {
    fn default() -> Self {
        Self {
            step: 1e-4,
            noise_floor: 1e-8,
            grid_extension: 0.1,
            evolve: EvolveOptions::default(),
            units: UnitSystem::ev(),
            current_floor: 1e-20,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FimDiagnostics {
    pub step: f64,
    pub noise_floor: f64,
    pub null_threshold: f64,
    pub dt_ns: f64,
    pub grid_points: usize,
    pub completion_time_ns: f64,
    /// Half-open index ranges of grid points excluded by the noise cutoff.
    pub cut_ranges: Vec<(usize, usize)>,
    pub cut_points: usize,
    /// Probability mass of the base distribution on excluded points.
    pub cut_mass: f64,
    /// Largest `|g − gᵀ|` before symmetrisation, relative to `max |g|`.
    pub asymmetry: f64,
    /// `λ_max / λ_min` over eigenvalues above the null threshold.
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimResult {
    pub kind: FomKind,
    pub labels: Vec<String>,
    pub groups: Vec<Group>,
    pub matrix: Vec<Vec<f64>>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` belongs to `eigenvalues[i]`.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `P(θ_μ)`, summing to one.
    pub importance: Vec<f64>,
    pub diagnostics: FimDiagnostics,
}

/// `P(θ_μ) = Σ_i λ_i |ê_i · θ̂_μ|`, normalised. Negative (noise) eigenvalues
/// contribute nothing.
pub fn importance(eigenvalues: &[f64], eigenvectors: &[Vec<f64>]) -> Vec<f64> {
    let n = eigenvectors.first().map_or(0, Vec::len);
    let mut p = vec![0.0; n];
    for (lam, v) in eigenvalues.iter().zip(eigenvectors) {
        let lam = lam.max(0.0);
        for (pm, c) in p.iter_mut().zip(v) {
            *pm += lam * c.abs();
        }
    }
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    p
}

impl FimResult {
    pub fn from_matrix(
        kind: FomKind,
        labels: Vec<String>,
        groups: Vec<Group>,
        raw: &DMatrix<f64>,
        mut diagnostics: FimDiagnostics,
    ) -> Self {
        let scale = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let asym = (raw - raw.transpose()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        diagnostics.asymmetry = if scale > 0.0 { asym / scale } else { 0.0 };
        let g = (raw + raw.transpose()) * 0.5;
        let (eigenvalues, eigenvectors) = symmetric_eigen_desc(&g);
        let lmax = eigenvalues.first().copied().unwrap_or(0.0);
        let lmin = eigenvalues
            .iter()
            .copied()
            .filter(|&l| l > NULL_THRESHOLD * lmax)
            .fold(f64::INFINITY, f64::min);
        diagnostics.condition = if lmax > 0.0 { lmax / lmin } else { f64::NAN };
        diagnostics.null_threshold = NULL_THRESHOLD;
        let importance = importance(&eigenvalues, &eigenvectors);
        Self {
            kind,
            labels,
            groups,
            matrix: g.row_iter().map(|r| r.iter().copied().collect()).collect(),
            eigenvalues,
            eigenvectors,
            importance,
            diagnostics,
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.matrix.len();
        DMatrix::from_fn(n, n, |i, j| self.matrix[i][j])
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// Eigenvalues above the null threshold.
    pub fn nonzero_spectrum(&self) -> Vec<f64> {
        let lmax = self.lambda_max();
        self.eigenvalues
            .iter()
            .copied()
            .filter(|&l| l > NULL_THRESHOLD * lmax)
            .collect()
    }

    pub fn null_count(&self) -> usize {
        self.eigenvalues.len() - self.nonzero_spectrum().len()
    }

    pub fn importance_of(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.importance[i])
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// `index,eigenvalue`
    pub fn write_spectrum_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "eigenvalue"])?;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            w.write_record([i.to_string(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `label,group,importance`
    pub fn write_importance_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label", "group", "importance"])?;
        for ((l, g), p) in self.labels.iter().zip(&self.groups).zip(&self.importance) {
            w.write_record([l.as_str(), g.name(), &p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Heat-map table: `label,<labels...>`, one row per parameter.
    pub fn write_matrix_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["label".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (l, row) in self.labels.iter().zip(&self.matrix) {
            let mut rec = vec![l.clone()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shared time grid for a family of perturbed runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharedGrid {
    pub dt_ns: f64,
    pub steps: usize,
    pub completion_time_ns: f64,
}

impl SharedGrid {
    pub fn times_ns(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| k as f64 * self.dt_ns).collect()
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.dt_ns; self.steps + 1];
        w[0] *= 0.5;
        w[self.steps] *= 0.5;
        w
    }
}

fn transient_generator(config: &NetworkConfig, opts: &FimOptions) -> Result<crate::Generator> {
    build_generator_with(config, Mode::Transient, Channels::all(), &opts.units)
}

/// Base run on an automatic grid; the shared grid extends it by
/// `grid_extension` past completion.
pub fn shared_grid(config: &NetworkConfig, opts: &FimOptions) -> Result<SharedGrid> {
    let gen = transient_generator(config, opts)?;
    let evolve_opts = EvolveOptions {
        purity: false,
        ..opts.evolve
    };
    let traj = dynamics::evolve(&gen, &dynamics::initial_state(&gen), &evolve_opts)?;
    let tc = traj.completion_time_ns.ok_or_else(|| {
        Error::IntegrationFailure(format!("base model did not complete within {} ns", opts.evolve.t_max_ns))
    })?;
    let k_c = traj.len() - 1;
    let steps = ((1.0 + opts.grid_extension) * k_c as f64).ceil() as usize;
    Ok(SharedGrid {
        dt_ns: traj.dt_ns,
        steps: steps.max(1),
        completion_time_ns: tc,
    })
}

/// Exit densities of `config` on a fixed grid, one per requested kind.
pub fn densities_on_grid(
    config: &NetworkConfig,
    kinds: &[DistributionKind],
    grid: &SharedGrid,
    opts: &FimOptions,
) -> Result<Vec<Vec<f64>>> {
    let gen = transient_generator(config, opts)?;
    let evolve_opts = EvolveOptions {
        grid: TimeGrid::Fixed {
            dt_ns: grid.dt_ns,
            steps: grid.steps,
        },
        purity: false,
        ..opts.evolve
    };
    let traj = dynamics::evolve(&gen, &dynamics::initial_state(&gen), &evolve_opts)?;
    // Only the base run must complete. A perturbed model may leave a little
    // more behind at the end of the grid; its density is normalised by its
    // own exit population, so only a gross shortfall is fatal.
    let remaining = traj.remaining(traj.len() - 1);
    if remaining >= UNFINISHED_MAX {
        return Err(Error::IntegrationFailure(format!(
            "did not complete on the shared grid (remaining {remaining:e})"
        )));
    }
    if remaining >= opts.evolve.completion_tol {
        log::debug!("shared grid ends with {remaining:e} population left");
    }
    kinds
        .iter()
        .map(|&k| dynamics::distribution(&traj, &gen, k).map(|d| d.density))
        .collect()
}

/// Central-difference derivatives `∂f/∂θ̃_μ` on the shared grid. The result
/// is indexed `[kind][μ][grid point]`.
pub fn distribution_gradient(
    config: &NetworkConfig,
    params: &ParameterVector,
    kinds: &[DistributionKind],
    grid: &SharedGrid,
    opts: &FimOptions,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let h = opts.step;
    let rows: Vec<Vec<Vec<f64>>> = (0..params.len())
        .into_par_iter()
        .map(|mu| {
            let wrap = |e: Error| Error::PerturbedRun {
                index: mu,
                label: params.entries[mu].label.clone(),
                source: Box::new(e),
            };
            let plus = params.perturb(config, mu, h).map_err(wrap)?;
            let minus = params.perturb(config, mu, -h).map_err(wrap)?;
            let fp = densities_on_grid(&plus, kinds, grid, opts).map_err(wrap)?;
            let fm = densities_on_grid(&minus, kinds, grid, opts).map_err(wrap)?;
            Ok(fp
                .iter()
                .zip(&fm)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * h)).collect())
                .collect())
        })
        .collect::<Result<_>>()?;
    // transpose to [kind][mu][k]
    let mut out: Vec<Vec<Vec<f64>>> = kinds.iter().map(|_| Vec::with_capacity(rows.len())).collect();
    for row in rows {
        for (per_kind, g) in out.iter_mut().zip(row) {
            per_kind.push(g);
        }
    }
    Ok(out)
}

/// Quadrature mask: points kept by the noise cutoff.
fn keep_mask(f: &[f64], noise_floor: f64) -> Vec<bool> {
    let fmax = f.iter().cloned().fold(0.0, f64::max);
    f.iter().map(|&x| x > 0.0 && x >= noise_floor * fmax).collect()
}

/// `g_μν = ∫ (1/f) ∂_μ f ∂_ν f dt` over kept points, normalised by the kept
/// probability mass. Evaluated as the Gram matrix of the columns
/// `∂_μ f · √(w/f)`.
pub fn fim_integral_form(f: &[f64], grad: &[Vec<f64>], weights: &[f64], keep: &[bool]) -> Result<DMatrix<f64>> {
    let n = grad.len();
    let kept: Vec<usize> = (0..f.len()).filter(|&k| keep[k]).collect();
    let mass: f64 = kept.iter().map(|&k| weights[k] * f[k]).sum();
    if !(mass > 0.0) {
        return Err(Error::DistributionTooNoisy);
    }
    let mut g = DMatrix::zeros(n, n);
    for chunk in kept.chunks(GRAM_CHUNK) {
        let a = DMatrix::from_fn(chunk.len(), n, |r, mu| {
            let k = chunk[r];
            grad[mu][k] * (weights[k] / f[k] / mass).sqrt()
        });
        g += a.tr_mul(&a);
    }
    Ok(g)
}

/// `g_μν = E[∂_μ ln f ∂_ν ln f]` with weight `f dt` over kept points.
pub fn fim_expectation_form(f: &[f64], grad: &[Vec<f64>], weights: &[f64], keep: &[bool]) -> Result<DMatrix<f64>> {
    let n = grad.len();
    let mass: f64 = (0..f.len()).filter(|&k| keep[k]).map(|k| weights[k] * f[k]).sum();
    if !(mass > 0.0) {
        return Err(Error::DistributionTooNoisy);
    }
    let mut g = DMatrix::zeros(n, n);
    for k in (0..f.len()).filter(|&k| keep[k]) {
        let p = weights[k] * f[k] / mass;
        for mu in 0..n {
            let a = grad[mu][k] / f[k];
            for nu in 0..n {
                g[(mu, nu)] += p * a * (grad[nu][k] / f[k]);
            }
        }
    }
    Ok(g)
}

fn cut_ranges(keep: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &kept) in keep.iter().enumerate() {
        match (kept, start) {
            (false, None) => start = Some(k),
            (true, Some(s)) => {
                out.push((s, k));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, keep.len()));
    }
    out
}

/// FIM of the arrival or loss distribution, or the rank-one steady-current
/// sensitivity for [`FomKind::Steady`].
pub fn fim(config: &NetworkConfig, kind: FomKind, opts: &FimOptions) -> Result<FimResult> {
    let params = ParameterVector::standard(config);
    fim_with(config, &params, &[kind], opts).map(|mut v| v.remove(0))
}

/// FIMs for several figures of merit with a custom parameter list; the
/// distribution kinds share one set of perturbed evolutions.
pub fn fim_with(
    config: &NetworkConfig,
    params: &ParameterVector,
    kinds: &[FomKind],
    opts: &FimOptions,
) -> Result<Vec<FimResult>> {
    let dist_kinds: Vec<DistributionKind> = kinds.iter().filter_map(|k| k.distribution()).collect();
    let mut dist_results = Vec::new();
    if !dist_kinds.is_empty() {
        let grid = shared_grid(config, opts)?;
        let base = densities_on_grid(config, &dist_kinds, &grid, opts)?;
        let grads = distribution_gradient(config, params, &dist_kinds, &grid, opts)?;
        let weights = grid.weights();
        for ((&dk, f), grad) in dist_kinds.iter().zip(&base).zip(&grads) {
            let keep = keep_mask(f, opts.noise_floor);
            let g = fim_integral_form(f, grad, &weights, &keep)?;
            let total: f64 = weights.iter().zip(f).map(|(w, f)| w * f).sum();
            let cut: f64 = (0..f.len()).filter(|&k| !keep[k]).map(|k| weights[k] * f[k]).sum();
            let ranges = cut_ranges(&keep);
            let diag = FimDiagnostics {
                step: opts.step,
                noise_floor: opts.noise_floor,
                dt_ns: grid.dt_ns,
                grid_points: grid.steps + 1,
                completion_time_ns: grid.completion_time_ns,
                cut_points: keep.iter().filter(|&&k| !k).count(),
                cut_ranges: ranges,
                cut_mass: cut / total,
                ..Default::default()
            };
            let fk = match dk {
                DistributionKind::Arrival => FomKind::Arrival,
                DistributionKind::Loss => FomKind::Loss,
            };
            dist_results.push(FimResult::from_matrix(fk, params.labels(), params.groups(), &g, diag));
        }
    }
    let mut dist_iter = dist_results.into_iter();
    kinds
        .iter()
        .map(|&k| match k {
            FomKind::Steady => scalar_sensitivity_with(config, params, opts),
            _ => Ok(dist_iter.next().expect("one result per distribution kind")),
        })
        .collect()
}

/// Steady-state current `I_ss` (eV) of `config` with injection.
pub fn steady_current(config: &NetworkConfig, opts: &FimOptions) -> Result<f64> {
    let gen = build_generator_with(config, Mode::Steady, Channels::all(), &opts.units)?;
    Ok(dynamics::steady_state(&gen)?.current)
}

/// Gradient of `I_ss` in log parameters by central differences.
pub fn current_gradient(config: &NetworkConfig, params: &ParameterVector, opts: &FimOptions) -> Result<Vec<f64>> {
    let base = steady_current(config, opts)?;
    if !(base > opts.current_floor) {
        return Err(Error::NoSteadyCurrent(base));
    }
    let h = opts.step;
    (0..params.len())
        .into_par_iter()
        .map(|mu| {
            let wrap = |e: Error| Error::PerturbedRun {
                index: mu,
                label: params.entries[mu].label.clone(),
                source: Box::new(e),
            };
            let p = steady_current(&params.perturb(config, mu, h).map_err(wrap)?, opts).map_err(wrap)?;
            let m = steady_current(&params.perturb(config, mu, -h).map_err(wrap)?, opts).map_err(wrap)?;
            Ok((p - m) / (2.0 * h))
        })
        .collect()
}

pub fn scalar_sensitivity(config: &NetworkConfig, opts: &FimOptions) -> Result<FimResult> {
    scalar_sensitivity_with(config, &ParameterVector::standard(config), opts)
}

/// Rank-one matrix `∇I_ss ∇I_ssᵀ`.
pub fn scalar_sensitivity_with(
    config: &NetworkConfig,
    params: &ParameterVector,
    opts: &FimOptions,
) -> Result<FimResult> {
    let grad = current_gradient(config, params, opts)?;
    let n = grad.len();
    let g = DMatrix::from_fn(n, n, |i, j| grad[i] * grad[j]);
    let diag = FimDiagnostics {
        step: opts.step,
        ..Default::default()
    };
    Ok(FimResult::from_matrix(FomKind::Steady, params.labels(), params.groups(), &g, diag))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupImportance {
    pub total: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub members: Vec<(String, f64)>,
}

/// Per-group totals, with the per-parameter mean and range inside each group.
pub fn importance_by_group(result: &FimResult) -> BTreeMap<Group, GroupImportance> {
    let mut out: BTreeMap<Group, GroupImportance> = BTreeMap::new();
    for ((label, group), &p) in result.labels.iter().zip(&result.groups).zip(&result.importance) {
        let e = out.entry(*group).or_insert(GroupImportance {
            total: 0.0,
            mean: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            members: Vec::new(),
        });
        e.total += p;
        e.min = e.min.min(p);
        e.max = e.max.max(p);
        e.members.push((label.clone(), p));
    }
    for g in out.values_mut() {
        g.mean = g.total / g.members.len() as f64;
    }
    out
}

pub fn group_total(result: &FimResult, group: Group) -> f64 {
    importance_by_group(result).get(&group).map_or(0.0, |g| g.total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SloppinessMetrics {
    /// `log10(λ_max / λ_min)` over eigenvalues above the null threshold.
    pub decade_span: f64,
    pub eigenvalues: Vec<f64>,
    pub null_count: usize,
}

pub fn sloppiness_metrics(result: &FimResult) -> SloppinessMetrics {
    let nz = result.nonzero_spectrum();
    let span = match (nz.first(), nz.last()) {
        (Some(&hi), Some(&lo)) => (hi / lo).log10(),
        _ => 0.0,
    };
    SloppinessMetrics {
        decade_span: span,
        eigenvalues: result.eigenvalues.clone(),
        null_count: result.null_count(),
    }
}

/// Ratio `‖D(h) − D(h/2)‖ / ‖D(h/2) − D(h/4)‖` of central-difference
/// gradients of one parameter; about 4 when truncation error dominates.
pub fn richardson_ratio(
    config: &NetworkConfig,
    params: &ParameterVector,
    mu: usize,
    kind: DistributionKind,
    h: f64,
    opts: &FimOptions,
) -> Result<f64> {
    let grid = shared_grid(config, opts)?;
    let single = ParameterVector {
        entries: vec![params.entries[mu].clone()],
    };
    let grad_at = |step: f64| -> Result<Vec<f64>> {
        let o = FimOptions { step, ..*opts };
        Ok(distribution_gradient(config, &single, &[kind], &grid, &o)?.remove(0).remove(0))
    };
    let d1 = grad_at(h)?;
    let d2 = grad_at(h / 2.0)?;
    let d4 = grad_at(h / 4.0)?;
    let norm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    Ok(norm(&d1, &d2) / norm(&d2, &d4))
}
