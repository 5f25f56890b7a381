//! Random network ensembles with parameter disorder, and chain sweeps.
//!
//! Every draw gets its own ChaCha20 stream keyed by `(seed, draw index)`, and
//! retained samples are taken in draw order, so results do not depend on
//! how the work is scheduled.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, UnitBall};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, EvolveOptions};
use crate::environment::{build_generator_with, Channels, Mode};
use crate::error::{Error, Result};
use crate::infogeom::{fim_with, importance_by_group, FimOptions, FimResult, FomKind, Group, ParameterVector};
use crate::model::{self, distance, NetworkConfig, SpectralKind};

/// Consecutive spacing violations tolerated before a geometry is declared
/// infeasible.
pub const MAX_GEOMETRY_REJECTIONS: usize = 10_000;

/// Non-geometric parameters shared by every generated network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaseParameters {
    pub energy: f64,
    pub lifetime: f64,
    #[serde(rename = "J")]
    pub dipole_constant: f64,
    pub gamma_trap: f64,
    pub gamma_inj: f64,
    pub lambda_ph: f64,
    #[serde(rename = "T_ph")]
    pub t_ph: f64,
    pub spectral_kind: SpectralKind,
    pub omega_c: f64,
}

impl Default for BaseParameters {
    fn default() -> Self {
        Self {
            energy: model::DEFAULT_SITE_ENERGY,
            lifetime: model::DEFAULT_LIFETIME_NS,
            dipole_constant: model::DEFAULT_DIPOLE_CONSTANT,
            gamma_trap: model::DEFAULT_TRAP_RATE,
            gamma_inj: model::DEFAULT_INJECTION_RATE,
            lambda_ph: model::DEFAULT_PHONON_COUPLING,
            t_ph: model::DEFAULT_TEMPERATURE,
            spectral_kind: SpectralKind::J1,
            omega_c: model::DEFAULT_CUTOFF,
        }
    }
}

impl BaseParameters {
    /// Network on the given Cartesian positions (source first, sink last).
    pub fn network(&self, positions: &[[f64; 3]]) -> Result<NetworkConfig> {
        let mut c = NetworkConfig::from_positions(positions)?;
        for s in &mut c.sites {
            s.energy = self.energy;
            s.lifetime = self.lifetime;
        }
        c.dipole_constant = self.dipole_constant;
        c.gamma_trap = self.gamma_trap;
        c.gamma_inj = self.gamma_inj;
        c.lambda_ph = self.lambda_ph;
        c.t_ph = self.t_ph;
        c.spectral_kind = self.spectral_kind;
        c.omega_c = self.omega_c;
        c.validate()?;
        Ok(c)
    }

    /// Same scalar parameters as an existing network.
    pub fn from_config(c: &NetworkConfig) -> Self {
        Self {
            energy: c.sites.first().map_or(model::DEFAULT_SITE_ENERGY, |s| s.energy),
            lifetime: c.sites.first().map_or(model::DEFAULT_LIFETIME_NS, |s| s.lifetime),
            dipole_constant: c.dipole_constant,
            gamma_trap: c.gamma_trap,
            gamma_inj: c.gamma_inj,
            lambda_ph: c.lambda_ph,
            t_ph: c.t_ph,
            spectral_kind: c.spectral_kind,
            omega_c: c.omega_c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub radius_nm: f64,
    #[serde(rename = "N")]
    pub n_sites: usize,
    /// Number of retained samples.
    pub samples: usize,
    pub seed: u64,
    pub disorder: f64,
    pub min_spacing_nm: f64,
    pub completion_filter_ns: f64,
    pub kind: FomKind,
    /// Upper bound on draws, including filtered ones; defaults to
    /// `100 × samples`; at r = 3 nm only a few percent of draws pass the
    /// 1 ns filter.
    pub max_draws: Option<usize>,
    pub base: BaseParameters,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            radius_nm: 2.0,
            n_sites: 4,
            samples: 50,
            seed: 0,
            disorder: 0.1,
            min_spacing_nm: 0.5,
            completion_filter_ns: 1.0,
            kind: FomKind::Arrival,
            max_draws: None,
            base: BaseParameters::default(),
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.radius_nm > self.min_spacing_nm / 2.0) {
            return bad("radius must exceed half the minimum spacing");
        }
        if self.n_sites < 2 {
            return bad("ensemble networks need at least two sites");
        }
        if self.samples == 0 {
            return bad("sample count must be at least 1");
        }
        if !(self.disorder >= 0.0) {
            return bad("disorder fraction must be non-negative");
        }
        if !(self.completion_filter_ns > 0.0) {
            return bad("completion filter must be positive");
        }
        Ok(())
    }

    fn draw_cap(&self) -> usize {
        self.max_draws.unwrap_or(100 * self.samples).max(self.samples)
    }
}

/// Generator for draw `index` of a seeded run.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Source at `(−r,0,0)`, sink at `(r,0,0)`, intermediate sites uniform in the
/// ball, all intermediates redrawn on any spacing violation. The result is
/// translated so the source sits at the origin.
pub fn random_geometry<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<Vec<[f64; 3]>> {
    let r = spec.radius_nm;
    let n = spec.n_sites;
    for _ in 0..MAX_GEOMETRY_REJECTIONS {
        let mut pos = Vec::with_capacity(n);
        pos.push([-r, 0.0, 0.0]);
        for _ in 1..n.saturating_sub(1) {
            let u: [f64; 3] = UnitBall.sample(rng);
            pos.push(u.map(|x| x * r));
        }
        pos.push([r, 0.0, 0.0]);
        let ok = (0..n).all(|i| (i + 1..n).all(|j| distance(&pos[i], &pos[j]) >= spec.min_spacing_nm));
        if ok {
            let o = pos[0];
            return Ok(pos.iter().map(|p| [p[0] - o[0], p[1] - o[1], p[2] - o[2]]).collect());
        }
    }
    Err(Error::InfeasibleSpec(format!(
        "no geometry with spacing ≥ {} nm for N = {} in radius {} nm after {} tries",
        spec.min_spacing_nm, n, r, MAX_GEOMETRY_REJECTIONS
    )))
}

fn jitter<R: Rng + ?Sized>(x0: f64, fraction: f64, rng: &mut R) -> f64 {
    if fraction == 0.0 {
        return x0;
    }
    loop {
        let d: f64 = StandardNormal.sample(rng);
        let x = x0 * (1.0 + fraction * d);
        if x > 0.0 {
            return x;
        }
    }
}

/// Multiplies energies, lifetimes, `Γ_trap`, `λ_ph` and `T_ph` by
/// `1 + fraction·δ`, `δ ~ N(0,1)`, redrawing any value that is not positive.
/// Zero-valued parameters stay at zero.
pub fn apply_disorder<R: Rng + ?Sized>(config: &NetworkConfig, fraction: f64, rng: &mut R) -> NetworkConfig {
    let mut c = config.clone();
    for s in &mut c.sites {
        s.energy = jitter(s.energy, fraction, rng);
    }
    for s in &mut c.sites {
        s.lifetime = jitter(s.lifetime, fraction, rng);
    }
    for x in [&mut c.gamma_trap, &mut c.lambda_ph, &mut c.t_ph] {
        if *x > 0.0 {
            *x = jitter(*x, fraction, rng);
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub importance: Vec<f64>,
    pub group_importance: BTreeMap<Group, f64>,
    /// Mean nearest-neighbour coupling, eV.
    pub nn_coupling: f64,
    pub completion_time_ns: Option<f64>,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub spec: EnsembleSpec,
    pub kind: FomKind,
    pub labels: Vec<String>,
    pub groups: Vec<Group>,
    pub samples: Vec<SampleRecord>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub group_stats: BTreeMap<Group, GroupStats>,
    /// eV.
    pub mean_nn_coupling: f64,
    pub draws: usize,
    pub filtered: usize,
    pub failed: usize,
}

/// Mean and unbiased variance (zero for a single value).
fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

impl EnsembleResult {
    fn aggregate(
        spec: &EnsembleSpec,
        kind: FomKind,
        labels: Vec<String>,
        groups: Vec<Group>,
        samples: Vec<SampleRecord>,
        counts: (usize, usize, usize),
    ) -> Self {
        let (mean, variance) = (0..labels.len())
            .map(|mu| mean_var(samples.iter().map(move |s| s.importance[mu])))
            .unzip();
        let mut group_stats = BTreeMap::new();
        let mut present: Vec<Group> = groups.clone();
        present.dedup();
        for g in present {
            let (m, v) = mean_var(samples.iter().map(move |s| s.group_importance.get(&g).copied().unwrap_or(0.0)));
            let se = (v / samples.len() as f64).sqrt();
            group_stats.insert(
                g,
                GroupStats {
                    mean: m,
                    variance: v,
                    std_error: se,
                },
            );
        }
        let mean_nn_coupling = mean_var(samples.iter().map(|s| s.nn_coupling)).0;
        Self {
            spec: spec.clone(),
            kind,
            labels,
            groups,
            samples,
            mean,
            variance,
            group_stats,
            mean_nn_coupling,
            draws: counts.0,
            filtered: counts.1,
            failed: counts.2,
        }
    }

    pub fn group_mean(&self, g: Group) -> f64 {
        self.group_stats.get(&g).map_or(0.0, |s| s.mean)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// `label,group,mean,variance`
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label", "group", "mean", "variance"])?;
        for i in 0..self.labels.len() {
            w.write_record([
                self.labels[i].clone(),
                self.groups[i].name().to_string(),
                self.mean[i].to_string(),
                self.variance[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `group,mean,variance,std_error`
    pub fn write_groups_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group", "mean", "variance", "std_error"])?;
        for (g, s) in &self.group_stats {
            w.write_record([g.name().to_string(), s.mean.to_string(), s.variance.to_string(), s.std_error.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `index,nn_coupling,completion_time_ns,<labels...>`
    pub fn write_samples_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string(), "nn_coupling".into(), "completion_time_ns".into()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut rec = vec![
                s.index.to_string(),
                s.nn_coupling.to_string(),
                s.completion_time_ns.map_or(String::new(), |t| t.to_string()),
            ];
            rec.extend(s.importance.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

enum Draw {
    Filtered,
    Failed,
    Kept(Vec<FimResult>, f64, Option<f64>),
}

/// Network for draw `index`: geometry, then disorder, from one stream.
pub fn draw_network(spec: &EnsembleSpec, index: usize) -> Result<NetworkConfig> {
    let mut rng = sample_rng(spec.seed, index as u64);
    let pos = random_geometry(spec, &mut rng)?;
    let base = spec.base.network(&pos)?;
    Ok(apply_disorder(&base, spec.disorder, &mut rng))
}

fn evaluate(spec: &EnsembleSpec, index: usize, kinds: &[FomKind], opts: &FimOptions) -> Result<Draw> {
    let cfg = draw_network(spec, index)?;
    let filter = EvolveOptions {
        t_max_ns: spec.completion_filter_ns,
        ..opts.evolve
    };
    let gen = match build_generator_with(&cfg, Mode::Transient, Channels::all(), &opts.units) {
        Ok(g) => g,
        Err(e) => {
            log::warn!("draw {index}: {e}");
            return Ok(Draw::Failed);
        }
    };
    let Some(estimate) = dynamics::completion_estimate(&gen, &filter) else {
        return Ok(Draw::Filtered);
    };
    let params = ParameterVector::standard(&cfg);
    let results = match fim_with(&cfg, &params, kinds, opts) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("draw {index}: {e}");
            return Ok(Draw::Failed);
        }
    };
    // the full run's completion time is authoritative when there is one
    let completion = results
        .iter()
        .find(|r| r.kind != FomKind::Steady)
        .map_or(estimate, |r| r.diagnostics.completion_time_ns);
    if completion >= spec.completion_filter_ns {
        return Ok(Draw::Filtered);
    }
    let nn = model::nn_coupling_stats(&cfg)?.mean;
    Ok(Draw::Kept(results, nn, Some(completion)))
}

/// Ensemble statistics for `spec.kind`.
pub fn run_ensemble(spec: &EnsembleSpec, opts: &FimOptions) -> Result<EnsembleResult> {
    run_ensemble_kinds(spec, &[spec.kind], opts).map(|mut v| v.remove(0))
}

/// Ensemble statistics for several figures of merit over the same retained
/// networks.
pub fn run_ensemble_kinds(spec: &EnsembleSpec, kinds: &[FomKind], opts: &FimOptions) -> Result<Vec<EnsembleResult>> {
    spec.validate()?;
    if kinds.is_empty() {
        return Err(Error::InvalidConfig("no figure of merit requested".into()));
    }
    let cap = spec.draw_cap();
    let mut kept: Vec<(usize, Vec<FimResult>, f64, Option<f64>)> = Vec::new();
    let (mut filtered, mut failed, mut next) = (0usize, 0usize, 0usize);
    while kept.len() < spec.samples && next < cap {
        let batch = (spec.samples - kept.len()).max(rayon::current_num_threads()).min(cap - next);
        let outcomes: Vec<Result<Draw>> = (next..next + batch)
            .into_par_iter()
            .map(|i| evaluate(spec, i, kinds, opts))
            .collect();
        for (i, o) in (next..).zip(outcomes) {
            if kept.len() == spec.samples {
                break;
            }
            match o? {
                Draw::Filtered => filtered += 1,
                Draw::Failed => failed += 1,
                Draw::Kept(r, nn, t) => kept.push((i, r, nn, t)),
            }
            next = i + 1;
        }
    }
    if kept.is_empty() {
        return Err(Error::InfeasibleSpec(format!(
            "no sample passed the {} ns completion filter in {next} draws",
            spec.completion_filter_ns
        )));
    }
    if kept.len() < spec.samples {
        log::warn!("only {} of {} samples retained after {next} draws", kept.len(), spec.samples);
    }
    let labels = kept[0].1[0].labels.clone();
    let groups = kept[0].1[0].groups.clone();
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(ki, &kind)| {
            let samples = kept
                .iter()
                .map(|(i, res, nn, t)| {
                    let r = &res[ki];
                    SampleRecord {
                        index: *i,
                        importance: r.importance.clone(),
                        group_importance: importance_by_group(r).into_iter().map(|(g, s)| (g, s.total)).collect(),
                        nn_coupling: *nn,
                        completion_time_ns: *t,
                        lambda_max: r.lambda_max(),
                    }
                })
                .collect();
            EnsembleResult::aggregate(spec, kind, labels.clone(), groups.clone(), samples, (next, filtered, failed))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// `values` are nearest-neighbour spacings (nm) of an `n_sites` chain.
    Spacing,
    /// `values` are site counts at fixed `spacing_nm`.
    FixedNn,
    /// `values` are site counts spanning a fixed `span_nm`.
    FixedSpan,
    /// `values` are `λ_ph` (eV) for an `n_sites` chain at `spacing_nm`.
    PhononCoupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub values: Vec<f64>,
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub spacing_nm: f64,
    pub span_nm: f64,
    pub kind: FomKind,
    pub base: BaseParameters,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            mode: SweepMode::Spacing,
            values: Vec::new(),
            n_sites: 4,
            spacing_nm: 3.0,
            span_nm: 9.0,
            kind: FomKind::Arrival,
            base: BaseParameters::default(),
        }
    }
}

/// Spacing (nm) giving nearest-neighbour coupling `v` (eV).
pub fn spacing_for_coupling(v: f64, dipole_constant: f64) -> f64 {
    (dipole_constant / v).cbrt()
}

fn as_count(x: f64) -> Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(Error::InvalidConfig(format!("site count {x} is not a positive integer")))
    }
}

impl SweepSpec {
    pub fn network(&self, x: f64) -> Result<NetworkConfig> {
        let chain = |n: usize, d: f64| -> Result<NetworkConfig> {
            let pos: Vec<[f64; 3]> = (0..n).map(|i| [i as f64 * d, 0.0, 0.0]).collect();
            self.base.network(&pos)
        };
        match self.mode {
            SweepMode::Spacing => chain(self.n_sites, x),
            SweepMode::FixedNn => chain(as_count(x)?, self.spacing_nm),
            SweepMode::FixedSpan => {
                let n = as_count(x)?;
                if n < 2 {
                    return Err(Error::InvalidConfig("spanning chain needs two sites".into()));
                }
                chain(n, self.span_nm / (n - 1) as f64)
            }
            SweepMode::PhononCoupling => {
                let mut c = chain(self.n_sites, self.spacing_nm)?;
                c.lambda_ph = x;
                c.validate()?;
                Ok(c)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub n_sites: usize,
    /// Mean nearest-neighbour coupling, eV.
    pub nn_coupling: f64,
    pub labels: Vec<String>,
    pub importance: Vec<f64>,
    pub groups: BTreeMap<Group, crate::infogeom::GroupImportance>,
    /// Up to five largest eigenvalues.
    pub top_eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub spec: SweepSpec,
    pub points: Vec<SweepPoint>,
}

pub fn sweep_chain(spec: &SweepSpec, opts: &FimOptions) -> Result<SweepTable> {
    let points = spec
        .values
        .par_iter()
        .map(|&x| {
            let cfg = spec.network(x)?;
            let params = ParameterVector::standard(&cfg);
            let r = fim_with(&cfg, &params, &[spec.kind], opts)?.remove(0);
            let nn = if cfg.n_sites > 1 {
                model::nn_coupling_stats(&cfg)?.mean
            } else {
                0.0
            };
            Ok(SweepPoint {
                x,
                n_sites: cfg.n_sites,
                nn_coupling: nn,
                labels: r.labels.clone(),
                importance: r.importance.clone(),
                groups: importance_by_group(&r),
                top_eigenvalues: r.eigenvalues.iter().take(5).copied().collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        spec: spec.clone(),
        points,
    })
}

const GROUPS: [Group; 4] = [Group::Energy, Group::Lifetime, Group::Position, Group::Environment];

impl SweepTable {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// `x,n_sites,nn_coupling,<group>_{total,mean,min,max}...,eig1..eig5`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = vec!["x".into(), "n_sites".into(), "nn_coupling".into()];
        for g in GROUPS {
            for s in ["total", "mean", "min", "max"] {
                header.push(format!("{}_{s}", g.name()));
            }
        }
        header.extend((1..=5).map(|i| format!("eig{i}")));
        w.write_record(&header)?;
        for p in &self.points {
            let mut rec = vec![p.x.to_string(), p.n_sites.to_string(), p.nn_coupling.to_string()];
            for g in GROUPS {
                match p.groups.get(&g) {
                    Some(s) => rec.extend([s.total, s.mean, s.min, s.max].map(|x| x.to_string())),
                    None => rec.extend(std::iter::repeat(String::new()).take(4)),
                }
            }
            for i in 0..5 {
                rec.push(p.top_eigenvalues.get(i).map_or(String::new(), |x| x.to_string()));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_site_geometry_is_the_diameter() {
        let spec = EnsembleSpec {
            n_sites: 2,
            radius_nm: 1.5,
            ..Default::default()
        };
        let pos = random_geometry(&spec, &mut sample_rng(1, 0)).unwrap();
        assert_eq!(pos, vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]]);
    }

    #[test]
    fn intermediate_sites_are_uniform_in_the_ball() {
        let spec = EnsembleSpec {
            n_sites: 3,
            radius_nm: 2.0,
            min_spacing_nm: 0.0,
            ..Default::default()
        };
        let mut rng = sample_rng(7, 0);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let p = random_geometry(&spec, &mut rng).unwrap();
            // undo the shift that put the source at the origin
            let q = [p[1][0] - 2.0, p[1][1], p[1][2]];
            sum += (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        }
        let mean = sum / n as f64;
        assert!((mean / (0.75 * 2.0) - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn impossible_spacing_is_reported() {
        let spec = EnsembleSpec {
            n_sites: 40,
            radius_nm: 0.6,
            ..Default::default()
        };
        assert!(matches!(
            random_geometry(&spec, &mut sample_rng(0, 0)),
            Err(Error::InfeasibleSpec(_))
        ));
    }

    #[test]
    fn disorder_moments() {
        let cfg = NetworkConfig::chain(2, 1.0).unwrap();
        let mut rng = sample_rng(3, 0);
        let n = 100_000;
        let e: Vec<f64> = (0..n).map(|_| apply_disorder(&cfg, 0.1, &mut rng).sites[0].energy).collect();
        let (m, v) = mean_var(e.iter().copied());
        assert!((m - 2.0).abs() < 0.005 * 2.0, "{m}");
        assert!((v.sqrt() - 0.2).abs() < 0.005, "{}", v.sqrt());
    }

    #[test]
    fn zero_disorder_is_identity() {
        let cfg = NetworkConfig::square(1.0).unwrap();
        assert_eq!(apply_disorder(&cfg, 0.0, &mut sample_rng(0, 0)), cfg);
    }

    #[test]
    fn streams_are_independent_of_order() {
        let spec = EnsembleSpec::default();
        let a = draw_network(&spec, 5).unwrap();
        let _ = draw_network(&spec, 4).unwrap();
        assert_eq!(a, draw_network(&spec, 5).unwrap());
        assert_ne!(a, draw_network(&spec, 6).unwrap());
    }

    proptest! {
        #[test]
        fn geometries_respect_spacing(seed in 0u64..1000, n in 2usize..7, r in 1.0f64..3.0) {
            let spec = EnsembleSpec { n_sites: n, radius_nm: r, ..Default::default() };
            let pos = random_geometry(&spec, &mut sample_rng(seed, 0)).unwrap();
            prop_assert_eq!(pos[0], [0.0, 0.0, 0.0]);
            prop_assert!((distance(&pos[0], &pos[n - 1]) - 2.0 * r).abs() < 1e-12);
            for i in 0..n {
                for j in i + 1..n {
                    prop_assert!(distance(&pos[i], &pos[j]) >= 0.5);
                }
                // inside the ball centred between source and sink
                prop_assert!(distance(&pos[i], &[r, 0.0, 0.0]) <= r + 1e-12);
            }
        }

        #[test]
        fn disorder_keeps_parameters_positive(seed in 0u64..500, frac in 0.0f64..3.0) {
            let cfg = NetworkConfig::square(1.0).unwrap();
            let d = apply_disorder(&cfg, frac, &mut sample_rng(seed, 0));
            prop_assert!(d.sites.iter().all(|s| s.energy > 0.0 && s.lifetime > 0.0));
            prop_assert!(d.gamma_trap > 0.0 && d.lambda_ph > 0.0 && d.t_ph > 0.0);
            prop_assert_eq!(d.sites.iter().map(|s| s.position).collect::<Vec<_>>(),
                            cfg.sites.iter().map(|s| s.position).collect::<Vec<_>>());
        }
    }

    #[test]
    fn small_ensemble_statistics() {
        let spec = EnsembleSpec {
            radius_nm: 2.0,
            samples: 2,
            seed: 11,
            ..Default::default()
        };
        let r = run_ensemble(&spec, &FimOptions::default()).unwrap();
        assert_eq!(r.samples.len(), 2);
        assert!((r.mean.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(r.variance.iter().all(|&v| v >= 0.0));
        for s in &r.samples {
            assert!(s.completion_time_ns.unwrap() < spec.completion_filter_ns);
        }
        assert!(r.samples.windows(2).all(|w| w[0].index < w[1].index));
        assert_eq!(r, run_ensemble(&spec, &FimOptions::default()).unwrap());
    }

    #[test]
    fn decoupled_environment_rows_vanish() {
        let spec = SweepSpec {
            mode: SweepMode::PhononCoupling,
            values: vec![0.0],
            n_sites: 3,
            spacing_nm: 1.0,
            ..Default::default()
        };
        let t = sweep_chain(&spec, &FimOptions::default()).unwrap();
        let p = &t.points[0];
        for l in ["lam", "T"] {
            let i = p.labels.iter().position(|x| x == l).unwrap();
            assert_eq!(p.importance[i], 0.0);
        }
    }
}
