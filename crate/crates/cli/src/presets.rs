//! Bundled geometries and experiment presets.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use exciton_core::ensemble::{self, BaseParameters, EnsembleSpec, SweepMode, SweepSpec};
use exciton_core::infogeom::{fim_with, importance_by_group};
use exciton_core::model::DEFAULT_INJECTION_RATE;
use exciton_core::{FimOptions, FimResult, FomKind, NetworkConfig, ParameterVector, SpectralKind};

use crate::{Outcome, Run};

/// Seed of the random third geometry in the fig3 preset.
pub const FIG3_SEED: u64 = 7;
pub const CHAIN_SPACING_NM: f64 = 3.0;
pub const SQUARE_SIDE_NM: f64 = 1.0;
pub const RANDOM_RADIUS_NM: f64 = 2.0;
pub const WEAK_COUPLING: f64 = 1e-3;
pub const STRONG_COUPLING: f64 = 1e-1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkPreset {
    /// Four sites on a 1 nm square, sink opposite the source.
    Square,
    /// Four-site linear chain with 3 nm spacing.
    Chain,
    /// Seeded random four-site network in a 2 nm sphere.
    Random,
}

impl NetworkPreset {
    pub fn build(self, seed: Option<u64>) -> exciton_core::Result<NetworkConfig> {
        let cfg = match self {
            NetworkPreset::Square => NetworkConfig::square(SQUARE_SIDE_NM)?,
            NetworkPreset::Chain => NetworkConfig::chain(4, CHAIN_SPACING_NM)?,
            NetworkPreset::Random => random_network(seed.unwrap_or(FIG3_SEED))?,
        };
        Ok(cfg.with_injection(DEFAULT_INJECTION_RATE))
    }
}

/// Four sites in a sphere, source and sink at the poles, no disorder.
pub fn random_network(seed: u64) -> exciton_core::Result<NetworkConfig> {
    let spec = EnsembleSpec {
        radius_nm: RANDOM_RADIUS_NM,
        n_sites: 4,
        ..Default::default()
    };
    let pos = ensemble::random_geometry(&spec, &mut ensemble::sample_rng(seed, 0))?;
    BaseParameters::default().network(&pos)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepPreset {
    /// Four-site chain, nearest-neighbour coupling 5–300 meV.
    Coupling,
    /// 3 nm four-site chain, λ_ph from 1e-4 to 1e-1 eV.
    Lambda,
    /// 3 nm spacing, 2–6 sites.
    FixedNn,
    /// 6 nm source-sink distance, 3–7 sites.
    FixedSpan,
    /// Chain, square and random geometry at weak and strong phonon coupling
    /// under all three spectral densities.
    Fig3,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Nearest-neighbour couplings (eV) of the coupling sweep.
pub fn coupling_sweep_values() -> Vec<f64> {
    log_space(0.005, 0.3, 12)
}

impl SweepPreset {
    pub fn spec(self) -> SweepSpec {
        let base = BaseParameters::default();
        match self {
            SweepPreset::Coupling | SweepPreset::Fig3 => SweepSpec {
                mode: SweepMode::Spacing,
                values: coupling_sweep_values()
                    .into_iter()
                    .map(|v| ensemble::spacing_for_coupling(v, base.dipole_constant))
                    .collect(),
                ..Default::default()
            },
            SweepPreset::Lambda => SweepSpec {
                mode: SweepMode::PhononCoupling,
                values: log_space(1e-4, 1e-1, 13),
                spacing_nm: CHAIN_SPACING_NM,
                ..Default::default()
            },
            SweepPreset::FixedNn => SweepSpec {
                mode: SweepMode::FixedNn,
                values: vec![2.0, 3.0, 4.0, 5.0, 6.0],
                spacing_nm: CHAIN_SPACING_NM,
                ..Default::default()
            },
            SweepPreset::FixedSpan => SweepSpec {
                mode: SweepMode::FixedSpan,
                values: vec![3.0, 4.0, 5.0, 6.0, 7.0],
                span_nm: 6.0,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig3Entry {
    pub geometry: String,
    pub lambda_ph: f64,
    pub spectrum: SpectralKind,
    pub result: FimResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig3Table {
    pub geometries: Vec<(String, NetworkConfig)>,
    pub entries: Vec<Fig3Entry>,
}

pub fn fig3_geometries(seed: u64) -> exciton_core::Result<Vec<(String, NetworkConfig)>> {
    Ok(vec![
        ("chain".into(), NetworkPreset::Chain.build(None)?),
        ("square".into(), NetworkPreset::Square.build(None)?),
        ("random".into(), NetworkPreset::Random.build(Some(seed))?),
    ])
}

pub fn fig3(seed: u64, kind: FomKind, opts: &FimOptions) -> exciton_core::Result<Fig3Table> {
    let geometries = fig3_geometries(seed)?;
    let mut entries = Vec::new();
    for (name, cfg) in &geometries {
        for lambda_ph in [WEAK_COUPLING, STRONG_COUPLING] {
            for spectrum in [SpectralKind::J1, SpectralKind::J2, SpectralKind::J3] {
                let mut c = cfg.clone().with_spectrum(spectrum);
                c.lambda_ph = lambda_ph;
                let params = ParameterVector::standard(&c);
                let result = fim_with(&c, &params, &[kind], opts)?.remove(0);
                entries.push(Fig3Entry {
                    geometry: name.clone(),
                    lambda_ph,
                    spectrum,
                    result,
                });
            }
        }
    }
    Ok(Fig3Table { geometries, entries })
}

pub fn write_fig3(run: &mut Run, table: &Fig3Table) -> Outcome<()> {
    let mut w = csv::Writer::from_writer(run.create("fig3.csv")?);
    w.write_record(["geometry", "lambda_ph", "spectrum", "label", "group", "importance"])?;
    for e in &table.entries {
        let r = &e.result;
        for ((l, g), p) in r.labels.iter().zip(&r.groups).zip(&r.importance) {
            w.write_record([
                e.geometry.clone(),
                e.lambda_ph.to_string(),
                e.spectrum.to_string(),
                l.clone(),
                g.name().to_string(),
                p.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(run.create("fig3_groups.csv")?);
    w.write_record(["geometry", "lambda_ph", "spectrum", "group", "total", "mean", "min", "max"])?;
    for e in &table.entries {
        for (g, s) in importance_by_group(&e.result) {
            w.write_record([
                e.geometry.clone(),
                e.lambda_ph.to_string(),
                e.spectrum.to_string(),
                g.name().to_string(),
                s.total.to_string(),
                s.mean.to_string(),
                s.min.to_string(),
                s.max.to_string(),
            ])?;
        }
    }
    w.flush()?;
    run.json("fig3.json", table)
}
