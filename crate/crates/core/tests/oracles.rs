//! Frozen reference values and end-to-end oracle checks through the public API.

use approx::assert_relative_eq;

use exciton_core::dynamics::{initial_state, DistributionKind, TimeGrid};
use exciton_core::environment::noise_kernel;
use exciton_core::infogeom::{richardson_ratio, Knob};
use exciton_core::model::{dipole_coupling, nn_coupling_stats, DEFAULT_DIPOLE_CONSTANT};
use exciton_core::units::KB_EV_PER_K;
use exciton_core::*;

fn chain(spacing: f64, kind: SpectralKind) -> NetworkConfig {
    NetworkConfig::chain(4, spacing).unwrap().with_spectrum(kind)
}

#[test]
fn cubic_coupling_reference_values() {
    let o = [0.0, 0.0, 0.0];
    assert_relative_eq!(dipole_coupling(&o, &[1.0, 0.0, 0.0], 0.08).unwrap(), 0.08, max_relative = 1e-14);
    assert_relative_eq!(dipole_coupling(&o, &[0.0, 2.0, 0.0], 0.08).unwrap(), 0.01, max_relative = 1e-14);
    assert_eq!(DEFAULT_DIPOLE_CONSTANT, 0.08);
    assert_relative_eq!(nn_coupling_stats(&chain(2.0, SpectralKind::J1)).unwrap().mean, 0.01, max_relative = 1e-12);
    assert_relative_eq!(nn_coupling_stats(&chain(1.0, SpectralKind::J1)).unwrap().mean, 0.08, max_relative = 1e-12);
}

#[test]
fn j1_kernel_ratio_at_50_mev() {
    let sd = SpectralDensity::new(SpectralKind::J1, 0.01, 0.1, KB_EV_PER_K * 300.0).unwrap();
    let ratio = noise_kernel(&sd, 0.05) / noise_kernel(&sd, -0.05);
    // exp(0.05 / (8.617333262e-5 · 300)) = exp(1.934086...)
    assert_relative_eq!(ratio, 6.917_720_816_663_573, max_relative = 1e-12);
}

#[test]
fn central_differences_are_second_order() {
    let cfg = chain(3.0, SpectralKind::J3);
    let params = ParameterVector::from_knobs(&cfg, [Knob::Energy(2), Knob::Radius(2)]);
    let opts = FimOptions::default();
    for mu in 0..2 {
        let r = richardson_ratio(&cfg, &params, mu, DistributionKind::Arrival, 4e-4, &opts).unwrap();
        assert!((3.5..=4.5).contains(&r), "{}: ratio {r}", params.entries[mu].label);
    }
}

/// Local minima of the source population over the first 0.1 ns.
fn source_minima(cfg: &NetworkConfig) -> usize {
    let gen = build_generator(cfg, Mode::Transient).unwrap();
    let opts = EvolveOptions {
        grid: TimeGrid::Fixed { dt_ns: 2e-5, steps: 5000 },
        purity: false,
        ..Default::default()
    };
    let traj = evolve(&gen, &initial_state(&gen), &opts).unwrap();
    let p = &traj.site_populations[0];
    p.windows(3).filter(|w| w[1] < w[0] && w[1] < w[2]).count()
}

#[test]
fn coherent_oscillations_survive_j1_but_not_j3() {
    assert!(source_minima(&chain(3.0, SpectralKind::J1)) > 0);
    assert_eq!(source_minima(&chain(3.0, SpectralKind::J3)), 0);
}

#[test]
fn square_conserves_probability_at_completion() {
    let cfg = NetworkConfig::square(1.0).unwrap();
    let gen = build_generator(&cfg, Mode::Transient).unwrap();
    let opts = EvolveOptions {
        completion_tol: 1e-7,
        ..Default::default()
    };
    let traj = evolve(&gen, &initial_state(&gen), &opts).unwrap();
    let k = traj.times_ns.len() - 1;
    let remaining: f64 = traj.site_populations.iter().map(|p| p[k]).sum();
    assert!((traj.trap[k] + traj.ground[k] - 1.0).abs() < 1e-6);
    assert!(remaining < 1e-6);
}
