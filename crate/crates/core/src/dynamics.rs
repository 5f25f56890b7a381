//! Time evolution, exit-time distributions and steady states.
//!
//! Evolution is exact stepping with `exp(M Δt)` on a uniform grid, where `M`
//! is the generator restricted to the real Hermitian coordinates reachable
//! from the initial state. For the transport models this is the site block
//! plus the ground and trap populations, so the propagator stays small.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::environment::Generator;
use crate::error::{Error, Result};
use crate::linalg::{self, vec_index};
use crate::model::Operator;

/// Fraction of the smallest oscillation period used as the time step.
const STEPS_PER_HALF_PERIOD: f64 = 20.0;
/// Minimum number of steps before completion.
const MIN_STEPS_TO_COMPLETION: f64 = 2000.0;
const TRACE_ABORT: f64 = 1e-6;
const POSITIVITY_WARN: f64 = -1e-6;
/// Steps produced per blocked propagation.
const BLOCK: usize = 64;
/// Exit populations below this are treated as no flux at all.
pub const EXIT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeGrid {
    /// Step chosen from the spectrum and an estimate of the completion time;
    /// `refine` divides the step further.
    Auto { refine: u32 },
    /// Exactly `steps` steps of `dt_ns`, with no early stop.
    Fixed { dt_ns: f64, steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub t_max_ns: f64,
    /// Completion when `1 − P_trap − P_ground` falls below this.
    pub completion_tol: f64,
    pub grid: TimeGrid,
    /// Number of evenly spaced positivity checks along the trajectory; steps
    /// 1, 2, 4, 8, … are checked as well.
    pub positivity_checks: usize,
    /// Record `Tr ρ²` at every step. Populations alone are much cheaper to
    /// propagate, so runs that only need exit densities turn this off.
    pub purity: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            t_max_ns: 50.0,
            completion_tol: 1e-4,
            grid: TimeGrid::Auto { refine: 1 },
            positivity_checks: 200,
            purity: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times_ns: Vec<f64>,
    /// `site_populations[i][k]` is the population of site `i + 1` at step `k`.
    pub site_populations: Vec<Vec<f64>>,
    pub ground: Vec<f64>,
    pub trap: Vec<f64>,
    /// `Tr ρ²` at each step; empty unless requested.
    pub purity: Vec<f64>,
    pub completed: bool,
    pub completion_time_ns: Option<f64>,
    pub dt_ns: f64,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
    pub positivity_breaches: usize,
    #[serde(skip)]
    pub final_state: Operator,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ns.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.site_populations.len()
    }

    /// `1 − P_trap − P_ground` at step `k`.
    pub fn remaining(&self, k: usize) -> f64 {
        1.0 - self.trap[k] - self.ground[k]
    }

    pub fn trace(&self, k: usize) -> f64 {
        self.ground[k] + self.trap[k] + self.site_populations.iter().map(|p| p[k]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Arrival,
    Loss,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrivalDistribution {
    pub kind: DistributionKind,
    pub times_ns: Vec<f64>,
    /// Probability density per ns.
    pub density: Vec<f64>,
    /// Final exit population used as normaliser (`P_max` or `P_loss`).
    pub total: f64,
}

impl ArrivalDistribution {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.times_ns, &self.density)
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coord {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

/// Generator restricted to real Hermitian coordinates.
///
/// Coordinates are `x = Tr(F ρ)` for the orthonormal Hermitian basis
/// `|a⟩⟨a|`, `(|a⟩⟨b| + |b⟩⟨a|)/√2`, `i(|a⟩⟨b| − |b⟩⟨a|)/√2`, so `Tr ρ² = |x|²`.
#[derive(Debug, Clone)]
pub(crate) struct RealGenerator {
    coords: Vec<Coord>,
    pub(crate) matrix: DMatrix<f64>,
    d: usize,
    diag_slot: Vec<Option<usize>>,
}

impl RealGenerator {
    /// Restrict to the coordinates reachable from the given density-matrix
    /// entries.
    pub(crate) fn reachable(gen: &Generator, seeds: &[(usize, usize)]) -> Self {
        let d = gen.dim();
        let g = &gen.matrix;
        let mut seen = vec![false; d * d];
        let mut stack = Vec::new();
        for &(a, b) in seeds {
            for k in [vec_index(a, b, d), vec_index(b, a, d)] {
                if !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
        while let Some(c) = stack.pop() {
            for r in 0..d * d {
                if !seen[r] && g[(r, c)].norm() > 0.0 {
                    seen[r] = true;
                    stack.push(r);
                    let (a, b) = (r % d, r / d);
                    let mirror = vec_index(b, a, d);
                    if !seen[mirror] {
                        seen[mirror] = true;
                        stack.push(mirror);
                    }
                }
            }
        }
        let pairs: BTreeSet<(usize, usize)> = (0..d * d)
            .filter(|&k| seen[k])
            .map(|k| {
                let (a, b) = (k % d, k / d);
                (a.min(b), a.max(b))
            })
            .collect();
        let mut coords = Vec::new();
        let mut diag_slot = vec![None; d];
        for &(a, b) in &pairs {
            if a == b {
                diag_slot[a] = Some(coords.len());
                coords.push(Coord::Diag(a));
            } else {
                coords.push(Coord::Re(a, b));
                coords.push(Coord::Im(a, b));
            }
        }
        let basis: Vec<Vec<(usize, Complex64)>> = coords.iter().map(|&c| basis_vec(c, d)).collect();
        let n = coords.len();
        let mut matrix = DMatrix::zeros(n, n);
        for (m, fm) in basis.iter().enumerate() {
            for (nn, fn_) in basis.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(r, wr) in fm {
                    for &(c, wc) in fn_ {
                        acc += wr.conj() * g[(r, c)] * wc;
                    }
                }
                matrix[(m, nn)] = acc.re;
            }
        }
        Self {
            coords,
            matrix,
            d,
            diag_slot,
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.coords.len()
    }

    pub(crate) fn encode(&self, rho: &Operator) -> DVector<f64> {
        let s = std::f64::consts::SQRT_2;
        DVector::from_iterator(
            self.coords.len(),
            self.coords.iter().map(|&c| match c {
                Coord::Diag(a) => rho[(a, a)].re,
                Coord::Re(a, b) => s * rho[(a, b)].re,
                Coord::Im(a, b) => s * rho[(a, b)].im,
            }),
        )
    }

    pub(crate) fn decode(&self, x: &DVector<f64>) -> Operator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut rho = Operator::zeros(self.d, self.d);
        for (&c, &v) in self.coords.iter().zip(x.iter()) {
            match c {
                Coord::Diag(a) => rho[(a, a)] = Complex64::new(v, 0.0),
                Coord::Re(a, b) => {
                    rho[(a, b)].re = s * v;
                    rho[(b, a)].re = s * v;
                }
                Coord::Im(a, b) => {
                    rho[(a, b)].im = s * v;
                    rho[(b, a)].im = -s * v;
                }
            }
        }
        rho
    }

    pub(crate) fn population(&self, x: &DVector<f64>, a: usize) -> f64 {
        self.diag_slot[a].map_or(0.0, |k| x[k])
    }

    /// The trace functional as a row over coordinates.
    pub(crate) fn trace_row(&self) -> DVector<f64> {
        let mut row = DVector::zeros(self.dim());
        for &k in self.diag_slot.iter().flatten() {
            row[k] = 1.0;
        }
        row
    }

    fn propagator(&self, t: f64) -> DMatrix<f64> {
        (&self.matrix * t).exp()
    }
}

fn basis_vec(c: Coord, d: usize) -> Vec<(usize, Complex64)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match c {
        Coord::Diag(a) => vec![(vec_index(a, a, d), Complex64::new(1.0, 0.0))],
        Coord::Re(a, b) => vec![
            (vec_index(a, b, d), Complex64::new(s, 0.0)),
            (vec_index(b, a, d), Complex64::new(s, 0.0)),
        ],
        Coord::Im(a, b) => vec![
            (vec_index(a, b, d), Complex64::new(0.0, s)),
            (vec_index(b, a, d), Complex64::new(0.0, -s)),
        ],
    }
}

/// `|source⟩⟨source|`.
pub fn initial_state(gen: &Generator) -> Operator {
    linalg::projector(gen.dim(), gen.source)
}

fn validate_state(rho: &Operator, d: usize) -> Result<()> {
    if rho.shape() != (d, d) {
        return Err(Error::InvalidConfig(format!("initial state must be {d}×{d}")));
    }
    if linalg::hermiticity_defect(rho) > 1e-10 {
        return Err(Error::InvalidConfig("initial state is not Hermitian".into()));
    }
    if (rho.trace().re - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidConfig("initial state must have unit trace".into()));
    }
    if rho.clone().symmetric_eigenvalues().min() < -1e-10 {
        return Err(Error::InvalidConfig("initial state is not positive semidefinite".into()));
    }
    Ok(())
}

fn seeds_of(rho: &Operator) -> Vec<(usize, usize)> {
    let d = rho.nrows();
    (0..d)
        .flat_map(|a| (0..d).map(move |b| (a, b)))
        .filter(|&(a, b)| rho[(a, b)].norm() > 0.0)
        .collect()
}

fn exhaustion(red: &RealGenerator, x: &DVector<f64>, gen: &Generator) -> f64 {
    1.0 - red.population(x, gen.hilbert.trap()) - red.population(x, gen.hilbert.ground())
}

/// Estimate of the first time (internal units) at which the remaining
/// network population drops below `tol`, by doubling then bisection with
/// direct exponentials. `None` if it does not happen by `t_max`.
fn estimate_completion(
    red: &RealGenerator,
    x0: &DVector<f64>,
    gen: &Generator,
    t_start: f64,
    t_max: f64,
    tol: f64,
) -> Option<f64> {
    let done = |t: f64| exhaustion(red, &(red.propagator(t) * x0), gen) < tol;
    let mut hi = t_start.min(t_max);
    loop {
        if done(hi) {
            break;
        }
        if hi >= t_max {
            return None;
        }
        hi = (2.0 * hi).min(t_max);
    }
    let mut lo = hi / 2.0;
    if done(lo) {
        return Some(hi);
    }
    for _ in 0..8 {
        let mid = 0.5 * (lo + hi);
        if done(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Estimated completion time in ns from `|source⟩⟨source|`, or `None` if the
/// network is not exhausted by `t_max_ns`. Costs a few dozen small matrix
/// exponentials and is used to reject slow networks early.
pub fn completion_estimate(gen: &Generator, opts: &EvolveOptions) -> Option<f64> {
    let rho0 = initial_state(gen);
    let red = RealGenerator::reachable(gen, &seeds_of(&rho0));
    let x0 = red.encode(&rho0);
    let u = &gen.units;
    let t_max = u.ns_to_internal(opts.t_max_ns);
    let start = oscillation_step(gen).unwrap_or(t_max * 1e-6);
    estimate_completion(&red, &x0, gen, start, t_max, opts.completion_tol).map(|t| u.internal_to_ns(t))
}

fn oscillation_step(gen: &Generator) -> Option<f64> {
    (gen.max_gap > 0.0).then(|| std::f64::consts::PI / (STEPS_PER_HALF_PERIOD * gen.max_gap))
}

/// Integrate `dρ/dt = G ρ` from `rho0`.
pub fn evolve(gen: &Generator, rho0: &Operator, opts: &EvolveOptions) -> Result<Trajectory> {
    if !gen.is_finite() {
        return Err(Error::NonFiniteGenerator);
    }
    validate_state(rho0, gen.dim())?;
    let units = gen.units;
    let red = RealGenerator::reachable(gen, &seeds_of(rho0));
    let x0 = red.encode(rho0);
    let t_max = units.ns_to_internal(opts.t_max_ns);

    let (dt, max_steps, stop_early) = match opts.grid {
        TimeGrid::Fixed { dt_ns, steps } => (units.ns_to_internal(dt_ns), steps, false),
        TimeGrid::Auto { refine } => {
            let osc = oscillation_step(gen);
            let horizon = estimate_completion(&red, &x0, gen, osc.unwrap_or(t_max * 1e-6), t_max, opts.completion_tol)
                .unwrap_or(t_max);
            let mut dt = horizon / MIN_STEPS_TO_COMPLETION;
            if let Some(o) = osc {
                dt = dt.min(o);
            }
            dt /= refine.max(1) as f64;
            let steps = (t_max / dt).ceil() as usize;
            (dt, steps, true)
        }
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::IntegrationFailure(format!("invalid time step {dt}")));
    }

    let step = red.propagator(dt);
    if step.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationFailure("propagator overflow".into()));
    }
    let hs = gen.hilbert;
    let n_sites = hs.n_sites();
    let capacity = max_steps.min(1 << 20) + 1;
    let mut traj = Trajectory {
        times_ns: Vec::with_capacity(capacity),
        site_populations: vec![Vec::with_capacity(capacity); n_sites],
        ground: Vec::with_capacity(capacity),
        trap: Vec::with_capacity(capacity),
        purity: Vec::with_capacity(capacity),
        completed: false,
        completion_time_ns: None,
        dt_ns: units.internal_to_ns(dt),
        max_trace_error: 0.0,
        min_eigenvalue: f64::INFINITY,
        positivity_breaches: 0,
        final_state: Operator::zeros(0, 0),
    };
    let check_every = (max_steps / opts.positivity_checks.max(1)).max(1);

    // Steps are taken in blocks: with the powers P^0..P^(B-1) stacked on the
    // observed coordinates, one product yields a whole block of samples,
    // and P^B carries the state to the next block.
    let observed: Vec<usize> = if opts.purity {
        (0..red.dim()).collect()
    } else {
        red.diag_slot.iter().flatten().copied().collect()
    };
    let slot = |a: usize| red.diag_slot[a].and_then(|k| observed.iter().position(|&o| o == k));
    let site_slots: Vec<Option<usize>> = (1..=n_sites).map(|i| slot(hs.site(i))).collect();
    let (ground_slot, trap_slot) = (slot(hs.ground()), slot(hs.trap()));
    let m = observed.len();
    let mut powers = vec![DMatrix::identity(red.dim(), red.dim())];
    for j in 1..=BLOCK {
        powers.push(&step * &powers[j - 1]);
    }
    let stacked = DMatrix::from_fn(BLOCK * m, red.dim(), |r, c| powers[r / m][(observed[r % m], c)]);
    let jump = powers[BLOCK].clone();
    let read = |y: &[f64], s: Option<usize>| s.map_or(0.0, |s| y[s]);

    let mut x = x0;
    let mut y = DVector::zeros(BLOCK * m);
    let mut last_state = None;
    // evenly spaced checks plus k = 1, 2, 4, …, which resolve the short
    // initial transient where Redfield dynamics can leave the positive cone
    let mut next_check = 0;
    let mut next_doubling = 1;
    'blocks: for start in (0..=max_steps).step_by(BLOCK) {
        y.gemv(1.0, &stacked, &x, 0.0);
        for j in 0..BLOCK {
            let k = start + j;
            let yk = &y.as_slice()[j * m..(j + 1) * m];
            let t = k as f64 * dt;
            let (ground, trap) = (read(yk, ground_slot), read(yk, trap_slot));
            let mut trace = ground + trap;
            for (series, &s) in traj.site_populations.iter_mut().zip(&site_slots) {
                let p = read(yk, s);
                trace += p;
                series.push(p);
            }
            let err = (trace - 1.0).abs();
            if !(err <= TRACE_ABORT) {
                return Err(Error::IntegrationFailure(format!(
                    "trace drifted to {trace} at t = {} ns",
                    units.internal_to_ns(t)
                )));
            }
            traj.max_trace_error = traj.max_trace_error.max(err);
            traj.times_ns.push(units.internal_to_ns(t));
            traj.ground.push(ground);
            traj.trap.push(trap);
            if opts.purity {
                traj.purity.push(yk.iter().map(|v| v * v).sum());
            }

            let finished = 1.0 - trap - ground < opts.completion_tol;
            if finished && traj.completion_time_ns.is_none() {
                traj.completion_time_ns = Some(units.internal_to_ns(t));
                traj.completed = true;
            }
            let last = k == max_steps || (stop_early && finished);
            if k == next_check || k == next_doubling || last {
                if k == next_check {
                    next_check += check_every;
                }
                if k == next_doubling {
                    next_doubling *= 2;
                }
                let xk = &powers[j] * &x;
                let min_eig = red.decode(&xk).symmetric_eigenvalues().min();
                traj.min_eigenvalue = traj.min_eigenvalue.min(min_eig);
                if min_eig < POSITIVITY_WARN {
                    traj.positivity_breaches += 1;
                    if traj.positivity_breaches == 1 {
                        log::warn!(
                            "density matrix eigenvalue {min_eig:.3e} at t = {:.4e} ns",
                            units.internal_to_ns(t)
                        );
                    }
                }
                if last {
                    last_state = Some(xk);
                    break 'blocks;
                }
            }
        }
        x = &jump * &x;
    }
    let x = last_state.expect("the final step is always reached");
    traj.final_state = red.decode(&x);
    Ok(traj)
}

/// Normalised density of trap arrivals, from the exact flux identity
/// `d P_trap / dt = Γ_trap ρ_sink,sink`.
pub fn arrival_time_distribution(traj: &Trajectory, gen: &Generator) -> Result<ArrivalDistribution> {
    let p_max = traj.trap.last().copied().unwrap_or(0.0);
    let rate = gen.trap_rate_per_ns();
    if !(rate > 0.0) || !(p_max > EXIT_FLOOR) {
        return Err(Error::NoSuccessfulTransport(p_max));
    }
    let sink = &traj.site_populations[gen.sink - 1];
    Ok(ArrivalDistribution {
        kind: DistributionKind::Arrival,
        times_ns: traj.times_ns.clone(),
        density: sink.iter().map(|&p| rate * p / p_max).collect(),
        total: p_max,
    })
}

/// Normalised density of recombination events, `Σ_i ρ_ii / τ_i / P_loss`.
pub fn loss_time_distribution(traj: &Trajectory, gen: &Generator) -> Result<ArrivalDistribution> {
    let p_loss = traj.ground.last().copied().unwrap_or(0.0);
    let rates = gen.decay_rates_per_ns();
    if rates.iter().all(|&r| r == 0.0) || !(p_loss > EXIT_FLOOR) {
        return Err(Error::NoLoss(p_loss));
    }
    let density = (0..traj.len())
        .map(|k| {
            rates
                .iter()
                .zip(&traj.site_populations)
                .map(|(r, p)| r * p[k])
                .sum::<f64>()
                / p_loss
        })
        .collect();
    Ok(ArrivalDistribution {
        kind: DistributionKind::Loss,
        times_ns: traj.times_ns.clone(),
        density,
        total: p_loss,
    })
}

pub fn distribution(traj: &Trajectory, gen: &Generator, kind: DistributionKind) -> Result<ArrivalDistribution> {
    match kind {
        DistributionKind::Arrival => arrival_time_distribution(traj, gen),
        DistributionKind::Loss => loss_time_distribution(traj, gen),
    }
}

/// Mean and variance of the exit time (ns, ns²) by trapezoidal quadrature.
pub fn arrival_moments(dist: &ArrivalDistribution) -> (f64, f64) {
    let t = &dist.times_ns;
    let f = &dist.density;
    let norm = trapezoid(t, f);
    let tf: Vec<f64> = t.iter().zip(f).map(|(t, f)| t * f).collect();
    let mean = trapezoid(t, &tf) / norm;
    let vf: Vec<f64> = t.iter().zip(f).map(|(t, f)| (t - mean).powi(2) * f).collect();
    (mean, trapezoid(t, &vf) / norm)
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: Operator,
    /// `Γ_trap ⟨sink|ρ_ss|sink⟩` in eV.
    pub current: f64,
    /// `‖G vec(ρ_ss)‖₂` in the generator's units.
    pub residual: f64,
}

impl SteadyState {
    pub fn current_per_ns(&self, gen: &Generator) -> f64 {
        gen.units.rate_per_ns(gen.units.energy(self.current))
    }
}

/// Stationary state of a steady-mode generator.
///
/// The trap is not reachable from ground when extraction is recycled, so the
/// solve runs on the coordinates reachable from ground and source; one
/// stationarity row is replaced by the trace constraint.
pub fn steady_state(gen: &Generator) -> Result<SteadyState> {
    if !gen.is_finite() {
        return Err(Error::NonFiniteGenerator);
    }
    let hs = gen.hilbert;
    let red = RealGenerator::reachable(gen, &[(hs.ground(), hs.ground()), (gen.source, gen.source)]);
    let n = red.dim();
    let m = &red.matrix;

    let sv = m.clone().singular_values();
    let smax = sv.max();
    let null = sv.iter().filter(|&&s| s <= 1e-13 * smax.max(f64::MIN_POSITIVE) * n as f64).count();
    if null > 1 {
        return Err(Error::NonUniqueSteadyState(null));
    }

    let pivot = red.diag_slot[hs.ground()].expect("ground is always reachable from itself");
    let mut a = m.clone();
    a.set_row(pivot, &red.trace_row().transpose());
    let mut rhs = DVector::zeros(n);
    rhs[pivot] = 1.0;
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or(Error::NonUniqueSteadyState(2))?;
    let rho = red.decode(&x);
    let residual = (&gen.matrix * linalg::vectorize(&rho)).norm();
    let scale = linalg::max_abs(&gen.matrix).max(1.0);
    if !(residual <= 1e-8 * scale) {
        return Err(Error::IntegrationFailure(format!("steady-state residual {residual:e}")));
    }
    let current = gen.units.energy_to_ev(gen.trap_rate * rho[(gen.sink, gen.sink)].re);
    Ok(SteadyState { rho, current, residual })
}

/// Write populations and exit densities as CSV:
/// `time_ns,p1..pN,ground,trap,f_arrival,f_loss`. Missing densities are left
/// empty.
pub fn write_trajectory_csv<W: Write>(
    out: W,
    traj: &Trajectory,
    arrival: Option<&ArrivalDistribution>,
    loss: Option<&ArrivalDistribution>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time_ns".to_string()];
    header.extend((1..=traj.n_sites()).map(|i| format!("p{i}")));
    header.extend(["ground", "trap", "f_arrival", "f_loss"].map(String::from));
    w.write_record(&header)?;
    let fmt = |d: Option<&ArrivalDistribution>, k: usize| d.map(|d| d.density[k].to_string()).unwrap_or_default();
    for k in 0..traj.len() {
        let mut row = vec![traj.times_ns[k].to_string()];
        row.extend(traj.site_populations.iter().map(|p| p[k].to_string()));
        row.push(traj.ground[k].to_string());
        row.push(traj.trap[k].to_string());
        row.push(fmt(arrival, k));
        row.push(fmt(loss, k));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
