//! Euler-Maruyama integrators with decreasing steps for the annealed SDE,
//! its genuine (Brownian bridge) interpolation, the plateau scheme, a
//! fine-step reference integrator and stochastic-gradient noise models.

use std::sync::Arc;

use rayon::prelude::*;

use crate::diffusion::DriftSpec;
use crate::error::{Error, Result};
use crate::linalg::{mat_vec, norm2};
use crate::rng::{sample_without_replacement, sub, NoiseStream};
use crate::schedules::{AnnealSchedule, PlateauSchedule, StepSequence};

/// Chains whose position norm exceeds this are marked diverged.
pub const DIVERGENCE_NORM: f64 = 1e8;
/// Minimum fraction of surviving chains for an ensemble to report.
pub const SURVIVAL_FRACTION: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub t: f64,
    pub step_index: usize,
}

impl ChainState {
    pub fn new(x: Vec<f64>) -> Self {
        Self { x, t: 0.0, step_index: 0 }
    }
}

/// Gradient-noise models ζ entering the drift as b + ζ.
#[derive(Debug, Clone)]
pub enum NoiseModel {
    None,
    /// ζ(x) = c·√V(x)·ξ with ξ standard normal.
    GaussianV { c: f64 },
    /// Minibatch gradient noise for regression potentials:
    /// ζ = −σσᵀ(x)·(batch gradient − full gradient), m indices per step.
    Minibatch { m: usize },
}

impl NoiseModel {
    pub fn sample(
        &self,
        spec: &DriftSpec,
        x: &[f64],
        stream: &NoiseStream,
        step: u64,
    ) -> Result<Vec<f64>> {
        match self {
            NoiseModel::None => Ok(vec![0.0; x.len()]),
            NoiseModel::GaussianV { c } => {
                let v = spec.potential.eval(x);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::NonFinite(format!("V(x) = {v} in noise model")));
                }
                let s = c * v.sqrt();
                Ok(stream
                    .gaussian_vec(step, sub::ZETA, x.len())
                    .into_iter()
                    .map(|z| s * z)
                    .collect())
            }
            NoiseModel::Minibatch { m } => {
                let data = spec.potential.regression.as_ref().ok_or_else(|| {
                    Error::InvalidParameter(
                        "minibatch noise needs a regression potential".into(),
                    )
                })?;
                if *m == 0 || *m > data.inputs.len() {
                    return Err(Error::InvalidParameter(format!(
                        "minibatch size {m} outside [1, {}]",
                        data.inputs.len()
                    )));
                }
                let mut rng = stream.sequential(step, sub::ZETA);
                let idx = sample_without_replacement(data.inputs.len(), *m, &mut rng);
                let mut g_batch = vec![0.0; x.len()];
                for &i in &idx {
                    for (gb, gi) in g_batch.iter_mut().zip(data.sample_gradient(x, i)) {
                        *gb += gi;
                    }
                }
                for gb in &mut g_batch {
                    *gb /= *m as f64;
                }
                let g_full = spec.potential.grad(x);
                let diff: Vec<f64> = g_batch.iter().zip(&g_full).map(|(b, f)| b - f).collect();
                let sst = spec.field.sigma_sigma_t(x);
                Ok(mat_vec(&sst, &diff).into_iter().map(|v| -v).collect())
            }
        }
    }
}

/// Test hooks forcing parts of the update to zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hooks {
    pub zero_dw: bool,
    pub zero_a: bool,
}

/// Everything needed to interpolate inside the step [t0, t0+γ).
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub x0: Vec<f64>,
    pub t0: f64,
    pub gamma: f64,
    /// b + ζ evaluated at x0.
    pub drift_term: Vec<f64>,
    /// a·σ(x0), row-major.
    pub scaled_sigma: Vec<f64>,
    /// The Brownian increment ΔW ~ Normal(0, γI) actually used.
    pub dw: Vec<f64>,
}

/// One EM step at noise level `a` and step size `gamma`:
/// x′ = x + γ(b_a(x) + ζ) + a·σ(x)·ΔW.
pub fn em_step(
    state: &ChainState,
    spec: &DriftSpec,
    a: f64,
    gamma: f64,
    noise: &NoiseModel,
    stream: &NoiseStream,
    hooks: Hooks,
) -> Result<(ChainState, StepRecord)> {
    let d = state.x.len();
    let n1 = (state.step_index + 1) as u64;
    let a_eff = if hooks.zero_a { 0.0 } else { a };
    let b = spec.drift(&state.x, a_eff)?;
    let zeta = noise.sample(spec, &state.x, stream, n1)?;
    let drift_term: Vec<f64> = b.iter().zip(&zeta).map(|(bi, zi)| bi + zi).collect();
    let dw: Vec<f64> = if hooks.zero_dw {
        vec![0.0; d]
    } else {
        let sq = gamma.sqrt();
        stream
            .gaussian_vec(n1, sub::DW, d)
            .into_iter()
            .map(|z| sq * z)
            .collect()
    };
    let sigma = spec.field.sigma(&state.x);
    let scaled_sigma: Vec<f64> = sigma.iter().map(|s| a_eff * s).collect();
    let noise_inc = mat_vec(&scaled_sigma, &dw);
    let x: Vec<f64> = state
        .x
        .iter()
        .zip(&drift_term)
        .zip(&noise_inc)
        .map(|((xi, di), ni)| xi + gamma * di + ni)
        .collect();
    if x.iter().any(|v| !v.is_finite()) || norm2(&x) > DIVERGENCE_NORM {
        return Err(Error::Diverged { t: state.t, norm: norm2(&state.x) });
    }
    let rec = StepRecord {
        x0: state.x.clone(),
        t0: state.t,
        gamma,
        drift_term,
        scaled_sigma,
        dw,
    };
    let next = ChainState { x, t: state.t + gamma, step_index: state.step_index + 1 };
    Ok((next, rec))
}

/// EM step under the continuous annealing law a(Γ_n).
pub fn em_step_continuous(
    state: &ChainState,
    spec: &DriftSpec,
    sched: &AnnealSchedule,
    seq: &StepSequence,
    noise: &NoiseModel,
    stream: &NoiseStream,
    hooks: Hooks,
) -> Result<(ChainState, StepRecord)> {
    let gamma = seq.gamma(state.step_index + 1);
    em_step(state, spec, sched.a_of(state.t), gamma, noise, stream, hooks)
}

/// EM step under the plateau law: level a_{k+1} while Γ_n ∈ [T_k, T_{k+1}).
pub fn em_step_plateau(
    state: &ChainState,
    spec: &DriftSpec,
    plateau: &PlateauSchedule,
    seq: &StepSequence,
    noise: &NoiseModel,
    stream: &NoiseStream,
    hooks: Hooks,
) -> Result<(ChainState, StepRecord)> {
    let gamma = seq.gamma(state.step_index + 1);
    em_step(state, spec, plateau.level_at(state.t), gamma, noise, stream, hooks)
}

/// Genuine interpolation at t ∈ [t0, t0+γ]: the Brownian path inside the
/// step is a bridge conditioned on ΔW, W_t−W_{t0} ~ N(θΔW, θ(1−θ)γI)
/// with θ = (t−t0)/γ. The bridge normal comes from the BRIDGE substream
/// keyed by (step index, lane), so replays are deterministic.
pub fn interpolate(
    rec: &StepRecord,
    step_index: usize,
    t: f64,
    stream: &NoiseStream,
    bridge_lane: u64,
) -> Result<Vec<f64>> {
    let theta = (t - rec.t0) / rec.gamma;
    if !(0.0..=1.0 + 1e-12).contains(&theta) {
        return Err(Error::InvalidInput(format!(
            "interpolate: t = {t} outside [{}, {}]",
            rec.t0,
            rec.t0 + rec.gamma
        )));
    }
    let theta = theta.min(1.0);
    let d = rec.x0.len();
    let sd = (theta * (1.0 - theta) * rec.gamma).sqrt();
    let w: Vec<f64> = (0..d)
        .map(|k| {
            let z = stream.gaussian(step_index as u64, sub::BRIDGE, bridge_lane * d as u64 + k as u64);
            theta * rec.dw[k] + sd * z
        })
        .collect();
    let noise_inc = mat_vec(&rec.scaled_sigma, &w);
    Ok(rec
        .x0
        .iter()
        .zip(&rec.drift_term)
        .zip(&noise_inc)
        .map(|((xi, di), ni)| xi + theta * rec.gamma * di + ni)
        .collect())
}

/// Time grid: a decreasing step sequence or a constant step.
#[derive(Clone)]
pub enum StepGrid {
    Decreasing(Arc<StepSequence>),
    Constant(f64),
}

impl StepGrid {
    pub fn gamma(&self, n: usize) -> f64 {
        match self {
            StepGrid::Decreasing(s) => s.gamma(n),
            StepGrid::Constant(h) => *h,
        }
    }
}

/// Noise-level law over time.
#[derive(Clone)]
pub enum AnnealMode {
    Continuous(AnnealSchedule),
    Plateau(PlateauSchedule),
    Constant(f64),
}

/// Per-level lookup, with plateau boundaries pre-tabulated so the hot
/// loop only compares against the next boundary.
enum LevelFn {
    Continuous(AnnealSchedule),
    Plateau { boundaries: Vec<f64>, levels: Vec<f64> },
    Constant(f64),
}

impl LevelFn {
    fn build(mode: &AnnealMode, horizon: f64) -> LevelFn {
        match mode {
            AnnealMode::Continuous(s) => LevelFn::Continuous(*s),
            AnnealMode::Constant(a) => LevelFn::Constant(*a),
            AnnealMode::Plateau(p) => {
                // boundaries[k] = T_{k+1}; level on [T_k, T_{k+1}) is a_{k+1}
                let mut boundaries = Vec::new();
                let mut levels = Vec::new();
                let mut k = 1usize;
                loop {
                    let (t_k, a_k) = p.plateau_times(k);
                    boundaries.push(t_k);
                    levels.push(a_k);
                    if t_k > horizon {
                        break;
                    }
                    k += 1;
                }
                LevelFn::Plateau { boundaries, levels }
            }
        }
    }

    fn at(&self, t: f64, cursor: &mut usize) -> f64 {
        match self {
            LevelFn::Continuous(s) => s.a_of(t),
            LevelFn::Constant(a) => *a,
            LevelFn::Plateau { boundaries, levels } => {
                while *cursor + 1 < boundaries.len() && t >= boundaries[*cursor] {
                    *cursor += 1;
                }
                levels[*cursor]
            }
        }
    }
}

/// Initial condition: one point for all chains or one point per chain.
#[derive(Clone)]
pub enum Init {
    Point(Vec<f64>),
    PerChain(Vec<Vec<f64>>),
}

pub struct EnsembleConfig {
    pub mode: AnnealMode,
    pub steps: StepGrid,
    pub noise: NoiseModel,
    pub horizon: f64,
    /// Sorted times at which positions are recorded (≤ horizon).
    pub record_at: Vec<f64>,
    pub n_chains: usize,
    pub master_seed: u64,
    pub init: Init,
}

/// Positions of surviving chains at the recorded times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// positions[k][c] is chain c at times[k].
    pub positions: Vec<Vec<Vec<f64>>>,
    pub chain_ids: Vec<u64>,
    pub n_requested: usize,
    pub diverged: usize,
}

impl Trajectory {
    pub fn at(&self, k: usize) -> &[Vec<f64>] {
        &self.positions[k]
    }

    pub fn final_positions(&self) -> &[Vec<f64>] {
        self.positions.last().expect("no record times")
    }

    pub fn csv(&self) -> String {
        let d = self.positions[0][0].len();
        let mut s = String::from("chain_id,t");
        for k in 1..=d {
            s.push_str(&format!(",x_{k}"));
        }
        s.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            for (c, id) in self.chain_ids.iter().enumerate() {
                s.push_str(&format!("{id},{t}"));
                for v in &self.positions[k][c] {
                    s.push_str(&format!(",{v}"));
                }
                s.push('\n');
            }
        }
        s
    }
}

fn run_chain(
    spec: &DriftSpec,
    cfg: &EnsembleConfig,
    level: &LevelFn,
    chain_id: u64,
    x0: Vec<f64>,
) -> Result<Vec<Vec<f64>>> {
    let stream = NoiseStream::new(cfg.master_seed, chain_id);
    let mut state = ChainState::new(x0);
    let mut out = Vec::with_capacity(cfg.record_at.len());
    let mut r = 0usize;
    let mut cursor = 0usize;
    while r < cfg.record_at.len() && cfg.record_at[r] <= state.t {
        out.push(state.x.clone());
        r += 1;
    }
    while r < cfg.record_at.len() {
        let gamma = cfg.steps.gamma(state.step_index + 1);
        let a = level.at(state.t, &mut cursor);
        let (next, rec) = em_step(&state, spec, a, gamma, &cfg.noise, &stream, Hooks::default())?;
        while r < cfg.record_at.len() && cfg.record_at[r] <= next.t {
            let t_r = cfg.record_at[r];
            if (t_r - next.t).abs() < 1e-12 * (1.0 + next.t) {
                out.push(next.x.clone());
            } else {
                out.push(interpolate(&rec, state.step_index, t_r, &stream, r as u64)?);
            }
            r += 1;
        }
        state = next;
    }
    Ok(out)
}

/// Run `n_chains` independent chains; deterministic in (config, seed)
/// regardless of worker count. Fails if fewer than 90% of chains survive.
pub fn run_ensemble(spec: &DriftSpec, cfg: &EnsembleConfig) -> Result<Trajectory> {
    if cfg.n_chains == 0 || cfg.record_at.is_empty() {
        return Err(Error::InvalidInput("run_ensemble: no chains or record times".into()));
    }
    if cfg
        .record_at
        .windows(2)
        .any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidInput("run_ensemble: record times must increase".into()));
    }
    if *cfg.record_at.last().unwrap() > cfg.horizon {
        return Err(Error::InvalidInput("run_ensemble: record time beyond horizon".into()));
    }
    if let Init::PerChain(v) = &cfg.init {
        if v.len() != cfg.n_chains {
            return Err(Error::InvalidInput("run_ensemble: init count != n_chains".into()));
        }
    }
    let level = LevelFn::build(&cfg.mode, cfg.horizon);
    let results: Vec<(u64, Result<Vec<Vec<f64>>>)> = (0..cfg.n_chains as u64)
        .into_par_iter()
        .map(|cid| {
            let x0 = match &cfg.init {
                Init::Point(p) => p.clone(),
                Init::PerChain(v) => v[cid as usize].clone(),
            };
            (cid, run_chain(spec, cfg, &level, cid, x0))
        })
        .collect();

    let mut chain_ids = Vec::new();
    let mut per_chain = Vec::new();
    let mut diverged = 0usize;
    for (cid, res) in results {
        match res {
            Ok(rows) => {
                chain_ids.push(cid);
                per_chain.push(rows);
            }
            Err(Error::Diverged { .. }) => diverged += 1,
            Err(e) => return Err(e),
        }
    }
    if (chain_ids.len() as f64) < SURVIVAL_FRACTION * cfg.n_chains as f64 {
        return Err(Error::EnsembleDiverged { diverged, total: cfg.n_chains });
    }
    let positions: Vec<Vec<Vec<f64>>> = (0..cfg.record_at.len())
        .map(|k| per_chain.iter().map(|rows| rows[k].clone()).collect())
        .collect();
    Ok(Trajectory {
        times: cfg.record_at.clone(),
        positions,
        chain_ids,
        n_requested: cfg.n_chains,
        diverged,
    })
}

/// Constant-step EM at frozen noise level `a`, the declared numerical
/// oracle for the exact SDE. One chain per initial point.
pub fn fine_reference_solve(
    spec: &DriftSpec,
    inits: &[Vec<f64>],
    horizon: f64,
    a: f64,
    h: f64,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if h > 1e-3 {
        return Err(Error::InvalidParameter(format!("reference step h = {h} > 1e-3")));
    }
    let n_steps = (horizon / h).round() as usize;
    let results: Vec<Result<Vec<f64>>> = inits
        .par_iter()
        .enumerate()
        .map(|(cid, x0)| {
            let stream = NoiseStream::new(master_seed, cid as u64);
            let mut state = ChainState::new(x0.clone());
            for _ in 0..n_steps {
                let (next, _) =
                    em_step(&state, spec, a, h, &NoiseModel::None, &stream, Hooks::default())?;
                state = next;
            }
            Ok(state.x)
        })
        .collect();
    results.into_iter().collect()
}

/// Two chains from (x0, y0) driven by the same Brownian increments at
/// frozen level a and constant step h. Returns (times, mean distances)
/// sampled at `n_records` evenly spaced checkpoints.
pub fn synchronous_pair(
    spec: &DriftSpec,
    x0: &[f64],
    y0: &[f64],
    a: f64,
    h: f64,
    horizon: f64,
    n_records: usize,
    stream: &NoiseStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_steps = (horizon / h).round() as usize;
    let every = (n_steps / n_records.max(1)).max(1);
    let mut xs = ChainState::new(x0.to_vec());
    let mut ys = ChainState::new(y0.to_vec());
    let mut times = Vec::new();
    let mut dists = Vec::new();
    for k in 1..=n_steps {
        let (nx, _) = em_step(&xs, spec, a, h, &NoiseModel::None, stream, Hooks::default())?;
        // same stream and same step index: identical ΔW (synchronous coupling)
        let (ny, _) = em_step(&ys, spec, a, h, &NoiseModel::None, stream, Hooks::default())?;
        xs = nx;
        ys = ny;
        if k % every == 0 {
            times.push(xs.t);
            dists.push(norm2(
                &xs.x.iter().zip(&ys.x).map(|(p, q)| p - q).collect::<Vec<_>>(),
            ));
        }
    }
    Ok((times, dists))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::field_get;
    use crate::potentials::catalog_get;

    fn drift_spec(pot: &str, field: &str) -> DriftSpec {
        let p = catalog_get(pot).unwrap();
        let dim = p.dim;
        let f = field_get(field, dim, Some(&p)).unwrap();
        DriftSpec::new(p, f).unwrap()
    }

    #[test]
    fn fixed_point_at_minimum_with_zero_noise() {
        let spec = drift_spec("quadratic1d(1)", "constant(1)");
        let state = ChainState::new(vec![0.0]);
        let stream = NoiseStream::new(1, 0);
        let hooks = Hooks { zero_dw: true, zero_a: false };
        let (next, _) =
            em_step(&state, &spec, 0.5, 0.1, &NoiseModel::None, &stream, hooks).unwrap();
        assert_eq!(next.x, vec![0.0]);
        assert!((next.t - 0.1).abs() < 1e-15);
        assert_eq!(next.step_index, 1);
    }

    #[test]
    fn gradient_descent_step_with_a_zero() {
        let spec = drift_spec("quadratic1d(1)", "constant(1)");
        let state = ChainState::new(vec![1.0]);
        let stream = NoiseStream::new(1, 0);
        let hooks = Hooks { zero_dw: false, zero_a: true };
        let (next, _) =
            em_step(&state, &spec, 1.0, 0.1, &NoiseModel::None, &stream, hooks).unwrap();
        assert!((next.x[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn em_step_deterministic() {
        let spec = drift_spec("quadratic1d(1)", "scalar_smooth");
        let state = ChainState::new(vec![0.7]);
        let s1 = NoiseStream::new(42, 3);
        let s2 = NoiseStream::new(42, 3);
        let (a, _) = em_step(&state, &spec, 0.9, 0.05, &NoiseModel::None, &s1, Hooks::default())
            .unwrap();
        let (b, _) = em_step(&state, &spec, 0.9, 0.05, &NoiseModel::None, &s2, Hooks::default())
            .unwrap();
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn interpolate_endpoints_and_errors() {
        let spec = drift_spec("quadratic1d(1)", "scalar_smooth");
        let state = ChainState::new(vec![0.4]);
        let stream = NoiseStream::new(5, 0);
        let (next, rec) =
            em_step(&state, &spec, 0.8, 0.2, &NoiseModel::None, &stream, Hooks::default())
                .unwrap();
        let at_start = interpolate(&rec, 0, 0.0, &stream, 0).unwrap();
        assert_eq!(at_start, state.x);
        let near_end = interpolate(&rec, 0, 0.2 - 1e-12, &stream, 0).unwrap();
        assert!((near_end[0] - next.x[0]).abs() < 1e-5);
        assert!(interpolate(&rec, 0, 0.3, &stream, 0).is_err());
        assert!(interpolate(&rec, 0, -0.1, &stream, 0).is_err());
    }

    #[test]
    fn bridge_conditional_moments() {
        // W_mid − W_t0 | ΔW has mean ΔW/2 and variance γ/4 per coordinate
        let spec = drift_spec("quadratic1d(1)", "constant(1)");
        let state = ChainState::new(vec![0.0]);
        let gamma = 0.2;
        let stream = NoiseStream::new(8, 0);
        let (_, rec) =
            em_step(&state, &spec, 1.0, gamma, &NoiseModel::None, &stream, Hooks::default())
                .unwrap();
        let t_mid = gamma / 2.0;
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for lane in 0..n {
            let x = interpolate(&rec, 0, t_mid, &stream, lane as u64).unwrap()[0];
            // strip drift: x = x0 + θγ·b + a·σ·w, here a·σ = 1, x0 = 0
            let w = x - 0.5 * gamma * rec.drift_term[0];
            sum += w;
            sum2 += w * w;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        let target_mean = 0.5 * rec.dw[0];
        let target_var = 0.25 * gamma;
        let se = (target_var / n as f64).sqrt();
        assert!((mean - target_mean).abs() < 4.0 * se, "mean {mean} vs {target_mean}");
        // relative SE of a variance estimate is √(2/n) ≈ 0.45%
        assert!((var - target_var).abs() < 0.02 * target_var, "var {var}");
    }

    #[test]
    fn plateau_equals_frozen_continuous_inside_first_plateau() {
        let spec = drift_spec("double_well_1d(2,8)", "constant(1)");
        let plateau = PlateauSchedule::new(100.0, 1.0, 1.0).unwrap();
        let (_, a1) = plateau.plateau_times(1);
        let seq = StepSequence::power(0.1, 0.7).unwrap();
        let stream = NoiseStream::new(3, 0);
        let mut sp = ChainState::new(vec![0.5]);
        let mut sc = ChainState::new(vec![0.5]);
        for _ in 0..200 {
            let (np, _) = em_step_plateau(
                &sp, &spec, &plateau, &seq, &NoiseModel::None, &stream, Hooks::default(),
            )
            .unwrap();
            let gamma = seq.gamma(sc.step_index + 1);
            let (nc, _) =
                em_step(&sc, &spec, a1, gamma, &NoiseModel::None, &stream, Hooks::default())
                    .unwrap();
            assert_eq!(np.x, nc.x);
            sp = np;
            sc = nc;
        }
        assert!(sp.t < 100.0, "test must stay inside plateau 1");
    }

    #[test]
    fn plateau_level_drops_at_boundary() {
        let plateau = PlateauSchedule::new(1.0, 1.0, 2.0).unwrap();
        let spec = drift_spec("quadratic1d(1)", "constant(1)");
        let seq = StepSequence::harmonic(0.4).unwrap();
        let stream = NoiseStream::new(4, 0);
        let mut state = ChainState::new(vec![0.1]);
        let mut levels = Vec::new();
        for _ in 0..30 {
            let a = plateau.level_at(state.t);
            let (next, rec) = em_step_plateau(
                &state, &spec, &plateau, &seq, &NoiseModel::None, &stream, Hooks::default(),
            )
            .unwrap();
            // scaled_sigma carries the level actually used
            assert!((rec.scaled_sigma[0] - a).abs() < 1e-15);
            levels.push(a);
            state = next;
        }
        let (t1, a1) = plateau.plateau_times(1);
        let (_, a2) = plateau.plateau_times(2);
        assert!(levels.contains(&a1) && levels.contains(&a2), "crossed T₁ = {t1}");
        let mut sorted = levels.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(levels, sorted, "levels must be non-increasing");
    }

    #[test]
    fn ensemble_deterministic_and_interpolation_consistent() {
        let spec = drift_spec("quadratic1d(1)", "scalar_smooth");
        let cfg = EnsembleConfig {
            mode: AnnealMode::Constant(0.8),
            steps: StepGrid::Decreasing(Arc::new(StepSequence::power(0.05, 0.7).unwrap())),
            noise: NoiseModel::None,
            horizon: 1.0,
            record_at: vec![0.0, 0.33, 0.5, 1.0],
            n_chains: 2,
            master_seed: 77,
            init: Init::Point(vec![0.3]),
        };
        let t1 = run_ensemble(&spec, &cfg).unwrap();
        let t2 = run_ensemble(&spec, &cfg).unwrap();
        assert_eq!(t1.positions, t2.positions);
        assert_eq!(t1.times, vec![0.0, 0.33, 0.5, 1.0]);
        assert_eq!(t1.at(0)[0], vec![0.3]);

        // replay chain 0 by hand and check the off-grid record at t=0.33
        let stream = NoiseStream::new(77, 0);
        let seq = StepSequence::power(0.05, 0.7).unwrap();
        let mut state = ChainState::new(vec![0.3]);
        loop {
            let gamma = seq.gamma(state.step_index + 1);
            let (next, rec) =
                em_step(&state, &spec, 0.8, gamma, &NoiseModel::None, &stream, Hooks::default())
                    .unwrap();
            if next.t >= 0.33 {
                let manual = interpolate(&rec, state.step_index, 0.33, &stream, 1).unwrap();
                assert_eq!(manual, t1.at(1)[0]);
                break;
            }
            state = next;
        }
    }

    #[test]
    fn ensemble_stationary_variance() {
        // constant(a): ν_a = Normal(0, a²/4) for quadratic1d(1), constant σ
        let spec = drift_spec("quadratic1d(1)", "constant(1)");
        let a = 0.7;
        let cfg = EnsembleConfig {
            mode: AnnealMode::Constant(a),
            steps: StepGrid::Constant(5e-3),
            noise: NoiseModel::None,
            horizon: 10.0,
            record_at: vec![10.0],
            n_chains: 2000,
            master_seed: 13,
            init: Init::Point(vec![0.0]),
        };
        let traj = run_ensemble(&spec, &cfg).unwrap();
        let xs = traj.final_positions();
        let n = xs.len() as f64;
        let mean: f64 = xs.iter().map(|x| x[0]).sum::<f64>() / n;
        let var: f64 = xs.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = a * a / 4.0;
        let se = target * (2.0 / n).sqrt();
        assert!((var - target).abs() < 3.0 * se + 0.01 * target, "var={var} target={target}");
    }

    #[test]
    fn ensemble_divergence_reported() {
        let spec = drift_spec("quadratic1d(1)", "constant(1)");
        let cfg = EnsembleConfig {
            mode: AnnealMode::Constant(1.0),
            steps: StepGrid::Constant(10.0), // absurd step: |1-2h| > 1
            noise: NoiseModel::None,
            horizon: 2000.0,
            record_at: vec![2000.0],
            n_chains: 20,
            master_seed: 1,
            init: Init::Point(vec![1.0]),
        };
        assert!(matches!(
            run_ensemble(&spec, &cfg),
            Err(Error::EnsembleDiverged { .. })
        ));
    }

    #[test]
    fn moment_boundedness_on_catalog() {
        for (pot, field) in [
            ("quadratic1d(1)", "constant(1)"),
            ("double_well_1d(2,8)", "scalar_smooth"),
            ("global_local_1d", "constant(1)"),
        ] {
            let spec = drift_spec(pot, field);
            let record_at: Vec<f64> = (1..=20).map(|k| k as f64).collect();
            let cfg = EnsembleConfig {
                mode: AnnealMode::Continuous(AnnealSchedule::new(1.0).unwrap()),
                steps: StepGrid::Decreasing(Arc::new(StepSequence::power(0.05, 0.7).unwrap())),
                noise: NoiseModel::None,
                horizon: 20.0,
                record_at,
                n_chains: 200,
                master_seed: 5,
                init: Init::Point(vec![2.0]),
            };
            let traj = run_ensemble(&spec, &cfg).unwrap();
            let mean_v: Vec<f64> = (0..traj.times.len())
                .map(|k| {
                    traj.at(k)
                        .iter()
                        .map(|x| spec.potential.eval(x))
                        .sum::<f64>()
                        / traj.at(k).len() as f64
                })
                .collect();
            let early = mean_v[..2.max(mean_v.len() / 10)]
                .iter()
                .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            for &v in &mean_v {
                assert!(v <= 10.0 * early, "{pot}/{field}: mean V {v} vs early {early}");
            }
        }
    }

    #[test]
    fn noise_models_mean_zero() {
        let spec = drift_spec("sigmoid_regression(64,0.5,3)", "constant(1)");
        let stream = NoiseStream::new(9, 0);
        let x = vec![0.3, -0.2, 0.5];
        for noise in [NoiseModel::GaussianV { c: 0.5 }, NoiseModel::Minibatch { m: 8 }] {
            let n = 10_000;
            let mut mean = vec![0.0; 3];
            let mut var = vec![0.0; 3];
            for step in 0..n {
                let z = noise.sample(&spec, &x, &stream, step).unwrap();
                for k in 0..3 {
                    mean[k] += z[k];
                    var[k] += z[k] * z[k];
                }
            }
            for k in 0..3 {
                mean[k] /= n as f64;
                var[k] = var[k] / n as f64 - mean[k] * mean[k];
                let se = (var[k] / n as f64).sqrt();
                assert!(mean[k].abs() <= 4.0 * se + 1e-12, "{noise:?}: mean {:?}", mean);
            }
        }
        // E|ζ|²/V bounded over probes for gaussian_v
        let g = NoiseModel::GaussianV { c: 0.5 };
        for probe in 0..20u64 {
            let x = vec![probe as f64 / 5.0 - 2.0, 0.1, -0.3];
            let v = spec.potential.eval(&x);
            let m2: f64 = (0..2000)
                .map(|s| {
                    let z = g.sample(&spec, &x, &stream, 1_000_000 + s).unwrap();
                    z.iter().map(|zi| zi * zi).sum::<f64>()
                })
                .sum::<f64>()
                / 2000.0;
            assert!(m2 / v < 1.0, "E|ζ|²/V = {}", m2 / v);
        }
    }

    #[test]
    fn minibatch_requires_regression() {
        let spec = drift_spec("quadratic1d(1)", "constant(1)");
        let stream = NoiseStream::new(1, 0);
        assert!(NoiseModel::Minibatch { m: 4 }
            .sample(&spec, &[0.1], &stream, 0)
            .is_err());
    }

    #[test]
    fn fine_reference_matches_euler_ode_at_zero_noise() {
        let spec = drift_spec("quadratic1d(1)", "constant(1)");
        let h = 1e-3;
        let out = fine_reference_solve(&spec, &[vec![1.0]], 1.0, 0.0, h, 3).unwrap();
        let n = (1.0 / h) as i32;
        let expect = (1.0 - 2.0 * h).powi(n);
        assert!((out[0][0] - expect).abs() < 1e-12);
        assert!(fine_reference_solve(&spec, &[vec![1.0]], 1.0, 0.0, 0.01, 3).is_err());
    }

    fn refinement_errors(a: f64, h0: f64, levels: usize, n_chains: usize) -> Vec<f64> {
        let spec = drift_spec("quadratic1d(1)", "scalar_smooth");
        let horizon = 1.0;
        let master = 31u64;
        // finest grid carries the shared path
        let finest = (horizon / h0) as usize * (1 << (levels - 1));
        let solve_at = |level: usize| -> Vec<f64> {
            (0..n_chains)
                .into_par_iter()
                .map(|cid| {
                    let stream = NoiseStream::new(master, cid as u64);
                    let stride = 1 << (levels - 1 - level);
                    let h = h0 / (1 << level) as f64;
                    let hf = horizon / finest as f64;
                    let mut x = 1.0f64;
                    let mut k = 0usize;
                    while k < finest {
                        // ΔW = sum of the finest increments it spans
                        let dw: f64 = (k..k + stride)
                            .map(|j| hf.sqrt() * stream.gaussian(j as u64, sub::DW, 0))
                            .sum();
                        let b = spec.drift(&[x], a).unwrap()[0];
                        let sig = spec.field.sigma(&[x])[0];
                        x += h * b + a * sig * dw;
                        k += stride;
                    }
                    x
                })
                .collect()
        };
        let sols: Vec<Vec<f64>> = (0..levels).map(solve_at).collect();
        (0..levels - 1)
            .map(|l| {
                sols[l].iter().zip(&sols[l + 1]).map(|(a, b)| (a - b).abs()).sum::<f64>()
                    / n_chains as f64
            })
            .collect()
    }

    #[test]
    fn strong_order_half_refinement() {
        // EM solutions at h and h/2 sharing a Brownian path differ by
        // O(√h) for multiplicative σ: successive differences shrink ≈ √2.
        // h must be small enough that the O(h) drift error (which would
        // push the ratio toward 2) is subdominant; at h0 = 0.00125 the
        // measured ratios sit within a few percent of √2.
        let e = refinement_errors(1.0, 0.00125, 4, 4000);
        for (l, pair) in e.windows(2).enumerate() {
            let ratio = pair[0] / pair[1];
            assert!(
                (1.25..=1.60).contains(&ratio),
                "level {l}: refinement ratio {ratio}, errors {e:?}"
            );
        }
    }

    #[test]
    fn synchronous_coupling_contracts_quadratic() {
        let spec = drift_spec("quadratic1d(1)", "constant(1)");
        let stream = NoiseStream::new(15, 0);
        let (times, dists) =
            synchronous_pair(&spec, &[1.0], &[-1.0], 0.5, 1e-3, 2.0, 10, &stream).unwrap();
        // constant σ: the difference obeys d(diff)/dt = −2·diff exactly
        for (t, d) in times.iter().zip(&dists) {
            let expect = 2.0 * (-2.0 * t).exp();
            assert!((d - expect).abs() / expect < 0.01, "t={t}: {d} vs {expect}");
        }
        // x = y stays identical
        let (_, dz) = synchronous_pair(&spec, &[0.4], &[0.4], 0.5, 1e-3, 1.0, 5, &stream).unwrap();
        assert!(dz.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn trajectory_csv_format() {
        let spec = drift_spec("ill_quadratic2d(4)", "constant(1)");
        let cfg = EnsembleConfig {
            mode: AnnealMode::Constant(1.0),
            steps: StepGrid::Constant(0.01),
            noise: NoiseModel::None,
            horizon: 0.1,
            record_at: vec![0.05, 0.1],
            n_chains: 3,
            master_seed: 2,
            init: Init::Point(vec![1.0, 1.0]),
        };
        let traj = run_ensemble(&spec, &cfg).unwrap();
        let csv = traj.csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "chain_id,t,x_1,x_2");
        assert_eq!(csv.lines().count(), 1 + 2 * 3);
    }
}
