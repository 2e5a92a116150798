//! Tamed-adaptive Euler-Maruyama scheme.
//!
//! From a grid point `t_k` the scheme moves to `t_{k+1} = t_k + h(X_k) Δ`
//! with
//!
//! ```text
//! X_{k+1} = X_k + b(θ_k, X_k) (t_{k+1} - t_k)
//!               + σ_Δ(θ_k, X_k) (W_{t_{k+1}} - W_{t_k})
//!               + γ_Δ(θ_k, X_k) (Z_{t_{k+1}} - Z_{t_k})
//! ```
//!
//! where `h` shrinks the step where the coefficients are large and `σ_Δ`,
//! `γ_Δ` are the tamed coefficients. The last step is clamped to land on the
//! horizon.
//!
//! Two paths are coupled by advancing them over the union of their grids:
//! every merged sub-interval gets one Brownian draw and one jump increment,
//! which are added to both paths' pending increments, and each path applies
//! its update only at its own grid points.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::RegimeModel;
use crate::noise::{fill_brownian, sample_chain, ChainPath, JumpDriver, JumpPath, SampleStreams};

/// Geometric family of base step sizes: level `l` uses `base_step * ratio^-l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelLadder {
    base_step: f64,
    ratio: u32,
}

impl LevelLadder {
    /// `base_step` must lie in `(0, 1]`; individual level steps are checked
    /// against `(0, 1)` when a path is simulated.
    pub fn new(base_step: f64, ratio: u32) -> Result<Self> {
        if !(base_step > 0.0 && base_step <= 1.0) {
            return Err(Error::config("base_step", format!("{base_step} not in (0, 1]")));
        }
        if ratio < 2 {
            return Err(Error::config("ratio", format!("{ratio} < 2")));
        }
        Ok(Self { base_step, ratio })
    }

    /// `Δ_l = ratio^-l`, the family used for strong-error tables.
    pub fn unit(ratio: u32) -> Result<Self> {
        Self::new(1.0, ratio)
    }

    pub fn base_step(&self) -> f64 {
        self.base_step
    }

    pub fn ratio(&self) -> u32 {
        self.ratio
    }

    pub fn step(&self, level: u32) -> f64 {
        self.base_step * (self.ratio as f64).powi(-(level as i32))
    }
}

impl Default for LevelLadder {
    fn default() -> Self {
        Self {
            base_step: 0.25,
            ratio: 2,
        }
    }
}

/// Step parameter and horizon of one discretisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaemConfig {
    pub step: f64,
    pub horizon: f64,
}

impl TaemConfig {
    pub fn new(step: f64, horizon: f64) -> Result<Self> {
        let c = Self { step, horizon };
        c.validate()?;
        Ok(c)
    }

    pub fn for_level(ladder: &LevelLadder, level: u32, horizon: f64) -> Result<Self> {
        Self::new(ladder.step(level), horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step < 1.0) {
            return Err(Error::config("step", format!("{} not in (0, 1)", self.step)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("horizon", format!("{} must be > 0", self.horizon)));
        }
        Ok(())
    }
}

/// One recorded grid point of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonPoint {
    pub t: f64,
    pub regime: usize,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub terminal: Vec<f64>,
    /// Number of scheme steps taken to reach the horizon.
    pub steps: usize,
    pub skeleton: Option<Vec<SkeletonPoint>>,
}

impl PathResult {
    /// Writes the skeleton as CSV with columns `t, regime, x_1..x_d`.
    pub fn write_skeleton_csv<W: Write>(&self, out: W) -> Result<()> {
        let skeleton = self.skeleton.as_deref().unwrap_or(&[]);
        let mut w = csv::Writer::from_writer(out);
        let d = self.terminal.len();
        let mut header = vec!["t".to_string(), "regime".to_string()];
        header.extend((1..=d).map(|k| format!("x_{k}")));
        w.write_record(&header)?;
        for p in skeleton {
            let mut row = vec![format!("{:e}", p.t), p.regime.to_string()];
            row.extend(p.x.iter().map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Terminal values of a fine and a coarse path driven by the same noise.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSample {
    pub fine: Vec<f64>,
    pub coarse: Vec<f64>,
    pub fine_steps: usize,
    pub coarse_steps: usize,
    /// Sum of every Brownian sub-increment drawn for the pair.
    pub checksum: f64,
}

/// One Brownian increment over `(t0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedIncrement {
    pub t0: f64,
    pub t1: f64,
    pub dw: Vec<f64>,
}

/// Brownian increments of a coupled run: the merged sub-intervals and the
/// increments each leg actually applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CouplingTrace {
    pub sub_increments: Vec<TracedIncrement>,
    pub fine: Vec<TracedIncrement>,
    pub coarse: Vec<TracedIncrement>,
}

#[inline]
fn pow_abs(v: f64, e: f64) -> f64 {
    if e == e.trunc() && e.abs() < 64.0 {
        v.powi(e as i32)
    } else {
        v.powf(e)
    }
}

/// Scratch space and frozen coefficients of one path.
struct Leg {
    dim: usize,
    step: f64,
    sqrt_step: f64,
    x: Vec<f64>,
    t_grid: f64,
    t_next: f64,
    regime: usize,
    steps: usize,
    b: Vec<f64>,
    sig: Vec<f64>,
    gam: Vec<f64>,
    dw: Vec<f64>,
    dz: Vec<f64>,
    scratch_b: Vec<f64>,
    scratch_m: Vec<f64>,
}

impl Leg {
    fn new(dim: usize, step: f64, x0: &[f64]) -> Self {
        Self {
            dim,
            step,
            sqrt_step: step.sqrt(),
            x: x0.to_vec(),
            t_grid: 0.0,
            t_next: 0.0,
            regime: 0,
            steps: 0,
            b: vec![0.0; dim],
            sig: vec![0.0; dim * dim],
            gam: vec![0.0; dim * dim],
            dw: vec![0.0; dim],
            dz: vec![0.0; dim],
            scratch_b: vec![0.0; dim],
            scratch_m: vec![0.0; dim * dim],
        }
    }

    /// Freezes the coefficients at the current grid point and schedules the next one.
    fn prepare(&mut self, model: &RegimeModel, chain: &ChainPath, horizon: f64) -> Result<()> {
        self.regime = chain.state_at_unchecked(self.t_grid);
        let h = eval_frozen(
            model,
            self.regime,
            &self.x,
            &mut self.b,
            &mut self.sig,
            &mut self.gam,
            &mut self.scratch_b,
            &mut self.scratch_m,
        )?;
        let sig_n = linalg::norm(&self.sig);
        let gam_n = linalg::norm(&self.gam);
        let b_n = linalg::norm(&self.b);
        let s_scale = 1.0 / (1.0 + self.sqrt_step * sig_n);
        let g_scale = 1.0 / (1.0 + self.sqrt_step * gam_n * (1.0 + b_n));
        self.sig.iter_mut().for_each(|v| *v *= s_scale);
        self.gam.iter_mut().for_each(|v| *v *= g_scale);

        let dt = h * self.step;
        let next = self.t_grid + dt;
        if !(dt > 0.0) || next <= self.t_grid {
            return Err(Error::ZeroProgress {
                step: self.steps,
                time: self.t_grid,
                step_size: dt,
            });
        }
        self.t_next = if next >= horizon { horizon } else { next };
        Ok(())
    }

    /// Applies the pending increments and moves to `t_next`.
    fn apply(&mut self) -> Result<()> {
        let dt = self.t_next - self.t_grid;
        for k in 0..self.dim {
            self.x[k] += self.b[k] * dt;
        }
        linalg::mul_vec_acc(&self.sig, &self.dw, 1.0, &mut self.x);
        linalg::mul_vec_acc(&self.gam, &self.dz, 1.0, &mut self.x);
        self.steps += 1;
        self.t_grid = self.t_next;
        self.dw.fill(0.0);
        self.dz.fill(0.0);
        if !linalg::all_finite(&self.x) {
            return Err(Error::NonFiniteState {
                step: self.steps,
                time: self.t_grid,
            });
        }
        Ok(())
    }

    /// Continuous extension at `t` in `[t_grid, t_next]` given the pending increments.
    fn observe(&self, t: f64) -> Vec<f64> {
        let mut out = self.x.clone();
        let dt = t - self.t_grid;
        for (o, b) in out.iter_mut().zip(&self.b) {
            *o += b * dt;
        }
        linalg::mul_vec_acc(&self.sig, &self.dw, 1.0, &mut out);
        linalg::mul_vec_acc(&self.gam, &self.dz, 1.0, &mut out);
        out
    }
}

fn locate_non_finite(regime: usize, x: &[f64], b: &[f64], sig: &[f64]) -> Error {
    let what = if !linalg::all_finite(b) {
        "drift"
    } else if !linalg::all_finite(sig) {
        "diffusion"
    } else {
        "jump coefficient"
    };
    Error::NonFiniteCoefficient {
        what,
        regime,
        point: x.to_vec(),
    }
}

/// Evaluates every regime at `x`, leaving the untamed coefficients of
/// `regime` in `b, sig, gam`, and returns `h(x)`.
#[allow(clippy::too_many_arguments)]
fn eval_frozen(
    model: &RegimeModel,
    regime: usize,
    x: &[f64],
    b: &mut [f64],
    sig: &mut [f64],
    gam: &mut [f64],
    scratch_b: &mut [f64],
    scratch_m: &mut [f64],
) -> Result<f64> {
    let coeffs = model.coefficients();
    let meta = model.meta();
    let mut sum_b2 = 0.0;
    let mut sum_s = 0.0;
    let mut sum_g = 0.0;
    for i in 0..model.num_regimes() {
        let (bb, ss, gg);
        if i == regime {
            coeffs.drift(i, x, b);
            coeffs.diffusion(i, x, sig);
            coeffs.jump(i, x, gam);
            bb = linalg::norm_sq(b);
            ss = linalg::norm(sig);
            gg = linalg::norm(gam);
            if !(bb + ss + gg).is_finite() {
                return Err(locate_non_finite(i, x, b, sig));
            }
        } else {
            coeffs.drift(i, x, scratch_b);
            bb = linalg::norm_sq(scratch_b);
            coeffs.diffusion(i, x, scratch_m);
            ss = linalg::norm(scratch_m);
            if !(bb + ss).is_finite() {
                return Err(locate_non_finite(i, x, scratch_b, scratch_m));
            }
            coeffs.jump(i, x, scratch_m);
            gg = linalg::norm(scratch_m);
            if !gg.is_finite() {
                return Err(locate_non_finite(i, x, &[], &[]));
            }
        }
        sum_b2 += bb;
        sum_s += ss;
        sum_g += gg;
    }
    let growth = pow_abs(linalg::norm(x), meta.drift_growth);
    let base = 1.0 + sum_b2 + sum_s + growth;
    Ok(meta.taming_base / (base * base + pow_abs(sum_g, meta.moment_order)))
}

/// Adaptive step-size function `h(x)`, always in `(0, h0]`.
pub fn step_size(model: &RegimeModel, x: &[f64]) -> Result<f64> {
    let d = model.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let (mut b, mut s, mut g) = (vec![0.0; d], vec![0.0; d * d], vec![0.0; d * d]);
    let (mut sb, mut sm) = (vec![0.0; d], vec![0.0; d * d]);
    eval_frozen(model, 0, x, &mut b, &mut s, &mut g, &mut sb, &mut sm)
}

/// `σ_Δ = σ / (1 + √Δ |σ|)`.
pub fn tamed_diffusion(model: &RegimeModel, step: f64, regime: usize, x: &[f64]) -> Matrix {
    let s = model.diffusion(regime, x);
    let scale = 1.0 / (1.0 + step.sqrt() * s.frobenius());
    Matrix::from_row_major(s.dim(), s.as_slice().iter().map(|v| v * scale).collect())
}

/// `γ_Δ = γ / (1 + √Δ |γ| (1 + |b|))`.
pub fn tamed_jump(model: &RegimeModel, step: f64, regime: usize, x: &[f64]) -> Matrix {
    let g = model.jump_coeff(regime, x);
    let b = linalg::norm(&model.drift(regime, x));
    let scale = 1.0 / (1.0 + step.sqrt() * g.frobenius() * (1.0 + b));
    Matrix::from_row_major(g.dim(), g.as_slice().iter().map(|v| v * scale).collect())
}

fn check_inputs(model: &RegimeModel, driver: &JumpDriver, x0: &[f64]) -> Result<()> {
    driver.check_dim(model.dim())?;
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x0.len(),
        });
    }
    Ok(())
}

/// Simulates one path to the horizon and returns its terminal value.
pub fn simulate_terminal(
    model: &RegimeModel,
    driver: &JumpDriver,
    config: &TaemConfig,
    streams: &mut SampleStreams,
) -> Result<PathResult> {
    simulate_single(model, driver, config, model.x0(), streams, false)
}

/// Like [`simulate_terminal`], additionally recording every grid point.
pub fn simulate_path(
    model: &RegimeModel,
    driver: &JumpDriver,
    config: &TaemConfig,
    streams: &mut SampleStreams,
) -> Result<PathResult> {
    simulate_single(model, driver, config, model.x0(), streams, true)
}

fn simulate_single(
    model: &RegimeModel,
    driver: &JumpDriver,
    config: &TaemConfig,
    x0: &[f64],
    streams: &mut SampleStreams,
    record: bool,
) -> Result<PathResult> {
    config.validate()?;
    check_inputs(model, driver, x0)?;
    let horizon = config.horizon;
    let chain = sample_chain(model.generator(), model.initial_regime(), horizon, &mut streams.chain);
    let mut jumps = JumpPath::new(driver, horizon, &mut streams.jumps);
    let mut leg = Leg::new(model.dim(), config.step, x0);
    let mut skeleton = record.then(Vec::new);

    leg.prepare(model, &chain, horizon)?;
    if let Some(s) = skeleton.as_mut() {
        s.push(SkeletonPoint {
            t: 0.0,
            regime: leg.regime,
            x: leg.x.clone(),
        });
    }
    loop {
        let (t0, t1) = (leg.t_grid, leg.t_next);
        fill_brownian(&mut streams.brownian, t1 - t0, &mut leg.dw);
        jumps.increment(t0, t1, &mut streams.jumps, &mut leg.dz);
        leg.apply()?;
        if leg.t_grid >= horizon {
            break;
        }
        leg.prepare(model, &chain, horizon)?;
        if let Some(s) = skeleton.as_mut() {
            s.push(SkeletonPoint {
                t: leg.t_grid,
                regime: leg.regime,
                x: leg.x.clone(),
            });
        }
    }
    if let Some(s) = skeleton.as_mut() {
        s.push(SkeletonPoint {
            t: horizon,
            regime: chain.state_at_unchecked(horizon),
            x: leg.x.clone(),
        });
    }
    Ok(PathResult {
        terminal: leg.x,
        steps: leg.steps,
        skeleton,
    })
}

/// Simulates the pair (level `level`, level `level - 1`) of `ladder` with shared noise.
pub fn simulate_coupled_pair(
    model: &RegimeModel,
    driver: &JumpDriver,
    ladder: &LevelLadder,
    level: u32,
    horizon: f64,
    streams: &mut SampleStreams,
) -> Result<CoupledSample> {
    if level == 0 {
        return Err(Error::config("level", "coupled pairs need level >= 1"));
    }
    simulate_coupled_steps(
        model,
        driver,
        ladder.step(level),
        ladder.step(level - 1),
        horizon,
        streams,
        None,
    )
}

/// Coupled simulation with explicit fine and coarse step parameters.
///
/// When `trace` is given, every Brownian increment is recorded so the
/// coupling can be audited.
pub fn simulate_coupled_steps(
    model: &RegimeModel,
    driver: &JumpDriver,
    fine_step: f64,
    coarse_step: f64,
    horizon: f64,
    streams: &mut SampleStreams,
    trace: Option<&mut CouplingTrace>,
) -> Result<CoupledSample> {
    TaemConfig::new(fine_step, horizon)?;
    TaemConfig::new(coarse_step, horizon)?;
    let x0 = model.x0();
    let out = run_coupled(
        model,
        driver,
        [(fine_step, x0), (coarse_step, x0)],
        horizon,
        &[],
        streams,
        trace,
    )?;
    let [fine, coarse] = out.legs;
    Ok(CoupledSample {
        fine: fine.x,
        coarse: coarse.x,
        fine_steps: fine.steps,
        coarse_steps: coarse.steps,
        checksum: out.checksum,
    })
}

/// Two paths with the same step parameter started from `x0` and `y0`,
/// driven by the same noise. Returns both values at each observation time
/// (which must be sorted and lie in `[0, horizon]`).
#[allow(clippy::too_many_arguments)]
pub fn simulate_paired_starts(
    model: &RegimeModel,
    driver: &JumpDriver,
    step: f64,
    x0: &[f64],
    y0: &[f64],
    horizon: f64,
    observe: &[f64],
    streams: &mut SampleStreams,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    TaemConfig::new(step, horizon)?;
    check_inputs(model, driver, y0)?;
    if observe.windows(2).any(|w| w[0] > w[1]) || observe.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(Error::config("observation times", "must be sorted and within [0, horizon]"));
    }
    let out = run_coupled(model, driver, [(step, x0), (step, y0)], horizon, observe, streams, None)?;
    Ok(out.observations)
}

struct CoupledOutcome {
    legs: [Leg; 2],
    checksum: f64,
    observations: Vec<(Vec<f64>, Vec<f64>)>,
}

fn run_coupled(
    model: &RegimeModel,
    driver: &JumpDriver,
    specs: [(f64, &[f64]); 2],
    horizon: f64,
    observe: &[f64],
    streams: &mut SampleStreams,
    mut trace: Option<&mut CouplingTrace>,
) -> Result<CoupledOutcome> {
    check_inputs(model, driver, specs[0].1)?;
    check_inputs(model, driver, specs[1].1)?;
    let d = model.dim();
    let chain = sample_chain(model.generator(), model.initial_regime(), horizon, &mut streams.chain);
    let mut jumps = JumpPath::new(driver, horizon, &mut streams.jumps);
    let mut legs = specs.map(|(step, x0)| Leg::new(d, step, x0));
    for leg in legs.iter_mut() {
        leg.prepare(model, &chain, horizon)?;
    }

    let mut observations = Vec::with_capacity(observe.len());
    let mut obs_idx = 0;
    while obs_idx < observe.len() && observe[obs_idx] <= 0.0 {
        observations.push((legs[0].x.clone(), legs[1].x.clone()));
        obs_idx += 1;
    }

    let mut dw = vec![0.0; d];
    let mut dz = vec![0.0; d];
    let mut checksum = 0.0;
    let mut t = 0.0;
    while t < horizon {
        let next_obs = observe.get(obs_idx).copied().unwrap_or(f64::INFINITY);
        let t_next = legs[0]
            .t_next
            .min(legs[1].t_next)
            .min(chain.next_transition_after(t))
            .min(jumps.next_event())
            .min(next_obs);

        fill_brownian(&mut streams.brownian, t_next - t, &mut dw);
        jumps.increment(t, t_next, &mut streams.jumps, &mut dz);
        for leg in legs.iter_mut() {
            for k in 0..d {
                leg.dw[k] += dw[k];
                leg.dz[k] += dz[k];
            }
        }
        checksum += dw.iter().sum::<f64>();
        if let Some(tr) = trace.as_deref_mut() {
            tr.sub_increments.push(TracedIncrement {
                t0: t,
                t1: t_next,
                dw: dw.clone(),
            });
        }
        t = t_next;

        for (which, leg) in legs.iter_mut().enumerate() {
            if leg.t_next == t {
                if let Some(tr) = trace.as_deref_mut() {
                    let rec = TracedIncrement {
                        t0: leg.t_grid,
                        t1: leg.t_next,
                        dw: leg.dw.clone(),
                    };
                    if which == 0 {
                        tr.fine.push(rec);
                    } else {
                        tr.coarse.push(rec);
                    }
                }
                leg.apply()?;
                if t < horizon {
                    leg.prepare(model, &chain, horizon)?;
                }
            }
        }
        while obs_idx < observe.len() && observe[obs_idx] <= t {
            let s = observe[obs_idx];
            observations.push((legs[0].observe(s), legs[1].observe(s)));
            obs_idx += 1;
        }
    }
    Ok(CoupledOutcome {
        legs,
        checksum,
        observations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{benchmark_model, zero_model};

    #[test]
    fn step_size_of_benchmark_at_origin() {
        let m = benchmark_model();
        let h = step_size(&m, &[0.0; 3]).unwrap();
        // (1 + 3 + 12)^2 + 0.4^10
        let expected = 1.0 / (256.0 + 0.4f64.powi(10));
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 3.90625e-3).abs() < 1e-7);
    }

    #[test]
    fn step_size_of_zero_model_is_h0() {
        let m = zero_model(2, 1).unwrap();
        assert_eq!(step_size(&m, &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn step_size_shrinks_away_from_origin() {
        let m = benchmark_model();
        let h1 = step_size(&m, &[1.0; 3]).unwrap();
        let h2 = step_size(&m, &[2.0; 3]).unwrap();
        assert!(h2 < h1);
    }

    #[test]
    fn ladder_steps() {
        let l = LevelLadder::default();
        assert_eq!(l.step(0), 0.25);
        assert_eq!(l.step(3), 0.25 / 8.0);
        assert_eq!(LevelLadder::unit(2).unwrap().step(5), 1.0 / 32.0);
        assert!(LevelLadder::new(1.5, 2).is_err());
        assert!(LevelLadder::new(0.5, 1).is_err());
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(TaemConfig::new(1.0, 1.0).is_err());
        assert!(TaemConfig::new(0.5, 0.0).is_err());
        assert!(TaemConfig::new(0.5, 1.0).is_ok());
    }

    #[test]
    fn zero_dynamics_is_a_fixed_point() {
        let m = zero_model(3, 2).unwrap().with_initial_state(vec![0.5, -1.0, 2.0]).unwrap();
        let cfg = TaemConfig::new(0.1, 2.0).unwrap();
        let h = step_size(&m, m.x0()).unwrap();
        let expected = (2.0 / (h * 0.1)).ceil() as usize;
        for seed in 0..5 {
            let mut s = SampleStreams::from_seed(seed);
            let r = simulate_terminal(&m, &JumpDriver::benchmark_finite(), &cfg, &mut s).unwrap();
            assert_eq!(r.terminal, vec![0.5, -1.0, 2.0]);
            assert!(r.steps.abs_diff(expected) <= 1);
        }
    }

    #[test]
    fn coupled_level_zero_is_rejected() {
        let m = benchmark_model();
        let mut s = SampleStreams::from_seed(1);
        let r = simulate_coupled_pair(&m, &JumpDriver::none(3), &LevelLadder::default(), 0, 1.0, &mut s);
        assert!(r.is_err());
    }
}
