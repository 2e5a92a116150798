//! Regime-switching jump-diffusion models.
//!
//! A model is a set of per-regime coefficients `(b, sigma, gamma)` together
//! with the generator of the switching chain and the structural constants that
//! describe the growth, dissipativity and contraction of the coefficients.
//! Regimes are indexed from zero.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::noise::JumpDriver;

/// Generator of a finite-state continuous-time Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    n: usize,
    rates: Vec<f64>,
}

impl Generator {
    /// Builds a generator from a full square matrix.
    ///
    /// Off-diagonal entries must be nonnegative and each row must sum to zero
    /// (up to `1e-9`); the diagonal is then re-derived from the off-diagonals so
    /// rows sum to zero to rounding.
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::InvalidGenerator("empty matrix".into()));
        }
        let mut rates = Vec::with_capacity(n * n);
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGenerator(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if !linalg::all_finite(row) {
                return Err(Error::InvalidGenerator(format!("row {i} is not finite")));
            }
            let mut off = 0.0;
            for (j, &q) in row.iter().enumerate() {
                if i != j {
                    if q < 0.0 {
                        return Err(Error::InvalidGenerator(format!(
                            "negative rate {q} from state {i} to {j}"
                        )));
                    }
                    off += q;
                }
            }
            let sum = off + row[i];
            if sum.abs() > 1e-9 * (1.0 + off) {
                return Err(Error::InvalidGenerator(format!(
                    "row {i} sums to {sum}, expected 0"
                )));
            }
            for (j, &q) in row.iter().enumerate() {
                rates.push(if i == j { -off } else { q });
            }
        }
        Ok(Self { n, rates })
    }

    /// Builds a generator from its off-diagonal rates; diagonal entries are ignored.
    pub fn from_rates(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = matrix;
        for (i, row) in m.iter_mut().enumerate() {
            if let Some(d) = row.get_mut(i) {
                *d = 0.0;
            }
            let off: f64 = row.iter().sum();
            if let Some(d) = row.get_mut(i) {
                *d = -off;
            }
        }
        Self::new(m)
    }

    /// The single-state chain.
    pub fn trivial() -> Self {
        Self {
            n: 1,
            rates: vec![0.0],
        }
    }

    /// Two states with switching rates `q12` (0 to 1) and `q21` (1 to 0).
    pub fn two_state(q12: f64, q21: f64) -> Result<Self> {
        Self::new(vec![vec![-q12, q12], vec![q21, -q21]])
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[from * self.n + to]
    }

    /// Total exit rate `-q_ii` of a state.
    pub fn exit_rate(&self, state: usize) -> f64 {
        -self.rate(state, state)
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.rates[state * self.n..(state + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Per-regime coefficient callbacks.
///
/// Implementations write into caller-provided buffers: `out` has length `d`
/// for the drift and `d * d` (row-major) for the two matrix coefficients.
/// Evaluations must be pure; one instance is shared across worker threads.
pub trait Coefficients: Send + Sync {
    fn drift(&self, regime: usize, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, regime: usize, x: &[f64], out: &mut [f64]);
    fn jump(&self, regime: usize, x: &[f64], out: &mut [f64]);
}

type CoeffFn = dyn Fn(usize, &[f64], &mut [f64]) + Send + Sync;

/// [`Coefficients`] assembled from three closures.
pub struct FnCoefficients {
    drift: Box<CoeffFn>,
    diffusion: Box<CoeffFn>,
    jump: Box<CoeffFn>,
}

impl FnCoefficients {
    pub fn new<B, S, G>(drift: B, diffusion: S, jump: G) -> Self
    where
        B: Fn(usize, &[f64], &mut [f64]) + Send + Sync + 'static,
        S: Fn(usize, &[f64], &mut [f64]) + Send + Sync + 'static,
        G: Fn(usize, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            drift: Box::new(drift),
            diffusion: Box::new(diffusion),
            jump: Box::new(jump),
        }
    }
}

impl Coefficients for FnCoefficients {
    fn drift(&self, regime: usize, x: &[f64], out: &mut [f64]) {
        (self.drift)(regime, x, out)
    }
    fn diffusion(&self, regime: usize, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(regime, x, out)
    }
    fn jump(&self, regime: usize, x: &[f64], out: &mut [f64]) {
        (self.jump)(regime, x, out)
    }
}

/// Declared structural constants of a model.
///
/// These are metadata: the scheme only consumes `drift_growth`,
/// `moment_order` and `taming_base` (through the step-size function). The
/// rest feed the planner and the sampled condition probes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMetadata {
    /// Polynomial growth exponent `l` of the drift's local Lipschitz constant.
    pub drift_growth: f64,
    /// Polynomial growth exponent `m` of the diffusion; 0 means Lipschitz.
    pub diffusion_growth: f64,
    /// Moment order `p0` of the dissipativity condition.
    pub moment_order: f64,
    pub zeta0: f64,
    pub zeta1: f64,
    /// One-sided Lipschitz (contraction) rate.
    pub contraction_rate: f64,
    /// Slack on the diffusion term of the contraction condition. Not used by the scheme.
    pub condition_epsilon: f64,
    /// Scale `h0` of the adaptive step-size function.
    pub taming_base: f64,
    /// Lipschitz constants of drift, diffusion and jump coefficient.
    pub lipschitz: [f64; 3],
}

impl Default for ModelMetadata {
    fn default() -> Self {
        Self {
            drift_growth: 1.0,
            diffusion_growth: 0.0,
            moment_order: 2.0,
            zeta0: -1.0,
            zeta1: 1.0,
            contraction_rate: -1.0,
            condition_epsilon: 0.0,
            taming_base: 1.0,
            lipschitz: [1.0, 1.0, 1.0],
        }
    }
}

impl ModelMetadata {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidModel(what.to_string()));
        let all = [
            self.drift_growth,
            self.diffusion_growth,
            self.moment_order,
            self.zeta0,
            self.zeta1,
            self.contraction_rate,
            self.condition_epsilon,
            self.taming_base,
        ];
        if !linalg::all_finite(&all) || !linalg::all_finite(&self.lipschitz) {
            return bad("metadata must be finite");
        }
        if self.drift_growth < 1.0 {
            return bad("drift growth exponent l must be >= 1");
        }
        if self.diffusion_growth < 0.0 {
            return bad("diffusion growth exponent m must be >= 0");
        }
        if self.moment_order < 2.0 {
            return bad("moment order p0 must be >= 2");
        }
        if self.zeta1 < 0.0 {
            return bad("zeta1 must be >= 0");
        }
        if self.taming_base <= 0.0 {
            return bad("taming base h0 must be > 0");
        }
        if self.condition_epsilon < 0.0 {
            return bad("condition epsilon must be >= 0");
        }
        if self.lipschitz.iter().any(|&l| l < 0.0) {
            return bad("Lipschitz constants must be >= 0");
        }
        Ok(())
    }
}

/// A regime-switching Levy-driven SDE with its initial condition.
#[derive(Clone)]
pub struct RegimeModel {
    name: String,
    dim: usize,
    generator: Generator,
    coefficients: Arc<dyn Coefficients>,
    meta: ModelMetadata,
    x0: Vec<f64>,
    initial_regime: usize,
}

impl fmt::Debug for RegimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegimeModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("generator", &self.generator)
            .field("meta", &self.meta)
            .field("x0", &self.x0)
            .field("initial_regime", &self.initial_regime)
            .finish_non_exhaustive()
    }
}

impl RegimeModel {
    /// Creates a model started at the origin in regime 0.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        generator: Generator,
        coefficients: Arc<dyn Coefficients>,
        meta: ModelMetadata,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        meta.validate()?;
        let model = Self {
            name: name.into(),
            dim,
            generator,
            coefficients,
            meta,
            x0: vec![0.0; dim],
            initial_regime: 0,
        };
        model.check_at(&vec![0.0; dim])?;
        Ok(model)
    }

    pub fn with_initial_state(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x0.len(),
            });
        }
        if !linalg::all_finite(&x0) {
            return Err(Error::InvalidModel("initial state must be finite".into()));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn with_initial_regime(mut self, regime: usize) -> Result<Self> {
        if regime >= self.num_regimes() {
            return Err(Error::InvalidModel(format!(
                "initial regime {regime} out of range"
            )));
        }
        self.initial_regime = regime;
        Ok(self)
    }

    /// Replaces the switching generator; the number of states may not change.
    pub fn with_generator(mut self, generator: Generator) -> Result<Self> {
        if generator.num_states() != self.num_regimes() {
            return Err(Error::InvalidGenerator(format!(
                "expected {} states, got {}",
                self.num_regimes(),
                generator.num_states()
            )));
        }
        self.generator = generator;
        Ok(self)
    }

    pub fn with_metadata(mut self, meta: ModelMetadata) -> Result<Self> {
        meta.validate()?;
        self.meta = meta;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_regimes(&self) -> usize {
        self.generator.num_states()
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn meta(&self) -> &ModelMetadata {
        &self.meta
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn initial_regime(&self) -> usize {
        self.initial_regime
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coefficients.as_ref()
    }

    pub fn drift(&self, regime: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.coefficients.drift(regime, x, &mut out);
        out
    }

    pub fn diffusion(&self, regime: usize, x: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(self.dim);
        self.coefficients.diffusion(regime, x, m.as_mut_slice());
        m
    }

    pub fn jump_coeff(&self, regime: usize, x: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(self.dim);
        self.coefficients.jump(regime, x, m.as_mut_slice());
        m
    }

    /// `L0 = max(3 L3, sum_i |gamma(i, 0)|)`, the linear-growth bound of the jump coefficient.
    pub fn jump_growth_bound(&self) -> f64 {
        let origin = vec![0.0; self.dim];
        let at_origin: f64 = (0..self.num_regimes())
            .map(|i| self.jump_coeff(i, &origin).frobenius())
            .sum();
        (3.0 * self.meta.lipschitz[2]).max(at_origin)
    }

    /// Evaluates all coefficients in every regime at `x`, failing on non-finite output.
    pub fn check_at(&self, x: &[f64]) -> Result<()> {
        for i in 0..self.num_regimes() {
            let fail = |what| Error::NonFiniteCoefficient {
                what,
                regime: i,
                point: x.to_vec(),
            };
            if !linalg::all_finite(&self.drift(i, x)) {
                return Err(fail("drift"));
            }
            if !linalg::all_finite(self.diffusion(i, x).as_slice()) {
                return Err(fail("diffusion"));
            }
            if !linalg::all_finite(self.jump_coeff(i, x).as_slice()) {
                return Err(fail("jump coefficient"));
            }
        }
        Ok(())
    }
}

/// Lipschitz information attached to a test functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lipschitz {
    Global(f64),
    /// Not globally Lipschitz; `surrogate` is a local constant used for planning.
    Local { surrogate: f64 },
}

impl Lipschitz {
    pub fn constant(&self) -> f64 {
        match *self {
            Lipschitz::Global(l) => l,
            Lipschitz::Local { surrogate } => surrogate,
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self, Lipschitz::Global(_))
    }
}

type MapFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A test function `phi: R^d -> R` whose invariant-measure mean is estimated.
#[derive(Clone)]
pub struct Functional {
    name: String,
    map: Arc<MapFn>,
    lipschitz: Lipschitz,
    dim: Option<usize>,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl Functional {
    pub fn new<F>(name: impl Into<String>, lipschitz: Lipschitz, map: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            map: Arc::new(map),
            lipschitz,
            dim: None,
        }
    }

    /// Restricts the functional to inputs of a fixed dimension.
    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), Lipschitz::Global(0.0), move |_| c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz(&self) -> Lipschitz {
        self.lipschitz
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.map)(x)
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.dim {
            Some(d) if d != dim => Err(Error::DimensionMismatch {
                expected: d,
                got: dim,
            }),
            _ => Ok(()),
        }
    }
}

struct Benchmark;

impl Coefficients for Benchmark {
    fn drift(&self, regime: usize, x: &[f64], out: &mut [f64]) {
        let c = if regime == 0 { 1.0 } else { 2.0 };
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = c - xi - xi * xi * xi;
        }
    }

    fn diffusion(&self, regime: usize, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let d = if regime == 0 {
            [x[1] * x[1], x[2] * x[2], x[0] * x[0]]
        } else {
            [x[0] * x[0], x[1] * x[1], x[2] * x[2]]
        };
        for (k, v) in d.iter().enumerate() {
            out[k * 3 + k] = 0.3 * v;
        }
    }

    fn jump(&self, regime: usize, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let d = if regime == 0 {
            [x[0], x[1] + x[2].sin(), x[2].cos()]
        } else {
            [x[2].cos(), x[0], x[1] + x[2].sin()]
        };
        for (k, v) in d.iter().enumerate() {
            out[k * 3 + k] = 0.2 * v;
        }
    }
}

/// Three-dimensional two-regime model with cubic drifts, quadratic
/// diffusions and bounded-plus-linear jump coefficients, started at the origin.
///
/// Regime 0 has drift `1 - x_k - x_k^3`, regime 1 has `2 - x_k - x_k^3`.
/// The generator defaults to unit switching rates in both directions.
pub fn benchmark_model() -> RegimeModel {
    let meta = ModelMetadata {
        drift_growth: 2.0,
        diffusion_growth: 1.0,
        moment_order: 10.0,
        zeta0: -0.5,
        zeta1: 30.0,
        contraction_rate: -1.0,
        condition_epsilon: 0.1,
        taming_base: 1.0,
        lipschitz: [1.5, 0.3, 0.2 / 3f64.sqrt()],
    };
    RegimeModel::new(
        "benchmark",
        3,
        Generator::two_state(1.0, 1.0).expect("valid generator"),
        Arc::new(Benchmark),
        meta,
    )
    .expect("benchmark model is valid")
}

/// Single-regime linear model `dX = -rate X dt + noise dW` with isotropic
/// constant diffusion and no jumps. Its invariant law is centred Gaussian.
pub fn linear_test_model(dim: usize, rate: f64, noise: f64) -> Result<RegimeModel> {
    if rate <= 0.0 || !rate.is_finite() {
        return Err(Error::InvalidModel("linear model rate must be positive".into()));
    }
    let coeffs = FnCoefficients::new(
        move |_, x, out| {
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = -rate * xi;
            }
        },
        move |_, x, out| {
            let d = x.len();
            out.fill(0.0);
            for k in 0..d {
                out[k * d + k] = noise;
            }
        },
        |_, _, out| out.fill(0.0),
    );
    let meta = ModelMetadata {
        drift_growth: 1.0,
        diffusion_growth: 0.0,
        moment_order: 2.0,
        zeta0: -rate / 2.0,
        zeta1: dim as f64 * noise * noise,
        contraction_rate: -2.0 * rate,
        condition_epsilon: 0.0,
        taming_base: 1.0,
        lipschitz: [rate, 0.0, 0.0],
    };
    RegimeModel::new("linear", dim, Generator::trivial(), Arc::new(coeffs), meta)
}

/// Model with identically zero coefficients in `num_regimes` regimes.
pub fn zero_model(dim: usize, num_regimes: usize) -> Result<RegimeModel> {
    let coeffs = FnCoefficients::new(
        |_, _, out| out.fill(0.0),
        |_, _, out| out.fill(0.0),
        |_, _, out| out.fill(0.0),
    );
    let generator = if num_regimes <= 1 {
        Generator::trivial()
    } else {
        let n = num_regimes;
        Generator::from_rates(vec![vec![1.0; n]; n])?
    };
    RegimeModel::new("zero", dim, generator, Arc::new(coeffs), ModelMetadata::default())
}

/// One sampled inequality that contradicts the declared metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: &'static str,
    pub regime: usize,
    pub point: Vec<f64>,
    pub other: Option<Vec<f64>>,
    pub lhs: f64,
    pub bound: f64,
}

/// Outcome of [`probe_conditions`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// Largest dissipativity left-hand side seen over the cloud.
    pub max_dissipativity_lhs: f64,
    /// Smallest `zeta1` consistent with the samples and the declared `zeta0`.
    pub zeta1_hat: f64,
    /// Smallest `zeta0` consistent with the samples and the declared `zeta1`;
    /// `None` when the cloud only contains the origin.
    pub zeta0_hat: Option<f64>,
    /// Smallest contraction rate consistent with the sampled pairs; `None` if all pairs coincide.
    pub alpha_hat: Option<f64>,
    pub violations: Vec<Violation>,
    pub cloud_size: usize,
    pub pair_count: usize,
}

impl ConditionReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Left-hand side of the dissipativity condition at `x` in `regime`.
pub fn dissipativity_lhs(
    model: &RegimeModel,
    driver: &JumpDriver,
    regime: usize,
    x: &[f64],
) -> Result<f64> {
    let meta = model.meta();
    let b = model.drift(regime, x);
    let s = model.diffusion(regime, x);
    let g = model.jump_coeff(regime, x);
    check_finite(&b, "drift", regime, x)?;
    check_finite(s.as_slice(), "diffusion", regime, x)?;
    check_finite(g.as_slice(), "jump coefficient", regime, x)?;
    let l0 = model.jump_growth_bound();
    let jump_factor = driver.dissipativity_factor(l0, meta.moment_order)?;
    Ok(linalg::dot(x, &b)
        + 0.5 * (meta.moment_order - 1.0) * linalg::norm_sq(s.as_slice())
        + linalg::norm_sq(g.as_slice()) * jump_factor)
}

/// Left-hand side of the contraction condition at the pair `(x, y)` in `regime`.
pub fn contraction_lhs(
    model: &RegimeModel,
    driver: &JumpDriver,
    regime: usize,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let bx = model.drift(regime, x);
    let by = model.drift(regime, y);
    let sx = model.diffusion(regime, x);
    let sy = model.diffusion(regime, y);
    let gx = model.jump_coeff(regime, x);
    let gy = model.jump_coeff(regime, y);
    for (p, b, s, g) in [(x, &bx, &sx, &gx), (y, &by, &sy, &gy)] {
        check_finite(b, "drift", regime, p)?;
        check_finite(s.as_slice(), "diffusion", regime, p)?;
        check_finite(g.as_slice(), "jump coefficient", regime, p)?;
    }
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let db: Vec<f64> = bx.iter().zip(&by).map(|(a, b)| a - b).collect();
    let eps = model.meta().condition_epsilon;
    Ok(2.0 * linalg::dot(&diff, &db)
        + (1.0 + eps) * linalg::dist_sq(sx.as_slice(), sy.as_slice())
        + linalg::dist_sq(gx.as_slice(), gy.as_slice()) * driver.levy_moment(2.0)?)
}

fn check_finite(v: &[f64], what: &'static str, regime: usize, x: &[f64]) -> Result<()> {
    if linalg::all_finite(v) {
        Ok(())
    } else {
        Err(Error::NonFiniteCoefficient {
            what,
            regime,
            point: x.to_vec(),
        })
    }
}

/// Spot-checks the dissipativity and contraction inequalities on samples.
///
/// Every regime is evaluated at every cloud point and every pair. The report
/// carries the tightest constants consistent with the samples and lists the
/// samples at which the declared `zeta0, zeta1` or `alpha` are contradicted.
pub fn probe_conditions(
    model: &RegimeModel,
    driver: &JumpDriver,
    cloud: &[Vec<f64>],
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<ConditionReport> {
    if cloud.is_empty() || pairs.is_empty() {
        return Err(Error::InvalidModel(
            "condition probe needs a nonempty cloud and pair list".into(),
        ));
    }
    driver.check_dim(model.dim())?;
    let meta = model.meta();
    let tol = 1e-12;
    let mut max_lhs = f64::NEG_INFINITY;
    let mut zeta1_hat: f64 = 0.0;
    let mut zeta0_hat: Option<f64> = None;
    let mut alpha_hat: Option<f64> = None;
    let mut violations = Vec::new();

    for x in cloud {
        if x.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: x.len(),
            });
        }
        let r2 = linalg::norm_sq(x);
        for i in 0..model.num_regimes() {
            let lhs = dissipativity_lhs(model, driver, i, x)?;
            max_lhs = max_lhs.max(lhs);
            zeta1_hat = zeta1_hat.max(lhs - meta.zeta0 * r2);
            if r2 > 0.0 {
                let z0 = (lhs - meta.zeta1) / r2;
                zeta0_hat = Some(zeta0_hat.map_or(z0, |z: f64| z.max(z0)));
            }
            let bound = meta.zeta0 * r2 + meta.zeta1;
            if lhs > bound + tol * (1.0 + bound.abs()) {
                violations.push(Violation {
                    condition: "dissipativity",
                    regime: i,
                    point: x.clone(),
                    other: None,
                    lhs,
                    bound,
                });
            }
        }
    }

    for (x, y) in pairs {
        for p in [x, y] {
            if p.len() != model.dim() {
                return Err(Error::DimensionMismatch {
                    expected: model.dim(),
                    got: p.len(),
                });
            }
        }
        let d2 = linalg::dist_sq(x, y);
        for i in 0..model.num_regimes() {
            let lhs = contraction_lhs(model, driver, i, x, y)?;
            if d2 > 0.0 {
                let a = lhs / d2;
                alpha_hat = Some(alpha_hat.map_or(a, |b: f64| b.max(a)));
            }
            let bound = meta.contraction_rate * d2;
            if lhs > bound + tol * (1.0 + bound.abs()) {
                violations.push(Violation {
                    condition: "contraction",
                    regime: i,
                    point: x.clone(),
                    other: Some(y.clone()),
                    lhs,
                    bound,
                });
            }
        }
    }

    Ok(ConditionReport {
        max_dissipativity_lhs: max_lhs,
        zeta1_hat,
        zeta0_hat,
        alpha_hat,
        violations,
        cloud_size: cloud.len(),
        pair_count: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen_err(m: Vec<Vec<f64>>) -> bool {
        matches!(Generator::new(m), Err(Error::InvalidGenerator(_)))
    }

    #[test]
    fn generator_rows_sum_to_zero() {
        let g = Generator::new(vec![
            vec![-0.3, 0.1, 0.2],
            vec![0.7, -1.0, 0.3],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        for i in 0..3 {
            assert!(g.row(i).iter().sum::<f64>().abs() < 1e-12);
        }
        assert_eq!(g.exit_rate(2), 0.0);
    }

    #[test]
    fn generator_rejects_bad_input() {
        assert!(gen_err(vec![vec![1.0, -1.0], vec![1.0, -1.0]]));
        assert!(gen_err(vec![vec![-1.0, 2.0], vec![1.0, -1.0]]));
        assert!(gen_err(vec![vec![-1.0, 1.0]]));
        assert!(gen_err(vec![]));
    }

    #[test]
    fn benchmark_values_at_origin() {
        let m = benchmark_model();
        let o = [0.0; 3];
        assert_eq!(m.drift(0, &o), vec![1.0, 1.0, 1.0]);
        assert_eq!(m.drift(1, &o), vec![2.0, 2.0, 2.0]);
        assert_eq!(m.diffusion(0, &o), Matrix::zeros(3));
        assert_eq!(m.jump_coeff(1, &o), Matrix::diag(&[0.2, 0.0, 0.0]));
        assert_eq!(m.jump_coeff(0, &o), Matrix::diag(&[0.0, 0.0, 0.2]));
        assert_eq!(m.x0(), &[0.0; 3]);
        assert_eq!(m.meta().drift_growth, 2.0);
        assert_eq!(m.meta().diffusion_growth, 1.0);
        assert_eq!(m.meta().moment_order, 10.0);
        assert_eq!(m.generator().rate(0, 1), 1.0);
        assert_eq!(m.generator().rate(1, 0), 1.0);
    }

    #[test]
    fn benchmark_jump_growth_bound() {
        let m = benchmark_model();
        // max(3 * 0.2/sqrt 3, 0.2 + 0.2)
        assert!((m.jump_growth_bound() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn metadata_validation() {
        let meta = ModelMetadata {
            moment_order: 1.5,
            ..Default::default()
        };
        assert!(meta.validate().is_err());
        let meta = ModelMetadata {
            taming_base: 0.0,
            ..Default::default()
        };
        assert!(meta.validate().is_err());
        let meta = ModelMetadata {
            zeta1: -1.0,
            ..Default::default()
        };
        assert!(meta.validate().is_err());
    }

    #[test]
    fn non_finite_coefficients_are_rejected() {
        let coeffs = FnCoefficients::new(
            |_, x, out| {
                out[0] = 1.0 / x[0];
            },
            |_, _, out| out.fill(0.0),
            |_, _, out| out.fill(0.0),
        );
        let err = RegimeModel::new(
            "bad",
            1,
            Generator::trivial(),
            Arc::new(coeffs),
            ModelMetadata::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteCoefficient { what: "drift", .. }));
    }

    #[test]
    fn functional_dimension_check() {
        let f = Functional::new("sum", Lipschitz::Global(1.0), |x| x.iter().sum()).with_dim(3);
        assert!(f.check_dim(3).is_ok());
        assert!(f.check_dim(2).is_err());
        assert_eq!(Functional::constant(2.5).eval(&[1.0]), 2.5);
    }
}
