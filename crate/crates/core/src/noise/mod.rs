//! Driving noise: switching chain, Brownian increments and centred Levy jumps.

mod chain;
mod jumps;
mod rng;

pub use chain::{sample_chain, ChainPath};
pub use jumps::{
    gamma_jump_increment, gamma_jump_increment_into, sample_jump_schedule, JumpPath, JumpSchedule,
};
pub use rng::{Purpose, SampleStreams, SeedTree, StreamRng};

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// One coordinate of a compound Poisson driver with Gaussian jump sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonComponent {
    pub intensity: f64,
    pub jump_mean: f64,
    pub jump_std: f64,
}

impl PoissonComponent {
    /// `E[Z_t] / t` before compensation.
    pub fn mean_rate(&self) -> f64 {
        self.intensity * self.jump_mean
    }

    /// `E|xi|^p` for the Gaussian jump size.
    fn abs_moment(&self, p: f64) -> f64 {
        let (mu, s) = (self.jump_mean, self.jump_std);
        if s == 0.0 {
            return mu.abs().powf(p);
        }
        if mu == 0.0 {
            return s.powf(p) * 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0)
                / std::f64::consts::PI.sqrt();
        }
        // Composite Simpson on [mu - 12s, mu + 12s], split at the kink of |z|^p.
        let (a, b) = (mu - 12.0 * s, mu + 12.0 * s);
        let density = |z: f64| {
            let u = (z - mu) / s;
            (-0.5 * u * u).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        let f = |z: f64| z.abs().powf(p) * density(z);
        if a < 0.0 && b > 0.0 {
            simpson(&f, a, 0.0, 4000) + simpson(&f, 0.0, b, 4000)
        } else {
            simpson(&f, a, b, 4000)
        }
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// One coordinate of a bilateral Gamma driver: `G+ - G-` with
/// `G± ~ Gamma(shape± t, scale 1/rate±)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilateralGammaComponent {
    pub shape_pos: f64,
    pub rate_pos: f64,
    pub shape_neg: f64,
    pub rate_neg: f64,
}

impl BilateralGammaComponent {
    pub fn symmetric(shape: f64, rate: f64) -> Self {
        Self {
            shape_pos: shape,
            rate_pos: rate,
            shape_neg: shape,
            rate_neg: rate,
        }
    }

    pub fn mean_rate(&self) -> f64 {
        self.shape_pos / self.rate_pos - self.shape_neg / self.rate_neg
    }

    /// `∫|z|^p nu(dz)` of the Levy measure `a e^{-b|z|} / |z|` on each half-line.
    fn abs_moment(&self, p: f64) -> f64 {
        let g = gamma(p);
        self.shape_pos * g / self.rate_pos.powf(p) + self.shape_neg * g / self.rate_neg.powf(p)
    }
}

/// The pure-jump Levy process driving the jump term, one independent
/// process per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpDriver {
    /// Finite activity.
    CompoundPoisson(Vec<PoissonComponent>),
    /// Infinite activity.
    BilateralGamma(Vec<BilateralGammaComponent>),
}

impl JumpDriver {
    pub fn compound_poisson(dim: usize, intensity: f64, jump_mean: f64, jump_std: f64) -> Result<Self> {
        let d = JumpDriver::CompoundPoisson(vec![
            PoissonComponent {
                intensity,
                jump_mean,
                jump_std
            };
            dim
        ]);
        d.validate()?;
        Ok(d)
    }

    /// Symmetric bilateral Gamma with equal shape and rate on both sides.
    pub fn bilateral_gamma(dim: usize, shape: f64, rate: f64) -> Result<Self> {
        let d = JumpDriver::BilateralGamma(vec![BilateralGammaComponent::symmetric(shape, rate); dim]);
        d.validate()?;
        Ok(d)
    }

    /// A driver that never jumps.
    pub fn none(dim: usize) -> Self {
        JumpDriver::CompoundPoisson(vec![
            PoissonComponent {
                intensity: 0.0,
                jump_mean: 0.0,
                jump_std: 0.0
            };
            dim
        ])
    }

    /// Finite-activity driver of the benchmark experiments: intensity 10, N(0, 0.4^2) sizes.
    pub fn benchmark_finite() -> Self {
        Self::compound_poisson(3, 10.0, 0.0, 0.4).expect("valid driver")
    }

    /// Infinite-activity driver of the benchmark experiments: shape 1, rate 10 on both sides.
    pub fn benchmark_infinite() -> Self {
        Self::bilateral_gamma(3, 1.0, 10.0).expect("valid driver")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidDriver(s));
        match self {
            JumpDriver::CompoundPoisson(c) => {
                for (k, p) in c.iter().enumerate() {
                    if !(p.intensity >= 0.0 && p.intensity.is_finite()) {
                        return bad(format!("component {k}: intensity must be >= 0"));
                    }
                    if !(p.jump_std >= 0.0 && p.jump_std.is_finite() && p.jump_mean.is_finite()) {
                        return bad(format!("component {k}: invalid jump law"));
                    }
                }
            }
            JumpDriver::BilateralGamma(c) => {
                for (k, g) in c.iter().enumerate() {
                    let ok = |v: f64| v.is_finite() && v >= 0.0;
                    if !ok(g.shape_pos) || !ok(g.shape_neg) {
                        return bad(format!("component {k}: shapes must be >= 0"));
                    }
                    if !(g.rate_pos > 0.0 && g.rate_neg > 0.0 && g.rate_pos.is_finite() && g.rate_neg.is_finite()) {
                        return bad(format!("component {k}: rates must be > 0"));
                    }
                }
            }
        }
        if self.dim() == 0 {
            return bad("driver needs at least one component".into());
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            JumpDriver::CompoundPoisson(c) => c.len(),
            JumpDriver::BilateralGamma(c) => c.len(),
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim(),
            })
        }
    }

    pub fn is_finite_activity(&self) -> bool {
        matches!(self, JumpDriver::CompoundPoisson(_))
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            JumpDriver::CompoundPoisson(_) => "compound-poisson",
            JumpDriver::BilateralGamma(_) => "bilateral-gamma",
        }
    }

    /// Per-coordinate drift `E[Z_t]/t` of the uncompensated process; the
    /// samplers subtract it so every increment is centred.
    pub fn compensator(&self) -> Vec<f64> {
        match self {
            JumpDriver::CompoundPoisson(c) => c.iter().map(PoissonComponent::mean_rate).collect(),
            JumpDriver::BilateralGamma(c) => c.iter().map(BilateralGammaComponent::mean_rate).collect(),
        }
    }

    /// True when no compensation is needed for the increments to be centred.
    pub fn is_centered(&self) -> bool {
        self.compensator().iter().all(|&m| m == 0.0)
    }

    /// Per-coordinate variance of `Z_1`.
    pub fn unit_variance(&self) -> Vec<f64> {
        match self {
            JumpDriver::CompoundPoisson(c) => c
                .iter()
                .map(|p| p.intensity * (p.jump_std * p.jump_std + p.jump_mean * p.jump_mean))
                .collect(),
            JumpDriver::BilateralGamma(c) => c
                .iter()
                .map(|g| g.shape_pos / (g.rate_pos * g.rate_pos) + g.shape_neg / (g.rate_neg * g.rate_neg))
                .collect(),
        }
    }

    /// `∫|z|^p nu(dz)` aggregated over coordinates (the Levy measure lives on the axes).
    pub fn levy_moment(&self, p: f64) -> Result<f64> {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::DivergentMoment { order: p });
        }
        Ok(match self {
            JumpDriver::CompoundPoisson(c) => c
                .iter()
                .filter(|c| c.intensity > 0.0)
                .map(|c| c.intensity * c.abs_moment(p))
                .sum(),
            JumpDriver::BilateralGamma(c) => {
                let active = c.iter().filter(|g| g.shape_pos > 0.0 || g.shape_neg > 0.0);
                if p <= 0.0 && active.clone().next().is_some() {
                    return Err(Error::DivergentMoment { order: p });
                }
                active.map(|g| g.abs_moment(p)).sum()
            }
        })
    }

    /// `(1 / (2 L0)) ∫|z|((1 + L0|z|)^(p0 - 1) - 1) nu(dz)`, the jump weight in
    /// the dissipativity condition.
    ///
    /// Expanded binomially over integer powers; a fractional exponent is
    /// rounded up, which bounds the integral from above.
    pub fn dissipativity_factor(&self, l0: f64, p0: f64) -> Result<f64> {
        let n = (p0 - 1.0).ceil().max(1.0) as u32;
        if l0 == 0.0 {
            return Ok(0.5 * n as f64 * self.levy_moment(2.0)?);
        }
        let mut total = 0.0;
        let mut binom = 1.0;
        for k in 1..=n {
            binom *= (n - k + 1) as f64 / k as f64;
            total += binom * l0.powi(k as i32) * self.levy_moment(k as f64 + 1.0)?;
        }
        Ok(total / (2.0 * l0))
    }
}

/// `dim` i.i.d. `N(0, dt)` coordinates.
pub fn brownian_increment<R: Rng + ?Sized>(rng: &mut R, dt: f64, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    fill_brownian(rng, dt, &mut out);
    out
}

#[inline]
pub fn fill_brownian<R: Rng + ?Sized>(rng: &mut R, dt: f64, out: &mut [f64]) {
    let s = dt.sqrt();
    for o in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *o = s * z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levy_moment_closed_forms() {
        let cp = JumpDriver::compound_poisson(1, 10.0, 0.0, 0.4).unwrap();
        assert!((cp.levy_moment(2.0).unwrap() - 1.6).abs() < 1e-12);
        let bg = JumpDriver::bilateral_gamma(1, 1.0, 10.0).unwrap();
        assert!((bg.levy_moment(2.0).unwrap() - 0.02).abs() < 1e-12);
        assert_eq!(JumpDriver::none(3).levy_moment(2.0).unwrap(), 0.0);
        let flat = JumpDriver::bilateral_gamma(2, 0.0, 10.0).unwrap();
        assert_eq!(flat.levy_moment(2.0).unwrap(), 0.0);
        assert!(bg.levy_moment(0.0).is_err());
        assert!(cp.levy_moment(-1.0).is_err());
    }

    #[test]
    fn gaussian_moment_quadrature_matches_even_moments() {
        // E xi^2 = mu^2 + s^2, E xi^4 = mu^4 + 6 mu^2 s^2 + 3 s^4
        let c = PoissonComponent {
            intensity: 1.0,
            jump_mean: 0.3,
            jump_std: 0.5,
        };
        assert!((c.abs_moment(2.0) - (0.09 + 0.25)).abs() < 1e-9);
        let m4 = 0.3f64.powi(4) + 6.0 * 0.09 * 0.25 + 3.0 * 0.0625;
        assert!((c.abs_moment(4.0) - m4).abs() < 1e-9);
    }

    #[test]
    fn compensator_and_centering() {
        assert!(JumpDriver::benchmark_finite().is_centered());
        assert!(JumpDriver::benchmark_infinite().is_centered());
        let skew = JumpDriver::compound_poisson(1, 2.0, 0.5, 0.1).unwrap();
        assert_eq!(skew.compensator(), vec![1.0]);
        assert!(!skew.is_centered());
    }

    #[test]
    fn dissipativity_factor_small_l0_limit() {
        let cp = JumpDriver::benchmark_finite();
        let exact = cp.dissipativity_factor(0.0, 10.0).unwrap();
        let near = cp.dissipativity_factor(1e-9, 10.0).unwrap();
        assert!((exact - near).abs() < 1e-6 * exact);
    }

    #[test]
    fn driver_validation() {
        assert!(JumpDriver::compound_poisson(1, -1.0, 0.0, 1.0).is_err());
        assert!(JumpDriver::bilateral_gamma(1, 1.0, 0.0).is_err());
        assert!(JumpDriver::bilateral_gamma(0, 1.0, 1.0).is_err());
    }
}
