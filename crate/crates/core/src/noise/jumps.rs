use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use super::{BilateralGammaComponent, JumpDriver, PoissonComponent};
use crate::error::{Error, Result};

/// Pre-sampled jumps of a compound Poisson driver on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSchedule {
    horizon: f64,
    components: Vec<Vec<(f64, f64)>>,
    compensator: Vec<f64>,
}

impl JumpSchedule {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Ordered `(time, size)` pairs of one coordinate.
    pub fn component(&self, k: usize) -> &[(f64, f64)] {
        &self.components[k]
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// Drift rate subtracted from each coordinate so increments are centred.
    pub fn compensator(&self) -> &[f64] {
        &self.compensator
    }

    pub fn jump_count(&self) -> usize {
        self.components.iter().map(Vec::len).sum()
    }

    /// `Z_t` of one coordinate (compensated).
    pub fn value_at(&self, k: usize, t: f64) -> f64 {
        let jumps: f64 = self.components[k]
            .iter()
            .take_while(|&&(tau, _)| tau <= t)
            .map(|&(_, s)| s)
            .sum();
        jumps - self.compensator[k] * t
    }
}

/// Draws jump times and sizes of each compound Poisson coordinate.
pub fn sample_jump_schedule<R: Rng + ?Sized>(
    driver: &JumpDriver,
    horizon: f64,
    rng: &mut R,
) -> Result<JumpSchedule> {
    let comps = match driver {
        JumpDriver::CompoundPoisson(c) => c,
        JumpDriver::BilateralGamma(_) => {
            return Err(Error::UnsupportedDriver {
                expected: "finite-activity",
            })
        }
    };
    let components = comps
        .iter()
        .map(|c| sample_component(c, horizon, rng))
        .collect();
    Ok(JumpSchedule {
        horizon,
        components,
        compensator: comps.iter().map(PoissonComponent::mean_rate).collect(),
    })
}

fn sample_component<R: Rng + ?Sized>(c: &PoissonComponent, horizon: f64, rng: &mut R) -> Vec<(f64, f64)> {
    let mean = c.intensity * horizon;
    if mean <= 0.0 {
        return Vec::new();
    }
    let count: f64 = Poisson::new(mean).expect("positive Poisson mean").sample(rng);
    let sizes = Normal::new(c.jump_mean, c.jump_std).expect("valid jump law");
    let mut times: Vec<f64> = (0..count as usize)
        .map(|_| horizon * (1.0 - rng.random::<f64>()))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.into_iter().map(|t| (t, sizes.sample(rng))).collect()
}

/// One bilateral Gamma increment per coordinate over a step of length `dt`,
/// written into `out`.
pub fn gamma_jump_increment_into<R: Rng + ?Sized>(
    comps: &[BilateralGammaComponent],
    rng: &mut R,
    dt: f64,
    out: &mut [f64],
) {
    for (o, c) in out.iter_mut().zip(comps) {
        let up = gamma_draw(c.shape_pos * dt, c.rate_pos, rng);
        let down = gamma_draw(c.shape_neg * dt, c.rate_neg, rng);
        *o = up - down - c.mean_rate() * dt;
    }
}

/// One bilateral Gamma increment per coordinate over a step of length `dt`.
pub fn gamma_jump_increment<R: Rng + ?Sized>(driver: &JumpDriver, rng: &mut R, dt: f64) -> Result<Vec<f64>> {
    match driver {
        JumpDriver::BilateralGamma(comps) => {
            let mut out = vec![0.0; comps.len()];
            gamma_jump_increment_into(comps, rng, dt, &mut out);
            Ok(out)
        }
        JumpDriver::CompoundPoisson(_) => Err(Error::UnsupportedDriver {
            expected: "bilateral Gamma",
        }),
    }
}

#[inline]
fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    if shape <= 0.0 {
        return 0.0;
    }
    Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng)
}

/// Jump noise of a single sample, consumed interval by interval in time order.
#[derive(Debug, Clone)]
pub enum JumpPath {
    Schedule {
        schedule: JumpSchedule,
        cursors: Vec<usize>,
    },
    Gamma(Vec<BilateralGammaComponent>),
}

impl JumpPath {
    /// Samples whatever must be fixed up front (the compound Poisson schedule).
    pub fn new<R: Rng + ?Sized>(driver: &JumpDriver, horizon: f64, rng: &mut R) -> Self {
        match driver {
            JumpDriver::CompoundPoisson(_) => {
                let schedule = sample_jump_schedule(driver, horizon, rng).expect("finite activity");
                let cursors = vec![0; schedule.num_components()];
                JumpPath::Schedule { schedule, cursors }
            }
            JumpDriver::BilateralGamma(c) => JumpPath::Gamma(c.clone()),
        }
    }

    /// Next jump time not yet consumed; infinity for infinite-activity noise.
    pub fn next_event(&self) -> f64 {
        match self {
            JumpPath::Schedule { schedule, cursors } => cursors
                .iter()
                .enumerate()
                .filter_map(|(k, &c)| schedule.components[k].get(c).map(|&(t, _)| t))
                .fold(f64::INFINITY, f64::min),
            JumpPath::Gamma(_) => f64::INFINITY,
        }
    }

    /// Writes `Z_{t1} - Z_{t0}` into `out`. Calls must cover consecutive intervals.
    pub fn increment<R: Rng + ?Sized>(&mut self, t0: f64, t1: f64, rng: &mut R, out: &mut [f64]) {
        let dt = t1 - t0;
        match self {
            JumpPath::Schedule { schedule, cursors } => {
                for (k, o) in out.iter_mut().enumerate() {
                    let jumps = &schedule.components[k];
                    let mut sum = 0.0;
                    let c = &mut cursors[k];
                    while *c < jumps.len() && jumps[*c].0 <= t1 {
                        sum += jumps[*c].1;
                        *c += 1;
                    }
                    *o = sum - schedule.compensator[k] * dt;
                }
            }
            JumpPath::Gamma(comps) => gamma_jump_increment_into(comps, rng, dt, out),
        }
    }
}
