use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::model::Generator;

/// A realisation of the switching chain on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPath {
    initial_state: usize,
    transitions: Vec<(f64, usize)>,
    horizon: f64,
}

impl ChainPath {
    /// Builds a path from explicit transitions, checking ordering and that
    /// consecutive states differ.
    pub fn new(initial_state: usize, transitions: Vec<(f64, usize)>, horizon: f64) -> Result<Self> {
        let mut prev_t = 0.0;
        let mut prev_s = initial_state;
        for &(t, s) in &transitions {
            if !(t > prev_t && t <= horizon) || s == prev_s {
                return Err(Error::InvalidModel(format!(
                    "invalid chain transition ({t}, {s}) after ({prev_t}, {prev_s})"
                )));
            }
            prev_t = t;
            prev_s = s;
        }
        Ok(Self {
            initial_state,
            transitions,
            horizon,
        })
    }

    /// A path that never leaves `state`.
    pub fn constant(state: usize, horizon: f64) -> Self {
        Self {
            initial_state: state,
            transitions: Vec::new(),
            horizon,
        }
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn transitions(&self) -> &[(f64, usize)] {
        &self.transitions
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Right-continuous state at time `t`.
    pub fn state_at(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                time: t,
                horizon: self.horizon,
            });
        }
        Ok(self.state_at_unchecked(t))
    }

    pub(crate) fn state_at_unchecked(&self, t: f64) -> usize {
        let k = self.transitions.partition_point(|&(tau, _)| tau <= t);
        if k == 0 {
            self.initial_state
        } else {
            self.transitions[k - 1].1
        }
    }

    /// First transition time strictly after `t`, or infinity.
    pub fn next_transition_after(&self, t: f64) -> f64 {
        let k = self.transitions.partition_point(|&(tau, _)| tau <= t);
        self.transitions.get(k).map_or(f64::INFINITY, |&(tau, _)| tau)
    }

    /// Total time spent in `state` over `[0, horizon]`.
    pub fn occupation_time(&self, state: usize) -> f64 {
        let mut total = 0.0;
        let mut t = 0.0;
        let mut s = self.initial_state;
        for &(tau, next) in &self.transitions {
            if s == state {
                total += tau - t;
            }
            t = tau;
            s = next;
        }
        if s == state {
            total += self.horizon - t;
        }
        total
    }
}

/// Samples the chain by alternating exponential holding times and jumps of
/// the embedded chain.
pub fn sample_chain<R: Rng + ?Sized>(
    generator: &Generator,
    initial_state: usize,
    horizon: f64,
    rng: &mut R,
) -> ChainPath {
    assert!(initial_state < generator.num_states(), "initial state out of range");
    let mut transitions = Vec::new();
    let mut state = initial_state;
    let mut t = 0.0;
    loop {
        let exit = generator.exit_rate(state);
        if exit <= 0.0 {
            break;
        }
        let hold: f64 = Exp1.sample(rng);
        let next_t = t + hold / exit;
        if next_t > horizon {
            break;
        }
        if next_t <= t {
            continue;
        }
        let mut u = rng.random::<f64>() * exit;
        let mut next = state;
        for (j, &q) in generator.row(state).iter().enumerate() {
            if j == state || q <= 0.0 {
                continue;
            }
            next = j;
            if u < q {
                break;
            }
            u -= q;
        }
        t = next_t;
        state = next;
        transitions.push((t, state));
    }
    ChainPath {
        initial_state,
        transitions,
        horizon,
    }
}
