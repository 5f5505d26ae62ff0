//! Virtual communication link between the local and remote sites.
//!
//! Time is counted in physics ticks. A message sent at tick `n` is released
//! at `n + round((delay + jitter)/dt)`; messages never overtake each other,
//! and the receiver holds the most recently delivered value.

use alloc::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkModel {
    /// Local → remote delay [s].
    pub forward_delay: f64,
    /// Remote → local delay [s].
    pub return_delay: f64,
    /// Standard deviation of the per-message delay perturbation [s].
    pub jitter: f64,
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.forward_delay >= 0.0 && self.forward_delay.is_finite(),
            "link.forward_delay",
            "must be non-negative",
        )?;
        ensure(
            self.return_delay >= 0.0 && self.return_delay.is_finite(),
            "link.return_delay",
            "must be non-negative",
        )?;
        ensure(
            self.jitter >= 0.0 && self.jitter.is_finite(),
            "link.jitter",
            "must be non-negative",
        )
    }
}

/// One direction of the link.
#[derive(Debug, Clone)]
pub struct Link<T> {
    delay: f64,
    jitter: f64,
    dt: f64,
    queue: VecDeque<(u64, T)>,
    last_release: u64,
    held: T,
    rng: ChaCha8Rng,
}

impl<T: Clone> Link<T> {
    /// `stream` separates the random streams of the two directions.
    pub fn new(delay: f64, jitter: f64, dt: f64, seed: u64, stream: u64, initial: T) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            delay,
            jitter,
            dt,
            queue: VecDeque::new(),
            last_release: 0,
            held: initial,
            rng,
        }
    }

    fn release_tick(&mut self, tick: u64) -> u64 {
        let mut delay = self.delay;
        if self.jitter > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            delay += self.jitter * z;
        }
        let ticks = libm::round(delay.max(0.0) / self.dt) as u64;
        (tick + ticks).max(self.last_release)
    }

    /// Queues `value` sent at `tick`.
    pub fn send(&mut self, tick: u64, value: T) {
        let release = self.release_tick(tick);
        self.last_release = release;
        self.queue.push_back((release, value));
    }

    /// Delivers everything released by `tick` and returns the held value.
    pub fn receive(&mut self, tick: u64) -> &T {
        while let Some((release, _)) = self.queue.front() {
            if *release > tick {
                break;
            }
            if let Some((_, v)) = self.queue.pop_front() {
                self.held = v;
            }
        }
        &self.held
    }

    /// Send and receive in one call.
    pub fn transmit(&mut self, tick: u64, value: T) -> T {
        self.send(tick, value);
        self.receive(tick).clone()
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }
}
