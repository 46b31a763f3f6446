//! File formats, surface export and the command-line front end for the
//! Monge–Ampère spline solvers in `mongeampere-core`.

pub mod cli;
pub mod io;
pub mod surface;

use std::time::Instant;

use mongeampere_core::iterate::Clock;

/// Seconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
