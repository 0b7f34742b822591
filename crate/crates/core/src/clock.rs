//! Wall-clock abstraction so the solvers stay `no_std`.

/// A monotonic clock reporting seconds since an arbitrary origin.
pub trait Clock {
    fn now(&self) -> f64;
}

/// A clock that never advances; traces then report zero elapsed time.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[cfg(feature = "std")]
mod std_clock {
    use std::time::Instant;

    /// [`Instant`]-backed clock.
    #[derive(Debug, Clone, Copy)]
    pub struct StdClock {
        origin: Instant,
    }

    impl Default for StdClock {
        fn default() -> Self {
            StdClock { origin: Instant::now() }
        }
    }

    impl super::Clock for StdClock {
        fn now(&self) -> f64 {
            self.origin.elapsed().as_secs_f64()
        }
    }
}

#[cfg(feature = "std")]
pub use std_clock::StdClock;
