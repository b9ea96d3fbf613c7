use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::clock::Clock;

/// Serializes requests per host and spaces their start times by at least
/// `interval`, measured on the injected clock. A request holds its host's
/// slot until it completes, so at most one is in flight per host.
pub struct RateLimiter {
    interval: Duration,
    clock: Arc<dyn Clock>,
    hosts: Mutex<HashMap<String, Arc<Mutex<Option<Duration>>>>>,
    starts: Mutex<Vec<(String, Duration)>>,
}

impl RateLimiter {
    pub fn new(interval: Duration, clock: Arc<dyn Clock>) -> Self {
        Self { interval, clock, hosts: Mutex::default(), starts: Mutex::default() }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Runs `f` once the host slot is free and the interval has passed.
    pub fn run<R>(&self, host: &str, f: impl FnOnce() -> R) -> R {
        let slot = {
            let mut hosts = self.hosts.lock().unwrap();
            Arc::clone(hosts.entry(host.to_owned()).or_default())
        };
        let mut last = slot.lock().unwrap();
        if let Some(prev) = *last {
            let ready = prev + self.interval;
            let now = self.clock.elapsed();
            if now < ready {
                self.clock.sleep(ready - now);
            }
        }
        let start = self.clock.elapsed();
        *last = Some(start);
        self.starts.lock().unwrap().push((host.to_owned(), start));
        f()
    }

    /// Start times of every admitted request, in admission order.
    pub fn starts(&self) -> Vec<(String, Duration)> {
        self.starts.lock().unwrap().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use chrono::Utc;

    #[test]
    fn spacing_on_manual_clock() {
        let clock = Arc::new(ManualClock::new(Utc::now()));
        let rl = RateLimiter::new(Duration::from_millis(100), clock.clone());
        for _ in 0..3 {
            rl.run("a", || ());
        }
        clock.advance(Duration::from_millis(30));
        rl.run("b", || ());
        let s: Vec<Duration> = rl.starts().iter().filter(|(h, _)| h == "a").map(|x| x.1).collect();
        assert!(s.windows(2).all(|w| w[1] - w[0] >= Duration::from_millis(100)));
        assert_eq!(clock.sleeps(), vec![Duration::from_millis(100); 2]);
    }

    #[test]
    fn concurrent_callers_stay_spaced() {
        let clock = Arc::new(crate::clock::SystemClock::new());
        let rl = RateLimiter::new(Duration::from_millis(20), clock);
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| rl.run("h", || std::thread::sleep(Duration::from_millis(1))));
            }
        });
        let mut s: Vec<Duration> = rl.starts().into_iter().map(|x| x.1).collect();
        s.sort();
        assert!(s.windows(2).all(|w| w[1] - w[0] >= Duration::from_millis(20)));
    }
}
