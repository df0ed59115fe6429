//! Breakpoint times and learning rates.
//!
//! Breakpoints follow `t_p = t_{p-1} + ceil(max(A t_{p-1}^rho ln t_{p-1}, B))`
//! starting from `t_0`. At a breakpoint the jitter kernel switches from
//! Gaussian to Student-t.

use crate::error::{Error, Result};

/// Constants of the breakpoint recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    pub a: f64,
    pub b: f64,
    pub t0: u64,
    pub rho: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            t0: 5,
            rho: 0.1,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self, alpha: Option<f64>) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return bad("schedule A must be >= 0");
        }
        if !(self.b >= 1.0) || !self.b.is_finite() {
            return bad("schedule B must be >= 1");
        }
        if self.t0 < 1 {
            return bad("t0 must be >= 1");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if let Some(alpha) = alpha {
            if self.rho >= alpha {
                return bad("rho must be smaller than alpha");
            }
        }
        Ok(())
    }

    /// One step of the breakpoint recursion.
    pub fn next_breakpoint(&self, prev: u64) -> u64 {
        next_breakpoint(prev, self.a, self.b, self.rho)
    }
}

/// `prev + ceil(max(A prev^rho ln prev, B))`, natural logarithm.
pub fn next_breakpoint(prev: u64, a: f64, b: f64, rho: f64) -> u64 {
    assert!(prev >= 1);
    let p = prev as f64;
    let gap = (a * p.powf(rho) * p.ln()).max(b).ceil();
    prev + gap as u64
}

/// Which breakpoint family a [`Schedule`] generates.
#[derive(Debug, Clone, PartialEq)]
pub enum Breakpoints {
    Recursive(ScheduleConfig),
    /// A fixed, finite list; no breakpoints beyond its last element.
    Explicit(Vec<u64>),
}

impl Default for Breakpoints {
    fn default() -> Self {
        Breakpoints::Recursive(ScheduleConfig::default())
    }
}

/// Kernel scale `h_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    /// `h_t = t^-alpha`.
    Power(f64),
    /// `h_t = h` for every `t`. `Constant(0.0)` freezes the particles.
    Constant(f64),
}

impl LearningRate {
    #[inline]
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            LearningRate::Power(alpha) => learning_rate(t, alpha),
            LearningRate::Constant(h) => h,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            LearningRate::Power(alpha) => Some(alpha),
            LearningRate::Constant(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LearningRate::Power(a) if a > 0.0 && a.is_finite() => Ok(()),
            LearningRate::Constant(h) if h >= 0.0 && h.is_finite() => Ok(()),
            _ => Err(Error::InvalidConfig(format!("invalid learning rate {self:?}"))),
        }
    }
}

/// `t^-alpha`.
#[inline]
pub fn learning_rate(t: u64, alpha: f64) -> f64 {
    debug_assert!(t >= 1);
    (t as f64).powf(-alpha)
}

/// Memoized, lazily extended breakpoint set.
#[derive(Debug, Clone)]
pub struct Schedule {
    kind: Breakpoints,
    points: Vec<u64>,
}

impl Schedule {
    pub fn new(kind: Breakpoints) -> Self {
        let points = match &kind {
            Breakpoints::Recursive(cfg) => vec![cfg.t0],
            Breakpoints::Explicit(list) => {
                let mut list = list.clone();
                list.sort_unstable();
                list.dedup();
                list
            }
        };
        Self { kind, points }
    }

    pub fn recursive(cfg: ScheduleConfig) -> Self {
        Self::new(Breakpoints::Recursive(cfg))
    }

    pub fn explicit(points: Vec<u64>) -> Self {
        Self::new(Breakpoints::Explicit(points))
    }

    /// Extends the memoized list until it covers `t`.
    pub fn extend_to(&mut self, t: u64) {
        if let Breakpoints::Recursive(cfg) = &self.kind {
            while *self.points.last().expect("non-empty") < t {
                let last = *self.points.last().expect("non-empty");
                self.points.push(cfg.next_breakpoint(last));
            }
        }
    }

    /// Whether `t` is one of the breakpoints, extending as needed.
    pub fn is_breakpoint(&mut self, t: u64) -> bool {
        self.extend_to(t);
        self.contains(t)
    }

    /// Read-only lookup; the caller must have extended the schedule past `t`.
    pub fn contains(&self, t: u64) -> bool {
        self.points.binary_search(&t).is_ok()
    }

    /// Breakpoints generated so far.
    pub fn points(&self) -> &[u64] {
        &self.points
    }

    /// Number of breakpoints `<= t`.
    pub fn count_up_to(&mut self, t: u64) -> usize {
        self.extend_to(t);
        self.points.partition_point(|&p| p <= t)
    }
}
