//! Per-step estimator records and their CSV form.

use std::io::{Read, Write};

/// One recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub theta_tilde: Vec<f64>,
    pub theta_bar: Vec<f64>,
    pub ess: f64,
    pub resampled: bool,
    pub err_tilde_l2: Option<f64>,
    pub err_bar_l2: Option<f64>,
    pub err_tilde_max: Option<f64>,
    pub err_bar_max: Option<f64>,
}

/// Error norm used when summarizing runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    Euclidean,
    Max,
}

impl Norm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
            Norm::Max => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        }
    }
}

impl TraceRow {
    pub fn new(
        t: u64,
        theta_tilde: Vec<f64>,
        theta_bar: Vec<f64>,
        ess: f64,
        resampled: bool,
        truth: Option<&[f64]>,
    ) -> Self {
        let err = |x: &[f64], norm: Norm| truth.map(|s| norm.distance(x, s));
        Self {
            err_tilde_l2: err(&theta_tilde, Norm::Euclidean),
            err_bar_l2: err(&theta_bar, Norm::Euclidean),
            err_tilde_max: err(&theta_tilde, Norm::Max),
            err_bar_max: err(&theta_bar, Norm::Max),
            t,
            theta_tilde,
            theta_bar,
            ess,
            resampled,
        }
    }

    /// Error of the averaged estimator in the given norm.
    pub fn err_bar(&self, norm: Norm) -> Option<f64> {
        match norm {
            Norm::Euclidean => self.err_bar_l2,
            Norm::Max => self.err_bar_max,
        }
    }

    pub fn err_tilde(&self, norm: Norm) -> Option<f64> {
        match norm {
            Norm::Euclidean => self.err_tilde_l2,
            Norm::Max => self.err_tilde_max,
        }
    }
}

/// When to record a trace row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecordStride {
    /// Every `k`-th step (starting at `t = 1`).
    Every(u64),
    /// `t_{k+1} = max(t_k + 1, ceil(factor * t_k))`, starting at 1.
    Geometric(f64),
}

impl Default for RecordStride {
    fn default() -> Self {
        RecordStride::Geometric(1.02)
    }
}

/// Stateful cursor over the recording times of a [`RecordStride`].
#[derive(Debug, Clone)]
pub struct Recorder {
    stride: RecordStride,
    next: u64,
}

impl Recorder {
    pub fn new(stride: RecordStride) -> Self {
        Self { stride, next: 1 }
    }

    /// True when `t` must be recorded. Call with increasing `t`.
    pub fn due(&mut self, t: u64) -> bool {
        if t < self.next {
            return false;
        }
        self.next = match self.stride {
            RecordStride::Every(k) => t + k.max(1),
            RecordStride::Geometric(f) => ((t as f64 * f).ceil() as u64).max(t + 1),
        };
        true
    }
}

/// Recorded rows of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub dim: usize,
    pub rows: Vec<TraceRow>,
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl Trace {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn header(dim: usize) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=dim).map(|i| format!("theta_tilde_{i}")));
        h.extend((1..=dim).map(|i| format!("theta_bar_{i}")));
        h.extend(
            [
                "ess",
                "resampled",
                "err_tilde_l2",
                "err_bar_l2",
                "err_tilde_max",
                "err_bar_max",
            ]
            .map(String::from),
        );
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(Self::header(self.dim))?;
        for r in &self.rows {
            let mut rec = vec![r.t.to_string()];
            rec.extend(r.theta_tilde.iter().copied().map(fmt_f64));
            rec.extend(r.theta_bar.iter().copied().map(fmt_f64));
            rec.push(fmt_f64(r.ess));
            rec.push(u8::from(r.resampled).to_string());
            rec.push(fmt_opt(r.err_tilde_l2));
            rec.push(fmt_opt(r.err_bar_l2));
            rec.push(fmt_opt(r.err_tilde_max));
            rec.push(fmt_opt(r.err_bar_max));
            wtr.write_record(rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, TraceParseError> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() < 7 || (headers.len() - 7) % 2 != 0 {
            return Err(TraceParseError::Header);
        }
        let dim = (headers.len() - 7) / 2;
        if headers.iter().collect::<Vec<_>>() != Self::header(dim) {
            return Err(TraceParseError::Header);
        }
        let num = |s: &str| -> Result<f64, TraceParseError> {
            s.trim().parse::<f64>().map_err(|_| TraceParseError::Value(s.to_string()))
        };
        let opt = |s: &str| -> Result<Option<f64>, TraceParseError> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let f: Vec<&str> = rec.iter().collect();
            let t = f[0].trim().parse::<u64>().map_err(|_| TraceParseError::Value(f[0].into()))?;
            let tilde = f[1..=dim].iter().map(|s| num(s)).collect::<Result<_, _>>()?;
            let bar = f[dim + 1..=2 * dim].iter().map(|s| num(s)).collect::<Result<_, _>>()?;
            let k = 2 * dim + 1;
            rows.push(TraceRow {
                t,
                theta_tilde: tilde,
                theta_bar: bar,
                ess: num(f[k])?,
                resampled: f[k + 1].trim() == "1",
                err_tilde_l2: opt(f[k + 2])?,
                err_bar_l2: opt(f[k + 3])?,
                err_tilde_max: opt(f[k + 4])?,
                err_bar_max: opt(f[k + 5])?,
            });
        }
        Ok(Self { dim, rows })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceParseError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected trace header")]
    Header,
    #[error("cannot parse value {0:?}")]
    Value(String),
}
