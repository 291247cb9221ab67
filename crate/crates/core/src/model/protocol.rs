//! Piecewise-linear control protocols.

use serde::Serialize;

use crate::error::{Error, Result};

/// A named real function of time given by breakpoints `(t_i, value_i)` with
/// strictly increasing `t_i`. Values are held constant before the first and
/// after the last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    name: String,
    breakpoints: Vec<(f64, f64)>,
}

impl Channel {
    pub fn new(name: impl Into<String>, breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let name = name.into();
        if breakpoints.is_empty() {
            return Err(Error::InvalidModel(format!("channel `{name}` has no breakpoints")));
        }
        if breakpoints.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidModel(format!("channel `{name}` has non-finite breakpoints")));
        }
        if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidModel(format!(
                "channel `{name}` breakpoints are not strictly increasing in t"
            )));
        }
        Ok(Self { name, breakpoints })
    }

    pub fn constant(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            breakpoints: vec![(0.0, value)],
        }
    }

    /// Linear ramp from `v0` at `t0` to `v1` at `t1`.
    pub fn ramp(name: impl Into<String>, (t0, v0): (f64, f64), (t1, v1): (f64, f64)) -> Result<Self> {
        Self::new(name, vec![(t0, v0), (t1, v1)])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let bp = &self.breakpoints;
        if t <= bp[0].0 {
            return bp[0].1;
        }
        let last = bp[bp.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        // First breakpoint strictly after t; exists because t < last.0.
        let hi = bp.partition_point(|&(ti, _)| ti <= t);
        let (t0, v0) = bp[hi - 1];
        let (t1, v1) = bp[hi];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn min_value(&self) -> f64 {
        self.breakpoints.iter().map(|b| b.1).fold(f64::INFINITY, f64::min)
    }

    pub fn is_constant(&self) -> bool {
        self.breakpoints.iter().all(|b| b.1 == self.breakpoints[0].1)
    }
}

/// Channels plus the horizon `[start, end]` on which they may be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Protocol {
    start: f64,
    end: f64,
    channels: Vec<Channel>,
}

impl Protocol {
    pub fn new(start: f64, end: f64, channels: Vec<Channel>) -> Result<Self> {
        if !(start <= end) || start.is_nan() {
            return Err(Error::InvalidModel(format!("empty horizon [{start}, {end}]")));
        }
        for (i, ch) in channels.iter().enumerate() {
            if channels[..i].iter().any(|o| o.name == ch.name) {
                return Err(Error::InvalidModel(format!("duplicate channel `{}`", ch.name)));
            }
        }
        Ok(Self { start, end, channels })
    }

    /// No channels, horizon `[start, ∞)`.
    pub fn unbounded(start: f64) -> Self {
        Self {
            start,
            end: f64::INFINITY,
            channels: Vec::new(),
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn push_channel(&mut self, channel: Channel) -> Result<()> {
        if self.channel(channel.name()).is_some() {
            return Err(Error::InvalidModel(format!("duplicate channel `{}`", channel.name)));
        }
        self.channels.push(channel);
        Ok(())
    }

    fn slack(&self) -> f64 {
        1e-9 * self.start.abs().max(if self.end.is_finite() { self.end.abs() } else { 0.0 }).max(1.0)
    }

    pub fn contains(&self, t: f64) -> bool {
        let s = self.slack();
        t >= self.start - s && t <= self.end + s
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfHorizon {
                t,
                start: self.start,
                end: self.end,
            })
        }
    }

    pub fn value(&self, name: &str, t: f64) -> Result<f64> {
        self.check(t)?;
        self.channel(name)
            .map(|c| c.value_at(t))
            .ok_or_else(|| Error::InvalidModel(format!("unknown channel `{name}`")))
    }

    /// Sorted distinct breakpoint times inside the horizon.
    pub fn breakpoint_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .channels
            .iter()
            .flat_map(|c| c.breakpoints.iter().map(|b| b.0))
            .filter(|&t| self.contains(t))
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    pub fn is_constant(&self) -> bool {
        self.channels.iter().all(Channel::is_constant)
    }
}
