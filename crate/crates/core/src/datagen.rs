// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded synthetic series with labelled anomaly injections.
//!
//! Randomness comes from ChaCha8 seeded with a `u64`, so a spec regenerates
//! the same series on every platform.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthBase {
    /// `x_t = phi·x_{t−1} + sigma·e_t`, started from the stationary law.
    Ar1 { phi: f64, sigma: f64 },
    /// `amplitude·sin(2πt/period) + noise_sigma·e_t`.
    Sine { period: f64, amplitude: f64, noise_sigma: f64 },
}

impl SynthBase {
    /// Scale used by point anomalies: the innovation sigma for AR(1), the
    /// noise sigma for sine (the amplitude when the sine is noiseless).
    pub fn noise_scale(&self) -> f64 {
        match *self {
            SynthBase::Ar1 { sigma, .. } => sigma,
            SynthBase::Sine { amplitude, noise_sigma, .. } => {
                if noise_sigma > 0.0 {
                    noise_sigma
                } else {
                    amplitude
                }
            }
        }
    }

    /// Scale used by level shifts: the marginal standard deviation for
    /// AR(1), the amplitude for sine.
    pub fn amplitude(&self) -> f64 {
        match *self {
            SynthBase::Ar1 { phi, sigma } => sigma / (1.0 - phi * phi).sqrt(),
            SynthBase::Sine { amplitude, .. } => amplitude,
        }
    }
}

impl FromStr for SynthBase {
    type Err = Error;

    /// `ar1:<phi>:<sigma>` or `sine:<period>:<amplitude>:<noise_sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts[i].parse().map_err(|_| Error::InvalidSynthSpec(format!("bad number '{}' in '{s}'", parts[i])))
        };
        match (parts[0], parts.len()) {
            ("ar1", 3) => Ok(SynthBase::Ar1 { phi: num(1)?, sigma: num(2)? }),
            ("sine", 4) => Ok(SynthBase::Sine { period: num(1)?, amplitude: num(2)?, noise_sigma: num(3)? }),
            _ => Err(Error::InvalidSynthSpec(format!("unrecognised base '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Adds `magnitude × noise_scale` to one sample (span must be 1).
    Point,
    /// Multiplies the innovations over the span by `magnitude`.
    NoiseBurst,
    /// Shifts the span by `magnitude × amplitude`.
    LocalContext,
    /// Replaces the span's pattern with a phase-inverted copy. For sine the
    /// period is also multiplied by `magnitude`; for AR(1) the span is negated.
    GlobalContext,
}

impl FromStr for AnomalyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point" => Ok(AnomalyKind::Point),
            "noise_burst" | "noise-burst" | "noise" => Ok(AnomalyKind::NoiseBurst),
            "local_context" | "local-context" | "local" => Ok(AnomalyKind::LocalContext),
            "global_context" | "global-context" | "global" => Ok(AnomalyKind::GlobalContext),
            other => Err(Error::InvalidSynthSpec(format!("unknown anomaly kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    pub start: usize,
    pub span: usize,
    pub magnitude: f64,
}

impl AnomalySpec {
    fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.span
    }
}

impl FromStr for AnomalySpec {
    type Err = Error;

    /// `<kind>:<start>:<span>:<magnitude>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::InvalidSynthSpec(format!("expected kind:start:span:magnitude, got '{s}'")));
        }
        let bad = |what: &str| Error::InvalidSynthSpec(format!("bad {what} in '{s}'"));
        Ok(AnomalySpec {
            kind: parts[0].parse()?,
            start: parts[1].parse().map_err(|_| bad("start"))?,
            span: parts[2].parse().map_err(|_| bad("span"))?,
            magnitude: parts[3].parse().map_err(|_| bad("magnitude"))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SynthSpec {
    pub length: usize,
    pub base: SynthBase,
    pub anomalies: Vec<AnomalySpec>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidSynthSpec("length must be positive".into()));
        }
        match self.base {
            SynthBase::Ar1 { phi, sigma } => {
                if !(phi.abs() < 1.0) {
                    return Err(Error::InvalidSynthSpec(format!("non-stationary phi {phi}")));
                }
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return Err(Error::InvalidSynthSpec(format!("invalid sigma {sigma}")));
                }
            }
            SynthBase::Sine { period, amplitude, noise_sigma } => {
                if !(period > 0.0) || !period.is_finite() || !amplitude.is_finite() || !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
                    return Err(Error::InvalidSynthSpec("invalid sine parameters".into()));
                }
            }
        }
        let mut spans: Vec<_> = self.anomalies.iter().collect();
        spans.sort_by_key(|a| a.start);
        for a in &spans {
            if a.span == 0 || a.start + a.span > self.length {
                return Err(Error::InvalidSynthSpec(format!(
                    "anomaly span {}..{} outside 0..{}",
                    a.start,
                    a.start + a.span,
                    self.length
                )));
            }
            if a.kind == AnomalyKind::Point && a.span != 1 {
                return Err(Error::InvalidSynthSpec("point anomalies must have span 1".into()));
            }
            if !a.magnitude.is_finite() || (a.kind == AnomalyKind::NoiseBurst && a.magnitude < 0.0) {
                return Err(Error::InvalidSynthSpec(format!("invalid magnitude {}", a.magnitude)));
            }
        }
        if let Some(w) = spans.windows(2).find(|w| w[0].start + w[0].span > w[1].start) {
            return Err(Error::InvalidSynthSpec(format!(
                "overlapping anomaly spans at {} and {}",
                w[0].start, w[1].start
            )));
        }
        Ok(())
    }
}

/// Generates the series and its 0/1 labels (1 exactly on injected spans).
pub fn generate(spec: &SynthSpec) -> Result<(TimeSeries, Vec<u8>)> {
    spec.validate()?;
    let len = spec.length;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let innovations: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();

    let mut noise_mult = vec![1.0; len];
    for a in spec.anomalies.iter().filter(|a| a.kind == AnomalyKind::NoiseBurst) {
        for t in a.range() {
            noise_mult[t] = a.magnitude;
        }
    }

    let mut values = vec![0.0; len];
    match spec.base {
        SynthBase::Ar1 { phi, sigma } => {
            values[0] = sigma / (1.0 - phi * phi).sqrt() * noise_mult[0] * innovations[0];
            for t in 1..len {
                values[t] = phi * values[t - 1] + sigma * noise_mult[t] * innovations[t];
            }
            for a in spec.anomalies.iter().filter(|a| a.kind == AnomalyKind::GlobalContext) {
                for t in a.range() {
                    values[t] = -values[t];
                }
            }
        }
        SynthBase::Sine { period, amplitude, noise_sigma } => {
            let mut pattern: Vec<f64> = (0..len)
                .map(|t| amplitude * (2.0 * std::f64::consts::PI * t as f64 / period).sin())
                .collect();
            for a in spec.anomalies.iter().filter(|a| a.kind == AnomalyKind::GlobalContext) {
                let altered = period * a.magnitude;
                for t in a.range() {
                    pattern[t] = -amplitude * (2.0 * std::f64::consts::PI * t as f64 / altered).sin();
                }
            }
            for t in 0..len {
                values[t] = pattern[t] + noise_sigma * noise_mult[t] * innovations[t];
            }
        }
    }

    let mut labels = vec![0u8; len];
    for a in &spec.anomalies {
        match a.kind {
            AnomalyKind::Point => values[a.start] += a.magnitude * spec.base.noise_scale(),
            AnomalyKind::LocalContext => {
                let shift = a.magnitude * spec.base.amplitude();
                for t in a.range() {
                    values[t] += shift;
                }
            }
            AnomalyKind::NoiseBurst | AnomalyKind::GlobalContext => {}
        }
        for t in a.range() {
            labels[t] = 1;
        }
    }
    Ok((TimeSeries::univariate(values)?, labels))
}
