//! Key rate over fiber and information/detection versus coding-space size.
//!
//! Click model for weak coherent pulses:
//!
//! ```text
//! T       = eta * 10^(-alpha * d / 10)
//! p_click = 1 - exp(-mu * T) + dark_rate * gate
//! raw     = pulse_rate * p_click
//! sifted  = raw * sift_factor * bits_per_detection
//! secret  = sifted * ec_pa_factor
//! ```
//!
//! Interference errors are neglected, so QBER does not enter.

use serde::{Deserialize, Serialize};

use crate::adversary::{entropy_per_photon, guess_rate_formula, KeyStrategy};
use crate::error::{config, Result};

pub const RATE_FORMULA_ID: &str = "wcp-click-v1: T=eta*10^(-alpha*d/10); p=1-exp(-mu*T)+dark*gate; sifted=f*p*sift*bits; secret=sifted*ecpa";
pub const ENTROPY_FORMULA_ID: &str =
    "entropy_base=log2(N); entropy_restricted=log2(10(N+1)/9); detection=1-9/(10(N+1)); baseline=1-(1/2+1/(2N))";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    /// Hz.
    pub pulse_rate: f64,
    pub mu: f64,
    /// dB/km.
    pub fiber_loss: f64,
    pub detector_efficiency: f64,
    /// Counts per second.
    pub dark_count_rate: f64,
    /// km.
    pub distance: f64,
    /// Seconds.
    pub gate_window: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            pulse_rate: 1e7,
            mu: 0.1,
            fiber_loss: 0.2,
            detector_efficiency: 0.1,
            dark_count_rate: 1e-4,
            distance: 0.0,
            gate_window: 1e-9,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("pulse_rate", self.pulse_rate),
            ("mu", self.mu),
            ("fiber_loss", self.fiber_loss),
            ("detector_efficiency", self.detector_efficiency),
            ("dark_count_rate", self.dark_count_rate),
            ("distance", self.distance),
            ("gate_window", self.gate_window),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(config(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Above one photon per pulse the weak-pulse model no longer applies.
    pub fn weak_pulse_warning(&self) -> Option<String> {
        (self.mu > 1.0).then(|| format!("mu = {} exceeds the weak-pulse regime", self.mu))
    }

    pub fn transmittance(&self) -> f64 {
        self.detector_efficiency * 10f64.powf(-self.fiber_loss * self.distance / 10.0)
    }

    pub fn dark_probability(&self) -> f64 {
        self.dark_count_rate * self.gate_window
    }

    pub fn click_probability(&self) -> f64 {
        -(-self.mu * self.transmittance()).exp_m1() + self.dark_probability()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub distance: f64,
    pub raw_click_rate: f64,
    pub sifted_rate: f64,
    pub secret_rate: f64,
    pub bits_per_detection: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFactors {
    pub sift_factor: f64,
    pub ec_pa_factor: f64,
}

impl Default for RateFactors {
    fn default() -> Self {
        Self {
            sift_factor: 1.0,
            ec_pa_factor: 0.5,
        }
    }
}

pub fn key_rate(p: &ChannelParams, coding_bits: f64, factors: RateFactors) -> Result<RatePoint> {
    p.validate()?;
    if !(coding_bits.is_finite() && coding_bits >= 0.0) {
        return Err(config(format!(
            "bits per detection must be nonnegative, got {coding_bits}"
        )));
    }
    for (name, f) in [
        ("sift_factor", factors.sift_factor),
        ("ec_pa_factor", factors.ec_pa_factor),
    ] {
        if !(0.0..=1.0).contains(&f) {
            return Err(config(format!("{name} must lie in [0, 1], got {f}")));
        }
    }
    let raw = p.pulse_rate * p.click_probability();
    let sifted = raw * factors.sift_factor * coding_bits;
    Ok(RatePoint {
        distance: p.distance,
        raw_click_rate: raw,
        sifted_rate: sifted,
        secret_rate: sifted * factors.ec_pa_factor,
        bits_per_detection: coding_bits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub coding_space: u32,
    pub point: RatePoint,
}

/// One row per (coding space, distance), grouped by coding space.
pub fn rate_sweep(
    template: &ChannelParams,
    distances: &[f64],
    coding_spaces: &[u32],
    factors: RateFactors,
) -> Result<Vec<SweepRow>> {
    if distances.is_empty() || coding_spaces.is_empty() {
        return Err(config(
            "rate sweep needs at least one distance and one coding space",
        ));
    }
    let mut rows = Vec::with_capacity(distances.len() * coding_spaces.len());
    for &n in coding_spaces {
        if n < 2 {
            return Err(config(format!("coding space {n} < 2")));
        }
        let bits = (n as f64).log2();
        for &d in distances {
            let point = key_rate(
                &ChannelParams {
                    distance: d,
                    ..*template
                },
                bits,
                factors,
            )?;
            rows.push(SweepRow {
                coding_space: n,
                point,
            });
        }
    }
    Ok(rows)
}

/// `pulse_rate * p_dark * sift * bits * ecpa`: the long-distance limit.
pub fn dark_floor(p: &ChannelParams, coding_bits: f64, factors: RateFactors) -> f64 {
    p.pulse_rate * p.dark_probability() * factors.sift_factor * coding_bits * factors.ec_pa_factor
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub set_size: u32,
    pub entropy_base: f64,
    pub entropy_restricted: f64,
    pub detection_rate: f64,
    /// Two-basis `N`-dimensional protocol under intercept-resend.
    pub baseline_detection: f64,
}

pub fn entropy_detection_sweep(set_sizes: &[u32]) -> Result<Vec<EntropyRow>> {
    set_sizes
        .iter()
        .map(|&n| {
            let nf = n as f64;
            Ok(EntropyRow {
                set_size: n,
                entropy_base: entropy_per_photon(n, KeyStrategy::V0PumpSum)?,
                entropy_restricted: entropy_per_photon(n, KeyStrategy::V3RetainBest)?,
                detection_rate: 1.0 - guess_rate_formula(n)?,
                baseline_detection: 1.0 - (0.5 + 0.5 / nf),
            })
        })
        .collect()
}

/// `0, step, 2 step, ..., max` inclusive.
pub fn distance_grid(max_km: f64, step_km: f64) -> Result<Vec<f64>> {
    if !(step_km > 0.0 && max_km >= 0.0) {
        return Err(config("distance grid needs step > 0 and max >= 0"));
    }
    let n = (max_km / step_km + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * step_km).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_distance_click() {
        let p = ChannelParams::default();
        let r = key_rate(
            &p,
            3.0,
            RateFactors {
                sift_factor: 1.0,
                ec_pa_factor: 0.5,
            },
        )
        .unwrap();
        let click = 1.0 - (-0.01f64).exp() + 1e-13;
        assert!((p.click_probability() - click).abs() < 1e-15);
        assert!((r.sifted_rate - 1e7 * click * 3.0).abs() < 1e-6);
        assert!((r.secret_rate - r.sifted_rate * 0.5).abs() < 1e-9);
    }

    #[test]
    fn dark_only_without_light() {
        let p = ChannelParams {
            mu: 0.0,
            ..Default::default()
        };
        assert_eq!(p.click_probability(), p.dark_probability());
    }

    #[test]
    fn doubling_pulse_rate_doubles_rates() {
        let p = ChannelParams {
            distance: 37.0,
            ..Default::default()
        };
        let a = key_rate(&p, 3.0, RateFactors::default()).unwrap();
        let b = key_rate(
            &ChannelParams {
                pulse_rate: 2e7,
                ..p
            },
            3.0,
            RateFactors::default(),
        )
        .unwrap();
        assert_eq!(b.sifted_rate, 2.0 * a.sifted_rate);
        assert_eq!(b.secret_rate, 2.0 * a.secret_rate);
    }

    #[test]
    fn grid_and_validation() {
        assert_eq!(distance_grid(200.0, 10.0).unwrap().len(), 21);
        assert!(key_rate(
            &ChannelParams {
                mu: -1.0,
                ..Default::default()
            },
            1.0,
            RateFactors::default()
        )
        .is_err());
        assert!(ChannelParams {
            mu: 2.0,
            ..Default::default()
        }
        .weak_pulse_warning()
        .is_some());
    }

    #[test]
    fn entropy_rows() {
        let rows = entropy_detection_sweep(&[2, 8]).unwrap();
        assert!((rows[0].detection_rate - 0.7).abs() < 1e-12);
        assert!((rows[1].detection_rate - 0.9).abs() < 1e-12);
        assert_eq!(rows[1].entropy_base, 3.0);
        assert!((rows[1].baseline_detection - (1.0 - 0.5625)).abs() < 1e-12);
    }
}
