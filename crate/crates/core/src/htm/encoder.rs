//! Scalar and date encoders producing contiguous runs of active bits.

use serde::{Deserialize, Serialize};

use super::sdr::BitVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarEncoderConfig {
    pub min_value: f64,
    pub max_value: f64,
    /// Width of the active run (w).
    pub active_bits: usize,
    /// Output width (n).
    pub total_bits: usize,
    pub clip_out_of_range: bool,
}

impl ScalarEncoderConfig {
    pub fn new(min_value: f64, max_value: f64, active_bits: usize, total_bits: usize) -> Self {
        ScalarEncoderConfig {
            min_value,
            max_value,
            active_bits,
            total_bits,
            clip_out_of_range: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.active_bits > 0 && self.active_bits < self.total_bits) {
            return Err(Error::InvalidConfig(format!(
                "encoder needs 0 < w ({}) < n ({})",
                self.active_bits, self.total_bits
            )));
        }
        if !(self.min_value < self.max_value) {
            return Err(Error::InvalidConfig("encoder needs min < max".into()));
        }
        Ok(())
    }

    fn buckets(&self) -> usize {
        self.total_bits - self.active_bits + 1
    }

    /// Index of the first active bit for `value`.
    pub fn run_start(&self, value: f64) -> Result<usize> {
        let v = if value < self.min_value || value > self.max_value || value.is_nan() {
            if !self.clip_out_of_range || value.is_nan() {
                return Err(Error::OutOfRange {
                    value,
                    min: self.min_value,
                    max: self.max_value,
                });
            }
            value.clamp(self.min_value, self.max_value)
        } else {
            value
        };
        let frac = (v - self.min_value) / (self.max_value - self.min_value);
        Ok((frac * (self.buckets() - 1) as f64).round() as usize)
    }
}

/// Encodes `value` as a run of `active_bits` set bits whose position is
/// proportional to where the value sits in `[min_value, max_value]`.
pub fn encode_scalar(value: f64, cfg: &ScalarEncoderConfig) -> Result<BitVector> {
    cfg.validate()?;
    let start = cfg.run_start(value)?;
    let mut out = BitVector::zeros(cfg.total_bits);
    for i in start..start + cfg.active_bits {
        out.set(i, true);
    }
    Ok(out)
}

/// Encoder for a cyclic quantity in `[0, 1)`; runs wrap around the end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicEncoderConfig {
    pub active_bits: usize,
    pub total_bits: usize,
}

impl PeriodicEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.active_bits > 0 && self.active_bits < self.total_bits) {
            return Err(Error::InvalidConfig(
                "periodic encoder needs 0 < w < n".into(),
            ));
        }
        Ok(())
    }

    fn encode_into(&self, phase: f64, out: &mut BitVector, offset: usize) {
        let n = self.total_bits;
        let centre = ((phase.rem_euclid(1.0)) * n as f64).floor() as usize % n;
        let first = centre + n - self.active_bits / 2;
        for k in 0..self.active_bits {
            out.set(offset + (first + k) % n, true);
        }
    }
}

/// Which calendar fields of a timestamp are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DateEncoderConfig {
    pub time_of_day: Option<PeriodicEncoderConfig>,
    pub day_of_week: Option<PeriodicEncoderConfig>,
}

impl Default for DateEncoderConfig {
    fn default() -> Self {
        DateEncoderConfig {
            time_of_day: Some(PeriodicEncoderConfig {
                active_bits: 21,
                total_bits: 256,
            }),
            day_of_week: None,
        }
    }
}

impl DateEncoderConfig {
    pub fn width(&self) -> usize {
        self.time_of_day.map_or(0, |c| c.total_bits) + self.day_of_week.map_or(0, |c| c.total_bits)
    }

    pub fn validate(&self) -> Result<()> {
        for c in self.time_of_day.iter().chain(self.day_of_week.iter()) {
            c.validate()?;
        }
        Ok(())
    }

    fn encode_into(&self, timestamp: f64, out: &mut BitVector, offset: usize) {
        const DAY: f64 = 86_400.0;
        let mut at = offset;
        if let Some(c) = self.time_of_day {
            c.encode_into(timestamp.rem_euclid(DAY) / DAY, out, at);
            at += c.total_bits;
        }
        if let Some(c) = self.day_of_week {
            // 1970-01-01 was a Thursday; Monday is phase 0.
            let days = (timestamp / DAY).floor() + 3.0;
            c.encode_into(days.rem_euclid(7.0) / 7.0, out, at);
        }
    }
}

/// Encoders for one monitoring record: date, users, CPU and RAM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleEncoderConfig {
    pub date: DateEncoderConfig,
    pub users: ScalarEncoderConfig,
    pub cpu: ScalarEncoderConfig,
    pub ram: ScalarEncoderConfig,
}

impl Default for SampleEncoderConfig {
    fn default() -> Self {
        SampleEncoderConfig {
            date: DateEncoderConfig::default(),
            users: ScalarEncoderConfig::new(0.0, 1000.0, 21, 512),
            cpu: ScalarEncoderConfig::new(0.0, 1.0, 21, 512),
            ram: ScalarEncoderConfig::new(0.0, 1.0, 21, 512),
        }
    }
}

impl SampleEncoderConfig {
    pub fn width(&self) -> usize {
        self.date.width() + self.users.total_bits + self.cpu.total_bits + self.ram.total_bits
    }

    pub fn validate(&self) -> Result<()> {
        self.date.validate()?;
        self.users.validate()?;
        self.cpu.validate()?;
        self.ram.validate()
    }

    /// Bit range occupied by the RAM field.
    pub fn ram_segment(&self) -> std::ops::Range<usize> {
        let start = self.width() - self.ram.total_bits;
        start..self.width()
    }
}

/// Concatenates the date, users, CPU and RAM encodings.
pub fn encode_sample(
    cfg: &SampleEncoderConfig,
    timestamp: f64,
    users: f64,
    cpu: f64,
    ram: f64,
) -> Result<BitVector> {
    let mut out = BitVector::zeros(cfg.width());
    cfg.date.encode_into(timestamp, &mut out, 0);
    let mut offset = cfg.date.width();
    for (value, enc) in [(users, &cfg.users), (cpu, &cfg.cpu), (ram, &cfg.ram)] {
        out.splice(offset, &encode_scalar(value, enc)?);
        offset += enc.total_bits;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ScalarEncoderConfig {
        ScalarEncoderConfig::new(0.0, 1.0, 21, 512)
    }

    #[test]
    fn boundaries_and_width() {
        let c = cfg();
        let lo = encode_scalar(0.0, &c).unwrap();
        assert_eq!(lo.count_ones(), 21);
        assert_eq!(lo.iter_ones().next(), Some(0));
        let hi = encode_scalar(1.0, &c).unwrap();
        assert_eq!(hi.iter_ones().last(), Some(511));
        assert_eq!(hi.count_ones(), 21);
        let mid: Vec<_> = encode_scalar(0.37, &c).unwrap().iter_ones().collect();
        assert!(
            mid.windows(2).all(|w| w[1] == w[0] + 1),
            "run is contiguous"
        );
    }

    #[test]
    fn out_of_range_clips_or_fails() {
        let mut c = cfg();
        assert_eq!(
            encode_scalar(1.5, &c).unwrap(),
            encode_scalar(1.0, &c).unwrap()
        );
        c.clip_out_of_range = false;
        assert!(matches!(
            encode_scalar(1.5, &c),
            Err(Error::OutOfRange { .. })
        ));
        assert!(encode_scalar(-0.1, &c).is_err());
        assert!(encode_scalar(f64::NAN, &cfg()).is_err());
    }

    #[test]
    fn invalid_configs() {
        assert!(ScalarEncoderConfig::new(0.0, 1.0, 0, 10)
            .validate()
            .is_err());
        assert!(ScalarEncoderConfig::new(0.0, 1.0, 10, 10)
            .validate()
            .is_err());
        assert!(ScalarEncoderConfig::new(1.0, 1.0, 3, 10)
            .validate()
            .is_err());
    }

    #[test]
    fn closer_values_share_more_bits() {
        // Brute-force overlap over a grid of anchor points.
        let c = cfg();
        let eps = 0.004;
        for k in 0..80 {
            let x = k as f64 * 0.01;
            let base = encode_scalar(x, &c).unwrap();
            let near = base.overlap(&encode_scalar(x + eps, &c).unwrap());
            let far = base.overlap(&encode_scalar(x + 10.0 * eps, &c).unwrap());
            assert!(near > far, "x={x}: near {near} far {far}");
        }
    }

    #[test]
    fn sample_encoding_layout() {
        let c = SampleEncoderConfig::default();
        let a = encode_sample(&c, 1.0e9, 120.0, 0.3, 0.2).unwrap();
        assert_eq!(a.len(), 256 + 3 * 512);
        assert_eq!(a, encode_sample(&c, 1.0e9, 120.0, 0.3, 0.2).unwrap());
        assert_eq!(a.count_ones(), 4 * 21);

        let b = encode_sample(&c, 1.0e9, 120.0, 0.3, 0.6).unwrap();
        let diff = a.diff_positions(&b);
        assert!(!diff.is_empty());
        let ram = c.ram_segment();
        assert!(diff.iter().all(|i| ram.contains(i)));
    }

    #[test]
    fn time_of_day_wraps() {
        let mut out = BitVector::zeros(64);
        let c = PeriodicEncoderConfig {
            active_bits: 5,
            total_bits: 64,
        };
        c.encode_into(0.0, &mut out, 0);
        let ones: Vec<_> = out.iter_ones().collect();
        assert_eq!(ones, vec![0, 1, 2, 62, 63]);
    }
}
