//! Seeded Bernoulli packet-erasure channel.
//!
//! Each message is dropped independently with probability `per`. The
//! delivery roll for message `seq` is derived from `(seed, seq)` alone, so
//! whether message k survives does not depend on how many messages the log
//! contains; sweep cells stay comparable when thresholds change counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::{ModelMessage, TxLog};

/// Channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Packet error ratio in [0, 1].
    pub per: f64,
    /// Seed for the per-message delivery rolls.
    pub seed: u64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.per) || !self.per.is_finite() {
            return Err(Error::invalid("per", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// A transmitter log after the channel: the surviving messages plus the
/// per-message delivery mask in transmit order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveredLog {
    pub messages: Vec<ModelMessage>,
    pub mask: Vec<bool>,
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Uniform draw in [0, 1) for one (seed, seq) pair.
fn delivery_roll(seed: u64, seq: u64) -> f64 {
    let h = splitmix64(seed ^ splitmix64(seq.wrapping_add(0x5100_b8a1)));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Drop each message independently with probability `cfg.per`. Delivered
/// messages keep their timestamps and order.
pub fn apply_channel(log: &TxLog, cfg: &ChannelConfig) -> Result<DeliveredLog> {
    cfg.validate()?;
    let mut messages = Vec::new();
    let mut mask = Vec::with_capacity(log.messages.len());
    for msg in &log.messages {
        let delivered = delivery_roll(cfg.seed, msg.seq) >= cfg.per;
        mask.push(delivered);
        if delivered {
            messages.push(msg.clone());
        }
    }
    Ok(DeliveredLog { messages, mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Vec2;
    use crate::scheduler::MessageKind;

    fn log_of(n: usize) -> TxLog {
        let mut log = TxLog::default();
        for i in 0..n {
            log.messages.push(ModelMessage {
                seq: i as u64,
                tx_t: i as f64 * 0.1,
                kind: MessageKind::RawBsm { pos: Vec2::new(0.0, 0.0), vel: Vec2::new(1.0, 0.0) },
            });
        }
        log
    }

    #[test]
    fn per_zero_is_identity() {
        let log = log_of(100);
        let out = apply_channel(&log, &ChannelConfig { per: 0.0, seed: 9 }).unwrap();
        assert_eq!(out.messages, log.messages);
        assert!(out.mask.iter().all(|&d| d));
    }

    #[test]
    fn per_one_drops_everything() {
        let log = log_of(100);
        let out = apply_channel(&log, &ChannelConfig { per: 1.0, seed: 9 }).unwrap();
        assert!(out.messages.is_empty());
        assert!(out.mask.iter().all(|&d| !d));
    }

    #[test]
    fn delivered_count_within_binomial_bounds() {
        // 10^4 packets at per 0.4: +-3 sigma of Binomial(10^4, 0.6).
        let log = log_of(10_000);
        for seed in 0..5 {
            let out = apply_channel(&log, &ChannelConfig { per: 0.4, seed }).unwrap();
            let count = out.messages.len();
            assert!((5853..=6147).contains(&count), "seed {seed}: delivered {count}");
        }
    }

    #[test]
    fn same_config_same_mask() {
        let log = log_of(500);
        let cfg = ChannelConfig { per: 0.4, seed: 1234 };
        let a = apply_channel(&log, &cfg).unwrap();
        let b = apply_channel(&log, &cfg).unwrap();
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.messages, b.messages);
    }

    #[test]
    fn different_seeds_differ() {
        let log = log_of(200);
        let a = apply_channel(&log, &ChannelConfig { per: 0.4, seed: 1 }).unwrap();
        let b = apply_channel(&log, &ChannelConfig { per: 0.4, seed: 2 }).unwrap();
        assert_ne!(a.mask, b.mask);
    }

    #[test]
    fn delivery_independent_of_log_length() {
        let short = log_of(50);
        let long = log_of(200);
        let cfg = ChannelConfig { per: 0.4, seed: 77 };
        let a = apply_channel(&short, &cfg).unwrap();
        let b = apply_channel(&long, &cfg).unwrap();
        assert_eq!(a.mask[..], b.mask[..50]);
    }

    #[test]
    fn delivered_is_subsequence() {
        let log = log_of(300);
        let out = apply_channel(&log, &ChannelConfig { per: 0.5, seed: 3 }).unwrap();
        let mut it = log.messages.iter();
        for m in &out.messages {
            assert!(it.any(|orig| orig == m), "delivered message not in order");
        }
    }

    #[test]
    fn invalid_per_rejected() {
        let log = log_of(1);
        assert!(apply_channel(&log, &ChannelConfig { per: 1.5, seed: 0 }).is_err());
        assert!(apply_channel(&log, &ChannelConfig { per: -0.1, seed: 0 }).is_err());
    }
}
