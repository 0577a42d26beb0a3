use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::Pose2D;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("drop probability {0} outside [0, 1]")]
    DropProbability(f64),
    #[error("latency_min {min} ms exceeds latency_max {max} ms")]
    LatencyOrder { min: u64, max: u64 },
    #[error("range {0} m must be positive")]
    Range(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub drop_probability: f64,
    pub latency_min_ms: u64,
    pub latency_max_ms: u64,
    pub range_m: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(ChannelError::DropProbability(self.drop_probability));
        }
        if self.latency_min_ms > self.latency_max_ms {
            return Err(ChannelError::LatencyOrder {
                min: self.latency_min_ms,
                max: self.latency_max_ms,
            });
        }
        if !(self.range_m > 0.0) {
            return Err(ChannelError::Range(self.range_m));
        }
        Ok(())
    }
}

/// Delivery time for one message, or `None` if it is lost. The random draw
/// depends only on the channel seed and `seq`.
pub fn channel_send(cfg: &ChannelConfig, sender: &Pose2D, receiver: &Pose2D, now_ms: u64, seq: u64) -> Option<u64> {
    if (sender.position - receiver.position).norm() > cfg.range_m {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(seq);
    let u: f64 = rng.gen();
    if u < cfg.drop_probability {
        return None;
    }
    let latency = rng.gen_range(cfg.latency_min_ms..=cfg.latency_max_ms);
    Some(now_ms + latency)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Delivery {
    pub delivery_time_ms: u64,
    pub seq: u64,
    pub sender: u32,
    pub receiver: u32,
    pub send_time_ms: u64,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Default)]
struct Queue {
    next_seq: u64,
    pending: BinaryHeap<Reverse<Delivery>>,
}

/// Event queue ordered by `(delivery time, sequence number)`.
#[derive(Debug)]
pub struct Channel {
    config: ChannelConfig,
    queue: Mutex<Queue>,
}

impl Channel {
    pub fn new(config: ChannelConfig) -> Result<Self, ChannelError> {
        config.validate()?;
        Ok(Self {
            config,
            queue: Mutex::new(Queue::default()),
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    /// Returns the assigned sequence number and delivery time.
    pub fn send(
        &self,
        sender: (u32, &Pose2D),
        receiver: (u32, &Pose2D),
        bytes: Vec<u8>,
        now_ms: u64,
    ) -> (u64, Option<u64>) {
        let mut q = self.queue.lock().expect("channel lock");
        let seq = q.next_seq;
        q.next_seq += 1;
        let at = channel_send(&self.config, sender.1, receiver.1, now_ms, seq);
        if let Some(delivery_time_ms) = at {
            q.pending.push(Reverse(Delivery {
                delivery_time_ms,
                seq,
                sender: sender.0,
                receiver: receiver.0,
                send_time_ms: now_ms,
                bytes,
            }));
        }
        (seq, at)
    }

    /// Removes and returns every message due at or before `now_ms`, in order.
    pub fn deliver_until(&self, now_ms: u64) -> Vec<Delivery> {
        let mut q = self.queue.lock().expect("channel lock");
        let mut out = Vec::new();
        while q.pending.peek().is_some_and(|d| d.0.delivery_time_ms <= now_ms) {
            out.push(q.pending.pop().expect("peeked").0);
        }
        out
    }

    pub fn pending(&self) -> usize {
        self.queue.lock().expect("channel lock").pending.len()
    }
}
