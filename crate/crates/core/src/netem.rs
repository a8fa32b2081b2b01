//! Emulated communication channel: base delay, uniform jitter, seeded
//! probabilistic loss, and a typed frame protocol with sequence numbers.
//!
//! The channel is a priority queue keyed by delivery time. Reordering is
//! possible when the jitter exceeds the inter-send gap; receivers use the
//! sequence numbers to drop stale data. A given `(seed, send schedule)`
//! fully determines drops and delivery times.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NetProfile {
    /// Base one-way delay, s.
    #[serde(default)]
    pub delay_s: f64,
    /// Uniform jitter half-width, s; delivery delay is `delay ± U(jitter)`.
    #[serde(default)]
    pub jitter_s: f64,
    /// Probability that a frame is dropped, in [0, 1].
    #[serde(default)]
    pub loss: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NetProfile {
    fn default() -> Self {
        NetProfile {
            delay_s: 0.0,
            jitter_s: 0.0,
            loss: 0.0,
            seed: 0,
        }
    }
}

impl NetProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.delay_s.is_finite() && self.delay_s >= 0.0) {
            return Err(Error::Config("net profile: delay must be >= 0".into()));
        }
        if !(self.jitter_s.is_finite() && self.jitter_s >= 0.0) {
            return Err(Error::Config("net profile: jitter must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.loss) {
            return Err(Error::Config("net profile: loss must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    Measurement,
    Command,
    Event,
}

#[derive(Debug, Clone)]
pub struct Frame<T> {
    pub kind: FrameKind,
    pub source: String,
    pub destination: String,
    pub seq: u64,
    pub payload: T,
    pub send_time_s: f64,
    pub deliver_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SendOutcome {
    Scheduled { deliver_time_s: f64 },
    Dropped,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChannelStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Mean of (deliver − send) over scheduled frames.
    pub mean_delay_s: f64,
}

struct Scheduled<T> {
    deliver_time_s: f64,
    seq: u64,
    frame: Frame<T>,
}

impl<T> PartialEq for Scheduled<T> {
    fn eq(&self, other: &Self) -> bool {
        self.deliver_time_s == other.deliver_time_s && self.seq == other.seq
    }
}
impl<T> Eq for Scheduled<T> {}
impl<T> Ord for Scheduled<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (deliver time, seq); delivery times are finite by
        // construction
        other
            .deliver_time_s
            .partial_cmp(&self.deliver_time_s)
            .unwrap()
            .then(other.seq.cmp(&self.seq))
    }
}
impl<T> PartialOrd for Scheduled<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub struct Channel<T> {
    profile: NetProfile,
    rng: ChaCha12Rng,
    queue: BinaryHeap<Scheduled<T>>,
    last_poll_s: f64,
    sent: u64,
    delivered: u64,
    dropped: u64,
    delay_sum_s: f64,
}

impl<T> Channel<T> {
    pub fn new(profile: NetProfile) -> Result<Self> {
        profile.validate()?;
        let rng = ChaCha12Rng::seed_from_u64(profile.seed);
        Ok(Channel {
            profile,
            rng,
            queue: BinaryHeap::new(),
            last_poll_s: f64::NEG_INFINITY,
            sent: 0,
            delivered: 0,
            dropped: 0,
            delay_sum_s: 0.0,
        })
    }

    /// Schedule or drop a frame. The frame's `deliver_time_s` is filled in
    /// on scheduling; delivery never precedes the send time.
    pub fn send(&mut self, mut frame: Frame<T>) -> SendOutcome {
        self.sent += 1;
        if self.profile.loss > 0.0 && self.rng.gen::<f64>() < self.profile.loss {
            self.dropped += 1;
            return SendOutcome::Dropped;
        }
        let jitter = if self.profile.jitter_s > 0.0 {
            self.rng
                .gen_range(-self.profile.jitter_s..=self.profile.jitter_s)
        } else {
            0.0
        };
        let deliver = (frame.send_time_s + self.profile.delay_s + jitter).max(frame.send_time_s);
        frame.deliver_time_s = deliver;
        self.delay_sum_s += deliver - frame.send_time_s;
        self.queue.push(Scheduled {
            deliver_time_s: deliver,
            seq: frame.seq,
            frame,
        });
        SendOutcome::Scheduled {
            deliver_time_s: deliver,
        }
    }

    /// All frames due at or before `now`, ordered by (deliver time, seq).
    /// `now` must be non-decreasing across calls.
    pub fn poll(&mut self, now_s: f64) -> Result<Vec<Frame<T>>> {
        if now_s < self.last_poll_s {
            return Err(Error::Channel(format!(
                "poll time regressed: {now_s} < {}",
                self.last_poll_s
            )));
        }
        self.last_poll_s = now_s;
        let mut due = Vec::new();
        while let Some(top) = self.queue.peek() {
            if top.deliver_time_s <= now_s {
                due.push(self.queue.pop().unwrap().frame);
            } else {
                break;
            }
        }
        self.delivered += due.len() as u64;
        Ok(due)
    }

    pub fn stats(&self) -> ChannelStats {
        let scheduled = self.sent - self.dropped;
        ChannelStats {
            sent: self.sent,
            delivered: self.delivered,
            dropped: self.dropped,
            mean_delay_s: if scheduled > 0 {
                self.delay_sum_s / scheduled as f64
            } else {
                0.0
            },
        }
    }

    pub fn profile(&self) -> &NetProfile {
        &self.profile
    }

    /// Frames scheduled but not yet delivered.
    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(seq: u64, t: f64) -> Frame<u64> {
        Frame {
            kind: FrameKind::Measurement,
            source: "plant".into(),
            destination: "ctrl".into(),
            seq,
            payload: seq,
            send_time_s: t,
            deliver_time_s: f64::NAN,
        }
    }

    #[test]
    fn identity_channel_delivers_same_step() {
        let mut ch = Channel::new(NetProfile::default()).unwrap();
        ch.send(frame(0, 1.0));
        let got = ch.poll(1.0).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].deliver_time_s, 1.0);
    }

    #[test]
    fn full_loss_drops_everything() {
        let mut ch = Channel::new(NetProfile {
            loss: 1.0,
            ..NetProfile::default()
        })
        .unwrap();
        for s in 0..100 {
            assert_eq!(ch.send(frame(s, s as f64)), SendOutcome::Dropped);
        }
        assert_eq!(ch.stats().dropped, 100);
        assert!(ch.poll(1000.0).unwrap().is_empty());
    }

    #[test]
    fn fixed_delay_shifts_delivery() {
        let mut ch = Channel::new(NetProfile {
            delay_s: 0.5,
            ..NetProfile::default()
        })
        .unwrap();
        ch.send(frame(0, 30.0));
        assert!(ch.poll(30.4).unwrap().is_empty());
        let got = ch.poll(30.5).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].deliver_time_s, 30.5);
    }

    #[test]
    fn same_step_ties_break_by_sequence() {
        let mut ch = Channel::new(NetProfile::default()).unwrap();
        ch.send(frame(2, 1.0));
        ch.send(frame(1, 1.0));
        let got = ch.poll(1.0).unwrap();
        assert_eq!(got.iter().map(|f| f.seq).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn jitter_can_reorder_and_seq_exposes_it() {
        // jitter wider than the inter-send gap: some seeded run must exhibit
        // at least one reordering
        let mut ch = Channel::new(NetProfile {
            delay_s: 0.2,
            jitter_s: 0.15,
            loss: 0.0,
            seed: 7,
        })
        .unwrap();
        for s in 0..50 {
            ch.send(frame(s, s as f64 * 0.01));
        }
        let got = ch.poll(100.0).unwrap();
        assert_eq!(got.len(), 50);
        let reordered = got.windows(2).any(|w| w[1].seq < w[0].seq);
        assert!(reordered, "expected at least one reordering under jitter");
        // but never causal violations
        for f in &got {
            assert!(f.deliver_time_s >= f.send_time_s);
        }
    }

    #[test]
    fn poll_time_regression_is_an_error() {
        let mut ch = Channel::new(NetProfile::default()).unwrap();
        ch.poll(2.0).unwrap();
        assert!(ch.poll(1.0).is_err());
    }

    #[test]
    fn loss_rate_within_binomial_bounds() {
        let p = 0.1;
        let n = 10_000u64;
        let mut ch = Channel::new(NetProfile {
            loss: p,
            seed: 42,
            ..NetProfile::default()
        })
        .unwrap();
        for s in 0..n {
            ch.send(frame(s, s as f64 * 1e-3));
        }
        let dropped = ch.stats().dropped as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (dropped - n as f64 * p).abs() <= 3.0 * sigma,
            "dropped {dropped} outside 3 sigma of {}",
            n as f64 * p
        );
    }

    #[test]
    fn mean_delay_equals_base_without_jitter() {
        let mut ch = Channel::new(NetProfile {
            delay_s: 0.25,
            ..NetProfile::default()
        })
        .unwrap();
        for s in 0..10 {
            ch.send(frame(s, s as f64));
        }
        assert!((ch.stats().mean_delay_s - 0.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn determinism_and_conservation(
            seed in any::<u64>(),
            delay in 0.0f64..1.0,
            jitter in 0.0f64..0.5,
            loss in 0.0f64..1.0,
            n in 1usize..200,
        ) {
            let profile = NetProfile { delay_s: delay, jitter_s: jitter, loss, seed };
            let run = || {
                let mut ch = Channel::new(profile.clone()).unwrap();
                let mut outcomes = Vec::new();
                for s in 0..n as u64 {
                    outcomes.push(ch.send(frame(s, s as f64 * 0.05)));
                }
                let frames = ch.poll(1e6).unwrap();
                (outcomes, frames.iter().map(|f| (f.seq, f.deliver_time_s)).collect::<Vec<_>>(), ch.stats())
            };
            let (o1, f1, s1) = run();
            let (o2, f2, s2) = run();
            // identical seeds and schedules give identical outcomes
            prop_assert_eq!(o1, o2);
            prop_assert_eq!(&f1, &f2);
            prop_assert_eq!(s1, s2);
            // conservation: delivered + dropped = sent
            prop_assert_eq!(s1.delivered + s1.dropped, s1.sent);
            // causality
            for (seq, deliver) in &f1 {
                prop_assert!(*deliver >= *seq as f64 * 0.05);
            }
        }
    }
}
