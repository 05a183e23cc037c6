//! Single-server FIFO queue with a finite waiting room and impatience.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RsOutcome {
    Served {
        start: f64,
        completion: f64,
    },
    /// Waiting room full on arrival.
    Dropped {
        at: f64,
    },
    /// Would have waited longer than the timeout.
    TimedOut {
        at: f64,
    },
}

impl RsOutcome {
    /// When the requester learns the result.
    pub fn resolved_at(&self) -> f64 {
        match *self {
            RsOutcome::Served { completion, .. } => completion,
            RsOutcome::Dropped { at } | RsOutcome::TimedOut { at } => at,
        }
    }

    pub fn is_served(&self) -> bool {
        matches!(self, RsOutcome::Served { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RsAccounting {
    pub arrived: u64,
    pub served: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

#[derive(Debug, Clone, Copy)]
struct Time(f64);

impl PartialEq for Time {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone)]
pub struct RsQueue {
    service_time: f64,
    buffer: usize,
    timeout: f64,
    busy_until: f64,
    /// Times at which currently waiting requests leave the waiting room.
    waiting: BinaryHeap<Reverse<Time>>,
    /// Resolution time of every outcome, split by kind.
    served_at: Vec<f64>,
    dropped_at: Vec<f64>,
    arrivals: Vec<f64>,
}

impl RsQueue {
    /// `timeout` may be infinite.
    pub fn new(service_rate: f64, buffer: usize, timeout: f64) -> Self {
        Self {
            service_time: 1.0 / service_rate,
            buffer,
            timeout,
            busy_until: f64::NEG_INFINITY,
            waiting: BinaryHeap::new(),
            served_at: Vec::new(),
            dropped_at: Vec::new(),
            arrivals: Vec::new(),
        }
    }

    fn expire(&mut self, t: f64) {
        while let Some(Reverse(Time(leave))) = self.waiting.peek() {
            if *leave > t {
                break;
            }
            self.waiting.pop();
        }
    }

    /// Arrivals must come in non-decreasing time order.
    pub fn arrive(&mut self, t: f64) -> RsOutcome {
        debug_assert!(self.arrivals.last().is_none_or(|&p| p <= t));
        self.arrivals.push(t);
        self.expire(t);
        let busy = self.busy_until > t;
        if busy && self.waiting.len() >= self.buffer {
            self.dropped_at.push(t);
            return RsOutcome::Dropped { at: t };
        }
        let start = self.busy_until.max(t);
        if start - t > self.timeout {
            let at = t + self.timeout;
            self.waiting.push(Reverse(Time(at)));
            self.dropped_at.push(at);
            return RsOutcome::TimedOut { at };
        }
        let completion = start + self.service_time;
        self.busy_until = completion;
        if start > t {
            self.waiting.push(Reverse(Time(start)));
        }
        self.served_at.push(completion);
        RsOutcome::Served { start, completion }
    }

    /// Requests waiting plus the one in service at `t`.
    pub fn depth_at(&mut self, t: f64) -> usize {
        self.expire(t);
        self.waiting.len() + usize::from(self.busy_until > t)
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    /// Outcomes resolved by `t`; the rest are in flight.
    pub fn accounting_at(&self, t: f64) -> RsAccounting {
        let arrived = self.arrivals.iter().filter(|&&a| a <= t).count() as u64;
        let served = self.served_at.iter().filter(|&&c| c <= t).count() as u64;
        let dropped = self.dropped_at.iter().filter(|&&c| c <= t).count() as u64;
        RsAccounting {
            arrived,
            served,
            dropped,
            in_flight: arrived - served - dropped,
        }
    }

    /// Every outcome resolved.
    pub fn accounting(&self) -> RsAccounting {
        RsAccounting {
            arrived: self.arrivals.len() as u64,
            served: self.served_at.len() as u64,
            dropped: self.dropped_at.len() as u64,
            in_flight: 0,
        }
    }
}

/// Run a sorted arrival stream through a queue with no timeout.
pub fn model_rs(arrivals: &[f64], service_rate: f64, buffer: usize) -> RsAccounting {
    let mut q = RsQueue::new(service_rate, buffer, f64::INFINITY);
    for &t in arrivals {
        q.arrive(t);
    }
    q.accounting()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_buffer_drops_concurrent_arrival() {
        let mut q = RsQueue::new(1.0, 0, f64::INFINITY);
        assert!(q.arrive(0.0).is_served());
        assert_eq!(q.arrive(0.5), RsOutcome::Dropped { at: 0.5 });
        assert!(q.arrive(1.0).is_served());
    }

    #[test]
    fn fifo_start_times() {
        let mut q = RsQueue::new(2.0, 10, f64::INFINITY);
        let starts: Vec<f64> = [0.0, 0.0, 0.1]
            .iter()
            .map(|&t| match q.arrive(t) {
                RsOutcome::Served { start, .. } => start,
                o => panic!("{o:?}"),
            })
            .collect();
        assert_eq!(starts, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn buffer_counts_only_waiting() {
        let mut q = RsQueue::new(1.0, 2, f64::INFINITY);
        for t in [0.0, 0.1, 0.2] {
            assert!(q.arrive(t).is_served());
        }
        assert_eq!(q.depth_at(0.3), 3);
        assert!(matches!(q.arrive(0.3), RsOutcome::Dropped { .. }));
        // At t=1 the second request starts service, freeing one slot.
        assert!(q.arrive(1.0).is_served());
    }

    #[test]
    fn timeout_counts_as_drop() {
        let mut q = RsQueue::new(1.0, 100, 1.5);
        q.arrive(0.0);
        // Starts after waiting 1s, within the timeout.
        assert!(q.arrive(0.0).is_served());
        assert_eq!(q.arrive(0.0), RsOutcome::TimedOut { at: 1.5 });
        let acc = q.accounting_at(1.2);
        assert_eq!(acc.dropped, 0);
        assert_eq!(q.accounting_at(1.5).dropped, 1);
    }

    #[test]
    fn stable_queue_has_no_drops() {
        let arrivals: Vec<f64> = (0..10_000).map(|i| i as f64 * 0.1).collect();
        let acc = model_rs(&arrivals, 20.0, 50);
        assert_eq!(acc.dropped, 0);
        assert_eq!(acc.served, 10_000);
    }

    #[test]
    fn accounting_identity_mid_run() {
        let arrivals: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
        let mut q = RsQueue::new(50.0, 5, 0.5);
        for &t in &arrivals {
            q.arrive(t);
        }
        for t in [0.0, 1.0, 5.0, 9.99, 100.0] {
            let a = q.accounting_at(t);
            assert_eq!(a.arrived, a.served + a.dropped + a.in_flight);
        }
    }
}
