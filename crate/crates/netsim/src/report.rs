use serde::{Deserialize, Serialize};

use crate::config::{Mode, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles over `samples`.
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let rank = |p: f64| samples[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            count: n as u64,
            mean: samples.iter().sum::<f64>() / n as f64,
            p50: rank(0.50),
            p95: rank(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mode: Mode,
    pub n_nodes: usize,
    pub delta_seconds: f64,
    pub client_rate: f64,
    pub seed: u64,
    /// Data queries issued by clients.
    pub client_requests: u64,
    pub rs_requests_total: u64,
    pub rs_served: u64,
    /// Buffer overflows plus timeouts.
    pub rs_drops: u64,
    pub rs_in_flight: u64,
    /// Resource-server arrivals per second outside the warm-up window.
    pub rs_rps_mean: f64,
    pub rs_rps_predicted: f64,
    pub amplification_measured: f64,
    pub amplification_predicted: f64,
    pub consensus_converged: bool,
    pub final_height: u64,
    pub tx_latency_stats: LatencyStats,
    pub blocks_mined: u64,
    pub forks_observed: u64,
    pub max_gossip_delay: f64,
    /// Simulated time at which the run stopped.
    pub end_time: f64,
    pub config: SimConfig,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One sample of the time series written alongside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub time: f64,
    pub rs_queue_depth: usize,
    pub tip_heights: Vec<u64>,
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let nodes = rows.first().map_or(0, |r| r.tip_heights.len());
    let mut out = String::from("time,rs_queue_depth");
    for i in 0..nodes {
        out.push_str(&format!(",tip_height_{i}"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{}", r.time, r.rs_queue_depth));
        for h in &r.tip_heights {
            out.push_str(&format!(",{h}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles() {
        let s = LatencyStats::from_samples((1..=100).map(f64::from).collect());
        assert_eq!(s.p50, 50.0);
        assert_eq!(s.p95, 95.0);
        assert_eq!(s.mean, 50.5);
        assert_eq!(LatencyStats::from_samples(vec![]), LatencyStats::default());
        assert_eq!(LatencyStats::from_samples(vec![3.0]).p95, 3.0);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![SeriesRow {
            time: 1.5,
            rs_queue_depth: 2,
            tip_heights: vec![3, 4],
        }];
        assert_eq!(
            series_csv(&rows),
            "time,rs_queue_depth,tip_height_0,tip_height_1\n1.5,2,3,4\n"
        );
    }
}
