//! Closed-form load predictions used to check the simulator.
//!
//! Generic over the scalar so the same formulas can be evaluated in floating
//! point or exactly over rationals.

use num_traits::Num;

pub trait Scalar: Num + Copy + PartialOrd {}

impl<T: Num + Copy + PartialOrd> Scalar for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("propagation bound must be positive")]
    NonPositiveDelta,
    #[error("rates and node counts must be non-negative")]
    Negative,
}

/// Resource-server load when every one of `nodes` full nodes re-executes each
/// data query during block validation, with blocks reaching all nodes within
/// `delta` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadModel<T> {
    pub client_rate: T,
    pub nodes: T,
    pub delta: T,
}

impl<T: Scalar> LoadModel<T> {
    pub fn new(client_rate: T, nodes: T, delta: T) -> Result<Self, DomainError> {
        if delta <= T::zero() {
            return Err(DomainError::NonPositiveDelta);
        }
        if client_rate < T::zero() || nodes < T::zero() {
            return Err(DomainError::Negative);
        }
        Ok(Self {
            client_rate,
            nodes,
            delta,
        })
    }

    /// Lower bound on resource-server requests per second: `k * N / delta`.
    pub fn rs_rate(&self) -> T {
        self.client_rate * self.nodes / self.delta
    }

    /// Ratio of resource-server load to client load: `N / delta`.
    pub fn amplification(&self) -> T {
        self.nodes / self.delta
    }
}

/// `k * N / delta`.
pub fn predicted_amplification<T: Scalar>(k: T, n: T, delta: T) -> Result<T, DomainError> {
    LoadModel::new(k, n, delta).map(|m| m.rs_rate())
}

/// Long-run fraction of arrivals a saturated single server must shed:
/// `1 - service/arrival` when arrivals outpace service, else zero.
pub fn overload_drop_fraction<T: Scalar>(arrival_rate: T, service_rate: T) -> T {
    if arrival_rate <= service_rate || arrival_rate <= T::zero() {
        T::zero()
    } else {
        T::one() - service_rate / arrival_rate
    }
}
