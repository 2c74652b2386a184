//! Parallel-road physics: free-flow latency, the speed implied by a posted
//! latency, and the headway-based capacity of a road carrying a mix of human
//! and autonomous vehicles.
//!
//! A vehicle travelling at speed `v` with headway `tau` occupies `L + tau * v`
//! meters of road. A road posted at latency `ell` moves at `v = d / ell`, and a
//! flow assignment is admissible when the occupied length per second does not
//! exceed the distance covered per second:
//!
//! ```text
//! f_h * (L + tau_h * v) + f_a * (L + tau_a * v) <= v
//! ```
//!
//! Lower latencies mean higher speeds and more throughput, and shorter
//! autonomous headways (platooning) mean more throughput at any speed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for latency and flow comparisons, in SI units.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoadError {
    #[error("latency {ell} s is below the free-flow latency {free_flow} s")]
    LatencyBelowFreeFlow { ell: f64, free_flow: f64 },
    #[error("autonomous flow {f_a} veh/s does not fit on the road at latency {ell} s")]
    AutonomousFlowInfeasible { f_a: f64, ell: f64 },
    #[error("invalid road parameter `{field}`: {reason}")]
    InvalidRoad { field: &'static str, reason: String },
    #[error("network has no roads")]
    EmptyNetwork,
}

/// Physical description of one road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Road {
    /// Position in the sorted network.
    pub id: usize,
    /// Length in meters.
    pub length: f64,
    /// Free-flow speed in m/s.
    pub free_speed: f64,
    /// Effective vehicle length including the minimum gap, meters.
    pub vehicle_length: f64,
    /// Human headway time, seconds.
    pub tau_h: f64,
    /// Autonomous headway time, seconds.
    pub tau_a: f64,
}

impl Road {
    pub fn new(
        length: f64,
        free_speed: f64,
        vehicle_length: f64,
        tau_h: f64,
        tau_a: f64,
    ) -> Result<Self, RoadError> {
        let positive = |field: &'static str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(RoadError::InvalidRoad {
                    field,
                    reason: format!("must be finite and > 0, got {value}"),
                })
            }
        };
        positive("length", length)?;
        positive("free_speed", free_speed)?;
        positive("vehicle_length", vehicle_length)?;
        positive("tau_h", tau_h)?;
        positive("tau_a", tau_a)?;
        if tau_a > tau_h {
            return Err(RoadError::InvalidRoad {
                field: "tau_a",
                reason: format!("autonomous headway {tau_a} s exceeds human headway {tau_h} s"),
            });
        }
        Ok(Self {
            id: 0,
            length,
            free_speed,
            vehicle_length,
            tau_h,
            tau_a,
        })
    }

    /// `a = d / v_bar`, the smallest latency the road can be posted at.
    pub fn free_flow_latency(&self) -> f64 {
        self.length / self.free_speed
    }

    fn check_latency(&self, ell: f64) -> Result<(), RoadError> {
        let free_flow = self.free_flow_latency();
        if ell.is_nan() || ell < free_flow - TOL {
            Err(RoadError::LatencyBelowFreeFlow { ell, free_flow })
        } else {
            Ok(())
        }
    }

    /// Speed implied by posting latency `ell`.
    pub fn speed_at_latency(&self, ell: f64) -> Result<f64, RoadError> {
        self.check_latency(ell)?;
        // Within tolerance of free flow the road runs at exactly v_bar.
        if ell <= self.free_flow_latency() {
            return Ok(self.free_speed);
        }
        Ok(self.length / ell)
    }

    fn spacing(&self, tau: f64, speed: f64) -> f64 {
        self.vehicle_length + tau * speed
    }

    pub fn is_feasible(&self, ell: f64, f_h: f64, f_a: f64) -> Result<bool, RoadError> {
        let v = self.speed_at_latency(ell)?;
        let occupied = f_h * self.spacing(self.tau_h, v) + f_a * self.spacing(self.tau_a, v);
        Ok(occupied <= v + TOL)
    }

    /// Largest total flow with autonomous share `alpha` at latency `ell`.
    pub fn max_total_flow(&self, ell: f64, alpha: f64) -> Result<f64, RoadError> {
        let v = self.speed_at_latency(ell)?;
        let alpha = alpha.clamp(0.0, 1.0);
        let tau = (1.0 - alpha) * self.tau_h + alpha * self.tau_a;
        Ok(v / self.spacing(tau, v))
    }

    /// Largest human flow that still fits next to `f_a` autonomous vehicles.
    pub fn residual_human_capacity(&self, ell: f64, f_a: f64) -> Result<f64, RoadError> {
        let v = self.speed_at_latency(ell)?;
        let left = v - f_a * self.spacing(self.tau_a, v);
        if left < -TOL {
            return Err(RoadError::AutonomousFlowInfeasible { f_a, ell });
        }
        Ok((left / self.spacing(self.tau_h, v)).max(0.0))
    }
}

/// Roads sorted ascending by free-flow latency; ties keep input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    roads: Vec<Road>,
}

impl Network {
    pub fn new(mut roads: Vec<Road>) -> Result<Self, RoadError> {
        if roads.is_empty() {
            return Err(RoadError::EmptyNetwork);
        }
        // `sort_by` is stable, so equal free-flow latencies keep input order.
        roads.sort_by(|x, y| x.free_flow_latency().total_cmp(&y.free_flow_latency()));
        for (i, road) in roads.iter_mut().enumerate() {
            road.id = i;
        }
        Ok(Self { roads })
    }

    pub fn roads(&self) -> &[Road] {
        &self.roads
    }

    pub fn len(&self) -> usize {
        self.roads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roads.is_empty()
    }

    pub fn road(&self, i: usize) -> &Road {
        &self.roads[i]
    }

    pub fn free_flow_latencies(&self) -> Vec<f64> {
        self.roads.iter().map(Road::free_flow_latency).collect()
    }
}

/// Per-road posted latencies, one entry per road of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CongestionProfile(pub Vec<f64>);

impl CongestionProfile {
    pub fn new(network: &Network, ell: Vec<f64>) -> Result<Self, RoadError> {
        if ell.len() != network.len() {
            return Err(RoadError::InvalidRoad {
                field: "ell",
                reason: format!("expected {} latencies, got {}", network.len(), ell.len()),
            });
        }
        for (road, &l) in network.roads().iter().zip(&ell) {
            road.check_latency(l)?;
        }
        Ok(Self(ell))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowAssignment {
    pub f_h: Vec<f64>,
    pub f_a: Vec<f64>,
}

impl FlowAssignment {
    pub fn zeros(n: usize) -> Self {
        Self {
            f_h: vec![0.0; n],
            f_a: vec![0.0; n],
        }
    }
}
