//! The five-step construction: prepotential → raising field → bridge →
//! canonical frame → integral submanifold → metric, plus the inverse
//! (canonical frame → prepotential).

pub mod bridge;
pub mod chart;
pub mod frame_build;
pub mod metric;
pub mod prepot;
pub mod ricci;

pub use bridge::{build_hpp, solve_bridge, Bridge};
pub use chart::{integrate_manifold, HatFrame, ManifoldChart};
pub use frame_build::build_frame;
pub use metric::{metric_at, reality_report, MetricSample, RealityReport};
pub use prepot::{extract_prepotential, validate_prepotential, Prepotential};
pub use ricci::ricci_at;

use crate::algebra::Dimensions;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("prepotential is not charge 4 (found {0:?})")]
    NotCharge4(Option<i64>),
    #[error("prepotential depends on z⁺")]
    DependsOnZPlus,
    #[error("prepotential does not vanish at z = 0")]
    NonzeroAtOrigin,
    #[error("bridge iteration failed to reach a fixed point after {0} sweeps")]
    NoFixedPoint(usize),
    #[error("bridge is not z-triangular (a correction has z-degree {0}); the exact frame construction needs every prepotential term at z-degree ≥ 3")]
    NonTriangularBridge(u32),
    #[error("frame fields are linearly dependent at a sampled point")]
    SingularFrame,
    #[error("coframe and vielbein metrics disagree: max entry difference {0:.3e}")]
    RouteMismatch(f64),
    #[error("the distribution spans only rank {found} of {needed} at the origin")]
    RankDeficient { found: usize, needed: usize },
    #[error("chart flow diverged (|z| = {0:.3e})")]
    FlowDiverged(f64),
    #[error("chart point lies outside the configured radius {0}")]
    OutOfChart(f64),
    #[error("the 1-form ω_ab v^{{-b}} dz^{{-a}} is not closed (residual {0:.3e})")]
    NotClosed(f64),
    #[error(transparent)]
    Jets(#[from] crate::jets::JetsError),
    #[error(transparent)]
    Frames(#[from] crate::frames::FrameError),
    #[error(transparent)]
    Algebra(#[from] crate::algebra::AlgebraError),
}

/// Which index of Ĵ is contracted when the distribution generators are
/// assembled; the base-point reading is fixed by the flat regression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum JPairing {
    /// Contract as 𝕁ᵇ_a (the reading for which the flat distribution is
    /// tangent to the τ-fixed slice).
    #[default]
    TauBasis,
    /// The transposed contraction, kept as a switch for comparison.
    Transposed,
}

/// Pipeline configuration; all tolerances are pinned here.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub dims: Dimensions,
    /// Truncation order D in total z-degree.
    pub order: u32,
    /// Degree bound for the u-part of solver unknowns (default 2D + 4).
    pub u_bound: u32,
    /// Chart radius in flow coordinates.
    pub chart_radius: f64,
    /// RK4 steps per unit flow time.
    pub chart_steps: u32,
    /// Cap on the number of U samples when spanning the distribution.
    pub max_u_samples: usize,
    /// Norm guard for flow divergence.
    pub flow_max_norm: f64,
    pub newton_max_iter: usize,
    /// Numeric rank threshold.
    pub rank_tol: f64,
    /// Metric reality tolerance (imaginary parts).
    pub reality_tol: f64,
    /// Coframe/vielbein route agreement tolerance.
    pub route_tol: f64,
    pub j_pairing: JPairing,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(dims: Dimensions, order: u32) -> Self {
        PipelineConfig {
            dims,
            order,
            u_bound: 2 * order + 4,
            chart_radius: 0.1,
            chart_steps: 8,
            max_u_samples: 6,
            flow_max_norm: 1e3,
            newton_max_iter: 50,
            rank_tol: 1e-9,
            reality_tol: 1e-8,
            route_tol: 1e-8,
            j_pairing: JPairing::TauBasis,
            seed: 1,
        }
    }
}
