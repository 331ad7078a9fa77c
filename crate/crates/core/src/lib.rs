//! Capacity upper bounds and achievable rates for a Gaussian point-to-point
//! link assisted by parallel relays.

pub mod channel;
pub mod cutset;
pub mod error;
pub mod experiments;
pub mod gauss_info;
pub mod montecarlo;
pub mod report;
pub mod strategies;
pub mod verify;

pub use channel::{Geometry, NetworkConfig, Point, SnrTriple};
pub use cutset::{cutset, BindingCut, CutsetResult};
pub use error::{Error, Result};
pub use experiments::{run_sweep, RateCurve, SweepSpec};
pub use gauss_info::{CorrelationState, Cut, JointGaussian, Var};
pub use montecarlo::{MomentReport, SimMode, SimRun};
pub use strategies::{af_rate, mrc_rate, AfGains};
pub use report::{parse_network, rate_summary, RateSummary};
pub use verify::{run_suite, Suite, VerifyReport};
