//! Minimax-optimal mean estimation of bounded data under heterogeneous
//! differential privacy.
//!
//! Each user `i` holds a datum in `[-0.5, 0.5]` and demands privacy level
//! `ε_i`. The ADPM estimator releases `<w*, x> + Lap(max_i w*_i/ε_i)` with
//! weights minimizing the worst-case MSE; with two privacy groups the
//! weights saturate once `ε2 >= R ε1`, `R = 1 + 8/(ε1² n f)`.

pub mod audit;
pub mod bounds;
pub mod error;
pub mod estimators;
pub mod oracle;
pub mod privacy;
pub mod profile;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use estimators::{AnalyticMse, Mechanism, MechanismKind, MechanismSpec, PrivacyInput};
pub use privacy::{BoundedDataset, DpCertificate, PrivacyVector};
pub use profile::{Regime, TwoGroupProfile};
pub use sim::{DistributionSpec, SimResult};
pub use solver::{TwoGroupSolution, WeightSolution};
