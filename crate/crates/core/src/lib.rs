//! Kolmogorov probability spaces for two-setting Bell experiments: the three
//! sample spaces, the Bell-CHSH inequalities each one supports, concrete
//! correlation models, joint-distribution feasibility and a Monte Carlo
//! harness.

pub mod error;
pub mod feasibility;
pub mod inequality;
pub mod models;
pub mod prob;
pub mod rational;
pub mod sim;
pub mod simplex;
pub mod spaces;
pub mod table;

pub use error::{Error, Result};
pub use feasibility::{fine_feasible, fine_orientations, min_negativity_joint, FeasibilityCertificate, SignedJoint};
pub use inequality::{Hypothesis, InequalityId, InequalityReport};
pub use models::{DeterministicMixture, HypothesisFlags, LhvModel, Model, ModelSpec, QuantumPairModel};
pub use prob::{Event, EventSpace, Measure, RandomVariable, SampleSpace};
pub use rational::Rational;
pub use sim::{RunConfig, RunLog};
pub use spaces::{Angle, BellMeasure, BellSpace, LambdaSupport, Settings, SpaceId};
pub use table::{AnyTable, CorrelationTable, ExactTable};
