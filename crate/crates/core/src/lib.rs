//! Design and comparison of open-loop control pulses for finite-dimensional
//! quantum systems with a control-linear Hamiltonian `H[f] = H₀ + Σ f_m H_m`.
//!
//! Three designers are provided: frequency-selective geometric π-pulse
//! sequences ([`geometric`]), a monotonically convergent two-sweep iterative
//! optimizer ([`optimizer`]), and Lyapunov feedback laws realized as open-loop
//! pulses ([`lyapunov`]). The [`scenarios`] module builds the two reference
//! problems: five uncoupled quantum dots and Bell-state preparation on two
//! coupled spins.
//!
//! Numerics are generic over the [`Real`] scalar; the aliases below fix it to
//! `f64`.

pub mod dynamics;
pub mod error;
pub mod geometric;
pub mod io;
pub mod lyapunov;
pub mod operator;
pub mod optimizer;
pub mod pulses;
pub mod report;
pub mod scalar;
pub mod scenarios;
pub mod state;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Operator64 = operator::Operator<f64>;
pub type ControlSystem64 = operator::ControlSystem<f64>;
pub type PauliBasis64 = operator::PauliBasis<f64>;
pub type State64 = state::State<f64>;
pub type PureState64 = state::PureState<f64>;
pub type DensityMatrix64 = state::DensityMatrix<f64>;
pub type BlochVector64 = state::BlochVector<f64>;
pub type TimeGrid64 = dynamics::TimeGrid<f64>;
pub type ControlField64 = dynamics::ControlField<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type PulseSpec64 = pulses::PulseSpec<f64>;
pub type SystemSpec64 = report::SystemSpec<f64>;

pub type Operator32 = operator::Operator<f32>;
pub type ControlSystem32 = operator::ControlSystem<f32>;
pub type State32 = state::State<f32>;
pub type ControlField32 = dynamics::ControlField<f32>;
