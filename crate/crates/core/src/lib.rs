//! Device-independent conference key agreement bounds: correlations, their
//! classical-quantum extensions, conditional total correlation, the
//! parity-CHSH game, explicit eavesdropping attacks and a protocol simulator.

pub mod attacks;
pub mod correlations;
pub mod error;
pub mod games;
pub mod infotheory;
pub mod protocol;
pub mod qmat;
pub mod random;

pub use correlations::{Correlation, CqState, Wiring};
pub use error::{Error, Result};
pub use qmat::{ComplexMatrix, DensityMatrix, Povm, PureState};
