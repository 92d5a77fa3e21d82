pub mod bounds;
pub mod cell_solver;
pub mod cli;
pub mod error;
pub mod laminate;
pub mod linalg;
pub mod perturbation;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Eigen, PhasePair, SymTensor};
