pub mod error;
pub mod linalg;
pub mod tol;

pub use error::{Error, Result};
pub use tol::Tolerances;
pub mod algebra;
pub mod channel;
pub mod par;
pub mod state;
pub mod modular;
pub mod bayesinv;
pub mod generate;
pub mod disint;
pub mod io;
pub mod problem;
