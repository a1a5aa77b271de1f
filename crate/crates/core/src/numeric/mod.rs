//! Dense numeric kernel: matrices, layers, an LSTM cell with hand-derived
//! backward passes, Adam, and a central-difference gradient checker.

pub mod adam;
pub mod gradcheck;
pub mod layers;
pub mod lstm;
pub mod matrix;
pub mod params;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use layers::{cross_entropy_with_grad, log_sum_exp, relu, relu_backward, sigmoid, softmax, Linear};
pub use lstm::{LstmCell, LstmTrace};
pub use matrix::{axpy, dot, euclidean_distance, norm, squared_distance, Matrix};
pub use params::{Joint, Params, VecParams};
