pub mod pulse;
pub mod purify;
pub mod tomography;
