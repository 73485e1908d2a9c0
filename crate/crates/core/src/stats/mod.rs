//! Goodness-of-fit, independence and Markov-chain summary statistics.

pub mod dcor;
pub mod ks;
pub mod summary;

pub use dcor::{dcor_permutation_test, dcor_vectors_permutation_test, DcorTest};
pub use ks::{kolmogorov_survival, ks_one_sample, ks_two_sample, ks_two_sample_effective, KsTest};
pub use summary::{
    autocorrelation, effective_sample_size, integrated_autocorrelation_time, mean_se, split_rhat,
};
