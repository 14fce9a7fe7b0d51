//! Time-series binning and the statistical pretests.

pub mod ks;
pub mod portmanteau;
pub mod pretest;
pub mod series;
pub mod special;

pub use ks::{kolmogorov_sf, ks_exponential, KsResult};
pub use portmanteau::{autocorrelation, ljung_box, QTestResult, DEFAULT_MAX_LAG};
pub use pretest::{pretest_dataset, PretestReport};
pub use series::{bin_counts, bin_series, PairSeries, Resolution};
pub use special::chi_square_sf;
