//! Kendall's rank correlation matrix, its Hoeffding pieces, and the Pearson
//! and Spearman baselines.
//!
//! ```text
//! K_n = 2/(n(n−1)) · Σ_{i<j} A_ij A_ijᵀ,     A_ij = sign(x_i − x_j)
//! ```
//!
//! Ties contribute `sign(0) = 0`, which keeps `K_n` symmetric and bounded on
//! data with repeated values.

mod baseline;
mod hoeffding;
mod io;
mod kendall;

pub use baseline::{pearson_matrix, spearman_matrix};
pub use hoeffding::{frobenius_gap, hoeffding_pieces, projection_rows, w_matrix, HoeffdingPieces};
pub use io::{read_matrix_binary, read_matrix_csv, write_matrix_binary, write_matrix_csv};
pub use kendall::{kendall_matrix_fast, kendall_matrix_naive, KendallMatrix};
