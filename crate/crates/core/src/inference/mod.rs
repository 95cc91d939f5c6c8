//! Randomization inference: permutation sets, the KS statistic, p-values,
//! test inversion and the power harness.

pub mod ks;
pub mod perms;
pub mod power;
pub mod ri;

pub use ks::{ks_statistic, GroupedKs};
pub use perms::{Dimension, JointSet, PermutationSet, DEFAULT_DRAWS, EXHAUSTIVE_CAP};
pub use ri::{ci_grid, ci_invert, joint_permute, p_value_from, ri_pvalue, GridSpec, Interval, StatKind, TestResult};
