//! Staged feature reduction: L1-regularized selection by proximal gradient
//! descent, then a weighted locality-preserving discriminant projection per
//! bagged subspace.

pub mod ista;
pub mod subsets;
pub mod wlpdp;

pub use ista::{ista_fit, l1_select, lasso_objective, soft_threshold, L1SelectorState};
pub use subsets::{make_subsets, SubsetSpec};
pub use wlpdp::{
    build_graph, median_pairwise_distance, scatter_matrices, solve_pencil, solve_wlpdp, Affinity,
    SigmaPolicy, WlpdpConfig, WlpdpModel,
};
