//! Decision-tree induction under a pairwise-loss impurity, with weakest-link pruning.

mod grow;
mod io;
mod loss;
mod model;
mod prune;
mod split;

pub use grow::{grow, MIN_DECREASE};
pub use loss::{impurity, LossFunction};
pub use model::{DecisionTree, Node, SplitRule};
pub use prune::{mccp, PruneSequence, PruneStep, ALPHA_TOL};
pub use split::{best_split, best_split_sorted, Split};
