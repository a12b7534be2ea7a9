//! Community order embedding and candidate matching.
//!
//! A GCN encoder maps a community (its induced subgraph) to a vector so
//! that `A ⊆ B` pushes `z(A)` elementwise below `z(B)`. Every node's k-ego
//! net is a candidate; candidates nearest the labelled communities'
//! embeddings are the located communities.

mod encoder;
mod loss;
mod matching;
mod pairs;
mod train;

pub use encoder::{encode_community, node_embeddings, EncodeMode, EncoderParams};
pub use loss::{margin_loss, margin_loss_value, order_penalty, order_penalty_on_tape, pair_loss};
pub use matching::{
    encode_all_candidates, located_communities, match_candidates, match_threshold, per_pattern_counts,
    CandidateTable, Match, MatchMetric,
};
pub use pairs::{connected_sample, sample_pairs, PairBatch};
pub use train::{train_locator, LocatorConfig, LocatorLog};
