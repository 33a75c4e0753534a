//! Source hyperlink graph, biased random walks and skip-gram node embeddings.

mod graph;
mod skipgram;
mod walks;

pub use graph::{build_graph, SourceGraph};
pub use skipgram::{
    article_network_repr, sgns_grad, sgns_loss, train_embeddings, EmbeddingMatrix, SkipGramConfig, SkipGramTrainer,
    EMBEDDING_KEY,
};
pub use walks::{random_walks, transition_probs, WalkConfig, WalkSet};
