//! Graphs, ingestion, the symmetric normalized adjacency and homophily.

mod adjacency;
mod graph;
mod homophily;
mod io;
mod sbm;

pub use adjacency::{normalized_adjacency, NormalizedAdjacency};
pub use graph::{BuildStats, Graph};
pub use homophily::{
    global_homophily, local_homophily, HomophilyReport, COUNT_OVERFLOW_BIN, RATIO_BINS,
};
pub use io::{
    load_graph, write_edge_list, write_features_csv, write_labels, LoadOptions, LoadedGraph,
};
pub use sbm::{sbm_generate, SbmParams};
