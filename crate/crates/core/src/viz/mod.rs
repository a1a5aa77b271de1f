//! Post-hoc embedding analysis: hierarchical clustering, nearest-neighbor
//! assignment of held-out snapshots, feature binning and heatmaps.

mod binning;
mod dendrogram;
mod heatmap;
mod knn;

pub use binning::{bin_features, quantile, BinnedTable, Binning, FeatureBins};
pub use dendrogram::{agglomerative_cluster, Dendrogram, Merge};
pub use heatmap::{heatmap, rank_features, FeatureScore, HeatmapColumn, HeatmapRow, HeatmapTable};
pub use knn::knn_assign;
