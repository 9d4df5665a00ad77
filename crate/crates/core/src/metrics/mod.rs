//! Evaluation metrics, reports, ablation tables and 2-D embedding export.

mod embed;
mod scores;
mod table;

pub use embed::{export_embeddings_2d, pca_2d, separation_ratio, write_embeddings_csv, EmbeddingPoint};
pub use scores::{argmax, binary_accuracy, f1_score, mae_metric, pearson_r, sign_class, MetricsReport};
pub use table::{ablation_table, best_marks, TableRow};
