//! Config-driven experiment runs over a directory of content-hashed stage artifacts.
//!
//! Layout under the output directory:
//!
//! ```text
//! corpus/split.tsv users.txt items.txt
//! models/{GD,GP,LD,LP}.bin
//! index/GD.cidx
//! local/triplets.tsv
//! attention/{GAD,GAP,LAD,LAP,AD,AP}.bin
//! eval/topn.tsv coverage.tsv loo.tsv
//! recommend/<model>.tsv
//! manifest.json
//! ```

mod artifacts;
mod config;
mod manifest;
mod run;

pub use artifacts::{read_triplet_sets, write_triplet_sets};
pub use config::{Fusion, ModelTag, Representation, RunConfig, KEYS};
pub use manifest::{CoveragePoint, MetricsRecord, RunManifest, StageKey, StageRecord};
pub use run::{
    attention_file, coverage_table, loo_table, model_file, recommend_file, topn_table, Corpus, LoadedModel, Pipeline,
    MANIFEST_FILE,
};
