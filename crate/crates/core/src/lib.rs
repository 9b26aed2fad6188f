//! Weakly supervised acquisition of paraphrastic extraction patterns.
//!
//! Starting from one seed pattern (a predicate head and its expansion), the
//! pipeline scans a corpus for word pairs that are close to the seed in a
//! weighted semantic network, keeps the predicative ones, lets an analyst
//! validate them, compiles syntactic-variation meta-graphs over the accepted
//! pairs into a token automaton and finally extracts and scores slot fillers.
//!
//! Modules, in pipeline order:
//!
//! * [`semnet`]: semantic network, ancestor cones and the proximity measure
//! * [`corpus`]: lexicon, tokenizer, entity normalization, chunker
//! * [`acquisition`]: candidate pattern discovery from a seed
//! * [`table`]: the pattern (constraint) table and its TSV form
//! * [`metagraph`]: meta-graph templates, instantiation and compilation
//! * [`extraction`]: slot filling with a compiled graph
//! * [`evaluation`]: precision / recall / F and miss classification

pub mod acquisition;
pub mod corpus;
pub mod evaluation;
pub mod extraction;
pub mod metagraph;
pub mod semnet;
pub mod table;

pub use acquisition::{Acquirer, SeedPattern};
pub use corpus::{Analyzer, Chunk, ChunkKind, Gazetteer, Lexicon, Pos, Sentence, Token};
pub use evaluation::{evaluate, EvaluationReport, GoldAnnotation, MissCause, SlotScore};
pub use extraction::{dedupe_per_document, extract, ExtractionRecord};
pub use metagraph::{compile, parse_metagraphs, CompiledGraph, MetaGraph};
pub use semnet::{Proximity, SemanticNet};
pub use table::{PatternRow, PatternTable, RowStatus, Schema};
