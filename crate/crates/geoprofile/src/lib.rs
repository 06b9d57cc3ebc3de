//! Geographic profiling of image-caption datasets.
//!
//! The crate answers one question about a captioned image collection: *where
//! is it from?* It does so in three stages, each usable on its own:
//!
//! 1. [`gazetteer`] — load a GeoNames-style place index, resolve free-text
//!    mentions to ranked candidate places, and canonicalize country names.
//! 2. [`geolocate`] — turn a caption into a country prediction, either by
//!    pure string matching against the gazetteer or through a text-completion
//!    provider (extract a mention, retrieve candidates, predict a country).
//! 3. [`profile`] — aggregate per-caption predictions into per-entity
//!    country distributions, regional rollups, and indicator correlations.
//!
//! Two supporting modules round the toolkit out: [`entity_filter`] trains a
//! linear classifier on image embeddings so captions whose image does not
//! actually show the entity can be dropped, and [`metrics`] holds the
//! distribution-free measures (Vendi diversity, Spearman correlation,
//! misalignment flags, manifold precision/recall) used to compare datasets.
//! [`eval`] closes the loop with a synthesized gold testset and a scoring
//! harness for comparing resolution methods.
//!
//! Everything is deterministic: all randomness flows through caller-supplied
//! seeds, and repeated runs over the same inputs produce identical outputs.

pub mod assets;
pub mod entity_filter;
pub mod eval;
pub mod gazetteer;
pub mod geolocate;
pub mod metrics;
pub mod profile;
