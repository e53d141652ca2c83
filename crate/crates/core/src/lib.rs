//! Dataset algebra and evaluation toolkit for multimodal GUI-agent corpora.
//!
//! - [`modal`]: the video → multi-image → static hierarchy and its constraints
//! - [`granularity`]: `*`/`+` combination expressions and dataset materialization
//! - [`info`]: weighted covariances and overlap-corrected Gaussian mutual information
//! - [`metrics`]: BLEU-4, ROUGE-1/2/L and throughput accounting
//! - [`ablation`]: performance-decline grids, retention and the one-sample t-test
//! - [`calibration`]: normalized-to-pixel click mapping and correction
//! - [`harness`]: the screenshot → instruction → action closed loop over scripted screens
//! - [`ingest`]: annotation timelines, key-frame extraction and trainer logs

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ablation;
pub mod calibration;
pub mod error;
pub mod granularity;
pub mod harness;
pub mod info;
pub mod ingest;
pub mod metrics;
pub mod modal;
pub mod synth;

pub use error::{Error, Result};
