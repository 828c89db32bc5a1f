//! Self-assessment learning for temporal action detection.
//!
//! The crate trains a small bidirectional recurrent detector that, at every
//! frame, regresses an action segment, scores its own regression with a
//! learned confidence, and classifies the action. Training targets for the
//! confidence head come from a greedy, confidence-ordered matching between
//! regressed segments and ground-truth instances; frames whose instance is
//! already matched by a more confident frame are pruned from the regression
//! loss. Inference turns per-frame outputs into ranked proposals via
//! confidence fusion, Gaussian soft-NMS and a top-k cap; evaluation reports
//! mean average precision over tIoU thresholds.
//!
//! Modules roughly follow the pipeline order: [`interval`] (segment
//! arithmetic), [`assignment`] (training targets), [`graph`]/[`model`]/
//! [`optim`] (autodiff, network, Adam), [`loss`], [`inference`],
//! [`evaluation`], [`datagen`]/[`data`]/[`checkpoint`] (synthetic data and
//! file formats), [`trainer`]/[`ablation`] (training loop and comparison
//! suites), and [`benchmark`] (the pinned synthetic benchmark).


pub mod ablation;
pub mod assignment;
pub mod benchmark;
pub mod checkpoint;
pub mod data;
pub mod datagen;
pub mod trainer;
pub mod evaluation;
pub mod inference;




pub mod error;

pub mod graph;

pub mod interval;
pub mod loss;
pub mod model;
pub mod optim;


pub use error::{Error, Result};
pub use interval::{segment_from_offsets, tiou, tiou_raw, Interval, OffsetPair};
