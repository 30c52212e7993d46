//! Group evolution prediction.
//!
//! The pipeline turns a timestamped interaction stream into labelled
//! community evolution chains and trains classifiers that predict the next
//! event in a community's lifetime:
//!
//! ```text
//! ingest -> windowing -> snapshot -> community -> tracking -> chains -> features -> learn -> evaluate
//! ```
//!
//! Numeric code (centrality measures, features, classifiers, metrics and the
//! evolutionary feature selection) is generic over a [`Scalar`]. The aliases
//! at the bottom of this file fix the scalar to `f64`, which is what the
//! pipeline and the CLI use.

pub mod chains;
pub mod community;
pub mod evaluate;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod pipeline;
mod rng;
pub mod select;
pub mod snapshot;
pub mod synth;
pub mod tracking;
pub mod windowing;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the numeric modules are written against.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`; used for constants and counts.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every Scalar")
    }

    fn of_usize(value: usize) -> Self {
        Self::of(value as f64)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub use chains::{DedupMode, EvolutionChain, StateContext};
pub use community::{Community, CommunityCover, CommunityId, Detector};
pub use ingest::{InteractionRecord, NodeId, TemporalEventStream};
pub use learn::{ClassifierKind, Hyperparameters};
pub use snapshot::{GraphBuildSpec, SnapshotGraph, WeightRule};
pub use tracking::{EventType, EvolutionEvent, ImportanceMeasure, TrackingConfig};
pub use windowing::{Division, TimeWindow, WindowSpec, WindowType};

pub type NodeMeasureTable = snapshot::NodeMeasureTable<f64>;
pub type NetworkMeasureRecord = snapshot::NetworkMeasureRecord<f64>;
pub type MeasuredSnapshot = snapshot::MeasuredSnapshot<f64>;
pub type Dataset = learn::Dataset<f64>;
pub type Dataset32 = learn::Dataset<f32>;
pub type TrainedModel = learn::TrainedModel<f64>;
pub type Prediction = learn::Prediction<f64>;
pub type CvReport = learn::CvReport<f64>;
pub type EvaluationReport = evaluate::EvaluationReport<f64>;
pub type FriedmanResult = evaluate::FriedmanResult<f64>;
pub type FeatureRanking = select::FeatureRanking;
pub type GaConfig = select::GaConfig<f64>;
