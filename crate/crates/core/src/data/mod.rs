//! Dataset plumbing: labels, annotation files, feature files, manifests,
//! frame-rate standardization, augmentation, batching, and the synthetic
//! procedure generator.

mod annotations;
mod batch;
mod features;
mod labels;
mod manifest;
mod resample;
mod synthetic;

pub use annotations::{
    parse_annotations, rasterize, segmentize, segments_for, write_annotations, SegmentAnnotation, ANNOTATION_HEADER,
};
pub use batch::{make_batch, Batch, RealSequence};
pub use features::{
    decode_features, encode_features, load_features, save_features, FeatureFile, FeatureSequence, FEATURE_MAGIC,
    FEATURE_VERSION,
};
pub use labels::LabelClass;
pub use manifest::{Manifest, VideoEntry};
pub use resample::{augment_indices, resample_indices, resample_to_fps, temporal_augment, TARGET_FPS};
pub use synthetic::{
    cohort_of, draw_segments, generate_synthetic, synthetic_cohort, synthetic_video_id, DurationStats, SyntheticSpec,
    TruncatedLogNormal, DEFAULT_DURATIONS,
};
