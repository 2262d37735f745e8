//! Synthetic "does the arrow point at the circle" images.

mod dataset;
mod raster;
mod scene;

pub use dataset::{
    generate_dataset, image_rng, label_for, load_dataset, scene_for, ArrowDataset, DatasetSpec, Manifest,
    GENERATOR_VERSION,
};
pub use raster::{rasterize, Canvas, BLACK, WHITE};
pub use scene::{
    ray_hits_disk, ray_march_hits, sample_scene, sample_with, segment_distance, ArrowScene, Point, ARROW_LENGTH, CIRCLE_RADIUS,
    CLEARANCE, MARGIN, MAX_ATTEMPTS, MIN_RESOLUTION, WING_ANGLE_DEG, WING_FRACTION,
};
