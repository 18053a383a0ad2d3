//! Optimizer schedule, staged training of the per-station networks and
//! inference.

mod checkpoint;
mod config;
mod dataset;
mod pipeline;
mod predict;
mod schedule;
mod stage;

pub use checkpoint::{
    checkpoint_path, load_station_nets, read_checkpoint, save_station_nets, write_checkpoint, CheckpointHeader,
    NetKind, NetShape, FORMAT_VERSION, MAGIC,
};
pub use config::{parse_key_values, read_key_values, TrainConfig};
pub use dataset::Dataset;
pub use pipeline::{
    train_history_baseline, train_pipeline, HistoryModels, PipelinePlan, PipelineReport, StageDepth, StageReport,
    StationModel, StationNets,
};
pub use predict::{directions, predict, PredictionSet};
pub use schedule::{EarlyStopping, PlateauSchedule};
pub use stage::{dataset_loss, train_stage, train_step, StageRecord};
