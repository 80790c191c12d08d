//! File formats and configuration: unit-suffixed TOML run configurations,
//! binary tensor files, schedule and parameter files, and plot exports.

mod config;
mod export;
mod files;
mod tensor;
mod units;

pub use config::{
    zero_material, BankEditSection, BankTable, EditSection, InputsSection, LearnSection, MaterialSpec, MaterialTable,
    PlotsSection, ReconstructSection, RunConfig, SceneSection, SensorSection,
};
pub use export::{
    write_history_csv, write_json, write_map_png, write_mueller_png, write_temporal_csv, EntryStats, MapStyle,
    RenderSummary,
};
pub use files::{read_params, read_schedule, write_params, write_schedule, ParamsBundle};
pub use tensor::{
    read_cube, read_map, read_stack, read_tensor, write_cube, write_map, write_stack, write_tensor, TensorFile,
    TensorHeader, TensorKind, MAGIC,
};
pub use units::{format_angle, format_time, parse_angle, parse_time};
