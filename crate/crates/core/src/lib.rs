pub mod client;
pub mod curation;
pub mod curriculum;
pub mod env;
pub mod exec;
pub mod literal;
pub mod model;
pub mod pipeline;
pub mod presets;
pub mod rl;
