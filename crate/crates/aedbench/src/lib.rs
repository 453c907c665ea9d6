pub mod commands;
pub mod config;
pub mod error;
pub mod events;
pub mod labels;
pub mod output;
pub mod pipeline;
pub mod plugin;
pub mod report;
