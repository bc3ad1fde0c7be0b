pub mod analytics;
pub mod dag;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod format;
pub mod graph;
pub mod seeding;
pub mod torus;
