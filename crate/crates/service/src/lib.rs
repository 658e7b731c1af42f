//! HTTP/WebSocket service and command-line front end.

pub mod app;
pub mod cli;
pub mod config;
pub mod view;
