//! Interface layer: configuration, translation runtime wiring, the HTTP
//! service and the append-only history store. The `sqlbridge` binary is a
//! thin command-line front end over these modules.

pub mod config;
pub mod history;
pub mod runtime;
pub mod service;
