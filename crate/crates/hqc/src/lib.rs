//! Host-side companion to `hqc-core`: JSON program documents, topology and
//! noise files, the job-queue QPU server, a remote accelerator that talks to
//! it, and the `hqc` command-line tool.

pub mod cli;
pub mod config;
pub mod error;
pub mod remote;
pub mod serial;
pub mod server;

pub use error::{Error, Result};
pub use remote::{RemoteAccelerator, RemoteOptions};
pub use server::{Backend, Server, ServerConfig, ServerHandle};
