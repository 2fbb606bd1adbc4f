//! Knowledge discovery over scientific literature: file formats, document
//! ingestion, the command-line tool and the HTTP service built on
//! [`kdisc_core`].

pub mod archive;
pub mod backend;
pub mod cli;
pub mod formats;
pub mod gazetteer;
pub mod ingest;
pub mod pipeline;
pub mod service;
pub mod transcript;
