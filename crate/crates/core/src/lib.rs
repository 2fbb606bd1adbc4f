//! Core of a knowledge-discovery engine for scientific literature: document
//! model, ontology schema, annotations, span-based entity and relation
//! models, a property graph, vector retrieval and question answering.
//!
//! The crate is `no_std` with `alloc`; file formats, networking and the
//! command-line tool live in the `kdisc` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod annotation;
pub mod autoann;
pub mod corpus;
pub mod features;
pub mod graph;
pub mod hash;
pub mod linear;
pub mod ner;
pub mod ontology;
pub mod qa;
pub mod rc;
pub mod retrieval;
