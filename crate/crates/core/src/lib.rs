pub mod numerics;
pub mod parallel;
pub mod corpus;
pub mod ontology;
pub mod network;
pub mod trainer;
pub mod hpo;
pub mod harness;
