pub mod bucketing;
pub mod distance;
pub mod hashing;
pub mod tree;
pub mod corpus;
pub mod mining;
pub mod encoder;
pub mod mli;
pub mod retrieval;
pub mod fixture;
pub mod pipeline;
