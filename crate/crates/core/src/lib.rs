pub mod dataset;
pub mod gpc;
pub mod infogain;
pub mod kmeans;
pub mod mlp;
pub mod optim;
pub mod pipeline;
