pub mod pfm;
pub mod manifest;
