pub mod fingerprint;
pub mod registry;
pub mod pom;
pub mod clone;
pub mod pov;
pub mod pipeline;
