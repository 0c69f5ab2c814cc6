pub mod assets;
pub mod bayesnet;
pub mod bssr;
pub mod diagnosis;
pub mod executor;
pub mod model;
pub mod protocol;
pub mod recovery;
pub mod simenv;
pub mod sweep;
pub mod task;
