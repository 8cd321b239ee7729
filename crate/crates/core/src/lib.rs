pub mod api;
pub mod clock;
pub mod harness;
pub mod model;
pub mod scenarios;
pub mod txkv;
pub mod worker;
