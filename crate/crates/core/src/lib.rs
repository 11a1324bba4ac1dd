pub mod calib;
pub mod commands;
pub mod field;
pub mod guidance;
pub mod robot;
pub mod service;
pub mod sim;
pub mod transform;
pub mod volume;
