pub mod error;
pub mod poly;
pub mod psvf;
pub mod integrate;
pub mod traj_space;
pub mod entropy;
pub mod systems;
pub mod io;
pub mod cli;
