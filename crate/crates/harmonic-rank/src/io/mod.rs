pub mod dumps;
pub mod movielens;

pub use movielens::{load_movielens, parse_movielens, Format, Loaded};
