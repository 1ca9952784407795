pub mod seed;
pub mod imaging;
pub mod prs;
pub mod split;
pub mod probe;
pub mod text;
pub mod rater;
