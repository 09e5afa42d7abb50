pub mod audit;
pub mod bounds;
pub mod reproduce;
pub mod simulate;
pub mod weights;
