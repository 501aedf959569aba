pub mod compare;
pub mod diagnose;
pub mod es;
pub mod fit;
pub mod predict;
pub mod simulate;
pub mod weights;
