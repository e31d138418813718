pub mod constellation;
pub mod geometry;
pub mod localization;
pub mod observation;
pub mod positioning;
pub mod projective;
