pub mod analytic;
pub mod converge;
pub mod price;
pub mod tail;
