//! Exact arithmetic: rationals, dense polynomials in one and two variables,
//! rational functions, truncated eps-series and modular helpers.

pub mod bipoly;
pub mod modular;
pub mod poly;
pub mod ratfunc;
pub mod rational;
pub mod series;

pub use bipoly::BiPoly;
pub use poly::{poly_content, start_index_delta, Poly, Var};
pub use ratfunc::RatFunc;
pub use rational::{frac, int, Integer, Rational};
pub use series::EpsSeries;
