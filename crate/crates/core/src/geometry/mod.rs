//! Truncation domains, boundary samples and distance functions.

mod distance;
mod domain;
mod io;
mod sampling;

pub use distance::{
    approx_distance, approx_distance_rows, epsilon_lower_bound, exact_distance_l2ball,
    exact_distance_l2ball_rows, unit_ball_volume,
};
pub use domain::{BoundarySample, Domain, LpBall, LpNorm, Polygon2D};
pub use io::{
    load_boundary_csv, load_polygon_csv, parse_polygon_csv, read_points, save_boundary_csv,
    write_points,
};
pub use sampling::{
    sample_boundary_lp, sample_boundary_polygon, truncated_rejection_sample, DirectionalBias,
    GaussianSampler, RejectionSample,
};
