use nalgebra::DVector;

/// Euclidean projection onto the ball of radius `radius`; the flag reports
/// whether the point was outside.
pub fn project_ball(beta: &DVector<f64>, radius: f64) -> (DVector<f64>, bool) {
    let norm = beta.norm();
    if norm <= radius {
        (beta.clone(), false)
    } else {
        (beta * (radius / norm), true)
    }
}
