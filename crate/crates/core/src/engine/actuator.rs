//! EGR valve response.

/// A step is 98.2 % complete after 0.7 s.
pub const DEFAULT_EGR_TIME_CONSTANT: f64 = 0.175;

pub fn default_egr_time_constant() -> f64 {
    DEFAULT_EGR_TIME_CONSTANT
}

/// First-order lag toward `target`, integrated exactly over `dt`.
pub fn egr_actuator_step(current: f64, target: f64, dt: f64, time_constant: f64) -> f64 {
    target + (current - target) * (-dt / time_constant).exp()
}
