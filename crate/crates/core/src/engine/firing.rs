//! Firing events of a four-stroke engine.

/// Conventional inline-six order, 1-based cylinder numbers.
pub const DEFAULT_FIRING_ORDER: [usize; 6] = [1, 5, 3, 6, 2, 4];

/// Engine-cycle period (720 CAD) at speed `n` RPM, s.
pub fn cycle_period(n: f64) -> f64 {
    120.0 / n
}

/// Firing events `(time, zero-based cylinder index)` over complete engine
/// cycles in `[0, duration]` at constant speed.
pub fn firing_schedule(
    n: f64,
    n_cyl: usize,
    firing_order: &[usize],
    duration: f64,
) -> Vec<(f64, usize)> {
    debug_assert_eq!(firing_order.len(), n_cyl);
    let period = cycle_period(n);
    let cycles = (duration / period + 1e-9).floor() as usize;
    let mut events = Vec::with_capacity(cycles * n_cyl);
    for k in 0..cycles {
        for (slot, cyl) in firing_order.iter().enumerate() {
            events.push((
                k as f64 * period + slot as f64 * period / n_cyl as f64,
                cyl - 1,
            ));
        }
    }
    events
}
