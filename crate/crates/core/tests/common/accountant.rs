//! Exhaustive order search for the Gaussian mechanism's RDP conversion.

/// Exhaustive search over integer orders, written out independently.
pub fn grid_oracle(sigma: f64, steps: f64, delta: f64) -> (f64, u32) {
    let mut best = (f64::INFINITY, 0);
    for a in 2..=512u32 {
        let af = a as f64;
        let v = steps * af / (2.0 * sigma * sigma) + (1.0 / delta).ln() / (af - 1.0);
        if v < best.0 {
            best = (v, a);
        }
    }
    best
}
