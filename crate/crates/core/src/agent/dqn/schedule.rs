/// Linear exploration schedule: `start` at bandit step 0 falling to `end` at
/// `horizon` and held there afterwards.
pub fn epsilon_at(step: usize, horizon: f64, start: f64, end: f64) -> f64 {
    let frac = if horizon > 0.0 {
        (step as f64 / horizon).min(1.0)
    } else {
        1.0
    };
    (start + (end - start) * frac).clamp(end.min(start), start.max(end))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(epsilon_at(0, 50.0, 0.9, 0.1), 0.9);
        assert_eq!(epsilon_at(50, 50.0, 0.9, 0.1), 0.1);
        assert_eq!(epsilon_at(500, 50.0, 0.9, 0.1), 0.1);
        assert!((epsilon_at(25, 50.0, 0.9, 0.1) - 0.5).abs() < 1e-12);
        assert_eq!(epsilon_at(3, 0.0, 0.9, 0.1), 0.1);
    }
}
