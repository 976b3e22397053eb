use super::dist::DiscreteTimeDistribution;
use super::DelayMoments;
use crate::{Error, Result};

/// Mean `P'(1)` and standard deviation `sqrt(P''(1) + P'(1) - P'(1)^2)`.
pub fn moments_from_pgf(dist: &DiscreteTimeDistribution) -> Result<DelayMoments> {
    let (d1, d2) = dist.factorial_moments();
    let var = d2 + d1 - d1 * d1;
    if var < -1e-12 * d1.powi(2).max(1.0) {
        return Err(Error::Numeric(format!("negative variance {var} (ticks^2)")));
    }
    let tick = dist.grid().tick;
    Ok(DelayMoments { mean: d1 * tick, stddev: var.max(0.0).sqrt() * tick })
}

/// Probability mass at time `t` (seconds), which must lie on the grid.
pub fn pmf_from_pgf(dist: &DiscreteTimeDistribution, t: f64) -> Result<f64> {
    let tick = dist.grid().tick;
    let k = t / tick;
    if !(k.is_finite() && k >= -1e-9) || (k - k.round()).abs() > 1e-6 {
        return Err(Error::domain(format!("time {t} s is not on the {tick} s grid")));
    }
    Ok(dist.mass_at_tick(k.round() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::dist::{AtomSet, TimeGrid};

    fn two_point() -> DiscreteTimeDistribution {
        DiscreteTimeDistribution::from_atoms(TimeGrid::default(), &AtomSet::new([(1000, 0.5), (3000, 0.5)]))
    }

    #[test]
    fn point_mass() {
        let d = DiscreteTimeDistribution::point(TimeGrid::default(), 5000);
        let m = moments_from_pgf(&d).unwrap();
        assert!((m.mean - 5e-3).abs() < 1e-15);
        assert_eq!(m.stddev, 0.0);
        assert_eq!(pmf_from_pgf(&d, 5e-3).unwrap(), 1.0);
        assert_eq!(pmf_from_pgf(&d, 4e-3).unwrap(), 0.0);
    }

    #[test]
    fn two_point_distribution() {
        let m = moments_from_pgf(&two_point()).unwrap();
        assert!((m.mean - 2e-3).abs() < 1e-15);
        assert!((m.stddev - 1e-3).abs() < 1e-15);
        assert_eq!(pmf_from_pgf(&two_point(), 1e-3).unwrap(), 0.5);
    }

    #[test]
    fn off_grid_time_is_rejected() {
        assert!(pmf_from_pgf(&two_point(), 1.0005e-3 + 0.3e-6).is_err());
    }
}
