use crate::error::{Error, Result};

/// Largest `|∫σ|` accepted as mean zero.
pub const MEAN_TOLERANCE: f64 = 1e-8;

/// Wasserstein inner product `g_ρ(σ, σ) = ∫ Φ′² ρ` where `−(ρΦ′)′ = σ`,
/// on a uniform grid `x`. In one dimension `ρΦ′ = −∫_{-∞}^x σ`, so the
/// value is `∫ (∫_{-∞}^x σ)² / ρ dx`; both integrals use the trapezoid
/// rule.
pub fn elliptic_metric_1d_grid(x: &[f64], rho: &[f64], sigma: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 2 || rho.len() != n || sigma.len() != n {
        return Err(Error::config(
            "grid, density and tangent must have equal length >= 2",
        ));
    }
    let dx = x[1] - x[0];
    if !(dx > 0.0) {
        return Err(Error::input("grid must be increasing"));
    }
    if x.windows(2)
        .any(|w| ((w[1] - w[0]) - dx).abs() > 1e-9 * dx.max(1.0))
    {
        return Err(Error::input("grid must be uniform"));
    }
    if let Some(i) = rho.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::input(format!(
            "density is not positive at grid point {i}"
        )));
    }
    let mut cumulative = vec![0.0; n];
    for i in 1..n {
        cumulative[i] = cumulative[i - 1] + 0.5 * dx * (sigma[i - 1] + sigma[i]);
    }
    if cumulative[n - 1].abs() > MEAN_TOLERANCE {
        return Err(Error::input(format!(
            "tangent integrates to {:e}, expected 0",
            cumulative[n - 1]
        )));
    }
    let f: Vec<f64> = cumulative.iter().zip(rho).map(|(c, r)| c * c / r).collect();
    Ok(f.windows(2).map(|w| 0.5 * dx * (w[0] + w[1])).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tangent_and_bad_density() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        assert_eq!(
            elliptic_metric_1d_grid(&x, &[1.0; 11], &[0.0; 11]).unwrap(),
            0.0
        );
        let mut rho = vec![1.0; 11];
        rho[3] = 0.0;
        assert!(elliptic_metric_1d_grid(&x, &rho, &[0.0; 11]).is_err());
        assert!(elliptic_metric_1d_grid(&x, &[1.0; 11], &[1.0; 11]).is_err());
    }
}
