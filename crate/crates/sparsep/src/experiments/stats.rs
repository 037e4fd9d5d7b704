use nalgebra::{DMatrix, DVector};

/// Median of the finite values, averaging the middle pair for even counts.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Ordinary least squares `y = slope * x + intercept`; `None` with fewer
/// than two distinct abscissae.
pub fn line_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Slope and intercept of `log y` against `log x`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.iter().chain(y).any(|v| v.is_nan() || *v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line_fit(&lx, &ly)
}

/// Minimum-norm least squares for `target ~ a * u + b * v` (no intercept).
/// Returns `(a, b, rms residual)`.
pub fn two_term_fit(u: &[f64], v: &[f64], target: &[f64]) -> Option<(f64, f64, f64)> {
    let rows = target.len();
    if rows == 0 {
        return None;
    }
    let a = DMatrix::from_fn(rows, 2, |r, c| if c == 0 { u[r] } else { v[r] });
    let b = DVector::from_column_slice(target);
    let svd = a.clone().svd(true, true);
    let tol = svd.singular_values.max() * 1e-12;
    let coef = svd.solve(&b, tol).ok()?;
    let resid = (a * &coef - b).norm() / (rows as f64).sqrt();
    Some((coef[0], coef[1], resid))
}

/// Binomial standard error of an empirical rate.
pub fn binomial_std_error(rate: f64, trials: usize) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median([3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median([4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median([f64::NAN]), None);
    }

    #[test]
    fn exact_power_law_slope() {
        let x = [8.0, 16.0, 32.0, 64.0];
        let y: Vec<f64> = x.iter().map(|m: &f64| 3.0 * m.powf(-0.5)).collect();
        let (slope, icpt) = log_log_fit(&x, &y).unwrap();
        assert!((slope + 0.5).abs() < 1e-12);
        assert!((icpt - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_term_fit_handles_zero_column() {
        let u = [0.1, 0.2, 0.4];
        let t = [0.3, 0.6, 1.2];
        let (a, b, r) = two_term_fit(&u, &[0.0; 3], &t).unwrap();
        assert!((a - 3.0).abs() < 1e-12 && b.abs() < 1e-12 && r < 1e-12);
    }
}
