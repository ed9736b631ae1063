/// Least-squares line y = a + b·x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub a: f64,
    pub b: f64,
}

impl LineFit {
    pub fn at(&self, x: f64) -> f64 {
        self.a + self.b * x
    }

    /// Largest |fit - y| / y over the points.
    pub fn max_relative_residual(&self, xs: &[f64], ys: &[f64]) -> f64 {
        xs.iter().zip(ys).map(|(x, y)| ((self.at(*x) - y) / y).abs()).fold(0.0, f64::max)
    }
}

/// None with fewer than two distinct x values.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len().min(ys.len()) as f64;
    if n < 2.0 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    Some(LineFit { a: my - b * mx, b })
}

/// Exponent e of y ≈ c·x^e from a log-log fit.
pub fn power_exponent(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly).map(|f| f.b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = fit_line(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((f.a - 1.0).abs() < 1e-12 && (f.b - 2.0).abs() < 1e-12);
        assert!(f.max_relative_residual(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]) < 1e-12);
    }

    #[test]
    fn square_law() {
        let xs: Vec<f64> = (1..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        assert!((power_exponent(&xs, &ys).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate() {
        assert!(fit_line(&[1.0], &[1.0]).is_none());
        assert!(fit_line(&[2.0, 2.0], &[1.0, 3.0]).is_none());
    }
}
