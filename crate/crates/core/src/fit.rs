//! Least-squares line fit with coefficient of determination.

/// Result of a one-variable least-squares fit y ~ slope * x + intercept.
#[derive(Debug, Clone, Copy)]
pub struct LinFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares on the given samples. With fewer than two points or
/// degenerate x the slope is 0 and the fit is the mean. r2 is defined as 1
/// when the data has no variance around the fit target.
pub fn linfit(xs: &[f64], ys: &[f64]) -> LinFit {
    assert_eq!(xs.len(), ys.len(), "linfit: mismatched lengths");
    let n = xs.len();
    if n == 0 {
        return LinFit { slope: 0.0, intercept: 0.0, r2: 1.0 };
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    LinFit { slope, intercept, r2 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = linfit(&xs, &ys);
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn noisy_line_r2_below_one() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.2, 1.8, 3.1];
        let f = linfit(&xs, &ys);
        assert!(f.r2 < 1.0 && f.r2 > 0.9);
    }
}
