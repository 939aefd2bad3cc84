//! Log-norm regressions used as decay verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this value are clamped before taking logarithms.
pub const NORM_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbscissaKind {
    /// `h^{-1/s}`
    HPow,
    /// `w^{-1/(s-1)}`
    WPow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_samples: usize,
    pub abscissa_kind: AbscissaKind,
    /// How many inputs sat at [`NORM_FLOOR`].
    pub clamped: usize,
}

impl DecayFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares of `log_norms` against `xs`.
pub fn fit_decay(xs: &[f64], log_norms: &[f64], kind: AbscissaKind) -> Result<DecayFit> {
    if xs.len() != log_norms.len() {
        return Err(Error::InvalidInput("xs and log_norms differ in length".into()));
    }
    if xs.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 samples, got {}", xs.len())));
    }
    if xs.iter().chain(log_norms).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("decay fit input".into()));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("abscissae must be strictly increasing (no duplicates)".into()));
    }
    let (slope, intercept, r_squared) = line_fit(xs, log_norms);
    Ok(DecayFit {
        slope,
        intercept,
        r_squared,
        n_samples: xs.len(),
        abscissa_kind: kind,
        clamped: 0,
    })
}

/// [`fit_decay`] on raw norms, clamping at [`NORM_FLOOR`] and recording how
/// many were clamped.
pub fn fit_decay_norms(xs: &[f64], norms: &[f64], kind: AbscissaKind) -> Result<DecayFit> {
    let (logs, clamped) = clamped_logs(norms)?;
    let mut fit = fit_decay(xs, &logs, kind)?;
    fit.clamped = clamped;
    Ok(fit)
}

pub fn clamped_logs(norms: &[f64]) -> Result<(Vec<f64>, usize)> {
    let mut clamped = 0;
    let logs = norms
        .iter()
        .map(|&n| {
            if n.is_nan() || n < 0.0 {
                return Err(Error::InvalidInput(format!("norm {n} is not a non-negative number")));
            }
            if n < NORM_FLOOR {
                clamped += 1;
                Ok(NORM_FLOOR.ln())
            } else {
                Ok(n.ln())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((logs, clamped))
}

/// Centered least-squares line; returns (slope, intercept, r²).
pub(crate) fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy <= f64::EPSILON * f64::EPSILON * n * (1.0 + my * my) {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    (slope, intercept, r2)
}

/// Least squares `y ≈ A c` for a small dense design matrix (rows = samples),
/// via normal equations with partial pivoting.
pub(crate) fn least_squares(rows: &[Vec<f64>], ys: &[f64]) -> Result<Vec<f64>> {
    let p = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.len() < p || p == 0 {
        return Err(Error::InvalidInput("underdetermined least squares".into()));
    }
    // Column scaling keeps the normal equations well conditioned.
    let scale: Vec<f64> = (0..p)
        .map(|j| rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (r, &y) in rows.iter().zip(ys) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += r[i] / scale[i] * r[j] / scale[j];
            }
            a[i][p] += r[i] / scale[i] * y;
        }
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[piv][col].abs() < 1e-13 {
            return Err(Error::InvalidInput("singular least-squares design".into()));
        }
        a.swap(col, piv);
        for i in 0..p {
            if i != col {
                let f = a[i][col] / a[col][col];
                for j in col..=p {
                    a[i][j] -= f * a[col][j];
                }
            }
        }
    }
    Ok((0..p).map(|i| a[i][p] / a[i][i] / scale[i]).collect())
}

/// CSV table with columns `abscissa,log_norm,fitted`.
pub fn decay_table_csv(xs: &[f64], log_norms: &[f64], fit: &DecayFit) -> String {
    let mut out = String::from("abscissa,log_norm,fitted\n");
    for (x, y) in xs.iter().zip(log_norms) {
        out.push_str(&format!("{x:.17e},{y:.17e},{:.17e}\n", fit.predict(*x)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| -2.0 * x).collect();
        let f = fit_decay(&xs, &ys, AbscissaKind::HPow).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_means_no_decay() {
        let f = fit_decay(&[1.0, 2.0, 4.0], &[-3.0; 3], AbscissaKind::WPow).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(fit_decay(&[1.0, 2.0], &[0.0, 0.0], AbscissaKind::HPow).is_err());
        assert!(fit_decay(&[1.0, 2.0, 2.0], &[0.0, 1.0, 2.0], AbscissaKind::HPow).is_err());
    }

    #[test]
    fn clamps_underflow() {
        let f = fit_decay_norms(&[1.0, 2.0, 3.0], &[1e-10, 0.0, 1e-320], AbscissaKind::HPow).unwrap();
        assert_eq!(f.clamped, 2);
    }

    #[test]
    fn quadratic_least_squares() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64, (i * i) as f64]).collect();
        let ys: Vec<f64> = (0..6).map(|i| 1.5 - 0.5 * i as f64 + 0.25 * (i * i) as f64).collect();
        let c = least_squares(&rows, &ys).unwrap();
        assert!((c[0] - 1.5).abs() < 1e-10 && (c[1] + 0.5).abs() < 1e-10 && (c[2] - 0.25).abs() < 1e-10);
    }
}
