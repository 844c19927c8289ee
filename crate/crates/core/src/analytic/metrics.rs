use crate::{Error, Result};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check(u: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: v.len(),
            got: u.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm("metric input"));
    }
    Ok((nu, nv))
}

/// Relative difference measure `|| u/|u| - v/|v| ||`, in `[0, 2]`.
pub fn rdm(u: &[f64], v: &[f64]) -> Result<f64> {
    let (nu, nv) = check(u, v)?;
    Ok(u.iter().zip(v).map(|(a, b)| (a / nu - b / nv).powi(2)).sum::<f64>().sqrt())
}

/// Magnitude ratio `|u| / |v|`.
pub fn mag(u: &[f64], v: &[f64]) -> Result<f64> {
    let (nu, nv) = check(u, v)?;
    Ok(nu / nv)
}

/// Largest entrywise difference relative to the largest entry of `v`.
pub fn max_relative_difference(u: &[f64], v: &[f64]) -> Result<f64> {
    check(u, v)?;
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(u.iter().zip(v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale)
}
