use nalgebra::{DMatrix, DVector};

use super::FeatureSet;
use crate::error::{Error, Result};

/// Ridge added to both covariances.
pub const FGD_RIDGE: f64 = 1e-6;

fn moments(set: &FeatureSet) -> (DVector<f64>, DMatrix<f64>) {
    let f = set.dim();
    let m = set.len();
    let mut mean = DVector::zeros(f);
    for v in set.vectors() {
        mean += DVector::from_column_slice(v);
    }
    mean /= m as f64;
    let mut cov = DMatrix::zeros(f, f);
    for v in set.vectors() {
        let d = DVector::from_column_slice(v) - &mean;
        cov += &d * d.transpose();
    }
    cov /= (m - 1) as f64;
    for i in 0..f {
        cov[(i, i)] += FGD_RIDGE;
    }
    (mean, cov)
}

/// Eigen-decomposition square root of a symmetric positive semi-definite
/// matrix.
fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -1e-8 {
            return Err(Error::Numerical(format!("matrix has negative eigenvalue {v}")));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// `|mu_r - mu_g|^2 + Tr(S_r + S_g - 2 (S_r S_g)^(1/2))` between Gaussian
/// fits, with `(S_r S_g)^(1/2)` taken as `(S_r^(1/2) S_g S_r^(1/2))^(1/2)`.
pub fn fgd(real: &FeatureSet, gen: &FeatureSet) -> Result<f64> {
    if real.len() < 2 || gen.len() < 2 {
        return Err(Error::InvalidArgument("FGD needs at least two samples per set".into()));
    }
    if real.dim() != gen.dim() {
        return Err(Error::shape("feature width", real.dim(), gen.dim()));
    }
    let (mr, cr) = moments(real);
    let (mg, cg) = moments(gen);
    let sr = sqrt_psd(&cr)?;
    let cross = sqrt_psd(&(&sr * &cg * &sr))?;
    let mean_term = (&mr - &mg).norm_squared();
    let value = mean_term + cr.trace() + cg.trace() - 2.0 * cross.trace();
    Ok(value.max(0.0))
}
