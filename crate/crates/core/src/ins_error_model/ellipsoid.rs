use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::sensor_model::{Mat3, Vec3};

/// One-sigma error ellipsoid of a 3×3 position covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub centroid: Vec3,
    /// Principal semi-axes, descending.
    pub semi_axes: Vec3,
    /// Columns are the principal directions matching `semi_axes`.
    pub orientation: Mat3,
}

impl Ellipsoid {
    /// orientation · diag(axes²) · orientationᵀ.
    pub fn covariance(&self) -> Mat3 {
        let d = Mat3::from_diagonal(&self.semi_axes.component_mul(&self.semi_axes));
        self.orientation * d * self.orientation.transpose()
    }
}

/// Principal axes from the eigendecomposition of `p_block`.
///
/// Each of the first two directions is signed so its largest-magnitude
/// component is positive; the third is their cross product, so the frame is
/// right-handed. Repeated eigenvalues yield an arbitrary orthonormal basis of
/// the shared eigenspace.
pub fn ellipsoid_from_cov(p_block: &Mat3, centroid: Vec3) -> Result<Ellipsoid> {
    if p_block.iter().any(|v| !v.is_finite()) || centroid.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("ellipsoid inputs must be finite"));
    }
    let scale = p_block.norm();
    if (p_block - p_block.transpose()).norm() > 1e-10 * scale {
        return Err(Error::invalid("position covariance is not symmetric"));
    }
    let eig = SymmetricEigen::new((p_block + p_block.transpose()) * 0.5);
    let floor = -1e-10 * p_block.trace().abs();
    if eig.eigenvalues.iter().any(|&l| l < floor) {
        return Err(Error::invalid(format!(
            "position covariance is indefinite (eigenvalues {:?})",
            eig.eigenvalues.as_slice()
        )));
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let signed = |c: usize| -> Vec3 {
        let v: Vec3 = eig.eigenvectors.column(c).into();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            -v
        } else {
            v
        }
    };
    let a = signed(order[0]);
    let b = signed(order[1]);
    let c = a.cross(&b);
    let orientation = Mat3::from_columns(&[a, b, c]);
    let semi_axes = Vec3::from_fn(|i, _| eig.eigenvalues[order[i]].max(0.0).sqrt());
    Ok(Ellipsoid {
        centroid,
        semi_axes,
        orientation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_covariance() {
        let e = ellipsoid_from_cov(&Mat3::from_diagonal(&Vec3::new(4.0, 1.0, 0.25)), Vec3::zeros()).unwrap();
        assert!((e.semi_axes - Vec3::new(2.0, 1.0, 0.5)).norm() < 1e-12);
        assert!((e.orientation - Mat3::identity()).norm() < 1e-12);

        let e = ellipsoid_from_cov(&Mat3::from_diagonal(&Vec3::new(0.25, 4.0, 1.0)), Vec3::zeros()).unwrap();
        assert!((e.semi_axes - Vec3::new(2.0, 1.0, 0.5)).norm() < 1e-12);
        // a permutation of the identity axes
        for col in e.orientation.column_iter() {
            assert_eq!(col.iter().filter(|v| v.abs() > 1e-12).count(), 1);
        }
    }

    #[test]
    fn isotropic_is_sphere() {
        let e = ellipsoid_from_cov(&(Mat3::identity() * 9.0), Vec3::new(1.0, 2.0, 3.0)).unwrap();
        assert!((e.semi_axes - Vec3::repeat(3.0)).norm() < 1e-12);
        assert!((e.orientation * e.orientation.transpose() - Mat3::identity()).norm() < 1e-10);
        assert_eq!(e.centroid, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn rejects_bad_blocks() {
        let mut asym = Mat3::identity();
        asym[(0, 1)] = 0.3;
        assert!(ellipsoid_from_cov(&asym, Vec3::zeros()).is_err());
        assert!(ellipsoid_from_cov(&Mat3::from_diagonal(&Vec3::new(1.0, -1.0, 1.0)), Vec3::zeros()).is_err());
    }
}
