use nalgebra::{DMatrix, DVector};

/// Singular values below this fraction of the largest one are treated as zero.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-8;

/// Moore-Penrose pseudo-inverse together with its rank diagnostics.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    pub singular_values: DVector<f64>,
}

pub fn pseudo_inverse(a: &DMatrix<f64>, relative_cutoff: f64) -> PseudoInverse {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return PseudoInverse {
            matrix: DMatrix::zeros(cols, rows),
            rank: 0,
            singular_values: DVector::zeros(0),
        };
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = relative_cutoff * sigma_max;
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let singular_values = svd.singular_values.clone();
    let matrix = if sigma_max > 0.0 {
        svd.pseudo_inverse(eps).expect("u and v_t were computed")
    } else {
        DMatrix::zeros(cols, rows)
    };
    PseudoInverse {
        matrix,
        rank,
        singular_values,
    }
}
