//! Small dense complex matrix helpers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ‖MᴴM − I‖_F.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.ncols();
    frobenius(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

/// ‖M + Mᴴ‖_F.
pub fn anti_hermitian_defect(m: &CMatrix) -> f64 {
    frobenius(&(m + m.adjoint()))
}

/// Nearest unitary matrix in Frobenius norm, `U Vᴴ` from `M = U Σ Vᴴ`.
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    if m.nrows() == 1 && m.ncols() == 1 {
        let z = m[(0, 0)];
        let r = z.norm();
        return CMatrix::from_element(1, 1, if r > 0.0 { z / r } else { C64::new(1.0, 0.0) });
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    u * v_t
}

pub fn determinant(m: &CMatrix) -> C64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.clone().determinant(),
    }
}

/// Orthonormal basis of the null space of `m`, as columns.
///
/// Singular values at or below `rel_cutoff · σ_max` count as zero; when
/// `σ_max` itself is zero every direction is null.
pub fn null_space(m: &CMatrix, rel_cutoff: f64) -> CMatrix {
    let cols = m.ncols();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    // pad to square so v_t spans the full domain
    let rows = m.nrows().max(cols);
    let mut sq = CMatrix::zeros(rows, cols);
    sq.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("svd computed with v_t");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_cutoff * sigma_max;
    let null: Vec<CVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| sigma_max == 0.0 || s <= cutoff)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect();
    if null.is_empty() {
        CMatrix::zeros(cols, 0)
    } else {
        CMatrix::from_columns(&null)
    }
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn random_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-distributed unitary via QR with the diagonal phases of R divided out.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let qr = random_gaussian_matrix(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..5 {
            assert!(unitarity_defect(&random_unitary(&mut rng, n)) < 1e-12);
        }
    }

    #[test]
    fn polar_projection_fixes_unitaries_and_repairs_drift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(&mut rng, 3);
        assert!(frobenius(&(polar_unitary(&u) - &u)) < 1e-12);
        let drifted = &u * C64::new(1.0 + 1e-6, 0.0);
        assert!(unitarity_defect(&polar_unitary(&drifted)) < 1e-13);
        assert!(frobenius(&(polar_unitary(&drifted) - &u)) < 1e-12);
    }

    #[test]
    fn null_space_of_shift_matrix() {
        // rows e_{i+1}: kernel is span{e_0}
        let m = CMatrix::from_fn(3, 4, |i, j| if j == i + 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let ns = null_space(&m, 1e-9);
        assert_eq!(ns.ncols(), 1);
        assert!((ns[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(null_space(&CMatrix::zeros(2, 2), 1e-9).ncols() == 2);
    }
}
