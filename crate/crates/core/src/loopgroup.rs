//! Matrix-valued trigonometric polynomials in `LU(n)`.
//!
//! A [`LoopGroupElement`] stores matrix Fourier coefficients `A_k` of
//! `γ(θ) = Σ_k A_k e^{ikθ}`. Pointwise unitarity is a certified tolerance
//! property checked on a grid, not something the representation enforces.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fourier::{complex_pair, from_pair, parse_frequency, TruncatedLoop};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::par;
use crate::subspace::{intersect_shift_complement, SubspaceFrame};

/// Grid on which pointwise unitarity is certified.
pub const UNITARITY_GRID: usize = 256;
pub const UNITARITY_TOL: f64 = 1e-8;
/// Finest grid tried by [`LoopGroupElement::det_winding`].
pub const MAX_WINDING_GRID: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq)]
pub struct LoopGroupElement {
    n: usize,
    mcoeffs: BTreeMap<i64, CMatrix>,
}

impl LoopGroupElement {
    pub fn from_coeffs<I>(n: usize, coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, CMatrix)>,
    {
        let mut mcoeffs = BTreeMap::new();
        for (k, a) in coeffs {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: a.nrows().max(a.ncols()) });
            }
            mcoeffs.insert(k, a);
        }
        Ok(Self { n, mcoeffs })
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(CMatrix::identity(n, n))
    }

    pub fn constant(u: CMatrix) -> Self {
        let n = u.nrows();
        Self { n, mcoeffs: BTreeMap::from([(0, u)]) }
    }

    /// `diag(z^{k_1}, …, z^{k_n})`.
    pub fn diagonal_modes(powers: &[i64]) -> Self {
        let n = powers.len();
        let mut mcoeffs: BTreeMap<i64, CMatrix> = BTreeMap::new();
        for (j, &k) in powers.iter().enumerate() {
            mcoeffs.entry(k).or_insert_with(|| CMatrix::zeros(n, n))[(j, j)] = C64::new(1.0, 0.0);
        }
        Self { n, mcoeffs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn band(&self) -> Option<(i64, i64)> {
        Some((*self.mcoeffs.keys().next()?, *self.mcoeffs.keys().next_back()?))
    }

    pub fn coeff(&self, k: i64) -> Option<&CMatrix> {
        self.mcoeffs.get(&k)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (i64, &CMatrix)> {
        self.mcoeffs.iter().map(|(&k, a)| (k, a))
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::DimensionMismatch { expected: self.n, found: n });
        }
        Ok(())
    }

    pub fn evaluate(&self, theta: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.n, self.n);
        for (&k, a) in &self.mcoeffs {
            out += a * C64::from_polar(1.0, k as f64 * theta);
        }
        out
    }

    /// Values at `θ_j = 2πj/N`.
    pub fn sample_grid(&self, grid: usize) -> Vec<CMatrix> {
        par::map(grid, |j| self.evaluate(2.0 * PI * j as f64 / grid as f64))
    }

    /// Worst `‖γ(θ)ᴴγ(θ) − I‖_F` on the grid, with the `θ` where it occurs.
    pub fn unitarity_defect(&self, grid: usize) -> (f64, f64) {
        let defects = par::map(grid, |j| linalg::unitarity_defect(&self.evaluate(2.0 * PI * j as f64 / grid as f64)));
        defects
            .into_iter()
            .enumerate()
            .fold((0.0, 0.0), |(d, t), (j, dj)| {
                if dj > d { (dj, 2.0 * PI * j as f64 / grid as f64) } else { (d, t) }
            })
    }

    /// Certifies pointwise unitarity on [`UNITARITY_GRID`] to [`UNITARITY_TOL`].
    pub fn validate(&self) -> Result<()> {
        let (defect, theta) = self.unitarity_defect(UNITARITY_GRID);
        if defect > UNITARITY_TOL {
            return Err(Error::UnitarityViolation { defect, theta });
        }
        Ok(())
    }

    /// `max_θ ‖γ(θ) − γ(0)‖_F` over the grid; zero for a constant loop.
    pub fn theta_variation(&self, grid: usize) -> f64 {
        let base = self.evaluate(0.0);
        par::max_f64(grid, |j| linalg::frobenius(&(self.evaluate(2.0 * PI * j as f64 / grid as f64) - &base)))
    }

    /// Pointwise product (coefficient convolution, bands add).
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.n)?;
        let mut mcoeffs: BTreeMap<i64, CMatrix> = BTreeMap::new();
        for (&k, a) in &self.mcoeffs {
            for (&l, b) in &other.mcoeffs {
                *mcoeffs.entry(k + l).or_insert_with(|| CMatrix::zeros(self.n, self.n)) += a * b;
            }
        }
        Ok(Self { n: self.n, mcoeffs })
    }

    /// Pointwise adjoint, `A_k ↦ A_{−k}ᴴ`; the inverse on `LU(n)`.
    pub fn inverse(&self) -> Self {
        Self { n: self.n, mcoeffs: self.mcoeffs.iter().map(|(&k, a)| (-k, a.adjoint())).collect() }
    }

    /// `(γ · α)(θ) = γ(θ) α(θ)`.
    pub fn apply(&self, a: &TruncatedLoop) -> Result<TruncatedLoop> {
        self.check_dim(a.n())?;
        let mut out: BTreeMap<i64, CVector> = BTreeMap::new();
        for (&k, m) in &self.mcoeffs {
            for (l, c) in a.coeffs() {
                *out.entry(k + l).or_insert_with(|| CVector::zeros(self.n)) += m * c;
            }
        }
        TruncatedLoop::from_coeffs(self.n, out)
    }

    /// Column `j` of `γ` as a vector loop, i.e. `γ e_j`.
    pub fn column(&self, j: usize) -> TruncatedLoop {
        TruncatedLoop::from_coeffs(self.n, self.mcoeffs.iter().map(|(&k, a)| (k, a.column(j).into_owned())))
            .expect("column has fiber dimension n")
    }

    /// Degree of `θ ↦ det γ(θ)` as a map `S¹ → U(1)`.
    ///
    /// Phases are accumulated over a grid that is doubled until every step
    /// is below π/2, up to [`MAX_WINDING_GRID`] points.
    pub fn det_winding(&self) -> Result<i64> {
        let width = self.band().map_or(1, |(lo, hi)| (hi - lo + 1) as usize);
        let mut grid = (8 * width).max(UNITARITY_GRID).next_power_of_two();
        loop {
            let dets = par::map(grid, |j| linalg::determinant(&self.evaluate(2.0 * PI * j as f64 / grid as f64)));
            match accumulate_winding(&dets) {
                Ok(w) => return Ok(w),
                Err(step) if grid >= MAX_WINDING_GRID => return Err(Error::PhaseStepTooLarge { step, grid }),
                Err(_) => grid *= 2,
            }
        }
    }

    /// Drops coefficient matrices with Frobenius norm `≤ tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            n: self.n,
            mcoeffs: self
                .mcoeffs
                .iter()
                .filter(|(_, a)| linalg::frobenius(a) > tol)
                .map(|(&k, a)| (k, a.clone()))
                .collect(),
        }
    }

    /// Right multiplication by a constant matrix.
    pub fn right_mul_constant(&self, u: &CMatrix) -> Self {
        Self { n: self.n, mcoeffs: self.mcoeffs.iter().map(|(&k, a)| (k, a * u)).collect() }
    }
}

/// Winding number of a closed sampled curve in `C \ {0}`; `Err(step)` if some
/// phase step reaches π/2.
pub fn accumulate_winding(values: &[C64]) -> std::result::Result<i64, f64> {
    let len = values.len();
    let mut total = 0.0;
    for j in 0..len {
        let step = (values[(j + 1) % len] * values[j].conj()).arg();
        if !step.is_finite() || step.abs() >= FRAC_PI_2 {
            return Err(step);
        }
        total += step;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Deterministic pseudo-random element of `LU(n)` with frequencies in `[−band, band]`.
///
/// Built as `U₀ F₁ U₁ ⋯ F_b U_b` with Haar-random constants `U_i` and
/// elementary factors `F = (I − P) + z^{±1} P`, `P` a random orthogonal
/// projector. Every factor is unitary for all `θ`, so the product is exactly
/// band-limited and pointwise unitary up to rounding.
pub fn random_loop(n: usize, band: usize, seed: u64) -> Result<LoopGroupElement> {
    if n == 0 || band == 0 {
        return Err(Error::InvalidInput("random_loop needs n ≥ 1 and band ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = LoopGroupElement::constant(linalg::random_unitary(&mut rng, n));
    for _ in 0..band {
        let rank = rng.random_range(1..=n);
        let power: i64 = if rng.random_bool(0.5) { 1 } else { -1 };
        let q = linalg::random_unitary(&mut rng, n);
        let qr = q.columns(0, rank);
        let p = &qr * qr.adjoint();
        let factor = LoopGroupElement::from_coeffs(
            n,
            [(0, CMatrix::identity(n, n) - &p), (power, p)],
        )?;
        let u = LoopGroupElement::constant(linalg::random_unitary(&mut rng, n));
        g = g.multiply(&factor)?.multiply(&u)?;
    }
    Ok(g)
}

/// The loop `γ` with `γ(θ) e_j = w_j(θ)` for an orthonormal basis `w_j` of `W ∩ zW⊥`.
///
/// The basis is normalized so that `γ(0) = I`; any other orthonormal basis
/// differs by a constant unitary right factor.
pub fn loop_from_subspace(w: &SubspaceFrame) -> Result<LoopGroupElement> {
    let n = w.n();
    let generators = intersect_shift_complement(w);
    if generators.dim() != n {
        return Err(Error::IntersectionDimension { expected: n, found: generators.dim() });
    }
    let mut mcoeffs: BTreeMap<i64, CMatrix> = BTreeMap::new();
    for (j, col) in generators.columns().iter().enumerate() {
        for (k, c) in col.coeffs() {
            mcoeffs.entry(k).or_insert_with(|| CMatrix::zeros(n, n)).set_column(j, c);
        }
    }
    let gamma = LoopGroupElement { n, mcoeffs };
    gamma.validate()?;
    let base = gamma.evaluate(0.0).adjoint();
    Ok(gamma.right_mul_constant(&base).pruned(1e-14))
}

struct MatrixEntries<'a>(&'a CMatrix);

impl Serialize for MatrixEntries<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = self
            .0
            .row_iter()
            .map(|r| r.iter().map(|z| complex_pair(*z)).collect())
            .collect();
        rows.serialize(s)
    }
}

struct MatrixCoeffMap<'a>(&'a BTreeMap<i64, CMatrix>);

impl Serialize for MatrixCoeffMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, a) in self.0 {
            map.serialize_entry(&k.to_string(), &MatrixEntries(a))?;
        }
        map.end()
    }
}

/// JSON: `{"n": int, "mcoeffs": {"k": [[[re, im] × n] × n]}}`, rows outermost.
impl Serialize for LoopGroupElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("n", &self.n)?;
        map.serialize_entry("mcoeffs", &MatrixCoeffMap(&self.mcoeffs))?;
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopGroupRecord {
    n: usize,
    mcoeffs: BTreeMap<String, Vec<Vec<[f64; 2]>>>,
}

pub(crate) fn matrix_from_rows<E: serde::de::Error>(n: usize, rows: &[Vec<[f64; 2]>]) -> std::result::Result<CMatrix, E> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(E::custom(format!("expected a {n}×{n} matrix")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| from_pair(rows[i][j])))
}

/// Row-major `[re, im]` pairs, the matrix layout used in JSON reports.
pub fn matrix_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    m.row_iter().map(|r| r.iter().map(|z| complex_pair(*z)).collect()).collect()
}

impl<'de> Deserialize<'de> for LoopGroupElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = LoopGroupRecord::deserialize(d)?;
        if rec.n == 0 {
            return Err(D::Error::custom("fiber dimension n must be positive"));
        }
        let mut mcoeffs = BTreeMap::new();
        for (key, rows) in rec.mcoeffs {
            let k = parse_frequency(&key)?;
            mcoeffs.insert(k, matrix_from_rows(rec.n, &rows)?);
        }
        Ok(Self { n: rec.n, mcoeffs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::{expand_filtration, orthonormalize, FiltrationSubspace};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn scalar_mode(k: i64) -> LoopGroupElement {
        LoopGroupElement::diagonal_modes(&[k])
    }

    #[test]
    fn generator_loop_examples() {
        let w = expand_filtration(&FiltrationSubspace::hardy(1, 3)).unwrap();
        let g = loop_from_subspace(&w).unwrap();
        assert!(g.theta_variation(64) < 1e-12);
        assert!((g.evaluate(0.3)[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);

        let zw = expand_filtration(&FiltrationSubspace::hardy(1, 3).shifted(1)).unwrap();
        let g = loop_from_subspace(&zw).unwrap();
        for theta in [0.0, 1.0, 2.5] {
            assert!((g.evaluate(theta)[(0, 0)] - C64::from_polar(1.0, theta)).norm() < 1e-12);
        }
        assert_eq!(g.det_winding().unwrap(), 1);
    }

    #[test]
    fn generator_loop_rejects_cosine_filtration() {
        let c = C64::new(FRAC_1_SQRT_2, 0.0);
        let gen = TruncatedLoop::scalar([(-1, c), (1, c)]);
        let w = expand_filtration(&FiltrationSubspace::new(vec![gen], 3).unwrap()).unwrap();
        let err = loop_from_subspace(&w).unwrap_err();
        assert!(matches!(err, Error::UnitarityViolation { .. } | Error::IntersectionDimension { .. }));
    }

    #[test]
    fn group_operation_examples() {
        let g = random_loop(2, 3, 17).unwrap();
        let prod = g.multiply(&g.inverse()).unwrap();
        for m in prod.sample_grid(64) {
            assert!(linalg::frobenius(&(m - CMatrix::identity(2, 2))) < 1e-9);
        }
        let moved = scalar_mode(1).apply(&TruncatedLoop::basis(1, 0)).unwrap();
        assert_eq!(moved, TruncatedLoop::basis(1, 0).shift(1));

        let d = LoopGroupElement::diagonal_modes(&[1, 0]);
        let dd = d.multiply(&d).unwrap();
        let expect = LoopGroupElement::diagonal_modes(&[2, 0]);
        for theta in [0.0, 0.7, 3.1, 4.4] {
            assert!(linalg::frobenius(&(dd.evaluate(theta) - expect.evaluate(theta))) < 1e-12);
        }
        assert!(matches!(d.multiply(&scalar_mode(1)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn det_winding_examples() {
        assert_eq!(LoopGroupElement::identity(3).det_winding().unwrap(), 0);
        assert_eq!(scalar_mode(1).det_winding().unwrap(), 1);
        assert_eq!(LoopGroupElement::diagonal_modes(&[2, -1]).det_winding().unwrap(), 1);
        assert_eq!(scalar_mode(-40).det_winding().unwrap(), -40);
    }

    #[test]
    fn det_winding_reports_a_vanishing_determinant() {
        // det = (1 + z)/2 hits zero at θ = π
        let half = C64::new(0.5, 0.0);
        let g = LoopGroupElement::from_coeffs(
            1,
            [(0, CMatrix::from_element(1, 1, half)), (1, CMatrix::from_element(1, 1, half))],
        )
        .unwrap();
        assert!(matches!(g.det_winding(), Err(Error::PhaseStepTooLarge { .. })));
    }

    #[test]
    fn random_loop_is_deterministic_and_unitary() {
        let a = random_loop(3, 4, 99).unwrap();
        assert_eq!(a, random_loop(3, 4, 99).unwrap());
        assert!(a.unitarity_defect(UNITARITY_GRID).0 <= 1e-8);
        let (lo, hi) = a.band().unwrap();
        assert!(lo >= -4 && hi <= 4);
        for j in 0..3 {
            assert!((a.column(j).norm() - 1.0).abs() < 1e-12);
        }
        assert!(random_loop(2, 0, 1).is_err());
    }

    #[test]
    fn winding_of_inverse_cancels() {
        for seed in 0..10 {
            let g = random_loop(2, 3, seed).unwrap();
            assert_eq!(g.det_winding().unwrap() + g.inverse().det_winding().unwrap(), 0);
        }
    }

    #[test]
    fn generator_loop_round_trip_recovers_loop_up_to_constant() {
        for (n, seed) in [(1, 3), (2, 4), (3, 5)] {
            let g = random_loop(n, 3, seed).unwrap();
            let vectors: Vec<_> = (0..=5)
                .flat_map(|p| (0..n).map(move |j| (p, j)))
                .map(|(p, j)| g.apply(&TruncatedLoop::basis(n, j).shift(p)).unwrap())
                .collect();
            let w = orthonormalize(&vectors).unwrap();
            let ghat = loop_from_subspace(&w).unwrap();
            assert!(ghat.inverse().multiply(&g).unwrap().theta_variation(128) < 1e-6);
        }
    }

    #[test]
    fn json_shape() {
        let g = LoopGroupElement::diagonal_modes(&[1, 0]);
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(
            text,
            r#"{"n":2,"mcoeffs":{"0":[[[0.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]],"1":[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]]}}"#
        );
        let back: LoopGroupElement = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn winding_is_a_homomorphism(n in 1usize..4, b1 in 1usize..4, b2 in 1usize..4, s1: u64, s2: u64) {
            let g = random_loop(n, b1, s1).unwrap();
            let h = random_loop(n, b2, s2).unwrap();
            let gh = g.multiply(&h).unwrap();
            prop_assert_eq!(gh.det_winding().unwrap(), g.det_winding().unwrap() + h.det_winding().unwrap());
        }

        #[test]
        fn apply_preserves_inner_products(n in 1usize..4, seed: u64) {
            let g = random_loop(n, 3, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let a = TruncatedLoop::random(&mut rng, n, -3, 2);
            let b = TruncatedLoop::random(&mut rng, n, -1, 4);
            let before = a.inner_product(&b).unwrap();
            let after = g.apply(&a).unwrap().inner_product(&g.apply(&b).unwrap()).unwrap();
            prop_assert!((before - after).norm() <= 1e-9 * (1.0 + before.norm()));
        }
    }
}
