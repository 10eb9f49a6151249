//! Trigonometric-polynomial loops in `LCⁿ`.
//!
//! A [`TruncatedLoop`] stores the Fourier coefficients `c_k ∈ Cⁿ` of
//! `α(θ) = Σ_k c_k e^{ikθ}` sparsely by frequency. The circle carries the
//! normalized measure `dθ/2π`, so the inner product is the Parseval sum
//! `Σ_k ⟨c_k(a), c_k(b)⟩`, conjugate-linear in the first slot.

use std::collections::BTreeMap;
use std::ops::{Add, Neg, Sub};

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedLoop {
    n: usize,
    coeffs: BTreeMap<i64, CVector>,
}

impl TruncatedLoop {
    /// The zero loop in `LCⁿ` (no stored frequencies).
    pub fn zero(n: usize) -> Self {
        Self { n, coeffs: BTreeMap::new() }
    }

    pub fn from_coeffs<I>(n: usize, coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, CVector)>,
    {
        let mut map = BTreeMap::new();
        for (k, c) in coeffs {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.len() });
            }
            map.insert(k, c);
        }
        Ok(Self { n, coeffs: map })
    }

    /// `v · e^{ikθ}`.
    pub fn mode(k: i64, v: CVector) -> Self {
        let n = v.len();
        let mut coeffs = BTreeMap::new();
        coeffs.insert(k, v);
        Self { n, coeffs }
    }

    pub fn constant(v: CVector) -> Self {
        Self::mode(0, v)
    }

    /// The constant loop `e_j` in `LCⁿ`.
    pub fn basis(n: usize, j: usize) -> Self {
        let mut v = CVector::zeros(n);
        v[j] = C64::new(1.0, 0.0);
        Self::constant(v)
    }

    /// Scalar loop (`n = 1`) with the given coefficients.
    pub fn scalar<I: IntoIterator<Item = (i64, C64)>>(coeffs: I) -> Self {
        Self {
            n: 1,
            coeffs: coeffs.into_iter().map(|(k, c)| (k, CVector::from_element(1, c))).collect(),
        }
    }

    /// Random coefficients with i.i.d. complex Gaussian entries on `[kmin, kmax]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, kmin: i64, kmax: i64) -> Self {
        let coeffs = (kmin..=kmax)
            .map(|k| {
                let v = CVector::from_fn(n, |_, _| {
                    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                });
                (k, v)
            })
            .collect();
        Self { n, coeffs }
    }

    /// [`TruncatedLoop::random`] on a ChaCha8 stream seeded with `seed`.
    pub fn seeded(seed: u64, n: usize, kmin: i64, kmax: i64) -> Self {
        Self::random(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed), n, kmin, kmax)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Frequency window `[kmin, kmax]` spanned by the stored coefficients.
    pub fn band(&self) -> Option<(i64, i64)> {
        let lo = *self.coeffs.keys().next()?;
        let hi = *self.coeffs.keys().next_back()?;
        Some((lo, hi))
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, k: i64) -> Option<&CVector> {
        self.coeffs.get(&k)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (i64, &CVector)> {
        self.coeffs.iter().map(|(&k, c)| (k, c))
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(())
    }

    /// `(a, b) = Σ_k ⟨c_k(a), c_k(b)⟩`, conjugating `a`.
    pub fn inner_product(&self, other: &Self) -> Result<C64> {
        self.check_dim(other)?;
        let (small, large, flip) = if self.coeffs.len() <= other.coeffs.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in &small.coeffs {
            if let Some(d) = large.coeffs.get(k) {
                acc += if flip { d.dotc(c) } else { c.dotc(d) };
            }
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_squared()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Multiplication by `z^p`.
    pub fn shift(&self, p: i64) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().map(|(&k, c)| (k + p, c.clone())).collect(),
        }
    }

    /// Component in `L₊Cⁿ` (frequencies `k ≥ 0`).
    pub fn project_plus(&self) -> Self {
        Self { n: self.n, coeffs: self.coeffs.range(0..).map(|(&k, c)| (k, c.clone())).collect() }
    }

    /// Component in `L₋Cⁿ` (frequencies `k < 0`).
    pub fn project_minus(&self) -> Self {
        Self { n: self.n, coeffs: self.coeffs.range(..0).map(|(&k, c)| (k, c.clone())).collect() }
    }

    pub fn evaluate(&self, theta: f64) -> CVector {
        let mut out = CVector::zeros(self.n);
        for (&k, c) in &self.coeffs {
            out.axpy(C64::from_polar(1.0, k as f64 * theta), c, C64::new(1.0, 0.0));
        }
        out
    }

    /// Values at `θ_j = 2πj/N`, `j = 0..N`.
    ///
    /// Frequencies are folded modulo `N`, which is exact for sampling even
    /// when the band is wider than the grid.
    pub fn sample_grid(&self, grid: usize) -> Vec<CVector> {
        assert!(grid > 0, "grid must be nonempty");
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_inverse(grid);
        let mut out = vec![CVector::zeros(self.n); grid];
        let mut buf = vec![C64::new(0.0, 0.0); grid];
        for comp in 0..self.n {
            buf.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
            for (&k, c) in &self.coeffs {
                buf[k.rem_euclid(grid as i64) as usize] += c[comp];
            }
            fft.process(&mut buf);
            for (j, v) in buf.iter().enumerate() {
                out[j][comp] = *v;
            }
        }
        out
    }

    /// Inverse of [`sample_grid`](Self::sample_grid): the trigonometric
    /// interpolant of `N` samples, with band `[-⌊N/2⌋, N - 1 - ⌊N/2⌋]`.
    pub fn from_grid(samples: &[CVector]) -> Result<Self> {
        let grid = samples.len();
        if grid == 0 {
            return Err(Error::Empty("sample grid"));
        }
        let kmin = -((grid / 2) as i64);
        Self::from_grid_band(samples, kmin, kmin + grid as i64 - 1)
    }

    /// Coefficients on `[kmin, kmax]` recovered from `N ≥ kmax - kmin + 1` samples.
    pub fn from_grid_band(samples: &[CVector], kmin: i64, kmax: i64) -> Result<Self> {
        let grid = samples.len();
        if grid == 0 {
            return Err(Error::Empty("sample grid"));
        }
        if kmax < kmin || (kmax - kmin + 1) as usize > grid {
            return Err(Error::InvalidInput(format!(
                "band [{kmin}, {kmax}] does not fit a {grid}-point grid"
            )));
        }
        let n = samples[0].len();
        if let Some(bad) = samples.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(grid);
        let scale = 1.0 / grid as f64;
        let mut coeffs: BTreeMap<i64, CVector> =
            (kmin..=kmax).map(|k| (k, CVector::zeros(n))).collect();
        let mut buf = vec![C64::new(0.0, 0.0); grid];
        for comp in 0..n {
            for (b, s) in buf.iter_mut().zip(samples) {
                *b = s[comp];
            }
            fft.process(&mut buf);
            for (k, c) in coeffs.iter_mut() {
                c[comp] = buf[k.rem_euclid(grid as i64) as usize] * scale;
            }
        }
        Ok(Self { n, coeffs })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { n: self.n, coeffs: self.coeffs.iter().map(|(&k, c)| (k, c * s)).collect() }
    }

    /// Pointwise product `f · α` of a scalar loop with this loop
    /// (coefficient convolution, bands add).
    pub fn scalar_mul(&self, f: &TruncatedLoop) -> Result<Self> {
        if f.n != 1 {
            return Err(Error::NonScalar(f.n));
        }
        let mut coeffs: BTreeMap<i64, CVector> = BTreeMap::new();
        for (&l, fl) in &f.coeffs {
            for (&k, c) in &self.coeffs {
                coeffs
                    .entry(k + l)
                    .or_insert_with(|| CVector::zeros(self.n))
                    .axpy(fl[0], c, C64::new(1.0, 0.0));
            }
        }
        Ok(Self { n: self.n, coeffs })
    }

    /// `f ⊗ v`: the loop `θ ↦ f(θ) v`.
    pub fn tensor(f: &TruncatedLoop, v: &CVector) -> Result<Self> {
        if f.n != 1 {
            return Err(Error::NonScalar(f.n));
        }
        Ok(Self { n: v.len(), coeffs: f.coeffs.iter().map(|(&k, c)| (k, v * c[0])).collect() })
    }

    /// Largest coefficient-level difference over the union of both bands.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let diff = self - other;
        diff.coeffs.values().flat_map(|c| c.iter().map(|z| z.norm())).fold(0.0, f64::max)
    }

    /// Drops stored frequencies whose coefficient vector has norm `≤ tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(_, c)| c.norm() > tol)
                .map(|(&k, c)| (k, c.clone()))
                .collect(),
        }
    }

    /// Dense coefficient vector over `[kmin, kmax]`, frequency-major.
    pub(crate) fn to_dense(&self, kmin: i64, kmax: i64) -> CVector {
        let width = (kmax - kmin + 1).max(0) as usize;
        let mut out = CVector::zeros(width * self.n);
        for (&k, c) in self.coeffs.range(kmin..=kmax) {
            let off = (k - kmin) as usize * self.n;
            out.rows_mut(off, self.n).copy_from(c);
        }
        out
    }

    /// Inverse of [`to_dense`](Self::to_dense); exactly-zero frequencies are not stored.
    pub(crate) fn from_dense(n: usize, kmin: i64, dense: &CVector) -> Self {
        let coeffs = dense
            .as_slice()
            .chunks(n)
            .enumerate()
            .filter(|(_, c)| c.iter().any(|z| *z != C64::new(0.0, 0.0)))
            .map(|(i, c)| (kmin + i as i64, CVector::from_column_slice(c)))
            .collect();
        Self { n, coeffs }
    }
}

/// Smallest window containing every band in `loops`.
pub(crate) fn union_band<'a, I>(loops: I) -> Option<(i64, i64)>
where
    I: IntoIterator<Item = &'a TruncatedLoop>,
{
    loops.into_iter().filter_map(|l| l.band()).fold(None, |acc, (lo, hi)| match acc {
        None => Some((lo, hi)),
        Some((a, b)) => Some((a.min(lo), b.max(hi))),
    })
}

impl Add for &TruncatedLoop {
    type Output = TruncatedLoop;

    /// Panics on mismatched fiber dimension.
    fn add(self, rhs: &TruncatedLoop) -> TruncatedLoop {
        assert_eq!(self.n, rhs.n, "fiber dimension mismatch");
        let mut coeffs = self.coeffs.clone();
        for (&k, c) in &rhs.coeffs {
            coeffs
                .entry(k)
                .and_modify(|e| *e += c)
                .or_insert_with(|| c.clone());
        }
        TruncatedLoop { n: self.n, coeffs }
    }
}

impl Neg for &TruncatedLoop {
    type Output = TruncatedLoop;

    fn neg(self) -> TruncatedLoop {
        TruncatedLoop { n: self.n, coeffs: self.coeffs.iter().map(|(&k, c)| (k, -c)).collect() }
    }
}

impl Sub for &TruncatedLoop {
    type Output = TruncatedLoop;

    fn sub(self, rhs: &TruncatedLoop) -> TruncatedLoop {
        self + &(-rhs)
    }
}

pub(crate) fn complex_pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub(crate) fn from_pair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

pub(crate) fn parse_frequency<E: serde::de::Error>(key: &str) -> std::result::Result<i64, E> {
    key.trim()
        .parse::<i64>()
        .map_err(|_| E::custom(format!("frequency key {key:?} is not an integer")))
}

struct VectorEntries<'a>(&'a CVector);

impl Serialize for VectorEntries<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|z| complex_pair(*z)))
    }
}

struct CoeffMap<'a>(&'a BTreeMap<i64, CVector>);

impl Serialize for CoeffMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, c) in self.0 {
            map.serialize_entry(&k.to_string(), &VectorEntries(c))?;
        }
        map.end()
    }
}

impl Serialize for TruncatedLoop {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("n", &self.n)?;
        map.serialize_entry("coeffs", &CoeffMap(&self.coeffs))?;
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopRecord {
    n: usize,
    coeffs: BTreeMap<String, Vec<[f64; 2]>>,
}

impl<'de> Deserialize<'de> for TruncatedLoop {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = LoopRecord::deserialize(d)?;
        if rec.n == 0 {
            return Err(D::Error::custom("fiber dimension n must be positive"));
        }
        let mut coeffs = BTreeMap::new();
        for (key, entries) in rec.coeffs {
            let k = parse_frequency(&key)?;
            if entries.len() != rec.n {
                return Err(D::Error::custom(format!(
                    "frequency {k}: expected {} entries, found {}",
                    rec.n,
                    entries.len()
                )));
            }
            let v = CVector::from_iterator(rec.n, entries.into_iter().map(from_pair));
            if coeffs.insert(k, v).is_some() {
                return Err(D::Error::custom(format!("duplicate frequency {k}")));
            }
        }
        Ok(TruncatedLoop { n: rec.n, coeffs })
    }
}
