//! Fibers of gauge-twisted loop bundles.
//!
//! Over a loop `γ` with gauge twist `τ`, a fiber element is a section `σ` of
//! the pulled-back bundle over `R` with `σ(t + 1) = τ(tγ) σ(t)`. Sections are
//! sampled on the transport grid `t_i = i/N`, both endpoints stored.
//!
//! For the holonomy twist of a connection, `j(v)(t) = T(t) v` embeds the
//! basepoint fiber and `Φ(σ)(t) = T(t)⁻¹ σ(t)` untwists a section into an
//! ordinary periodic loop, where Fourier analysis applies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{complex_pair, from_pair, TruncatedLoop};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::par;
use crate::transport::{BaseLoop, TransportFrame};

/// Tolerated quasi-periodicity residual.
pub const QUASI_PERIODIC_TOL: f64 = 1e-7;
pub const TWIST_UNITARITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwistKind {
    Identity,
    Holonomy,
    Custom,
}

pub type TwistFn = dyn Fn(f64) -> CMatrix + Send + Sync;

/// A gauge element restricted to the rotations of one loop, `t ↦ τ(tγ)`.
#[derive(Clone)]
pub enum GaugeTwist {
    Identity(usize),
    Holonomy(Arc<TransportFrame>),
    Custom { n: usize, f: Arc<TwistFn> },
}

impl GaugeTwist {
    pub fn custom<F>(n: usize, f: F) -> Self
    where
        F: Fn(f64) -> CMatrix + Send + Sync + 'static,
    {
        GaugeTwist::Custom { n, f: Arc::new(f) }
    }

    pub fn kind(&self) -> TwistKind {
        match self {
            GaugeTwist::Identity(_) => TwistKind::Identity,
            GaugeTwist::Holonomy(_) => TwistKind::Holonomy,
            GaugeTwist::Custom { .. } => TwistKind::Custom,
        }
    }

    /// `τ(t_i γ)` for `i = 0..N`, each certified unitary.
    pub fn table(&self, steps: usize) -> Result<TwistTable> {
        let values: Vec<CMatrix> = match self {
            GaugeTwist::Identity(n) => vec![CMatrix::identity(*n, *n); steps],
            GaugeTwist::Holonomy(frame) => {
                if frame.steps() != steps {
                    return Err(Error::FrameMismatch);
                }
                par::map(steps, |i| frame.rotated_twist_at(i))
            }
            GaugeTwist::Custom { f, .. } => par::map(steps, |i| f(i as f64 / steps as f64)),
        };
        for (i, v) in values.iter().enumerate() {
            let defect = linalg::unitarity_defect(v);
            if defect > TWIST_UNITARITY_TOL || !defect.is_finite() {
                return Err(Error::UnitarityViolation { defect, theta: 2.0 * std::f64::consts::PI * i as f64 / steps as f64 });
            }
        }
        Ok(TwistTable { kind: self.kind(), values })
    }
}

/// Sampled twist `τ(t_i γ)`, `i = 0..N`.
#[derive(Clone, Debug)]
pub struct TwistTable {
    kind: TwistKind,
    values: Vec<CMatrix>,
}

impl TwistTable {
    pub fn kind(&self) -> TwistKind {
        self.kind
    }

    pub fn at(&self, i: usize) -> &CMatrix {
        &self.values[i]
    }

    fn rotated(&self, k: i64) -> Self {
        let n = self.values.len() as i64;
        Self {
            kind: self.kind,
            values: (0..n).map(|i| self.values[(i + k).rem_euclid(n) as usize].clone()).collect(),
        }
    }
}

/// A grid-sampled element of the twisted fiber over `γ`.
#[derive(Clone, Debug)]
pub struct TwistedSection {
    base: BaseLoop,
    twist: TwistTable,
    samples: Vec<CVector>,
}

impl TwistedSection {
    /// Builds a section from `N + 1` samples, checking quasi-periodicity.
    pub fn from_samples(base: BaseLoop, twist: &GaugeTwist, samples: Vec<CVector>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Empty("section samples"));
        }
        let n = samples[0].len();
        if let Some(s) = samples.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: s.len() });
        }
        let table = twist.table(samples.len() - 1)?;
        if table.values[0].nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: table.values[0].nrows() });
        }
        let s = Self { base, twist: table, samples };
        let residual = s.quasi_periodicity_residual();
        if residual > QUASI_PERIODIC_TOL {
            return Err(Error::PeriodicityDefect { residual });
        }
        Ok(s)
    }

    /// Rebuilds a section from its JSON record over a known loop and twist.
    pub fn from_record(record: TwistedSectionRecord, base: BaseLoop, twist: &GaugeTwist) -> Result<Self> {
        if record.twist != twist.kind() {
            return Err(Error::InvalidInput(format!(
                "record has twist {:?}, supplied twist is {:?}",
                record.twist,
                twist.kind()
            )));
        }
        if record.samples.len() != record.steps + 1 || record.samples.iter().any(|s| s.len() != record.n) {
            return Err(Error::InvalidInput("sample array does not match N and n".into()));
        }
        let samples = record
            .samples
            .iter()
            .map(|s| CVector::from_iterator(record.n, s.iter().copied().map(from_pair)))
            .collect();
        Self::from_samples(base, twist, samples)
    }

    pub fn to_record(&self) -> TwistedSectionRecord {
        TwistedSectionRecord {
            steps: self.steps(),
            n: self.n(),
            samples: self.samples.iter().map(|s| s.iter().map(|z| complex_pair(*z)).collect()).collect(),
            twist: self.twist.kind,
        }
    }

    pub fn n(&self) -> usize {
        self.samples[0].len()
    }

    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn base(&self) -> &BaseLoop {
        &self.base
    }

    pub fn twist(&self) -> &TwistTable {
        &self.twist
    }

    pub fn samples(&self) -> &[CVector] {
        &self.samples
    }

    /// `‖σ(1) − τ(γ) σ(0)‖`.
    pub fn quasi_periodicity_residual(&self) -> f64 {
        (&self.samples[self.steps()] - &self.twist.values[0] * &self.samples[0]).norm()
    }

    /// Sample at grid index `m ∈ (−N, 2N)` of the quasi-periodic extension.
    pub fn extended(&self, m: i64) -> CVector {
        let n = self.steps() as i64;
        if m < 0 {
            self.twist.values[(m + n) as usize].adjoint() * &self.samples[(m + n) as usize]
        } else if m > n {
            &self.twist.values[(m - n) as usize] * &self.samples[(m - n) as usize]
        } else {
            self.samples[m as usize].clone()
        }
    }

    /// `max_i ‖σ(t_i) − σ'(t_i)‖`.
    pub fn max_distance(&self, other: &Self) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn with_samples(&self, samples: Vec<CVector>) -> Self {
        Self { base: self.base.clone(), twist: self.twist.clone(), samples }
    }

    /// Pointwise sum of two sections in the same fiber.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.steps() != other.steps() || self.n() != other.n() || !self.base.same_loop(&other.base) {
            return Err(Error::FrameMismatch);
        }
        Ok(self.with_samples(self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect()))
    }
}

/// JSON record: `{"N", "n", "samples": [[[re, im] × n] × (N + 1)], "twist"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwistedSectionRecord {
    #[serde(rename = "N")]
    pub steps: usize,
    pub n: usize,
    pub samples: Vec<Vec<[f64; 2]>>,
    pub twist: TwistKind,
}

impl Serialize for TwistedSection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

fn holonomy_table(frame: &TransportFrame) -> TwistTable {
    TwistTable {
        kind: TwistKind::Holonomy,
        values: par::map(frame.steps(), |i| frame.rotated_twist_at(i)),
    }
}

/// `j(v)(t) = T(t) v`.
pub fn j_embed(frame: &TransportFrame, v: &CVector) -> Result<TwistedSection> {
    if v.len() != frame.n() {
        return Err(Error::DimensionMismatch { expected: frame.n(), found: v.len() });
    }
    Ok(TwistedSection {
        base: frame.base().clone(),
        twist: holonomy_table(frame),
        samples: frame.frames().iter().map(|t| t * v).collect(),
    })
}

/// `j(p)(t) = T(t) p(t)` for a vector loop `p ∈ LCⁿ` (the `LC`-linear extension of `j`).
pub fn j_apply(frame: &TransportFrame, p: &TruncatedLoop) -> Result<TwistedSection> {
    if p.n() != frame.n() {
        return Err(Error::DimensionMismatch { expected: frame.n(), found: p.n() });
    }
    let steps = frame.steps();
    let values = p.sample_grid(steps);
    let samples = (0..=steps).map(|i| frame.at(i) * &values[i % steps]).collect();
    Ok(TwistedSection { base: frame.base().clone(), twist: holonomy_table(frame), samples })
}

/// `j(f ⊗ v)(t) = f(t) T(t) v`.
pub fn j_extend(frame: &TransportFrame, f: &TruncatedLoop, v: &CVector) -> Result<TwistedSection> {
    j_apply(frame, &TruncatedLoop::tensor(f, v)?)
}

/// `(f · σ)(t) = f(t) σ(t)` for a scalar loop `f`.
pub fn module_scale(f: &TruncatedLoop, s: &TwistedSection) -> Result<TwistedSection> {
    if f.n() != 1 {
        return Err(Error::NonScalar(f.n()));
    }
    let steps = s.steps();
    let values = f.sample_grid(steps);
    Ok(s.with_samples(
        s.samples.iter().enumerate().map(|(i, x)| x * values[i % steps][0]).collect(),
    ))
}

/// `Φ(σ)(t) = T(t)⁻¹ σ(t)`, as a loop with band `[−N/2, N/2 − 1]`.
pub fn phi_inverse(frame: &TransportFrame, s: &TwistedSection) -> Result<TruncatedLoop> {
    if !frame.same_grid(&s.base, s.steps()) || frame.n() != s.n() {
        return Err(Error::FrameMismatch);
    }
    let steps = s.steps();
    let untwisted: Vec<CVector> = (0..=steps).map(|i| frame.at(i).adjoint() * &s.samples[i]).collect();
    let residual = (&untwisted[steps] - &untwisted[0]).norm();
    if residual > QUASI_PERIODIC_TOL {
        return Err(Error::PeriodicityDefect { residual });
    }
    TruncatedLoop::from_grid(&untwisted[..steps])
}

/// Fourier coefficients of an untwisted (`τ ≡ I`) section: a plain DFT.
pub fn periodic_loop(s: &TwistedSection) -> Result<TruncatedLoop> {
    if s.twist.kind != TwistKind::Identity {
        return Err(Error::InvalidInput("section is twisted".into()));
    }
    let residual = s.quasi_periodicity_residual();
    if residual > QUASI_PERIODIC_TOL {
        return Err(Error::PeriodicityDefect { residual });
    }
    TruncatedLoop::from_grid(&s.samples[..s.steps()])
}

/// The ℝ-action at grid resolution: `(kσ)(s) = σ(s + k/N)`, a section over
/// the rotated loop `(k/N)γ`.
pub fn rotate(s: &TwistedSection, steps: i64) -> Result<TwistedSection> {
    let n = s.steps() as i64;
    if steps.abs() >= n {
        return Err(Error::InvalidInput(format!("rotation by {steps} steps needs |steps| < N = {n}")));
    }
    Ok(TwistedSection {
        base: s.base.rotated(steps as f64 / n as f64),
        twist: s.twist.rotated(steps),
        samples: (0..=n).map(|i| s.extended(i + steps)).collect(),
    })
}

/// Splits `σ` into the images of `L₊` and `L₋` under `j ∘ (P_± ∘ Φ)`.
pub fn fourier_decompose_twisted(frame: &TransportFrame, s: &TwistedSection) -> Result<(TwistedSection, TwistedSection)> {
    let p = phi_inverse(frame, s)?;
    Ok((j_apply(frame, &p.project_plus())?, j_apply(frame, &p.project_minus())?))
}

/// `(σ, σ')` transported to the basepoint: `(Φσ, Φσ')`.
pub fn transported_inner_product(frame: &TransportFrame, a: &TwistedSection, b: &TwistedSection) -> Result<C64> {
    phi_inverse(frame, a)?.inner_product(&phi_inverse(frame, b)?)
}

/// Explicit isomorphism between the holonomy-twisted fibers of two
/// connections over the same loop: `σ ↦ T₁(t) T₀(t)⁻¹ σ(t)`, i.e. `j₁ ∘ Φ₀`.
#[derive(Clone, Debug)]
pub struct FiberIsomorphism {
    target: TransportFrame,
    /// `T₁(t_i) T₀(t_i)⁻¹`, acting on the fiber over `γ(t_i)`.
    intertwiner: Vec<CMatrix>,
    /// `T₁(t_i)⁻¹ T₀(t_i)`, the pointwise operator of `Φ₁ ∘ j₀` at the basepoint.
    composite: Vec<CMatrix>,
}

pub fn connection_isomorphism(source: &TransportFrame, target: &TransportFrame) -> Result<FiberIsomorphism> {
    if !source.same_grid(target.base(), target.steps()) || source.n() != target.n() {
        return Err(Error::FrameMismatch);
    }
    let steps = source.steps();
    let intertwiner = par::map(steps + 1, |i| target.at(i) * source.at(i).adjoint());
    let composite = par::map(steps + 1, |i| target.at(i).adjoint() * source.at(i));
    Ok(FiberIsomorphism { target: target.clone(), intertwiner, composite })
}

impl FiberIsomorphism {
    pub fn composite(&self) -> &[CMatrix] {
        &self.composite
    }

    /// Worst pointwise unitarity defect of `Φ₁ ∘ j₀` over the grid.
    pub fn unitarity_defect(&self) -> f64 {
        self.composite
            .iter()
            .chain(&self.intertwiner)
            .map(linalg::unitarity_defect)
            .fold(0.0, f64::max)
    }

    /// `‖G(1) τ₀(γ) − τ₁(γ) G(0)‖_F`: the map carries one twist to the other.
    pub fn intertwining_defect(&self, source: &TransportFrame) -> f64 {
        let steps = self.intertwiner.len() - 1;
        let lhs = &self.intertwiner[steps] * source.holonomy();
        let rhs = self.target.holonomy() * &self.intertwiner[0];
        linalg::frobenius(&(lhs - rhs))
    }

    /// Image of a section of the source fiber in the target fiber.
    pub fn map_section(&self, s: &TwistedSection) -> Result<TwistedSection> {
        if !self.target.same_grid(&s.base, s.steps()) {
            return Err(Error::FrameMismatch);
        }
        Ok(TwistedSection {
            base: s.base.clone(),
            twist: holonomy_table(&self.target),
            samples: s.samples.iter().zip(&self.intertwiner).map(|(x, g)| g * x).collect(),
        })
    }
}
