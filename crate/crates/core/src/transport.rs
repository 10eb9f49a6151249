//! Connections on a chart, parallel transport along loops, holonomy.
//!
//! A base loop is a 1-periodic curve `t ↦ x(t)` in an open chart of `R^d`.
//! Transport solves `T'(t) = −A(x(t), x'(t)) T(t)`, `T(0) = I`, with classical
//! RK4 on a uniform grid, projecting back onto `U(n)` after every step.
//!
//! Preset sign conventions: both abelian presets use `A = −i·a` with `a`
//! a real 1-form of positive flux, so a counterclockwise loop enclosing flux
//! `Φ` has holonomy `e^{iΦ}`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::BufRead;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, I};
use crate::loopgroup::accumulate_winding;
use crate::par;

/// Default transport grid.
pub const DEFAULT_STEPS: usize = 2048;
pub const MIN_STEPS: usize = 16;
/// Tolerated anti-Hermitian defect of a connection value.
pub const ANTI_HERMITIAN_TOL: f64 = 1e-10;

pub type CurveFn = dyn Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync;

#[derive(Clone)]
enum Path {
    Analytic(Arc<CurveFn>),
    /// Uniform samples at `t_i = i/m`, Catmull–Rom interpolated.
    Sampled(Arc<Vec<Vec<f64>>>),
}

/// A 1-periodic loop in a chart of `R^d`, possibly rotated by a phase.
#[derive(Clone)]
pub struct BaseLoop {
    dim: usize,
    path: Path,
    phase: f64,
}

impl std::fmt::Debug for BaseLoop {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.path {
            Path::Analytic(_) => "analytic".to_string(),
            Path::Sampled(p) => format!("sampled({})", p.len()),
        };
        f.debug_struct("BaseLoop").field("dim", &self.dim).field("path", &kind).field("phase", &self.phase).finish()
    }
}

impl BaseLoop {
    /// Loop from a callback `t ↦ (x(t), x'(t))` of period 1.
    pub fn analytic<F>(dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidInput("chart dimension must be at least 1".into()));
        }
        let (x0, v0) = f(0.0);
        let (x1, _) = f(1.0);
        if x0.len() != dim || v0.len() != dim {
            return Err(Error::ChartDimension { expected: dim, found: x0.len() });
        }
        let gap = x0.iter().zip(&x1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if gap > 1e-12 {
            return Err(Error::InvalidInput(format!("loop is not closed: |x(1) - x(0)| = {gap:e}")));
        }
        Ok(Self { dim, path: Path::Analytic(Arc::new(f)), phase: 0.0 })
    }

    /// Loop through uniform samples `points[i] = x(i/m)`.
    pub fn sampled(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::InvalidInput("a sampled loop needs at least 4 points".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("chart dimension must be at least 1".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::ChartDimension { expected: dim, found: p.len() });
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("loop samples must be finite".into()));
        }
        Ok(Self { dim, path: Path::Sampled(Arc::new(points)), phase: 0.0 })
    }

    /// Reads the CSV loop format: header `t,x1,...,xd`, rows at `t = i/m`.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or(Error::InvalidInput("empty loop CSV".into()))?
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let dim = cols.len().saturating_sub(1);
        if cols.first() != Some(&"t") || dim == 0 || cols[1..].iter().enumerate().any(|(i, c)| *c != format!("x{}", i + 1)) {
            return Err(Error::InvalidInput(format!("bad loop CSV header {header:?}")));
        }
        let mut ts = Vec::new();
        let mut points = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::InvalidInput(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::InvalidInput(format!("row {}: {e}", row + 1)))?;
            if vals.len() != dim + 1 {
                return Err(Error::InvalidInput(format!("row {}: expected {} fields", row + 1, dim + 1)));
            }
            ts.push(vals[0]);
            points.push(vals[1..].to_vec());
        }
        let m = ts.len() as f64;
        for (i, t) in ts.iter().enumerate() {
            if (t - i as f64 / m).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "row {}: t = {t} is not on the uniform grid i/{}",
                    i + 1,
                    ts.len()
                )));
            }
        }
        Self::sampled(points)
    }

    /// Counterclockwise circle of radius `r` about `center`.
    pub fn circle(center: [f64; 2], r: f64) -> Self {
        Self::ellipse(center, r, r)
    }

    pub fn ellipse(center: [f64; 2], a: f64, b: f64) -> Self {
        let f = move |t: f64| {
            let w = 2.0 * PI;
            let (s, c) = (w * t).sin_cos();
            (vec![center[0] + a * c, center[1] + b * s], vec![-a * w * s, b * w * c])
        };
        Self { dim: 2, path: Path::Analytic(Arc::new(f)), phase: 0.0 }
    }

    /// Counterclockwise square of side `side` with lower-left corner `corner`,
    /// traversed at unit speed per quarter period.
    pub fn square(corner: [f64; 2], side: f64) -> Self {
        let f = move |t: f64| {
            let t = t.rem_euclid(1.0);
            let q = (4.0 * t).floor().min(3.0);
            let s = 4.0 * t - q;
            let v = 4.0 * side;
            let [x0, y0] = corner;
            match q as u8 {
                0 => (vec![x0 + side * s, y0], vec![v, 0.0]),
                1 => (vec![x0 + side, y0 + side * s], vec![0.0, v]),
                2 => (vec![x0 + side * (1.0 - s), y0 + side], vec![-v, 0.0]),
                _ => (vec![x0, y0 + side * (1.0 - s)], vec![0.0, -v]),
            }
        };
        Self { dim: 2, path: Path::Analytic(Arc::new(f)), phase: 0.0 }
    }

    pub fn constant(point: Vec<f64>) -> Self {
        let dim = point.len();
        let f = move |_t: f64| (point.clone(), vec![0.0; dim]);
        Self { dim, path: Path::Analytic(Arc::new(f)), phase: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// `(x(t), x'(t))` of the (rotated) loop.
    pub fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let t = t + self.phase;
        match &self.path {
            Path::Analytic(f) => f(t.rem_euclid(1.0)),
            Path::Sampled(pts) => catmull_rom(pts, t),
        }
    }

    pub fn basepoint(&self) -> Vec<f64> {
        self.eval(0.0).0
    }

    /// The loop `s ↦ x(s + t)`.
    pub fn rotated(&self, t: f64) -> Self {
        Self { dim: self.dim, path: self.path.clone(), phase: (self.phase + t).rem_euclid(1.0) }
    }

    /// Whether both values describe the same underlying loop with the same rotation.
    pub fn same_loop(&self, other: &Self) -> bool {
        let same_path = match (&self.path, &other.path) {
            (Path::Analytic(a), Path::Analytic(b)) => Arc::ptr_eq(a, b),
            (Path::Sampled(a), Path::Sampled(b)) => Arc::ptr_eq(a, b),
            _ => false,
        };
        let d = (self.phase - other.phase).rem_euclid(1.0);
        same_path && d.min(1.0 - d) < 1e-12
    }
}

fn catmull_rom(points: &[Vec<f64>], t: f64) -> (Vec<f64>, Vec<f64>) {
    let m = points.len();
    let u = t.rem_euclid(1.0) * m as f64;
    let i = (u.floor() as usize).min(m - 1);
    let s = u - i as f64;
    let p = |k: isize| &points[(i as isize + k).rem_euclid(m as isize) as usize];
    let (p0, p1, p2, p3) = (p(-1), p(0), p(1), p(2));
    let mut x = Vec::with_capacity(p1.len());
    let mut v = Vec::with_capacity(p1.len());
    for c in 0..p1.len() {
        let a0 = 2.0 * p1[c];
        let a1 = -p0[c] + p2[c];
        let a2 = 2.0 * p0[c] - 5.0 * p1[c] + 4.0 * p2[c] - p3[c];
        let a3 = -p0[c] + 3.0 * p1[c] - 3.0 * p2[c] + p3[c];
        x.push(0.5 * (a0 + s * (a1 + s * (a2 + s * a3))));
        v.push(0.5 * m as f64 * (a1 + s * (2.0 * a2 + s * 3.0 * a3)));
    }
    (x, v)
}

pub type FormFn = dyn Fn(&[f64], &[f64]) -> CMatrix + Send + Sync;

/// A `u(n)`-valued 1-form `A(x, v)` on a chart of `R^d`, linear in `v`.
#[derive(Clone)]
pub struct ConnectionSpec {
    n: usize,
    d: usize,
    name: String,
    form: Arc<FormFn>,
}

impl std::fmt::Debug for ConnectionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConnectionSpec").field("name", &self.name).field("n", &self.n).field("d", &self.d).finish()
    }
}

fn pauli() -> [CMatrix; 3] {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    [
        CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        CMatrix::from_row_slice(2, 2, &[o, -I, I, o]),
        CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
    ]
}

impl ConnectionSpec {
    pub fn custom<F>(name: impl Into<String>, n: usize, d: usize, form: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> CMatrix + Send + Sync + 'static,
    {
        Self { n, d, name: name.into(), form: Arc::new(form) }
    }

    /// `A = 0`.
    pub fn flat(n: usize, d: usize) -> Self {
        Self::custom("flat", n, d, move |_, _| CMatrix::zeros(n, n))
    }

    /// Constant field `B` on the plane: `A = −(iB/2)(x dy − y dx)`.
    ///
    /// A counterclockwise circle of radius `r` has holonomy `e^{iBπr²}`.
    pub fn abelian2d(b: f64) -> Self {
        Self::custom("abelian2d", 1, 2, move |x, v| {
            let w = x[0] * v[1] - x[1] * v[0];
            CMatrix::from_element(1, 1, -I * (0.5 * b * w))
        })
    }

    /// Charge-`q` monopole on `S²` minus the north pole, in stereographic
    /// coordinates centered at the south pole:
    /// `A = −iq (x dy − y dx)/(1 + x² + y²)`, regular on the whole chart.
    ///
    /// The circle of radius `ρ` about the origin has holonomy
    /// `exp(iqΩ/2)`, `Ω = 4πρ²/(1 + ρ²)` the solid angle of the cap it
    /// bounds around the chart origin.
    pub fn monopole(q: i64) -> Self {
        let q = q as f64;
        Self::custom("monopole", 1, 2, move |x, v| {
            let w = x[0] * v[1] - x[1] * v[0];
            let r2 = x[0] * x[0] + x[1] * x[1];
            CMatrix::from_element(1, 1, -I * (q * w / (1.0 + r2)))
        })
    }

    /// A fixed non-abelian `su(2)`-valued polynomial 1-form on `R²`:
    ///
    /// `A_x = i(0.5σ₁ + 0.3yσ₃ + 0.2xσ₂)`, `A_y = i(0.4σ₂ − 0.3xσ₃ + 0.25xyσ₁)`.
    pub fn su2_sample() -> Self {
        let [s1, s2, s3] = pauli();
        Self::custom("su2sample", 2, 2, move |x, v| {
            let (px, py) = (x[0], x[1]);
            let ax = (&s1 * C64::new(0.5, 0.0) + &s3 * C64::new(0.3 * py, 0.0) + &s2 * C64::new(0.2 * px, 0.0)) * I;
            let ay = (&s2 * C64::new(0.4, 0.0) - &s3 * C64::new(0.3 * px, 0.0) + &s1 * C64::new(0.25 * px * py, 0.0)) * I;
            ax * C64::new(v[0], 0.0) + ay * C64::new(v[1], 0.0)
        })
    }

    /// `A + δ` on the same chart and bundle.
    pub fn perturbed(&self, delta: &ConnectionSpec) -> Result<Self> {
        if self.n != delta.n || self.d != delta.d {
            return Err(Error::DimensionMismatch { expected: self.n, found: delta.n });
        }
        let (a, b) = (self.form.clone(), delta.form.clone());
        Ok(Self {
            n: self.n,
            d: self.d,
            name: format!("{}+{}", self.name, delta.name),
            form: Arc::new(move |x, v| a(x, v) + b(x, v)),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &[f64], v: &[f64]) -> CMatrix {
        (self.form)(x, v)
    }

    fn eval_checked(&self, base: &BaseLoop, t: f64) -> Result<CMatrix> {
        let (x, v) = base.eval(t);
        let a = self.eval(&x, &v);
        let defect = linalg::anti_hermitian_defect(&a);
        if defect > ANTI_HERMITIAN_TOL || !defect.is_finite() {
            return Err(Error::NotAntiHermitian { defect, t });
        }
        Ok(a)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TransportOptions {
    /// Project onto `U(n)` after each step.
    pub reunitarize: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { reunitarize: true }
    }
}

/// `T(t_i) = τ^{[0, t_i]}` on the grid `t_i = i/N`, `i = 0..=N`.
#[derive(Clone, Debug)]
pub struct TransportFrame {
    connection: ConnectionSpec,
    base: BaseLoop,
    frames: Vec<CMatrix>,
    raw_defect: f64,
}

fn check_setup(conn: &ConnectionSpec, base: &BaseLoop, steps: usize) -> Result<()> {
    if conn.d != base.dim {
        return Err(Error::ChartDimension { expected: conn.d, found: base.dim });
    }
    if steps < MIN_STEPS {
        return Err(Error::GridTooSmall(steps));
    }
    Ok(())
}

/// One RK4 step of `T' = −A T` from `t` to `t + h`; returns the new value
/// and its unitarity defect before any correction.
fn rk4_step(conn: &ConnectionSpec, base: &BaseLoop, t: f64, h: f64, y: &CMatrix) -> Result<CMatrix> {
    let a0 = conn.eval_checked(base, t)?;
    let am = conn.eval_checked(base, t + 0.5 * h)?;
    let a1 = conn.eval_checked(base, t + h)?;
    let half = C64::new(0.5 * h, 0.0);
    let k1 = -(&a0 * y);
    let k2 = -(&am * (y + &k1 * half));
    let k3 = -(&am * (y + &k2 * half));
    let k4 = -(&a1 * (y + &k3 * C64::new(h, 0.0)));
    Ok(y + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0))
}

/// Transport along the loop from parameter `t0` to `t1` (either order) in
/// `steps` RK4 steps, without storing the intermediate frames.
pub fn transport_segment(conn: &ConnectionSpec, base: &BaseLoop, t0: f64, t1: f64, steps: usize) -> Result<CMatrix> {
    check_setup(conn, base, steps.max(MIN_STEPS))?;
    if steps == 0 {
        return Err(Error::GridTooSmall(0));
    }
    let h = (t1 - t0) / steps as f64;
    let mut y = CMatrix::identity(conn.n, conn.n);
    for i in 0..steps {
        y = linalg::polar_unitary(&rk4_step(conn, base, t0 + i as f64 * h, h, &y)?);
    }
    Ok(y)
}

pub fn parallel_transport(conn: &ConnectionSpec, base: &BaseLoop, steps: usize) -> Result<TransportFrame> {
    parallel_transport_with(conn, base, steps, TransportOptions::default())
}

pub fn parallel_transport_with(
    conn: &ConnectionSpec,
    base: &BaseLoop,
    steps: usize,
    opts: TransportOptions,
) -> Result<TransportFrame> {
    check_setup(conn, base, steps)?;
    let h = 1.0 / steps as f64;
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(CMatrix::identity(conn.n, conn.n));
    let mut raw_defect: f64 = 0.0;
    for i in 0..steps {
        let next = rk4_step(conn, base, i as f64 * h, h, &frames[i])?;
        raw_defect = raw_defect.max(linalg::unitarity_defect(&next));
        frames.push(if opts.reunitarize { linalg::polar_unitary(&next) } else { next });
    }
    Ok(TransportFrame { connection: conn.clone(), base: base.clone(), frames, raw_defect })
}

/// `τ_α(γ) = T(1)`.
pub fn holonomy(conn: &ConnectionSpec, base: &BaseLoop, steps: usize) -> Result<CMatrix> {
    Ok(parallel_transport(conn, base, steps)?.holonomy().clone())
}

impl TransportFrame {
    pub fn connection(&self) -> &ConnectionSpec {
        &self.connection
    }

    pub fn base(&self) -> &BaseLoop {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.connection.n
    }

    /// Grid size `N`.
    pub fn steps(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn frames(&self) -> &[CMatrix] {
        &self.frames
    }

    pub fn at(&self, i: usize) -> &CMatrix {
        &self.frames[i]
    }

    pub fn holonomy(&self) -> &CMatrix {
        self.frames.last().expect("frame has N + 1 entries")
    }

    /// Largest per-step unitarity defect of the RK4 update before projection.
    pub fn raw_unitarity_defect(&self) -> f64 {
        self.raw_defect
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.frames.iter().map(linalg::unitarity_defect).fold(0.0, f64::max)
    }

    /// `T` at grid index `m` of the periodic lift, any `m ∈ (−N, 2N]`,
    /// using `T(t + 1) = T(t)·Hol`.
    pub fn lifted(&self, m: i64) -> CMatrix {
        let n = self.steps() as i64;
        if m < 0 {
            &self.frames[(m + n) as usize] * self.holonomy().adjoint()
        } else if m > n {
            &self.frames[(m - n) as usize] * self.holonomy()
        } else {
            self.frames[m as usize].clone()
        }
    }

    /// Grid index of `t`, if `t` lies on the grid.
    pub fn grid_index(&self, t: f64) -> Result<usize> {
        let n = self.steps();
        let u = t * n as f64;
        let i = u.round();
        if (u - i).abs() > 1e-9 || i < 0.0 || i > n as f64 {
            return Err(Error::OffGrid { t, grid: n });
        }
        Ok(i as usize)
    }

    /// Holonomy of the rotated loop `tγ`, `τ(tγ) = T(t)·Hol·T(t)⁻¹`.
    pub fn rotated_twist(&self, t: f64) -> Result<CMatrix> {
        Ok(self.rotated_twist_at(self.grid_index(t)?))
    }

    pub fn rotated_twist_at(&self, i: usize) -> CMatrix {
        let ti = &self.frames[i];
        ti * self.holonomy() * ti.adjoint()
    }

    /// Frame of the rotated loop `(k/N)γ`, derived from this one:
    /// `T'(s) = T(s + k/N)·T(k/N)⁻¹`.
    pub fn rotated(&self, k: i64) -> TransportFrame {
        let n = self.steps() as i64;
        let shift_inv = self.lifted(k).adjoint();
        let frames = (0..=n).map(|i| self.lifted(i + k) * &shift_inv).collect();
        TransportFrame {
            connection: self.connection.clone(),
            base: self.base.rotated(k as f64 / n as f64),
            frames,
            raw_defect: self.raw_defect,
        }
    }

    /// Whether `other` was built over the same loop and grid.
    pub fn same_grid(&self, base: &BaseLoop, steps: usize) -> bool {
        self.steps() == steps && self.base.same_loop(base)
    }
}

/// A one-parameter family of loops `s ↦ γ_s`, `s ∈ [0, 1]`, whose ends are
/// constant loops (so the family sweeps a closed surface).
pub trait LoopFamily: Sync {
    fn loop_at(&self, s: f64) -> BaseLoop;
}

/// Circles of radius `tan(πs/2)` about the chart origin: a constant loop at
/// `s = 0`, exhausting the chart as `s → 1` (the constant loop at the
/// excluded point).
#[derive(Clone, Copy, Debug, Default)]
pub struct LatitudeFamily;

impl LatitudeFamily {
    pub fn radius(s: f64) -> f64 {
        (FRAC_PI_2 * s).tan()
    }
}

impl LoopFamily for LatitudeFamily {
    fn loop_at(&self, s: f64) -> BaseLoop {
        if s <= 0.0 {
            BaseLoop::constant(vec![0.0, 0.0])
        } else {
            BaseLoop::circle([0.0, 0.0], Self::radius(s))
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChernReport {
    pub winding: i64,
    /// `(s_j, h(s_j))` for `j = 0..=M`.
    pub samples: Vec<(f64, C64)>,
}

/// Finest family resolution tried by [`chern_winding`].
pub const MAX_FAMILY_GRID: usize = 1 << 12;

/// Winding number of `s ↦ Hol(γ_s) ∈ U(1)` over a closed family.
///
/// The end loops are constant, so `h(0) = h(1) = 1`; interior samples are
/// transported independently. The family grid is doubled until every phase
/// step is below π/2.
pub fn chern_winding(conn: &ConnectionSpec, family: &dyn LoopFamily, steps: usize, m: usize) -> Result<ChernReport> {
    if conn.n != 1 {
        return Err(Error::NonScalar(conn.n));
    }
    let mut m = m.max(2);
    loop {
        let interior = par::try_map(m - 1, |j| {
            let s = (j + 1) as f64 / m as f64;
            holonomy(conn, &family.loop_at(s), steps).map(|h| h[(0, 0)])
        })?;
        let one = C64::new(1.0, 0.0);
        let values: Vec<C64> = std::iter::once(one).chain(interior).collect();
        match accumulate_winding(&values) {
            Ok(winding) => {
                let samples = values
                    .iter()
                    .chain(std::iter::once(&one))
                    .enumerate()
                    .map(|(j, h)| (j as f64 / m as f64, *h))
                    .collect();
                return Ok(ChernReport { winding, samples });
            }
            Err(step) if m >= MAX_FAMILY_GRID => return Err(Error::PhaseStepTooLarge { step, grid: m }),
            Err(_) => m *= 2,
        }
    }
}
