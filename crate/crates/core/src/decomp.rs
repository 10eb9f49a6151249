//! Fourier decompositions of loop bundles over a finite sample complex.
//!
//! A [`SubspaceFamily`] assigns a filtration subspace `ψ_x ⊂ LCⁿ` to each
//! sample point of a path or cycle, with optional loop-group transitions
//! `c_xy` on edges (`c_xy` carries the trivialization at `x` to the one at
//! `y`). The auditor checks the three axioms of a Fourier decomposition at
//! each point; the reduction conjugates each transition by the unitary loops
//! of its endpoints and certifies the result is constant.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::loopgroup::{loop_from_subspace, LoopGroupElement, UNITARITY_GRID, UNITARITY_TOL};
use crate::par;
use crate::subspace::{expand_filtration, orthonormalize, principal_angles, FiltrationSubspace, SubspaceFrame};

/// Residual allowed for `zψ_P ⊆ ψ_{P+1}`.
pub const Z_INVARIANCE_TOL: f64 = 1e-8;
/// Principal-angle cosine floor between adjacent fibers.
pub const CONTINUITY_COSINE: f64 = 0.9;
/// Allowed `θ`-variation of a reduced transition.
pub const CONSTANCY_TOL: f64 = 1e-6;
/// Tolerance for the cocycle identity on triangles and reversed edges.
pub const COCYCLE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubspaceFamily {
    /// Opaque labels of the sample points.
    pub points: Vec<serde_json::Value>,
    pub edges: Vec<[usize; 2]>,
    pub psi: Vec<FiltrationSubspace>,
    /// One transition per edge, or none at all (trivial bundle). A `null`
    /// entry means the identity.
    #[serde(default)]
    pub transitions: Vec<Option<LoopGroupElement>>,
}

impl SubspaceFamily {
    pub fn from_json(text: &str) -> Result<Self> {
        let fam: Self = serde_json::from_str(text)?;
        fam.validate()?;
        Ok(fam)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Common fiber dimension of all `ψ_x`.
    pub fn n(&self) -> Result<usize> {
        let first = self.psi.first().ok_or(Error::Empty("family fibers"))?;
        let n = first.n()?;
        for p in &self.psi {
            let m = p.n()?;
            if m != n {
                return Err(Error::DimensionMismatch { expected: n, found: m });
            }
        }
        Ok(n)
    }

    /// Transition on edge `e`; the identity if none was given.
    pub fn transition(&self, e: usize) -> Result<LoopGroupElement> {
        match self.transitions.get(e) {
            Some(Some(c)) => Ok(c.clone()),
            _ => Ok(LoopGroupElement::identity(self.n()?)),
        }
    }

    /// Checks shapes, edge indices, transition unitarity and the cocycle
    /// identity on reversed edges and triangles.
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Empty("family points"));
        }
        if self.psi.len() != self.points.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} fibers",
                self.points.len(),
                self.psi.len()
            )));
        }
        let n = self.n()?;
        for &[x, y] in &self.edges {
            if x >= self.len() || y >= self.len() || x == y {
                return Err(Error::InvalidInput(format!("bad edge ({x}, {y})")));
            }
        }
        if !self.transitions.is_empty() && self.transitions.len() != self.edges.len() {
            return Err(Error::InvalidInput(format!(
                "{} edges but {} transitions",
                self.edges.len(),
                self.transitions.len()
            )));
        }
        for c in self.transitions.iter().flatten() {
            if c.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.n() });
            }
            c.validate()?;
        }
        self.check_cocycle()
    }

    fn check_cocycle(&self) -> Result<()> {
        let mut by_edge: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (e, &[x, y]) in self.edges.iter().enumerate() {
            if by_edge.insert((x, y), e).is_some() {
                return Err(Error::InconsistentCocycle(format!("edge ({x}, {y}) listed twice")));
            }
        }
        let n = self.n()?;
        let identity = LoopGroupElement::identity(n);
        let defect = |loops: &[LoopGroupElement]| -> Result<f64> {
            let mut prod = identity.clone();
            for c in loops {
                prod = c.multiply(&prod)?;
            }
            Ok(par::max_f64(UNITARITY_GRID, |j| {
                let m = prod.evaluate(2.0 * PI * j as f64 / UNITARITY_GRID as f64);
                linalg::frobenius(&(m - CMatrix::identity(n, n)))
            }))
        };
        for (&(x, y), &e) in &by_edge {
            if let Some(&r) = by_edge.get(&(y, x)) {
                let d = defect(&[self.transition(e)?, self.transition(r)?])?;
                if d > COCYCLE_TOL {
                    return Err(Error::InconsistentCocycle(format!("c_{y}{x} c_{x}{y} differs from I by {d:e}")));
                }
            }
            for (&(y2, z), &f) in by_edge.range((y, 0)..=(y, usize::MAX)) {
                debug_assert_eq!(y2, y);
                if let Some(&g) = by_edge.get(&(z, x)) {
                    let d = defect(&[self.transition(e)?, self.transition(f)?, self.transition(g)?])?;
                    if d > COCYCLE_TOL {
                        return Err(Error::InconsistentCocycle(format!(
                            "triangle ({x}, {y}, {z}) has holonomy differing from I by {d:e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Signed sum of transition det-windings over all edges.
    pub fn transition_winding(&self) -> Result<i64> {
        let windings = par::try_map(self.edges.len(), |e| self.transition(e)?.det_winding())?;
        Ok(windings.into_iter().sum())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomResult {
    pub passed: bool,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodimensionResult {
    pub passed: bool,
    pub expected: usize,
    pub found: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionResult {
    pub passed: bool,
    pub dimension: usize,
    /// Pointwise unitarity defect of the assembled loop, when one exists.
    pub unitarity_defect: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointAudit {
    pub index: usize,
    pub depth: usize,
    pub z_invariance: AxiomResult,
    pub codimension: CodimensionResult,
    pub intersection: IntersectionResult,
    pub det_winding: Option<i64>,
    /// Names of the failed axioms, empty when the point passes.
    pub failed: Vec<String>,
}

impl PointAudit {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeContinuity {
    pub edge: [usize; 2],
    pub min_cosine: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n: usize,
    pub points: Vec<PointAudit>,
    pub continuity: Vec<EdgeContinuity>,
    /// Every point satisfies all three axioms.
    pub passed: bool,
    pub continuity_passed: bool,
    pub worst_z_invariance: f64,
    pub worst_unitarity: f64,
}

impl AuditReport {
    pub fn first_failure(&self) -> Option<usize> {
        self.points.iter().find(|p| !p.passed()).map(|p| p.index)
    }
}

fn audit_point(index: usize, psi: &FiltrationSubspace, n: usize) -> PointAudit {
    let depth = psi.depth;
    let mut failed = Vec::new();
    let lower = expand_filtration(psi);
    let upper = expand_filtration(&psi.with_depth(depth + 1));

    let z_residual = match (&lower, &upper) {
        (Ok(w), Ok(w1)) => w
            .columns()
            .iter()
            .map(|c| w1.residual(&c.shift(1)).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max),
        _ => f64::INFINITY,
    };
    let z_invariance = AxiomResult { passed: z_residual <= Z_INVARIANCE_TOL, residual: z_residual };
    if !z_invariance.passed {
        failed.push("z_invariance".to_string());
    }

    let found = match (&lower, &upper) {
        (Ok(w), Ok(w1)) => w1.dim().saturating_sub(w.dim()),
        _ => 0,
    };
    let codimension = CodimensionResult { passed: found == n, expected: n, found };
    if !codimension.passed {
        failed.push("codimension".to_string());
    }

    let (intersection, det_winding) = match &lower {
        Err(e) => (
            IntersectionResult { passed: false, dimension: 0, unitarity_defect: None, error: Some(e.to_string()) },
            None,
        ),
        Ok(w) => {
            let dimension = crate::subspace::intersect_shift_complement(w).dim();
            match loop_from_subspace(w) {
                Ok(g) => {
                    let defect = g.unitarity_defect(UNITARITY_GRID).0;
                    let winding = g.det_winding().ok();
                    (
                        IntersectionResult { passed: true, dimension, unitarity_defect: Some(defect), error: None },
                        winding,
                    )
                }
                Err(e) => {
                    let defect = match &e {
                        Error::UnitarityViolation { defect, .. } => Some(*defect),
                        _ => None,
                    };
                    (
                        IntersectionResult { passed: false, dimension, unitarity_defect: defect, error: Some(e.to_string()) },
                        None,
                    )
                }
            }
        }
    };
    if !intersection.passed {
        failed.push("intersection".to_string());
    }

    PointAudit { index, depth, z_invariance, codimension, intersection, det_winding, failed }
}

fn generator_span(generators: &[crate::fourier::TruncatedLoop]) -> Option<SubspaceFrame> {
    orthonormalize(generators).ok()
}

/// Smallest principal-angle cosine between `c_xy ψ_x` and `ψ_y` generator spans.
fn edge_continuity(fam: &SubspaceFamily, e: usize) -> EdgeContinuity {
    let [x, y] = fam.edges[e];
    let min_cosine = (|| -> Option<f64> {
        let c = fam.transition(e).ok()?;
        let moved: Vec<_> = fam.psi[x].generators.iter().map(|g| c.apply(g)).collect::<Result<_>>().ok()?;
        let a = generator_span(&moved)?;
        let b = generator_span(&fam.psi[y].generators)?;
        if a.dim() != b.dim() {
            return Some(0.0);
        }
        let cos = principal_angles(&a, &b).ok()?;
        Some(cos.last().copied().unwrap_or(0.0))
    })()
    .unwrap_or(0.0);
    EdgeContinuity { edge: fam.edges[e], min_cosine, passed: min_cosine >= CONTINUITY_COSINE }
}

/// Checks the Fourier decomposition axioms at every point at its depth `P`:
/// `zψ_P ⊆ ψ_{P+1}`, `dim ψ_{P+1} − dim ψ_P = n`, and
/// `dim(ψ ∩ zψ⊥) = n` with a pointwise unitary generator loop.
pub fn audit_decomposition(fam: &SubspaceFamily) -> Result<AuditReport> {
    fam.validate()?;
    let n = fam.n()?;
    let points = par::map(fam.len(), |i| audit_point(i, &fam.psi[i], n));
    let continuity = par::map(fam.edges.len(), |e| edge_continuity(fam, e));
    let passed = points.iter().all(PointAudit::passed);
    let continuity_passed = continuity.iter().all(|c| c.passed);
    let worst_z_invariance = points.iter().map(|p| p.z_invariance.residual).fold(0.0, f64::max);
    let worst_unitarity = points
        .iter()
        .map(|p| p.intersection.unitarity_defect.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    Ok(AuditReport { n, points, continuity, passed, continuity_passed, worst_z_invariance, worst_unitarity })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedCocycle {
    pub edges: Vec<[usize; 2]>,
    /// Constant unitary `γ_y⁻¹ c_xy γ_x` per edge.
    #[serde(with = "matrix_list")]
    pub transitions: Vec<CMatrix>,
    /// Worst `θ`-variation among the reduced transitions.
    pub max_variation: f64,
    /// Worst unitarity defect among the reduced transitions.
    pub max_unitarity_defect: f64,
    /// Det-winding of the generator loop `γ_x` at each point.
    pub point_windings: Vec<i64>,
}

mod matrix_list {
    use super::CMatrix;
    use crate::loopgroup::{matrix_from_rows, matrix_rows};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
        m.iter().map(matrix_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
        let rows: Vec<Vec<Vec<[f64; 2]>>> = Vec::deserialize(d)?;
        rows.iter().map(|r| matrix_from_rows(r.len(), r)).collect()
    }
}

/// Reduces the structure group to constant unitaries: conjugates every
/// transition by the generator loops of its endpoints and certifies the
/// result is constant in `θ`.
pub fn reduction_cocycle(fam: &SubspaceFamily) -> Result<ReducedCocycle> {
    let report = audit_decomposition(fam)?;
    if let Some(i) = report.first_failure() {
        return Err(Error::AuditFailed(i));
    }
    let gammas = par::try_map(fam.len(), |i| loop_from_subspace(&expand_filtration(&fam.psi[i])?))?;
    let reduced = par::try_map(fam.edges.len(), |e| {
        let [x, y] = fam.edges[e];
        let r = gammas[y].inverse().multiply(&fam.transition(e)?.multiply(&gammas[x])?)?;
        Ok::<_, Error>((r.theta_variation(UNITARITY_GRID), r.evaluate(0.0)))
    })?;
    let mut max_variation: f64 = 0.0;
    for (e, (variation, _)) in reduced.iter().enumerate() {
        if *variation > CONSTANCY_TOL {
            let [from, to] = fam.edges[e];
            return Err(Error::NonConstantReducedTransition {
                from,
                to,
                variation: *variation,
                obstruction: fam.transition_winding()?,
            });
        }
        max_variation = max_variation.max(*variation);
    }
    let transitions: Vec<CMatrix> = reduced.into_iter().map(|(_, m)| m).collect();
    let max_unitarity_defect = transitions.iter().map(linalg::unitarity_defect).fold(0.0, f64::max);
    let point_windings = par::try_map(gammas.len(), |i| gammas[i].det_winding())?;
    Ok(ReducedCocycle { edges: fam.edges.clone(), transitions, max_variation, max_unitarity_defect, point_windings })
}

/// The model family `ψ_x = L₊Cⁿ` (truncated at `depth`) with constant
/// transitions `U_e` on the given edges.
pub fn build_model_decomposition(
    n: usize,
    points: usize,
    edges: &[[usize; 2]],
    cocycle: &[CMatrix],
    depth: usize,
) -> Result<SubspaceFamily> {
    if n == 0 {
        return Err(Error::InvalidInput("fiber dimension must be positive".into()));
    }
    if cocycle.len() != edges.len() {
        return Err(Error::InconsistentCocycle(format!("{} edges but {} transitions", edges.len(), cocycle.len())));
    }
    for u in cocycle {
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::InconsistentCocycle(format!("transition is {}×{}, expected {n}×{n}", u.nrows(), u.ncols())));
        }
        let defect = linalg::unitarity_defect(u);
        if defect > UNITARITY_TOL {
            return Err(Error::InconsistentCocycle(format!("transition is not unitary (defect {defect:e})")));
        }
    }
    let fam = SubspaceFamily {
        points: (0..points).map(serde_json::Value::from).collect(),
        edges: edges.to_vec(),
        psi: vec![FiltrationSubspace::hardy(n, depth); points],
        transitions: cocycle.iter().map(|u| Some(LoopGroupElement::constant(u.clone()))).collect(),
    };
    fam.validate().map_err(|e| match e {
        Error::InconsistentCocycle(_) => e,
        other => Error::InconsistentCocycle(other.to_string()),
    })?;
    Ok(fam)
}

/// `z^{−k} ψ` at every point: a fiberwise increasing filtration in `k`.
pub fn filtration(fam: &SubspaceFamily, k: usize) -> SubspaceFamily {
    SubspaceFamily { psi: fam.psi.iter().map(|p| p.shifted(-(k as i64))).collect(), ..fam.clone() }
}

/// Edges of the cycle `0 → 1 → … → m−1 → 0`.
pub fn cycle_edges(m: usize) -> Vec<[usize; 2]> {
    (0..m).map(|i| [i, (i + 1) % m]).collect()
}

/// Edges of the path `0 → 1 → … → m−1`.
pub fn path_edges(m: usize) -> Vec<[usize; 2]> {
    (1..m).map(|i| [i - 1, i]).collect()
}

/// Whether the edges form a connected graph on `m` points.
pub fn is_connected(m: usize, edges: &[[usize; 2]]) -> bool {
    if m == 0 {
        return true;
    }
    let mut seen = BTreeSet::from([0usize]);
    let mut frontier = vec![0usize];
    while let Some(x) = frontier.pop() {
        for &[a, b] in edges {
            for (u, v) in [(a, b), (b, a)] {
                if u == x && seen.insert(v) {
                    frontier.push(v);
                }
            }
        }
    }
    seen.len() == m
}
