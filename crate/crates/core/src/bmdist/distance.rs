use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::john::john_ellipsoid;
use super::opnorm::op_norm;
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{rows_of, RMat};
use crate::rng::{derive_seed, rng_from_seed};
use crate::spaces::{PolytopalSpace, SpaceKind, MAX_VERTEX_DIM};

pub const DEFAULT_EFFORT: usize = 32;
/// Objective evaluations per local-search restart, per matrix entry.
pub const SEARCH_EVALS_PER_ENTRY: usize = 400;
/// Cell budget of the 2-d oracle before it settles for an interval.
pub const EXACT_2D_MAX_CELLS: usize = 4_000_000;
pub const EXACT_2D_DEFAULT_TOL: f64 = 1e-3;
/// Slack on `‖u‖‖u⁻¹‖ ≥ 1` before an iterate counts as a violation.
const SUBMULT_SLACK: f64 = 1e-9;

/// `(‖u : E → F‖, ‖u⁻¹ : F → E‖)` upper bounds and whether both are exact.
fn distortion(u: &RMat, e: &PolytopalSpace, f: &PolytopalSpace) -> Option<(f64, bool)> {
    let inv = u.clone().try_inverse()?;
    let scale = u.abs().max() * inv.abs().max();
    if !scale.is_finite() || scale > 1e12 {
        return None;
    }
    let fw = op_norm(u, e, f).ok()?;
    let bw = op_norm(&inv, f, e).ok()?;
    Some((fw.upper * bw.upper, fw.is_exact() && bw.is_exact()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperRoute {
    Identity,
    John,
    LocalSearch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BmUpper {
    /// Certified upper bound on the distance.
    pub value: f64,
    pub route: UpperRoute,
    /// Map achieving `value`.
    pub map: Vec<Vec<f64>>,
    /// Whether `value` is `‖u‖‖u⁻¹‖` exactly rather than a bound on it.
    pub exact_norms: bool,
    /// Product of the two John distance bounds, when available.
    pub john_bound: Option<f64>,
    pub restarts: usize,
    pub evaluations: usize,
    /// Iterates with `‖u‖‖u⁻¹‖ < 1` (always 0 for exact norms).
    pub submultiplicativity_violations: usize,
}

struct SearchOutcome {
    value: f64,
    map: RMat,
    exact: bool,
    evaluations: usize,
    violations: usize,
}

/// Derivative-free pattern search on the matrix entries.
fn pattern_search(start: RMat, e: &PolytopalSpace, f: &PolytopalSpace, budget: usize) -> Option<SearchOutcome> {
    let (mut best, mut exact) = distortion(&start, e, f)?;
    let mut u = start;
    let mut evaluations = 1;
    let mut violations = usize::from(exact && best < 1.0 - SUBMULT_SLACK);
    let mut step = 0.25 * u.abs().max();
    let floor = 1e-9 * u.abs().max();
    let len = u.len();
    while step > floor && evaluations < budget {
        let mut improved = false;
        for k in 0..len {
            for sign in [1.0, -1.0] {
                let mut trial = u.clone();
                trial[k] += sign * step;
                evaluations += 1;
                if let Some((v, ex)) = distortion(&trial, e, f) {
                    if ex && v < 1.0 - SUBMULT_SLACK {
                        violations += 1;
                    }
                    if v < best {
                        best = v;
                        exact = ex;
                        u = trial;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Some(SearchOutcome { value: best, map: u, exact, evaluations, violations })
}

/// The map between John positions, `M_F M_E⁻¹`, and the product of the
/// two Euclidean distance bounds.
fn john_route(e: &PolytopalSpace, f: &PolytopalSpace) -> Option<(RMat, f64)> {
    if e.dim() > MAX_VERTEX_DIM {
        return None;
    }
    let je = john_ellipsoid(e).ok()?;
    let jf = john_ellipsoid(f).ok()?;
    let u = jf.shape_matrix() * je.shape_matrix().try_inverse()?;
    Some((u, je.euclidean_distance_bound() * jf.euclidean_distance_bound()))
}

/// Best upper bound on `d(E, F)` from the identity, the John route and
/// `effort` seeded local-search restarts. Restarts run in parallel and
/// reduce to the smallest value, ties going to the lowest restart index.
pub fn bm_upper(e: &PolytopalSpace, f: &PolytopalSpace, effort: usize, seed: u64) -> Result<BmUpper> {
    check_dim(e.dim(), f.dim())?;
    let n = e.dim();
    let id = RMat::identity(n, n);
    let mut best = SearchOutcome { value: f64::INFINITY, map: id.clone(), exact: false, evaluations: 0, violations: 0 };
    let mut route = UpperRoute::Identity;
    if let Some((v, ex)) = distortion(&id, e, f) {
        best = SearchOutcome { value: v, map: id.clone(), exact: ex, evaluations: 1, violations: 0 };
    }
    let john = john_route(e, f);
    let mut evaluations = best.evaluations;
    let mut violations = 0;
    if let Some((u, bound)) = &john {
        if let Some((v, ex)) = distortion(u, e, f) {
            evaluations += 1;
            // the bound and the exact value of the same map are both valid
            let v = v.min(*bound);
            if v < best.value {
                best = SearchOutcome { value: v, map: u.clone(), exact: ex && v < *bound, evaluations: 0, violations: 0 };
                route = UpperRoute::John;
            }
        }
    }
    // local search needs exact norms to move anywhere useful
    let searchable = n <= MAX_VERTEX_DIM && e.kind() != SpaceKind::Composite && f.kind() != SpaceKind::Composite;
    let mut restarts = 0;
    if searchable && effort > 0 {
        let budget = SEARCH_EVALS_PER_ENTRY * n * n;
        let mut starts: Vec<RMat> = vec![id.clone()];
        if let Some((u, _)) = &john {
            starts.push(u.clone());
        }
        for i in 0..effort {
            let mut rng = rng_from_seed(derive_seed(seed, &["bm_upper", "restart"], i as u64));
            starts.push(RMat::from_fn(n, n, |_, _| rng.sample(StandardNormal)));
        }
        restarts = starts.len();
        let outcomes: Vec<Option<SearchOutcome>> =
            starts.into_par_iter().map(|s| pattern_search(s, e, f, budget)).collect();
        for o in outcomes.into_iter().flatten() {
            evaluations += o.evaluations;
            violations += o.violations;
            if o.value < best.value {
                best = o;
                route = UpperRoute::LocalSearch;
            }
        }
    }
    if !best.value.is_finite() {
        return Err(Error::ConstructionFailed("no invertible candidate map".into()));
    }
    if violations > 0 {
        return Err(Error::Validation(format!("{violations} iterates had ||u|| ||u^-1|| < 1")));
    }
    Ok(BmUpper {
        value: best.value,
        route,
        map: rows_of(&best.map),
        exact_norms: best.exact,
        john_bound: john.map(|(_, b)| b),
        restarts,
        evaluations,
        submultiplicativity_violations: violations,
    })
}

/// Result of the 2-d oracle: `lower ≤ d(E, F) ≤ value`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exact2d {
    /// Best `‖u‖‖u⁻¹‖` found (an upper bound, attained by `map`).
    pub value: f64,
    /// Certified lower bound.
    pub lower: f64,
    pub tol: f64,
    /// Whether `value − lower ≤ tol`; otherwise the budget ran out and the
    /// result is the interval `[lower, value]`.
    pub tol_reached: bool,
    pub map: Vec<Vec<f64>>,
    pub cells: usize,
    /// Euclidean distance bounds of the two John positions.
    pub john_factors: (f64, f64),
    /// Largest condition number searched (larger ones cannot be optimal).
    pub kappa_max: f64,
}

impl Exact2d {
    pub fn interval(&self) -> (f64, f64) {
        (self.lower, self.value)
    }
}

fn rot(t: f64) -> RMat {
    let (s, c) = t.sin_cos();
    RMat::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Parameter cell `[α ± hα] × [β ± hβ] × [s ± hs]` with `σ = eˢ`.
#[derive(Debug, Clone, Copy)]
struct Cell {
    center: [f64; 3],
    half: [f64; 3],
    reflect: bool,
    lower: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.lower == other.lower
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    // min-heap on the lower bound
    fn cmp(&self, other: &Self) -> Ordering {
        other.lower.total_cmp(&self.lower)
    }
}

/// Coordinates on invertible 2×2 maps modulo scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chart {
    /// `u = R(θ) J [[a, b], [0, 1]]`, the QR factorization scaled to
    /// `r₂₂ = 1`; `p = (θ, a, b)`. Free of degenerate directions.
    Qr,
    /// `u = R(α) diag(1, eˢ) R(β) J`; `p = (α, β, s)`. Used when an
    /// ellipsoidal side makes one rotation an isometry, which is then fixed
    /// at 0.
    Svd,
}

impl Chart {
    fn matrix(self, p: &[f64; 3], reflect: bool) -> RMat {
        let j = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, if reflect { -1.0 } else { 1.0 }]);
        match self {
            Chart::Qr => rot(p[0]) * j * RMat::from_row_slice(2, 2, &[p[1], p[2], 0.0, 1.0]),
            Chart::Svd => {
                let d = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, p[2].exp()]);
                rot(p[0]) * d * rot(p[1]) * j
            }
        }
    }

    /// Per-axis bounds on `‖u(p) − u(center)‖₂` over the cell; their sum
    /// bounds the total.
    fn widths(self, cell: &Cell) -> [f64; 3] {
        let [c0, c1, c2] = cell.center;
        let [h0, h1, h2] = cell.half;
        match self {
            Chart::Qr => {
                // ‖∂u/∂θ‖ = ‖T‖ ≤ ‖T‖_F
                let t = ((c1.abs() + h1).powi(2) + (c2.abs() + h2).powi(2) + 1.0).sqrt();
                [h0 * t, h1, h2]
            }
            Chart::Svd => {
                let _ = (c0, c1);
                [h0, h1, c2.exp() * h2.exp_m1()]
            }
        }
    }
}

struct Oracle2d<'a> {
    e: &'a PolytopalSpace,
    f: &'a PolytopalSpace,
    r_e: f64,
    r_f: f64,
    chart: Chart,
}

impl Oracle2d<'_> {
    /// `(‖u‖‖u⁻¹‖, lower bound over the cell)`.
    ///
    /// With `B₂ ⊆ B_E ⊆ r_E B₂` and likewise for `F`, a perturbation `Δ`
    /// changes `‖u : E → F‖` by at most `r_E‖Δ‖₂` and `‖u⁻¹ : F → E‖` by at
    /// most `r_F‖Δ(u⁻¹)‖₂`, where `‖Δ(u⁻¹)‖₂ ≤ ‖u⁻¹‖₂²‖Δ‖₂ / (1 − ‖u⁻¹‖₂‖Δ‖₂)`.
    fn evaluate(&self, cell: &Cell) -> Result<(f64, f64)> {
        let u = self.chart.matrix(&cell.center, cell.reflect);
        let inv = u.clone().try_inverse().ok_or_else(|| Error::ConstructionFailed("singular 2-d iterate".into()))?;
        let nf = op_norm(&u, self.e, self.f)?.upper;
        let nb = op_norm(&inv, self.f, self.e)?.upper;
        let value = nf * nb;
        let inv_norm = inv.clone().svd(false, false).singular_values.max();
        let du: f64 = self.chart.widths(cell).iter().sum();
        let mut lower = 1.0;
        if du * inv_norm < 1.0 {
            let dinv = inv_norm * inv_norm * du / (1.0 - inv_norm * du);
            let a = nf - self.r_e * du;
            let b = nb - self.r_f * dinv;
            if a > 0.0 && b > 0.0 {
                lower = (a * b).max(1.0);
            }
        }
        Ok((value, lower.min(value)))
    }
}

/// Banach–Mazur distance of two planar spaces by branch and bound.
///
/// Both spaces are moved to John position (`B₂ ⊆ B ⊆ r B₂`). A map with
/// `‖u‖‖u⁻¹‖ ≤ D₀` then has condition number at most `κ = r_E r_F D₀`,
/// which bounds the chart box. Cells are split along their widest axis
/// until every cell's Lipschitz lower bound is within `tol` of the best
/// value found.
pub fn bm_exact_2d(e: &PolytopalSpace, f: &PolytopalSpace, tol: f64) -> Result<Exact2d> {
    bm_exact_2d_with_budget(e, f, tol, EXACT_2D_MAX_CELLS)
}

pub fn bm_exact_2d_with_budget(e: &PolytopalSpace, f: &PolytopalSpace, tol: f64, max_cells: usize) -> Result<Exact2d> {
    if e.dim() != 2 || f.dim() != 2 {
        return Err(invalid("the exact oracle works in dimension 2 only"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    if e.kind() == SpaceKind::Composite || f.kind() == SpaceKind::Composite {
        return Err(Error::Unsupported("exact oracle needs polytopal or ellipsoidal spaces".into()));
    }
    let je = john_ellipsoid(e)?;
    let jf = john_ellipsoid(f)?;
    let me = je.shape_matrix();
    let mf = jf.shape_matrix();
    let ep = e.pullback(&me)?;
    let fp = f.pullback(&mf)?;
    let r_e = je.euclidean_distance_bound();
    let r_f = jf.euclidean_distance_bound();
    let to_original = |u: &RMat| &mf * u * me.clone().try_inverse().expect("John shape is invertible");

    let id = RMat::identity(2, 2);
    if e.kind() == SpaceKind::Ellipsoidal && f.kind() == SpaceKind::Ellipsoidal {
        return Ok(Exact2d {
            value: 1.0,
            lower: 1.0,
            tol,
            tol_reached: true,
            map: rows_of(&to_original(&id)),
            cells: 0,
            john_factors: (r_e, r_f),
            kappa_max: 1.0,
        });
    }

    let d0 = (r_e * r_f).min(distortion(&id, &ep, &fp).map_or(f64::INFINITY, |v| v.0));
    let kappa = r_e * r_f * d0;
    let alpha_free = fp.kind() != SpaceKind::Ellipsoidal;
    let beta_free = ep.kind() != SpaceKind::Ellipsoidal;
    let chart = if alpha_free && beta_free { Chart::Qr } else { Chart::Svd };
    let oracle = Oracle2d { e: &ep, f: &fp, r_e, r_f, chart };

    // root grid: (lo, hi, cells) per axis
    let axes: [(f64, f64, usize); 3] = match chart {
        // a = det T ∈ [1/κ, κ], |b| ≤ σ_max ≤ κ
        Chart::Qr => [(0.0, PI, 8), (1.0 / kappa, kappa, 8), (-kappa, kappa, 8)],
        Chart::Svd => [
            if alpha_free { (0.0, PI, 16) } else { (0.0, 0.0, 1) },
            if beta_free { (0.0, PI, 16) } else { (0.0, 0.0, 1) },
            (-kappa.ln(), 0.0, 8),
        ],
    };
    // an ellipsoidal side also absorbs the reflection
    let reflections: &[bool] = if chart == Chart::Qr { &[false, true] } else { &[false] };

    let mut heap = BinaryHeap::new();
    let mut best_value = f64::INFINITY;
    let mut best_map = id.clone();
    let mut cells = 0usize;
    // cells already within tol are settled: best only decreases, so they stay settled
    let mut settled_lower = f64::INFINITY;
    let mut consider = |cell: Cell, heap: &mut BinaryHeap<Cell>, best_value: &mut f64, best_map: &mut RMat| -> Result<()> {
        let (value, lower) = oracle.evaluate(&cell)?;
        if value < *best_value {
            *best_value = value;
            *best_map = chart.matrix(&cell.center, cell.reflect);
        }
        if lower >= *best_value - tol {
            settled_lower = settled_lower.min(lower);
        } else {
            heap.push(Cell { lower, ..cell });
        }
        Ok(())
    };
    let half: [f64; 3] = std::array::from_fn(|k| (axes[k].1 - axes[k].0) / (2.0 * axes[k].2 as f64));
    for &reflect in reflections {
        for i in 0..axes[0].2 {
            for j in 0..axes[1].2 {
                for k in 0..axes[2].2 {
                    let idx = [i, j, k];
                    let center: [f64; 3] = std::array::from_fn(|a| axes[a].0 + (2 * idx[a] + 1) as f64 * half[a]);
                    cells += 1;
                    consider(Cell { center, half, reflect, lower: 0.0 }, &mut heap, &mut best_value, &mut best_map)?;
                }
            }
        }
    }
    let mut open_lower = f64::INFINITY;
    while let Some(cell) = heap.pop() {
        if cell.lower >= best_value - tol {
            open_lower = cell.lower;
            break;
        }
        if cells >= max_cells {
            open_lower = cell.lower;
            break;
        }
        let widths = chart.widths(&cell);
        let axis = (0..3).max_by(|&a, &b| widths[a].total_cmp(&widths[b])).expect("three axes");
        for side in [-1.0, 1.0] {
            let mut child = cell;
            child.half[axis] *= 0.5;
            child.center[axis] += side * child.half[axis];
            cells += 1;
            consider(child, &mut heap, &mut best_value, &mut best_map)?;
        }
    }
    let lower = open_lower.min(settled_lower).min(best_value);
    let tol_reached = lower >= best_value - tol;
    // local polish of the best map
    if let Some(polished) = pattern_search(best_map.clone(), &ep, &fp, 4000) {
        if polished.value < best_value {
            best_value = polished.value;
            best_map = polished.map;
        }
    }
    Ok(Exact2d {
        value: best_value.max(1.0),
        lower: lower.max(1.0).min(best_value.max(1.0)),
        tol,
        tol_reached,
        map: rows_of(&to_original(&best_map)),
        cells,
        john_factors: (r_e, r_f),
        kappa_max: kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hexagon() -> PolytopalSpace {
        let fs = (0..3)
            .map(|k| {
                let t = k as f64 * PI / 3.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        PolytopalSpace::polytopal(2, fs, "hexagon").unwrap()
    }

    #[test]
    fn diamond_and_square_are_isometric() {
        let r = bm_exact_2d(&PolytopalSpace::l_1(2).unwrap(), &PolytopalSpace::l_inf(2), 1e-3).unwrap();
        assert!(r.tol_reached);
        assert!((r.value - 1.0).abs() <= 1e-3, "{r:?}");
    }

    #[test]
    fn disc_to_square_is_sqrt_two() {
        let r = bm_exact_2d(&PolytopalSpace::l_2(2), &PolytopalSpace::l_inf(2), 1e-3).unwrap();
        assert!(r.tol_reached);
        assert!((r.value - 2f64.sqrt()).abs() <= 1e-3, "{r:?}");
        assert!(r.lower >= 2f64.sqrt() - 1e-3);
        let back = bm_exact_2d(&PolytopalSpace::l_inf(2), &PolytopalSpace::l_2(2), 1e-3).unwrap();
        assert!((back.value - r.value).abs() <= 1e-3);
    }

    #[test]
    fn hexagon_to_square_and_back() {
        let h = hexagon();
        let sq = PolytopalSpace::l_inf(2);
        let a = bm_exact_2d(&h, &sq, 1e-3).unwrap();
        let b = bm_exact_2d(&sq, &h, 1e-3).unwrap();
        assert!(a.tol_reached && b.tol_reached);
        assert!((a.value - b.value).abs() <= 1e-3, "{} vs {}", a.value, b.value);
        assert!(a.value > 1.01);
        let up = bm_upper(&h, &sq, 8, 1).unwrap();
        assert!(up.value >= a.lower - 1e-12);
    }

    #[test]
    fn self_distance_is_one() {
        for s in [PolytopalSpace::l_inf(2), hexagon(), PolytopalSpace::l_2(2)] {
            let r = bm_exact_2d(&s, &s, 1e-3).unwrap();
            assert!((r.value - 1.0).abs() <= 1e-3);
            let u = bm_upper(&s, &s, 0, 0).unwrap();
            assert_eq!(u.value, 1.0);
        }
    }

    #[test]
    fn upper_routes_on_planar_pairs() {
        let l1 = PolytopalSpace::l_1(2).unwrap();
        let sq = PolytopalSpace::l_inf(2);
        let u = bm_upper(&l1, &sq, 4, 7).unwrap();
        assert!(u.value <= 1.0 + 1e-3, "{u:?}");
        let u = bm_upper(&PolytopalSpace::l_2(2), &sq, 4, 7).unwrap();
        assert!(u.value <= 2f64.sqrt() + 1e-3, "{u:?}");
        assert!(u.value >= 2f64.sqrt() - 1e-9);
    }

    #[test]
    fn tiny_budget_returns_interval() {
        let r = bm_exact_2d_with_budget(&hexagon(), &PolytopalSpace::l_inf(2), 1e-6, 600).unwrap();
        assert!(!r.tol_reached);
        assert!(r.lower <= r.value);
    }
}
