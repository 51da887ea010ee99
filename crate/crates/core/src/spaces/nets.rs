//! Nets in unit balls, nets of subspaces, and ℓ∞ embeddings.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{auerbach_basis, PolytopalSpace, SpaceKind};
use crate::error::{invalid, Error, Result};
use crate::linalg::RMat;
use crate::rng::{derive_seed, rng_from_seed};

/// Guard on the volumetric bound `(1 + 2/ξ)ⁿ`.
pub const NET_GUARD: f64 = 1e6;
/// Guard on the number of enumerated n-tuples of net points.
pub const SUBSPACE_TUPLE_GUARD: f64 = 1e6;
const GRID_POINT_BUDGET: f64 = 400_000.0;
const MAX_GRID_DIM: usize = 3;
const RANDOM_POOL: usize = 50_000;

/// A norm that nets can be built in.
pub trait NormOracle {
    fn dim(&self) -> usize;
    fn norm_of(&self, a: &[f64]) -> f64;
    /// Half-widths of the unit ball along the coordinate axes.
    fn widths(&self) -> Result<Vec<f64>>;
    /// Extreme points to place first in the candidate pool.
    fn extreme_candidates(&self) -> Vec<Vec<f64>>;
}

impl NormOracle for PolytopalSpace {
    fn dim(&self) -> usize {
        PolytopalSpace::dim(self)
    }

    fn norm_of(&self, a: &[f64]) -> f64 {
        self.eval(a)
    }

    fn widths(&self) -> Result<Vec<f64>> {
        self.half_widths()
    }

    fn extreme_candidates(&self) -> Vec<Vec<f64>> {
        match self.kind() {
            SpaceKind::Polytopal => self.vertices().map(<[Vec<f64>]>::to_vec).unwrap_or_default(),
            _ => Vec::new(),
        }
    }
}

/// The unit ball of the dual `E*`, with the dual norm.
pub struct DualBall<'a>(pub &'a PolytopalSpace);

impl NormOracle for DualBall<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn norm_of(&self, f: &[f64]) -> f64 {
        self.0.dual_norm(f).expect("dual norm checked when the dual ball was built")
    }

    fn widths(&self) -> Result<Vec<f64>> {
        let n = self.0.dim();
        match self.0.kind() {
            // the dual ball is the hull of ±φᵢ
            SpaceKind::Polytopal => {
                Ok((0..n).map(|k| self.0.functionals().iter().map(|f| f[k].abs()).fold(0.0, f64::max)).collect())
            }
            // dual norm ‖L⁻ᵀ f‖₂, so f = Lᵀ g with ‖g‖ ≤ 1
            SpaceKind::Ellipsoidal => {
                let l = self.0.euclidean_matrix().expect("ellipsoidal space has L");
                Ok((0..n).map(|k| l.column(k).norm()).collect())
            }
            SpaceKind::Composite => Err(Error::Unsupported("dual ball of a composite space".into())),
        }
    }

    fn extreme_candidates(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let rows: Vec<Vec<f64>> = match self.0.kind() {
            SpaceKind::Polytopal => self.0.functionals().to_vec(),
            SpaceKind::Ellipsoidal => {
                let l = self.0.euclidean_matrix().expect("ellipsoidal space has L");
                (0..l.nrows()).map(|i| l.row(i).iter().copied().collect()).collect()
            }
            SpaceKind::Composite => Vec::new(),
        };
        for r in rows {
            let neg: Vec<f64> = r.iter().map(|x| -x).collect();
            out.push(r);
            out.push(neg);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Grid,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetOptions {
    pub seed: u64,
    /// Grid spacing as a fraction of ξ (grid pools only).
    pub grid_fraction: f64,
    pub random_pool: usize,
}

impl Default for NetOptions {
    fn default() -> Self {
        NetOptions { seed: 0, grid_fraction: 0.25, random_pool: RANDOM_POOL }
    }
}

/// A greedy maximal ξ-separated subset of a candidate pool in the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallNet {
    pub dim: usize,
    pub xi: f64,
    pub points: Vec<Vec<f64>>,
    pub pool_size: usize,
    pub pool: PoolKind,
    /// Grid spacing of the pool (0 for random pools). Maximality only holds
    /// relative to the pool, so off-pool points are covered within
    /// `ξ + resolution·(norm of a half grid cell)`.
    pub resolution: f64,
    /// `(1 + 2/ξ)ⁿ`.
    pub cardinality_bound: f64,
}

fn grid_pool(widths: &[f64], step: f64) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = widths
        .iter()
        .map(|&w| {
            let k = (w / step).floor() as i64;
            (-k..=k).map(|i| i as f64 * step).collect()
        })
        .collect();
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    out
}

fn distance(oracle: &dyn NormOracle, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    oracle.norm_of(&d)
}

/// Greedy ξ-separated set (pairwise distance `> ξ`) that is maximal in its
/// candidate pool, hence a ξ-net of the pool. Extreme points of the ball are
/// offered first; dimension ≤ 3 then uses a grid, higher dimensions a
/// seeded uniform sample of the ball.
pub fn ball_net(oracle: &dyn NormOracle, xi: f64, opts: &NetOptions) -> Result<BallNet> {
    let n = oracle.dim();
    if !(xi > 0.0) {
        return Err(invalid(format!("mesh xi must be positive, got {xi}")));
    }
    let bound = (1.0 + 2.0 / xi).powi(n as i32);
    if bound > NET_GUARD {
        return Err(Error::ResourceGuard(format!("(1 + 2/xi)^n = {bound:.3e} exceeds {NET_GUARD:e}")));
    }
    let widths = oracle.widths()?;
    let mut pool: Vec<Vec<f64>> =
        oracle.extreme_candidates().into_iter().filter(|p| oracle.norm_of(p) <= 1.0 + 1e-12).collect();
    let mut resolution = 0.0;
    let kind = if n <= MAX_GRID_DIM {
        let mut step = xi * opts.grid_fraction;
        let count = |s: f64| widths.iter().map(|w| 2.0 * (w / s).floor() + 1.0).product::<f64>();
        while count(step) > GRID_POINT_BUDGET {
            step *= 1.25;
        }
        pool.extend(grid_pool(&widths, step).into_iter().filter(|p| oracle.norm_of(p) <= 1.0));
        resolution = step;
        PoolKind::Grid
    } else {
        let mut rng = rng_from_seed(derive_seed(opts.seed, &["spaces", "ball_net"], 0));
        let mut drawn = 0;
        let mut attempts = 0usize;
        while drawn < opts.random_pool {
            attempts += 1;
            if attempts > 200 * opts.random_pool {
                return Err(Error::ConstructionFailed("rejection sampling for the net pool stalled".into()));
            }
            let p: Vec<f64> = widths.iter().map(|w| rand::Rng::gen_range(&mut rng, -1.0..=1.0) * w).collect();
            if oracle.norm_of(&p) <= 1.0 {
                pool.push(p);
                drawn += 1;
            }
        }
        PoolKind::Random
    };
    let mut points: Vec<Vec<f64>> = Vec::new();
    for cand in &pool {
        if points.iter().all(|p| distance(oracle, p, cand) > xi) {
            points.push(cand.clone());
        }
    }
    if points.len() as f64 > bound {
        return Err(Error::ConstructionFailed(format!(
            "net has {} points, above the volumetric bound {bound}",
            points.len()
        )));
    }
    Ok(BallNet { dim: n, xi, points, pool_size: pool.len(), pool: kind, resolution, cardinality_bound: bound })
}

impl BallNet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and distance of the nearest net point.
    pub fn nearest(&self, oracle: &dyn NormOracle, a: &[f64]) -> (usize, f64) {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, distance(oracle, p, a)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("net is non-empty")
    }

    /// Smallest pairwise distance (∞ for fewer than two points).
    pub fn min_separation(&self, oracle: &dyn NormOracle) -> f64 {
        let mut best = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                best = best.min(distance(oracle, p, q));
            }
        }
        best
    }
}

/// Largest distance from a sampled ball point to the net.
pub fn sampled_covering_radius(space: &PolytopalSpace, net: &BallNet, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(derive_seed(seed, &["spaces", "covering"], 0));
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let a = space.sample_ball(&mut rng)?;
        worst = worst.max(net.nearest(space, &a).1);
    }
    Ok(worst)
}

/// Largest distance from a grid point of the ball (spacing `h`) to the net.
/// Intended for dimensions 1 and 2.
pub fn grid_covering_radius(space: &PolytopalSpace, net: &BallNet, h: f64) -> Result<f64> {
    let widths = space.half_widths()?;
    let mut worst: f64 = 0.0;
    for p in grid_pool(&widths, h) {
        if space.eval(&p) <= 1.0 {
            worst = worst.max(net.nearest(space, &p).1);
        }
    }
    Ok(worst)
}

/// Bound, how many samples it was checked on, and the largest value seen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub bound: f64,
    pub verified_on: usize,
    pub max_observed: f64,
}

impl Certification {
    pub fn holds(&self) -> bool {
        self.max_observed <= self.bound
    }
}

/// All spans of n-tuples from a ball net of `X`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubspaceNet {
    pub n: usize,
    pub xi: f64,
    /// `(1 + ξn) / (1 − ξn)`.
    pub radius: f64,
    pub ball_net: BallNet,
    /// `(tuple of net indices, E_f)` for every independent tuple.
    pub members: Vec<(Vec<usize>, PolytopalSpace)>,
    pub skipped_degenerate: usize,
    /// `(1 + 2/ξ)^{nm}`.
    pub count_bound: f64,
}

fn radius_for(n: usize, xi: f64) -> Result<f64> {
    let s = xi * n as f64;
    if !(xi > 0.0 && s < 1.0) {
        return Err(invalid(format!("need 0 < xi < 1/n, got xi = {xi}, n = {n}")));
    }
    Ok((1.0 + s) / (1.0 - s))
}

fn columns_matrix(cols: &[&Vec<f64>]) -> RMat {
    let m = cols[0].len();
    DMatrix::from_fn(m, cols.len(), |i, j| cols[j][i])
}

/// Enumerates `E_f = span[f₁ … f_n]` over n-tuples from the ξ-net of `X`.
pub fn subspace_net(n: usize, x: &PolytopalSpace, xi: f64, opts: &NetOptions) -> Result<SubspaceNet> {
    if n == 0 || n > x.dim() {
        return Err(invalid(format!("subspace dimension must be in 1..={}, got {n}", x.dim())));
    }
    let radius = radius_for(n, xi)?;
    let net = ball_net(x, xi, opts)?;
    let tuples = (net.len() as f64).powi(n as i32);
    if tuples > SUBSPACE_TUPLE_GUARD {
        return Err(Error::ResourceGuard(format!("|net|^n = {tuples:.3e} exceeds {SUBSPACE_TUPLE_GUARD:e}")));
    }
    let mut members = Vec::new();
    let mut skipped = 0;
    let mut idx = vec![0usize; n];
    'outer: loop {
        let cols: Vec<&Vec<f64>> = idx.iter().map(|&i| &net.points[i]).collect();
        match x.pullback(&columns_matrix(&cols)) {
            Ok(space) => members.push((idx.clone(), space.with_label(format!("E_f{idx:?}")))),
            Err(_) => skipped += 1,
        }
        for pos in (0..n).rev() {
            idx[pos] += 1;
            if idx[pos] < net.len() {
                continue 'outer;
            }
            idx[pos] = 0;
        }
        break;
    }
    let count_bound = (1.0 + 2.0 / xi).powi((n * x.dim()) as i32);
    Ok(SubspaceNet { n, xi, radius, ball_net: net, members, skipped_degenerate: skipped, count_bound })
}

/// Result of snapping a test subspace onto the net.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubspaceNetCheck {
    pub snapped: Vec<usize>,
    pub snap_distances: Vec<f64>,
    /// Smallest and largest `‖Σ xⱼ fⱼ‖ / ‖Σ xⱼ eⱼ‖` over the samples.
    pub min_factor: f64,
    pub max_factor: f64,
    /// `max_factor / min_factor` against `R`.
    pub distortion: Certification,
}

/// Snaps an Auerbach basis of `E = span(columns of basis)` ⊂ `X` to the net
/// and measures the two-sided distortion `(1−ξn) ≤ ‖Σxⱼfⱼ‖/‖Σxⱼeⱼ‖ ≤ (1+ξn)`
/// on sampled coefficient vectors.
pub fn verify_subspace_net(
    x: &PolytopalSpace,
    net: &BallNet,
    basis: &RMat,
    samples: usize,
    seed: u64,
) -> Result<SubspaceNetCheck> {
    let n = basis.ncols();
    let radius = radius_for(n, net.xi)?;
    let e = x.pullback(basis)?;
    let auerbach = auerbach_basis(&e)?;
    // Auerbach vectors as points of X
    let lifted: Vec<Vec<f64>> = auerbach
        .vectors
        .iter()
        .map(|c| (basis * nalgebra::DVector::from_column_slice(c)).iter().copied().collect())
        .collect();
    let mut snapped = Vec::with_capacity(n);
    let mut snap_distances = Vec::with_capacity(n);
    for v in &lifted {
        let (i, d) = net.nearest(x, v);
        snapped.push(i);
        snap_distances.push(d);
    }
    let mut rng = rng_from_seed(derive_seed(seed, &["spaces", "subspace_check"], 0));
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for _ in 0..samples {
        let coeffs = e.sample_direction(&mut rng);
        let combine = |vs: &[&Vec<f64>]| -> Vec<f64> {
            (0..x.dim()).map(|k| coeffs.iter().zip(vs).map(|(c, v)| c * v[k]).sum()).collect()
        };
        let orig = x.eval(&combine(&lifted.iter().collect::<Vec<_>>()));
        let snapped_vecs: Vec<&Vec<f64>> = snapped.iter().map(|&i| &net.points[i]).collect();
        let moved = x.eval(&combine(&snapped_vecs));
        let f = moved / orig;
        lo = lo.min(f);
        hi = hi.max(f);
    }
    let observed = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    Ok(SubspaceNetCheck {
        snapped,
        snap_distances,
        min_factor: lo,
        max_factor: hi,
        distortion: Certification { bound: radius, verified_on: samples, max_observed: observed },
    })
}

/// `E` realized inside `ℓ∞^m` through a δ-net of its dual ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinfEmbedding {
    /// The image norm `x ↦ sup_{t∈T} |t(x)|` on the same coordinates as `E`.
    pub image: PolytopalSpace,
    pub m: usize,
    pub delta: f64,
    /// `‖x‖_E / ‖x‖_F ≤ (1−δ)⁻¹` on sampled directions.
    pub distortion: Certification,
    /// Largest `‖x‖_F / ‖x‖_E` seen; at most 1 up to rounding.
    pub max_contraction_violation: f64,
}

/// `(1−δ)‖x‖ ≤ sup_{t∈T} |t(x)| ≤ ‖x‖` with `T` a δ-net of the dual ball.
pub fn embed_linf(e: &PolytopalSpace, delta: f64, samples: usize, opts: &NetOptions) -> Result<LinfEmbedding> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if e.kind() == SpaceKind::Composite {
        return Err(Error::Unsupported("embedding needs the dual norm, unavailable for composite spaces".into()));
    }
    let dual = DualBall(e);
    let net = ball_net(&dual, delta, opts)?;
    let functionals: Vec<Vec<f64>> = net.points.iter().filter(|p| p.iter().any(|x| *x != 0.0)).cloned().collect();
    let m = functionals.len();
    let image = PolytopalSpace::polytopal(e.dim(), functionals, format!("linf^{m} image of {}", e.label()))?;
    let mut rng = rng_from_seed(derive_seed(opts.seed, &["spaces", "embed_linf"], 0));
    let mut worst: f64 = 0.0;
    let mut contraction: f64 = 0.0;
    for _ in 0..samples {
        let a = e.sample_direction(&mut rng);
        let ne = e.eval(&a);
        let nf = image.eval(&a);
        worst = worst.max(ne / nf);
        contraction = contraction.max(nf / ne);
    }
    Ok(LinfEmbedding {
        image,
        m,
        delta,
        distortion: Certification { bound: 1.0 / (1.0 - delta), verified_on: samples, max_observed: worst },
        max_contraction_violation: contraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_net_and_grid_covering() {
        let line = PolytopalSpace::l_inf(1);
        let net = ball_net(&line, 0.5, &NetOptions::default()).unwrap();
        assert!(net.len() <= 5);
        assert!(net.min_separation(&line) > 0.5);
        assert!(grid_covering_radius(&line, &net, 1e-3).unwrap() <= 0.5);
    }

    #[test]
    fn mesh_two_gives_one_point() {
        let sq = PolytopalSpace::l_inf(2);
        let net = ball_net(&sq, 2.0, &NetOptions::default()).unwrap();
        assert_eq!(net.len(), 1);
        assert!(net.len() as f64 <= 2f64.powi(2));
    }

    #[test]
    fn square_net_respects_volume_bound() {
        let sq = PolytopalSpace::l_inf(2);
        let net = ball_net(&sq, 0.9, &NetOptions::default()).unwrap();
        assert!(net.len() <= 10, "{}", net.len());
        // off-pool points: within xi plus half a grid cell (l_inf norm)
        let r = grid_covering_radius(&sq, &net, 1e-2).unwrap();
        assert!(r <= 0.9 + net.resolution / 2.0 + 1e-12, "{r}");
    }

    #[test]
    fn guard_rejects_fine_meshes() {
        let cube = PolytopalSpace::l_inf(6);
        assert!(matches!(ball_net(&cube, 0.01, &NetOptions::default()), Err(Error::ResourceGuard(_))));
    }

    #[test]
    fn random_pool_in_dimension_four() {
        let b = PolytopalSpace::l_2(4);
        let opts = NetOptions { random_pool: 5_000, ..NetOptions::default() };
        let net = ball_net(&b, 0.8, &opts).unwrap();
        assert_eq!(net.pool, PoolKind::Random);
        assert!(net.min_separation(&b) > 0.8);
        assert!(net.len() as f64 <= net.cardinality_bound);
    }

    #[test]
    fn lines_in_the_plane() {
        let sq = PolytopalSpace::l_inf(2);
        let sn = subspace_net(1, &sq, 0.4, &NetOptions::default()).unwrap();
        assert!((sn.radius - 1.4 / 0.6).abs() < 1e-12);
        assert!(sn.members.len() + sn.skipped_degenerate <= 36);
        assert_eq!(sn.skipped_degenerate, usize::from(sn.ball_net.points.iter().any(|p| p.iter().all(|x| *x == 0.0))));
        assert!(subspace_net(1, &sq, 1.0, &NetOptions::default()).is_err());
    }

    #[test]
    fn subspace_spanned_by_net_points_snaps_exactly() {
        let cube = PolytopalSpace::l_inf(3);
        let net = ball_net(&cube, 0.2, &NetOptions::default()).unwrap();
        // span of two coordinate axes: its Auerbach vectors are cube vertices of that face
        let basis = RMat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let check = verify_subspace_net(&cube, &net, &basis, 500, 1).unwrap();
        assert!(check.snap_distances.iter().all(|d| *d <= 0.2));
        assert!(check.min_factor >= 1.0 - 0.4 - 1e-12 && check.max_factor <= 1.0 + 0.4 + 1e-12);
        assert!(check.distortion.holds());
    }

    #[test]
    fn embedding_of_l_inf_keeps_coordinates() {
        let cube = PolytopalSpace::l_inf(2);
        let emb = embed_linf(&cube, 0.5, 1000, &NetOptions::default()).unwrap();
        for j in 0..2 {
            let mut e = vec![0.0; 2];
            e[j] = 1.0;
            assert_eq!(emb.image.norm(&e).unwrap(), 1.0);
        }
        assert!(emb.distortion.holds());
    }

    #[test]
    fn embedding_of_an_interval() {
        let line = PolytopalSpace::l_2(1);
        let emb = embed_linf(&line, 0.3, 100, &NetOptions::default()).unwrap();
        assert!(emb.m as f64 <= 1.0 + 2.0 / 0.3);
        assert!(emb.distortion.holds());
    }
}
