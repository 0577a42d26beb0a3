//! Zonotope set arithmetic.
//!
//! A zonotope `⟨c, G⟩` is the set `{ c + G β : ‖β‖∞ ≤ 1 }`. Minkowski sums and
//! linear maps are exact; strip intersection and multi-set fusion produce
//! over-approximations that always contain the exact result. Every operation
//! drops all-zero generator columns from its output.

pub mod lp;
mod outline;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use outline::outline_2d;

/// Denominators below this are treated as zero by [`Zonotope::optimal_lambda`].
pub const LAMBDA_EPS: f64 = 1e-12;

/// Default generator budget applied after each correction.
pub const DEFAULT_MAX_GENERATORS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZonoError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("fusion needs at least one zonotope")]
    EmptyInput,
    #[error("fusion weights must be finite and nonnegative")]
    InvalidWeights,
    #[error("fusion weights sum to zero")]
    ZeroWeightSum,
    #[error("generator budget {budget} is below the dimension {dim}")]
    InvalidBudget { budget: usize, dim: usize },
    #[error("strip half-width must be finite and nonnegative, got {0}")]
    InvalidHalfWidth(f64),
}

fn check_dim(expected: usize, found: usize) -> Result<(), ZonoError> {
    if expected == found {
        Ok(())
    } else {
        Err(ZonoError::DimensionMismatch { expected, found })
    }
}

/// A center plus a generator matrix (one generator per column).
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
}

/// One scalar measurement constraint `|h·x − y| ≤ r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strip {
    pub h: DVector<f64>,
    pub y: f64,
    pub r: f64,
}

impl Strip {
    pub fn new(h: DVector<f64>, y: f64, r: f64) -> Result<Self, ZonoError> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(ZonoError::InvalidHalfWidth(r));
        }
        Ok(Self { h, y, r })
    }

    /// Strip on coordinate `axis` of an `n`-dimensional state.
    pub fn axis(n: usize, axis: usize, y: f64, r: f64) -> Result<Self, ZonoError> {
        let mut h = DVector::zeros(n);
        h[axis] = 1.0;
        Self::new(h, y, r)
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        (self.h.dot(x) - self.y).abs() <= self.r
    }
}

/// Bounded noise description: diagonal process-noise generators per nominal
/// step and measurement half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBound {
    /// Diagonal of `Q` (state units per nominal step).
    pub process: DVector<f64>,
    /// Measurement half-widths `r` (measurement units).
    pub measurement: DVector<f64>,
    /// Length of the nominal step `Q` refers to, in seconds.
    pub step: f64,
}

impl NoiseBound {
    pub fn new(process: DVector<f64>, measurement: DVector<f64>, step: f64) -> Result<Self, ZonoError> {
        for &v in process.iter().chain(measurement.iter()) {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ZonoError::InvalidHalfWidth(v));
            }
        }
        Ok(Self {
            process,
            measurement,
            step,
        })
    }

    /// `⟨0, diag(Q)⟩`.
    pub fn process_zonotope(&self) -> Zonotope {
        Zonotope::from_box(DVector::zeros(self.process.len()), &self.process)
    }
}

/// Axis-aligned box `center ± radii`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    pub center: DVector<f64>,
    pub radii: DVector<f64>,
}

impl IntervalBox {
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.center
            .iter()
            .zip(self.radii.iter())
            .zip(x.iter())
            .all(|((c, r), v)| (v - c).abs() <= r + tol)
    }

    pub fn overlaps(&self, other: &IntervalBox, tol: f64) -> bool {
        self.center
            .iter()
            .zip(self.radii.iter())
            .zip(other.center.iter().zip(other.radii.iter()))
            .all(|((c1, r1), (c2, r2))| (c1 - c2).abs() <= r1 + r2 + tol)
    }
}

fn prune(generators: DMatrix<f64>) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..generators.ncols())
        .filter(|&j| generators.column(j).iter().any(|&v| v != 0.0))
        .collect();
    if keep.len() == generators.ncols() {
        return generators;
    }
    generators.select_columns(keep.iter())
}

impl Zonotope {
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self, ZonoError> {
        check_dim(center.len(), generators.nrows())?;
        Ok(Self {
            center,
            generators: prune(generators),
        })
    }

    /// A single point (no generators).
    pub fn point(center: DVector<f64>) -> Self {
        let n = center.len();
        Self {
            center,
            generators: DMatrix::zeros(n, 0),
        }
    }

    /// `⟨center, diag(radii)⟩`.
    pub fn from_box(center: DVector<f64>, radii: &DVector<f64>) -> Self {
        assert_eq!(center.len(), radii.len(), "box radii dimension");
        let generators = prune(DMatrix::from_diagonal(radii));
        Self { center, generators }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    /// Squared Frobenius norm of the generator matrix, `trace(G Gᵀ)`.
    pub fn generator_trace(&self) -> f64 {
        self.generators.norm_squared()
    }

    /// Point `c + G β`.
    pub fn point_at(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.generators * beta
    }

    /// Keeps only the listed coordinates (rows), e.g. `[0, 1]` for position.
    pub fn project(&self, rows: &[usize]) -> Zonotope {
        let center = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.center[r]));
        let generators = self.generators.select_rows(rows.iter());
        Zonotope {
            center,
            generators: prune(generators),
        }
    }

    /// Exact Minkowski sum `⟨c₁ + c₂, [G₁, G₂]⟩`.
    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope, ZonoError> {
        check_dim(self.dim(), other.dim())?;
        let n = self.dim();
        let (e1, e2) = (self.num_generators(), other.num_generators());
        let mut generators = DMatrix::zeros(n, e1 + e2);
        generators.columns_mut(0, e1).copy_from(&self.generators);
        generators.columns_mut(e1, e2).copy_from(&other.generators);
        Ok(Zonotope {
            center: &self.center + &other.center,
            generators: prune(generators),
        })
    }

    /// Exact image `⟨L c, L G⟩` under a linear map.
    pub fn linear_map(&self, l: &DMatrix<f64>) -> Result<Zonotope, ZonoError> {
        check_dim(self.dim(), l.ncols())?;
        Ok(Zonotope {
            center: l * &self.center,
            generators: prune(l * &self.generators),
        })
    }

    /// Over-approximates the intersection with a strip using gain `lambda`:
    /// `⟨c + λ(y − h·c), [(I − λh) G, λ r]⟩`. Sound for every `lambda`.
    pub fn intersect_strip(&self, strip: &Strip, lambda: &DVector<f64>) -> Result<Zonotope, ZonoError> {
        let n = self.dim();
        check_dim(n, strip.h.len())?;
        check_dim(n, lambda.len())?;
        let innovation = strip.y - strip.h.dot(&self.center);
        let center = &self.center + lambda * innovation;
        let e = self.num_generators();
        let mut generators = DMatrix::zeros(n, e + 1);
        // (I − λh) G = G − λ (hᵀ G)
        let h_g = strip.h.transpose() * &self.generators;
        generators
            .columns_mut(0, e)
            .copy_from(&(&self.generators - lambda * h_g));
        generators.column_mut(e).copy_from(&(lambda * strip.r));
        Ok(Zonotope {
            center,
            generators: prune(generators),
        })
    }

    /// Gain minimizing the Frobenius norm of the generator matrix produced by
    /// [`intersect_strip`](Self::intersect_strip): `G Gᵀ hᵀ / (h G Gᵀ hᵀ + r²)`.
    pub fn optimal_lambda(&self, strip: &Strip) -> Result<DVector<f64>, ZonoError> {
        check_dim(self.dim(), strip.h.len())?;
        let gt_h = self.generators.transpose() * &strip.h;
        let denom = gt_h.norm_squared() + strip.r * strip.r;
        if denom < LAMBDA_EPS {
            return Ok(DVector::zeros(self.dim()));
        }
        Ok(&self.generators * gt_h / denom)
    }

    /// Tightest axis-aligned box containing the set.
    pub fn interval_hull(&self) -> IntervalBox {
        let radii = DVector::from_iterator(
            self.dim(),
            self.generators.row_iter().map(|row| row.iter().map(|v| v.abs()).sum()),
        );
        IntervalBox {
            center: self.center.clone(),
            radii,
        }
    }

    /// Area of the projection onto the first two coordinates:
    /// `4 Σ_{i<j} |det[gᵢ gⱼ]|`.
    pub fn area_2d(&self) -> Result<f64, ZonoError> {
        if self.dim() < 2 {
            return Err(ZonoError::DimensionMismatch {
                expected: 2,
                found: self.dim(),
            });
        }
        let g = &self.generators;
        let e = g.ncols();
        let mut sum = 0.0;
        for i in 0..e {
            let (xi, yi) = (g[(0, i)], g[(1, i)]);
            for j in (i + 1)..e {
                sum += (xi * g[(1, j)] - yi * g[(0, j)]).abs();
            }
        }
        Ok(4.0 * sum)
    }

    /// Membership decided by `min ‖β‖∞ s.t. G β = x − c` being at most one.
    pub fn contains_point(&self, x: &DVector<f64>) -> Result<bool, ZonoError> {
        check_dim(self.dim(), x.len())?;
        Ok(self.membership_norm(x).is_some_and(|t| t <= 1.0 + lp::FEASIBILITY_TOL))
    }

    /// `min ‖β‖∞` with `c + G β = x`, or `None` when no such `β` exists.
    /// Values at most one mean membership.
    pub fn membership_norm(&self, x: &DVector<f64>) -> Option<f64> {
        let scale = 1.0_f64.max(x.amax()).max(self.center.amax());
        if !self.interval_hull().contains(x, lp::FEASIBILITY_TOL * scale) {
            return None;
        }
        lp::min_inf_norm(&self.generators, &(x - &self.center))
    }

    /// True iff the two sets share a point. Disjoint interval hulls short-cut
    /// the linear program.
    pub fn intersects(&self, other: &Zonotope) -> Result<bool, ZonoError> {
        check_dim(self.dim(), other.dim())?;
        let scale = 1.0_f64.max(self.center.amax()).max(other.center.amax());
        if !self
            .interval_hull()
            .overlaps(&other.interval_hull(), lp::FEASIBILITY_TOL * scale)
        {
            return Ok(false);
        }
        // a ∩ b ≠ ∅  ⇔  c_b ∈ ⟨c_a, [G_a, G_b]⟩
        let joint = Zonotope {
            center: self.center.clone(),
            generators: self.minkowski_sum(other)?.generators,
        };
        joint.contains_point(&other.center)
    }

    /// Bounds the generator count by `max_generators`: the largest
    /// `max_generators − n` generators (Euclidean norm) are kept and the rest
    /// are replaced by their interval hull.
    pub fn reduce_order(&self, max_generators: usize) -> Result<Zonotope, ZonoError> {
        let n = self.dim();
        if max_generators < n {
            return Err(ZonoError::InvalidBudget {
                budget: max_generators,
                dim: n,
            });
        }
        let e = self.num_generators();
        if e <= max_generators {
            return Ok(self.clone());
        }
        let mut order: Vec<(usize, f64)> = (0..e).map(|j| (j, self.generators.column(j).norm())).collect();
        // Stable: equal norms keep their original order.
        order.sort_by(|a, b| b.1.total_cmp(&a.1));
        let keep = max_generators - n;
        let mut generators = DMatrix::zeros(n, max_generators);
        for (k, &(j, _)) in order.iter().take(keep).enumerate() {
            generators.column_mut(k).copy_from(&self.generators.column(j));
        }
        for &(j, _) in order.iter().skip(keep) {
            for i in 0..n {
                generators[(i, keep + i)] += self.generators[(i, j)].abs();
            }
        }
        Ok(Zonotope {
            center: self.center.clone(),
            generators: prune(generators),
        })
    }
}

/// Over-approximates `∩ⱼ Zⱼ` by `⟨Σ wⱼcⱼ / Σw, [w₁G₁, …, wₖGₖ] / Σw⟩`.
pub fn fuse(zs: &[Zonotope], weights: &[f64]) -> Result<Zonotope, ZonoError> {
    let first = zs.first().ok_or(ZonoError::EmptyInput)?;
    check_dim(zs.len(), weights.len())?;
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(ZonoError::InvalidWeights);
    }
    let n = first.dim();
    for z in zs {
        check_dim(n, z.dim())?;
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(ZonoError::ZeroWeightSum);
    }
    // Σ wⱼcⱼ / Σw, accumulated relative to the first center.
    let mut center = first.center.clone();
    for (z, w) in zs.iter().zip(weights).skip(1) {
        center += (&z.center - &first.center) * (w / total);
    }
    let e: usize = zs.iter().map(Zonotope::num_generators).sum();
    let mut generators = DMatrix::zeros(n, e);
    let mut col = 0;
    for (z, w) in zs.iter().zip(weights) {
        let k = z.num_generators();
        generators.columns_mut(col, k).copy_from(&(&z.generators * (w / total)));
        col += k;
    }
    Ok(Zonotope {
        center,
        generators: prune(generators),
    })
}

/// Inverse-trace weights `wⱼ ∝ 1 / trace(GⱼGⱼᵀ)`, normalized to sum one.
/// Point sets (trace zero) share all the weight among themselves.
pub fn optimal_weights(zs: &[Zonotope]) -> Vec<f64> {
    let traces: Vec<f64> = zs.iter().map(Zonotope::generator_trace).collect();
    let degenerate = traces.iter().filter(|&&t| t == 0.0).count();
    if degenerate > 0 {
        let share = 1.0 / degenerate as f64;
        return traces.iter().map(|&t| if t == 0.0 { share } else { 0.0 }).collect();
    }
    let inv: Vec<f64> = traces.iter().map(|t| 1.0 / t).collect();
    let total: f64 = inv.iter().sum();
    inv.iter().map(|w| w / total).collect()
}

/// `%.9g`-style formatting used by the debug text form.
pub(crate) fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..9).contains(&exp) {
        let s = format!("{v:.8e}");
        let (mantissa, exponent) = s.split_once('e').unwrap_or((&s, "0"));
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exponent}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Debug text form `⟨c₁, …, cₙ; [g₁], …, [gₑ]⟩` with 9 significant digits.
impl fmt::Display for Zonotope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |it: &mut dyn Iterator<Item = f64>| it.map(format_sig9).collect::<Vec<_>>().join(", ");
        write!(f, "⟨{}", join(&mut self.center.iter().copied()))?;
        write!(f, ";")?;
        for (j, col) in self.generators.column_iter().enumerate() {
            let sep = if j == 0 { " " } else { ", " };
            write!(f, "{sep}[{}]", join(&mut col.iter().copied()))?;
        }
        write!(f, "⟩")
    }
}
