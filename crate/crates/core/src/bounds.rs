//! Certification of polarization tensors against the mean bounds, the trace
//! bounds at positive volume fraction and the zero-volume trace bounds, plus
//! sampling of the planar bounding curves.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{PhasePair, SymTensor};

pub const DEFAULT_TOL: f64 = 1e-9;

fn check_fraction(theta: f64, closed_above: bool) -> Result<()> {
    let ok = theta >= 0.0 && (theta < 1.0 || (closed_above && theta == 1.0));
    if ok {
        Ok(())
    } else {
        let range = if closed_above { "[0, 1]" } else { "[0, 1)" };
        Err(Error::InvalidFraction { value: theta, range })
    }
}

/// Harmonic and arithmetic means `(gamma_h, gamma_a)` of the two phases.
pub fn mean_bounds(theta: f64, phases: PhasePair) -> Result<(f64, f64)> {
    check_fraction(theta, true)?;
    let (g0, g1) = (phases.gamma0(), phases.gamma1());
    let harmonic = 1.0 / (theta / g1 + (1.0 - theta) / g0);
    let arithmetic = theta * g1 + (1.0 - theta) * g0;
    Ok((harmonic, arithmetic))
}

/// Eigenvalue box `[min{1, b}, max{1, b}]` with `b = gamma0 / (theta gamma0 + (1 - theta) gamma1)`.
pub fn pointwise_bounds(theta: f64, phases: PhasePair) -> Result<(f64, f64)> {
    check_fraction(theta, true)?;
    let (g0, g1) = (phases.gamma0(), phases.gamma1());
    let b = g0 / (theta * g0 + (1.0 - theta) * g1);
    Ok((b.min(1.0), b.max(1.0)))
}

/// Right-hand side of `trace (I - theta M)^-1 <= ...`.
pub fn trace_upper_bound(dim: usize, theta: f64, phases: PhasePair) -> f64 {
    (dim as f64 + theta * (phases.contrast() - 1.0)) / (1.0 - theta)
}

/// Right-hand side of `trace (theta M)^-1 <= ...`.
pub fn trace_lower_bound(dim: usize, theta: f64, phases: PhasePair) -> f64 {
    (dim as f64 - (1.0 - theta) * (1.0 - 1.0 / phases.contrast())) / theta
}

/// Right-hand sides `((N - 1) + gamma0/gamma1, (N - 1) + gamma1/gamma0)` of the
/// zero-volume bounds on `trace M` and `trace M^-1`.
pub fn zero_volume_bounds(dim: usize, phases: PhasePair) -> (f64, f64) {
    let base = dim as f64 - 1.0;
    (base + phases.contrast(), base + 1.0 / phases.contrast())
}

/// Signed distances to each bound; positive means satisfied. `None` when the
/// bound was not part of the check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slacks {
    pub pointwise_lower: Option<f64>,
    pub pointwise_upper: Option<f64>,
    pub trace_lower: Option<f64>,
    pub trace_upper: Option<f64>,
}

impl Slacks {
    fn all(&self) -> [Option<f64>; 4] {
        [self.pointwise_lower, self.pointwise_upper, self.trace_lower, self.trace_upper]
    }

    /// Smallest slack among the bounds that were checked.
    pub fn min(&self) -> Option<f64> {
        self.all().into_iter().flatten().reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    /// Zero for the zero-volume regime.
    pub theta: f64,
    pub tolerance: f64,
    pub pointwise_lower_ok: bool,
    pub pointwise_upper_ok: bool,
    pub trace_lower_ok: bool,
    pub trace_upper_ok: bool,
    pub slacks: Slacks,
    /// Eigenvector of the eigenvalue closest to violating its pointwise bound.
    pub worst_direction: Vec<f64>,
    /// Whether every checked slack exceeds the tolerance (strict interior).
    pub interior: bool,
    /// Smallest checked slack.
    pub margin: f64,
}

impl BoundsReport {
    fn new(theta: f64, slacks: Slacks, worst_direction: Vec<f64>, tolerance: f64) -> Self {
        let mut r = Self {
            theta,
            tolerance,
            pointwise_lower_ok: true,
            pointwise_upper_ok: true,
            trace_lower_ok: true,
            trace_upper_ok: true,
            slacks,
            worst_direction,
            interior: true,
            margin: f64::INFINITY,
        };
        r.set_tolerance(tolerance);
        r
    }

    /// Recomputes the `*_ok` flags for a different tolerance.
    pub fn set_tolerance(&mut self, tolerance: f64) {
        let ok = |s: Option<f64>| s.is_none_or(|v| v >= -tolerance);
        self.tolerance = tolerance;
        self.pointwise_lower_ok = ok(self.slacks.pointwise_lower);
        self.pointwise_upper_ok = ok(self.slacks.pointwise_upper);
        self.trace_lower_ok = ok(self.slacks.trace_lower);
        self.trace_upper_ok = ok(self.slacks.trace_upper);
        self.margin = self.slacks.min().unwrap_or(f64::INFINITY);
        self.interior = self.margin > tolerance;
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.set_tolerance(tolerance);
        self
    }

    /// True when every checked bound holds within the tolerance.
    pub fn all_ok(&self) -> bool {
        self.pointwise_lower_ok && self.pointwise_upper_ok && self.trace_lower_ok && self.trace_upper_ok
    }
}

/// Pointwise slacks and the eigenvector of the binding side.
fn pointwise_part(m: &SymTensor, lo: f64, hi: f64) -> Result<(f64, f64, Vec<f64>)> {
    let eig = m.eigendecompose()?;
    let n = eig.values.len();
    let lower = eig.values[0] - lo;
    let upper = hi - eig.values[n - 1];
    let worst = if lower <= upper {
        eig.vectors[0].clone()
    } else {
        eig.vectors[n - 1].clone()
    };
    Ok((lower, upper, worst))
}

/// Mean bounds on the eigenvalues of `M` at fraction `theta`.
pub fn check_pointwise(m: &SymTensor, theta: f64, phases: PhasePair) -> Result<BoundsReport> {
    let (lo, hi) = pointwise_bounds(theta, phases)?;
    let (lower, upper, worst) = pointwise_part(m, lo, hi)?;
    let slacks = Slacks {
        pointwise_lower: Some(lower),
        pointwise_upper: Some(upper),
        trace_lower: None,
        trace_upper: None,
    };
    Ok(BoundsReport::new(theta, slacks, worst, DEFAULT_TOL))
}

/// `bound - trace(A^-1)`, or `-inf` when `A` is not positive definite (the
/// inequality is only meaningful for positive `A`).
fn inverse_trace_slack(a: &SymTensor, bound: f64) -> Result<f64> {
    let inv = a.invert()?;
    if !a.is_positive_definite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(bound - inv.trace())
}

/// Trace bounds at positive fraction, together with the pointwise bounds.
pub fn check_trace_theta(m: &SymTensor, theta: f64, phases: PhasePair) -> Result<BoundsReport> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidFraction { value: theta, range: "(0, 1)" });
    }
    let dim = m.dim();
    let (lo, hi) = pointwise_bounds(theta, phases)?;
    let (lower, upper, worst) = pointwise_part(m, lo, hi)?;
    let i_minus = m.scale(-theta).shift(1.0);
    let slacks = Slacks {
        pointwise_lower: Some(lower),
        pointwise_upper: Some(upper),
        trace_lower: Some(inverse_trace_slack(&m.scale(theta), trace_lower_bound(dim, theta, phases))?),
        trace_upper: Some(inverse_trace_slack(&i_minus, trace_upper_bound(dim, theta, phases))?),
    };
    Ok(BoundsReport::new(theta, slacks, worst, DEFAULT_TOL))
}

/// Zero-volume trace bounds plus the box `1 <= lambda_i <= gamma0/gamma1`.
pub fn check_trace_zero(m: &SymTensor, phases: PhasePair) -> Result<BoundsReport> {
    let eig = m.eigendecompose()?;
    if eig.values[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite { min: eig.values[0] });
    }
    let (upper_trace, lower_trace) = zero_volume_bounds(m.dim(), phases);
    let (lower, upper, worst) = pointwise_part(m, 1.0, phases.contrast())?;
    let slacks = Slacks {
        pointwise_lower: Some(lower),
        pointwise_upper: Some(upper),
        trace_lower: Some(lower_trace - eig.values.iter().map(|l| 1.0 / l).sum::<f64>()),
        trace_upper: Some(upper_trace - m.trace()),
    };
    Ok(BoundsReport::new(0.0, slacks, worst, DEFAULT_TOL))
}

/// Membership of an eigenvalue list in the planar region at fraction `theta`
/// (zero selects the zero-volume region).
pub fn region_contains(eigenvalues: &[f64], theta: f64, phases: PhasePair, tol: f64) -> Result<bool> {
    let m = SymTensor::diag(eigenvalues);
    let report = if theta == 0.0 {
        check_trace_zero(&m, phases)?
    } else {
        match check_trace_theta(&m, theta, phases) {
            Ok(r) => r,
            Err(Error::SingularTensor { .. }) => return Ok(false),
            Err(e) => return Err(e),
        }
    };
    Ok(report.with_tolerance(tol).all_ok())
}

/// The two bounding curves of the planar eigenvalue region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCurves {
    pub theta: f64,
    /// Equality locus of the bound on `trace (I - theta M)^-1` (`trace M` at zero).
    pub upper: Vec<[f64; 2]>,
    /// Equality locus of the bound on `trace (theta M)^-1` (`trace M^-1` at zero).
    pub lower: Vec<[f64; 2]>,
}

impl RegionCurves {
    /// Rows `curve_id,lambda1,lambda2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("curve_id,lambda1,lambda2\n");
        for (id, pts) in [("upper", &self.upper), ("lower", &self.lower)] {
            for p in pts {
                out.push_str(&format!("{id},{:.17e},{:.17e}\n", p[0], p[1]));
            }
        }
        out
    }
}

/// Samples both bounding curves with `n_points` points each, `lambda1`
/// ascending, from corner `(1, b)` to corner `(b, 1)` of the pointwise box.
pub fn sample_region_curves(dim: usize, theta: f64, phases: PhasePair, n_points: usize) -> Result<RegionCurves> {
    if dim != 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    check_fraction(theta, true)?;
    if n_points < 2 {
        return Err(Error::InvalidSpec(format!("need at least 2 curve points, got {n_points}")));
    }
    let (_, b) = pointwise_bounds(theta, phases)?;
    let r = phases.contrast();
    let lambda1: Vec<f64> = (0..n_points)
        .map(|k| 1.0 + (b - 1.0) * k as f64 / (n_points - 1) as f64)
        .collect();

    let upper_of = |l1: f64| -> f64 {
        if theta == 0.0 {
            1.0 + r - l1
        } else if theta == 1.0 {
            1.0
        } else {
            let c = trace_upper_bound(2, theta, phases) - 1.0 / (1.0 - theta * l1);
            (1.0 - 1.0 / c) / theta
        }
    };
    let lower_of = |l1: f64| -> f64 {
        if theta == 0.0 {
            1.0 / (1.0 + 1.0 / r - 1.0 / l1)
        } else {
            1.0 / (theta * trace_lower_bound(2, theta, phases) - 1.0 / l1)
        }
    };
    let sample = |f: &dyn Fn(f64) -> f64| -> Vec<[f64; 2]> {
        let mut pts: Vec<[f64; 2]> = lambda1.iter().map(|&l| [l, f(l)]).collect();
        pts[0] = [1.0, b];
        pts[n_points - 1] = [b, 1.0];
        pts
    };
    Ok(RegionCurves {
        theta,
        upper: sample(&upper_of),
        lower: sample(&lower_of),
    })
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

fn directed(from: &[[f64; 2]], to: &[[f64; 2]]) -> f64 {
    from.iter()
        .map(|&p| {
            if to.len() == 1 {
                return point_segment_distance(p, to[0], to[0]);
            }
            to.windows(2)
                .map(|s| point_segment_distance(p, s[0], s[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two polylines, measured from the vertices of
/// each to the segments of the other.
pub fn hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    directed(a, b).max(directed(b, a))
}
