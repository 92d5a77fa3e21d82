//! Sequential laminates: closed-form effective and polarization tensors,
//! laminate design for prescribed zero-volume eigenvalues, and dilution
//! (`theta -> 0`) studies.
//!
//! Throughout, `theta` is the volume fraction of the inclusion phase `gamma1`.
//! A laminate has a *matrix* phase that is layered in at every stage and a
//! *core* phase that is only present at the innermost stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{PhasePair, SymTensor, UNIT_TOL};

const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Tolerance on the curve identities when designing a laminate for a target.
pub const CURVE_TOL: f64 = 1e-9;
/// Tolerance on the box `[1, gamma0/gamma1]` for target eigenvalues.
const RANGE_TOL: f64 = 1e-12;

/// Which phase is laminated in at every stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixPhase {
    #[serde(rename = "gamma0")]
    Gamma0,
    #[serde(rename = "gamma1")]
    Gamma1,
}

/// The two equivalent ways of describing a rank-p laminate.
#[derive(Debug, Clone, PartialEq)]
pub enum Parameterization {
    /// Convex weights `m_i` with `sum m_i = 1`, plus the overall fraction.
    Weights { weights: Vec<f64>, theta: f64 },
    /// Per-stage `gamma1` proportions, stage 1 innermost. The overall fraction follows.
    Stages(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct LaminateSpec {
    dim: usize,
    directions: Vec<Vec<f64>>,
    params: Parameterization,
    matrix: MatrixPhase,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    dim: usize,
    directions: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stage_proportions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    matrix_phase: MatrixPhase,
}

impl TryFrom<RawSpec> for LaminateSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        match (raw.weights, raw.stage_proportions) {
            (Some(w), None) => {
                let theta = raw
                    .theta
                    .ok_or_else(|| Error::InvalidSpec("weights need an explicit theta".into()))?;
                Self::with_weights(raw.dim, raw.directions, w, theta, raw.matrix_phase)
            }
            (None, Some(s)) => {
                let spec = Self::with_stages(raw.dim, raw.directions, s, raw.matrix_phase)?;
                if let Some(t) = raw.theta {
                    if (t - spec.theta()).abs() > WEIGHT_SUM_TOL {
                        return Err(Error::InvalidSpec(format!(
                            "theta {t} disagrees with stage proportions (product gives {})",
                            spec.theta()
                        )));
                    }
                }
                Ok(spec)
            }
            _ => Err(Error::InvalidSpec(
                "exactly one of `weights` and `stage_proportions` must be given".into(),
            )),
        }
    }
}

impl From<LaminateSpec> for RawSpec {
    fn from(s: LaminateSpec) -> Self {
        let theta = Some(s.theta());
        let (weights, stage_proportions) = match s.params {
            Parameterization::Weights { weights, .. } => (Some(weights), None),
            Parameterization::Stages(st) => (None, Some(st)),
        };
        RawSpec {
            dim: s.dim,
            directions: s.directions,
            weights,
            stage_proportions,
            theta,
            matrix_phase: s.matrix,
        }
    }
}

fn check_directions(dim: usize, directions: &[Vec<f64>]) -> Result<()> {
    if dim == 0 {
        return Err(Error::UnsupportedDimension(0));
    }
    if directions.is_empty() {
        return Err(Error::InvalidSpec("a laminate needs at least one direction".into()));
    }
    for (index, e) in directions.iter().enumerate() {
        if e.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: e.len() });
        }
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::NonUnitDirection { index, norm });
        }
    }
    Ok(())
}

impl LaminateSpec {
    pub fn with_weights(
        dim: usize,
        directions: Vec<Vec<f64>>,
        weights: Vec<f64>,
        theta: f64,
        matrix: MatrixPhase,
    ) -> Result<Self> {
        check_directions(dim, &directions)?;
        if weights.len() != directions.len() {
            return Err(Error::DimensionMismatch {
                expected: directions.len(),
                got: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidSpec(format!("weight {w} is negative or not finite")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidSpec(format!("weights sum to {sum}, not 1")));
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidFraction { value: theta, range: "(0, 1]" });
        }
        Ok(Self {
            dim,
            directions,
            params: Parameterization::Weights { weights, theta },
            matrix,
        })
    }

    pub fn with_stages(
        dim: usize,
        directions: Vec<Vec<f64>>,
        stages: Vec<f64>,
        matrix: MatrixPhase,
    ) -> Result<Self> {
        check_directions(dim, &directions)?;
        if stages.len() != directions.len() {
            return Err(Error::DimensionMismatch {
                expected: directions.len(),
                got: stages.len(),
            });
        }
        if let Some(s) = stages.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
            return Err(Error::InvalidFraction { value: *s, range: "(0, 1) for stage proportions" });
        }
        Ok(Self {
            dim,
            directions,
            params: Parameterization::Stages(stages),
            matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn matrix_phase(&self) -> MatrixPhase {
        self.matrix
    }

    pub fn parameterization(&self) -> &Parameterization {
        &self.params
    }

    /// Overall `gamma1` volume fraction.
    pub fn theta(&self) -> f64 {
        match &self.params {
            Parameterization::Weights { theta, .. } => *theta,
            Parameterization::Stages(stages) => match self.matrix {
                MatrixPhase::Gamma0 => stages.iter().product(),
                MatrixPhase::Gamma1 => 1.0 - stages.iter().map(|s| 1.0 - s).product::<f64>(),
            },
        }
    }

    /// Convex weights `m_i`, converting from stage proportions when needed.
    ///
    /// The rank-one coefficient of stage `i` is `(1 - c_i) prod_{j<i} c_j`
    /// with `c` the core proportion; normalizing by the total gives `m_i`.
    /// At `theta = 1` with matrix `gamma0` there is no matrix phase and the
    /// weights are irrelevant; the stage coefficients are returned normalized
    /// anyway (they cannot all vanish because every stage proportion is < 1).
    pub fn weights(&self) -> Vec<f64> {
        match &self.params {
            Parameterization::Weights { weights, .. } => weights.clone(),
            Parameterization::Stages(stages) => {
                let core: Vec<f64> = match self.matrix {
                    MatrixPhase::Gamma0 => stages.clone(),
                    MatrixPhase::Gamma1 => stages.iter().map(|s| 1.0 - s).collect(),
                };
                let mut prefix = 1.0;
                let mut coeff = Vec::with_capacity(core.len());
                for c in &core {
                    coeff.push((1.0 - c) * prefix);
                    prefix *= c;
                }
                let total: f64 = coeff.iter().sum();
                coeff.iter().map(|c| c / total).collect()
            }
        }
    }

    /// Stage proportions reproducing this laminate. Stages whose weight is
    /// zero come out as degenerate proportions (0 or 1): such a stage adds no
    /// layer, so it is a valid limit but not a physical lamination step.
    pub fn stage_proportions(&self) -> Vec<f64> {
        if let Parameterization::Stages(s) = &self.params {
            return s.clone();
        }
        let theta = self.theta();
        let weights = self.weights();
        let mut prefix = 1.0;
        let mut out = Vec::with_capacity(weights.len());
        for m in &weights {
            // coefficient (1 - c_i) prefix must equal total * m_i
            let c = match self.matrix {
                MatrixPhase::Gamma0 => 1.0 - (1.0 - theta) * m / prefix,
                MatrixPhase::Gamma1 => 1.0 - theta * m / prefix,
            };
            let c = c.clamp(0.0, 1.0);
            out.push(match self.matrix {
                MatrixPhase::Gamma0 => c,
                MatrixPhase::Gamma1 => 1.0 - c,
            });
            prefix *= c;
        }
        out
    }

    /// `sum m_i e_i (x) e_i`.
    pub fn lamination_tensor(&self) -> SymTensor {
        SymTensor::rank_one_sum(self.dim, &self.directions, &self.weights())
            .expect("directions validated at construction")
    }

    /// Same laminate with a different overall fraction (weights are kept).
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::with_weights(self.dim, self.directions.clone(), self.weights(), theta, self.matrix)
    }
}

fn invert_or_degenerate(t: &SymTensor, what: &str) -> Result<SymTensor> {
    t.invert()
        .map_err(|e| Error::DegenerateFormula(format!("{what}: {e}")))
}

/// Homogenized tensor of a sequential laminate.
pub fn laminate_effective_tensor(spec: &LaminateSpec, phases: PhasePair) -> Result<SymTensor> {
    let (g0, g1) = (phases.gamma0(), phases.gamma1());
    let theta = spec.theta();
    let s = spec.lamination_tensor();
    match spec.matrix {
        MatrixPhase::Gamma0 => {
            // theta (A - g0)^-1 = (g1 - g0)^-1 I + (1 - theta) S / g0
            let rhs = s.scale((1.0 - theta) / g0).shift(1.0 / (g1 - g0));
            Ok(invert_or_degenerate(&rhs, "matrix gamma0")?.scale(theta).shift(g0))
        }
        MatrixPhase::Gamma1 => {
            // (1 - theta) (A - g1)^-1 = (g0 - g1)^-1 I + theta S / g1
            let rhs = s.scale(theta / g1).shift(1.0 / (g0 - g1));
            Ok(invert_or_degenerate(&rhs, "matrix gamma1")?.scale(1.0 - theta).shift(g1))
        }
    }
}

/// Polarization tensor of a sequential laminate.
pub fn laminate_polarization(spec: &LaminateSpec, phases: PhasePair) -> Result<SymTensor> {
    let (g0, g1) = (phases.gamma0(), phases.gamma1());
    let theta = spec.theta();
    let s = spec.lamination_tensor();
    match spec.matrix {
        MatrixPhase::Gamma0 => {
            let inv = s.scale((1.0 - theta) * (g1 - g0) / g0).shift(1.0);
            invert_or_degenerate(&inv, "matrix gamma0 polarization")
        }
        MatrixPhase::Gamma1 => {
            // (I - theta M)^-1 = I/(1-theta) + theta/(1-theta) k S rearranges to
            // M = (I + theta k S)^-1 (I + k S), a function of S alone; evaluating
            // it on the spectrum of S avoids the cancellation at small theta.
            let k = (g0 - g1) / g1;
            let eig = s.eigendecompose()?;
            let values: Vec<f64> = eig
                .values
                .iter()
                .map(|m| (1.0 + k * m) / (1.0 + theta * k * m))
                .collect();
            Ok(SymTensor::from_eigen(&values, &eig.vectors))
        }
    }
}

/// `sum_i lambda_i` on the upper zero-volume curve: `(N - 1) + gamma0/gamma1`.
pub fn upper_curve_trace(dim: usize, phases: PhasePair) -> f64 {
    (dim as f64 - 1.0) + phases.contrast()
}

/// `sum_i 1/lambda_i` on the lower zero-volume curve: `(N - 1) + gamma1/gamma0`.
pub fn lower_curve_inverse_trace(dim: usize, phases: PhasePair) -> f64 {
    (dim as f64 - 1.0) + 1.0 / phases.contrast()
}

fn check_target_range(target: &[f64], phases: PhasePair) -> Result<()> {
    let hi = phases.contrast();
    for (index, &value) in target.iter().enumerate() {
        if !(value >= 1.0 - RANGE_TOL && value <= hi + RANGE_TOL) {
            return Err(Error::TargetOutOfRange { index, value, lo: 1.0, hi });
        }
    }
    Ok(())
}

fn axes(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn check_frame(frame: &[Vec<f64>], dim: usize) -> Result<()> {
    if frame.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: frame.len() });
    }
    check_directions(dim, frame)?;
    for a in 0..dim {
        for b in a + 1..dim {
            let dot: f64 = frame[a].iter().zip(&frame[b]).map(|(x, y)| x * y).sum();
            if dot.abs() > UNIT_TOL {
                return Err(Error::InvalidSpec(format!("frame vectors {a} and {b} are not orthogonal")));
            }
        }
    }
    Ok(())
}

/// Weights from unit-sum raw weights, absorbing round-off so the sum is exactly 1
/// up to the last place.
fn normalize(raw: Vec<f64>) -> Vec<f64> {
    let clipped: Vec<f64> = raw.into_iter().map(|m| m.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    clipped.into_iter().map(|m| m / total).collect()
}

/// Rank-N laminate with matrix `gamma1` whose dilution limit has the given
/// eigenvalues on the coordinate axes. The target must lie on the upper curve.
pub fn design_laminate_for_eigenvalues(target: &[f64], theta: f64, phases: PhasePair) -> Result<LaminateSpec> {
    design_laminate_in_frame(target, &axes(target.len()), theta, phases)
}

/// As [`design_laminate_for_eigenvalues`], with the eigenvectors given explicitly.
pub fn design_laminate_in_frame(
    target: &[f64],
    frame: &[Vec<f64>],
    theta: f64,
    phases: PhasePair,
) -> Result<LaminateSpec> {
    let dim = target.len();
    check_frame(frame, dim)?;
    check_target_range(target, phases)?;
    let sum: f64 = target.iter().sum();
    let expected = upper_curve_trace(dim, phases);
    if (sum - expected).abs() > CURVE_TOL {
        return Err(Error::TargetOffCurve { what: "sum of eigenvalues", value: sum, expected });
    }
    let r = phases.contrast();
    let weights = normalize(target.iter().map(|l| (l - 1.0) / (r - 1.0)).collect());
    LaminateSpec::with_weights(dim, frame.to_vec(), weights, theta, MatrixPhase::Gamma1)
}

/// Rank-N laminate with matrix `gamma0` whose dilution limit lies on the lower
/// curve `sum 1/lambda_i = (N - 1) + gamma1/gamma0`.
pub fn design_lower_laminate_in_frame(
    target: &[f64],
    frame: &[Vec<f64>],
    theta: f64,
    phases: PhasePair,
) -> Result<LaminateSpec> {
    let dim = target.len();
    check_frame(frame, dim)?;
    check_target_range(target, phases)?;
    let inv_sum: f64 = target.iter().map(|l| 1.0 / l).sum();
    let expected = lower_curve_inverse_trace(dim, phases);
    if (inv_sum - expected).abs() > CURVE_TOL {
        return Err(Error::TargetOffCurve {
            what: "sum of inverse eigenvalues",
            value: inv_sum,
            expected,
        });
    }
    let k = 1.0 - 1.0 / phases.contrast();
    let weights = normalize(target.iter().map(|l| (1.0 - 1.0 / l) / k).collect());
    LaminateSpec::with_weights(dim, frame.to_vec(), weights, theta, MatrixPhase::Gamma0)
}

/// A zero-volume target written as a convex mixture of a point on the upper
/// curve (matrix `gamma1` laminate) and a point on the lower curve (matrix
/// `gamma0` laminate), both obtained by shifting the target along `(1, ..., 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroVolumeRealization {
    pub target: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
    pub upper_point: Vec<f64>,
    pub lower_point: Vec<f64>,
    /// Fraction of the upper laminate in the mixture.
    pub upper_share: f64,
    pub upper_weights: Vec<f64>,
    pub lower_weights: Vec<f64>,
}

impl ZeroVolumeRealization {
    /// Dilute polarization tensor at fraction `theta` of the mixed family.
    pub fn polarization(&self, theta: f64, phases: PhasePair) -> Result<SymTensor> {
        let dim = self.target.len();
        let upper = LaminateSpec::with_weights(
            dim,
            self.frame.clone(),
            self.upper_weights.clone(),
            theta,
            MatrixPhase::Gamma1,
        )?;
        let lower = LaminateSpec::with_weights(
            dim,
            self.frame.clone(),
            self.lower_weights.clone(),
            theta,
            MatrixPhase::Gamma0,
        )?;
        let s = self.upper_share;
        let mu = laminate_polarization(&upper, phases)?.scale(s);
        let ml = laminate_polarization(&lower, phases)?.scale(1.0 - s);
        mu.add(&ml)
    }

    /// Limit tensor `sum_i lambda_i f_i (x) f_i`.
    pub fn target_tensor(&self) -> SymTensor {
        SymTensor::rank_one_sum(self.target.len(), &self.frame, &self.target)
            .expect("frame validated at construction")
    }
}

/// Writes any point of the closed zero-volume region as a mixture of an upper
/// and a lower laminate limit. Points outside the region are rejected.
pub fn realize_zero_volume_target(
    target: &[f64],
    frame: Option<&[Vec<f64>]>,
    phases: PhasePair,
) -> Result<ZeroVolumeRealization> {
    let dim = target.len();
    let frame = frame.map(|f| f.to_vec()).unwrap_or_else(|| axes(dim));
    check_frame(&frame, dim)?;
    check_target_range(target, phases)
        .map_err(|e| Error::TargetOutsideRegion(e.to_string()))?;
    let upper = upper_curve_trace(dim, phases);
    let lower = lower_curve_inverse_trace(dim, phases);
    let sum: f64 = target.iter().sum();
    let inv_sum: f64 = target.iter().map(|l| 1.0 / l).sum();
    if sum > upper + CURVE_TOL {
        return Err(Error::TargetOutsideRegion(format!(
            "trace {sum} exceeds {upper}"
        )));
    }
    if inv_sum > lower + CURVE_TOL {
        return Err(Error::TargetOutsideRegion(format!(
            "trace of inverse {inv_sum} exceeds {lower}"
        )));
    }

    let t_up = ((upper - sum) / dim as f64).max(0.0);
    let t_low = if inv_sum >= lower {
        0.0
    } else {
        // g(t) = sum 1/(lambda_i + t) - lower is decreasing, g(0) < 0, g -> inf
        // as t -> -min lambda.
        let g = |t: f64| target.iter().map(|l| 1.0 / (l + t)).sum::<f64>() - lower;
        let min = target.iter().cloned().fold(f64::INFINITY, f64::min);
        let (mut a, mut b) = (-min * (1.0 - 1e-12), 0.0);
        while g(a) < 0.0 {
            a = 0.5 * (a - min);
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if g(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-16 * min {
                break;
            }
        }
        0.5 * (a + b)
    };

    let upper_point: Vec<f64> = target.iter().map(|l| l + t_up).collect();
    let lower_point: Vec<f64> = target.iter().map(|l| l + t_low).collect();
    let gap = t_up - t_low;
    let upper_share = if gap > 0.0 { -t_low / gap } else { 1.0 };

    // The shifted points keep the target's ordering and stay in the box for
    // every region point in 2-D; in higher dimensions the box is rechecked.
    check_target_range(&upper_point, phases).map_err(|e| Error::TargetOutsideRegion(e.to_string()))?;
    check_target_range(&lower_point, phases).map_err(|e| Error::TargetOutsideRegion(e.to_string()))?;
    let r = phases.contrast();
    let k = 1.0 - 1.0 / r;
    Ok(ZeroVolumeRealization {
        target: target.to_vec(),
        frame,
        upper_weights: normalize(upper_point.iter().map(|l| (l - 1.0) / (r - 1.0)).collect()),
        lower_weights: normalize(lower_point.iter().map(|l| (1.0 - 1.0 / l) / k).collect()),
        upper_point,
        lower_point,
        upper_share,
    })
}

/// Eigenvalues of the matrix-`gamma1` laminate polarization at fraction `theta`:
/// `lambda_i = (1 + k m_i) / (1 + theta k m_i)` with `k = (gamma0 - gamma1)/gamma1`.
pub fn dilution_eigenvalues(weights: &[f64], theta: f64, phases: PhasePair) -> Result<Vec<f64>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidFraction { value: theta, range: "(0, 1)" });
    }
    if let Some(m) = weights.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(Error::InvalidSpec(format!("weight {m} outside [0, 1]")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidSpec(format!("weights sum to {sum}, not 1")));
    }
    let k = phases.contrast() - 1.0;
    Ok(weights.iter().map(|m| (1.0 + k * m) / (1.0 + theta * k * m)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilutionTrace {
    pub thetas: Vec<f64>,
    pub tensors: Vec<SymTensor>,
    pub limit_estimate: SymTensor,
    /// Least-squares slope of `ln |M(theta_n) - target|` against `ln theta_n`.
    /// `NaN` when fewer than two deviations are nonzero.
    pub rate_estimate: f64,
}

impl DilutionTrace {
    pub fn limit_eigenvalues(&self) -> Result<Vec<f64>> {
        self.limit_estimate.eigenvalues()
    }
}

fn check_theta_sequence(thetas: &[f64]) -> Result<()> {
    if thetas.len() < 2 {
        return Err(Error::InvalidSequence("need at least two fractions".into()));
    }
    if let Some(t) = thetas.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidSequence(format!("fraction {t} outside (0, 1)")));
    }
    if let Some(w) = thetas.windows(2).find(|w| w[1] >= w[0]) {
        return Err(Error::InvalidSequence(format!(
            "not strictly decreasing: {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// First-order Richardson extrapolation to `theta = 0` from the last two terms.
pub fn richardson_limit(thetas: &[f64], tensors: &[SymTensor]) -> Result<SymTensor> {
    let n = thetas.len();
    if n < 2 || tensors.len() != n {
        return Err(Error::InvalidSequence("need two matching terms to extrapolate".into()));
    }
    let (ta, tb) = (thetas[n - 2], thetas[n - 1]);
    let (ma, mb) = (&tensors[n - 2], &tensors[n - 1]);
    mb.scale(ta).sub(&ma.scale(tb)).map(|d| d.scale(1.0 / (ta - tb)))
}

/// Least-squares slope of `ln y` against `ln x`, skipping nonpositive `y`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Dilute laminate family realizing `target` in the zero-volume limit, sampled
/// along `theta_sequence`.
pub fn run_dilution_study(target: &[f64], theta_sequence: &[f64], phases: PhasePair) -> Result<DilutionTrace> {
    check_theta_sequence(theta_sequence)?;
    let real = realize_zero_volume_target(target, None, phases)?;
    run_realization_study(&real, theta_sequence, phases)
}

pub fn run_realization_study(
    real: &ZeroVolumeRealization,
    theta_sequence: &[f64],
    phases: PhasePair,
) -> Result<DilutionTrace> {
    check_theta_sequence(theta_sequence)?;
    let tensors = theta_sequence
        .iter()
        .map(|&t| real.polarization(t, phases))
        .collect::<Result<Vec<_>>>()?;
    let limit_estimate = richardson_limit(theta_sequence, &tensors)?;
    let target = real.target_tensor();
    let deviations = tensors
        .iter()
        .map(|m| m.distance(&target))
        .collect::<Result<Vec<_>>>()?;
    Ok(DilutionTrace {
        thetas: theta_sequence.to_vec(),
        rate_estimate: log_log_slope(theta_sequence, &deviations),
        tensors,
        limit_estimate,
    })
}
