//! Boundary current perturbations caused by small inclusions in a Dirichlet
//! problem on the unit square, checked against the polarization-tensor
//! asymptotics in weak form.
//!
//! A boundary test function `phi` replaces the point data of the boundary
//! Green's function: every integral against `grad D(., y)` becomes an
//! integral against `grad G_phi`, where `G_phi` solves the background problem
//! with data `phi`.

pub mod domain;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell_solver::{self, Microstructure};
use crate::error::{Error, Result};
use crate::laminate::{log_log_slope, richardson_limit};
use crate::linalg::CgStats;
use crate::tensor::{PhasePair, SymTensor};
pub use domain::{ElementTensor, SquareGrid};

/// Smallest inclusion size, in elements, accepted by a problem.
pub const MIN_ELEMENTS_ACROSS: f64 = 4.0;
/// Smallest distance, in elements, between inclusions and the boundary.
pub const MIN_MARGIN_ELEMENTS: usize = 2;

/// Boundary data catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryFunction {
    LinearX,
    LinearY,
    Bilinear,
    /// `cos(2 pi k s)` with `s` the boundary arclength from the origin,
    /// counterclockwise, normalized to `[0, 1)`.
    FourierK { k: u32 },
}

impl BoundaryFunction {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        match *self {
            Self::LinearX => x,
            Self::LinearY => y,
            Self::Bilinear => x * y,
            Self::FourierK { k } => {
                let s = boundary_arclength(p);
                (2.0 * std::f64::consts::PI * k as f64 * s).cos()
            }
        }
    }
}

/// Normalized arclength of a point of the unit square's boundary.
fn boundary_arclength([x, y]: [f64; 2]) -> f64 {
    let s = if y == 0.0 {
        x
    } else if x == 1.0 {
        1.0 + y
    } else if y == 1.0 {
        3.0 - x
    } else {
        4.0 - y
    };
    s / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Inclusion {
    Disk { center: [f64; 2], radius: f64 },
    Square { center: [f64; 2], half_side: f64 },
    /// `count x count` cells tiling the square `[lower, lower + side]^2`, each
    /// holding a centred square inclusion of side `fill` times the cell side.
    Array { lower: [f64; 2], side: f64, count: usize, fill: f64 },
}

impl Inclusion {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Self::Disk { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) < radius,
            Self::Square { center, half_side } => {
                (p[0] - center[0]).abs() < half_side && (p[1] - center[1]).abs() < half_side
            }
            Self::Array { lower, side, count, fill } => {
                let cell = side / count as f64;
                (0..2).all(|d| {
                    let t = p[d] - lower[d];
                    if !(0.0..side).contains(&t) {
                        return false;
                    }
                    let local = t - (t / cell).floor() * cell;
                    (local - cell / 2.0).abs() < fill * cell / 2.0
                })
            }
        }
    }

    /// Smallest width of one inclusion.
    pub fn width(&self) -> f64 {
        match *self {
            Self::Disk { radius, .. } => 2.0 * radius,
            Self::Square { half_side, .. } => 2.0 * half_side,
            Self::Array { side, count, fill, .. } => fill * side / count as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Disk { radius, .. } => radius > 0.0,
            Self::Square { half_side, .. } => half_side > 0.0,
            Self::Array { side, count, fill, .. } => side > 0.0 && count > 0 && fill > 0.0 && fill < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProblem(format!("degenerate inclusion {self:?}")))
        }
    }
}

/// Unit-square Dirichlet problem with pixelated inclusions of phase `gamma1`
/// in a `gamma0` background. An element belongs to an inclusion when its
/// centre does.
#[derive(Debug, Clone)]
pub struct DomainProblem {
    grid: SquareGrid,
    phases: PhasePair,
    inclusions: Vec<Inclusion>,
    dirichlet: BoundaryFunction,
    chi: Vec<bool>,
}

impl DomainProblem {
    pub fn new(resolution: usize, phases: PhasePair, inclusions: Vec<Inclusion>, dirichlet: BoundaryFunction) -> Result<Self> {
        if resolution < 2 * MIN_MARGIN_ELEMENTS + 1 {
            return Err(Error::InvalidProblem(format!("resolution {resolution} too small")));
        }
        let grid = SquareGrid::new(resolution);
        for inc in &inclusions {
            inc.validate()?;
            if inc.width() * resolution as f64 + 1e-9 < MIN_ELEMENTS_ACROSS {
                return Err(Error::UnresolvedInclusion(format!(
                    "{inc:?} spans {:.2} elements at resolution {resolution}, need {MIN_ELEMENTS_ACROSS}",
                    inc.width() * resolution as f64
                )));
            }
        }
        let chi: Vec<bool> = (0..grid.element_count())
            .map(|e| {
                let c = grid.element_centre(e);
                inclusions.iter().any(|inc| inc.contains(c))
            })
            .collect();
        let m = MIN_MARGIN_ELEMENTS;
        for (e, _) in chi.iter().enumerate().filter(|(_, &c)| c) {
            let (ex, ey) = (e % resolution, e / resolution);
            if ex.min(ey) < m || ex.max(ey) + m >= resolution {
                return Err(Error::InvalidProblem(format!(
                    "inclusion element ({ex}, {ey}) closer than {m} elements to the boundary"
                )));
            }
        }
        Ok(Self { grid, phases, inclusions, dirichlet, chi })
    }

    pub fn grid(&self) -> SquareGrid {
        self.grid
    }

    pub fn resolution(&self) -> usize {
        self.grid.res
    }

    pub fn phases(&self) -> PhasePair {
        self.phases
    }

    pub fn inclusions(&self) -> &[Inclusion] {
        &self.inclusions
    }

    pub fn dirichlet(&self) -> BoundaryFunction {
        self.dirichlet
    }

    /// Inclusion indicator per element.
    pub fn chi(&self) -> &[bool] {
        &self.chi
    }

    /// `|omega_eps|`, the pixel area of the inclusions.
    pub fn inclusion_volume(&self) -> f64 {
        let h = self.grid.h();
        self.chi.iter().filter(|&&c| c).count() as f64 * h * h
    }

    pub fn inhomogeneous_medium(&self) -> Vec<ElementTensor> {
        self.chi
            .iter()
            .map(|&c| domain::scalar_entries(self.phases.conductivity(c)))
            .collect()
    }

    pub fn background_medium(&self) -> Vec<ElementTensor> {
        vec![domain::scalar_entries(self.phases.gamma0()); self.grid.element_count()]
    }

    /// `gamma*` on the elements of `region`, `gamma0 I` elsewhere.
    pub fn effective_medium(&self, region: &[bool], gamma_star: &SymTensor) -> Result<Vec<ElementTensor>> {
        if gamma_star.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: gamma_star.dim() });
        }
        let inside = domain::tensor_entries(gamma_star);
        let outside = domain::scalar_entries(self.phases.gamma0());
        Ok(region.iter().map(|&r| if r { inside } else { outside }).collect())
    }
}

/// Which conductivity a Dirichlet solve uses.
#[derive(Debug, Clone, Copy)]
pub enum Conductivity<'a> {
    Inhomogeneous,
    Homogenized(&'a [ElementTensor]),
    Background,
}

#[derive(Debug, Clone)]
pub struct DirichletSolution {
    /// Nodal potential.
    pub values: Vec<f64>,
    pub stats: CgStats,
}

/// Solves the problem's Dirichlet data with the chosen conductivity.
pub fn solve_dirichlet(problem: &DomainProblem, choice: Conductivity<'_>, tol: f64) -> Result<DirichletSolution> {
    solve_with_data(problem, choice, problem.dirichlet, None, tol)
}

/// Dirichlet solve with arbitrary catalog data and an optional initial guess.
pub fn solve_with_data(
    problem: &DomainProblem,
    choice: Conductivity<'_>,
    data: BoundaryFunction,
    guess: Option<&[f64]>,
    tol: f64,
) -> Result<DirichletSolution> {
    let owned;
    let medium: &[ElementTensor] = match choice {
        Conductivity::Inhomogeneous => {
            owned = problem.inhomogeneous_medium();
            &owned
        }
        Conductivity::Background => {
            owned = problem.background_medium();
            &owned
        }
        Conductivity::Homogenized(m) => {
            if m.len() != problem.grid.element_count() {
                return Err(Error::DimensionMismatch {
                    expected: problem.grid.element_count(),
                    got: m.len(),
                });
            }
            m
        }
    };
    let (values, stats) = problem.grid.solve_dirichlet(medium, |p| data.eval(p), guess, tol)?;
    Ok(DirichletSolution { values, stats })
}

/// The boundary functional `int (gamma_eps du_eps/dnu - gamma* du/dnu) phi`
/// in both of its discrete forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalValue {
    /// `int (gamma1 - gamma0) chi grad u_eps . grad G + int (gamma0 I - gamma*) grad u . grad G`.
    pub volume: f64,
    /// Consistent boundary fluxes (the boundary rows of the residual) paired with `phi`.
    pub boundary: f64,
}

pub fn boundary_functional(
    problem: &DomainProblem,
    u_eps: &[f64],
    u_hom: &[f64],
    gamma_star: &[ElementTensor],
    phi: BoundaryFunction,
    g_phi: &[f64],
) -> FunctionalValue {
    let grid = problem.grid;
    let phi_nodal: Vec<f64> = (0..grid.node_count())
        .map(|n| if grid.is_boundary(n) { phi.eval(grid.node_position(n)) } else { 0.0 })
        .collect();
    functional_with_nodal_data(problem, u_eps, u_hom, gamma_star, &phi_nodal, g_phi)
}

/// [`boundary_functional`] with `phi` given by its boundary node values; the
/// interior entries of `phi` are ignored.
pub fn functional_with_nodal_data(
    problem: &DomainProblem,
    u_eps: &[f64],
    u_hom: &[f64],
    gamma_star: &[ElementTensor],
    phi: &[f64],
    g_phi: &[f64],
) -> FunctionalValue {
    let grid = problem.grid;
    let g0 = problem.phases.gamma0();
    let contrast = domain::scalar_entries(problem.phases.gamma1() - g0);
    let mut volume = 0.0;
    for (e, t) in gamma_star.iter().enumerate() {
        if problem.chi[e] {
            volume += grid.element_energy(e, &contrast, u_eps, g_phi);
        }
        let d = [g0 - t[0], g0 - t[1], -t[2]];
        volume += grid.element_energy(e, &d, u_hom, g_phi);
    }

    let mut flux_eps = vec![0.0; grid.node_count()];
    let mut flux_hom = vec![0.0; grid.node_count()];
    grid.apply(&problem.inhomogeneous_medium(), u_eps, &mut flux_eps);
    grid.apply(gamma_star, u_hom, &mut flux_hom);
    let boundary = grid
        .boundary_nodes()
        .map(|n| phi[n] * (flux_eps[n] - flux_hom[n]))
        .sum();
    FunctionalValue { volume, boundary }
}

/// Leading term of the boundary current perturbation,
/// `|omega| int (gamma1 - gamma0) M grad u . grad G dmu + int (gamma0 I - gamma*) grad u . grad G`,
/// with `mu` uniform over the elements of `support`.
pub fn asymptotic_prediction(
    problem: &DomainProblem,
    m_theta: &SymTensor,
    support: &[bool],
    gamma_star: &[ElementTensor],
    u_hom: &[f64],
    g_phi: &[f64],
    inclusion_volume: f64,
) -> Result<f64> {
    let grid = problem.grid;
    let count = support.iter().filter(|&&s| s).count();
    if count == 0 {
        return Err(Error::InvalidProblem("empty polarization support".into()));
    }
    if m_theta.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: m_theta.dim() });
    }
    let g0 = problem.phases.gamma0();
    let dg = problem.phases.gamma1() - g0;
    let m = domain::tensor_entries(m_theta);
    let h2 = grid.h() * grid.h();
    let weight = inclusion_volume * dg / (count as f64 * h2);
    let mut total = 0.0;
    for (e, t) in gamma_star.iter().enumerate() {
        if support[e] {
            // mu has density 1 / |support| on its elements
            total += weight * grid.element_energy(e, &m, u_hom, g_phi);
        }
        let d = [g0 - t[0], g0 - t[1], -t[2]];
        total += grid.element_energy(e, &d, u_hom, g_phi);
    }
    Ok(total)
}

/// Zero-volume polarization tensor of a pixel pattern, from periodic cells in
/// which the pattern is diluted.
#[derive(Debug, Clone, Serialize)]
pub struct DilutePolarization {
    pub cell_sides: Vec<usize>,
    pub thetas: Vec<f64>,
    pub tensors: Vec<SymTensor>,
    pub limit: SymTensor,
}

/// Embeds the `width x height` pattern (row-major, x fastest) centred in
/// periodic cells of side `factor * max(width, height)` for each factor, and
/// extrapolates `M^theta` linearly to `theta = 0` from the last two cells.
pub fn dilute_polarization(
    pattern: &[bool],
    width: usize,
    height: usize,
    factors: &[usize],
    phases: PhasePair,
    tol: f64,
) -> Result<DilutePolarization> {
    if pattern.len() != width * height || !pattern.iter().any(|&c| c) {
        return Err(Error::EmptyInclusion);
    }
    if factors.len() < 2 || factors.iter().any(|&f| f < 2) {
        return Err(Error::InvalidSequence("need at least two dilution factors >= 2".into()));
    }
    let side = width.max(height);
    let mut out = DilutePolarization {
        cell_sides: vec![],
        thetas: vec![],
        tensors: vec![],
        limit: SymTensor::zeros(2),
    };
    for &f in factors {
        let m = (f * side).div_ceil(2) * 2;
        let (ox, oy) = ((m - width) / 2, (m - height) / 2);
        let micro = Microstructure::from_fn(2, m, |c| {
            let (x, y) = (c[0].wrapping_sub(ox), c[1].wrapping_sub(oy));
            x < width && y < height && pattern[x + width * y]
        })?;
        let res = cell_solver::homogenize(&micro, phases, tol)?;
        out.cell_sides.push(m);
        out.thetas.push(micro.theta());
        out.tensors.push(res.m_theta_direct.ok_or(Error::EmptyInclusion)?);
    }
    out.limit = richardson_limit(&out.thetas, &out.tensors)?;
    Ok(out)
}

/// Bounding-box crop of a problem's inclusion pixels: `(pattern, width, height)`.
pub fn inclusion_pattern(problem: &DomainProblem) -> Result<(Vec<bool>, usize, usize)> {
    let r = problem.resolution();
    let cells: Vec<(usize, usize)> = (0..r * r).filter(|&e| problem.chi[e]).map(|e| (e % r, e / r)).collect();
    if cells.is_empty() {
        return Err(Error::EmptyInclusion);
    }
    let (x0, x1) = (cells.iter().map(|c| c.0).min().unwrap(), cells.iter().map(|c| c.0).max().unwrap());
    let (y0, y1) = (cells.iter().map(|c| c.1).min().unwrap(), cells.iter().map(|c| c.1).max().unwrap());
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    let mut pattern = vec![false; w * h];
    for (x, y) in cells {
        pattern[(x - x0) + w * (y - y0)] = true;
    }
    Ok((pattern, w, h))
}

/// Zero-volume inclusions (`delta = 0`, `gamma* = gamma0 I`) or a periodic
/// array of fixed fill (`delta > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Dilute,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub epsilon: f64,
    pub inclusions: Vec<Inclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub resolution: usize,
    pub gamma0: f64,
    pub gamma1: f64,
    pub f: BoundaryFunction,
    pub phi: BoundaryFunction,
    pub regime: Regime,
    pub layouts: Vec<Layout>,
    /// Dilution factors for the zero-volume polarization tensor.
    #[serde(default = "default_factors")]
    pub dilution_factors: Vec<usize>,
}

fn default_factors() -> Vec<usize> {
    vec![2, 4]
}

impl StudySpec {
    pub fn phases(&self) -> Result<PhasePair> {
        PhasePair::new(self.gamma0, self.gamma1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub epsilon: f64,
    pub volume: f64,
    pub measured: f64,
    pub predicted: f64,
    pub residual: f64,
    /// Consistent-flux form of `measured`.
    pub measured_boundary: f64,
    pub m_theta: SymTensor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    /// Least-squares slope of `ln |residual|` against `ln epsilon`.
    pub decay_rate: Option<f64>,
}

impl StudyTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,volume,measured,predicted,residual\n");
        for r in &self.rows {
            s += &format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.epsilon, r.volume, r.measured, r.predicted, r.residual
            );
        }
        s
    }
}

/// Region mask of a periodic array and its pixel cell. The cell side and the
/// array corner must fall on grid lines.
fn array_cell(problem: &DomainProblem) -> Result<(Vec<bool>, Microstructure)> {
    let (lower, side, count) = match problem.inclusions() {
        [Inclusion::Array { lower, side, count, .. }] => (*lower, *side, *count),
        _ => {
            return Err(Error::InvalidProblem(
                "the periodic regime needs exactly one array inclusion".into(),
            ))
        }
    };
    let r = problem.resolution() as f64;
    let to_pixels = |v: f64, what: &str| -> Result<usize> {
        let p = v * r;
        if (p - p.round()).abs() > 1e-6 {
            return Err(Error::InvalidProblem(format!("array {what} {v} is not a whole number of elements")));
        }
        Ok(p.round() as usize)
    };
    let (x0, y0) = (to_pixels(lower[0], "corner")?, to_pixels(lower[1], "corner")?);
    let cell = to_pixels(side / count as f64, "cell side")?;
    let span = cell * count;
    let res = problem.resolution();
    let region: Vec<bool> = (0..res * res)
        .map(|e| {
            let (x, y) = (e % res, e / res);
            (x0..x0 + span).contains(&x) && (y0..y0 + span).contains(&y)
        })
        .collect();
    let micro = Microstructure::from_fn(2, cell, |c| problem.chi[(x0 + c[0]) + res * (y0 + c[1])])?;
    Ok((region, micro))
}

/// One row of the study: measured functional against the leading term.
pub fn run_layout(spec: &StudySpec, layout: &Layout, tol: f64) -> Result<StudyRow> {
    let phases = spec.phases()?;
    let problem = DomainProblem::new(spec.resolution, phases, layout.inclusions.clone(), spec.f)?;
    let volume = problem.inclusion_volume();
    if volume == 0.0 {
        return Err(Error::EmptyInclusion);
    }
    let (medium, m_theta, support) = match spec.regime {
        Regime::Dilute => {
            let (pattern, w, h) = inclusion_pattern(&problem)?;
            let m0 = dilute_polarization(&pattern, w, h, &spec.dilution_factors, phases, tol)?.limit;
            (problem.background_medium(), m0, problem.chi.clone())
        }
        Regime::Periodic => {
            let (region, cell) = array_cell(&problem)?;
            let res = cell_solver::homogenize(&cell, phases, tol)?;
            let m = res.m_theta_relation.ok_or(Error::EmptyInclusion)?;
            (problem.effective_medium(&region, &res.gamma_star)?, m, region)
        }
    };
    let u_hom = solve_dirichlet(&problem, Conductivity::Homogenized(&medium), tol)?.values;
    let u_eps = solve_with_data(&problem, Conductivity::Inhomogeneous, spec.f, Some(&u_hom), tol)?.values;
    let g_phi = solve_with_data(&problem, Conductivity::Background, spec.phi, None, tol)?.values;
    let measured = boundary_functional(&problem, &u_eps, &u_hom, &medium, spec.phi, &g_phi);
    let predicted = asymptotic_prediction(&problem, &m_theta, &support, &medium, &u_hom, &g_phi, volume)?;
    Ok(StudyRow {
        epsilon: layout.epsilon,
        volume,
        measured: measured.volume,
        predicted,
        residual: measured.volume - predicted,
        measured_boundary: measured.boundary,
        m_theta,
    })
}

/// Runs every layout of the family, in parallel, keeping the input order.
pub fn convergence_study(spec: &StudySpec, tol: f64) -> Result<StudyTable> {
    let rows: Vec<StudyRow> = spec
        .layouts
        .par_iter()
        .map(|l| run_layout(spec, l, tol))
        .collect::<Result<_>>()?;
    let decay_rate = (rows.len() >= 2).then(|| {
        let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
        let res: Vec<f64> = rows.iter().map(|r| r.residual.abs()).collect();
        log_log_slope(&eps, &res)
    });
    Ok(StudyTable { rows, decay_rate })
}

/// The functional without inclusions and with `gamma* = gamma0 I`, whose exact
/// value is zero: its size is the discretization and solver noise floor.
pub fn no_inclusion_control(
    resolution: usize,
    phases: PhasePair,
    f: BoundaryFunction,
    phi: BoundaryFunction,
    tol: f64,
) -> Result<FunctionalValue> {
    let problem = DomainProblem::new(resolution, phases, vec![], f)?;
    let medium = problem.background_medium();
    let u_hom = solve_dirichlet(&problem, Conductivity::Homogenized(&medium), tol)?.values;
    let u_eps = solve_dirichlet(&problem, Conductivity::Inhomogeneous, tol)?.values;
    let g_phi = solve_with_data(&problem, Conductivity::Background, phi, None, tol)?.values;
    Ok(boundary_functional(&problem, &u_eps, &u_hom, &medium, phi, &g_phi))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-11;

    fn phases() -> PhasePair {
        PhasePair::new(2.0, 1.0).unwrap()
    }

    fn disk(r: f64) -> Vec<Inclusion> {
        vec![Inclusion::Disk { center: [0.5, 0.5], radius: r }]
    }

    fn solves(problem: &DomainProblem, medium: &[ElementTensor], phi: BoundaryFunction) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let u_hom = solve_dirichlet(problem, Conductivity::Homogenized(medium), TOL).unwrap().values;
        let u_eps = solve_dirichlet(problem, Conductivity::Inhomogeneous, TOL).unwrap().values;
        let g = solve_with_data(problem, Conductivity::Background, phi, None, TOL).unwrap().values;
        (u_eps, u_hom, g)
    }

    #[test]
    fn linear_data_solves_exactly() {
        let p = DomainProblem::new(16, phases(), vec![], BoundaryFunction::LinearX).unwrap();
        let grid = p.grid();
        let aniso = vec![[1.7, 0.4, 0.0]; grid.element_count()];
        for choice in [Conductivity::Background, Conductivity::Homogenized(&aniso)] {
            let u = solve_dirichlet(&p, choice, TOL).unwrap().values;
            for n in 0..grid.node_count() {
                assert!((u[n] - grid.node_position(n)[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bilinear_data_is_harmonic() {
        let coarse = DomainProblem::new(8, phases(), vec![], BoundaryFunction::Bilinear).unwrap();
        let fine = DomainProblem::new(32, phases(), vec![], BoundaryFunction::Bilinear).unwrap();
        let uc = solve_dirichlet(&coarse, Conductivity::Background, TOL).unwrap().values;
        let uf = solve_dirichlet(&fine, Conductivity::Background, TOL).unwrap().values;
        let mut max_err: f64 = 0.0;
        for n in 0..coarse.grid().node_count() {
            let [x, y] = coarse.grid().node_position(n);
            // same physical node on the fine grid
            let m = (x * 32.0).round() as usize + 33 * (y * 32.0).round() as usize;
            max_err = max_err.max((uc[n] - uf[m]).abs()).max((uc[n] - x * y).abs());
        }
        assert!(max_err < 1e-9, "{max_err}");
    }

    #[test]
    fn functional_vanishes_without_inclusions() {
        for phi in [BoundaryFunction::LinearX, BoundaryFunction::Bilinear, BoundaryFunction::FourierK { k: 2 }] {
            let c = no_inclusion_control(32, phases(), BoundaryFunction::FourierK { k: 1 }, phi, TOL).unwrap();
            assert!(c.volume.abs() < 10.0 * TOL && c.boundary.abs() < 10.0 * TOL, "{c:?}");
        }
    }

    #[test]
    fn constant_test_function_sees_no_current() {
        let p = DomainProblem::new(64, phases(), disk(0.15), BoundaryFunction::LinearX).unwrap();
        let medium = p.background_medium();
        let (ue, uh, g) = solves(&p, &medium, BoundaryFunction::FourierK { k: 0 });
        let v = boundary_functional(&p, &ue, &uh, &medium, BoundaryFunction::FourierK { k: 0 }, &g);
        assert!(v.volume.abs() < 10.0 * TOL && v.boundary.abs() < 10.0 * TOL, "{v:?}");
    }

    #[test]
    fn volume_and_flux_forms_agree() {
        let p = DomainProblem::new(128, phases(), disk(0.1), BoundaryFunction::LinearX).unwrap();
        let medium = p.background_medium();
        let (ue, uh, g) = solves(&p, &medium, BoundaryFunction::LinearX);
        let v = boundary_functional(&p, &ue, &uh, &medium, BoundaryFunction::LinearX, &g);
        assert!((v.volume - v.boundary).abs() <= 0.05 * v.volume.abs(), "{v:?}");
    }

    #[test]
    fn functional_is_linear_in_the_test_function() {
        let p = DomainProblem::new(48, phases(), disk(0.12), BoundaryFunction::FourierK { k: 1 }).unwrap();
        let grid = p.grid();
        let medium = p.background_medium();
        let (ue, uh, gx) = solves(&p, &medium, BoundaryFunction::LinearX);
        let gy = solve_with_data(&p, Conductivity::Background, BoundaryFunction::LinearY, None, TOL).unwrap().values;
        let nodal = |f: BoundaryFunction| -> Vec<f64> { (0..grid.node_count()).map(|n| f.eval(grid.node_position(n))).collect() };
        let (px, py) = (nodal(BoundaryFunction::LinearX), nodal(BoundaryFunction::LinearY));
        let comb = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| 0.7 * x - 1.3 * y).collect() };
        let fx = functional_with_nodal_data(&p, &ue, &uh, &medium, &px, &gx);
        let fy = functional_with_nodal_data(&p, &ue, &uh, &medium, &py, &gy);
        let fc = functional_with_nodal_data(&p, &ue, &uh, &medium, &comb(&px, &py), &comb(&gx, &gy));
        for (c, x, y) in [(fc.volume, fx.volume, fy.volume), (fc.boundary, fx.boundary, fy.boundary)] {
            assert!((c - (0.7 * x - 1.3 * y)).abs() <= 1e-12 * (x.abs() + y.abs()));
        }
    }

    #[test]
    fn leading_term_has_the_measured_sign() {
        let p = DomainProblem::new(64, phases(), disk(0.1), BoundaryFunction::LinearX).unwrap();
        let medium = p.background_medium();
        let (ue, uh, g) = solves(&p, &medium, BoundaryFunction::LinearX);
        let v = boundary_functional(&p, &ue, &uh, &medium, BoundaryFunction::LinearX, &g);
        let m = SymTensor::scalar(2, 4.0 / 3.0);
        let pred = asymptotic_prediction(&p, &m, p.chi(), &medium, &uh, &g, p.inclusion_volume()).unwrap();
        assert!(v.volume < 0.0 && pred < 0.0);
    }

    #[test]
    fn prediction_zero_cases() {
        let p = DomainProblem::new(32, phases(), disk(0.2), BoundaryFunction::LinearX).unwrap();
        let medium = p.background_medium();
        let (_, uh, g) = solves(&p, &medium, BoundaryFunction::LinearY);
        let m = SymTensor::diag(&[1.2, 0.9]);
        assert_eq!(asymptotic_prediction(&p, &m, p.chi(), &medium, &uh, &g, 0.0).unwrap(), 0.0);

        // periodic array whose volume equals delta
        let spec = StudySpec {
            resolution: 64,
            gamma0: 2.0,
            gamma1: 1.0,
            f: BoundaryFunction::LinearX,
            phi: BoundaryFunction::LinearY,
            regime: Regime::Periodic,
            layouts: vec![Layout {
                epsilon: 0.125,
                inclusions: vec![Inclusion::Array { lower: [0.25, 0.25], side: 0.5, count: 4, fill: 0.5 }],
            }],
            dilution_factors: default_factors(),
        };
        let row = run_layout(&spec, &spec.layouts[0], TOL).unwrap();
        assert!((row.volume - 0.0625).abs() < 1e-15);
        assert!(row.predicted.abs() < 1e-14, "{}", row.predicted);
    }

    #[test]
    fn resolved_disk_dilutes_to_the_disk_tensor() {
        let r = 12.0;
        let w = 24;
        let pattern: Vec<bool> = (0..w * w)
            .map(|i| (((i % w) as f64 + 0.5 - r).hypot((i / w) as f64 + 0.5 - r)) < r)
            .collect();
        let d = dilute_polarization(&pattern, w, w, &[2, 4], phases(), 1e-10).unwrap();
        let expected = 2.0 * 2.0 / 3.0;
        assert!(d.limit.distance(&SymTensor::scalar(2, expected)).unwrap() < 0.01 * expected);
        assert!(d.thetas[1] < d.thetas[0]);
    }

    #[test]
    fn validation() {
        let tiny = DomainProblem::new(64, phases(), disk(0.02), BoundaryFunction::LinearX);
        assert!(matches!(tiny, Err(Error::UnresolvedInclusion(_))));
        let edge = vec![Inclusion::Disk { center: [0.05, 0.5], radius: 0.04 }];
        assert!(matches!(DomainProblem::new(64, phases(), edge, BoundaryFunction::LinearX), Err(Error::InvalidProblem(_))));
        let spec = StudySpec {
            resolution: 32,
            gamma0: 2.0,
            gamma1: 1.0,
            f: BoundaryFunction::LinearX,
            phi: BoundaryFunction::LinearX,
            regime: Regime::Dilute,
            layouts: vec![],
            dilution_factors: default_factors(),
        };
        let t = convergence_study(&spec, TOL).unwrap();
        assert!(t.rows.is_empty() && t.decay_rate.is_none());
        assert_eq!(t.to_csv(), "epsilon,volume,measured,predicted,residual\n");
    }

    #[test]
    fn fourier_data_is_continuous_along_the_boundary() {
        let f = BoundaryFunction::FourierK { k: 3 };
        assert!((f.eval([0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((f.eval([1.0, 0.0]) - f.eval([1.0, 1e-12])).abs() < 1e-9);
        assert!((f.eval([0.0, 1e-12]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"resolution":64,"gamma0":2,"gamma1":1,"f":{"kind":"linear_x"},
            "phi":{"kind":"fourier_k","k":2},"regime":"dilute",
            "layouts":[{"epsilon":0.1,"inclusions":[{"shape":"disk","center":[0.5,0.5],"radius":0.1}]}]}"#;
        let spec: StudySpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.dilution_factors, vec![2, 4]);
        let back: StudySpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
