//! Periodic homogenization of pixelated two-phase cells.
//!
//! The cell problem in direction `i` is solved for the periodic fluctuation
//! `phi^i` of the corrector `y_i + phi^i` with conforming multilinear elements.
//! The effective tensor and the polarization tensor are then exact element
//! integrals of the corrector gradients.

pub mod fem;
pub mod microstructure;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, BoundsReport};
use crate::error::{Error, Result};
use crate::linalg::{self, CgStats};
use crate::tensor::{PhasePair, SymTensor};
use fem::PeriodicGrid;
pub use microstructure::{Encoding, Microstructure, MicrostructureFile, NamedGeometry};

/// `M = (gamma* - gamma0 I) / (theta (gamma1 - gamma0))`.
pub fn polarization_from_effective(gamma_star: &SymTensor, theta: f64, phases: PhasePair) -> Result<SymTensor> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidFraction { value: theta, range: "(0, 1]" });
    }
    if theta == 0.0 {
        return Err(Error::ZeroFraction);
    }
    let denom = theta * (phases.gamma1() - phases.gamma0());
    Ok(gamma_star.shift(-phases.gamma0()).scale(1.0 / denom))
}

/// Inverse of [`polarization_from_effective`].
pub fn effective_from_polarization(m: &SymTensor, theta: f64, phases: PhasePair) -> SymTensor {
    m.scale(theta * (phases.gamma1() - phases.gamma0())).shift(phases.gamma0())
}

/// Periodic fluctuations of the correctors, one nodal vector per direction.
#[derive(Debug, Clone)]
pub struct CorrectorField {
    pub dim: usize,
    pub resolution: usize,
    /// `fluctuations[i][node]`, mean-zero.
    pub fluctuations: Vec<Vec<f64>>,
    pub stats: Vec<CgStats>,
}

impl CorrectorField {
    /// Nodal value of the full corrector `y_i + phi^i` on the unit cell.
    pub fn corrector_value(&self, i: usize, node: usize) -> f64 {
        let grid = PeriodicGrid::new(self.dim, self.resolution);
        grid.coords(node)[i] as f64 * grid.h + self.fluctuations[i][node]
    }
}

fn element_conductivity(micro: &Microstructure, phases: PhasePair) -> Vec<f64> {
    micro.chi().iter().map(|&c| phases.conductivity(c)).collect()
}

/// Iteration cap `50 R^(N/2)`.
fn iteration_cap(micro: &Microstructure) -> usize {
    (50.0 * (micro.resolution() as f64).powf(micro.dim() as f64 / 2.0)).ceil() as usize
}

/// Solves the `N` cell problems to relative residual `tol`.
pub fn solve_correctors(micro: &Microstructure, phases: PhasePair, tol: f64) -> Result<CorrectorField> {
    if !(tol > 0.0) {
        return Err(Error::InvalidProblem(format!("solver tolerance {tol} must be positive")));
    }
    let grid = PeriodicGrid::new(micro.dim(), micro.resolution());
    let gamma = element_conductivity(micro, phases);
    let inv_diag: Vec<f64> = grid.diagonal(&gamma).iter().map(|d| 1.0 / d).collect();
    let cap = iteration_cap(micro);
    // A load at rounding level (layers parallel to direction i, or a
    // homogeneous cell) means the exact fluctuation is zero.
    let negligible = 1e-13 * phases.gamma0() * grid.h.powi(grid.dim as i32 - 1) * (grid.n as f64).sqrt();

    let coarse = fem::PlaneCoarseSpace::new(&grid, &gamma);

    let solved: Vec<(Vec<f64>, CgStats)> = (0..micro.dim())
        .into_par_iter()
        .map(|i| {
            let mut f = grid.cell_load(&gamma, i);
            linalg::project_mean_zero(&mut f);
            let mut x = vec![0.0; grid.n];
            if linalg::norm(&f) <= negligible {
                return Ok((x, CgStats { iterations: 0, relative_residual: 0.0 }));
            }
            // start from the coarse solution; exact when the cell is layered
            coarse.add_correction(&f, &mut x);
            let stats = linalg::pcg(
                |v, out| grid.apply(&gamma, v, out),
                |r, z| {
                    for ((zi, ri), di) in z.iter_mut().zip(r).zip(&inv_diag) {
                        *zi = ri * di;
                    }
                    coarse.add_correction(r, z);
                },
                &f,
                &mut x,
                tol,
                cap,
                true,
            )?;
            Ok((x, stats))
        })
        .collect::<Result<_>>()?;
    let (fluctuations, stats) = solved.into_iter().unzip();
    Ok(CorrectorField {
        dim: micro.dim(),
        resolution: micro.resolution(),
        fluctuations,
        stats,
    })
}

/// Raw (unsymmetrized) element integrals `sum_e w_e int_e (e_j + grad phi^j) . e_i`
/// for the conductivity and for the inclusion indicator.
fn integrate(field: &CorrectorField, micro: &Microstructure, phases: PhasePair) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if field.dim != micro.dim() || field.resolution != micro.resolution() {
        return Err(Error::DimensionMismatch {
            expected: micro.resolution(),
            got: field.resolution,
        });
    }
    let dim = micro.dim();
    let grid = PeriodicGrid::new(dim, micro.resolution());
    let chi = micro.chi();
    let mut g = vec![vec![0.0; dim]; dim];
    let mut m = vec![vec![0.0; dim]; dim];
    for (j, phi) in field.fluctuations.iter().enumerate() {
        if phi.iter().all(|&v| v == 0.0) {
            continue;
        }
        for i in 0..dim {
            let grads = grid.element_gradient_integrals(phi, i);
            let (mut sg, mut sm) = (0.0, 0.0);
            for (e, v) in grads.iter().enumerate() {
                sg += phases.conductivity(chi[e]) * v;
                if chi[e] {
                    sm += v;
                }
            }
            g[i][j] = sg;
            m[i][j] = sm;
        }
    }
    let vol = grid.h.powi(dim as i32);
    let mean_gamma = micro.theta() * phases.gamma1() + (1.0 - micro.theta()) * phases.gamma0();
    let incl_vol = micro.inclusion_count() as f64 * vol;
    for i in 0..dim {
        g[i][i] += mean_gamma;
        m[i][i] += incl_vol;
    }
    Ok((g, m))
}

/// `gamma*_ij = int_Y gamma (e_j + grad phi^j) . e_i`, symmetrized, with the
/// removed asymmetry.
pub fn effective_tensor(field: &CorrectorField, micro: &Microstructure, phases: PhasePair) -> Result<(SymTensor, f64)> {
    let (g, _) = integrate(field, micro, phases)?;
    SymTensor::symmetrized(&g)
}

/// `M_ij = (1/theta) int_Y chi (e_j + grad phi^j) . e_i`, symmetrized.
pub fn polarization_direct(field: &CorrectorField, micro: &Microstructure) -> Result<(SymTensor, f64)> {
    if micro.inclusion_count() == 0 {
        return Err(Error::EmptyInclusion);
    }
    // the phase values do not enter the inclusion integral
    let phases = PhasePair::new(2.0, 1.0)?;
    let (_, m) = integrate(field, micro, phases)?;
    polarization_from_integral(&m, micro.theta())
}

fn polarization_from_integral(m: &[Vec<f64>], theta: f64) -> Result<(SymTensor, f64)> {
    let rows: Vec<Vec<f64>> = m.iter().map(|row| row.iter().map(|v| v / theta).collect()).collect();
    SymTensor::symmetrized(&rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogenizationResult {
    pub dim: usize,
    pub resolution: usize,
    pub theta: f64,
    pub gamma_star: SymTensor,
    /// Inclusion average of the corrector gradients; absent when `theta = 0`.
    pub m_theta_direct: Option<SymTensor>,
    /// `(gamma* - gamma0 I) / (theta (gamma1 - gamma0))`; absent when `theta = 0`.
    pub m_theta_relation: Option<SymTensor>,
    /// Frobenius distance between the two polarization routes.
    pub relation_gap: Option<f64>,
    /// Largest removed asymmetry of `gamma*`.
    pub asymmetry: f64,
    /// The cell is periodic, so the measure of the inclusions is uniform with
    /// density `theta / int theta = 1` on the cell.
    pub measure_density: &'static str,
    pub solver: Vec<CgStats>,
    /// Mean bounds on `gamma*`: signed slacks `(lambda_min - gamma_h, gamma_a - lambda_max)`.
    pub mean_bound_slacks: (f64, f64),
    /// Bounds certificate for `m_theta_relation` (pointwise only at `theta = 1`).
    pub bounds: Option<BoundsReport>,
}

pub fn homogenize(micro: &Microstructure, phases: PhasePair, tol: f64) -> Result<HomogenizationResult> {
    let field = solve_correctors(micro, phases, tol)?;
    homogenize_with(&field, micro, phases)
}

/// Post-processing of already solved correctors.
pub fn homogenize_with(field: &CorrectorField, micro: &Microstructure, phases: PhasePair) -> Result<HomogenizationResult> {
    let (g, m) = integrate(field, micro, phases)?;
    let (gamma_star, asymmetry) = SymTensor::symmetrized(&g)?;
    let theta = micro.theta();
    let (gh, ga) = bounds::mean_bounds(theta, phases)?;
    let eig = gamma_star.eigenvalues()?;
    let mean_bound_slacks = (eig[0] - gh, ga - eig[eig.len() - 1]);

    let (direct, relation, gap, report) = if micro.inclusion_count() == 0 {
        (None, None, None, None)
    } else {
        let (direct, _) = polarization_from_integral(&m, theta)?;
        let relation = polarization_from_effective(&gamma_star, theta, phases)?;
        let gap = direct.distance(&relation)?;
        let report = if theta < 1.0 {
            bounds::check_trace_theta(&relation, theta, phases)?
        } else {
            bounds::check_pointwise(&relation, theta, phases)?
        };
        (Some(direct), Some(relation), Some(gap), Some(report))
    };
    Ok(HomogenizationResult {
        dim: micro.dim(),
        resolution: micro.resolution(),
        theta,
        gamma_star,
        m_theta_direct: direct,
        m_theta_relation: relation,
        relation_gap: gap,
        asymmetry,
        measure_density: "uniform",
        solver: field.stats.clone(),
        mean_bound_slacks,
        bounds: report,
    })
}
