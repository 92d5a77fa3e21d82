//! Bilinear elements on the unit square with Dirichlet boundary rows
//! eliminated.

use crate::error::Result;
use crate::linalg::{self, CgStats};
use crate::tensor::SymTensor;

/// Per-element conductivity tensor `[a11, a22, a12]`.
pub type ElementTensor = [f64; 3];

/// `R x R` elements of side `h = 1/R`; node `(x, y)` has index `x + (R+1) y`
/// and element `(ex, ey)` has index `ex + R ey`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SquareGrid {
    pub res: usize,
}

const fn sign(bit: usize) -> f64 {
    if bit == 1 {
        1.0
    } else {
        -1.0
    }
}

const fn mass_1d(p: usize, q: usize) -> f64 {
    if p == q {
        1.0 / 3.0
    } else {
        1.0 / 6.0
    }
}

/// Reference integrals `int dphi_b/dx_i dphi_a/dx_j` on one element, local
/// node `a` at offset `(a & 1, a >> 1)`. They do not depend on `h` in 2-D.
fn reference(i: usize, j: usize, a: usize, b: usize) -> f64 {
    let (xa, ya, xb, yb) = (a & 1, a >> 1, b & 1, b >> 1);
    match (i, j) {
        (0, 0) => sign(xa) * sign(xb) * mass_1d(ya, yb),
        (1, 1) => sign(ya) * sign(yb) * mass_1d(xa, xb),
        (0, 1) => sign(xb) * sign(ya) / 4.0,
        _ => sign(xa) * sign(yb) / 4.0,
    }
}

/// `K[a][b] = int A grad phi_b . grad phi_a` for a constant tensor `A`.
pub fn element_matrix(t: &ElementTensor) -> [[f64; 4]; 4] {
    let mut k = [[0.0; 4]; 4];
    for (a, row) in k.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = t[0] * reference(0, 0, a, b)
                + t[1] * reference(1, 1, a, b)
                + t[2] * (reference(0, 1, a, b) + reference(1, 0, a, b));
        }
    }
    k
}

pub fn tensor_entries(t: &SymTensor) -> ElementTensor {
    [t.get(0, 0), t.get(1, 1), t.get(0, 1)]
}

pub fn scalar_entries(g: f64) -> ElementTensor {
    [g, g, 0.0]
}

impl SquareGrid {
    pub fn new(res: usize) -> Self {
        Self { res }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.res as f64
    }

    pub fn node_count(&self) -> usize {
        (self.res + 1) * (self.res + 1)
    }

    pub fn element_count(&self) -> usize {
        self.res * self.res
    }

    pub fn node_position(&self, node: usize) -> [f64; 2] {
        let n = self.res + 1;
        [(node % n) as f64 * self.h(), (node / n) as f64 * self.h()]
    }

    pub fn element_centre(&self, e: usize) -> [f64; 2] {
        let h = self.h();
        [((e % self.res) as f64 + 0.5) * h, ((e / self.res) as f64 + 0.5) * h]
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let n = self.res + 1;
        let base = e % self.res + n * (e / self.res);
        [base, base + 1, base + n, base + n + 1]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let n = self.res + 1;
        let (x, y) = (node % n, node / n);
        x == 0 || y == 0 || x == self.res || y == self.res
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&n| self.is_boundary(n))
    }

    /// `y = K x` over all nodes, boundary rows included.
    pub fn apply(&self, medium: &[ElementTensor], x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut cache: Option<(ElementTensor, [[f64; 4]; 4])> = None;
        for (e, t) in medium.iter().enumerate() {
            let k = match cache {
                Some((ct, k)) if ct == *t => k,
                _ => {
                    let k = element_matrix(t);
                    cache = Some((*t, k));
                    k
                }
            };
            let nodes = self.element_nodes(e);
            let local = nodes.map(|n| x[n]);
            for a in 0..4 {
                y[nodes[a]] += (0..4).map(|b| k[a][b] * local[b]).sum::<f64>();
            }
        }
    }

    /// `sum_e int_e A_e grad u . grad v`.
    pub fn energy(&self, medium: &[ElementTensor], u: &[f64], v: &[f64]) -> f64 {
        medium
            .iter()
            .enumerate()
            .map(|(e, t)| self.element_energy(e, t, u, v))
            .sum()
    }

    pub fn element_energy(&self, e: usize, t: &ElementTensor, u: &[f64], v: &[f64]) -> f64 {
        if *t == [0.0; 3] {
            return 0.0;
        }
        let k = element_matrix(t);
        let nodes = self.element_nodes(e);
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                s += v[nodes[a]] * k[a][b] * u[nodes[b]];
            }
        }
        s
    }

    fn diagonal(&self, medium: &[ElementTensor]) -> Vec<f64> {
        let mut d = vec![0.0; self.node_count()];
        for (e, t) in medium.iter().enumerate() {
            let k = element_matrix(t);
            for (a, &n) in self.element_nodes(e).iter().enumerate() {
                d[n] += k[a][a];
            }
        }
        d
    }

    /// Solves `div(A grad u) = 0` with `u = data` on the boundary. Interior
    /// values of `guess`, when given, seed the iteration.
    pub fn solve_dirichlet(
        &self,
        medium: &[ElementTensor],
        data: impl Fn([f64; 2]) -> f64,
        guess: Option<&[f64]>,
        tol: f64,
    ) -> Result<(Vec<f64>, CgStats)> {
        let n = self.node_count();
        let boundary: Vec<bool> = (0..n).map(|i| self.is_boundary(i)).collect();
        let mut lifted = vec![0.0; n];
        for i in self.boundary_nodes() {
            lifted[i] = data(self.node_position(i));
        }
        let mut b = vec![0.0; n];
        self.apply(medium, &lifted, &mut b);
        for (bi, &bd) in b.iter_mut().zip(&boundary) {
            *bi = if bd { 0.0 } else { -*bi };
        }
        let inv_diag: Vec<f64> = self
            .diagonal(medium)
            .iter()
            .zip(&boundary)
            .map(|(d, &bd)| if bd { 0.0 } else { 1.0 / d })
            .collect();
        let mut x = match guess {
            Some(g) => g.iter().zip(&boundary).map(|(v, &bd)| if bd { 0.0 } else { *v }).collect(),
            None => vec![0.0; n],
        };
        let mut masked = vec![0.0; n];
        let stats = linalg::pcg(
            |v, out| {
                masked.copy_from_slice(v);
                for (m, &bd) in masked.iter_mut().zip(&boundary) {
                    if bd {
                        *m = 0.0;
                    }
                }
                self.apply(medium, &masked, out);
                for (o, &bd) in out.iter_mut().zip(&boundary) {
                    if bd {
                        *o = 0.0;
                    }
                }
            },
            linalg::jacobi(&inv_diag),
            &b,
            &mut x,
            tol,
            20 * n,
            false,
        )?;
        for (xi, li) in x.iter_mut().zip(&lifted) {
            *xi += li;
        }
        Ok((x, stats))
    }
}
