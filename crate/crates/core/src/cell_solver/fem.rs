//! Periodic Q1 finite elements on the `R^N` pixel grid of the unit cell.
//!
//! Nodes and elements share the same linear index `i0 + R (i1 + R (i2 ...))`:
//! element `e` has its lowest corner at node `e`. Local node `a` of an element
//! sits at offset bit `d` of `a` along axis `d`.

/// Entry of the unit-coefficient element stiffness between two local nodes at
/// Hamming distance `k`, for `h = 1`. Scale by `h^(N-2)`.
pub(crate) fn stiffness_by_distance(dim: usize, k: usize) -> f64 {
    let (m_diag, m_off): (f64, f64) = (1.0 / 3.0, 1.0 / 6.0);
    let n = dim as i32;
    let k = k as i32;
    let mut v = 0.0;
    if k > 0 {
        v -= k as f64 * m_off.powi(k - 1) * m_diag.powi(n - k);
    }
    if k < n {
        v += (n - k) as f64 * m_off.powi(k) * m_diag.powi(n - k - 1);
    }
    v
}

#[derive(Debug, Clone)]
pub struct PeriodicGrid {
    pub dim: usize,
    pub res: usize,
    pub n: usize,
    pub h: f64,
}

impl PeriodicGrid {
    pub fn new(dim: usize, res: usize) -> Self {
        Self {
            dim,
            res,
            n: res.pow(dim as u32),
            h: 1.0 / res as f64,
        }
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        (0..self.dim)
            .map(|_| {
                let c = idx % self.res;
                idx /= self.res;
                c
            })
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().rev().fold(0, |acc, &c| acc * self.res + c % self.res)
    }

    /// Calls `f(e, nodes)` for every element in index order, with `nodes[a]`
    /// the global node of local node `a`.
    pub fn for_each_element(&self, mut f: impl FnMut(usize, &[usize])) {
        let corners = 1usize << self.dim;
        let mut coords = vec![0usize; self.dim];
        let mut nodes = vec![0usize; corners];
        let strides: Vec<usize> = (0..self.dim).map(|d| self.res.pow(d as u32)).collect();
        for e in 0..self.n {
            for (a, node) in nodes.iter_mut().enumerate() {
                let mut idx = e;
                for d in 0..self.dim {
                    if a >> d & 1 == 1 {
                        idx = if coords[d] + 1 == self.res {
                            idx + strides[d] - self.res * strides[d]
                        } else {
                            idx + strides[d]
                        };
                    }
                }
                *node = idx;
            }
            f(e, &nodes);
            for c in coords.iter_mut() {
                *c += 1;
                if *c < self.res {
                    break;
                }
                *c = 0;
            }
        }
    }

    /// `int_e dphi_a/dx_i` for local node `a`: `+-h^(N-1) / 2^(N-1)`.
    pub fn gradient_integral(&self, a: usize, i: usize) -> f64 {
        let mag = self.h.powi(self.dim as i32 - 1) / (1u64 << (self.dim - 1)) as f64;
        if a >> i & 1 == 1 {
            mag
        } else {
            -mag
        }
    }

    /// `y = K x` for the operator with element-wise conductivity `gamma`.
    pub fn apply(&self, gamma: &[f64], x: &[f64], y: &mut [f64]) {
        match self.dim {
            2 => self.apply_2d(gamma, x, y),
            3 => self.apply_3d(gamma, x, y),
            _ => self.apply_generic(gamma, x, y),
        }
    }

    pub fn apply_generic(&self, gamma: &[f64], x: &[f64], y: &mut [f64]) {
        let corners = 1usize << self.dim;
        let scale = self.h.powi(self.dim as i32 - 2);
        let w: Vec<f64> = (0..=self.dim)
            .map(|k| stiffness_by_distance(self.dim, k) * scale)
            .collect();
        y.iter_mut().for_each(|v| *v = 0.0);
        self.for_each_element(|e, nodes| {
            for a in 0..corners {
                let s: f64 = (0..corners)
                    .map(|b| w[(a ^ b).count_ones() as usize] * x[nodes[b]])
                    .sum();
                y[nodes[a]] += gamma[e] * s;
            }
        });
    }

    fn apply_2d(&self, gamma: &[f64], x: &[f64], y: &mut [f64]) {
        // local weights (2/3, -1/6, -1/3) rewritten with the element sum
        let r = self.res;
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..r {
            let jp = (j + 1) % r;
            for i in 0..r {
                let ip = (i + 1) % r;
                let (n00, n10, n01, n11) = (i + r * j, ip + r * j, i + r * jp, ip + r * jp);
                let g = gamma[n00];
                let (x00, x10, x01, x11) = (x[n00], x[n10], x[n01], x[n11]);
                let s = (x00 + x10 + x01 + x11) / 3.0;
                y[n00] += g * (x00 + (x10 + x01) / 6.0 - s);
                y[n10] += g * (x10 + (x00 + x11) / 6.0 - s);
                y[n01] += g * (x01 + (x00 + x11) / 6.0 - s);
                y[n11] += g * (x11 + (x10 + x01) / 6.0 - s);
            }
        }
    }

    fn apply_3d(&self, gamma: &[f64], x: &[f64], y: &mut [f64]) {
        // local weights h (1/3, 0, -1/12, -1/12) by Hamming distance, i.e.
        // y_a = h (5/12 x_a + (sum of the 3 adjacent) / 12 - (element sum) / 12)
        let r = self.res;
        let rr = r * r;
        let h = self.h;
        y.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..r {
            let kp = (k + 1) % r;
            for j in 0..r {
                let jp = (j + 1) % r;
                let rows = [j * r + k * rr, jp * r + k * rr, j * r + kp * rr, jp * r + kp * rr];
                for i in 0..r {
                    let ip = (i + 1) % r;
                    let n = [
                        rows[0] + i,
                        rows[0] + ip,
                        rows[1] + i,
                        rows[1] + ip,
                        rows[2] + i,
                        rows[2] + ip,
                        rows[3] + i,
                        rows[3] + ip,
                    ];
                    let g = gamma[n[0]] * h / 12.0;
                    let v = n.map(|m| x[m]);
                    let s: f64 = v.iter().sum();
                    for a in 0..8 {
                        let adj = v[a ^ 1] + v[a ^ 2] + v[a ^ 4];
                        y[n[a]] += g * (5.0 * v[a] + adj - s);
                    }
                }
            }
        }
    }

    /// Calls `f(c, block)` for every run of indices sharing coordinate `c`
    /// along axis `d`; each block is a contiguous range of `R^d` indices.
    fn for_each_axis_block(&self, d: usize, mut f: impl FnMut(usize, std::ops::Range<usize>)) {
        let stride = self.res.pow(d as u32);
        let outer = self.n / (stride * self.res);
        for o in 0..outer {
            for c in 0..self.res {
                let start = (o * self.res + c) * stride;
                f(c, start..start + stride);
            }
        }
    }

    /// `out[n] = v[n + delta e_d]` with periodic wrap.
    pub fn shifted(&self, v: &[f64], d: usize, delta: isize) -> Vec<f64> {
        let stride = self.res.pow(d as u32);
        let mut out = vec![0.0; self.n];
        let r = self.res as isize;
        self.for_each_axis_block(d, |c, block| {
            let src_c = (c as isize + delta).rem_euclid(r) as usize;
            let src = block.start + src_c * stride - c * stride;
            out[block.clone()].copy_from_slice(&v[src..src + stride]);
        });
        out
    }

    /// `v[n] + v[n + delta e_d]`.
    fn pair_sum(&self, v: &[f64], d: usize, delta: isize) -> Vec<f64> {
        let mut out = self.shifted(v, d, delta);
        out.iter_mut().zip(v).for_each(|(o, x)| *o += x);
        out
    }

    /// Sum over the `2^k` corners spanned by the axes other than `skip`,
    /// stepping by `delta` along each.
    fn corner_sum(&self, v: &[f64], skip: Option<usize>, delta: isize) -> Vec<f64> {
        let mut out = v.to_vec();
        for d in (0..self.dim).filter(|&d| Some(d) != skip) {
            out = self.pair_sum(&out, d, delta);
        }
        out
    }

    /// Magnitude `h^(N-1) / 2^(N-1)` of the element gradient integrals.
    fn gradient_magnitude(&self) -> f64 {
        self.h.powi(self.dim as i32 - 1) / (1u64 << (self.dim - 1)) as f64
    }

    /// Diagonal of the stiffness matrix.
    pub fn diagonal(&self, gamma: &[f64]) -> Vec<f64> {
        let w0 = stiffness_by_distance(self.dim, 0) * self.h.powi(self.dim as i32 - 2);
        let mut d = self.corner_sum(gamma, None, -1);
        d.iter_mut().for_each(|v| *v *= w0);
        d
    }

    /// Right-hand side of the cell problem in direction `i`:
    /// `f_a = -sum_e gamma_e int_e dphi_a/dx_i`.
    pub fn cell_load(&self, gamma: &[f64], i: usize) -> Vec<f64> {
        // elements having node a on their lower i-face, summed
        let upper = self.corner_sum(gamma, Some(i), -1);
        let lower = self.shifted(&upper, i, -1);
        let mag = self.gradient_magnitude();
        upper.iter().zip(&lower).map(|(u, l)| mag * (u - l)).collect()
    }

    /// Per-element `int_e dx/dx_i` for the nodal field `x`.
    pub fn element_gradient_integrals(&self, x: &[f64], i: usize) -> Vec<f64> {
        let face = self.corner_sum(x, Some(i), 1);
        let upper = self.shifted(&face, i, 1);
        let mag = self.gradient_magnitude();
        upper.iter().zip(&face).map(|(u, l)| mag * (u - l)).collect()
    }
}

/// Coarse space of nodal functions depending on a single coordinate, one
/// family per axis. A Q1 function of `y_d` alone has its gradient along `e_d`,
/// so the families are mutually orthogonal in the energy inner product and
/// each Galerkin block is a periodic 1-D chain of layer conductances.
#[derive(Debug, Clone)]
pub struct PlaneCoarseSpace {
    grid: PeriodicGrid,
    /// `conductance[d][c]`: `h^(N-2)` times the conductivity summed over element layer `c` normal to `d`.
    conductance: Vec<Vec<f64>>,
}

impl PlaneCoarseSpace {
    pub fn new(grid: &PeriodicGrid, gamma: &[f64]) -> Self {
        let scale = grid.h.powi(grid.dim as i32 - 2);
        let conductance = (0..grid.dim)
            .map(|d| {
                let mut s = vec![0.0; grid.res];
                grid.for_each_axis_block(d, |c, block| {
                    s[c] += gamma[block].iter().sum::<f64>();
                });
                s.iter().map(|v| v * scale).collect()
            })
            .collect();
        Self { grid: grid.clone(), conductance }
    }

    /// Adds `sum_d R_d^T A_d^+ R_d r` to `z`.
    pub fn add_correction(&self, r: &[f64], z: &mut [f64]) {
        for d in 0..self.grid.dim {
            let mut plane = vec![0.0; self.grid.res];
            self.grid.for_each_axis_block(d, |c, block| {
                plane[c] += r[block].iter().sum::<f64>();
            });
            let c = solve_ring(&self.conductance[d], &plane);
            self.grid.for_each_axis_block(d, |k, block| {
                z[block].iter_mut().for_each(|v| *v += c[k]);
            });
        }
    }
}

/// Mean-zero solution of the periodic chain `s_{i-1}(c_i - c_{i-1}) - s_i(c_{i+1} - c_i) = g_i`,
/// with `s_i` the conductance between nodes `i` and `i + 1`. The load is
/// projected to zero sum first.
fn solve_ring(s: &[f64], g: &[f64]) -> Vec<f64> {
    let n = s.len();
    let gm = g.iter().sum::<f64>() / n as f64;
    // flux through link i is F_i = t - G_i, G_i = sum_{k=1..i} g_k
    let mut big_g = vec![0.0; n];
    for i in 1..n {
        big_g[i] = big_g[i - 1] + (g[i] - gm);
    }
    let inv_sum: f64 = s.iter().map(|v| 1.0 / v).sum();
    let t = big_g.iter().zip(s).map(|(gg, si)| gg / si).sum::<f64>() / inv_sum;
    let mut c = vec![0.0; n];
    for i in 0..n - 1 {
        c[i + 1] = c[i] + (t - big_g[i]) / s[i];
    }
    let cm = c.iter().sum::<f64>() / n as f64;
    c.iter_mut().for_each(|v| *v -= cm);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stiffness_weights() {
        assert_eq!(stiffness_by_distance(1, 0), 1.0);
        assert_eq!(stiffness_by_distance(1, 1), -1.0);
        let w2: Vec<f64> = (0..3).map(|k| stiffness_by_distance(2, k)).collect();
        for (a, b) in w2.iter().zip([2.0 / 3.0, -1.0 / 6.0, -1.0 / 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let w3: Vec<f64> = (0..4).map(|k| stiffness_by_distance(3, k)).collect();
        for (a, b) in w3.iter().zip([1.0 / 3.0, 0.0, -1.0 / 12.0, -1.0 / 12.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    fn pseudo(n: usize, salt: u64) -> Vec<f64> {
        (0..n as u64)
            .map(|i| ((i.wrapping_mul(2654435761) ^ salt) % 1000) as f64 / 1000.0)
            .collect()
    }

    #[test]
    fn fast_kernels_match_generic() {
        for (dim, res) in [(2, 5), (2, 2), (3, 4), (3, 3)] {
            let g = PeriodicGrid::new(dim, res);
            let gamma: Vec<f64> = pseudo(g.n, 7).iter().map(|v| 1.0 + v).collect();
            let x = pseudo(g.n, 99);
            let (mut a, mut b) = (vec![0.0; g.n], vec![0.0; g.n]);
            g.apply(&gamma, &x, &mut a);
            g.apply_generic(&gamma, &x, &mut b);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-13, "{dim} {res}");
            }
        }
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let g = PeriodicGrid::new(3, 4);
        let gamma = pseudo(g.n, 3);
        let mut y = vec![0.0; g.n];
        g.apply(&gamma, &vec![1.0; g.n], &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-14));
    }

    fn generic_load(g: &PeriodicGrid, gamma: &[f64], i: usize) -> Vec<f64> {
        let mut f = vec![0.0; g.n];
        g.for_each_element(|e, nodes| {
            for (a, &node) in nodes.iter().enumerate() {
                f[node] -= gamma[e] * g.gradient_integral(a, i);
            }
        });
        f
    }

    #[test]
    fn fast_assembly_matches_element_loops() {
        for (dim, res) in [(2, 5), (3, 4)] {
            let g = PeriodicGrid::new(dim, res);
            let gamma: Vec<f64> = pseudo(g.n, 5).iter().map(|v| 1.0 + v).collect();
            let x = pseudo(g.n, 17);
            let mut diag = vec![0.0; g.n];
            let w0 = stiffness_by_distance(dim, 0) * g.h.powi(dim as i32 - 2);
            g.for_each_element(|e, nodes| nodes.iter().for_each(|&n| diag[n] += gamma[e] * w0));
            for (a, b) in g.diagonal(&gamma).iter().zip(&diag) {
                assert!((a - b).abs() < 1e-14);
            }
            for i in 0..dim {
                for (a, b) in g.cell_load(&gamma, i).iter().zip(generic_load(&g, &gamma, i)) {
                    assert!((a - b).abs() < 1e-14);
                }
                let mut grads = vec![0.0; g.n];
                g.for_each_element(|e, nodes| {
                    grads[e] = nodes.iter().enumerate().map(|(a, &n)| x[n] * g.gradient_integral(a, i)).sum();
                });
                for (a, b) in g.element_gradient_integrals(&x, i).iter().zip(&grads) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn coarse_blocks_are_galerkin_projections() {
        // R_d A R_d^T c computed through the fine operator equals the ring operator
        let g = PeriodicGrid::new(3, 4);
        let gamma: Vec<f64> = pseudo(g.n, 9).iter().map(|v| 1.0 + v).collect();
        let coarse = PlaneCoarseSpace::new(&g, &gamma);
        for d in 0..3 {
            let c = [0.3, -0.1, 0.5, -0.7];
            let mut fine = vec![0.0; g.n];
            g.for_each_axis_block(d, |k, block| fine[block].iter_mut().for_each(|v| *v = c[k]));
            let mut y = vec![0.0; g.n];
            g.apply(&gamma, &fine, &mut y);
            let mut plane = vec![0.0; 4];
            g.for_each_axis_block(d, |k, block| plane[k] += y[block].iter().sum::<f64>());
            // the correction recovers c (mean-zero) from its image
            let mut z = vec![0.0; g.n];
            coarse.add_correction(&y, &mut z);
            let cm = c.iter().sum::<f64>() / 4.0;
            g.for_each_axis_block(d, |k, block| {
                for v in &z[block] {
                    assert!((v - (c[k] - cm)).abs() < 1e-12, "axis {d}");
                }
            });
        }
    }

    #[test]
    fn element_walk_wraps_periodically() {
        let g = PeriodicGrid::new(3, 3);
        let mut seen = 0;
        g.for_each_element(|e, nodes| {
            let c = g.coords(e);
            for (a, &node) in nodes.iter().enumerate() {
                let want: Vec<usize> = (0..3).map(|d| (c[d] + (a >> d & 1)) % 3).collect();
                assert_eq!(node, g.index(&want));
            }
            seen += 1;
        });
        assert_eq!(seen, 27);
    }

    #[test]
    fn linear_functions_have_exact_gradient_integrals() {
        let g = PeriodicGrid::new(2, 4);
        // x = y_0 on one element (no wrap) has unit gradient
        let c = g.coords(5);
        let total: f64 = (0..4)
            .map(|a| (c[0] + (a & 1)) as f64 * g.h * g.gradient_integral(a, 0))
            .sum();
        assert!((total - g.h * g.h).abs() < 1e-15);
    }
}
