//! Nonlinear reaction–diffusion map on the unit square,
//!
//! ```text
//! −∇·(e^m ∇u) + c u³ = s   in Ω = (0,1)²
//! u = 1 on the top edge, u = 0 on the bottom edge, zero flux on the sides,
//! ```
//!
//! discretized with a vertex-centred finite-volume form of the 5-point
//! stencil. Face diffusivities are arithmetic means of the nodal `e^m`.
//! Side nodes own half cells, which is what makes the discrete operator
//! symmetric and the zero-flux condition exact for linear profiles in `y`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;

use super::Grid;
use crate::linalg::{norm2, BandedLu, BandedMatrix, LinearOperator};
use crate::{math, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceConfig {
    /// Bumps per side of the centred Cartesian arrangement.
    pub per_side: usize,
    /// Standard deviation of each Gaussian bump.
    pub width: f64,
    pub amplitude: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig { per_side: 5, width: 0.05, amplitude: 1.0 }
    }
}

impl SourceConfig {
    /// Nodal values of the source on `grid`. Bump centres sit at
    /// `((a + ½)/k, (b + ½)/k)` for `a, b < k`.
    pub fn nodal_values(&self, grid: &Grid) -> Vec<f64> {
        let k = self.per_side as f64;
        let two_w2 = 2.0 * self.width * self.width;
        (0..grid.len())
            .map(|p| {
                let (x, y) = grid.coords(p);
                let mut s = 0.0;
                for a in 0..self.per_side {
                    for b in 0..self.per_side {
                        let cx = (a as f64 + 0.5) / k;
                        let cy = (b as f64 + 0.5) / k;
                        let r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                        s += self.amplitude * math::exp(-r2 / two_w2);
                    }
                }
                s
            })
            .collect()
    }
}

/// `nx × ny` observation nodes spread over the interior of the lower half.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservationLayout {
    pub nx: usize,
    pub ny: usize,
}

impl Default for ObservationLayout {
    fn default() -> Self {
        ObservationLayout { nx: 5, ny: 5 }
    }
}

impl ObservationLayout {
    /// Columns `round((a+1)(n−1)/(nx+1))`, rows `round((b+1)·⌊(n−1)/2⌋/ny)`.
    pub fn nodes(&self, grid: &Grid) -> Result<Vec<usize>> {
        let n = grid.n();
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::invalid("observation layout must be non-empty"));
        }
        let half = (n - 1) / 2;
        let cols: Vec<usize> = (0..self.nx)
            .map(|a| math::round((a + 1) as f64 * (n - 1) as f64 / (self.nx + 1) as f64) as usize)
            .collect();
        let rows: Vec<usize> = (0..self.ny)
            .map(|b| math::round((b + 1) as f64 * half as f64 / self.ny as f64) as usize)
            .collect();
        let distinct = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        if !distinct(&cols) || !distinct(&rows) {
            return Err(Error::invalid(format!(
                "a {}x{} observation layout does not fit a {n}x{n} grid",
                self.nx, self.ny
            )));
        }
        let mut nodes = Vec::with_capacity(self.nx * self.ny);
        for &j in &rows {
            for &i in &cols {
                let p = grid.node(i, j);
                if !grid.is_interior(p) {
                    return Err(Error::invalid(format!("observation node ({i}, {j}) is not interior")));
                }
                nodes.push(p);
            }
        }
        Ok(nodes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NewtonConfig {
    /// Converged when `‖R‖₂ ≤ tol · max(1, ‖s_h‖₂)`, `s_h` the discrete load vector.
    pub tol: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease constant on `½‖R‖²`.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { tol: 1e-10, max_iters: 50, armijo: 1e-4, backtrack: 0.5, max_backtracks: 30 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RdConfig {
    pub grid_n: usize,
    /// Coefficient of the cubic reaction term.
    pub c_nl: f64,
    pub source: SourceConfig,
    pub observations: ObservationLayout,
    pub newton: NewtonConfig,
}

impl Default for RdConfig {
    fn default() -> Self {
        RdConfig {
            grid_n: 17,
            c_nl: 1.0,
            source: SourceConfig::default(),
            observations: ObservationLayout::default(),
            newton: NewtonConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Face {
    a: usize,
    b: usize,
    weight: f64,
}

#[derive(Clone, Debug)]
pub struct RdModel {
    grid: Grid,
    c_nl: f64,
    source: Vec<f64>,
    obs_nodes: Vec<usize>,
    newton: NewtonConfig,
    faces: Vec<Face>,
    /// Dirichlet value of each node, if any.
    dirichlet: Vec<Option<f64>>,
    /// Control-volume area of each node.
    area: Vec<f64>,
}

/// Result of a converged nonlinear solve.
#[derive(Clone, Debug)]
pub struct StateSolution {
    pub u: Vec<f64>,
    /// Newton steps taken.
    pub iterations: usize,
    /// `‖R‖₂` at every iterate, starting with the initial guess.
    pub residual_history: Vec<f64>,
}

impl RdModel {
    pub fn new(cfg: &RdConfig) -> Result<Self> {
        let grid = Grid::new(cfg.grid_n)?;
        let source = cfg.source.nodal_values(&grid);
        let obs = cfg.observations.nodes(&grid)?;
        Self::from_parts(grid, cfg.c_nl, source, obs, cfg.newton)
    }

    /// Builds a model from explicit nodal source values and observation node indices.
    pub fn from_parts(
        grid: Grid,
        c_nl: f64,
        source: Vec<f64>,
        obs_nodes: Vec<usize>,
        newton: NewtonConfig,
    ) -> Result<Self> {
        if !(c_nl >= 0.0) {
            return Err(Error::invalid("reaction coefficient must be non-negative"));
        }
        if source.len() != grid.len() {
            return Err(Error::invalid(format!("source has {} values, grid has {}", source.len(), grid.len())));
        }
        if obs_nodes.is_empty() || obs_nodes.iter().any(|&p| p >= grid.len()) {
            return Err(Error::invalid("observation nodes must be non-empty and on the grid"));
        }
        let n = grid.n();
        let h = grid.spacing();
        let dirichlet: Vec<Option<f64>> = (0..grid.len())
            .map(|p| match grid.ij(p).1 {
                0 => Some(0.0),
                j if j == n - 1 => Some(1.0),
                _ => None,
            })
            .collect();
        let mut faces = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let p = grid.node(i, j);
                if i + 1 < n {
                    faces.push(Face { a: p, b: p + 1, weight: 1.0 });
                }
                if j + 1 < n {
                    let side = i == 0 || i == n - 1;
                    faces.push(Face { a: p, b: p + n, weight: if side { 0.5 } else { 1.0 } });
                }
            }
        }
        faces.retain(|f| dirichlet[f.a].is_none() || dirichlet[f.b].is_none());
        let area = (0..grid.len())
            .map(|p| {
                let i = grid.ij(p).0;
                if i == 0 || i == n - 1 {
                    0.5 * h * h
                } else {
                    h * h
                }
            })
            .collect();
        Ok(RdModel { grid, c_nl, source, obs_nodes, newton, faces, dirichlet, area })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn c_nl(&self) -> f64 {
        self.c_nl
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn obs_nodes(&self) -> &[usize] {
        &self.obs_nodes
    }

    pub fn newton_config(&self) -> &NewtonConfig {
        &self.newton
    }

    pub fn state_dim(&self) -> usize {
        self.grid.len()
    }

    pub fn parameter_dim(&self) -> usize {
        self.grid.len()
    }

    pub fn observation_dim(&self) -> usize {
        self.obs_nodes.len()
    }

    /// Area-weighted source as it enters the discrete residual.
    pub fn load_vector(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|p| if self.dirichlet[p].is_some() { 0.0 } else { self.area[p] * self.source[p] })
            .collect()
    }

    fn check_parameter(&self, m: &[f64]) -> Result<()> {
        if m.len() != self.parameter_dim() {
            return Err(Error::invalid(format!("parameter has length {}, expected {}", m.len(), self.parameter_dim())));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("parameter field".into()));
        }
        Ok(())
    }

    /// Discrete residual `R(u, m)`; Dirichlet rows are `u_p − g_p`.
    pub fn residual(&self, u: &[f64], m: &[f64]) -> Vec<f64> {
        let em: Vec<f64> = m.iter().map(|&x| math::exp(x)).collect();
        let mut r = vec![0.0; u.len()];
        for f in &self.faces {
            let k = 0.5 * (em[f.a] + em[f.b]);
            let flux = f.weight * k * (u[f.a] - u[f.b]);
            if self.dirichlet[f.a].is_none() {
                r[f.a] += flux;
            }
            if self.dirichlet[f.b].is_none() {
                r[f.b] -= flux;
            }
        }
        for p in 0..u.len() {
            match self.dirichlet[p] {
                Some(g) => r[p] = u[p] - g,
                None => r[p] += self.area[p] * (self.c_nl * u[p] * u[p] * u[p] - self.source[p]),
            }
        }
        r
    }

    /// Banded `∂R/∂u` at `(u, m)`.
    pub fn state_jacobian(&self, u: &[f64], m: &[f64]) -> BandedMatrix {
        let mut a = BandedMatrix::zeros(u.len(), self.grid.n());
        for f in &self.faces {
            let k = f.weight * 0.5 * (math::exp(m[f.a]) + math::exp(m[f.b]));
            if self.dirichlet[f.a].is_none() {
                a.add(f.a, f.a, k);
                a.add(f.a, f.b, -k);
            }
            if self.dirichlet[f.b].is_none() {
                a.add(f.b, f.b, k);
                a.add(f.b, f.a, -k);
            }
        }
        for p in 0..u.len() {
            match self.dirichlet[p] {
                Some(_) => a.set(p, p, 1.0),
                None => a.add(p, p, 3.0 * self.c_nl * self.area[p] * u[p] * u[p]),
            }
        }
        a
    }

    /// Initial Newton iterate: the linear profile `u = y`, which meets both Dirichlet conditions.
    pub fn initial_state(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|p| self.grid.coords(p).1).collect()
    }

    /// Solves `R(u, m) = 0` by Newton's method with Armijo backtracking.
    pub fn solve_state(&self, m: &[f64]) -> Result<StateSolution> {
        self.check_parameter(m)?;
        let cfg = &self.newton;
        let tol = cfg.tol * norm2(&self.load_vector()).max(1.0);
        let mut u = self.initial_state();
        let mut r = self.residual(&u, m);
        let mut rnorm = norm2(&r);
        let mut history = vec![rnorm];
        let mut iterations = 0;
        while rnorm > tol {
            if iterations >= cfg.max_iters || !rnorm.is_finite() {
                return Err(Error::Convergence { iterations, residual_history: history });
            }
            let lu = match self.state_jacobian(&u, m).factorize() {
                Ok(lu) => lu,
                Err(_) => return Err(Error::Convergence { iterations, residual_history: history }),
            };
            let neg_r: Vec<f64> = r.iter().map(|x| -x).collect();
            let step = lu.solve(&neg_r);
            let merit = rnorm * rnorm;
            let mut t = 1.0;
            let mut trial;
            let mut trial_r;
            let mut backtracks = 0;
            loop {
                trial = u.iter().zip(&step).map(|(a, d)| a + t * d).collect::<Vec<_>>();
                trial_r = self.residual(&trial, m);
                let trial_merit = math::powi(norm2(&trial_r), 2);
                if trial_merit <= (1.0 - 2.0 * cfg.armijo * t) * merit || backtracks >= cfg.max_backtracks {
                    break;
                }
                t *= cfg.backtrack;
                backtracks += 1;
            }
            u = trial;
            r = trial_r;
            rnorm = norm2(&r);
            history.push(rnorm);
            iterations += 1;
        }
        Ok(StateSolution { u, iterations, residual_history: history })
    }

    /// `q[i] = u[obs_nodes[i]]`.
    pub fn observe(&self, u: &[f64]) -> Vec<f64> {
        self.obs_nodes.iter().map(|&p| u[p]).collect()
    }

    /// Parameter-to-observable map.
    pub fn forward(&self, m: &[f64]) -> Result<Vec<f64>> {
        Ok(self.observe(&self.solve_state(m)?.u))
    }

    /// Matrix-free `∇q = −B [∂R/∂u]⁻¹ ∂R/∂m` at a converged state, with
    /// `∂R/∂u` factorized once and reused for every forward and adjoint solve.
    pub fn jacobian_operator(&self, m: &[f64], u: &[f64]) -> Result<RdJacobian<'_>> {
        self.check_parameter(m)?;
        if u.len() != self.state_dim() {
            return Err(Error::invalid("state has the wrong length"));
        }
        let lu = self.state_jacobian(u, m).factorize()?;
        Ok(RdJacobian {
            model: self,
            lu,
            u: u.to_vec(),
            exp_m: m.iter().map(|&x| math::exp(x)).collect(),
            solves: Cell::new(0),
        })
    }

    fn dr_dm(&self, u: &[f64], exp_m: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for f in &self.faces {
            let dk = 0.5 * (exp_m[f.a] * v[f.a] + exp_m[f.b] * v[f.b]);
            let dflux = f.weight * dk * (u[f.a] - u[f.b]);
            if self.dirichlet[f.a].is_none() {
                out[f.a] += dflux;
            }
            if self.dirichlet[f.b].is_none() {
                out[f.b] -= dflux;
            }
        }
        out
    }

    fn dr_dm_transpose(&self, u: &[f64], exp_m: &[f64], z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for f in &self.faces {
            let za = if self.dirichlet[f.a].is_none() { z[f.a] } else { 0.0 };
            let zb = if self.dirichlet[f.b].is_none() { z[f.b] } else { 0.0 };
            let c = 0.5 * f.weight * (u[f.a] - u[f.b]) * (za - zb);
            out[f.a] += c * exp_m[f.a];
            out[f.b] += c * exp_m[f.b];
        }
        out
    }
}

/// Jacobian of the observable with respect to the parameter at one state.
#[derive(Debug)]
pub struct RdJacobian<'a> {
    model: &'a RdModel,
    lu: BandedLu,
    u: Vec<f64>,
    exp_m: Vec<f64>,
    solves: Cell<usize>,
}

impl RdJacobian<'_> {
    /// Linearized forward plus adjoint solves performed so far.
    pub fn solve_count(&self) -> usize {
        self.solves.get()
    }
}

impl LinearOperator for RdJacobian<'_> {
    fn nrows(&self) -> usize {
        self.model.observation_dim()
    }

    fn ncols(&self) -> usize {
        self.model.parameter_dim()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.ncols());
        let rhs = self.model.dr_dm(&self.u, &self.exp_m, v);
        let du = self.lu.solve(&rhs);
        self.solves.set(self.solves.get() + 1);
        self.model.obs_nodes.iter().map(|&p| -du[p]).collect()
    }

    fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.nrows());
        let mut rhs = vec![0.0; self.model.state_dim()];
        for (&p, &wi) in self.model.obs_nodes.iter().zip(w) {
            rhs[p] += wi;
        }
        let z = self.lu.solve_transpose(&rhs);
        self.solves.set(self.solves.get() + 1);
        self.model.dr_dm_transpose(&self.u, &self.exp_m, &z).into_iter().map(|x| -x).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{adjoint_defect, assemble_by_columns, assemble_by_rows, Matrix};
    use crate::models::{PriorConfig, PriorSampler};
    use crate::rng;

    fn linear_model(n: usize, source: bool) -> RdModel {
        let grid = Grid::new(n).unwrap();
        let s = if source { SourceConfig::default().nodal_values(&grid) } else { vec![0.0; grid.len()] };
        let obs = ObservationLayout { nx: 3, ny: 3 }.nodes(&grid).unwrap();
        RdModel::from_parts(grid, 0.0, s, obs, NewtonConfig::default()).unwrap()
    }

    fn small_nonlinear() -> RdModel {
        RdModel::new(&RdConfig { grid_n: 9, observations: ObservationLayout { nx: 4, ny: 3 }, ..Default::default() })
            .unwrap()
    }

    fn prior_draw(n: usize, seed: u64) -> Vec<f64> {
        let cfg = PriorConfig { delta: 1.0, gamma: 0.1, grid: Grid::new(n).unwrap() };
        PriorSampler::new(&cfg).unwrap().sample(&mut rng::stream(seed))
    }

    #[test]
    fn harmonic_linear_profile() {
        let model = linear_model(9, false);
        let sol = model.solve_state(&vec![0.0; 81]).unwrap();
        for p in 0..81 {
            assert!((sol.u[p] - model.grid().coords(p).1).abs() < 1e-14);
        }
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn linear_problem_matches_direct_solve_in_one_step() {
        let model = linear_model(9, true);
        let m = prior_draw(9, 4);
        let sol = model.solve_state(&m).unwrap();
        assert_eq!(sol.iterations, 1);
        // Oracle: dense direct solve of A u = b, with A = ∂R/∂u (independent of u when c = 0).
        let a = model.state_jacobian(&sol.u, &m);
        let dense = Matrix::from_fn(81, 81, |i, j| a.get(i, j));
        let zero = vec![0.0; 81];
        let b: Vec<f64> = model.residual(&zero, &m).iter().map(|x| -x).collect();
        let direct = dense_solve(dense, b);
        let err: f64 = direct.iter().zip(&sol.u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * norm2(&direct));
    }

    #[test]
    fn maximum_principle_without_source() {
        let model = linear_model(9, false);
        let m = prior_draw(9, 8).iter().map(|x| 3.0 * x).collect::<Vec<_>>();
        let u = model.solve_state(&m).unwrap().u;
        assert!(u.iter().all(|&x| (-1e-14..=1.0 + 1e-14).contains(&x)));
    }

    #[test]
    fn nonlinear_solve_converges() {
        let model = small_nonlinear();
        for seed in 0..3 {
            let sol = model.solve_state(&prior_draw(9, seed)).unwrap();
            assert!(*sol.residual_history.last().unwrap() <= 1e-10);
            assert!(sol.iterations <= 15, "{} iterations", sol.iterations);
        }
    }

    #[test]
    fn observation_layouts() {
        let g = Grid::new(17).unwrap();
        let nodes = ObservationLayout::default().nodes(&g).unwrap();
        assert_eq!(nodes.len(), 25);
        for &p in &nodes {
            let (x, y) = g.coords(p);
            assert!(y <= 0.5 && y > 0.0 && x > 0.0 && x < 1.0);
        }
        assert_eq!(nodes[0], g.node(3, 2));
        assert!(ObservationLayout { nx: 5, ny: 5 }.nodes(&Grid::new(9).unwrap()).is_err());

        let model = linear_model(9, false);
        let u: Vec<f64> = (0..81).map(|i| i as f64).collect();
        let q = model.observe(&u);
        for (qi, &p) in q.iter().zip(model.obs_nodes()) {
            assert_eq!(*qi, p as f64);
        }
        assert!(model.observe(&[1.0; 81]).iter().all(|&x| x == 1.0));
        let corner = RdModel::from_parts(*model.grid(), 0.0, vec![0.0; 81], vec![0], NewtonConfig::default()).unwrap();
        assert_eq!(corner.observe(&u), [0.0]);
    }

    #[test]
    fn jacobian_zero_and_adjoint_consistency() {
        let model = small_nonlinear();
        let m = prior_draw(9, 21);
        let sol = model.solve_state(&m).unwrap();
        let jac = model.jacobian_operator(&m, &sol.u).unwrap();
        assert!(jac.apply(&[0.0; 81]).iter().all(|&x| x == 0.0));
        assert!(jac.apply_transpose(&[0.0; 12]).iter().all(|&x| x == 0.0));
        assert!(adjoint_defect(&jac, 20, 5) <= 1e-10);
        let by_cols = assemble_by_columns(&jac);
        let by_rows = assemble_by_rows(&jac);
        assert!(by_cols.sub(&by_rows).max_abs() <= 1e-10 * by_cols.max_abs());
        assert_eq!(jac.solve_count(), 2 + 2 * 20 + 81 + 12);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        for c_nl in [0.0, 1.0] {
            let cfg = RdConfig { grid_n: 9, c_nl, observations: ObservationLayout { nx: 4, ny: 3 }, ..Default::default() };
            let model = RdModel::new(&cfg).unwrap();
            for seed in 0..3 {
                let m = prior_draw(9, 100 + seed);
                let v = rng::normal_vec(&mut rng::stream(200 + seed), 81);
                let u = model.solve_state(&m).unwrap().u;
                let jv = model.jacobian_operator(&m, &u).unwrap().apply(&v);
                let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
                let eps = 1e-5 * scale / norm2(&v);
                let shifted = |t: f64| {
                    let mt: Vec<f64> = m.iter().zip(&v).map(|(a, b)| a + t * b).collect();
                    model.forward(&mt).unwrap()
                };
                let (qp, qm) = (shifted(eps), shifted(-eps));
                let fd: Vec<f64> = qp.iter().zip(&qm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
                let err = norm2(&crate::linalg::sub_vec(&fd, &jv));
                assert!(err <= 1e-6 * norm2(&jv), "c_nl={c_nl}: relative error {}", err / norm2(&jv));
            }
        }
    }

    fn dense_solve(mut a: Matrix, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs())).unwrap();
            if piv != k {
                for j in 0..n {
                    let t = a[(k, j)];
                    a[(k, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                b.swap(k, piv);
            }
            for i in k + 1..n {
                let l = a[(i, k)] / a[(k, k)];
                for j in k..n {
                    a[(i, j)] -= l * a[(k, j)];
                }
                b[i] -= l * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[(i, j)] * x[j]).sum();
            x[i] = (b[i] - s) / a[(i, i)];
        }
        x
    }
}
