//! Piecewise-linear concave value functions stored in `l`-space,
//! `l(v) = -log(-v)`, together with their dual (slope) description.
//!
//! The function is `-inf` below the first grid point, linear in `v`
//! between grid points and constant beyond the last one. Slopes are kept
//! as `log p_i`, a non-increasing sequence with the conventions
//! `log p_0 = +inf` and `log p_N = -inf`.

use crate::error::{Error, Result};
use crate::model::PowerUtility;
use crate::numerics::{log_diff_exp, log_sum_exp};
use std::sync::Arc;

// slope ties closer than this in log-space are treated as one bracket
const SLOPE_TIE_TOL: f64 = 1e-14;

/// Concave increasing piecewise-linear value function on a wealth grid.
#[derive(Debug, Clone)]
pub struct PlValueFunction {
    grid: Arc<[f64]>,
    ell: Vec<f64>,
}

impl PlValueFunction {
    /// Wrap grid and `l`-values. The grid must be strictly increasing and
    /// the stored function increasing and concave in `v`-space (weakly, to
    /// allow flat stretches).
    pub fn new(grid: Arc<[f64]>, ell: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidParameter("value grid needs at least two points".into()));
        }
        if grid.len() != ell.len() {
            return Err(Error::InvalidParameter(format!(
                "grid/value length mismatch: {} vs {}",
                grid.len(),
                ell.len()
            )));
        }
        for w in grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
            }
        }
        for (i, &e) in ell.iter().enumerate() {
            if e.is_nan() || e == f64::INFINITY {
                return Err(Error::InvalidParameter(format!("l-value at index {i} is not finite")));
            }
        }
        let vf = PlValueFunction { grid, ell };
        vf.check_shape()?;
        Ok(vf)
    }

    fn check_shape(&self) -> Result<()> {
        for (i, w) in self.ell.windows(2).enumerate() {
            if w[1] < w[0] - SLOPE_TIE_TOL {
                return Err(Error::InvalidParameter(format!(
                    "value function decreases between grid points {i} and {}",
                    i + 1
                )));
            }
        }
        let slopes = self.dual_slopes();
        for (i, w) in slopes.log_p[1..slopes.log_p.len() - 1].windows(2).enumerate() {
            if w[1] > w[0] + SLOPE_TIE_TOL {
                return Err(Error::InvalidParameter(format!(
                    "concavity violated at slope index {}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Terminal-time value: `l = u(x_i) * dt` at every grid point.
    /// Rejects grids reaching into the region where `u` is `-inf`.
    pub fn terminal(grid: Arc<[f64]>, u: &PowerUtility, delta_t: f64) -> Result<Self> {
        let ell: Vec<f64> = grid.iter().map(|&x| u.eval(x) * delta_t).collect();
        if let Some(i) = ell.iter().position(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "utility is -inf at grid point {} (x = {}); start the grid at \
                 the first point with finite utility",
                i, grid[i]
            )));
        }
        Self::new(grid, ell)
    }

    pub fn grid(&self) -> &Arc<[f64]> {
        &self.grid
    }

    pub fn ell(&self) -> &[f64] {
        &self.ell
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `v(x_i) = -e^{-l_i}` (may overflow to `-inf` for deeply negative
    /// `l`; use [`Self::ell`] where that matters).
    pub fn value_at(&self, i: usize) -> f64 {
        -(-self.ell[i]).exp()
    }

    /// Dual description: `log p_i` for `i = 0..=N` with the endpoint
    /// conventions, where `p_i` is the slope on `[x_i, x_{i+1}]` (1-based
    /// as stored: entry `i` covers `grid[i-1]..grid[i]`).
    pub fn dual_slopes(&self) -> DualSlopes {
        let n = self.grid.len();
        let mut log_p = Vec::with_capacity(n + 1);
        log_p.push(f64::INFINITY);
        for i in 0..n - 1 {
            // log((-v_i) - (-v_{i+1})) - log dx, all in l-space
            let num = if self.ell[i + 1] > self.ell[i] {
                log_diff_exp(-self.ell[i], -self.ell[i + 1])
            } else {
                f64::NEG_INFINITY
            };
            log_p.push(num - (self.grid[i + 1] - self.grid[i]).ln());
        }
        log_p.push(f64::NEG_INFINITY);
        DualSlopes { log_p }
    }

    /// Interpolated `l(v(x))`: linear in `v`-space, evaluated without
    /// leaving the log domain.
    pub fn eval_ell(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g[0] {
            return f64::NEG_INFINITY;
        }
        if x >= g[g.len() - 1] {
            return self.ell[g.len() - 1];
        }
        let j = match g.partition_point(|&gx| gx <= x) {
            0 => 0,
            k => k - 1,
        };
        let theta = (x - g[j]) / (g[j + 1] - g[j]);
        if theta == 0.0 {
            return self.ell[j];
        }
        // -v = theta (-v_{j+1}) + (1-theta)(-v_j)
        -log_sum_exp(theta.ln() - self.ell[j + 1], (1.0 - theta).ln() - self.ell[j])
    }

    /// Interpolated `v(x)` in linear space.
    pub fn eval(&self, x: f64) -> f64 {
        let e = self.eval_ell(x);
        if e == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            -(-e).exp()
        }
    }
}

/// Slopes of a [`PlValueFunction`] in log-space.
///
/// `log_p` has length `N + 1`: `+inf`, the `N - 1` interior slopes
/// (non-increasing, strictly decreasing up to ties below `1e-14`), `-inf`.
#[derive(Debug, Clone)]
pub struct DualSlopes {
    pub log_p: Vec<f64>,
}

impl DualSlopes {
    /// Number of grid points described.
    pub fn n_points(&self) -> usize {
        self.log_p.len() - 1
    }

    /// Strict-decrease check modulo the tie tolerance.
    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.log_p.windows(2).enumerate() {
            if w[1] > w[0] + SLOPE_TIE_TOL {
                return Err(Error::InvalidParameter(format!(
                    "dual slopes increase at index {}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// `v_dagger(p)`: the grid point whose slope bracket contains `p`,
/// located by binary search over the decreasing `log p_i`.
///
/// Brackets are half-open `(p_i, p_{i-1}]`, so an exact tie with `p_i`
/// selects the larger wealth `x_{i+1}`; `+inf` maps to the first grid
/// point and anything at or below the last interior slope to the last.
pub fn v_dagger(slopes: &DualSlopes, grid: &[f64], log_p: f64) -> f64 {
    grid[v_dagger_index(slopes, log_p)]
}

/// Index form of [`v_dagger`].
pub fn v_dagger_index(slopes: &DualSlopes, log_p: f64) -> usize {
    let interior = &slopes.log_p[1..slopes.log_p.len() - 1];
    // count interior slopes >= log_p; the array is non-increasing
    interior.partition_point(|&s| s >= log_p)
}
