//! Domain types: market coefficients, the shifted power utility and its
//! log-space marginal inverse, and discrete mortality models.

use crate::error::{Error, Result};
use crate::numerics::{log_diff_exp, log_sum_exp};
use std::path::Path;

/// Black-Scholes coefficients together with the consumption step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Risky-asset drift per year.
    pub mu: f64,
    /// Risky-asset volatility per sqrt-year.
    pub sigma: f64,
    /// Risk-free rate per year.
    pub r: f64,
    /// Years between consumption dates.
    pub delta_t: f64,
}

impl MarketParams {
    pub fn new(mu: f64, sigma: f64, r: f64, delta_t: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if !(delta_t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_t must be positive, got {delta_t}"
            )));
        }
        if !(mu.is_finite() && r.is_finite()) {
            return Err(Error::InvalidParameter("mu and r must be finite".into()));
        }
        Ok(MarketParams { mu, sigma, r, delta_t })
    }

    /// Scaled market price of risk over one step, `|mu - r| sqrt(dt) / sigma`.
    /// Zero exactly when `mu == r`.
    pub fn m(&self) -> f64 {
        if self.mu == self.r {
            0.0
        } else {
            (self.mu - self.r).abs() * self.delta_t.sqrt() / self.sigma
        }
    }

    /// One-step risk-free discount factor `e^{-r dt}`.
    pub fn step_discount(&self) -> f64 {
        (-self.r * self.delta_t).exp()
    }
}

/// Shifted power utility `u(x) = a (x - x0)^n + b` on its domain, `-inf`
/// below the minimum acceptable consumption.
///
/// Concave increasing requires either `n` in `(0,1)` with `a > 0` or
/// `n < 0` with `a < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerUtility {
    pub a: f64,
    pub n: f64,
    pub x0: f64,
    pub b: f64,
}

impl PowerUtility {
    pub fn new(a: f64, n: f64, x0: f64, b: f64) -> Result<Self> {
        let concave_increasing = (n > 0.0 && n < 1.0 && a > 0.0) || (n < 0.0 && a < 0.0);
        if !concave_increasing {
            return Err(Error::InvalidParameter(format!(
                "utility must be concave increasing: need n in (0,1) with a > 0 \
                 or n < 0 with a < 0, got a = {a}, n = {n}"
            )));
        }
        if !(x0.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter("x0 and b must be finite".into()));
        }
        Ok(PowerUtility { a, n, x0, b })
    }

    /// Minimum acceptable consumption: `inf { x : u(x) > -inf }`.
    /// Equals `max(x0, 0)`; the domain never extends below zero.
    pub fn gamma_min(&self) -> f64 {
        self.x0.max(0.0)
    }

    /// Evaluate `u(x)`, returning `-inf` outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        if x < self.gamma_min() {
            return f64::NEG_INFINITY;
        }
        let base = x - self.x0;
        if self.n < 0.0 && base <= 0.0 {
            // pole at x = x0 for negative exponents
            return f64::NEG_INFINITY;
        }
        self.a * base.powf(self.n) + self.b
    }

    /// Marginal utility `u'(x)` for `x` strictly inside the domain.
    pub fn marginal(&self, x: f64) -> f64 {
        self.a * self.n * (x - self.x0).powf(self.n - 1.0)
    }

    // log-space kernel of the marginal inverse: for p = u'(x),
    // x - x0 = (p / (a n))^{1/(n-1)}.
    fn u_tilde_0(&self, y: f64) -> f64 {
        (y - (self.a * self.n).ln()) / (self.n - 1.0)
    }

    /// `log(u_dagger(e^y))` where `u_dagger` is the generalized inverse of
    /// the marginal utility. Monotone non-increasing in `y`; `-inf` is a
    /// valid result (consumption pinned at zero) when `x0 < 0`.
    pub fn u_tilde(&self, y: f64) -> f64 {
        let t0 = self.u_tilde_0(y);
        if self.x0 == 0.0 {
            t0
        } else if self.x0 > 0.0 {
            log_sum_exp(t0, self.x0.ln())
        } else {
            let ln_neg_x0 = (-self.x0).ln();
            if t0 > ln_neg_x0 {
                log_diff_exp(t0, ln_neg_x0)
            } else {
                f64::NEG_INFINITY
            }
        }
    }

    /// `u_dagger(p)` in linear space (mostly for tests and diagnostics).
    pub fn u_dagger(&self, p: f64) -> f64 {
        self.u_tilde(p.ln()).exp()
    }
}

/// Death-time distribution on the consumption grid.
///
/// Holds the per-step death mass `p_t`, the survival function on grid
/// points, and the index of the last time with positive survival.
#[derive(Debug, Clone)]
pub struct MortalityModel {
    delta_t: f64,
    /// Death mass at each grid time `k * delta_t`; sums to one.
    p: Vec<f64>,
    /// Survival `S(k * delta_t) = P(tau >= k dt)` for `k = 0..=steps`.
    survival: Vec<f64>,
    /// Largest step index with `S > 0`.
    t_star: usize,
}

impl MortalityModel {
    /// Build from survival values at grid points. `survival[0]` must be 1,
    /// the values non-increasing; any mass left at the horizon is assigned
    /// to the final grid point so that death is certain by `T`.
    pub fn from_survival(delta_t: f64, mut survival: Vec<f64>) -> Result<Self> {
        if !(delta_t > 0.0) {
            return Err(Error::Mortality("delta_t must be positive".into()));
        }
        if survival.len() < 2 {
            return Err(Error::Mortality("need at least one step".into()));
        }
        if (survival[0] - 1.0).abs() > 1e-12 {
            return Err(Error::Mortality("survival must start at 1".into()));
        }
        survival[0] = 1.0;
        let steps = survival.len() - 1;
        for k in 1..=steps {
            if survival[k] > survival[k - 1] + 1e-12 {
                return Err(Error::Mortality(format!("survival increases at step {k}")));
            }
            survival[k] = survival[k].min(survival[k - 1]).max(0.0);
        }
        // death certain by the horizon
        survival[steps] = 0.0;
        let p: Vec<f64> = (0..steps).map(|k| survival[k] - survival[k + 1]).collect();
        let t_star = (0..steps).rev().find(|&k| survival[k] > 0.0).ok_or_else(|| {
            Error::Mortality("no survivors at time zero".into())
        })?;
        Ok(MortalityModel { delta_t, p, survival, t_star })
    }

    /// Exponential mortality with constant force `lambda`, truncated at
    /// `horizon_years` with the residual mass on the final grid point.
    pub fn exponential(lambda: f64, delta_t: f64, horizon_years: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Mortality(format!("lambda must be positive, got {lambda}")));
        }
        let steps = steps_for(horizon_years, delta_t)?;
        let survival = (0..=steps).map(|k| (-lambda * k as f64 * delta_t).exp()).collect();
        Self::from_survival(delta_t, survival)
    }

    /// Build from annual mortality rates with a piecewise-constant hazard
    /// within each year. `rates[i]` is the one-year death probability at
    /// age `first_age + i`.
    pub fn from_annual_rates(
        rates: &[f64],
        first_age: u32,
        start_age: u32,
        terminal_age: u32,
        delta_t: f64,
    ) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Mortality("empty rate table".into()));
        }
        if start_age >= terminal_age {
            return Err(Error::Mortality(format!(
                "start age {start_age} must precede terminal age {terminal_age}"
            )));
        }
        if start_age < first_age || (terminal_age - first_age) as usize > rates.len() {
            return Err(Error::Mortality(format!(
                "table covers ages {first_age}..{}, need {start_age}..{terminal_age}",
                first_age as usize + rates.len()
            )));
        }
        for (i, &q) in rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::Mortality(format!(
                    "rate {q} at age {} outside [0, 1]",
                    first_age as usize + i
                )));
            }
        }
        // hazard per year, constant within the year
        let offset = (start_age - first_age) as usize;
        let span = (terminal_age - start_age) as usize;
        let hazards: Vec<f64> = rates[offset..offset + span]
            .iter()
            .map(|&q| if q >= 1.0 { f64::INFINITY } else { -(-q).ln_1p() })
            .collect();
        let steps = steps_for(span as f64, delta_t)?;
        let mut cum = vec![0.0_f64; span + 1];
        for y in 0..span {
            cum[y + 1] = cum[y] + hazards[y];
        }
        let survival = (0..=steps)
            .map(|k| {
                let t = k as f64 * delta_t;
                let y = (t.floor() as usize).min(span - 1);
                let h = cum[y] + hazards[y] * (t - y as f64);
                (-h).exp()
            })
            .collect();
        Self::from_survival(delta_t, survival)
    }

    /// Parse a mortality CSV (`age,rate` header, one row per integer age)
    /// and build the model for `[start_age, terminal_age)`.
    pub fn from_csv(
        path: &Path,
        start_age: u32,
        terminal_age: u32,
        delta_t: f64,
    ) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Mortality(format!("cannot read {}: {e}", path.display()))
        })?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "age,rate" => {}
            _ => return Err(Error::Mortality(format!("{}: expected `age,rate` header", path.display()))),
        }
        let mut first_age: Option<u32> = None;
        let mut prev_age: Option<u32> = None;
        let mut rates = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (age_s, rate_s) = line.split_once(',').ok_or_else(|| {
                Error::Mortality(format!("{}:{}: malformed row", path.display(), lineno + 2))
            })?;
            let age: u32 = age_s.trim().parse().map_err(|_| {
                Error::Mortality(format!("{}:{}: bad age `{age_s}`", path.display(), lineno + 2))
            })?;
            let rate: f64 = rate_s.trim().parse().map_err(|_| {
                Error::Mortality(format!("{}:{}: bad rate `{rate_s}`", path.display(), lineno + 2))
            })?;
            if let Some(p) = prev_age {
                if age != p + 1 {
                    return Err(Error::Mortality(format!(
                        "{}:{}: ages must increase by one ({} after {})",
                        path.display(),
                        lineno + 2,
                        age,
                        p
                    )));
                }
            } else {
                first_age = Some(age);
            }
            prev_age = Some(age);
            rates.push(rate);
        }
        let first_age =
            first_age.ok_or_else(|| Error::Mortality(format!("{}: empty table", path.display())))?;
        Self::from_annual_rates(&rates, first_age, start_age, terminal_age, delta_t)
    }

    /// Synthetic Gompertz-Makeham annual rates, `h(x) = A + B c^x`.
    /// Stands in for proprietary cohort tables in the shipped fixtures.
    pub fn synthetic_gompertz_makeham_rates(first_age: u32, last_age: u32) -> Vec<f64> {
        const A: f64 = 2e-4;
        const B: f64 = 2.7e-6;
        const C: f64 = 1.124;
        (first_age..=last_age)
            .map(|x| {
                let h = A + B * C.powi(x as i32);
                -(-h).exp_m1()
            })
            .collect()
    }

    /// Built-in synthetic table over `[start_age, terminal_age)`.
    pub fn synthetic(start_age: u32, terminal_age: u32, delta_t: f64) -> Result<Self> {
        let rates = Self::synthetic_gompertz_makeham_rates(start_age, terminal_age);
        Self::from_annual_rates(&rates, start_age, start_age, terminal_age, delta_t)
    }

    /// Number of consumption dates (grid points `0, dt, ..., T - dt`).
    pub fn steps(&self) -> usize {
        self.p.len()
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    /// Death mass at grid index `k`.
    pub fn death_mass(&self, k: usize) -> f64 {
        self.p[k]
    }

    /// Survival `S(k dt)`; index `steps()` is the horizon where `S = 0`.
    pub fn survival(&self, k: usize) -> f64 {
        self.survival[k]
    }

    /// Last grid index with positive survival.
    pub fn t_star(&self) -> usize {
        self.t_star
    }

    /// One-step conditional survival `s_k = S((k+1) dt) / S(k dt)`.
    pub fn survival_step(&self, k: usize) -> Result<f64> {
        if k >= self.steps() {
            return Err(Error::SurvivalExhausted { step: k });
        }
        let s_k = self.survival[k];
        if s_k <= 0.0 {
            return Err(Error::SurvivalExhausted { step: k });
        }
        Ok((self.survival[k + 1] / s_k).clamp(0.0, 1.0))
    }
}

fn steps_for(horizon_years: f64, delta_t: f64) -> Result<usize> {
    if !(delta_t > 0.0) {
        return Err(Error::Mortality("delta_t must be positive".into()));
    }
    let n = (horizon_years / delta_t).round();
    if n < 1.0 || (n * delta_t - horizon_years).abs() > 1e-9 * horizon_years.max(1.0) {
        return Err(Error::Mortality(format!(
            "step size {delta_t} does not divide the horizon {horizon_years}"
        )));
    }
    Ok(n as usize)
}

/// Individual (`n = 1`) or infinite collective (`n = inf`) fund.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FundMode {
    Individual,
    Collective,
}

impl FundMode {
    /// The mortality-credit exponent: 0 for an individual, 1 for the
    /// infinite collective.
    pub fn c(self) -> f64 {
        match self {
            FundMode::Individual => 0.0,
            FundMode::Collective => 1.0,
        }
    }
}
