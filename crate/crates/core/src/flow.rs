//! The fixed-point operator `T_{λ,β}`, the cones `P_ε^±` and the damped
//! descending flow `u ← u + s(T(u) − u)`.
//!
//! `T(u)` is the solution `v` of
//! `−(a + b∫|∇u|²)Δv + (V + λ(∫u²)^α) v = f(u) + β|u|^{r−2}u`
//! with coefficients frozen at `u`. Interior rows are the lumped variational
//! scheme of [`RadialGrid`], so that
//! `I′_{λ,β}(u)[u − T(u)] ≥ ‖u − T(u)‖²_E` holds exactly for the discrete
//! energy and not only up to discretization error.

pub mod newton;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Problem, Sign};
use crate::radial::{quartic_bump, Field};
use crate::report::{csv_document, fmt_f64};
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// Stopping threshold on `‖u − T(u)‖_E / max(1, ‖u‖_E)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping `s ∈ (0, 1]`.
    pub step0: f64,
    /// Backtracking factor in `(0, 1)`.
    pub backtrack: f64,
    /// Fraction of the guaranteed decrease `s‖d‖²_E` required per step.
    pub armijo: f64,
    /// Radius `ε` of the cones `P_ε^±`.
    pub eps_cone: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            tol: 1e-8,
            max_iter: 2000,
            step0: 1.0,
            backtrack: 0.5,
            armijo: 0.25,
            eps_cone: 0.5,
        }
    }
}

/// `tol·max(1, ‖u‖_E)`: the absolute gap threshold at `u`. Rounding in
/// `u − T(u)` grows with `‖u‖_E`, so a purely absolute threshold is out of
/// reach for large solutions.
pub fn gap_threshold(problem: &Problem, u: &[f64], tol: f64) -> f64 {
    tol * problem.e_norm(u).max(1.0)
}

impl FlowConfig {
    pub fn gap_threshold(&self, problem: &Problem, u: &[f64]) -> f64 {
        gap_threshold(problem, u, self.tol)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, value: f64, range: &str| {
            Err(Error::config(format!("flow.{field} = {value} must lie in {range}")))
        };
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("tol", self.tol, "(0, inf)");
        }
        if !(self.step0 > 0.0 && self.step0 <= 1.0) {
            return bad("step0", self.step0, "(0, 1]");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack", self.backtrack, "(0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo", self.armijo, "(0, 1)");
        }
        if !(self.eps_cone > 0.0 && self.eps_cone.is_finite()) {
            return bad("eps_cone", self.eps_cone, "(0, inf)");
        }
        if self.max_iter == 0 {
            return Err(Error::config("flow.max_iter must be positive"));
        }
        Ok(())
    }
}

/// The linear operator of `T` with its two nonlocal coefficients frozen.
#[derive(Debug, Clone)]
pub struct FrozenOperator {
    /// `a + b∫|∇u|²`
    pub coeff: f64,
    /// `λ(∫u²)^α`
    pub shift: f64,
    matrix: Tridiagonal,
}

impl FrozenOperator {
    /// Coefficients taken from `u`.
    pub fn freeze(problem: &Problem, u: &[f64]) -> Result<Self> {
        problem.grid.check(u)?;
        let coeff = problem.model.a + problem.model.b * problem.grid.dirichlet_form(u);
        Self::with_coefficients(problem, coeff, problem.lambda_shift(u))
    }

    pub fn with_coefficients(problem: &Problem, coeff: f64, shift: f64) -> Result<Self> {
        if !(coeff > 0.0 && coeff.is_finite() && shift >= 0.0 && shift.is_finite()) {
            return Err(Error::Numerical {
                row: 0,
                detail: format!("frozen coefficients coeff = {coeff}, shift = {shift}"),
            });
        }
        let g = &problem.grid;
        let n = g.n();
        let h = g.h();
        let e = g.edge();
        let m = g.mass();
        let pot = problem.potential();
        let mut t = Tridiagonal::zeros(n + 1);
        let origin = 6.0 * coeff / (h * h);
        t.diag[0] = origin + pot[0] + shift;
        t.upper[0] = -origin;
        for i in 1..n {
            t.lower[i] = -coeff * e[i - 1] / m[i];
            t.upper[i] = -coeff * e[i] / m[i];
            t.diag[i] = coeff * (e[i - 1] + e[i]) / m[i] + pot[i] + shift;
        }
        t.diag[n] = 1.0;
        Ok(FrozenOperator {
            coeff,
            shift,
            matrix: t,
        })
    }

    pub fn matrix(&self) -> &Tridiagonal {
        &self.matrix
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.apply(v)
    }

    /// `rhs − L v` with the stiffness part evaluated from differences of
    /// neighbouring values, which avoids cancellation between entries of
    /// size `coeff/h²`.
    pub fn residual(&self, problem: &Problem, v: &[f64], rhs: &[f64]) -> Vec<f64> {
        let g = &problem.grid;
        let n = g.n();
        let h = g.h();
        let pot = problem.potential();
        let e = g.edge();
        let m = g.mass();
        let mut r = vec![0.0; n + 1];
        r[0] = rhs[0]
            - (6.0 * self.coeff * (v[0] - v[1]) / (h * h) + (pot[0] + self.shift) * v[0]);
        for i in 1..n {
            let stiff = e[i - 1] * (v[i] - v[i - 1]) + e[i] * (v[i] - v[i + 1]);
            r[i] = rhs[i] - (self.coeff * stiff / m[i] + (pot[i] + self.shift) * v[i]);
        }
        r[n] = rhs[n] - v[n];
        r
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Field> {
        let mut rhs = rhs.to_vec();
        if let Some(last) = rhs.last_mut() {
            *last = 0.0;
        }
        Ok(Field::from_raw(self.matrix.solve(&rhs)?))
    }
}

/// Right-hand side `f(u) + β|u|^{r−2}u` with the Dirichlet row zeroed.
pub fn source_vector(problem: &Problem, u: &[f64]) -> Vec<f64> {
    let mut rhs: Vec<f64> = u.iter().map(|&x| problem.source(x)).collect();
    if let Some(last) = rhs.last_mut() {
        *last = 0.0;
    }
    rhs
}

/// `T(u) − u`, solved in correction form `L δ = s − L u` so that the
/// rounding error scales with the residual instead of with `u`.
fn t_correction(problem: &Problem, u: &[f64]) -> Result<Vec<f64>> {
    problem.grid.check(u)?;
    let op = FrozenOperator::freeze(problem, u)?;
    let rhs = op.residual(problem, u, &source_vector(problem, u));
    op.matrix.solve(&rhs)
}

/// `T_{λ,β}(u)`.
pub fn solve_t(problem: &Problem, u: &[f64]) -> Result<Field> {
    let d = t_correction(problem, u)?;
    Ok(Field::from_raw(u.iter().zip(&d).map(|(x, y)| x + y).collect()))
}

/// `T(u)` together with `‖u − T(u)‖_E`.
pub fn fixed_point_gap(problem: &Problem, u: &[f64]) -> Result<(Field, f64)> {
    let d = t_correction(problem, u)?;
    let gap = problem.e_norm(&d);
    let tu = Field::from_raw(u.iter().zip(&d).map(|(x, y)| x + y).collect());
    Ok((tu, gap))
}

/// `‖u^∓‖_E`, the surrogate for `dist(u, P^±)`.
pub fn cone_distance(problem: &Problem, u: &[f64], sign: Sign) -> f64 {
    problem.cone_distance(u, sign)
}

/// `true` when `u` lies outside both `P_ε^+` and `P_ε^−`.
pub fn outside_cones(problem: &Problem, u: &[f64], eps: f64) -> bool {
    cone_distance(problem, u, Sign::Plus) >= eps && cone_distance(problem, u, Sign::Minus) >= eps
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub u: Field,
    pub accepted: bool,
    pub step: f64,
    /// `I_{λ,β}` before and after.
    pub energy_before: f64,
    pub energy_after: f64,
    /// `‖u − T(u)‖_E` of the input.
    pub gap: f64,
}

/// One damped step along `d = T(u) − u` with Armijo backtracking.
pub fn flow_step(problem: &Problem, u: &Field, cfg: &FlowConfig) -> Result<StepOutcome> {
    let tu = solve_t(problem, u)?;
    step_towards(problem, u, &tu, cfg)
}

fn step_towards(problem: &Problem, u: &Field, tu: &Field, cfg: &FlowConfig) -> Result<StepOutcome> {
    let d = tu.combine(1.0, u, -1.0);
    let gap_sq = problem.e_norm_sq(&d);
    let e0 = problem.energy_perturbed(u);
    if gap_sq == 0.0 {
        return Ok(StepOutcome {
            u: u.clone(),
            accepted: true,
            step: 0.0,
            energy_before: e0,
            energy_after: e0,
            gap: 0.0,
        });
    }
    let mut s = cfg.step0;
    while s >= f64::EPSILON {
        let cand = u.combine(1.0, &d, s);
        let e1 = problem.energy_perturbed(&cand);
        if e1.is_finite() && e1 < e0 && e1 <= e0 - cfg.armijo * s * gap_sq {
            return Ok(StepOutcome {
                u: cand,
                accepted: true,
                step: s,
                energy_before: e0,
                energy_after: e1,
                gap: gap_sq.sqrt(),
            });
        }
        s *= cfg.backtrack;
    }
    Err(Error::StepFailure { step: s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Converged,
    MaxIterations,
    /// Backtracking could not certify a decrease (rounding floor reached).
    Stalled,
    /// Energy or amplitude left every sensible bound.
    Unbounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowResult {
    pub u: Field,
    pub iterations: usize,
    pub converged: bool,
    pub status: FlowStatus,
    /// `I_{λ,β}` of every iterate, starting with the initial field.
    pub energy_trace: Vec<f64>,
    /// `‖u_k − T(u_k)‖_E` of every iterate.
    pub gap_trace: Vec<f64>,
    pub fixed_point_gap: f64,
    pub cone_dist_plus: f64,
    pub cone_dist_minus: f64,
    /// Sup norm of the strong residual, reported on convergence.
    pub residual_sup: Option<f64>,
}

impl FlowResult {
    /// `iter,energy,gap`
    pub fn trace_csv(&self) -> String {
        csv_document(
            &["iter", "energy", "gap"],
            self.energy_trace
                .iter()
                .zip(&self.gap_trace)
                .enumerate()
                .map(|(k, (e, g))| vec![k.to_string(), fmt_f64(*e), fmt_f64(*g)]),
        )
    }
}

const UNBOUNDED_AMPLITUDE: f64 = 1e8;

/// Iterates [`flow_step`] until the gap meets [`FlowConfig::gap_threshold`]
/// or `max_iter`.
pub fn descend(problem: &Problem, u0: &Field, cfg: &FlowConfig) -> Result<FlowResult> {
    cfg.validate()?;
    problem.grid.check(u0)?;
    let mut u = u0.clone();
    let mut energy_trace = vec![problem.energy_perturbed(&u)];
    let mut gap_trace = Vec::new();
    let mut status = FlowStatus::MaxIterations;
    let mut iterations = 0;
    let gap = loop {
        let (tu, gap) = fixed_point_gap(problem, &u)?;
        gap_trace.push(gap);
        if gap <= cfg.gap_threshold(problem, &u) {
            status = FlowStatus::Converged;
            break gap;
        }
        if iterations >= cfg.max_iter {
            break gap;
        }
        match step_towards(problem, &u, &tu, cfg) {
            Ok(step) => {
                u = step.u;
                energy_trace.push(step.energy_after);
                iterations += 1;
            }
            Err(Error::StepFailure { .. }) => {
                status = FlowStatus::Stalled;
                break gap;
            }
            Err(e) => return Err(e),
        }
        if u.max_abs() > UNBOUNDED_AMPLITUDE {
            status = FlowStatus::Unbounded;
            gap_trace.push(f64::NAN);
            break f64::INFINITY;
        }
    };
    let converged = status == FlowStatus::Converged;
    let residual_sup = converged.then(|| problem.strong_residual(&u).max_abs());
    Ok(FlowResult {
        cone_dist_plus: cone_distance(problem, &u, Sign::Plus),
        cone_dist_minus: cone_distance(problem, &u, Sign::Minus),
        u,
        iterations,
        converged,
        status,
        energy_trace,
        gap_trace,
        fixed_point_gap: gap,
        residual_sup,
    })
}

/// Central finite difference of `I_{λ,β}` at `u` along `u − T(u)`, paired
/// with `‖u − T(u)‖²_E`.
pub fn descent_pairing(problem: &Problem, u: &[f64]) -> Result<(f64, f64)> {
    let tu = solve_t(problem, u)?;
    let d: Vec<f64> = u.iter().zip(tu.iter()).map(|(x, t)| x - t).collect();
    let gap_sq = problem.e_norm_sq(&d);
    if gap_sq == 0.0 {
        return Ok((0.0, 0.0));
    }
    let scale = problem.e_norm(u).max(1.0) / gap_sq.sqrt();
    let eps = 1e-5 * scale;
    let shifted = |s: f64| -> Vec<f64> { u.iter().zip(&d).map(|(x, y)| x + s * y).collect() };
    let derivative = (problem.energy_perturbed(&shifted(eps))
        - problem.energy_perturbed(&shifted(-eps)))
        / (2.0 * eps);
    Ok((derivative, gap_sq))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeInvarianceRow {
    pub eps: f64,
    pub samples: usize,
    pub invariant: usize,
    pub fraction: f64,
    /// Largest `dist(T(u), P^±)/ε` over the samples.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeInvarianceReport {
    pub seed: u64,
    pub rows: Vec<ConeInvarianceRow>,
    /// Largest tested `ε` at which every sample stayed in its cone.
    pub calibrated_eps: Option<f64>,
}

/// Draws a field in `P_ε^{sign}` close to its boundary: a one-signed bump
/// plus a disjoint bump of the opposite sign whose E-norm is just below `ε`.
pub fn sample_near_cone_boundary(
    problem: &Problem,
    sign: Sign,
    eps: f64,
    rng: &mut impl Rng,
) -> Field {
    let grid = &problem.grid;
    let span = (0.9 * grid.r_max()).min(12.0);
    let min_width = (10.0 * grid.h()).min(0.1 * span);
    let (main, pert) = loop {
        let mut x: [f64; 4] = [0.0; 4];
        for v in x.iter_mut() {
            *v = rng.gen_range(0.0..span);
        }
        x.sort_by(f64::total_cmp);
        if x[1] - x[0] >= min_width && x[3] - x[2] >= min_width && x[2] > x[1] {
            let first = (x[0], x[1]);
            let second = (x[2], x[3]);
            break if rng.gen_bool(0.5) {
                (first, second)
            } else {
                (second, first)
            };
        }
    };
    let amplitude = rng.gen_range(0.5..4.0);
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    let bump_main = Field::from_fn(grid, |r| s * amplitude * quartic_bump(r, main.0, main.1));
    let bump_pert = Field::from_fn(grid, |r| -s * quartic_bump(r, pert.0, pert.1));
    let norm = problem.e_norm(&bump_pert);
    let target = eps * rng.gen_range(0.9..1.0);
    bump_main.combine(1.0, &bump_pert, target / norm)
}

/// Monte-Carlo check that `T` maps `P_ε^±` into itself. Samples alternate
/// between the two cones.
pub fn check_cone_invariance(
    problem: &Problem,
    sample_count: usize,
    eps_list: &[f64],
    seed: u64,
) -> Result<ConeInvarianceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps > 0.0) {
            return Err(Error::config(format!("cone radius must be positive, got {eps}")));
        }
        let mut invariant = 0;
        let mut worst: f64 = 0.0;
        for k in 0..sample_count {
            let sign = if k % 2 == 0 { Sign::Plus } else { Sign::Minus };
            let u = sample_near_cone_boundary(problem, sign, eps, &mut rng);
            let tu = solve_t(problem, &u)?;
            let dist = cone_distance(problem, &tu, sign);
            worst = worst.max(dist / eps);
            if dist < eps {
                invariant += 1;
            }
        }
        rows.push(ConeInvarianceRow {
            eps,
            samples: sample_count,
            invariant,
            fraction: if sample_count == 0 {
                1.0
            } else {
                invariant as f64 / sample_count as f64
            },
            worst_ratio: worst,
        });
    }
    let calibrated_eps = rows
        .iter()
        .filter(|r| r.invariant == r.samples)
        .map(|r| r.eps)
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))));
    Ok(ConeInvarianceReport {
        seed,
        rows,
        calibrated_eps,
    })
}
