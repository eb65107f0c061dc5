//! Energy-doubling sweep over `b` and the `b → 0` limit of nodal solutions.

use serde::{Deserialize, Serialize};

use super::{dilation_factor, dilation_oracle, shoot_schrodinger, OracleSolution, ShootingOptions};
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::minimax::{CriticalPoint, GroundPipeline, NodalPipeline};
use crate::model::{ModelParams, Nonlinearity, PerturbationParams, Potential, Problem};
use crate::radial::{build_grid, Field, GridSpec};
use crate::report::{csv_document, fmt_f64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Coefficients `b`, listed in decreasing order.
    pub b_values: Vec<f64>,
    /// Ground-state grid at `b = 0`; stretched by the dilation factor of
    /// the ground state for `b > 0`.
    pub ground_grid: GridSpec,
    /// Starting grid of every nodal run.
    pub nodal_grid: GridSpec,
    /// Ground-state bump in `b = 0` units; stretched like the grid.
    pub ground: GroundPipeline,
    pub nodal: NodalPipeline,
    pub shooting: ShootingOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            b_values: vec![0.2, 0.1, 0.05, 0.02, 0.01, 0.0],
            ground_grid: GridSpec {
                r_max: 30.0,
                n: 3000,
            },
            nodal_grid: GridSpec {
                r_max: 30.0,
                n: 30000,
            },
            ground: GroundPipeline::default(),
            nodal: NodalPipeline::default(),
            shooting: ShootingOptions::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b_values.is_empty() {
            return Err(Error::config("study.b_values must not be empty"));
        }
        if self.b_values.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(Error::config("study.b_values must be nonnegative"));
        }
        if self.b_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("study.b_values must be strictly decreasing"));
        }
        self.ground_grid.build()?;
        self.nodal_grid.build()?;
        self.nodal.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `m_b − 2c_b > 0`.
    Holds,
    Fails,
    /// A sub-solve failed; see the row's failure note.
    Incomplete,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Incomplete => "incomplete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSource {
    /// Mountain pass and nodal continuation.
    Solver,
    /// Shooting solutions of the local problem.
    Shooting,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingRow {
    pub b: f64,
    pub source: RowSource,
    pub c_b: Option<f64>,
    pub m_b: Option<f64>,
    pub margin: Option<f64>,
    pub verdict: Verdict,
    /// Exact levels of the dilated shooting solutions.
    pub c_oracle: f64,
    pub m_oracle: f64,
    pub c_oracle_rel: Option<f64>,
    pub m_oracle_rel: Option<f64>,
    pub ground: Option<CriticalPoint>,
    /// Nodal minimax point at the pipeline strength.
    pub nodal_initial: Option<CriticalPoint>,
    pub nodal: Option<CriticalPoint>,
    pub failures: Vec<String>,
}

/// Intercepts at `b = 0` of straight lines through the three smallest
/// positive `b` values, next to the shooting levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Limits {
    pub c0_shooting: f64,
    pub m0_shooting: f64,
    pub c0_extrapolated: Option<f64>,
    pub m0_extrapolated: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingReport {
    pub b_values: Vec<f64>,
    pub rows: Vec<DoublingRow>,
    /// Largest tested `b` such that every completed row with `b' ≤ b` has a
    /// positive margin.
    pub b_star: Option<f64>,
    pub limits: Limits,
    /// `c_b` strictly increasing in `b` over completed rows.
    pub c_increasing: bool,
    /// `|c_b − c₀|` decreasing as `b` decreases.
    pub c_trend: bool,
    /// `|m_b − m₀|` decreasing as `b` decreases.
    pub m_trend: bool,
}

impl DoublingReport {
    /// `b,c_b,m_b,margin,verdict`, one line per row.
    pub fn to_csv(&self) -> String {
        let cell = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        csv_document(
            &["b", "c_b", "m_b", "margin", "verdict"],
            self.rows.iter().map(|r| {
                vec![
                    fmt_f64(r.b),
                    cell(r.c_b),
                    cell(r.m_b),
                    cell(r.margin),
                    r.verdict.as_str().to_string(),
                ]
            }),
        )
    }

    /// Every converged critical point held by the report.
    pub fn critical_points(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.rows
            .iter()
            .flat_map(|r| [&r.ground, &r.nodal_initial, &r.nodal])
            .flatten()
    }
}

/// Checks the sweep preconditions: pure power `f` with `p ∈ (2, 6)` and
/// constant `V`.
fn check_sweep_model(base: &ModelParams) -> Result<()> {
    if !matches!(base.potential, Potential::Constant { .. }) {
        return Err(Error::UnsupportedPotential(
            "the doubling and limit studies need a constant potential".into(),
        ));
    }
    match base.nonlinearity {
        Nonlinearity::Power { p } if p > 2.0 && p < 6.0 => Ok(()),
        _ => Err(Error::config(
            "the doubling and limit studies need f(u) = |u|^(p-2)u with 2 < p < 6",
        )),
    }
}

/// Ground and one-node shooting solutions of the local problem.
pub fn local_references(
    base: &ModelParams,
    cfg: &SweepConfig,
) -> Result<(OracleSolution, OracleSolution)> {
    let local = base.with_b(0.0)?;
    let grid = cfg.ground_grid.build()?;
    let c0 = shoot_schrodinger(&local, 0, &grid, &cfg.shooting)?;
    let m0 = shoot_schrodinger(&local, 1, &grid, &cfg.shooting)?;
    Ok((c0, m0))
}

fn relative(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

fn solver_row(
    base: &ModelParams,
    pert: &PerturbationParams,
    b: f64,
    cfg: &SweepConfig,
    flow: &FlowConfig,
    refs: (&OracleSolution, &OracleSolution),
) -> Result<DoublingRow> {
    let model = base.with_b(b)?;
    let off = PerturbationParams::off(pert.alpha, pert.r_exp, &model)?;
    let (w_c, w_m) = refs;
    let s = dilation_factor(model.a, b, w_c.integrals.grad);
    let ground_grid = build_grid(cfg.ground_grid.r_max * s, cfg.ground_grid.n)?;
    let c_oracle = dilation_oracle(w_c, &model, &ground_grid)?.energy;
    let m_oracle = dilation_oracle(w_m, &model, &ground_grid)?.energy;
    let mut row = DoublingRow {
        b,
        source: RowSource::Solver,
        c_b: None,
        m_b: None,
        margin: None,
        verdict: Verdict::Incomplete,
        c_oracle,
        m_oracle,
        c_oracle_rel: None,
        m_oracle_rel: None,
        ground: None,
        nodal_initial: None,
        nodal: None,
        failures: Vec::new(),
    };
    let ground_problem = Problem::new(model.clone(), off, ground_grid)?;
    match cfg.ground.dilated(s).run(&ground_problem, flow) {
        Ok(run) => {
            row.c_b = Some(run.point.level);
            row.c_oracle_rel = Some(relative(run.point.level, c_oracle));
            row.ground = Some(run.point);
        }
        Err(e) => row.failures.push(format!("ground: {e}")),
    }
    let nodal_problem = Problem::new(model, off, cfg.nodal_grid.build()?)?;
    match cfg.nodal.run_continuation(&nodal_problem, flow) {
        Ok(run) => {
            let point = run.outcome.point;
            row.m_b = Some(point.level);
            row.m_oracle_rel = Some(relative(point.level, m_oracle));
            row.nodal_initial = Some(run.outcome.initial.point);
            row.nodal = Some(point);
        }
        Err(e) => row.failures.push(format!("nodal: {e}")),
    }
    if let (Some(c), Some(m)) = (row.c_b, row.m_b) {
        let margin = m - 2.0 * c;
        row.margin = Some(margin);
        row.verdict = if margin > 0.0 {
            Verdict::Holds
        } else {
            Verdict::Fails
        };
    }
    Ok(row)
}

fn shooting_row(w_c: &OracleSolution, w_m: &OracleSolution) -> DoublingRow {
    let margin = w_m.energy - 2.0 * w_c.energy;
    DoublingRow {
        b: 0.0,
        source: RowSource::Shooting,
        c_b: Some(w_c.energy),
        m_b: Some(w_m.energy),
        margin: Some(margin),
        verdict: if margin > 0.0 {
            Verdict::Holds
        } else {
            Verdict::Fails
        },
        c_oracle: w_c.energy,
        m_oracle: w_m.energy,
        c_oracle_rel: Some(0.0),
        m_oracle_rel: Some(0.0),
        ground: None,
        nodal_initial: None,
        nodal: None,
        failures: Vec::new(),
    }
}

/// Intercept of the least-squares line through `(x, y)`.
fn intercept(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(my - sxy / sxx * mx)
}

/// Whether `|y − y₀|` strictly increases along `points` sorted by `b`.
fn gaps_increase(points: &[(f64, f64)], y0: f64) -> bool {
    points
        .windows(2)
        .all(|w| (w[1].1 - y0).abs() > (w[0].1 - y0).abs())
}

/// For every `b`: `c_b` by mountain pass (checked against the dilation
/// oracle), `m_b` by nodal continuation, and the margin `m_b − 2c_b`. The
/// `b = 0` row comes from shooting. A failed sub-solve marks its row
/// incomplete without stopping the sweep.
pub fn doubling_sweep(
    base: &ModelParams,
    pert: &PerturbationParams,
    cfg: &SweepConfig,
    flow: &FlowConfig,
) -> Result<DoublingReport> {
    check_sweep_model(base)?;
    cfg.validate()?;
    let (w_c, w_m) = local_references(base, cfg)?;
    let mut rows = Vec::with_capacity(cfg.b_values.len());
    for &b in &cfg.b_values {
        if b == 0.0 {
            rows.push(shooting_row(&w_c, &w_m));
        } else {
            rows.push(solver_row(base, pert, b, cfg, flow, (&w_c, &w_m))?);
        }
    }

    let mut ascending: Vec<&DoublingRow> = rows.iter().collect();
    ascending.sort_by(|x, y| x.b.total_cmp(&y.b));
    let mut b_star = None;
    for row in &ascending {
        match row.verdict {
            Verdict::Holds => b_star = Some(row.b),
            Verdict::Fails => break,
            Verdict::Incomplete => {}
        }
    }
    let positive = |pick: fn(&DoublingRow) -> Option<f64>| -> Vec<(f64, f64)> {
        ascending
            .iter()
            .filter(|r| r.b > 0.0)
            .filter_map(|r| pick(r).map(|y| (r.b, y)))
            .collect()
    };
    let c_points = positive(|r| r.c_b);
    let m_points = positive(|r| r.m_b);
    let limits = Limits {
        c0_shooting: w_c.energy,
        m0_shooting: w_m.energy,
        c0_extrapolated: intercept(&c_points[..c_points.len().min(3)]),
        m0_extrapolated: intercept(&m_points[..m_points.len().min(3)]),
    };
    let c_increasing = c_points.windows(2).all(|w| w[1].1 > w[0].1)
        && c_points.first().is_none_or(|p| p.1 > w_c.energy);
    Ok(DoublingReport {
        b_values: cfg.b_values.clone(),
        c_trend: gaps_increase(&c_points, w_c.energy),
        m_trend: gaps_increase(&m_points, w_m.energy),
        rows,
        b_star,
        limits,
        c_increasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRow {
    pub b: f64,
    /// `‖w_b − w₀‖_E` with `w₀` sign-aligned to `w_b`.
    pub distance: f64,
    pub level: f64,
    /// `|I(w_b) − I₀(w₀)|`.
    pub energy_gap: f64,
    /// `κ·b` from the least-squares fit through the origin.
    pub fit: f64,
    /// `‖w_b − u_b‖_E / ‖u_b‖_E` against the exact dilated solution `u_b`.
    pub oracle_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    pub rows: Vec<LimitRow>,
    pub w0_energy: f64,
    /// Slope `κ` of `energy_gap ≈ κ·b`.
    pub slope: f64,
    /// Distances strictly decreasing as `b` decreases.
    pub monotone: bool,
    /// Every gap within a factor 5 of its fitted value.
    pub within_fit: bool,
    /// Solver error against the exact solution at the smallest `b`.
    pub grid_floor: f64,
    /// Distance at the smallest `b` below ten times the floor.
    pub below_floor: bool,
}

/// Switched-off perturbation with exponents at the centres of their ranges.
/// Norms and unperturbed energies do not depend on them.
fn midpoint_exponents(model: &ModelParams) -> Result<PerturbationParams> {
    let alpha = 0.5 * PerturbationParams::alpha_bound(model.mu);
    let r_exp = 0.5 * (PerturbationParams::r_lower_bound(model.p()) + 6.0);
    PerturbationParams::off(alpha, r_exp, model)
}

/// Limit diagnostics from nodal solutions `w_b` and the one-node shooting
/// solution `w₀`.
pub fn limit_report(
    base: &ModelParams,
    points: &[(f64, &CriticalPoint)],
    w0: &OracleSolution,
) -> Result<LimitReport> {
    if points.is_empty() {
        return Err(Error::config("the limit study needs at least one nodal solution"));
    }
    let mut rows = Vec::with_capacity(points.len());
    let mut floors = Vec::with_capacity(points.len());
    for &(b, point) in points {
        let model = base.with_b(b)?;
        let grid = point.grid.build()?;
        if point.u.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                actual: point.u.len(),
            });
        }
        let problem = Problem::new(model.clone(), midpoint_exponents(&model)?, grid)?;
        let u = &point.u;
        let sign = if u[0] * w0.u0 < 0.0 { -1.0 } else { 1.0 };
        let w0_here = Field::from_fn(&problem.grid, |r| sign * w0.value(r));
        let distance = problem.e_norm(&u.combine(1.0, &w0_here, -1.0));
        let exact = dilation_oracle(w0, &model, &problem.grid)?;
        let exact_u = exact.u.scaled(sign);
        let err = problem.e_norm(&u.combine(1.0, &exact_u, -1.0));
        let oracle_distance = err / problem.e_norm(&exact_u);
        floors.push(err);
        rows.push(LimitRow {
            b,
            distance,
            level: point.level,
            energy_gap: (point.level - w0.energy).abs(),
            fit: 0.0,
            oracle_distance,
        });
    }
    rows.sort_by(|x, y| x.b.total_cmp(&y.b));
    let sbb: f64 = rows.iter().map(|r| r.b * r.b).sum();
    let sbg: f64 = rows.iter().map(|r| r.b * r.energy_gap).sum();
    let slope = if sbb > 0.0 { sbg / sbb } else { 0.0 };
    for r in rows.iter_mut() {
        r.fit = slope * r.b;
    }
    let monotone = rows.windows(2).all(|w| w[0].distance < w[1].distance);
    let within_fit = rows
        .iter()
        .all(|r| r.energy_gap <= 5.0 * r.fit && r.fit <= 5.0 * r.energy_gap);
    let smallest = points
        .iter()
        .enumerate()
        .min_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let grid_floor = floors[smallest];
    let below_floor = rows[0].distance <= 10.0 * grid_floor;
    Ok(LimitReport {
        rows,
        w0_energy: w0.energy,
        slope,
        monotone,
        within_fit,
        grid_floor,
        below_floor,
    })
}

/// Nodal solutions along `cfg.b_values` (zero entries skipped) compared with
/// the one-node shooting solution of the local problem.
pub fn limit_study(
    base: &ModelParams,
    pert: &PerturbationParams,
    cfg: &SweepConfig,
    flow: &FlowConfig,
) -> Result<LimitReport> {
    check_sweep_model(base)?;
    cfg.validate()?;
    let (_, w0) = local_references(base, cfg)?;
    let mut solved = Vec::new();
    for &b in cfg.b_values.iter().filter(|b| **b > 0.0) {
        let model = base.with_b(b)?;
        let off = PerturbationParams::off(pert.alpha, pert.r_exp, &model)?;
        let problem = Problem::new(model, off, cfg.nodal_grid.build()?)?;
        let run = cfg.nodal.run_continuation(&problem, flow)?;
        solved.push((b, run.outcome.point));
    }
    let points: Vec<(f64, &CriticalPoint)> = solved.iter().map(|(b, p)| (*b, p)).collect();
    limit_report(base, &points, &w0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn config_validation() {
        assert!(SweepConfig::default().validate().is_ok());
        let mut c = SweepConfig::default();
        c.b_values = vec![];
        assert!(c.validate().is_err());
        c.b_values = vec![0.1, 0.2];
        assert!(c.validate().is_err());
        c.b_values = vec![0.1, 0.1];
        assert!(c.validate().is_err());
        c.b_values = vec![0.1, -0.1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_model_preconditions() {
        let ok = ModelParams::power(1.0, 0.1, 1.0, 4.0).unwrap();
        assert!(check_sweep_model(&ok).is_ok());
        let mut variable = ok.clone();
        variable.potential = Potential::Tabulated {
            rho: vec![0.0, 1.0, 2.0],
            values: vec![1.0, 2.0, 3.0],
        };
        assert!(matches!(
            check_sweep_model(&variable),
            Err(Error::UnsupportedPotential(_))
        ));
    }

    #[test]
    fn intercept_needs_two_distinct_abscissae() {
        assert_eq!(intercept(&[(1.0, 2.0)]), None);
        assert_eq!(intercept(&[(1.0, 2.0), (1.0, 3.0)]), None);
    }

    #[test]
    fn gap_trend() {
        assert!(gaps_increase(&[(0.01, 1.1), (0.02, 1.3), (0.05, 2.0)], 1.0));
        assert!(!gaps_increase(&[(0.01, 1.1), (0.02, 1.05)], 1.0));
        assert!(gaps_increase(&[(0.01, 0.9), (0.02, 1.2)], 1.0));
    }

    #[test]
    fn verdict_labels() {
        assert_eq!(Verdict::Holds.as_str(), "holds");
        assert_eq!(Verdict::Fails.as_str(), "fails");
        assert_eq!(Verdict::Incomplete.as_str(), "incomplete");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn intercept_recovers_exact_lines(
            c in -100.0f64..100.0,
            k in -100.0f64..100.0,
            xs in proptest::collection::btree_set(1u32..1000, 2..6),
        ) {
            let points: Vec<(f64, f64)> = xs
                .iter()
                .map(|&x| {
                    let x = f64::from(x) * 1e-3;
                    (x, c + k * x)
                })
                .collect();
            let got = intercept(&points).unwrap();
            prop_assert!((got - c).abs() <= 1e-9 * (1.0 + c.abs() + k.abs()));
        }
    }
}
