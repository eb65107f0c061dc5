//! Independent oracles and the energy-doubling experiments.
//!
//! * [`shoot_schrodinger`] solves the local (`b = 0`) radial equation by
//!   shooting and integrates the profile on its own fine mesh.
//! * [`dilation_oracle`] maps a `b = 0` solution with constant potential to
//!   the exact Kirchhoff solution `u_b(ρ) = w(ρ/s)`.
//! * [`doubling_sweep`] and [`limit_study`] run the solver pipelines over a
//!   sequence of `b` values.

pub mod shooting;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Potential};
use crate::radial::{count_sign_changes, Field, RadialGrid};

pub use shooting::{Profile, ShootingOptions};
pub use sweep::{
    doubling_sweep, limit_report, limit_study, local_references, DoublingReport, DoublingRow,
    LimitReport, LimitRow, Limits, RowSource, SweepConfig, Verdict,
};

/// `(∫|∇w|², ∫Vw², ∫F(w), ∫w²)` evaluated on ℝ³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleIntegrals {
    pub grad: f64,
    pub v_l2: f64,
    pub f_int: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSource {
    Shooting,
    Dilation,
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub u: Field,
    pub u0: f64,
    pub k_nodes: usize,
    pub integrals: OracleIntegrals,
    pub energy: f64,
    pub source: OracleSource,
    /// Dilation factor relative to the shooting profile (1 for shooting).
    pub scale: f64,
    /// `|u| + |u′|` at the end of the shooting horizon.
    pub decay_residual: f64,
    profile: Profile,
}

/// Serializable summary of an oracle solution (the profile goes to CSV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub u0: f64,
    pub k_nodes: usize,
    pub integrals: OracleIntegrals,
    pub energy: f64,
    pub source: OracleSource,
    pub scale: f64,
    pub decay_residual: f64,
    pub sign_changes_on_grid: usize,
}

impl OracleSolution {
    /// Value of the continuous profile at `rho` (after dilation).
    pub fn value(&self, rho: f64) -> f64 {
        self.profile.value(rho / self.scale)
    }

    /// Resamples the continuous profile on another grid.
    pub fn sample(&self, grid: &RadialGrid) -> Field {
        Field::from_fn(grid, |r| self.value(r))
    }

    pub fn summary(&self) -> OracleSummary {
        OracleSummary {
            u0: self.u0,
            k_nodes: self.k_nodes,
            integrals: self.integrals,
            energy: self.energy,
            source: self.source,
            scale: self.scale,
            decay_residual: self.decay_residual,
            sign_changes_on_grid: count_sign_changes(&self.u, 1e-12 * self.u.max_abs()),
        }
    }
}

fn constant_potential(model: &ModelParams) -> Option<f64> {
    match model.potential {
        Potential::Constant { v0 } => Some(v0),
        _ => None,
    }
}

/// Composite Simpson integrals of the profile, `4π∫g ρ² dρ`, on a mesh
/// reaching far into the analytic tail.
fn profile_integrals(profile: &Profile, model: &ModelParams, horizon: f64) -> OracleIntegrals {
    let h = profile.step;
    let mut m = (horizon / h).ceil() as usize;
    if m % 2 == 1 {
        m += 1;
    }
    let mut acc = [0.0; 4];
    for i in 0..=m {
        let rho = i as f64 * h;
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let (u, du) = profile.eval(rho);
        let r2 = rho * rho * w;
        acc[0] += r2 * du * du;
        acc[1] += r2 * model.potential.value(rho) * u * u;
        acc[2] += r2 * model.nonlinearity.primitive(u);
        acc[3] += r2 * u * u;
    }
    let c = 4.0 * std::f64::consts::PI * h / 3.0;
    OracleIntegrals {
        grad: c * acc[0],
        v_l2: c * acc[1],
        f_int: c * acc[2],
        l2: c * acc[3],
    }
}

/// Radial solution of `−aΔw + Vw = f(w)` with exactly `k_nodes` sign
/// changes, sampled on `grid`.
pub fn shoot_schrodinger(
    params: &ModelParams,
    k_nodes: usize,
    grid: &RadialGrid,
    opts: &ShootingOptions,
) -> Result<OracleSolution> {
    if params.b != 0.0 {
        return Err(Error::Oracle(format!(
            "shooting solves the local problem; b must be 0, got {}",
            params.b
        )));
    }
    let shot = shooting::shoot(params, k_nodes, opts)?;
    let horizon = shot.profile.cut + 40.0 / shot.profile.kappa;
    let integrals = profile_integrals(&shot.profile, params, horizon);
    let energy = 0.5 * (params.a * integrals.grad + integrals.v_l2) - integrals.f_int;
    let u = Field::from_fn(grid, |r| shot.profile.value(r));
    Ok(OracleSolution {
        u,
        u0: shot.u0,
        k_nodes,
        integrals,
        energy,
        source: OracleSource::Shooting,
        scale: 1.0,
        decay_residual: shot.decay_residual,
        profile: shot.profile,
    })
}

/// Positive root of `a s² = a + b K s`: the dilation that turns a solution
/// of `−aΔw + V₀w = f(w)` into the solution `w(ρ/s)` of the Kirchhoff
/// problem with coefficient `b`. Reduces to `(bK + sqrt(b²K² + 4))/2` at
/// `a = 1`.
pub fn dilation_factor(a: f64, b: f64, grad: f64) -> f64 {
    let bk = b * grad / a;
    0.5 * (bk + (bk * bk + 4.0).sqrt())
}

/// Kirchhoff energy of `w(ρ/s)` assembled from the integrals of `w`.
pub fn dilated_energy(a: f64, b: f64, s: f64, w: &OracleIntegrals) -> f64 {
    let k = s * w.grad;
    let s3 = s * s * s;
    0.5 * a * k + 0.5 * s3 * w.v_l2 + 0.25 * b * k * k - s3 * w.f_int
}

/// Exact Kirchhoff solution for constant `V` obtained by dilating a `b = 0`
/// solution, sampled on `grid`.
pub fn dilation_oracle(
    w: &OracleSolution,
    params: &ModelParams,
    grid: &RadialGrid,
) -> Result<OracleSolution> {
    if constant_potential(params).is_none() {
        return Err(Error::UnsupportedPotential(
            "the dilation oracle needs a constant potential".into(),
        ));
    }
    let base = w.integrals;
    let s = dilation_factor(params.a, params.b, base.grad);
    let s3 = s * s * s;
    let integrals = OracleIntegrals {
        grad: s * base.grad,
        v_l2: s3 * base.v_l2,
        f_int: s3 * base.f_int,
        l2: s3 * base.l2,
    };
    let energy = dilated_energy(params.a, params.b, s, &base);
    let mut out = OracleSolution {
        u: Field::zeros(grid),
        u0: w.u0,
        k_nodes: w.k_nodes,
        integrals,
        energy,
        source: OracleSource::Dilation,
        scale: w.scale * s,
        decay_residual: w.decay_residual,
        profile: w.profile.clone(),
    };
    out.u = out.sample(grid);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PerturbationParams, Problem};
    use crate::radial::build_grid;

    fn cubic(b: f64) -> ModelParams {
        ModelParams::power(1.0, b, 1.0, 4.0).unwrap()
    }

    #[test]
    fn ground_state_of_cubic_nls() {
        let grid = build_grid(30.0, 3000).unwrap();
        let sol = shoot_schrodinger(&cubic(0.0), 0, &grid, &ShootingOptions::default()).unwrap();
        // Classical amplitude of the 3-D cubic ground state.
        assert!((sol.u0 - 4.337_387).abs() < 1e-4, "u0 = {}", sol.u0);
        let it = sol.integrals;
        // Nehari K + L = 4∫F and Pohozaev K = 3L for the cubic case.
        assert!((it.grad + it.v_l2 - 4.0 * it.f_int).abs() < 1e-6 * it.grad);
        assert!((it.grad - 3.0 * it.v_l2).abs() < 1e-6 * it.grad);
        assert_eq!(sol.summary().sign_changes_on_grid, 0);
    }

    #[test]
    fn one_node_solution_has_one_zero() {
        let grid = build_grid(30.0, 3000).unwrap();
        let sol = shoot_schrodinger(&cubic(0.0), 1, &grid, &ShootingOptions::default()).unwrap();
        assert_eq!(sol.summary().sign_changes_on_grid, 1);
        let it = sol.integrals;
        assert!((it.grad - 3.0 * it.v_l2).abs() < 1e-5 * it.grad);
    }

    #[test]
    fn amplitude_is_stable_under_tolerance_refinement() {
        let grid = build_grid(30.0, 3000).unwrap();
        let coarse = ShootingOptions {
            shoot_tol: 1e-9,
            ..ShootingOptions::default()
        };
        let fine = ShootingOptions {
            shoot_tol: 1e-10,
            ..ShootingOptions::default()
        };
        let a = shoot_schrodinger(&cubic(0.0), 0, &grid, &coarse).unwrap();
        let b = shoot_schrodinger(&cubic(0.0), 0, &grid, &fine).unwrap();
        assert!((a.u0 - b.u0).abs() < 1e-5 * b.u0);
    }

    #[test]
    fn shooting_rejects_nonlocal_model() {
        let grid = build_grid(30.0, 3000).unwrap();
        assert!(matches!(
            shoot_schrodinger(&cubic(0.1), 0, &grid, &ShootingOptions::default()),
            Err(Error::Oracle(_))
        ));
    }

    #[test]
    fn dilation_is_identity_at_b_zero() {
        assert_eq!(dilation_factor(1.0, 0.0, 57.0), 1.0);
        let grid = build_grid(30.0, 3000).unwrap();
        let w = shoot_schrodinger(&cubic(0.0), 0, &grid, &ShootingOptions::default()).unwrap();
        let u = dilation_oracle(&w, &cubic(0.0), &grid).unwrap();
        assert_eq!(u.u.values(), w.u.values());
        assert!((u.energy - w.energy).abs() < 1e-14 * w.energy);
    }

    #[test]
    fn dilation_factor_solves_its_quadratic() {
        for &(a, b, k) in &[(1.0, 0.05, 56.8), (2.0, 0.3, 10.0), (0.5, 0.01, 100.0)] {
            let s = dilation_factor(a, b, k);
            assert!((a * s * s - a - b * k * s).abs() < 1e-12 * a * s * s);
        }
    }

    #[test]
    fn dilated_solution_has_second_order_residual() {
        let w_grid = build_grid(30.0, 3000).unwrap();
        let w = shoot_schrodinger(&cubic(0.0), 0, &w_grid, &ShootingOptions::default()).unwrap();
        let model = cubic(0.05);
        let s = dilation_factor(1.0, 0.05, w.integrals.grad);
        let mut sups = Vec::new();
        for n in [1500, 3000] {
            let grid = build_grid(25.0 * s, n).unwrap();
            let u = dilation_oracle(&w, &model, &grid).unwrap();
            let problem = Problem::new(
                model.clone(),
                PerturbationParams::off(0.05, 5.0, &model).unwrap(),
                grid,
            )
            .unwrap();
            sups.push(problem.strong_residual(&u.u).max_abs());
        }
        assert!(sups[0] / sups[1] >= 3.5, "{sups:?}");
    }

    #[test]
    fn dilation_rejects_variable_potential() {
        let grid = build_grid(30.0, 3000).unwrap();
        let w = shoot_schrodinger(&cubic(0.0), 0, &grid, &ShootingOptions::default()).unwrap();
        let model = ModelParams::new(
            1.0,
            0.1,
            Potential::Rational {
                c0: 1.0,
                c1: 0.5,
                k: 1.0,
            },
            crate::model::Nonlinearity::Power { p: 4.0 },
            4.0,
        )
        .unwrap();
        assert!(matches!(
            dilation_oracle(&w, &model, &grid),
            Err(Error::UnsupportedPotential(_))
        ));
    }
}
