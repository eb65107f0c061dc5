//! Configured end-to-end runs: initializer, minimax, adaptation and, for
//! nodal solutions, continuation to the unperturbed problem.

use serde::{Deserialize, Serialize};

use super::{
    adapt_point, build_phi0, calibrate_R, continuation_to_zero, minimax_nodal,
    mountain_pass_positive, BumpSpec, Calibration, ContinuationOutcome, CriticalPoint,
    MinimaxOptions, MinimaxOutcome, MountainPassOptions, MountainPassOutcome, Schedule,
    SimplexState,
};
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::model::Problem;

/// Mountain pass from one positive bump, then ball extension and mesh
/// refinement of the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundPipeline {
    pub bump: BumpSpec,
    pub mountain_pass: MountainPassOptions,
    pub adapt: bool,
}

impl Default for GroundPipeline {
    fn default() -> Self {
        GroundPipeline {
            bump: BumpSpec {
                intervals: vec![[-4.0, 4.0]],
                signs: vec![1.0],
                amplitude: 1.0,
            },
            mountain_pass: MountainPassOptions::default(),
            adapt: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundRun {
    pub outcome: MountainPassOutcome,
    /// The mountain-pass point after adaptation.
    pub point: CriticalPoint,
    #[serde(skip)]
    pub problem: Problem,
}

impl GroundPipeline {
    /// The pipeline with the bump support stretched by `factor`.
    pub fn dilated(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for iv in out.bump.intervals.iter_mut() {
            iv[0] *= factor;
            iv[1] *= factor;
        }
        out
    }

    pub fn run(&self, problem: &Problem, cfg: &FlowConfig) -> Result<GroundRun> {
        let outcome = mountain_pass_positive(problem, cfg, &self.bump, &self.mountain_pass)?;
        let (problem, point, _) = if self.adapt {
            adapt_point(problem, outcome.point.clone(), 1, cfg, true)?
        } else {
            (problem.clone(), outcome.point.clone(), 0)
        };
        Ok(GroundRun {
            outcome,
            point,
            problem,
        })
    }
}

/// Simplex minimax from two bumps of opposite sign, optionally continued to
/// `λ = β = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NodalPipeline {
    pub bumps: BumpSpec,
    /// Subdivisions per simplex leg.
    pub resolution: usize,
    /// Fixed `R`; calibrated by doubling from `r_start` when absent.
    pub r_scale: Option<f64>,
    pub r_start: f64,
    pub r_cap: f64,
    /// Common value of `λ = β` for the minimax stage.
    pub strength: f64,
    pub schedule: Schedule,
    pub minimax: MinimaxOptions,
}

impl Default for NodalPipeline {
    fn default() -> Self {
        NodalPipeline {
            bumps: BumpSpec {
                intervals: vec![[4.0, 10.0], [0.5, 3.5]],
                signs: vec![-1.0, 1.0],
                amplitude: 10.0,
            },
            resolution: 8,
            r_scale: None,
            r_start: 1.0,
            r_cap: 64.0,
            strength: 1.0,
            schedule: Schedule::default(),
            minimax: MinimaxOptions::default(),
        }
    }
}

/// Initial simplex of a nodal run.
#[derive(Debug, Clone, Serialize)]
pub struct SimplexSetup {
    pub calibration: Option<Calibration>,
    pub r_scale: f64,
    #[serde(skip)]
    pub simplex: SimplexState,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodalRun {
    pub setup: SimplexSetup,
    pub outcome: MinimaxOutcome,
    /// The minimax point after adaptation.
    pub point: CriticalPoint,
    #[serde(skip)]
    pub problem: Problem,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationRun {
    pub setup: SimplexSetup,
    pub outcome: ContinuationOutcome,
}

impl NodalPipeline {
    pub fn validate(&self) -> Result<()> {
        self.bumps.validate()?;
        self.schedule.validate()?;
        if self.resolution < 2 {
            return Err(Error::config("nodal.resolution must be at least 2"));
        }
        if !(self.strength > 0.0 && self.strength <= 1.0) {
            return Err(Error::config(format!(
                "nodal.strength = {} must lie in (0, 1]",
                self.strength
            )));
        }
        if !(self.r_start >= 1.0 && self.r_cap >= self.r_start) {
            return Err(Error::config(
                "nodal.r_start must be at least 1 and no larger than nodal.r_cap",
            ));
        }
        if let Some(r) = self.r_scale {
            if !(r >= 1.0 && r.is_finite()) {
                return Err(Error::config(format!("nodal.r_scale = {r} must be at least 1")));
            }
        }
        Ok(())
    }

    /// `problem` with `λ = β` set to the configured strength.
    pub fn perturbed(&self, problem: &Problem) -> Result<Problem> {
        problem.with_pert(problem.pert.with_strength(self.strength, self.strength))
    }

    /// Calibrates `R` if needed and builds `φ₀` on the grid of `problem`,
    /// which must already carry the perturbation strength.
    pub fn setup(&self, problem: &Problem, cfg: &FlowConfig) -> Result<SimplexSetup> {
        self.validate()?;
        let (calibration, r_scale) = match self.r_scale {
            Some(r) => (None, r),
            None => {
                let cal = calibrate_R(
                    &self.bumps,
                    self.resolution,
                    problem,
                    cfg.eps_cone,
                    self.r_start,
                    self.r_cap,
                )?;
                let r = cal.r_scale;
                (Some(cal), r)
            }
        };
        let simplex = build_phi0(&self.bumps, r_scale, self.resolution, &problem.grid)?;
        Ok(SimplexSetup {
            calibration,
            r_scale,
            simplex,
        })
    }

    /// Minimax at the configured strength, followed by adaptation.
    pub fn run_minimax(&self, problem: &Problem, cfg: &FlowConfig) -> Result<NodalRun> {
        let problem = self.perturbed(problem)?;
        let setup = self.setup(&problem, cfg)?;
        let outcome = minimax_nodal(&problem, cfg, &setup.simplex, &self.minimax)?;
        let (problem, point, _) = adapt_point(
            &problem,
            outcome.point.clone(),
            2,
            cfg,
            self.schedule.follow_scale,
        )?;
        Ok(NodalRun {
            setup,
            outcome,
            point,
            problem,
        })
    }

    /// Minimax at the configured strength and continuation to `λ = β = 0`.
    pub fn run_continuation(&self, problem: &Problem, cfg: &FlowConfig) -> Result<ContinuationRun> {
        let problem = self.perturbed(problem)?;
        let setup = self.setup(&problem, cfg)?;
        let outcome =
            continuation_to_zero(&problem, &self.schedule, cfg, &setup.simplex, &self.minimax)?;
        Ok(ContinuationRun { setup, outcome })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimax::relative_pohozaev;
    use crate::model::{ModelParams, PerturbationParams};
    use crate::radial::build_grid;
    use crate::study::{dilation_factor, dilation_oracle, shoot_schrodinger, ShootingOptions};

    #[test]
    fn ground_pipeline_matches_the_dilated_shooting_solution() {
        let model = ModelParams::power(1.0, 0.05, 1.0, 4.0).unwrap();
        let local = model.with_b(0.0).unwrap();
        let w = shoot_schrodinger(
            &local,
            0,
            &build_grid(30.0, 3000).unwrap(),
            &ShootingOptions::default(),
        )
        .unwrap();
        let s = dilation_factor(model.a, model.b, w.integrals.grad);
        let grid = build_grid(30.0 * s, 3000).unwrap();
        let exact = dilation_oracle(&w, &model, &grid).unwrap();
        let off = PerturbationParams::off(0.05, 5.0, &model).unwrap();
        let problem = Problem::new(model, off, grid).unwrap();
        let run = GroundPipeline::default()
            .dilated(s)
            .run(&problem, &FlowConfig::default())
            .unwrap();
        let rel = (run.point.level - exact.energy).abs() / exact.energy;
        assert!(rel < 1e-3, "{} vs {}", run.point.level, exact.energy);
        assert!(run.point.u.iter().all(|v| *v >= -1e-12));
        assert!(relative_pohozaev(&run.problem, &run.point.u).unwrap() < 1e-3);
    }

    #[test]
    fn dilation_stretches_every_interval() {
        let g = GroundPipeline::default().dilated(2.5);
        assert_eq!(g.bump.intervals, vec![[-10.0, 10.0]]);
        assert!(g.bump.validate().is_ok());
    }

    #[test]
    fn nodal_validation() {
        assert!(NodalPipeline::default().validate().is_ok());
        let mut n = NodalPipeline::default();
        n.strength = 0.0;
        assert!(n.validate().is_err());
        let mut n = NodalPipeline::default();
        n.r_scale = Some(0.5);
        assert!(n.validate().is_err());
        let mut n = NodalPipeline::default();
        n.resolution = 1;
        assert!(n.validate().is_err());
    }
}
