//! Minimax constructions for the perturbed functional `I_{λ,β}`.
//!
//! * [`build_phi0`] samples the two-bump simplex
//!   `φ₀(t₁, t₂) = R²[t₁v₁(R·) + t₂v₂(R·)]` and [`calibrate_R`] doubles `R`
//!   until its outer edge lies below zero energy.
//! * [`minimax_nodal`] deforms the simplex by synchronized flow steps with
//!   the outer edge pinned, tracks the highest node outside
//!   `W = P_ε^+ ∪ P_ε^−`, and refines it to a critical point with the lobe
//!   peak iteration of [`peak`] and Newton's method.
//! * [`mountain_pass_positive`] is the one-dimensional analogue inside the
//!   positive cone.
//! * [`continuation_to_zero`] follows the nodal solution while `λ = β`
//!   decays geometrically to zero.
//! * [`multi_bump_search`] starts the same machinery from random
//!   combinations of `n` nested alternating bumps.

pub mod peak;
mod pipeline;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::newton::{newton_polish, NewtonOptions, NewtonOutcome};
use crate::flow::{cone_distance, descend, fixed_point_gap, flow_step, outside_cones, FlowConfig};
use crate::model::{EnergyReport, PerturbationParams, Problem, Sign};
use crate::radial::{count_sign_changes, quartic_bump, Field, GridSpec, RadialGrid};

use peak::{lmm_refine, peak_of};
pub use pipeline::{
    ContinuationRun, GroundPipeline, GroundRun, NodalPipeline, NodalRun, SimplexSetup,
};

/// Relative threshold below which nodal values do not count as a sign.
const SIGN_THRESHOLD: f64 = 1e-9;
/// Minimum number of grid cells across a scaled bump support.
const MIN_CELLS_PER_BUMP: f64 = 8.0;

fn one() -> f64 {
    1.0
}

/// Disjoint radial shells carrying signed quartic bumps. An interval
/// `[-w, w]` is the ball of radius `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    #[serde(alias = "centers")]
    pub intervals: Vec<[f64; 2]>,
    pub signs: Vec<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl BumpSpec {
    pub fn new(intervals: Vec<[f64; 2]>, signs: Vec<f64>) -> Result<Self> {
        let spec = BumpSpec {
            intervals,
            signs,
            amplitude: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `n` bumps of width `0.8·width` on consecutive cells of length
    /// `width`, alternating in sign and starting positive.
    pub fn alternating(n: usize, start: f64, width: f64) -> Result<Self> {
        let intervals = (0..n)
            .map(|k| {
                let l = start + k as f64 * width;
                [l + 0.1 * width, l + 0.9 * width]
            })
            .collect();
        let signs = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        Self::new(intervals, signs)
    }

    /// A ball of radius `core` followed by `n − 1` shells whose outer edges
    /// grow geometrically up to `reach`, alternating in sign and starting
    /// positive. Each shell starts 30% beyond the previous outer edge.
    pub fn nested(n: usize, core: f64, reach: f64) -> Result<Self> {
        if n == 0 || !(core > 0.0 && reach > 1.3 * core && reach.is_finite()) {
            return Err(Error::config(format!(
                "nested bumps need n >= 1 and 0 < 1.3·core < reach, got n={n}, core={core}, reach={reach}"
            )));
        }
        let mut intervals = vec![[-core, core]];
        let ratio = (reach / core).powf(1.0 / (n.max(2) - 1) as f64);
        let mut edge = core;
        for _ in 1..n {
            let next = edge * ratio;
            intervals.push([1.3 * edge, next]);
            edge = next;
        }
        let signs = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        Self::new(intervals, signs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals.is_empty() || self.intervals.len() != self.signs.len() {
            return Err(Error::config(
                "bumps need one sign per interval and at least one interval",
            ));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::config("bump amplitude must be positive"));
        }
        for (k, iv) in self.intervals.iter().enumerate() {
            if !(iv[1] > iv[0] && iv[0] + iv[1] >= 0.0 && iv[1].is_finite()) {
                return Err(Error::config(format!(
                    "bump interval {k} = [{}, {}] must satisfy l < r and l + r >= 0",
                    iv[0], iv[1]
                )));
            }
            if self.signs[k] != 1.0 && self.signs[k] != -1.0 {
                return Err(Error::config(format!("bump sign {k} must be +1 or -1")));
            }
        }
        let mut sorted = self.intervals.clone();
        sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
        if sorted.windows(2).any(|w| w[1][0] < w[0][1]) {
            return Err(Error::config("bump intervals must be pairwise disjoint"));
        }
        Ok(())
    }

    /// `R² v_k(Rρ)` sampled on `grid`.
    pub fn scaled_bump(&self, k: usize, r_scale: f64, grid: &RadialGrid) -> Result<Field> {
        let [l, r] = self.intervals[k];
        let (ls, rs) = (l / r_scale, r / r_scale);
        if rs >= grid.r_max() {
            return Err(Error::config(format!(
                "scaled bump support [{ls}, {rs}] escapes the grid (r_max = {})",
                grid.r_max()
            )));
        }
        if rs - ls.max(0.0) < MIN_CELLS_PER_BUMP * grid.h() {
            return Err(Error::config(format!(
                "scaled bump support [{ls}, {rs}] spans fewer than {MIN_CELLS_PER_BUMP} cells"
            )));
        }
        let c = r_scale * r_scale * self.amplitude * self.signs[k];
        Ok(Field::from_fn(grid, |rho| c * quartic_bump(rho * r_scale, l, r)))
    }
}

/// One node of the barycentric grid `(t₁, t₂) = (i/m, j/m)`.
#[derive(Debug, Clone)]
pub struct SimplexNode {
    pub i: usize,
    pub j: usize,
    pub u: Field,
    /// Left alone once its energy drops below zero; such nodes can no
    /// longer carry the minimax level.
    pub frozen: bool,
}

impl SimplexNode {
    /// On the outer edge `t₁ + t₂ = 1`, pinned during deformation.
    pub fn pinned(&self, m: usize) -> bool {
        self.i + self.j == m
    }
}

#[derive(Debug, Clone)]
pub struct SimplexState {
    pub resolution: usize,
    pub r_scale: f64,
    /// Lexicographic in `(i, j)`.
    pub nodes: Vec<SimplexNode>,
}

fn negative_positive(spec: &BumpSpec) -> Result<(usize, usize)> {
    if spec.intervals.len() != 2 {
        return Err(Error::config("the simplex needs exactly two bumps"));
    }
    match (spec.signs[0] < 0.0, spec.signs[1] < 0.0) {
        (true, false) => Ok((0, 1)),
        (false, true) => Ok((1, 0)),
        _ => Err(Error::config("the simplex needs one negative and one positive bump")),
    }
}

/// `φ₀(i/m, j/m) = R²[(i/m)v₁(R·) + (j/m)v₂(R·)]` with `v₁ ≤ 0 ≤ v₂`.
pub fn build_phi0(
    spec: &BumpSpec,
    r_scale: f64,
    resolution: usize,
    grid: &RadialGrid,
) -> Result<SimplexState> {
    spec.validate()?;
    if resolution < 2 {
        return Err(Error::config("simplex resolution must be at least 2"));
    }
    if !(r_scale >= 1.0 && r_scale.is_finite()) {
        return Err(Error::config(format!("simplex R must be >= 1, got {r_scale}")));
    }
    let (neg, pos) = negative_positive(spec)?;
    let v1 = spec.scaled_bump(neg, r_scale, grid)?;
    let v2 = spec.scaled_bump(pos, r_scale, grid)?;
    let m = resolution as f64;
    let mut nodes = Vec::new();
    for i in 0..=resolution {
        for j in 0..=resolution - i {
            nodes.push(SimplexNode {
                i,
                j,
                u: v1.combine(i as f64 / m, &v2, j as f64 / m),
                frozen: false,
            });
        }
    }
    Ok(SimplexState {
        resolution,
        r_scale,
        nodes,
    })
}

impl SimplexState {
    pub fn node(&self, i: usize, j: usize) -> Option<&SimplexNode> {
        self.nodes.iter().find(|n| n.i == i && n.j == j)
    }

    pub fn outer_edge(&self) -> impl Iterator<Item = &SimplexNode> {
        let m = self.resolution;
        self.nodes.iter().filter(move |n| n.pinned(m))
    }

    /// `max I_{λ,β}` over all nodes.
    pub fn max_energy(&self, problem: &Problem) -> f64 {
        self.nodes
            .iter()
            .map(|n| problem.energy_perturbed(&n.u))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationStep {
    pub r_scale: f64,
    pub outer_edge_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub r_scale: f64,
    pub transcript: Vec<CalibrationStep>,
}

/// `max I_{λ,β}` over the outer edge `t₁ + t₂ = 1` of `φ₀` at scale `R`.
pub fn outer_edge_max(
    spec: &BumpSpec,
    r_scale: f64,
    resolution: usize,
    problem: &Problem,
) -> Result<f64> {
    let (neg, pos) = negative_positive(spec)?;
    let v1 = spec.scaled_bump(neg, r_scale, &problem.grid)?;
    let v2 = spec.scaled_bump(pos, r_scale, &problem.grid)?;
    let m = resolution as f64;
    Ok((0..=resolution)
        .map(|i| {
            let t = i as f64 / m;
            problem.energy_perturbed(&v1.combine(t, &v2, 1.0 - t))
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest `R = r_start·2^k ≤ r_cap` with negative energy on the whole
/// outer edge.
#[allow(non_snake_case)]
pub fn calibrate_R(
    spec: &BumpSpec,
    resolution: usize,
    problem: &Problem,
    eps_cone: f64,
    r_start: f64,
    r_cap: f64,
) -> Result<Calibration> {
    let mut transcript = Vec::new();
    let mut r = r_start.max(1.0);
    let threshold = eps_cone * eps_cone / 4.0;
    while r <= r_cap {
        let max = match outer_edge_max(spec, r, resolution, problem) {
            Ok(v) => v,
            Err(Error::Config(detail)) => {
                return Err(Error::Infeasible(format!(
                    "no admissible R up to {r}: {detail}; transcript {}",
                    render_transcript(&transcript)
                )))
            }
            Err(e) => return Err(e),
        };
        transcript.push(CalibrationStep {
            r_scale: r,
            outer_edge_max: max,
        });
        if max < 0.0 && max < threshold {
            return Ok(Calibration {
                r_scale: r,
                transcript,
            });
        }
        r *= 2.0;
    }
    Err(Error::Infeasible(format!(
        "outer edge energy stays nonnegative up to R = {r_cap}; transcript {}",
        render_transcript(&transcript)
    )))
}

fn render_transcript(steps: &[CalibrationStep]) -> String {
    let parts: Vec<String> = steps
        .iter()
        .map(|s| format!("R={}: {:.6e}", s.r_scale, s.outer_edge_max))
        .collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Ground,
    Nodal,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    #[serde(skip)]
    pub u: Field,
    /// `I_{λ,β}(u)` at the parameters it was computed for.
    pub level: f64,
    pub report: EnergyReport,
    pub kind: CriticalKind,
    pub lambda: f64,
    pub beta: f64,
    pub fixed_point_gap: f64,
    pub grid: GridSpec,
    pub provenance: Vec<String>,
}

impl CriticalPoint {
    fn new(
        problem: &Problem,
        u: Field,
        kind: CriticalKind,
        gap: f64,
        provenance: Vec<String>,
    ) -> Self {
        let report = problem.energy_report(&u, SIGN_THRESHOLD * u.max_abs());
        CriticalPoint {
            level: report.energy_pert,
            report,
            kind,
            lambda: problem.pert.lambda,
            beta: problem.pert.beta,
            fixed_point_gap: gap,
            grid: problem.grid.spec(),
            provenance,
            u,
        }
    }

    pub fn min_cone_distance(&self) -> f64 {
        self.report.cone_dist_plus.min(self.report.cone_dist_minus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimaxOptions {
    /// Cap on deformation sweeps.
    pub max_sweeps: usize,
    /// Cap on peak-selection iterations during refinement.
    pub refine_iter: usize,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        MinimaxOptions {
            max_sweeps: 60,
            refine_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimaxOutcome {
    pub point: CriticalPoint,
    pub sweeps: usize,
    /// Highest `I_{λ,β}` outside `W` after each sweep (entry 0: initial).
    pub sweep_max: Vec<f64>,
    /// `max I_{λ,β}` over the initial simplex.
    pub initial_max: f64,
    /// `C_R = max I_{1,0}` over the initial simplex.
    pub c_r: f64,
    pub tracked_node: (usize, usize),
    pub monotone: bool,
    pub lmm_iterations: usize,
    pub newton_iterations: usize,
}

fn tracked_max(problem: &Problem, state: &SimplexState, eps: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, node) in state.nodes.iter().enumerate() {
        if !outside_cones(problem, &node.u, eps) {
            continue;
        }
        let e = problem.energy_perturbed(&node.u);
        // strict comparison keeps the lexicographically first maximizer
        if best.is_none_or(|(_, b)| e > b) {
            best = Some((k, e));
        }
    }
    best
}

/// Simplex deformation followed by refinement of the tracked node.
pub fn minimax_nodal(
    problem: &Problem,
    cfg: &FlowConfig,
    simplex: &SimplexState,
    opts: &MinimaxOptions,
) -> Result<MinimaxOutcome> {
    cfg.validate()?;
    let eps = cfg.eps_cone;
    let m = simplex.resolution;
    let mut state = simplex.clone();
    let initial_max = state.max_energy(problem);
    let bound_problem = problem.with_pert(problem.pert.with_strength(1.0, 0.0))?;
    let c_r = state.max_energy(&bound_problem);

    let (mut k_best, mut e_best) = tracked_max(problem, &state, eps).ok_or_else(|| {
        Error::Degenerate("every simplex node lies in P_eps^+ or P_eps^-".into())
    })?;
    let mut sweep_max = vec![e_best];
    let mut monotone = true;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        let tracked = &state.nodes[k_best].u;
        if fixed_point_gap(problem, tracked)?.1 <= cfg.gap_threshold(problem, tracked) {
            break;
        }
        for node in state.nodes.iter_mut() {
            if node.pinned(m) || node.frozen {
                continue;
            }
            match flow_step(problem, &node.u, cfg) {
                Ok(step) => {
                    node.u = step.u;
                    if step.energy_after < 0.0 {
                        node.frozen = true;
                    }
                }
                Err(Error::StepFailure { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        sweeps += 1;
        let (k, e) = tracked_max(problem, &state, eps).ok_or_else(|| {
            Error::Degenerate(format!(
                "every simplex node entered P_eps^+ or P_eps^- after {sweeps} sweeps; \
                 try a finer simplex or different bumps"
            ))
        })?;
        if e > e_best * (1.0 + 1e-12) + 1e-14 {
            monotone = false;
        }
        let stagnant = (e_best - e).abs() <= 1e-9 * e.abs().max(1.0);
        k_best = k;
        e_best = e;
        sweep_max.push(e);
        if stagnant {
            break;
        }
    }

    let start = &state.nodes[k_best];
    let refined = lmm_refine(problem, &start.u, 2, cfg, opts.refine_iter)?;
    if !refined.converged {
        return Err(Error::Collapse(format!(
            "refinement of node ({}, {}) stopped at gap {:.3e}",
            start.i, start.j, refined.gap
        )));
    }
    let point = CriticalPoint::new(
        problem,
        refined.u,
        CriticalKind::Nodal,
        refined.gap,
        vec![
            format!("simplex m={m} R={}", simplex.r_scale),
            format!("sweeps={sweeps} tracked=({},{})", start.i, start.j),
            format!(
                "lmm={} newton={}",
                refined.lmm_iterations, refined.newton_iterations
            ),
        ],
    );
    if point.min_cone_distance() < eps {
        return Err(Error::Degenerate(format!(
            "refined critical point lies in W (cone distance {:.3e} < eps = {eps})",
            point.min_cone_distance()
        )));
    }
    Ok(MinimaxOutcome {
        point,
        sweeps,
        sweep_max,
        initial_max,
        c_r,
        tracked_node: (start.i, start.j),
        monotone,
        lmm_iterations: refined.lmm_iterations,
        newton_iterations: refined.newton_iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MountainPassOptions {
    pub resolution: usize,
    pub r_scale: f64,
    pub max_sweeps: usize,
    pub refine_iter: usize,
}

impl Default for MountainPassOptions {
    fn default() -> Self {
        MountainPassOptions {
            resolution: 16,
            r_scale: 1.0,
            max_sweeps: 40,
            refine_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MountainPassOutcome {
    pub point: CriticalPoint,
    /// Amplitude factor of the path end point `e` with `I(e) < 0`.
    pub endpoint_factor: f64,
    pub path_max_initial: f64,
    pub sweeps: usize,
    /// Smallest nodal value on `[0, r_max)`.
    pub min_interior: f64,
}

/// Positive ground state from the segment `t ↦ t·e`, `e = τR²v(R·)`.
pub fn mountain_pass_positive(
    problem: &Problem,
    cfg: &FlowConfig,
    bump: &BumpSpec,
    opts: &MountainPassOptions,
) -> Result<MountainPassOutcome> {
    cfg.validate()?;
    bump.validate()?;
    if bump.intervals.len() != 1 || bump.signs[0] != 1.0 {
        return Err(Error::config("the mountain pass needs a single positive bump"));
    }
    if opts.resolution < 2 {
        return Err(Error::config("mountain-pass resolution must be at least 2"));
    }
    let v = bump.scaled_bump(0, opts.r_scale, &problem.grid)?;
    let mut factor = 1.0;
    while problem.energy_perturbed(&v.scaled(factor)) >= 0.0 {
        factor *= 2.0;
        if factor > 1e9 {
            return Err(Error::Infeasible(
                "no negative-energy end point along the bump ray".into(),
            ));
        }
    }
    let e = v.scaled(factor);
    let m = opts.resolution;
    let mut path: Vec<Field> = (0..=m).map(|k| e.scaled(k as f64 / m as f64)).collect();
    let energy_of = |u: &Field| problem.energy_perturbed(u);
    let argmax = |path: &[Field]| {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, u) in path.iter().enumerate() {
            let en = energy_of(u);
            if en > best.1 {
                best = (k, en);
            }
        }
        best
    };
    let (k_best, mut e_best) = argmax(&path);
    let path_max_initial = e_best;
    let mut seed = path[k_best].clone();
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        if fixed_point_gap(problem, &seed)?.1 <= cfg.gap_threshold(problem, &seed) {
            break;
        }
        for u in path.iter_mut().take(m).skip(1) {
            if energy_of(u) < 0.0 {
                continue;
            }
            match flow_step(problem, u, cfg) {
                Ok(step) => {
                    // projection onto the positive cone
                    *u = Field::from_raw(step.u.iter().map(|x| x.max(0.0)).collect());
                }
                Err(Error::StepFailure { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        sweeps += 1;
        let (k, en) = argmax(&path);
        if peak::peak_of(problem, &path[k]).is_none() {
            // The discrete path has slid below the Nehari set; keep the last
            // maximizer whose ray still crosses it.
            break;
        }
        let stagnant = (e_best - en).abs() <= 1e-9 * en.abs().max(1.0);
        seed = path[k].clone();
        e_best = en;
        if stagnant {
            break;
        }
    }
    let start = &seed;
    if start.is_zero() {
        return Err(Error::Collapse(
            "the path maximum sits at the origin; increase R".into(),
        ));
    }
    let refined = lmm_refine(problem, start, 1, cfg, opts.refine_iter)?;
    let scale = problem.e_norm(&e);
    if problem.e_norm(&refined.u) < 1e-8 * scale {
        return Err(Error::Collapse(
            "refinement collapsed to zero; increase R".into(),
        ));
    }
    if !refined.converged {
        return Err(Error::Collapse(format!(
            "ground-state refinement stopped at gap {:.3e}",
            refined.gap
        )));
    }
    let u = refined.u;
    let n = problem.grid.n();
    let min_interior = u[..n].iter().copied().fold(f64::INFINITY, f64::min);
    let point = CriticalPoint::new(
        problem,
        u,
        CriticalKind::Ground,
        refined.gap,
        vec![
            format!("segment m={m} R={} factor={factor}", opts.r_scale),
            format!(
                "sweeps={sweeps} lmm={} newton={}",
                refined.lmm_iterations, refined.newton_iterations
            ),
        ],
    );
    Ok(MountainPassOutcome {
        point,
        endpoint_factor: factor,
        path_max_initial,
        sweeps,
        min_interior,
    })
}

fn yes() -> bool {
    true
}

/// Geometric decay of `λ = β` down to `floor`, followed by `λ = β = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub decay: f64,
    pub floor: f64,
    /// Rescale the grid with the solution's length scale along the path.
    #[serde(default = "yes")]
    pub follow_scale: bool,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            decay: 0.5,
            floor: 1e-4,
            follow_scale: true,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::config(format!(
                "schedule.decay = {} must lie in (0, 1)",
                self.decay
            )));
        }
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return Err(Error::config(format!(
                "schedule.floor = {} must lie in (0, 1)",
                self.floor
            )));
        }
        Ok(())
    }
}

/// `(∫u² / ∫|∇u|²)^{1/2}`: scales like `σ` under `u ↦ u(·/σ)` and is blind
/// to the amplitude.
pub fn length_scale(problem: &Problem, u: &[f64]) -> f64 {
    let g = &problem.grid;
    (g.mass_integral_by(u, |_, x| x * x) / g.dirichlet_form(u)).sqrt()
}

/// Mesh widths along a continuation path are `h₀·REGRID_RATIO^j`, so the
/// final grid depends only on the final length scale and not on the path.
const REGRID_RATIO: f64 = 1.25;

fn grid_level(scale: f64, scale0: f64) -> i32 {
    ((scale / scale0).ln() / REGRID_RATIO.ln()).round() as i32
}
/// Tail decay lengths that a computational ball must contain.
const DOMAIN_DECAY_LENGTHS: f64 = 15.0;
/// Upper limit on domain doublings.
const MAX_DOMAIN_DOUBLINGS: u32 = 5;

/// Decay length `sqrt(coeff / (V_min + shift))` of the linearised tail of `u`.
pub fn decay_length(problem: &Problem, u: &Field) -> f64 {
    let coeff = problem.model.a + problem.model.b * problem.grid.dirichlet_form(u);
    let v_min = problem
        .potential()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let rate = (v_min + problem.lambda_shift(u)).max(f64::MIN_POSITIVE);
    (coeff / rate).sqrt()
}

/// Smallest `k` such that `n·2^k` cells of width `h` hold the tail of `u`.
fn domain_level(problem: &Problem, u: &Field, h: f64, n: usize) -> u32 {
    let need = DOMAIN_DECAY_LENGTHS * decay_length(problem, u);
    let mut k = 0;
    while k < MAX_DOMAIN_DOUBLINGS && (n << k) as f64 * h < need {
        k += 1;
    }
    k
}

/// Moves a converged solution onto a ball holding its tail, keeping the mesh
/// width, and re-polishes it there. Returns `None` when the ball already
/// suffices.
pub fn extend_domain(
    problem: &Problem,
    u: &Field,
    lobes: usize,
    cfg: &FlowConfig,
) -> Result<Option<(Problem, NewtonOutcome)>> {
    let n = problem.grid.n();
    let h = problem.grid.h();
    let k = domain_level(problem, u, h, n);
    if k == 0 {
        return Ok(None);
    }
    let cells = n << k;
    let p = problem.with_grid(crate::radial::build_grid(h * cells as f64, cells)?)?;
    let moved = u.resample(&problem.grid, &p.grid);
    let newton = NewtonOptions {
        tol: 1e-2 * cfg.tol,
        max_iter: 60,
    };
    let out = newton_polish(&p, &moved, &newton)?;
    if !step_ok(&p, &out.u, out.gap, lobes, cfg) {
        return Err(Error::Collapse(format!(
            "Newton failed after extending the ball to r_max = {:e} (gap {:.3e})",
            p.grid.r_max(),
            out.gap
        )));
    }
    Ok(Some((p, out)))
}

/// Relative Pohozaev residual that mesh refinement aims for.
const POHOZAEV_TARGET: f64 = 2.5e-4;
/// Upper limit on mesh halvings during refinement.
const MAX_REFINEMENTS: u32 = 4;

/// `|P(u)| / (1 + |I_{λ,β}(u)|)`, or `None` when the potential carries no
/// derivative data.
pub fn relative_pohozaev(problem: &Problem, u: &Field) -> Option<f64> {
    let res = problem.pohozaev_residual(u).ok()?;
    Some(res.abs() / (1.0 + problem.energy_perturbed(u).abs()))
}

/// Halves the mesh width on a fixed ball, re-polishing each time, until the
/// relative Pohozaev residual of `u` drops below its target. Returns `None`
/// when `u` already meets it.
pub fn refine_resolution(
    problem: &Problem,
    u: &Field,
    lobes: usize,
    cfg: &FlowConfig,
) -> Result<Option<(Problem, NewtonOutcome)>> {
    let newton = NewtonOptions {
        tol: 1e-2 * cfg.tol,
        max_iter: 60,
    };
    let mut current: Option<(Problem, NewtonOutcome)> = None;
    for _ in 0..MAX_REFINEMENTS {
        let (p_now, u_now) = match &current {
            Some((p, out)) => (p, &out.u),
            None => (problem, u),
        };
        match relative_pohozaev(p_now, u_now) {
            Some(rel) if rel > POHOZAEV_TARGET => {}
            _ => break,
        }
        let cells = 2 * p_now.grid.n();
        let p = p_now.with_grid(crate::radial::build_grid(p_now.grid.r_max(), cells)?)?;
        let moved = u_now.resample(&p_now.grid, &p.grid);
        let out = newton_polish(&p, &moved, &newton)?;
        if !step_ok(&p, &out.u, out.gap, lobes, cfg) {
            return Err(Error::Collapse(format!(
                "Newton failed after refining to h = {:e} (gap {:.3e})",
                p.grid.h(),
                out.gap
            )));
        }
        current = Some((p, out));
    }
    Ok(current)
}

/// Extends the ball (when `extend` is set) and refines the mesh around a
/// converged critical point. Returns the final problem, the re-polished
/// point and the Newton iterations spent.
pub fn adapt_point(
    problem: &Problem,
    point: CriticalPoint,
    lobes: usize,
    cfg: &FlowConfig,
    extend: bool,
) -> Result<(Problem, CriticalPoint, usize)> {
    let mut current = problem.clone();
    let mut point = point;
    let mut iterations = 0;
    if extend {
        if let Some((p, out)) = extend_domain(&current, &point.u, lobes, cfg)? {
            let mut provenance = point.provenance.clone();
            provenance.push(format!("ball extended to r_max={}", p.grid.r_max()));
            point = CriticalPoint::new(&p, out.u, point.kind, out.gap, provenance);
            iterations += out.iterations;
            current = p;
        }
    }
    if let Some((p, out)) = refine_resolution(&current, &point.u, lobes, cfg)? {
        let mut provenance = point.provenance.clone();
        provenance.push(format!("mesh refined to h={}", p.grid.h()));
        point = CriticalPoint::new(&p, out.u, point.kind, out.gap, provenance);
        iterations += out.iterations;
        current = p;
    }
    Ok((current, point, iterations))
}

/// Step subdivisions before a continuation step is declared failed.
const MAX_HALVINGS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationStep {
    /// `λ = β` after the step.
    pub param: f64,
    pub level: f64,
    /// `‖u_k − u_{k+1}‖_E`, with `u_k` resampled onto the grid of `u_{k+1}`.
    pub distance: f64,
    pub gap: f64,
    pub newton_iterations: usize,
    pub r_max: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuationPath {
    /// The problem at `λ = β = 0` on the final grid.
    pub problem: Problem,
    pub u: Field,
    pub trace: Vec<ContinuationStep>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationOutcome {
    pub initial: MinimaxOutcome,
    pub point: CriticalPoint,
    pub trace: Vec<ContinuationStep>,
}

fn step_ok(problem: &Problem, u: &Field, gap: f64, lobes: usize, cfg: &FlowConfig) -> bool {
    gap <= cfg.gap_threshold(problem, u)
        && count_sign_changes(u, SIGN_THRESHOLD * u.max_abs()) + 1 == lobes
        && (lobes < 2 || outside_cones(problem, u, cfg.eps_cone))
}

/// Follows a critical point with `lobes` lobes from `problem`'s
/// `λ = β` down to zero, each step warm-started with Newton. Steps that
/// fail are split in half, up to [`MAX_HALVINGS`] times. With
/// `follow_scale` the mesh width tracks [`length_scale`] at fixed `n`.
pub fn continue_to_zero(
    problem: &Problem,
    start: &Field,
    lobes: usize,
    schedule: &Schedule,
    cfg: &FlowConfig,
    level_bound: f64,
) -> Result<ContinuationPath> {
    schedule.validate()?;
    let PerturbationParams { lambda, beta, .. } = problem.pert;
    if lambda != beta {
        return Err(Error::config(format!(
            "continuation ties lambda = beta, got lambda = {lambda}, beta = {beta}"
        )));
    }
    let newton = NewtonOptions {
        tol: 1e-2 * cfg.tol,
        max_iter: 60,
    };
    let n = problem.grid.n();
    let h0 = problem.grid.h();
    let scale0 = length_scale(problem, start);
    let mut level_now = (0, 0);
    let mut base = problem.clone();
    let mut u = start.clone();
    let mut param = lambda;
    let mut trace = Vec::new();
    while param > 0.0 {
        let mut target = if param * schedule.decay < schedule.floor {
            0.0
        } else {
            param * schedule.decay
        };
        let mut attempt = 0;
        let (mut next, mut step_problem, mut gap, mut iters) = loop {
            let p = base.with_pert(base.pert.with_strength(target, target))?;
            let out = newton_polish(&p, &u, &newton)?;
            if step_ok(&p, &out.u, out.gap, lobes, cfg) {
                break (out.u, p, out.gap, out.iterations);
            }
            attempt += 1;
            if attempt > MAX_HALVINGS {
                return Err(Error::Continuation {
                    param: target,
                    detail: format!(
                        "Newton stalled at gap {:.3e}; last good lambda = beta = {param:e}",
                        out.gap
                    ),
                });
            }
            target = 0.5 * (target + param);
        };
        let mut prev = u.clone();
        let j = grid_level(length_scale(&step_problem, &next), scale0);
        let k = domain_level(&step_problem, &next, h0 * REGRID_RATIO.powi(j), n);
        if schedule.follow_scale && (j, k) != level_now {
            let h = h0 * REGRID_RATIO.powi(j);
            let cells = n << k;
            let grid = crate::radial::build_grid(h * cells as f64, cells)?;
            let p = step_problem.with_grid(grid)?;
            let moved = next.resample(&step_problem.grid, &p.grid);
            let out = newton_polish(&p, &moved, &newton)?;
            if !step_ok(&p, &out.u, out.gap, lobes, cfg) {
                return Err(Error::Continuation {
                    param: target,
                    detail: format!(
                        "Newton failed after regridding to r_max = {:e} (gap {:.3e})",
                        p.grid.r_max(),
                        out.gap
                    ),
                });
            }
            prev = prev.resample(&step_problem.grid, &p.grid);
            next = out.u;
            gap = out.gap;
            iters += out.iterations;
            base = base.with_grid(p.grid.clone())?;
            step_problem = p;
            level_now = (j, k);
        }
        let level = step_problem.energy_perturbed(&next);
        if level > level_bound + cfg.tol * (1.0 + level_bound.abs()) {
            return Err(Error::Continuation {
                param: target,
                detail: format!(
                    "level {level:.6e} exceeds the bound {level_bound:.6e}; \
                     last good lambda = beta = {param:e}"
                ),
            });
        }
        let diff = next.combine(1.0, &prev, -1.0);
        trace.push(ContinuationStep {
            param: target,
            level,
            distance: step_problem.e_norm(&diff),
            gap,
            newton_iterations: iters,
            r_max: step_problem.grid.r_max(),
        });
        u = next;
        param = target;
    }
    Ok(ContinuationPath {
        problem: base.unperturbed(),
        u,
        trace,
    })
}

/// Nodal minimax at `problem`'s `λ = β`, then continuation to `λ = β = 0`
/// and a final flow check under `I`.
pub fn continuation_to_zero(
    problem: &Problem,
    schedule: &Schedule,
    cfg: &FlowConfig,
    simplex: &SimplexState,
    opts: &MinimaxOptions,
) -> Result<ContinuationOutcome> {
    let mut initial = minimax_nodal(problem, cfg, simplex, opts)?;
    let (start, adapted, iterations) =
        adapt_point(problem, initial.point, 2, cfg, schedule.follow_scale)?;
    initial.point = adapted;
    initial.newton_iterations += iterations;
    let path = continue_to_zero(&start, &initial.point.u, 2, schedule, cfg, initial.c_r)?;
    let limit = &path.problem;
    let check = descend(limit, &path.u, cfg)?;
    if !check.converged {
        return Err(Error::Continuation {
            param: 0.0,
            detail: format!(
                "final flow check did not converge (gap {:.3e})",
                check.fixed_point_gap
            ),
        });
    }
    let mut provenance = initial.point.provenance.clone();
    provenance.push(format!(
        "continuation decay={} floor={} steps={} r_max={}",
        schedule.decay,
        schedule.floor,
        path.trace.len(),
        limit.grid.r_max()
    ));
    let point = CriticalPoint::new(
        limit,
        check.u,
        CriticalKind::Nodal,
        check.fixed_point_gap,
        provenance,
    );
    if point.min_cone_distance() < cfg.eps_cone {
        return Err(Error::Continuation {
            param: 0.0,
            detail: "limit candidate entered W".into(),
        });
    }
    Ok(ContinuationOutcome {
        initial,
        point,
        trace: path.trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiBumpOptions {
    pub trials: usize,
    pub r_scale: f64,
    /// Radius of the central ball bump.
    pub core: f64,
    /// Outer edge of the last shell bump.
    pub reach: f64,
    /// Peak height of each bump before scaling.
    pub amplitude: f64,
    /// Continue every solution to `λ = β = 0` when set.
    pub schedule: Option<Schedule>,
    pub refine_iter: usize,
}

impl Default for MultiBumpOptions {
    fn default() -> Self {
        MultiBumpOptions {
            trials: 8,
            r_scale: 1.0,
            core: 0.3,
            reach: 10.0,
            amplitude: 10.0,
            schedule: None,
            refine_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiBumpAttempt {
    pub trial: usize,
    pub active_bumps: Vec<usize>,
    pub lobes: usize,
    pub outcome: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiBumpOutcome {
    /// Distinct nodal solutions sorted by level.
    pub solutions: Vec<CriticalPoint>,
    pub attempts: Vec<MultiBumpAttempt>,
}

/// Two solutions are identified when their relative E-distance is below
/// [`DEDUP_DISTANCE`] and their levels agree to `DEDUP_LEVEL·(1 + |level|)`.
pub const DEDUP_DISTANCE: f64 = 1e-2;
pub const DEDUP_LEVEL: f64 = 1e-4;

fn is_duplicate(problem: &Problem, a: &CriticalPoint, b: &CriticalPoint) -> bool {
    let diff = a.u.combine(1.0, &b.u, -1.0);
    let scale = problem.e_norm(&a.u).max(problem.e_norm(&b.u));
    let rel = problem.e_norm(&diff) / scale;
    let close_levels = (a.level - b.level).abs() < DEDUP_LEVEL * (1.0 + a.level.abs());
    rel < DEDUP_DISTANCE && close_levels
}

/// Heuristic search for nodal solutions from random combinations of `n`
/// nested alternating bumps.
pub fn multi_bump_search(
    n: usize,
    problem: &Problem,
    cfg: &FlowConfig,
    seed: u64,
    opts: &MultiBumpOptions,
) -> Result<MultiBumpOutcome> {
    if n < 2 {
        return Err(Error::config("multi-bump search needs n >= 2"));
    }
    cfg.validate()?;
    let mut base = BumpSpec::nested(n, opts.core, opts.reach)?;
    base.amplitude = opts.amplitude;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<CriticalPoint> = Vec::new();
    let mut attempts = Vec::new();
    for trial in 0..opts.trials {
        let mut active: Vec<usize> = (0..n).collect();
        let mut spec = base.clone();
        if trial > 0 {
            active.retain(|_| rng.gen_bool(0.75));
            if active.len() < 2 {
                active = (0..n).collect();
            }
            let stretch = rng.gen_range(-0.2f64..0.2).exp();
            for iv in spec.intervals.iter_mut() {
                iv[0] *= stretch;
                iv[1] *= stretch;
            }
        }
        let mut u = Field::zeros(&problem.grid);
        for &k in &active {
            let c = if trial == 0 { 1.0 } else { rng.gen_range(0.3..1.0) };
            let bump = spec.scaled_bump(k, opts.r_scale, &problem.grid)?;
            u = u.combine(1.0, &bump, c);
        }
        let lobes = peak_of(problem, &u).map_or(0, |(_, l)| l);
        let mut record = MultiBumpAttempt {
            trial,
            active_bumps: active.clone(),
            lobes,
            outcome: String::new(),
        };
        if lobes < 2 {
            record.outcome = "skipped: fewer than two lobes".into();
            attempts.push(record);
            continue;
        }
        let refined = match lmm_refine(problem, &u, lobes, cfg, opts.refine_iter) {
            Ok(r) if r.converged => r,
            Ok(r) => {
                record.outcome = format!("refinement stopped at gap {:.3e}", r.gap);
                attempts.push(record);
                continue;
            }
            Err(e) => {
                record.outcome = format!("refinement failed: {e}");
                attempts.push(record);
                continue;
            }
        };
        let (final_u, gap, final_problem) = match opts.schedule {
            Some(schedule) => {
                match continue_to_zero(problem, &refined.u, lobes, &schedule, cfg, f64::INFINITY) {
                    Ok(path) => {
                        let gap = path.trace.last().map_or(refined.gap, |s| s.gap);
                        (path.u, gap, path.problem)
                    }
                    Err(e) => {
                        record.outcome = format!("continuation failed: {e}");
                        attempts.push(record);
                        continue;
                    }
                }
            }
            None => (refined.u, refined.gap, problem.clone()),
        };
        let point = CriticalPoint::new(
            &final_problem,
            final_u,
            CriticalKind::Nodal,
            gap,
            vec![format!("multi-bump n={n} trial={trial} active={active:?}")],
        );
        if point.min_cone_distance() < cfg.eps_cone
            || gap > cfg.gap_threshold(&final_problem, &point.u)
        {
            record.outcome = "rejected: inside W or not converged".into();
            attempts.push(record);
            continue;
        }
        if let Some(k) = found.iter().position(|p| is_duplicate(&final_problem, p, &point)) {
            record.outcome = format!("duplicate of solution with level {:.10e}", found[k].level);
        } else {
            record.outcome = format!("new solution with level {:.10e}", point.level);
            found.push(point);
        }
        attempts.push(record);
    }
    found.sort_by(|a, b| a.level.total_cmp(&b.level));
    Ok(MultiBumpOutcome {
        solutions: found,
        attempts,
    })
}

/// `min(‖u⁺‖_E, ‖u⁻‖_E)`
pub fn min_cone_distance(problem: &Problem, u: &[f64]) -> f64 {
    cone_distance(problem, u, Sign::Plus).min(cone_distance(problem, u, Sign::Minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::radial::{build_grid, grad_norm_sq, lp_norm_pow};

    fn spec() -> BumpSpec {
        let mut s = BumpSpec::new(vec![[4.0, 10.0], [0.5, 3.5]], vec![-1.0, 1.0]).unwrap();
        s.amplitude = 10.0;
        s
    }

    fn nodal_problem(beta: f64) -> Problem {
        let model = ModelParams::power(1.0, 0.05, 1.0, 3.0).unwrap();
        let pert = PerturbationParams::new(beta, beta, 0.05, 5.0, &model).unwrap();
        Problem::new(model, pert, build_grid(30.0, 3000).unwrap()).unwrap()
    }

    #[test]
    fn bump_spec_validation() {
        assert!(BumpSpec::new(vec![[1.0, 2.0], [1.5, 3.0]], vec![1.0, -1.0]).is_err());
        assert!(BumpSpec::new(vec![[0.0, 2.0]], vec![1.0]).is_ok());
        assert!(BumpSpec::new(vec![[-2.0, 2.0]], vec![1.0]).is_ok());
        assert!(BumpSpec::new(vec![[-3.0, 1.0]], vec![1.0]).is_err());
        assert!(BumpSpec::new(vec![[2.0, 2.0]], vec![1.0]).is_err());
        assert!(BumpSpec::new(vec![[1.0, 2.0]], vec![0.5]).is_err());
        let s = BumpSpec::alternating(3, 0.0, 1.5).unwrap();
        assert_eq!(s.signs, vec![1.0, -1.0, 1.0]);
        let nested = BumpSpec::nested(3, 0.3, 10.0).unwrap();
        assert_eq!(nested.intervals[0], [-0.3, 0.3]);
        assert!((nested.intervals[2][1] - 10.0).abs() < 1e-12);
        assert_eq!(nested.signs, vec![1.0, -1.0, 1.0]);
        assert!(BumpSpec::nested(2, 1.0, 1.2).is_err());
    }

    #[test]
    fn phi0_origin_node_is_zero_and_edges_are_one_signed() {
        let grid = build_grid(30.0, 3000).unwrap();
        let state = build_phi0(&spec(), 2.0, 6, &grid).unwrap();
        assert!(state.node(0, 0).unwrap().u.is_zero());
        assert!(state.node(3, 0).unwrap().u.iter().all(|v| *v <= 0.0));
        assert!(state.node(0, 4).unwrap().u.iter().all(|v| *v >= 0.0));
        assert_eq!(state.nodes.len(), 28);
        assert_eq!(state.outer_edge().count(), 7);
    }

    #[test]
    fn phi0_rejects_escaping_support() {
        let grid = build_grid(3.0, 300).unwrap();
        assert!(matches!(build_phi0(&spec(), 1.0, 4, &grid), Err(Error::Config(_))));
    }

    #[test]
    fn scaling_laws_under_doubling_of_r() {
        let grid = build_grid(30.0, 30000).unwrap();
        let a = build_phi0(&spec(), 1.0, 4, &grid).unwrap();
        let b = build_phi0(&spec(), 2.0, 4, &grid).unwrap();
        let ua = &a.node(1, 2).unwrap().u;
        let ub = &b.node(1, 2).unwrap().u;
        let ratio = grad_norm_sq(ub, &grid).unwrap() / grad_norm_sq(ua, &grid).unwrap();
        assert!((ratio / 8.0 - 1.0).abs() < 1e-3, "{ratio}");
        for q in [3.0, 4.0, 5.0] {
            let r = lp_norm_pow(ub, &grid, q).unwrap() / lp_norm_pow(ua, &grid, q).unwrap();
            let expected = 2f64.powf(2.0 * q - 3.0);
            assert!((r / expected - 1.0).abs() < 1e-3, "q={q}: {r}");
        }
    }

    #[test]
    fn calibration_succeeds_with_perturbation() {
        let p = nodal_problem(1.0);
        let cal = calibrate_R(&spec(), 8, &p, 0.5, 1.0, 64.0).unwrap();
        let last = cal.transcript.last().unwrap();
        assert!(last.outer_edge_max < 0.0);
        // tail: energies keep decreasing beyond the calibrated scale
        let e1 = outer_edge_max(&spec(), cal.r_scale * 1.5, 8, &p).unwrap();
        let e2 = outer_edge_max(&spec(), cal.r_scale * 2.0, 8, &p).unwrap();
        assert!(e1 < last.outer_edge_max && e2 < e1);
    }

    #[test]
    fn calibration_fails_without_perturbation() {
        let p = nodal_problem(0.0);
        assert!(matches!(
            calibrate_R(&spec(), 8, &p, 0.5, 1.0, 64.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn two_bump_search_reproduces_the_simplex_minimax_point() {
        let p = nodal_problem(1.0);
        let cfg = FlowConfig::default();
        let cal = calibrate_R(&spec(), 8, &p, cfg.eps_cone, 1.0, 64.0).unwrap();
        let simplex = build_phi0(&spec(), cal.r_scale, 8, &p.grid).unwrap();
        let minimax = minimax_nodal(&p, &cfg, &simplex, &MinimaxOptions::default()).unwrap();
        let search = multi_bump_search(2, &p, &cfg, 11, &MultiBumpOptions::default()).unwrap();
        assert!(!search.solutions.is_empty(), "{:?}", search.attempts);
        assert_eq!(search.attempts.len(), MultiBumpOptions::default().trials);
        let lowest = &search.solutions[0];
        let rel = p.e_norm(&lowest.u.combine(1.0, &minimax.point.u, -1.0)) / p.e_norm(&minimax.point.u);
        assert!(rel < DEDUP_DISTANCE, "relative distance {rel}");
        assert!((lowest.level - minimax.point.level).abs() < DEDUP_LEVEL * (1.0 + lowest.level));
    }

    #[test]
    fn search_results_are_distinct_converged_nodal_points() {
        let p = nodal_problem(1.0);
        let cfg = FlowConfig::default();
        let opts = MultiBumpOptions {
            trials: 6,
            ..MultiBumpOptions::default()
        };
        // On this grid the three-lobe candidates collapse into the first
        // cell, so the search recovers the one-node solutions ±u.
        let search = multi_bump_search(3, &p, &cfg, 5, &opts).unwrap();
        assert!(!search.solutions.is_empty(), "{:?}", search.attempts);
        let eps = cfg.eps_cone;
        for s in &search.solutions {
            assert!(s.level >= eps * eps / 4.0);
            assert!(s.min_cone_distance() >= eps);
            assert!(s.fixed_point_gap <= cfg.gap_threshold(&p, &s.u));
            assert!(s.report.sign_changes >= 1);
        }
        for w in search.solutions.windows(2) {
            assert!(w[0].level <= w[1].level);
        }
        for (i, a) in search.solutions.iter().enumerate() {
            for b in &search.solutions[i + 1..] {
                assert!(!is_duplicate(&p, a, b));
            }
        }
        let same = multi_bump_search(3, &p, &cfg, 5, &opts).unwrap();
        let levels = |o: &MultiBumpOutcome| o.solutions.iter().map(|s| s.level).collect::<Vec<_>>();
        assert_eq!(levels(&search), levels(&same));
    }

    #[test]
    fn search_needs_two_bumps() {
        let p = nodal_problem(1.0);
        let err = multi_bump_search(1, &p, &FlowConfig::default(), 0, &MultiBumpOptions::default());
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
