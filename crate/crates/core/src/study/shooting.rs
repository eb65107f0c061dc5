//! Shooting solver for the local radial problem `a(u″ + (2/ρ)u′) = V u − f(u)`.
//!
//! The initial amplitude `u(0)` is bisected between an undershoot (the
//! solution turns back before its `(k+1)`-th zero) and an overshoot (more
//! than `k` zeros). Once the amplitude is resolved the profile is cut where
//! it has decayed far below its peak and continued by the linear tail
//! `A e^{−κρ}/ρ`, `κ = sqrt(V∞/a)`, which the far field obeys to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Potential};

/// Classification of one trial integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Overshoot,
    Undershoot,
}

/// A radial profile sampled on a fine uniform mesh, continued analytically
/// beyond `cut`.
#[derive(Debug, Clone)]
pub struct Profile {
    pub step: f64,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub cut: f64,
    pub tail_amp: f64,
    pub kappa: f64,
}

impl Profile {
    /// Value and derivative at `rho` (cubic Hermite inside the mesh).
    pub fn eval(&self, rho: f64) -> (f64, f64) {
        if rho >= self.cut {
            let e = self.tail_amp * (-self.kappa * rho).exp();
            return (e / rho, -e * (self.kappa * rho + 1.0) / (rho * rho));
        }
        let x = rho / self.step;
        let j = (x.floor() as usize).min(self.u.len() - 2);
        let t = x - j as f64;
        let (y0, y1) = (self.u[j], self.u[j + 1]);
        let (d0, d1) = (self.du[j] * self.step, self.du[j + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        let deriv = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1)
            / self.step;
        (value, deriv)
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.eval(rho).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootingOptions {
    /// Relative width of the final amplitude bracket.
    pub shoot_tol: f64,
    /// RK4 step.
    pub step: f64,
    /// Integration horizon in units of the decay length `1/κ`.
    pub horizon: f64,
    pub amplitude_cap: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            shoot_tol: 1e-13,
            step: 1e-3,
            horizon: 40.0,
            amplitude_cap: 1e6,
        }
    }
}

struct Ode<'a> {
    a: f64,
    model: &'a ModelParams,
}

impl Ode<'_> {
    fn rhs(&self, rho: f64, u: f64, du: f64) -> (f64, f64) {
        let g = (self.model.potential.value(rho) * u - self.model.nonlinearity.f(u)) / self.a;
        if rho == 0.0 {
            (du, g / 3.0)
        } else {
            (du, g - 2.0 * du / rho)
        }
    }

    fn step(&self, rho: f64, u: f64, du: f64, h: f64) -> (f64, f64) {
        let (k1u, k1v) = self.rhs(rho, u, du);
        let (k2u, k2v) = self.rhs(rho + 0.5 * h, u + 0.5 * h * k1u, du + 0.5 * h * k1v);
        let (k3u, k3v) = self.rhs(rho + 0.5 * h, u + 0.5 * h * k2u, du + 0.5 * h * k2v);
        let (k4u, k4v) = self.rhs(rho + h, u + h * k3u, du + h * k3v);
        (
            u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
            du + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )
    }

    /// Integrates from the origin and classifies the trajectory. When
    /// `keep` is set the samples are returned.
    fn trial(
        &self,
        u0: f64,
        k_nodes: usize,
        h: f64,
        rho_end: f64,
        keep: bool,
    ) -> Result<(Outcome, Vec<f64>, Vec<f64>)> {
        let mut us = Vec::new();
        let mut dus = Vec::new();
        let (mut u, mut du) = (u0, 0.0);
        let mut rho = 0.0;
        let mut zeros = 0usize;
        // In the first lobe the peak sits at the origin.
        let mut past_peak = true;
        let steps = (rho_end / h).ceil() as usize;
        if keep {
            us.push(u);
            dus.push(du);
        }
        for _ in 0..steps {
            let (un, dun) = self.step(rho, u, du, h);
            rho += h;
            if !un.is_finite() || !dun.is_finite() || un.abs() > 1e3 * u0.abs().max(1.0) {
                return Ok((Outcome::Undershoot, us, dus));
            }
            if un * u < 0.0 || (un == 0.0 && u != 0.0) {
                zeros += 1;
                if zeros > k_nodes {
                    return Ok((Outcome::Overshoot, us, dus));
                }
                past_peak = false;
            }
            if un * dun < 0.0 {
                past_peak = true;
            } else if past_peak && un * dun > 0.0 && zeros <= k_nodes {
                return Ok((Outcome::Undershoot, us, dus));
            }
            u = un;
            du = dun;
            if keep {
                us.push(u);
                dus.push(du);
            }
        }
        Ok((Outcome::Undershoot, us, dus))
    }
}

/// Result of a converged shooting run.
#[derive(Debug, Clone)]
pub struct Shot {
    pub u0: f64,
    pub profile: Profile,
    /// `|u(ρ_end)| + |u′(ρ_end)|` of the continued profile.
    pub decay_residual: f64,
    pub bisections: usize,
}

/// Finds the radial solution with exactly `k_nodes` sign changes.
pub fn shoot(model: &ModelParams, k_nodes: usize, opts: &ShootingOptions) -> Result<Shot> {
    let a = model.a;
    let v_inf = match &model.potential {
        Potential::Constant { v0 } => *v0,
        Potential::Rational { c0, .. } => *c0,
        Potential::Tabulated { .. } => {
            return Err(Error::UnsupportedPotential(
                "shooting needs an analytic potential".into(),
            ))
        }
    };
    if !(v_inf > 0.0) {
        return Err(Error::Oracle(format!(
            "potential must stay positive at infinity, got {v_inf}"
        )));
    }
    let kappa = (v_inf / a).sqrt();
    let rho_end = opts.horizon / kappa + 4.0 * k_nodes as f64 / kappa;
    let h = opts.step;
    let ode = Ode { a, model };

    // Bracket: tiny amplitudes turn back immediately, large ones oscillate.
    let mut lo = 1e-6;
    if ode.trial(lo, k_nodes, h, rho_end, false)?.0 != Outcome::Undershoot {
        return Err(Error::Oracle("small amplitude does not undershoot".into()));
    }
    let mut hi = 1.0;
    while ode.trial(hi, k_nodes, h, rho_end, false)?.0 != Outcome::Overshoot {
        lo = hi;
        hi *= 2.0;
        if hi > opts.amplitude_cap {
            return Err(Error::Oracle(format!(
                "no overshooting amplitude below {} for {k_nodes} nodes",
                opts.amplitude_cap
            )));
        }
    }
    let mut bisections = 0;
    while (hi - lo) > opts.shoot_tol * hi && bisections < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match ode.trial(mid, k_nodes, h, rho_end, false)?.0 {
            Outcome::Overshoot => hi = mid,
            Outcome::Undershoot => lo = mid,
        }
        bisections += 1;
    }

    let (_, u_lo, du_lo) = ode.trial(lo, k_nodes, h, rho_end, true)?;
    let (_, u_hi, _du_hi) = ode.trial(hi, k_nodes, h, rho_end, true)?;
    let peak = u_lo.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    // The two bracketing trajectories agree until the growing mode takes
    // over; cut well before that, after the last zero.
    let common = u_lo.len().min(u_hi.len());
    let diverge = (0..common)
        .find(|&i| (u_lo[i] - u_hi[i]).abs() > 1e-9 * peak)
        .unwrap_or(common);
    let last_zero = (1..diverge)
        .rev()
        .find(|&i| u_lo[i] * u_lo[i - 1] <= 0.0)
        .unwrap_or(0);
    let target = 1e-6 * peak;
    let mut cut_idx = (last_zero.max(1)..diverge)
        .find(|&i| u_lo[i].abs() < target && u_lo[i] * du_lo[i] < 0.0)
        .unwrap_or(diverge.saturating_sub(1));
    // keep a margin behind the divergence point
    let margin = (2.0 / (kappa * h)) as usize;
    if cut_idx + margin > diverge && diverge > margin + last_zero + 1 {
        cut_idx = diverge - margin;
    }
    if cut_idx <= last_zero || cut_idx < 2 {
        return Err(Error::Oracle(format!(
            "profile for {k_nodes} nodes did not resolve its decay (diverged at rho = {})",
            diverge as f64 * h
        )));
    }
    let u = u_lo[..=cut_idx].to_vec();
    let du = du_lo[..=cut_idx].to_vec();
    let cut = cut_idx as f64 * h;
    let tail_amp = u[cut_idx] * cut * (kappa * cut).exp();
    let profile = Profile {
        step: h,
        u,
        du,
        cut,
        tail_amp,
        kappa,
    };
    let (ue, due) = profile.eval(rho_end);
    Ok(Shot {
        u0: 0.5 * (lo + hi),
        profile,
        decay_residual: ue.abs() + due.abs(),
        bisections,
    })
}
