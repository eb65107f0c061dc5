//! Peak selection over nodal lobes and the local minimax iteration built on
//! it.
//!
//! A field is cut into its lobes `u = u₁ + … + u_L` (maximal runs of one
//! sign). The fiber map `s ↦ I_{λ,β}(Σ s_k u_k)` on `(0, ∞)^L` is a
//! polynomial-like expression in `s` once the lobe integrals are known, so
//! it is maximized cheaply. Its local maximizer is the peak of `u`; at a
//! sign-changing critical point every lobe satisfies its own Nehari
//! condition, so the peak of a solution is the solution itself. Descending
//! along `T(w) − w` from peaks `w` converges to the critical point of least
//! energy with the same lobe structure.

use crate::error::{Error, Result};
use crate::flow::newton::{newton_polish, NewtonOptions};
use crate::flow::{fixed_point_gap, FlowConfig};
use crate::model::{PowerTerm, Problem};
use crate::radial::{count_sign_changes, Field};

/// Contiguous node blocks of constant sign. Entries below `threshold` do
/// not open a new lobe.
pub fn lobe_ranges(u: &[f64], threshold: f64) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let mut start = 0;
    let mut sign = 0.0_f64;
    for (i, &v) in u.iter().enumerate() {
        if v.abs() < threshold || v == 0.0 {
            continue;
        }
        let s = v.signum();
        if sign != 0.0 && s != sign {
            ranges.push((start, i));
            start = i;
        }
        sign = s;
    }
    if sign != 0.0 {
        ranges.push((start, u.len()));
    }
    ranges
}

fn lobe_threshold(u: &[f64]) -> f64 {
    1e-9 * u.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Integrals of the lobes needed to evaluate the fiber map.
pub struct Fiber {
    lobes: Vec<Vec<f64>>,
    stiffness: Vec<Vec<f64>>,
    v_l2: Vec<f64>,
    l2: Vec<f64>,
    terms: Vec<PowerTerm>,
    moments: Vec<Vec<f64>>,
    r_moment: Vec<f64>,
    a: f64,
    b: f64,
    lambda: f64,
    alpha: f64,
    beta: f64,
    r_exp: f64,
}

impl Fiber {
    pub fn new(problem: &Problem, u: &[f64]) -> Self {
        let ranges = lobe_ranges(u, lobe_threshold(u));
        let lobes: Vec<Vec<f64>> = ranges
            .iter()
            .map(|&(s, e)| {
                let mut v = vec![0.0; u.len()];
                v[s..e].copy_from_slice(&u[s..e]);
                v
            })
            .collect();
        let g = &problem.grid;
        let nl = lobes.len();
        let mut stiffness = vec![vec![0.0; nl]; nl];
        for i in 0..nl {
            for j in i..nl {
                // only neighbouring lobes share an edge
                let k = if j > i + 1 { 0.0 } else { g.dirichlet_pair(&lobes[i], &lobes[j]) };
                stiffness[i][j] = k;
                stiffness[j][i] = k;
            }
        }
        let pot = problem.potential();
        let mass = g.mass();
        let terms = problem.model.nonlinearity.terms();
        let mut v_l2 = Vec::with_capacity(nl);
        let mut l2 = Vec::with_capacity(nl);
        let mut moments = vec![Vec::with_capacity(nl); terms.len()];
        let mut r_moment = Vec::with_capacity(nl);
        let pert = problem.pert;
        for lobe in &lobes {
            let (mut a, mut b, mut r) = (0.0, 0.0, 0.0);
            let mut m = vec![0.0; terms.len()];
            for ((w, v), x) in mass.iter().zip(pot).zip(lobe) {
                if *w == 0.0 || *x == 0.0 {
                    continue;
                }
                let ax = x.abs();
                a += w * v * x * x;
                b += w * x * x;
                for (mk, t) in m.iter_mut().zip(&terms) {
                    *mk += w * ax.powf(t.p);
                }
                if pert.beta != 0.0 {
                    r += w * ax.powf(pert.r_exp);
                }
            }
            v_l2.push(a);
            l2.push(b);
            for (col, mk) in moments.iter_mut().zip(m) {
                col.push(mk);
            }
            r_moment.push(r);
        }
        Fiber {
            lobes,
            stiffness,
            v_l2,
            l2,
            terms,
            moments,
            r_moment,
            a: problem.model.a,
            b: problem.model.b,
            lambda: pert.lambda,
            alpha: pert.alpha,
            beta: pert.beta,
            r_exp: pert.r_exp,
        }
    }

    pub fn lobe_count(&self) -> usize {
        self.lobes.len()
    }

    /// `I_{λ,β}(Σ s_k u_k)`
    pub fn energy(&self, s: &[f64]) -> f64 {
        let nl = self.lobes.len();
        let mut k = 0.0;
        for i in 0..nl {
            for j in 0..nl {
                k += s[i] * s[j] * self.stiffness[i][j];
            }
        }
        let mut v = 0.0;
        let mut q = 0.0;
        let mut r = 0.0;
        for i in 0..nl {
            v += s[i] * s[i] * self.v_l2[i];
            q += s[i] * s[i] * self.l2[i];
            if self.beta != 0.0 {
                r += s[i].powf(self.r_exp) * self.r_moment[i];
            }
        }
        let mut f = 0.0;
        for (t, col) in self.terms.iter().zip(&self.moments) {
            let sum: f64 = s.iter().zip(col).map(|(si, m)| si.powf(t.p) * m).sum();
            f += t.coeff * sum / t.p;
        }
        let mut e = 0.5 * (self.a * k + v) + 0.25 * self.b * k * k - f;
        if self.lambda != 0.0 {
            e += self.lambda / (2.0 * (1.0 + self.alpha)) * q.powf(1.0 + self.alpha);
        }
        if self.beta != 0.0 {
            e -= self.beta / self.r_exp * r;
        }
        e
    }

    pub fn assemble(&self, s: &[f64]) -> Field {
        let len = self.lobes.first().map_or(0, Vec::len);
        let mut out = vec![0.0; len];
        for (lobe, si) in self.lobes.iter().zip(s) {
            for (o, x) in out.iter_mut().zip(lobe) {
                *o += si * x;
            }
        }
        Field::from_raw(out)
    }

    /// Local maximizer of `x ↦ energy(s with s_k = x)` closest to the
    /// current `s_k` on a geometric scan, refined by golden section.
    fn line_max(&self, s: &mut [f64], k: usize) -> bool {
        const STEPS: i32 = 64;
        let x0 = s[k];
        let ratio = 2f64.powf(1.0 / 8.0);
        let mut vals = Vec::with_capacity((2 * STEPS + 1) as usize);
        for j in -STEPS..=STEPS {
            s[k] = x0 * ratio.powi(j);
            vals.push(self.energy(s));
        }
        let mut best: Option<usize> = None;
        for idx in 1..vals.len() - 1 {
            if vals[idx] > vals[idx - 1] && vals[idx] >= vals[idx + 1] {
                let dist = (idx as i32 - STEPS).abs();
                if best.is_none_or(|b| dist < (b as i32 - STEPS).abs()) {
                    best = Some(idx);
                }
            }
        }
        let Some(idx) = best else {
            s[k] = x0;
            return false;
        };
        let mut lo = (x0 * ratio.powi(idx as i32 - 1 - STEPS)).ln();
        let mut hi = (x0 * ratio.powi(idx as i32 + 1 - STEPS)).ln();
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let eval = |y: f64, s: &mut [f64]| {
            s[k] = y.exp();
            self.energy(s)
        };
        let mut c = hi - gr * (hi - lo);
        let mut d = lo + gr * (hi - lo);
        let mut fc = eval(c, s);
        let mut fd = eval(d, s);
        while hi - lo > 1e-13 {
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - gr * (hi - lo);
                fc = eval(c, s);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + gr * (hi - lo);
                fd = eval(d, s);
            }
        }
        s[k] = (0.5 * (lo + hi)).exp();
        true
    }

    /// Coordinate ascent to a local maximum of the fiber map, starting from
    /// `s = (1, …, 1)`.
    pub fn peak(&self) -> Option<Vec<f64>> {
        let nl = self.lobes.len();
        if nl == 0 {
            return None;
        }
        let mut s = vec![1.0; nl];
        for _ in 0..2000 {
            let before = s.clone();
            for k in 0..nl {
                if !self.line_max(&mut s, k) {
                    return None;
                }
            }
            let change = s
                .iter()
                .zip(&before)
                .fold(0.0_f64, |m, (a, b)| m.max((a / b).ln().abs()));
            if change < 1e-11 {
                return Some(s);
            }
        }
        Some(s)
    }
}

/// The peak of `u` over its own lobes, with the lobe count.
pub fn peak_of(problem: &Problem, u: &[f64]) -> Option<(Field, usize)> {
    let fiber = Fiber::new(problem, u);
    let s = fiber.peak()?;
    Some((fiber.assemble(&s), fiber.lobe_count()))
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub u: Field,
    pub level: f64,
    pub gap: f64,
    pub converged: bool,
    pub lmm_iterations: usize,
    pub newton_iterations: usize,
}

/// Local minimax iteration for a critical point with `lobes` nodal lobes,
/// finished by Newton.
pub fn lmm_refine(
    problem: &Problem,
    u0: &Field,
    lobes: usize,
    cfg: &FlowConfig,
    max_iter: usize,
) -> Result<RefineOutcome> {
    let (mut w, found) = peak_of(problem, u0).ok_or_else(|| {
        Error::Infeasible("the initial field has no peak on its lobe fiber".into())
    })?;
    if found != lobes {
        return Err(Error::Infeasible(format!(
            "initial field has {found} lobes, expected {lobes}"
        )));
    }
    let newton = NewtonOptions {
        tol: 1e-2 * cfg.tol,
        max_iter: 40,
    };
    let mut energy = problem.energy_perturbed(&w);
    let mut tau: f64 = cfg.step0;
    let mut iterations = 0;
    let mut switch = 1e-3;
    loop {
        let (tw, gap) = fixed_point_gap(problem, &w)?;
        let scale = problem.e_norm(&w).max(1e-300);
        if gap <= switch * scale || iterations >= max_iter {
            let polished = newton_polish(problem, &w, &newton)?;
            let same_shape = count_sign_changes(&polished.u, lobe_threshold(&polished.u))
                == lobes - 1
                && problem.e_norm(&polished.u) > 1e-6 * scale;
            if polished.gap <= cfg.gap_threshold(problem, &polished.u) && same_shape {
                let level = problem.energy_perturbed(&polished.u);
                return Ok(RefineOutcome {
                    u: polished.u,
                    level,
                    gap: polished.gap,
                    converged: true,
                    lmm_iterations: iterations,
                    newton_iterations: polished.iterations,
                });
            }
            if iterations >= max_iter || switch < 1e-9 {
                return Ok(RefineOutcome {
                    level: problem.energy_perturbed(&w),
                    u: w,
                    gap,
                    converged: false,
                    lmm_iterations: iterations,
                    newton_iterations: polished.iterations,
                });
            }
            switch *= 0.1;
        }
        let d = tw.combine(1.0, &w, -1.0);
        let gap_sq = gap * gap;
        let mut accepted = None;
        let mut t = tau;
        while t > 1e-12 {
            let cand = w.combine(1.0, &d, t);
            if let Some((next, n)) = peak_of(problem, &cand) {
                let e = problem.energy_perturbed(&next);
                if n == lobes && e.is_finite() && e <= energy - cfg.armijo * t * gap_sq {
                    accepted = Some((next, e));
                    break;
                }
            }
            t *= cfg.backtrack;
        }
        iterations += 1;
        match accepted {
            Some((next, e)) => {
                w = next;
                energy = e;
                tau = (2.0 * t).min(1.0);
            }
            None => {
                // Rounding floor of the certified decrease: let Newton try.
                switch = f64::INFINITY;
                if iterations >= max_iter {
                    continue;
                }
                let polished = newton_polish(problem, &w, &newton)?;
                let same_shape = count_sign_changes(&polished.u, lobe_threshold(&polished.u))
                    == lobes - 1;
                return Ok(RefineOutcome {
                    level: problem.energy_perturbed(&polished.u),
                    converged: polished.gap <= cfg.gap_threshold(problem, &polished.u) && same_shape,
                    gap: polished.gap,
                    u: polished.u,
                    lmm_iterations: iterations,
                    newton_iterations: polished.iterations,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, PerturbationParams};
    use crate::radial::build_grid;

    fn problem(b: f64, lambda: f64, beta: f64, p: f64) -> Problem {
        let model = ModelParams::power(1.0, b, 1.0, p).unwrap();
        let pert = PerturbationParams::new(lambda, beta, 0.02, 5.0, &model).unwrap();
        Problem::new(model, pert, build_grid(20.0, 2000).unwrap()).unwrap()
    }

    #[test]
    fn lobes_follow_sign_runs() {
        let u = [1.0, 2.0, 0.0, -1.0, -0.5, 0.0, 3.0, 0.0];
        assert_eq!(lobe_ranges(&u, 0.0), vec![(0, 3), (3, 6), (6, 8)]);
        assert!(lobe_ranges(&[0.0, 0.0], 0.0).is_empty());
    }

    #[test]
    fn fiber_energy_matches_direct_evaluation() {
        let p = problem(0.3, 0.5, 0.5, 3.0);
        let u = Field::from_fn(&p.grid, |r| (2.0 - r) * (-r * r / 6.0).exp());
        let fiber = Fiber::new(&p, &u);
        assert_eq!(fiber.lobe_count(), 2);
        let s = [1.3, 0.7];
        let direct = p.energy_perturbed(&fiber.assemble(&s));
        assert!((fiber.energy(&s) - direct).abs() < 1e-10 * direct.abs());
    }

    #[test]
    fn peak_satisfies_lobe_nehari_conditions() {
        let p = problem(0.01, 0.2, 0.2, 4.0);
        let u = Field::from_fn(&p.grid, |r| (2.0 - r) * (-r * r / 6.0).exp());
        let fiber = Fiber::new(&p, &u);
        let s = fiber.peak().unwrap();
        for k in 0..2 {
            let h = 1e-5;
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[k] *= 1.0 + h;
            sm[k] *= 1.0 - h;
            let deriv = (fiber.energy(&sp) - fiber.energy(&sm)) / (2.0 * h);
            assert!(deriv.abs() < 1e-6 * fiber.energy(&s).abs(), "lobe {k}: {deriv}");
        }
    }

    #[test]
    fn ground_state_from_a_bump() {
        let p = problem(0.0, 0.0, 0.0, 4.0);
        let u0 = Field::from_fn(&p.grid, |r| (-r * r).exp());
        let out = lmm_refine(&p, &u0, 1, &FlowConfig::default(), 500).unwrap();
        assert!(out.converged);
        assert!((out.level - 18.8973).abs() < 2e-2 * 18.8973, "{}", out.level);
    }

    #[test]
    fn one_node_solution_from_a_sign_changing_guess() {
        let p = problem(0.0, 0.0, 0.0, 4.0);
        let u0 = Field::from_fn(&p.grid, |r| (1.5 - r) * (-r * r / 4.0).exp());
        let out = lmm_refine(&p, &u0, 2, &FlowConfig::default(), 500).unwrap();
        assert!(out.converged);
        assert_eq!(count_sign_changes(&out.u, 1e-9 * out.u.max_abs()), 1);
        assert!((out.level - 118.98).abs() < 2e-2 * 118.98, "{}", out.level);
    }
}
