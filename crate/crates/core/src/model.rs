//! Problem definition, hypothesis checks and the energy functionals of the
//! Kirchhoff problem `−(a + b∫|∇u|²)Δu + V u = f(u)` and of its perturbation
//! `… + λ(∫u²)^α u = f(u) + β|u|^{r−2}u`.
//!
//! All integrals in this module use the lumped discrete forms of
//! [`RadialGrid`] so that the energy, the fixed-point operator of
//! [`crate::flow`] and the strong residual describe one discrete problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{count_sign_changes, split_signs, Field, RadialGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Constant { v0: f64 },
    /// `V(ρ) = c0 + c1 / (1 + ρ²)^k`
    Rational {
        c0: f64,
        c1: f64,
        #[serde(default = "one")]
        k: f64,
    },
    /// Samples interpolated linearly in ρ, constant beyond the last sample.
    Tabulated { rho: Vec<f64>, values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl Potential {
    pub fn value(&self, rho: f64) -> f64 {
        match self {
            Potential::Constant { v0 } => *v0,
            Potential::Rational { c0, c1, k } => c0 + c1 / (1.0 + rho * rho).powf(*k),
            Potential::Tabulated { rho: xs, values } => interpolate(xs, values, rho),
        }
    }

    /// `(∇V(x), x) = V′(ρ)ρ`, unavailable for tabulated data.
    pub fn radial_virial(&self, rho: f64) -> Option<f64> {
        match self {
            Potential::Constant { .. } => Some(0.0),
            Potential::Rational { c1, k, .. } => {
                let s = 1.0 + rho * rho;
                Some(-2.0 * k * c1 * rho * rho / s.powf(k + 1.0))
            }
            Potential::Tabulated { .. } => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Potential::Constant { .. })
    }

    fn validate(&self) -> Result<()> {
        if let Potential::Tabulated { rho, values } = self {
            if rho.len() != values.len() || rho.len() < 2 {
                return Err(Error::config(
                    "potential.rho and potential.values must have equal length >= 2",
                ));
            }
            if rho.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("potential.rho must be strictly increasing"));
            }
        }
        let finite = match self {
            Potential::Constant { v0 } => v0.is_finite(),
            Potential::Rational { c0, c1, k } => c0.is_finite() && c1.is_finite() && k.is_finite(),
            Potential::Tabulated { rho, values } => {
                rho.iter().chain(values).all(|v| v.is_finite())
            }
        };
        if !finite {
            return Err(Error::config("potential parameters must be finite"));
        }
        Ok(())
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let j = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let t = (x - x0) / (x1 - x0);
    ys[j - 1] * (1.0 - t) + ys[j] * t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub coeff: f64,
    pub p: f64,
}

/// `f(t) = Σ c_k |t|^{p_k − 2} t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    Power { p: f64 },
    PowerSum { terms: Vec<PowerTerm> },
}

impl Nonlinearity {
    pub(crate) fn terms(&self) -> Vec<PowerTerm> {
        match self {
            Nonlinearity::Power { p } => vec![PowerTerm { coeff: 1.0, p: *p }],
            Nonlinearity::PowerSum { terms } => terms.clone(),
        }
    }

    /// Growth exponent: the largest exponent present.
    pub fn exponent(&self) -> f64 {
        self.terms().iter().fold(f64::NEG_INFINITY, |m, t| m.max(t.p))
    }

    pub fn f(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::Power { p } => signed_pow(t, *p),
            Nonlinearity::PowerSum { terms } => {
                terms.iter().map(|term| term.coeff * signed_pow(t, term.p)).sum()
            }
        }
    }

    /// Primitive `F(t) = ∫₀ᵗ f`.
    pub fn primitive(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::Power { p } => t.abs().powf(*p) / p,
            Nonlinearity::PowerSum { terms } => terms
                .iter()
                .map(|term| term.coeff * t.abs().powf(term.p) / term.p)
                .sum(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::Power { p } => (p - 1.0) * t.abs().powf(p - 2.0),
            Nonlinearity::PowerSum { terms } => terms
                .iter()
                .map(|term| term.coeff * (term.p - 1.0) * t.abs().powf(term.p - 2.0))
                .sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        let terms = self.terms();
        if terms.is_empty() {
            return Err(Error::config("nonlinearity needs at least one power term"));
        }
        for t in &terms {
            if !(t.p > 2.0 && t.p < 6.0) || !t.coeff.is_finite() {
                return Err(Error::config(format!(
                    "nonlinearity exponent {} outside (2, 6) required by (f1)-(f2)",
                    t.p
                )));
            }
        }
        Ok(())
    }
}

/// `|t|^{p−2} t`
pub fn signed_pow(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.abs().powf(p - 1.0).copysign(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub potential: Potential,
    pub nonlinearity: Nonlinearity,
    pub mu: f64,
}

impl ModelParams {
    pub fn new(
        a: f64,
        b: f64,
        potential: Potential,
        nonlinearity: Nonlinearity,
        mu: f64,
    ) -> Result<Self> {
        let m = ModelParams {
            a,
            b,
            potential,
            nonlinearity,
            mu,
        };
        m.validate()?;
        Ok(m)
    }

    /// Constant potential with pure power nonlinearity and `μ = p`.
    pub fn power(a: f64, b: f64, v0: f64, p: f64) -> Result<Self> {
        Self::new(
            a,
            b,
            Potential::Constant { v0 },
            Nonlinearity::Power { p },
            p,
        )
    }

    pub fn p(&self) -> f64 {
        self.nonlinearity.exponent()
    }

    pub fn with_b(&self, b: f64) -> Result<Self> {
        let mut m = self.clone();
        m.b = b;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::config(format!("model.a must be positive (Kirchhoff hypothesis a > 0), got {}", self.a)));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::config(format!(
                "model.b must be nonnegative (Kirchhoff hypothesis b >= 0), got {}",
                self.b
            )));
        }
        self.potential.validate()?;
        self.nonlinearity.validate()?;
        let p = self.p();
        if !(self.mu > 2.0 && self.mu <= p) {
            return Err(Error::config(format!(
                "model.mu = {} must satisfy 2 < mu <= p = {p} ((f3) with (f2))",
                self.mu
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationParams {
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
    pub r_exp: f64,
}

impl PerturbationParams {
    pub fn new(lambda: f64, beta: f64, alpha: f64, r_exp: f64, model: &ModelParams) -> Result<Self> {
        let pert = PerturbationParams {
            lambda,
            beta,
            alpha,
            r_exp,
        };
        pert.validate(model)?;
        Ok(pert)
    }

    /// Admissible exponents with the perturbation switched off.
    pub fn off(alpha: f64, r_exp: f64, model: &ModelParams) -> Result<Self> {
        Self::new(0.0, 0.0, alpha, r_exp, model)
    }

    pub fn alpha_bound(mu: f64) -> f64 {
        (mu - 2.0) / (3.0 * mu + 2.0)
    }

    pub fn r_lower_bound(p: f64) -> f64 {
        p.max(4.5)
    }

    pub fn with_strength(&self, lambda: f64, beta: f64) -> Self {
        PerturbationParams {
            lambda,
            beta,
            ..*self
        }
    }

    pub fn is_off(&self) -> bool {
        self.lambda == 0.0 && self.beta == 0.0
    }

    pub fn validate(&self, model: &ModelParams) -> Result<()> {
        let bound = Self::alpha_bound(model.mu);
        if !(self.alpha > 0.0 && self.alpha < bound) {
            return Err(Error::config(format!(
                "perturbation.alpha = {} outside (0, (mu-2)/(3mu+2)) = (0, {bound}) for mu = {}; \
                 violates the perturbation hypothesis on alpha",
                self.alpha, model.mu
            )));
        }
        let lo = Self::r_lower_bound(model.p());
        if !(self.r_exp > lo && self.r_exp < 6.0) {
            return Err(Error::config(format!(
                "perturbation.r_exp = {} outside (max{{p, 9/2}}, 6) = ({lo}, 6); \
                 violates the perturbation hypothesis on r",
                self.r_exp
            )));
        }
        for (name, v) in [("lambda", self.lambda), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!(
                    "perturbation.{name} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// A model, its perturbation and the grid it is discretized on, with the
/// potential sampled once.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: ModelParams,
    pub pert: PerturbationParams,
    pub grid: RadialGrid,
    potential: Vec<f64>,
}

/// Integral pieces shared by every energy expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrals {
    /// `∫|∇u|²`
    pub grad: f64,
    /// `∫u²`
    pub l2: f64,
    /// `∫V u²`
    pub v_l2: f64,
    /// `∫F(u)`
    pub f_int: f64,
    /// `∫|u|^r`
    pub r_int: f64,
}

impl Problem {
    pub fn new(model: ModelParams, pert: PerturbationParams, grid: RadialGrid) -> Result<Self> {
        model.validate()?;
        pert.validate(&model)?;
        let potential = grid.nodes().iter().map(|&r| model.potential.value(r)).collect();
        Ok(Problem {
            model,
            pert,
            grid,
            potential,
        })
    }

    pub fn with_pert(&self, pert: PerturbationParams) -> Result<Self> {
        pert.validate(&self.model)?;
        Ok(Problem {
            pert,
            ..self.clone()
        })
    }

    /// The same model and perturbation on another grid.
    pub fn with_grid(&self, grid: RadialGrid) -> Result<Self> {
        Problem::new(self.model.clone(), self.pert, grid)
    }

    pub fn unperturbed(&self) -> Self {
        Problem {
            pert: self.pert.with_strength(0.0, 0.0),
            ..self.clone()
        }
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Right-hand side `f(t) + β|t|^{r−2}t`.
    pub fn source(&self, t: f64) -> f64 {
        let mut s = self.model.nonlinearity.f(t);
        if self.pert.beta != 0.0 {
            s += self.pert.beta * signed_pow(t, self.pert.r_exp);
        }
        s
    }

    pub fn source_derivative(&self, t: f64) -> f64 {
        let mut s = self.model.nonlinearity.derivative(t);
        if self.pert.beta != 0.0 {
            s += self.pert.beta * (self.pert.r_exp - 1.0) * t.abs().powf(self.pert.r_exp - 2.0);
        }
        s
    }

    pub fn integrals(&self, u: &[f64]) -> Integrals {
        let g = &self.grid;
        let nl = &self.model.nonlinearity;
        let mut l2 = 0.0;
        let mut v_l2 = 0.0;
        let mut f_int = 0.0;
        let mut r_int = 0.0;
        for ((m, v), &x) in g.mass().iter().zip(&self.potential).zip(u) {
            if *m == 0.0 {
                continue;
            }
            let sq = x * x;
            l2 += m * sq;
            v_l2 += m * v * sq;
            f_int += m * nl.primitive(x);
            if self.pert.beta != 0.0 {
                r_int += m * x.abs().powf(self.pert.r_exp);
            }
        }
        Integrals {
            grad: g.dirichlet_form(u),
            l2,
            v_l2,
            f_int,
            r_int,
        }
    }

    /// `‖u‖² = ∫(a|∇u|² + V u²)`
    pub fn e_norm_sq(&self, u: &[f64]) -> f64 {
        let v_l2 = self
            .grid
            .mass()
            .iter()
            .zip(&self.potential)
            .zip(u)
            .map(|((m, v), x)| m * v * x * x)
            .sum::<f64>();
        self.model.a * self.grid.dirichlet_form(u) + v_l2
    }

    pub fn e_norm(&self, u: &[f64]) -> f64 {
        self.e_norm_sq(u).max(0.0).sqrt()
    }

    /// `⟨u, v⟩ = ∫(a∇u·∇v + V uv)`
    pub fn e_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let mass_part = self
            .grid
            .mass()
            .iter()
            .zip(&self.potential)
            .zip(u.iter().zip(v))
            .map(|((m, pot), (x, y))| m * pot * x * y)
            .sum::<f64>();
        self.model.a * self.grid.dirichlet_pair(u, v) + mass_part
    }

    fn energy_from(&self, it: &Integrals) -> f64 {
        let a = self.model.a;
        let b = self.model.b;
        0.5 * (a * it.grad + it.v_l2) + 0.25 * b * it.grad * it.grad - it.f_int
    }

    fn perturbation_from(&self, it: &Integrals) -> f64 {
        let PerturbationParams {
            lambda,
            beta,
            alpha,
            r_exp,
        } = self.pert;
        lambda / (2.0 * (1.0 + alpha)) * it.l2.powf(1.0 + alpha) - beta / r_exp * it.r_int
    }

    /// `I(u) = ½‖u‖² + (b/4)(∫|∇u|²)² − ∫F(u)`
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.energy_from(&self.integrals(u))
    }

    /// `I_{λ,β}(u) = I(u) + λ/(2(1+α))(∫u²)^{1+α} − (β/r)∫|u|^r`
    pub fn energy_perturbed(&self, u: &[f64]) -> f64 {
        if self.pert.is_off() {
            return self.energy(u);
        }
        let it = self.integrals(u);
        self.energy_from(&it) + self.perturbation_from(&it)
    }

    /// Nodal residual of the strong form. Interior rows use the centered
    /// stencil of `u″ + (2/ρ)u′`; the origin row uses `3u″(0)`.
    pub fn strong_residual(&self, u: &[f64]) -> Field {
        let g = &self.grid;
        let n = g.n();
        let h = g.h();
        let grad = g.dirichlet_form(u);
        let coeff = self.model.a + self.model.b * grad;
        let shift = self.lambda_shift(u);
        let au = g.stiffness_apply(u);
        let mut r = vec![0.0; n + 1];
        r[0] = coeff * 6.0 * (u[0] - u[1]) / (h * h) + (self.potential[0] + shift) * u[0]
            - self.source(u[0]);
        for i in 1..n {
            r[i] = coeff * au[i] / g.mass()[i] + (self.potential[i] + shift) * u[i]
                - self.source(u[i]);
        }
        Field::from_raw(r)
    }

    /// `λ(∫u²)^α`, the coefficient of the nonlocal mass term.
    pub fn lambda_shift(&self, u: &[f64]) -> f64 {
        if self.pert.lambda == 0.0 {
            return 0.0;
        }
        let l2 = self.grid.mass_integral_by(u, |_, x| x * x);
        self.pert.lambda * l2.powf(self.pert.alpha)
    }

    /// Left side of the Pohozaev identity of the perturbed problem; vanishes
    /// at critical points up to discretization error.
    pub fn pohozaev_residual(&self, u: &[f64]) -> Result<f64> {
        let pot = &self.model.potential;
        if pot.radial_virial(0.0).is_none() {
            return Err(Error::UnsupportedPotential(
                "tabulated potential has no derivative data; Pohozaev check disabled".into(),
            ));
        }
        let virial = self
            .grid
            .mass_integral_by(u, |rho, x| pot.radial_virial(rho).unwrap_or(0.0) * x * x);
        let it = self.integrals(u);
        Ok(self.pohozaev_from(&it, virial))
    }

    fn pohozaev_from(&self, it: &Integrals, virial: f64) -> f64 {
        let a = self.model.a;
        let b = self.model.b;
        let PerturbationParams {
            lambda,
            beta,
            alpha,
            r_exp,
        } = self.pert;
        0.5 * a * it.grad + 1.5 * it.v_l2 + 0.5 * virial + 0.5 * b * it.grad * it.grad
            + 1.5 * lambda * it.l2.powf(1.0 + alpha)
            - 3.0 * (it.f_int + beta / r_exp * it.r_int)
    }

    /// `I(u) − I(u⁺) − I(u⁻) − (b/2)∫|∇u⁺|²∫|∇u⁻|²` for the unperturbed energy.
    pub fn decomposition_gap(&self, u: &[f64]) -> f64 {
        let (plus, minus) = split_signs(u);
        let k_plus = self.grid.dirichlet_form(&plus);
        let k_minus = self.grid.dirichlet_form(&minus);
        self.energy(u) - self.energy(&plus) - self.energy(&minus)
            - 0.5 * self.model.b * k_plus * k_minus
    }

    /// E-norm of the part of `u` with the sign opposite to `sign`: the
    /// distance surrogate `dist(u, P^±) ≤ ‖u^∓‖`.
    pub fn cone_distance(&self, u: &[f64], sign: Sign) -> f64 {
        let (plus, minus) = split_signs(u);
        match sign {
            Sign::Plus => self.e_norm(&minus),
            Sign::Minus => self.e_norm(&plus),
        }
    }

    pub fn energy_report(&self, u: &[f64], threshold: f64) -> EnergyReport {
        let it = self.integrals(u);
        let energy_i = self.energy_from(&it);
        let energy_pert = if self.pert.is_off() {
            energy_i
        } else {
            energy_i + self.perturbation_from(&it)
        };
        let residual_sup = self.strong_residual(u).max_abs();
        let pohozaev_res = self.pohozaev_residual(u).ok();
        EnergyReport {
            e_norm_sq: self.model.a * it.grad + it.v_l2,
            grad_sq: it.grad,
            l2_sq: it.l2,
            energy_i,
            energy_pert,
            residual_sup,
            pohozaev_res,
            cone_dist_plus: self.cone_distance(u, Sign::Plus),
            cone_dist_minus: self.cone_distance(u, Sign::Minus),
            sign_changes: count_sign_changes(u, threshold),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub e_norm_sq: f64,
    pub grad_sq: f64,
    pub l2_sq: f64,
    #[serde(rename = "energy_I")]
    pub energy_i: f64,
    pub energy_pert: f64,
    pub residual_sup: f64,
    /// Absent for potentials without derivative data.
    pub pohozaev_res: Option<f64>,
    pub cone_dist_plus: f64,
    pub cone_dist_minus: f64,
    pub sign_changes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotChecked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, status: CheckStatus, detail: impl Into<String>) -> HypothesisCheck {
    HypothesisCheck {
        name: name.into(),
        status,
        detail: detail.into(),
    }
}

/// Samples the structural hypotheses on the grid and on logarithmic
/// t-samples. Never fails; each hypothesis is reported separately.
pub fn validate_model(
    params: &ModelParams,
    pert: &PerturbationParams,
    grid: &RadialGrid,
) -> ValidationReport {
    let mut checks = Vec::new();
    let pot = &params.potential;
    let mu = params.mu;
    let p = params.p();

    // (V1)
    let (imin, vmin) = grid
        .nodes()
        .iter()
        .map(|&r| pot.value(r))
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    checks.push(if vmin > 0.0 {
        check("V1", CheckStatus::Pass, format!("inf V = {vmin} on the grid"))
    } else {
        check(
            "V1",
            CheckStatus::Fail,
            format!("V = {vmin} <= 0 at node {imin} (rho = {})", grid.nodes()[imin]),
        )
    });

    // (V2), pointwise part
    if pot.radial_virial(0.0).is_none() {
        checks.push(check(
            "V2",
            CheckStatus::NotChecked,
            "tabulated potential without derivative data",
        ));
    } else {
        let witness = grid.nodes().iter().enumerate().find_map(|(i, &r)| {
            let lhs = (mu - 2.0) / mu * pot.value(r) - pot.radial_virial(r).unwrap_or(0.0);
            (lhs < -1e-14).then_some((i, r, lhs))
        });
        checks.push(match witness {
            None => check(
                "V2",
                CheckStatus::Pass,
                "((mu-2)/mu)V - V'(rho)rho >= 0 at every node",
            ),
            Some((i, r, lhs)) => check(
                "V2",
                CheckStatus::Fail,
                format!("((mu-2)/mu)V - V'(rho)rho = {lhs} < 0 at node {i} (rho = {r})"),
            ),
        });
    }
    checks.push(check(
        "V2-integrability",
        CheckStatus::NotChecked,
        "(grad V, x) in L^inf + L^{3/2} is not certified by grid sampling",
    ));

    let nl = &params.nonlinearity;
    // (f1): |f(t)/t| decreases to zero along t = 10^{-k}
    let small: Vec<f64> = (1..=10).map(|k| 10f64.powi(-k)).collect();
    let ratios: Vec<f64> = small
        .iter()
        .map(|&t| (nl.f(t) / t).abs().max((nl.f(-t) / t).abs()))
        .collect();
    let f1_ok = ratios.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
        && ratios[ratios.len() - 1] < ratios[0];
    checks.push(if f1_ok {
        check(
            "f1",
            CheckStatus::Pass,
            format!("|f(t)/t| = {:e} at t = 1e-10", ratios[ratios.len() - 1]),
        )
    } else {
        let i = ratios
            .windows(2)
            .position(|w| w[1] > w[0] * (1.0 + 1e-12))
            .map(|i| i + 1)
            .unwrap_or(ratios.len() - 1);
        check(
            "f1",
            CheckStatus::Fail,
            format!("|f(t)/t| = {} does not decay at t = {:e}", ratios[i], small[i]),
        )
    });

    // (f2): |f(t)|/|t|^{p-1} bounded along t = 10^k
    let large: Vec<f64> = (0..=8).map(|k| 10f64.powi(k)).collect();
    let growth: Vec<f64> = large
        .iter()
        .map(|&t| nl.f(t).abs().max(nl.f(-t).abs()) / t.powf(p - 1.0))
        .collect();
    let reference = growth[4].max(f64::MIN_POSITIVE);
    let f2_bad = growth[4..]
        .iter()
        .position(|g| !g.is_finite() || *g > 1.01 * reference + 1e-12);
    checks.push(match f2_bad {
        None => check(
            "f2",
            CheckStatus::Pass,
            format!("|f(t)|/|t|^(p-1) = {} at t = 1e8", growth[growth.len() - 1]),
        ),
        Some(i) => check(
            "f2",
            CheckStatus::Fail,
            format!("|f(t)|/|t|^(p-1) = {} growing at t = {:e}", growth[4 + i], large[4 + i]),
        ),
    });

    // (f3): t f(t) >= mu F(t) > 0 on a symmetric logarithmic sample
    let f3_witness = (-40..=40)
        .map(|k| 10f64.powf(k as f64 / 10.0))
        .flat_map(|t| [t, -t])
        .find(|&t| {
            let big_f = nl.primitive(t);
            let lhs = t * nl.f(t);
            !(big_f > 0.0 && lhs >= mu * big_f * (1.0 - 1e-12))
        });
    checks.push(match f3_witness {
        None => check(
            "f3",
            CheckStatus::Pass,
            format!("t f(t) >= {mu} F(t) > 0 on |t| in [1e-4, 1e4]"),
        ),
        Some(t) => check(
            "f3",
            CheckStatus::Fail,
            format!(
                "t f(t) = {} vs mu F(t) = {} at t = {t}",
                t * nl.f(t),
                mu * nl.primitive(t)
            ),
        ),
    });

    checks.push(match pert.validate(params) {
        Ok(()) => check(
            "perturbation",
            CheckStatus::Pass,
            format!(
                "alpha = {} in (0, {}), r = {} in ({}, 6)",
                pert.alpha,
                PerturbationParams::alpha_bound(mu),
                pert.r_exp,
                PerturbationParams::r_lower_bound(p)
            ),
        ),
        Err(e) => check("perturbation", CheckStatus::Fail, e.to_string()),
    });

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::build_grid;
    use std::f64::consts::PI;

    fn cubic_problem(b: f64, n: usize, r_max: f64) -> Problem {
        let model = ModelParams::power(1.0, b, 1.0, 3.0).unwrap();
        let pert = PerturbationParams::off(0.05, 5.0, &model).unwrap();
        Problem::new(model, pert, build_grid(r_max, n).unwrap()).unwrap()
    }

    #[test]
    fn power_model_passes_every_hypothesis() {
        let model = ModelParams::power(1.0, 0.0, 1.0, 3.0).unwrap();
        let pert = PerturbationParams::off(0.05, 5.0, &model).unwrap();
        let grid = build_grid(10.0, 100).unwrap();
        let report = validate_model(&model, &pert, &grid);
        assert!(report.all_pass(), "{report:?}");
        assert_eq!(report.get("f3").unwrap().status, CheckStatus::Pass);
        assert_eq!(
            report.get("V2-integrability").unwrap().status,
            CheckStatus::NotChecked
        );
    }

    #[test]
    fn increasing_potential_violates_v2_with_witness() {
        // V = 2 − (1+ρ²)^{-3} rises steeply near the origin.
        let model = ModelParams::new(
            1.0,
            0.0,
            Potential::Rational {
                c0: 2.0,
                c1: -1.0,
                k: 3.0,
            },
            Nonlinearity::Power { p: 3.0 },
            3.0,
        )
        .unwrap();
        let pert = PerturbationParams::off(0.05, 5.0, &model).unwrap();
        let grid = build_grid(10.0, 100).unwrap();
        let report = validate_model(&model, &pert, &grid);
        let v2 = report.get("V2").unwrap();
        assert_eq!(v2.status, CheckStatus::Fail);
        // direct evaluation at the reported node
        let rho = 0.5;
        let s: f64 = 1.0 + rho * rho;
        let lhs = (1.0 / 3.0) * (2.0 - s.powi(-3)) - 6.0 * rho * rho / s.powi(4);
        assert!(lhs < 0.0);
        assert!(v2.detail.contains("node"));
    }

    #[test]
    fn decaying_potential_satisfies_v2() {
        let model = ModelParams::new(
            1.0,
            0.0,
            Potential::Rational {
                c0: 0.0,
                c1: 1.0,
                k: 3.0,
            },
            Nonlinearity::Power { p: 3.0 },
            3.0,
        )
        .unwrap();
        let pert = PerturbationParams::off(0.05, 5.0, &model).unwrap();
        let report = validate_model(&model, &pert, &build_grid(10.0, 100).unwrap());
        assert_eq!(report.get("V2").unwrap().status, CheckStatus::Pass);
        assert_eq!(report.get("V1").unwrap().status, CheckStatus::Pass);
    }

    #[test]
    fn f3_failure_is_reported() {
        let model = ModelParams::new(
            1.0,
            0.0,
            Potential::Constant { v0: 1.0 },
            Nonlinearity::PowerSum {
                terms: vec![
                    PowerTerm { coeff: 1.0, p: 3.0 },
                    PowerTerm { coeff: 1.0, p: 5.0 },
                ],
            },
            4.0,
        )
        .unwrap();
        let pert = PerturbationParams::off(0.05, 5.5, &model).unwrap();
        let report = validate_model(&model, &pert, &build_grid(10.0, 100).unwrap());
        assert_eq!(report.get("f3").unwrap().status, CheckStatus::Fail);
        assert_eq!(report.get("f1").unwrap().status, CheckStatus::Pass);
        assert_eq!(report.get("f2").unwrap().status, CheckStatus::Pass);
    }

    #[test]
    fn perturbation_ranges_are_open_intervals() {
        let model = ModelParams::power(1.0, 0.0, 1.0, 3.0).unwrap();
        let bound = PerturbationParams::alpha_bound(3.0);
        assert!((bound - 1.0 / 11.0).abs() < 1e-15);
        assert!(PerturbationParams::new(1.0, 1.0, bound, 5.0, &model).is_err());
        assert!(PerturbationParams::new(1.0, 1.0, 0.0, 5.0, &model).is_err());
        assert!(PerturbationParams::new(1.0, 1.0, 0.9, 5.0, &model).is_err());
        assert!(PerturbationParams::new(1.0, 1.0, 0.05, 4.4, &model).is_err());
        assert!(PerturbationParams::new(1.0, 1.0, 0.05, 4.5, &model).is_err());
        assert!(PerturbationParams::new(1.0, 1.0, 0.05, 6.0, &model).is_err());
        assert!(PerturbationParams::new(1.5, 1.0, 0.05, 5.0, &model).is_err());
        assert!(PerturbationParams::new(1.0, 1.0, 0.05, 5.0, &model).is_ok());
        let p5 = ModelParams::power(1.0, 0.0, 1.0, 5.0).unwrap();
        assert!(PerturbationParams::new(1.0, 1.0, 0.05, 4.8, &p5).is_err());
    }

    #[test]
    fn model_invariants_enforced() {
        assert!(ModelParams::power(0.0, 0.0, 1.0, 3.0).is_err());
        assert!(ModelParams::power(1.0, -0.1, 1.0, 3.0).is_err());
        assert!(ModelParams::power(1.0, 0.0, 1.0, 6.0).is_err());
        assert!(ModelParams::power(1.0, 0.0, 1.0, 2.0).is_err());
        let m = ModelParams::new(
            1.0,
            0.0,
            Potential::Constant { v0: 1.0 },
            Nonlinearity::Power { p: 3.0 },
            3.5,
        );
        assert!(m.is_err());
    }

    #[test]
    fn zero_field_has_zero_everything() {
        let pr = cubic_problem(1.0, 200, 10.0);
        let z = Field::zeros(&pr.grid);
        assert_eq!(pr.energy(&z), 0.0);
        assert_eq!(pr.energy_perturbed(&z), 0.0);
        assert!(pr.strong_residual(&z).is_zero());
        assert_eq!(pr.pohozaev_residual(&z).unwrap(), 0.0);
        assert_eq!(pr.decomposition_gap(&z), 0.0);
    }

    #[test]
    fn b_zero_energy_is_local_functional() {
        let pr = cubic_problem(0.0, 400, 12.0);
        let u = Field::from_fn(&pr.grid, |r| 1.3 * (-r * r / 2.0).exp());
        let it = pr.integrals(&u);
        let local = 0.5 * it.grad + 0.5 * it.v_l2 - it.f_int;
        assert_eq!(pr.energy(&u), local);
    }

    #[test]
    fn gaussian_energy_matches_analytic_moments() {
        // u = e^{-ρ²}, a = 1, V = 1, b = 1, f = |t|t:
        // ∫|∇u|² = 6π^{3/2}/2^{5/2}, ∫u² = (π/2)^{3/2}, ∫|u|³ = (π/3)^{3/2}
        let pr = cubic_problem(1.0, 12000, 12.0);
        let u = Field::from_fn(&pr.grid, |r| (-r * r).exp());
        let grad = 6.0 * PI.powf(1.5) / 2f64.powf(2.5);
        let l2 = (PI / 2.0).powf(1.5);
        let l3 = (PI / 3.0).powf(1.5);
        let exact = 0.5 * (grad + l2) + 0.25 * grad * grad - l3 / 3.0;
        let e = pr.energy(&u);
        assert!(((e - exact) / exact).abs() < 1e-6, "{e} vs {exact}");
    }

    #[test]
    fn perturbed_energy_behaviour() {
        let pr = cubic_problem(0.5, 400, 12.0);
        let u = Field::from_fn(&pr.grid, |r| (-r * r).exp());
        assert_eq!(pr.energy_perturbed(&u), pr.energy(&u));
        let mut last = pr.energy(&u);
        for lambda in [0.1, 0.4, 0.9] {
            let p = pr.with_pert(pr.pert.with_strength(lambda, 0.0)).unwrap();
            let e = p.energy_perturbed(&u);
            assert!(e > last);
            last = e;
        }
        let p = pr.with_pert(pr.pert.with_strength(0.3, 0.7)).unwrap();
        let it = p.integrals(&u);
        let expected = p.energy(&u) + 0.3 / (2.0 * 1.05) * it.l2.powf(1.05) - 0.7 / 5.0 * it.r_int;
        assert!((p.energy_perturbed(&u) - expected).abs() < 1e-12);
    }

    #[test]
    fn one_signed_fields_have_zero_decomposition_gap() {
        let pr = cubic_problem(0.7, 400, 12.0);
        let u = Field::from_fn(&pr.grid, |r| (-r * r).exp());
        assert_eq!(pr.decomposition_gap(&u), 0.0);
        let v = u.scaled(-2.0);
        assert_eq!(pr.decomposition_gap(&v), 0.0);
    }

    #[test]
    fn pohozaev_needs_derivative_data() {
        let model = ModelParams::new(
            1.0,
            0.0,
            Potential::Tabulated {
                rho: vec![0.0, 100.0],
                values: vec![1.0, 1.0],
            },
            Nonlinearity::Power { p: 3.0 },
            3.0,
        )
        .unwrap();
        let pert = PerturbationParams::off(0.05, 5.0, &model).unwrap();
        let pr = Problem::new(model, pert, build_grid(10.0, 100).unwrap()).unwrap();
        let u = Field::from_fn(&pr.grid, |r| (-r * r).exp());
        assert!(matches!(
            pr.pohozaev_residual(&u),
            Err(Error::UnsupportedPotential(_))
        ));
        assert!(pr.energy_report(&u, 0.0).pohozaev_res.is_none());
    }

    #[test]
    fn report_satisfies_its_invariants() {
        let pr = cubic_problem(0.3, 400, 12.0);
        let pr = pr.with_pert(pr.pert.with_strength(0.2, 0.4)).unwrap();
        let u = Field::from_fn(&pr.grid, |r| (1.0 - r) * (-r * r).exp());
        let rep = pr.energy_report(&u, 0.0);
        assert!(rep.e_norm_sq >= pr.model.a * rep.grad_sq);
        assert_eq!(rep.sign_changes, 1);
        let it = pr.integrals(&u);
        let expected = rep.energy_i + 0.2 / (2.0 * 1.05) * rep.l2_sq.powf(1.05) - 0.4 / 5.0 * it.r_int;
        assert!((rep.energy_pert - expected).abs() < 1e-12);
        assert!(rep.cone_dist_plus > 0.0 && rep.cone_dist_minus > 0.0);
    }

    #[test]
    fn tabulated_potential_interpolates() {
        let pot = Potential::Tabulated {
            rho: vec![0.0, 1.0, 3.0],
            values: vec![2.0, 1.0, 3.0],
        };
        assert_eq!(pot.value(0.5), 1.5);
        assert_eq!(pot.value(2.0), 2.0);
        assert_eq!(pot.value(10.0), 3.0);
        assert!(pot.radial_virial(1.0).is_none());
    }
}
