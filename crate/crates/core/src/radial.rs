//! Radial discretization of ℝ³ truncated to the ball of radius `r_max`.
//!
//! Two families of quadrature live on a [`RadialGrid`]:
//!
//! * composite Simpson weights on `4πρ²dρ`, used by [`integrate`],
//!   [`lp_norm_pow`] and the other analysis helpers;
//! * the lumped mass `4πhρ_i²` and edge stiffness `4πρ_iρ_{i+1}/h` of the
//!   substitution `w = ρu`. These define the discrete energy the solvers
//!   descend. Its Euler–Lagrange equation is exactly the centered
//!   finite-difference form of `u'' + (2/ρ)u'`, which keeps the
//!   fixed-point operator, the energy and the strong residual consistent.
//!
//! The origin node carries zero mass and no stiffness; its value is fixed by
//! the symmetry row `Δu(0) ≈ 3u''(0) = 6(u_1 − u_0)/h²`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::fmt_f64;

pub const MIN_INTERVALS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    mass: Vec<f64>,
    edge: Vec<f64>,
}

/// Serializable description from which a grid is rebuilt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub r_max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<RadialGrid> {
        build_grid(self.r_max, self.n)
    }
}

pub fn build_grid(r_max: f64, n: usize) -> Result<RadialGrid> {
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(Error::config(format!(
            "grid.r_max must be positive and finite, got {r_max}"
        )));
    }
    if n < MIN_INTERVALS || !n.is_multiple_of(2) {
        return Err(Error::config(format!(
            "grid.n must be even and at least {MIN_INTERVALS}, got {n}"
        )));
    }
    let h = r_max / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();

    let weights = nodes
        .iter()
        .enumerate()
        .map(|(i, &rho)| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            4.0 * PI * h / 3.0 * c * rho * rho
        })
        .collect();

    let mass = nodes
        .iter()
        .enumerate()
        .map(|(i, &rho)| if i == n { 0.0 } else { 4.0 * PI * h * rho * rho })
        .collect();

    let edge = (0..n)
        .map(|i| 4.0 * PI * nodes[i] * nodes[i + 1] / h)
        .collect();

    Ok(RadialGrid {
        r_max,
        n,
        h,
        nodes,
        weights,
        mass,
        edge,
    })
}

impl RadialGrid {
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Number of intervals; the grid has `n + 1` nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Simpson weights for `4π∫₀^{r_max} g(ρ)ρ²dρ`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Lumped mass of the discrete energy (zero at the origin and at `r_max`).
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Edge stiffness `4πρ_iρ_{i+1}/h` for the interval `[ρ_i, ρ_{i+1}]`.
    pub fn edge(&self) -> &[f64] {
        &self.edge
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            r_max: self.r_max,
            n: self.n,
        }
    }

    pub fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                actual: values.len(),
            });
        }
        Ok(())
    }

    /// `Σ c_i (u_{i+1} − u_i)²`, the discrete `∫|∇u|²` of the energy.
    pub fn dirichlet_form(&self, u: &[f64]) -> f64 {
        self.edge
            .iter()
            .zip(u.windows(2))
            .map(|(c, w)| c * (w[1] - w[0]).powi(2))
            .sum()
    }

    /// Bilinear form associated with [`Self::dirichlet_form`].
    pub fn dirichlet_pair(&self, u: &[f64], v: &[f64]) -> f64 {
        self.edge
            .iter()
            .zip(u.windows(2).zip(v.windows(2)))
            .map(|(c, (a, b))| c * (a[1] - a[0]) * (b[1] - b[0]))
            .sum()
    }

    /// Stiffness matrix applied to `u`; entries 0 and n are left at zero.
    pub fn stiffness_apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n + 1];
        for i in 1..n {
            out[i] = self.edge[i - 1] * (u[i] - u[i - 1]) + self.edge[i] * (u[i] - u[i + 1]);
        }
        out
    }

    /// `Σ m_i g_i` with the lumped mass.
    pub fn mass_integral(&self, g: &[f64]) -> f64 {
        self.mass.iter().zip(g).map(|(m, v)| m * v).sum()
    }

    pub fn mass_integral_by(&self, u: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
        self.mass
            .iter()
            .zip(self.nodes.iter().zip(u))
            .map(|(m, (&rho, &v))| if *m == 0.0 { 0.0 } else { m * f(rho, v) })
            .sum()
    }
}

/// Nodal values of a radial function with the Dirichlet value at `r_max`
/// clamped to zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn zeros(grid: &RadialGrid) -> Self {
        Field(vec![0.0; grid.len()])
    }

    pub fn from_values(grid: &RadialGrid, mut values: Vec<f64>) -> Result<Self> {
        grid.check(&values)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                row: i,
                detail: "non-finite field value".into(),
            });
        }
        if let Some(last) = values.last_mut() {
            *last = 0.0;
        }
        Ok(Field(values))
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = grid.nodes().iter().map(|&rho| f(rho)).collect();
        values[grid.n()] = 0.0;
        Field(values)
    }

    /// Wraps values already known to satisfy the invariants.
    pub(crate) fn from_raw(mut values: Vec<f64>) -> Self {
        if let Some(last) = values.last_mut() {
            *last = 0.0;
        }
        Field(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// `alpha·self + beta·other`
    pub fn combine(&self, alpha: f64, other: &Field, beta: f64) -> Field {
        Field::from_raw(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field::from_raw(self.0.iter().map(|v| s * v).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Values of `self` (living on `from`) at the nodes of `to`, by
    /// four-point cubic interpolation. The field is continued evenly
    /// through the origin and by zero beyond `from.r_max()`.
    pub fn resample(&self, from: &RadialGrid, to: &RadialGrid) -> Field {
        let n = from.n() as isize;
        let at = |k: isize| -> f64 {
            let k = k.abs();
            if k >= n {
                0.0
            } else {
                self.0[k as usize]
            }
        };
        Field::from_fn(to, |rho| {
            let x = rho / from.h();
            if (x - x.round()).abs() < 1e-9 {
                return at(x.round() as isize);
            }
            let k = x.floor() as isize;
            if k >= n {
                return 0.0;
            }
            let t = x - k as f64;
            let (p0, p1, p2, p3) = (at(k - 1), at(k), at(k + 1), at(k + 2));
            // Lagrange weights on the nodes -1, 0, 1, 2
            let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
            let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
            let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
            let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
            w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
        })
    }

    /// Two-column `rho,u` CSV.
    pub fn to_csv(&self, grid: &RadialGrid) -> String {
        let mut out = String::from("rho,u\n");
        for (rho, u) in grid.nodes().iter().zip(&self.0) {
            let _ = writeln!(out, "{},{}", fmt_f64(*rho), fmt_f64(*u));
        }
        out
    }

    pub fn from_csv(text: &str, grid: &RadialGrid) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "rho,u" => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    column: 1,
                    detail: "expected header `rho,u`".into(),
                })
            }
        }
        let mut values = Vec::with_capacity(grid.len());
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let parse = |s: Option<&str>, column: usize| -> Result<f64> {
                s.and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse {
                        line: idx + 1,
                        column,
                        detail: format!("malformed number in `{line}`"),
                    })
            };
            let rho = parse(cols.next(), 1)?;
            let u = parse(cols.next(), 2)?;
            let expected = values.len() as f64 * grid.h();
            if (rho - expected).abs() > 1e-9 * grid.r_max().max(1.0) {
                return Err(Error::Parse {
                    line: idx + 1,
                    column: 1,
                    detail: format!("node {rho} does not match grid node {expected}"),
                });
            }
            values.push(u);
        }
        Field::from_values(grid, values)
    }
}

impl Deref for Field {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Simpson approximation of `4π∫₀^{r_max} g(ρ)ρ²dρ`.
pub fn integrate(g: &[f64], grid: &RadialGrid) -> Result<f64> {
    grid.check(g)?;
    Ok(grid.weights().iter().zip(g).map(|(w, v)| w * v).sum())
}

/// `4π∫(u′)²ρ²dρ` from edge differences weighted by exact shell volumes
/// `4π(ρ_{i+1}³ − ρ_i³)/3`.
pub fn grad_norm_sq(u: &[f64], grid: &RadialGrid) -> Result<f64> {
    grid.check(u)?;
    let h = grid.h();
    let nodes = grid.nodes();
    Ok(u.windows(2)
        .zip(nodes.windows(2))
        .map(|(w, r)| {
            let shell = 4.0 * PI * (r[1].powi(3) - r[0].powi(3)) / 3.0;
            shell * ((w[1] - w[0]) / h).powi(2)
        })
        .sum())
}

/// `∫|u|^q`, the q-th power of the `L^q` norm.
pub fn lp_norm_pow(u: &[f64], grid: &RadialGrid, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::config(format!("exponent q must be >= 1, got {q}")));
    }
    grid.check(u)?;
    Ok(grid
        .weights()
        .iter()
        .zip(u)
        .map(|(w, v)| w * v.abs().powf(q))
        .sum())
}

/// Additive sign split `u = u⁺ + u⁻` with `u⁺ ≥ 0 ≥ u⁻`.
pub fn split_signs(u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    u.iter().map(|&v| (v.max(0.0), v.min(0.0))).unzip()
}

pub fn split_field(u: &Field) -> (Field, Field) {
    let (p, m) = split_signs(u);
    (Field::from_raw(p), Field::from_raw(m))
}

/// Quartic bump `(1 − t²)²` on `[l, r]`, with `t` the affine coordinate
/// mapping the interval onto `[−1, 1]`; zero outside.
pub fn quartic_bump(rho: f64, l: f64, r: f64) -> f64 {
    if rho <= l || rho >= r {
        return 0.0;
    }
    let t = (2.0 * rho - l - r) / (r - l);
    let q = 1.0 - t * t;
    q * q
}

/// Counts strict sign changes between consecutive nonzero entries after
/// entries below `threshold` in magnitude are zeroed.
pub fn count_sign_changes(u: &[f64], threshold: f64) -> usize {
    let mut changes = 0;
    let mut last_sign = 0.0_f64;
    for &v in u {
        if v.abs() < threshold || v == 0.0 {
            continue;
        }
        let s = v.signum();
        if last_sign != 0.0 && s != last_sign {
            changes += 1;
        }
        last_sign = s;
    }
    changes
}
