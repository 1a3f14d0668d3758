//! Wronskians, Widder derivatives, the kernels `g_i(x, t)` and the Green's
//! function of a linear differential operator.
//!
//! A [`BasisFamily`] is an ordered family `u_0, ..., u_n` whose Wronskians
//! `W_i = W[u_0, ..., u_i]` are positive on the domain. Positivity is checked on
//! an equispaced validation grid at construction; it is not certified between
//! grid points.
//!
//! All determinants are formed explicitly and evaluated by LU with partial
//! pivoting. A determinant is treated as singular when its magnitude falls
//! below `floor * scale`, where `scale` is the product of the row max-norms of
//! the matrix.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcrep::{parse_float, FunctionSpec, Interval, SmoothFunction};
use crate::funcrep::UNBOUNDED_ORDER;
use crate::linalg::{lu_determinant, lu_solve, row_norm_scale};

pub const DEFAULT_WRONSKIAN_FLOOR: f64 = 1e-10;
pub const VALIDATION_GRID_POINTS: usize = 257;

/// Text form of a basis: `monomials:n`, `exp-basis:l0,l1,...` or
/// `custom:<spec>;<spec>;...`.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisSpec {
    Monomials(usize),
    ExpBasis(Vec<f64>),
    Custom(Vec<FunctionSpec>),
}

impl BasisSpec {
    pub fn member_specs(&self) -> Vec<FunctionSpec> {
        match self {
            BasisSpec::Monomials(n) => (0..=*n)
                .map(|i| {
                    let mut c = vec![0.0; i + 1];
                    c[i] = 1.0;
                    FunctionSpec::Poly(c)
                })
                .collect(),
            BasisSpec::ExpBasis(lambdas) => lambdas.iter().map(|l| FunctionSpec::Exp(*l)).collect(),
            BasisSpec::Custom(specs) => specs.clone(),
        }
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisSpec::Monomials(n) => write!(f, "monomials:{n}"),
            BasisSpec::ExpBasis(l) => {
                let parts: Vec<String> = l.iter().map(|v| v.to_string()).collect();
                write!(f, "exp-basis:{}", parts.join(","))
            }
            BasisSpec::Custom(specs) => {
                let parts: Vec<String> = specs.iter().map(|s| s.to_string()).collect();
                write!(f, "custom:{}", parts.join(";"))
            }
        }
    }
}

impl FromStr for BasisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(n) = s.strip_prefix("monomials:") {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad monomial order in `{s}`")))?;
            return Ok(BasisSpec::Monomials(n));
        }
        if let Some(body) = s.strip_prefix("exp-basis:") {
            let lambdas = body.split(',').map(parse_float).collect::<Result<Vec<_>>>()?;
            return Ok(BasisSpec::ExpBasis(lambdas));
        }
        if let Some(body) = s.strip_prefix("custom:") {
            let specs = body
                .split(';')
                .map(|p| p.parse::<FunctionSpec>())
                .collect::<Result<Vec<_>>>()?;
            return Ok(BasisSpec::Custom(specs));
        }
        Err(Error::Parse(format!("unknown basis spec `{s}`")))
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct WronskianMinimum {
    pub index: usize,
    pub min: f64,
    pub argmin: f64,
    /// Effective singularity threshold at the argmin.
    pub threshold: f64,
}

/// Per-index minima of `W_i` over the validation grid.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FamilyDiagnostics {
    pub minima: Vec<WronskianMinimum>,
    pub valid: bool,
}

/// Ordered family `u_0..u_n` satisfying the positive-Wronskian hypothesis.
#[derive(Debug, Clone)]
pub struct BasisFamily {
    members: Vec<SmoothFunction>,
    domain: Interval,
    grid: Vec<f64>,
    floor: f64,
    spec: Option<BasisSpec>,
    /// Terms of the near-diagonal kernel series, when every member has exact
    /// derivatives of all orders.
    series_terms: Option<usize>,
}

/// Terms kept in the near-diagonal expansion of a kernel.
const SERIES_TERMS: usize = 25;

fn series_budget(members: &[SmoothFunction]) -> Option<usize> {
    let mut degree = Some(0usize);
    for u in members {
        if u.max_order() != UNBOUNDED_ORDER || u.native_order() != UNBOUNDED_ORDER {
            return None;
        }
        degree = match (degree, u.spec()) {
            (Some(d), Some(FunctionSpec::Const(_))) => Some(d),
            (Some(d), Some(FunctionSpec::Poly(c))) => Some(d.max(c.len().saturating_sub(1))),
            (Some(d), Some(FunctionSpec::SquaredPoly { coeffs, .. })) => {
                Some(d.max(2 * coeffs.len().saturating_sub(1)))
            }
            (_, Some(_)) => None,
            (_, None) => return None,
        };
    }
    Some(degree.map_or(SERIES_TERMS, |d| (d + 1).min(SERIES_TERMS)))
}

/// Distance from the diagonal below which `∂_x^k g_i` is summed from its
/// Taylor series; the determinant form loses about `|x - t|^(i-k)` relative
/// accuracy to cancellation there.
fn series_radius(i: usize, k: usize) -> f64 {
    if i <= k {
        0.0
    } else {
        0.5 * 10f64.powf(-3.0 / (i - k) as f64)
    }
}

impl BasisFamily {
    pub fn new(members: Vec<SmoothFunction>, domain: Interval) -> Result<Self> {
        Self::with_options(members, domain, VALIDATION_GRID_POINTS, DEFAULT_WRONSKIAN_FLOOR)
    }

    pub fn with_options(
        members: Vec<SmoothFunction>,
        domain: Interval,
        grid_points: usize,
        floor: f64,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Invalid("basis family needs at least one member".into()));
        }
        if !(floor > 0.0) {
            return Err(Error::Invalid(format!("wronskian floor must be positive, got {floor}")));
        }
        let n = members.len() - 1;
        for (m, u) in members.iter().enumerate() {
            if u.domain() != domain {
                return Err(Error::Domain(format!("member u_{m} does not share the family domain")));
            }
            if u.max_order() < n + 1 {
                return Err(Error::Invalid(format!(
                    "member u_{m} has max order {} < {}",
                    u.max_order(),
                    n + 1
                )));
            }
        }
        let family = Self {
            members,
            domain,
            grid: domain.grid(grid_points.max(2)),
            floor,
            spec: None,
            series_terms: None,
        };
        let mut family = family;
        family.series_terms = series_budget(&family.members);
        let diag = family.validate();
        if !diag.valid {
            let bad = diag
                .minima
                .iter()
                .find(|m| !(m.min > 0.0 && m.min >= m.threshold))
                .unwrap_or(&diag.minima[0]);
            return Err(Error::SingularWronskian(format!(
                "W_{} reaches {} at x = {} (threshold {})",
                bad.index, bad.min, bad.argmin, bad.threshold
            )));
        }
        Ok(family)
    }

    pub fn from_spec(spec: &BasisSpec, domain: Interval) -> Result<Self> {
        let members = spec
            .member_specs()
            .into_iter()
            .map(|s| SmoothFunction::from_spec(s, domain))
            .collect();
        let mut family = Self::new(members, domain)?;
        family.spec = Some(spec.clone());
        Ok(family)
    }

    pub fn parse(spec: &str, domain: Interval) -> Result<Self> {
        Self::from_spec(&spec.parse()?, domain)
    }

    /// Top index `n` of `u_0..u_n`.
    pub fn order(&self) -> usize {
        self.members.len() - 1
    }

    pub fn members(&self) -> &[SmoothFunction] {
        &self.members
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn validation_grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn spec(&self) -> Option<&BasisSpec> {
        self.spec.as_ref()
    }

    /// The sub-family `u_0..u_n`.
    pub fn prefix(&self, n: usize) -> Result<BasisFamily> {
        if n > self.order() {
            return Err(Error::Invalid(format!(
                "prefix order {n} exceeds family order {}",
                self.order()
            )));
        }
        let spec = match &self.spec {
            Some(BasisSpec::Monomials(_)) => Some(BasisSpec::Monomials(n)),
            Some(BasisSpec::ExpBasis(l)) => Some(BasisSpec::ExpBasis(l[..=n].to_vec())),
            Some(BasisSpec::Custom(s)) => Some(BasisSpec::Custom(s[..=n].to_vec())),
            None => None,
        };
        Ok(BasisFamily {
            members: self.members[..=n].to_vec(),
            domain: self.domain,
            grid: self.grid.clone(),
            floor: self.floor,
            spec,
            series_terms: series_budget(&self.members[..=n]),
        })
    }

    fn check_point(&self, x: f64) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "x = {x} outside basis domain [{}, {}]",
                self.domain.lo, self.domain.hi
            )))
        }
    }

    /// Row-major Wronskian matrix of `u_0..u_i` at `x`: entry (j, m) = u_m^{(j)}(x).
    fn wronskian_matrix(&self, i: usize, x: f64) -> Result<Vec<f64>> {
        let size = i + 1;
        let mut a = Vec::with_capacity(size * size);
        for j in 0..size {
            for u in &self.members[..size] {
                a.push(u.eval(j, x)?);
            }
        }
        Ok(a)
    }

    /// `W_i(x)` together with its singularity threshold.
    fn wronskian_with_threshold(&self, i: usize, x: f64) -> Result<(f64, f64)> {
        let a = self.wronskian_matrix(i, x)?;
        let threshold = self.floor * row_norm_scale(&a, i + 1);
        Ok((lu_determinant(a, i + 1), threshold))
    }

    /// `W_i(x) = det[u_m^{(j)}(x)]_{j,m=0..i}`.
    pub fn wronskian(&self, i: usize, x: f64) -> Result<f64> {
        if i > self.order() {
            return Err(Error::Invalid(format!("wronskian index {i} exceeds order {}", self.order())));
        }
        self.check_point(x)?;
        Ok(self.wronskian_with_threshold(i, x)?.0)
    }

    fn nonsingular_wronskian(&self, i: usize, x: f64) -> Result<f64> {
        let (w, threshold) = self.wronskian_with_threshold(i, x)?;
        if !(w.abs() >= threshold) || w == 0.0 {
            return Err(Error::SingularWronskian(format!(
                "|W_{i}({x})| = {} below threshold {threshold}",
                w.abs()
            )));
        }
        Ok(w)
    }

    /// `L_i f(x) = W[u_0, ..., u_{i-1}, f](x) / W_{i-1}(x)`, with `L_0 f = f`.
    pub fn widder_derivative(&self, f: &SmoothFunction, i: usize, x: f64) -> Result<f64> {
        self.check_point(x)?;
        if i == 0 {
            return f.eval(0, x);
        }
        if i > self.order() + 1 {
            return Err(Error::Invalid(format!(
                "widder derivative index {i} exceeds n + 1 = {}",
                self.order() + 1
            )));
        }
        if f.max_order() < i {
            return Err(Error::Invalid(format!(
                "`{}` has max order {} < {i}",
                f.label(),
                f.max_order()
            )));
        }
        let denom = self.nonsingular_wronskian(i - 1, x)?;
        let size = i + 1;
        let mut a = Vec::with_capacity(size * size);
        for j in 0..size {
            for u in &self.members[..i] {
                a.push(u.eval(j, x)?);
            }
            a.push(f.eval(j, x)?);
        }
        Ok(lu_determinant(a, size) / denom)
    }

    /// `g_i(x, t)`: rows `u^{(j)}(t)` for `j < i` and a last row `u(x)`, divided
    /// by `W_i(t)`; `g_0(x, t) = u_0(x) / u_0(t)`.
    pub fn kernel_g(&self, i: usize, x: f64, t: f64) -> Result<f64> {
        self.kernel_g_dx(i, 0, x, t)
    }

    /// `d^k/dx^k g_i(x, t)`: the last row becomes `u^{(k)}(x)`.
    pub fn kernel_g_dx(&self, i: usize, k: usize, x: f64, t: f64) -> Result<f64> {
        if i > self.order() {
            return Err(Error::Invalid(format!("kernel index {i} exceeds order {}", self.order())));
        }
        self.check_point(x)?;
        self.check_point(t)?;
        if let Some(terms) = self.series_terms {
            if (x - t).abs() < series_radius(i, k) {
                return self.kernel_series(i, k, x, t, terms);
            }
        }
        let denom = self.nonsingular_wronskian(i, t)?;
        let size = i + 1;
        let mut a = Vec::with_capacity(size * size);
        for j in 0..i {
            for u in &self.members[..size] {
                a.push(u.eval(j, t)?);
            }
        }
        for u in &self.members[..size] {
            a.push(u.eval(k, x)?);
        }
        Ok(lu_determinant(a, size) / denom)
    }

    /// `∂_x^k g_i(x,t) = Σ_{j >= max(i,k)} D_j (x-t)^(j-k)/(j-k)!` with
    /// `D_j = ∂_x^j g_i(t,t)`: zero below `i`, one at `i`, and
    /// `Σ_m c_m u_m^(j)(t)` beyond, where `c` solves `M(t) c = e_i`.
    fn kernel_series(&self, i: usize, k: usize, x: f64, t: f64, terms: usize) -> Result<f64> {
        self.nonsingular_wronskian(i, t)?;
        let size = i + 1;
        let matrix = self.wronskian_matrix(i, t)?;
        let mut rhs = vec![0.0; size];
        rhs[i] = 1.0;
        let c = lu_solve(matrix, size, rhs)
            .ok_or_else(|| Error::SingularWronskian(format!("W_{i}({t}) has a zero pivot")))?;
        let d = x - t;
        let start = i.max(k);
        let mut sum = 0.0;
        let mut power = 1.0; // d^(j-k) / (j-k)!
        for j in k..start + terms.max(1) {
            if j >= start {
                let dj = if j == i {
                    1.0
                } else {
                    let mut acc = 0.0;
                    for (cm, u) in c.iter().zip(&self.members[..size]) {
                        acc += cm * u.eval(j, t)?;
                    }
                    acc
                };
                sum += dj * power;
            }
            power *= d / (j - k + 1) as f64;
        }
        Ok(sum)
    }

    /// Minimum of each `W_i` over the validation grid.
    pub fn validate(&self) -> FamilyDiagnostics {
        validate_members(&self.members, &self.grid, self.floor)
    }
}

/// Grid minima of `W_i` for `i = 0..n`; the family is valid when every
/// minimum is positive and above its scale-aware threshold.
pub fn validate_members(members: &[SmoothFunction], grid: &[f64], floor: f64) -> FamilyDiagnostics {
    let mut minima = Vec::with_capacity(members.len());
    let mut valid = true;
    for i in 0..members.len() {
        let size = i + 1;
        let mut best = WronskianMinimum { index: i, min: f64::INFINITY, argmin: f64::NAN, threshold: 0.0 };
        for &x in grid {
            let entries: Result<Vec<f64>> = (0..size)
                .flat_map(|j| members[..size].iter().map(move |u| u.eval(j, x)))
                .collect();
            let Ok(a) = entries else {
                best = WronskianMinimum { index: i, min: f64::NAN, argmin: x, threshold: f64::NAN };
                valid = false;
                break;
            };
            let threshold = floor * row_norm_scale(&a, size);
            let w = lu_determinant(a, size);
            if !(w > 0.0 && w >= threshold) {
                valid = false;
            }
            if w < best.min {
                best = WronskianMinimum { index: i, min: w, argmin: x, threshold };
            }
        }
        minima.push(best);
    }
    FamilyDiagnostics { minima, valid }
}

/// Green's function of `L = D^n + ...` built from a fundamental system
/// `y_1..y_n`: rows `y^{(j)}(t)` for `j <= n-2` and a last row `y(x)`, over the
/// Wronskian of the system at `t`.
///
/// Values for `x < t` are returned as given by the formula.
pub fn greens_function(solutions: &[SmoothFunction], x: f64, t: f64) -> Result<f64> {
    let n = solutions.len();
    if n == 0 {
        return Err(Error::Invalid("green's function needs at least one solution".into()));
    }
    let mut den = Vec::with_capacity(n * n);
    for j in 0..n {
        for y in solutions {
            den.push(y.eval(j, t)?);
        }
    }
    let threshold = DEFAULT_WRONSKIAN_FLOOR * row_norm_scale(&den, n);
    let mut num = den[..(n - 1) * n].to_vec();
    for y in solutions {
        num.push(y.eval(0, x)?);
    }
    let denom = lu_determinant(den, n);
    if denom == 0.0 || denom.abs() < threshold {
        return Err(Error::SingularWronskian(format!(
            "solution Wronskian at t = {t} is {denom} (threshold {threshold})"
        )));
    }
    Ok(lu_determinant(num, n) / denom)
}

/// Kernel tabulated on a tensor grid, bilinearly interpolated.
#[derive(Debug, Clone)]
pub struct GridKernel {
    xs: Vec<f64>,
    ts: Vec<f64>,
    values: Vec<f64>,
}

impl GridKernel {
    /// `values` is row-major with one row per `x`.
    pub fn new(xs: Vec<f64>, ts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || ts.len() < 2 || values.len() != xs.len() * ts.len() {
            return Err(Error::Invalid("grid kernel needs >= 2x2 nodes and matching values".into()));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&xs) || !increasing(&ts) {
            return Err(Error::Invalid("grid kernel nodes must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("grid kernel values must be finite".into()));
        }
        Ok(Self { xs, ts, values })
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        let (i, fx) = locate(&self.xs, x)?;
        let (j, ft) = locate(&self.ts, t)?;
        let m = self.ts.len();
        let v = |a: usize, b: usize| self.values[a * m + b];
        Ok((1.0 - fx) * ((1.0 - ft) * v(i, j) + ft * v(i, j + 1))
            + fx * ((1.0 - ft) * v(i + 1, j) + ft * v(i + 1, j + 1)))
    }
}

fn locate(nodes: &[f64], z: f64) -> Result<(usize, f64)> {
    let last = nodes.len() - 1;
    let slack = 1e-12 * (nodes[last] - nodes[0]);
    if z < nodes[0] - slack || z > nodes[last] + slack {
        return Err(Error::Domain(format!("{z} outside grid kernel range")));
    }
    let idx = match nodes.partition_point(|v| *v <= z) {
        0 => 0,
        p => (p - 1).min(last - 1),
    };
    let frac = ((z - nodes[idx]) / (nodes[idx + 1] - nodes[idx])).clamp(0.0, 1.0);
    Ok((idx, frac))
}

type KernelFn = Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>;

/// The kernel `Phi(x, t)` fed to the inequality engine.
#[derive(Clone)]
pub enum KernelHandle {
    Unit,
    Widder { family: Arc<BasisFamily>, index: usize },
    Greens { solutions: Arc<Vec<SmoothFunction>> },
    Grid(Arc<GridKernel>),
    Custom { label: String, f: KernelFn },
}

impl fmt::Debug for KernelHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl KernelHandle {
    pub fn widder(family: Arc<BasisFamily>) -> Self {
        let index = family.order();
        KernelHandle::Widder { family, index }
    }

    pub fn custom<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64) -> Result<f64> + Send + Sync + 'static,
    {
        KernelHandle::Custom { label: label.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        let v = match self {
            KernelHandle::Unit => 1.0,
            KernelHandle::Widder { family, index } => family.kernel_g(*index, x, t)?,
            KernelHandle::Greens { solutions } => greens_function(solutions, x, t)?,
            KernelHandle::Grid(g) => g.eval(x, t)?,
            KernelHandle::Custom { f, .. } => f(x, t)?,
        };
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("kernel value at ({x}, {t}) is not finite")));
        }
        Ok(v)
    }

    /// Order of vanishing on the diagonal `t = x`, when known.
    pub fn diagonal_order(&self) -> Option<usize> {
        match self {
            KernelHandle::Unit => Some(0),
            KernelHandle::Widder { index, .. } => Some(*index),
            KernelHandle::Greens { solutions } => Some(solutions.len().saturating_sub(1)),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            KernelHandle::Unit => "unit".into(),
            KernelHandle::Widder { family, index } => match family.spec() {
                Some(s) => format!("widder:{index}[{s}]"),
                None => format!("widder:{index}"),
            },
            KernelHandle::Greens { solutions } => {
                let labels: Vec<&str> = solutions.iter().map(|s| s.label()).collect();
                format!("greens:{}", labels.join(";"))
            }
            KernelHandle::Grid(_) => "custom-grid".into(),
            KernelHandle::Custom { label, .. } => format!("custom:{label}"),
        }
    }
}

/// Text form of a kernel choice: `unit`, `widder`, `widder:<i>` or
/// `greens:<spec>;<spec>;...`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Unit,
    Widder(Option<usize>),
    Greens(Vec<FunctionSpec>),
}

impl KernelSpec {
    /// Widder kernels take their family from `basis`.
    pub fn build(&self, basis: Option<&Arc<BasisFamily>>, domain: Interval) -> Result<KernelHandle> {
        match self {
            KernelSpec::Unit => Ok(KernelHandle::Unit),
            KernelSpec::Widder(index) => {
                let family = basis
                    .ok_or_else(|| Error::Invalid("widder kernel requires a basis".into()))?
                    .clone();
                let index = index.unwrap_or(family.order());
                if index > family.order() {
                    return Err(Error::Invalid(format!(
                        "kernel index {index} exceeds basis order {}",
                        family.order()
                    )));
                }
                Ok(KernelHandle::Widder { family, index })
            }
            KernelSpec::Greens(specs) => {
                let solutions = specs
                    .iter()
                    .map(|s| SmoothFunction::from_spec(s.clone(), domain))
                    .collect();
                Ok(KernelHandle::Greens { solutions: Arc::new(solutions) })
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Unit => write!(f, "unit"),
            KernelSpec::Widder(None) => write!(f, "widder"),
            KernelSpec::Widder(Some(i)) => write!(f, "widder:{i}"),
            KernelSpec::Greens(specs) => {
                let parts: Vec<String> = specs.iter().map(|s| s.to_string()).collect();
                write!(f, "greens:{}", parts.join(";"))
            }
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "unit" => return Ok(KernelSpec::Unit),
            "widder" => return Ok(KernelSpec::Widder(None)),
            _ => {}
        }
        if let Some(i) = s.strip_prefix("widder:") {
            let i = i
                .parse()
                .map_err(|_| Error::Parse(format!("bad widder kernel index in `{s}`")))?;
            return Ok(KernelSpec::Widder(Some(i)));
        }
        if let Some(body) = s.strip_prefix("greens:") {
            let specs = body
                .split(';')
                .map(|p| p.parse::<FunctionSpec>())
                .collect::<Result<Vec<_>>>()?;
            return Ok(KernelSpec::Greens(specs));
        }
        Err(Error::Parse(format!("unknown kernel spec `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcrep::builtin_family;

    fn monomials(n: usize) -> BasisFamily {
        BasisFamily::parse(&format!("monomials:{n}"), Interval::unit()).unwrap()
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn wronskian_examples() {
        let fam = monomials(2);
        for x in [0.0, 0.3, 1.0] {
            assert!((fam.wronskian(2, x).unwrap() - 2.0).abs() < 1e-14);
        }
        let c = BasisFamily::parse("custom:const:3.5", Interval::unit()).unwrap();
        assert_eq!(c.wronskian(0, 0.4).unwrap(), 3.5);
        let lin = monomials(1);
        assert_eq!(lin.wronskian(1, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn widder_derivative_examples() {
        let fam = monomials(3);
        let f = builtin_family("poly:0,0,0,0,1", Interval::unit()).unwrap();
        assert!((fam.widder_derivative(&f, 2, 1.0).unwrap() - 12.0).abs() < 1e-12);

        let u0 = fam.members()[0].clone();
        assert_eq!(fam.widder_derivative(&u0, 1, 0.4).unwrap(), 0.0);

        let e = BasisFamily::parse("custom:const:1;exp:1", Interval::new(-1.0, 1.0).unwrap()).unwrap();
        let f = builtin_family("exp:2", Interval::new(-1.0, 1.0).unwrap()).unwrap();
        assert!((e.widder_derivative(&f, 1, 0.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(e.widder_derivative(&f, 0, 0.5).unwrap(), 1f64.exp());
    }

    #[test]
    fn kernel_examples() {
        let fam = monomials(3);
        assert!((fam.kernel_g(2, 1.0, 0.0).unwrap() - 0.5).abs() < 1e-14);
        for i in 1..=3 {
            assert!(fam.kernel_g(i, 0.37, 0.37).unwrap().abs() < 1e-15);
        }
        let c = BasisFamily::parse("custom:const:2", Interval::unit()).unwrap();
        assert_eq!(c.kernel_g(0, 0.1, 0.9).unwrap(), 1.0);
    }

    #[test]
    fn kernel_x_derivative_drops_order() {
        let fam = monomials(3);
        // d/dx (x-t)^3/6 = (x-t)^2/2
        let d = fam.kernel_g_dx(3, 1, 0.8, 0.2).unwrap();
        assert!((d - 0.18).abs() < 1e-14, "{d}");
        // d^3/dx^3 g_3 = 1 everywhere
        assert!((fam.kernel_g_dx(3, 3, 0.5, 0.5).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn greens_function_examples() {
        let dom = Interval::new(-4.0, 4.0).unwrap();
        let d2 = vec![builtin_family("const:1", dom).unwrap(), builtin_family("poly:0,1", dom).unwrap()];
        assert!((greens_function(&d2, 2.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(greens_function(&d2, 1.5, 1.5).unwrap(), 0.0);
        // below the diagonal the formula value is returned untouched
        assert!((greens_function(&d2, 1.0, 2.0).unwrap() + 1.0).abs() < 1e-14);

        let osc = vec![builtin_family("sin:1", dom).unwrap(), builtin_family("cos:1", dom).unwrap()];
        let g = greens_function(&osc, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        assert!((g - 1.0).abs() < 1e-14);
        let g = greens_function(&osc, 1.3, 0.4).unwrap();
        assert!((g - 0.9f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn greens_function_singular_system() {
        let dom = Interval::unit();
        let dup = vec![builtin_family("exp:1", dom).unwrap(), builtin_family("exp:1", dom).unwrap()];
        assert!(matches!(greens_function(&dup, 0.5, 0.2), Err(Error::SingularWronskian(_))));
    }

    #[test]
    fn validate_monomials_reports_factorial_products() {
        let fam = monomials(3);
        let diag = fam.validate();
        assert!(diag.valid);
        let expected = [1.0, 1.0, 2.0, 12.0];
        for (m, e) in diag.minima.iter().zip(expected) {
            assert!((m.min - e).abs() < 1e-12, "{m:?}");
        }
    }

    #[test]
    fn validation_rejects_bad_families() {
        let dom = Interval::unit();
        let flipped = vec![builtin_family("const:1", dom).unwrap(), builtin_family("poly:0,-1", dom).unwrap()];
        assert!(matches!(BasisFamily::new(flipped, dom), Err(Error::SingularWronskian(_))));

        let sym = Interval::new(-1.0, 1.0).unwrap();
        let x = vec![builtin_family("poly:0,1", sym).unwrap()];
        assert!(matches!(
            BasisFamily::with_options(x, sym, 257, 1e-12),
            Err(Error::SingularWronskian(_))
        ));
    }

    #[test]
    fn singular_wronskian_off_grid() {
        // u_0 = (x - 0.5)^2 is positive at both nodes of a 2-point grid.
        let dom = Interval::unit();
        let members = vec![builtin_family("poly:0.25,-1,1", dom).unwrap()];
        let fam = BasisFamily::with_options(members, dom, 2, 1e-10).unwrap();
        let f = builtin_family("poly:0,0,1", dom).unwrap();
        assert!(matches!(fam.widder_derivative(&f, 1, 0.5), Err(Error::SingularWronskian(_))));
        assert!(matches!(fam.kernel_g(0, 0.2, 0.5), Err(Error::SingularWronskian(_))));
    }

    #[test]
    fn monomial_reduction_small_grid() {
        let fam = monomials(5);
        let grid = Interval::unit().grid(11);
        for i in 0..=5 {
            for &x in &grid {
                for &t in &grid {
                    let g = fam.kernel_g(i, x, t).unwrap();
                    let exact = (x - t).powi(i as i32) / factorial(i);
                    assert!((g - exact).abs() < 1e-9, "i={i} x={x} t={t}");
                }
            }
        }
    }

    #[test]
    fn spec_parsing() {
        for s in ["monomials:3", "exp-basis:0.5,1", "custom:const:1;poly:0,1"] {
            assert_eq!(s.parse::<BasisSpec>().unwrap().to_string(), s);
        }
        assert!("monomials:x".parse::<BasisSpec>().is_err());
        assert!("splines:3".parse::<BasisSpec>().is_err());
        for s in ["unit", "widder", "widder:2", "greens:const:1;poly:0,1"] {
            assert_eq!(s.parse::<KernelSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn kernel_handles() {
        let fam = Arc::new(monomials(2));
        let k = KernelSpec::Widder(None).build(Some(&fam), Interval::unit()).unwrap();
        assert!((k.eval(1.0, 0.0).unwrap() - 0.5).abs() < 1e-14);
        let g = "greens:const:1;poly:0,1"
            .parse::<KernelSpec>()
            .unwrap()
            .build(None, Interval::unit())
            .unwrap();
        assert!((g.eval(0.75, 0.25).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(KernelHandle::Unit.eval(0.2, 0.9).unwrap(), 1.0);
        assert!(KernelSpec::Widder(None).build(None, Interval::unit()).is_err());

        let grid = GridKernel::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let gk = KernelHandle::Grid(Arc::new(grid));
        assert!((gk.eval(0.5, 0.5).unwrap() - 1.5).abs() < 1e-15);
        assert!(gk.eval(1.5, 0.5).is_err());
    }

    #[test]
    fn kernels_keep_relative_accuracy_near_the_diagonal() {
        let fam = BasisFamily::parse("exp-basis:0.5,1.7", Interval::unit()).unwrap();
        let t = 0.3;
        for d in [1e-12f64, 1e-7, 1e-3, 0.02, 0.4] {
            let d = (t + d) - t;
            let exact = ((1.7 * d).exp_m1() - (0.5 * d).exp_m1()) / 1.2;
            let g = fam.kernel_g(1, t + d, t).unwrap();
            assert!((g - exact).abs() <= 1e-12 * exact, "d={d}: {g} vs {exact}");
            let dg = fam.kernel_g_dx(1, 1, t + d, t).unwrap();
            let dexact = (1.7 * (1.7 * d).exp() - 0.5 * (0.5 * d).exp()) / 1.2;
            assert!((dg - dexact).abs() <= 1e-12 * dexact, "d={d}");
        }
        let mono = BasisFamily::parse("monomials:4", Interval::unit()).unwrap();
        for d in [1e-10f64, 1e-4, 0.05, 0.5] {
            let d = (0.2 + d) - 0.2;
            for i in 0..=4usize {
                let exact = d.powi(i as i32) / (1..=i).map(|v| v as f64).product::<f64>();
                let g = mono.kernel_g(i, 0.2 + d, 0.2).unwrap();
                assert!((g - exact).abs() <= 1e-12 * exact, "i={i} d={d}: {g} vs {exact}");
            }
        }
    }
}
