//! Scalar functions on an interval together with their derivative stacks.
//!
//! Built-in families (`const`, `poly`, `exp`, `sin`, `cos`, `tent`) carry exact
//! derivatives. Functions assembled from closures may provide only the first few
//! orders natively; higher orders are then estimated by Richardson-extrapolated
//! finite differences (see [`numeric_derivative`]).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest derivative order the finite-difference fallback will serve.
pub const MAX_FD_ORDER: usize = 6;

/// Marker for "every order is available".
pub const UNBOUNDED_ORDER: usize = usize::MAX;

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("interval bounds must be finite: [{lo}, {hi}]")));
        }
        if lo >= hi {
            return Err(Error::Domain(format!("interval requires lo < hi: [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    /// Membership with a relative slack of `1e-12 * span`.
    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * self.span().max(1.0);
        x >= self.lo - slack && x <= self.hi + slack
    }

    /// `n` equispaced points including both endpoints.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        equispaced(self.lo, self.hi, n)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected lo:hi, got `{s}`")))?;
        Interval::new(parse_float(lo)?, parse_float(hi)?)
    }
}

pub fn equispaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

pub fn parse_float(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite number: `{s}`")));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeKind {
    ExactDerivatives,
    FiniteDifferenceFallback,
}

/// Parsed form of the function grammar.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    Const(f64),
    /// Coefficients from low to high degree.
    Poly(Vec<f64>),
    Exp(f64),
    Sin(f64),
    Cos(f64),
    /// Piecewise-linear tent on `[0, a]` peaking at `a/2`.
    Tent(f64),
    /// `p(x)^2 + shift`, nonnegative whenever `shift >= 0`.
    SquaredPoly { coeffs: Vec<f64>, shift: f64 },
}

impl FunctionSpec {
    pub fn max_order(&self) -> usize {
        match self {
            FunctionSpec::Tent(_) => 1,
            _ => UNBOUNDED_ORDER,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            FunctionSpec::Tent(a) => vec![a / 2.0],
            _ => Vec::new(),
        }
    }

    /// The domain a tent lives on; other families are unrestricted.
    pub fn natural_domain(&self) -> Option<Interval> {
        match self {
            FunctionSpec::Tent(a) => Interval::new(0.0, *a).ok(),
            _ => None,
        }
    }

    /// k-th derivative at `x`.
    pub fn derivative(&self, k: usize, x: f64) -> f64 {
        match self {
            FunctionSpec::Const(c) => {
                if k == 0 {
                    *c
                } else {
                    0.0
                }
            }
            FunctionSpec::Poly(coeffs) => poly_derivative(coeffs, k, x),
            FunctionSpec::SquaredPoly { coeffs, shift } => {
                // Leibniz rule on p * p
                let mut acc = if k == 0 { *shift } else { 0.0 };
                let mut binom = 1.0;
                for j in 0..=k {
                    acc += binom * poly_derivative(coeffs, j, x) * poly_derivative(coeffs, k - j, x);
                    binom = binom * (k - j) as f64 / (j + 1) as f64;
                }
                acc
            }
            FunctionSpec::Exp(lambda) => lambda.powi(k as i32) * (lambda * x).exp(),
            FunctionSpec::Sin(omega) => omega.powi(k as i32) * trig_cycle(omega * x, k, true),
            FunctionSpec::Cos(omega) => omega.powi(k as i32) * trig_cycle(omega * x, k, false),
            FunctionSpec::Tent(a) => {
                let mid = a / 2.0;
                match k {
                    0 => {
                        if x <= mid {
                            x
                        } else {
                            a - x
                        }
                    }
                    1 => {
                        if x < mid {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    _ => 0.0,
                }
            }
        }
    }
}

// sin/cos derivatives cycle with period 4.
fn trig_cycle(arg: f64, k: usize, is_sin: bool) -> f64 {
    let (s, c) = arg.sin_cos();
    let idx = if is_sin { k % 4 } else { (k + 1) % 4 };
    match idx {
        0 => s,
        1 => c,
        2 => -s,
        _ => -c,
    }
}

fn poly_derivative(coeffs: &[f64], k: usize, x: f64) -> f64 {
    if k >= coeffs.len() {
        return 0.0;
    }
    // Horner over the differentiated coefficients c_j * j!/(j-k)!
    let mut acc = 0.0;
    for j in (k..coeffs.len()).rev() {
        let mut factor = 1.0;
        for m in (j - k + 1)..=j {
            factor *= m as f64;
        }
        acc = acc * x + coeffs[j] * factor;
    }
    acc
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Const(c) => write!(f, "const:{c}"),
            FunctionSpec::Poly(coeffs) => {
                write!(f, "poly:")?;
                for (i, c) in coeffs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            FunctionSpec::SquaredPoly { coeffs, shift } => {
                write!(f, "sqpoly:{shift}:")?;
                for (i, c) in coeffs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            FunctionSpec::Exp(l) => write!(f, "exp:{l}"),
            FunctionSpec::Sin(w) => write!(f, "sin:{w}"),
            FunctionSpec::Cos(w) => write!(f, "cos:{w}"),
            FunctionSpec::Tent(a) => write!(f, "tent:{a}"),
        }
    }
}

impl FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, body) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("function spec needs `tag:value`, got `{s}`")))?;
        let spec = match tag {
            "const" => FunctionSpec::Const(parse_float(body)?),
            "poly" => {
                let coeffs = body
                    .split(',')
                    .map(parse_float)
                    .collect::<Result<Vec<_>>>()?;
                FunctionSpec::Poly(coeffs)
            }
            "sqpoly" => {
                let (shift, coeffs) = body
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("sqpoly needs `sqpoly:shift:c0,c1,...`, got `{s}`")))?;
                let coeffs = coeffs.split(',').map(parse_float).collect::<Result<Vec<_>>>()?;
                FunctionSpec::SquaredPoly { coeffs, shift: parse_float(shift)? }
            }
            "exp" => FunctionSpec::Exp(parse_float(body)?),
            "sin" => FunctionSpec::Sin(parse_float(body)?),
            "cos" => FunctionSpec::Cos(parse_float(body)?),
            "tent" => {
                let a = parse_float(body)?;
                if a <= 0.0 {
                    return Err(Error::Parse(format!("tent width must be positive: `{s}`")));
                }
                FunctionSpec::Tent(a)
            }
            other => return Err(Error::Parse(format!("unknown function family `{other}`"))),
        };
        Ok(spec)
    }
}

type Evaluator = Arc<dyn Fn(usize, f64) -> Result<f64> + Send + Sync>;

/// A scalar function on an interval with derivatives up to `max_order`.
///
/// Orders up to `native_order` come straight from the evaluator; orders above
/// it (and at most `max_order`) are estimated by finite differences of the
/// highest native order.
#[derive(Clone)]
pub struct SmoothFunction {
    domain: Interval,
    max_order: usize,
    native_order: usize,
    eval: Evaluator,
    spec: Option<FunctionSpec>,
    breakpoints: Vec<f64>,
    label: String,
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFunction")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("max_order", &self.max_order)
            .field("native_order", &self.native_order)
            .finish()
    }
}

impl SmoothFunction {
    pub fn from_spec(spec: FunctionSpec, domain: Interval) -> Self {
        let label = spec.to_string();
        let max_order = spec.max_order();
        let breakpoints = spec
            .breakpoints()
            .into_iter()
            .filter(|b| *b > domain.lo && *b < domain.hi)
            .collect();
        let inner = spec.clone();
        Self {
            domain,
            max_order,
            native_order: max_order,
            eval: Arc::new(move |k, x| Ok(inner.derivative(k, x))),
            spec: Some(spec),
            breakpoints,
            label,
        }
    }

    /// Wraps an evaluator that serves orders `0..=native_order`. Orders up to
    /// `max_order` beyond that use the finite-difference fallback.
    pub fn from_closure<F>(
        domain: Interval,
        native_order: usize,
        max_order: usize,
        label: impl Into<String>,
        f: F,
    ) -> Self
    where
        F: Fn(usize, f64) -> Result<f64> + Send + Sync + 'static,
    {
        let max_order = if native_order == UNBOUNDED_ORDER {
            UNBOUNDED_ORDER
        } else {
            max_order.max(native_order).min(native_order + MAX_FD_ORDER)
        };
        Self {
            domain,
            max_order,
            native_order,
            eval: Arc::new(f),
            spec: None,
            breakpoints: Vec::new(),
            label: label.into(),
        }
    }

    pub fn constant(c: f64, domain: Interval) -> Self {
        Self::from_spec(FunctionSpec::Const(c), domain)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn native_order(&self) -> usize {
        self.native_order
    }

    pub fn kind(&self) -> DerivativeKind {
        if self.native_order >= self.max_order {
            DerivativeKind::ExactDerivatives
        } else {
            DerivativeKind::FiniteDifferenceFallback
        }
    }

    pub fn spec(&self) -> Option<&FunctionSpec> {
        self.spec.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    /// k-th derivative at `x`.
    pub fn eval(&self, k: usize, x: f64) -> Result<f64> {
        if k > self.max_order {
            return Err(Error::Domain(format!(
                "order {k} exceeds max order {} of `{}`",
                self.max_order, self.label
            )));
        }
        if !self.domain.contains(x) {
            return Err(Error::Domain(format!(
                "x = {x} outside domain [{}, {}] of `{}`",
                self.domain.lo, self.domain.hi, self.label
            )));
        }
        let value = if k <= self.native_order {
            (self.eval)(k, x)?
        } else {
            let base = self.native_order;
            let g = |z: f64| (self.eval)(base, z);
            richardson_derivative(&g, self.domain, k - base, x, default_step(k - base, x))?.value
        };
        if !value.is_finite() {
            return Err(Error::Evaluation(format!(
                "`{}` order {k} at x = {x} is not finite",
                self.label
            )));
        }
        Ok(value)
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.eval(0, x)
    }

    /// The function `x -> f^{(k)}(x)` as a new [`SmoothFunction`].
    pub fn derivative(&self, k: usize) -> Result<SmoothFunction> {
        if k > self.max_order {
            return Err(Error::Domain(format!(
                "cannot take derivative {k} of `{}` (max order {})",
                self.label, self.max_order
            )));
        }
        let spec = match &self.spec {
            Some(FunctionSpec::Poly(c)) => {
                let d: Vec<f64> = (k..c.len())
                    .map(|j| c[j] * ((j - k + 1)..=j).map(|m| m as f64).product::<f64>())
                    .collect();
                Some(FunctionSpec::Poly(if d.is_empty() { vec![0.0] } else { d }))
            }
            Some(FunctionSpec::Const(c)) => Some(FunctionSpec::Const(if k == 0 { *c } else { 0.0 })),
            _ => None,
        };
        if let Some(spec) = spec {
            return Ok(SmoothFunction::from_spec(spec, self.domain));
        }
        let parent = self.clone();
        let shift = |o: usize| if o == UNBOUNDED_ORDER { o } else { o - k };
        Ok(SmoothFunction {
            domain: self.domain,
            max_order: shift(self.max_order),
            native_order: if self.native_order >= k { shift(self.native_order) } else { 0 },
            eval: Arc::new(move |j, x| parent.eval(j + k, x)),
            spec: None,
            breakpoints: self.breakpoints.clone(),
            label: format!("d{k}({})", self.label),
        })
    }

    /// `c * f`, keeping the polynomial spec when there is one.
    pub fn scaled(&self, c: f64) -> SmoothFunction {
        if let Some(FunctionSpec::Poly(coeffs)) = &self.spec {
            let spec = FunctionSpec::Poly(coeffs.iter().map(|v| v * c).collect());
            return SmoothFunction::from_spec(spec, self.domain).with_breakpoints(self.breakpoints.clone());
        }
        let parent = self.clone();
        SmoothFunction {
            domain: self.domain,
            max_order: self.max_order,
            native_order: self.native_order,
            eval: Arc::new(move |k, x| Ok(c * parent.eval(k, x)?)),
            spec: None,
            breakpoints: self.breakpoints.clone(),
            label: format!("{c}*({})", self.label),
        }
    }

    /// `a f + b g` on the shared domain.
    pub fn linear_combination(a: f64, f: &SmoothFunction, b: f64, g: &SmoothFunction) -> Result<SmoothFunction> {
        if f.domain != g.domain {
            return Err(Error::Domain("linear combination of functions on different domains".into()));
        }
        let (f2, g2) = (f.clone(), g.clone());
        let mut breakpoints: Vec<f64> = f.breakpoints.iter().chain(g.breakpoints.iter()).copied().collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Ok(SmoothFunction {
            domain: f.domain,
            max_order: f.max_order.min(g.max_order),
            native_order: f.native_order.min(g.native_order),
            eval: Arc::new(move |k, x| Ok(a * f2.eval(k, x)? + b * g2.eval(k, x)?)),
            spec: None,
            breakpoints,
            label: format!("{a}*({}) + {b}*({})", f.label, g.label),
        })
    }
}

/// Parses a function spec and restricts it to `domain`.
pub fn builtin_family(spec: &str, domain: Interval) -> Result<SmoothFunction> {
    let parsed: FunctionSpec = spec.parse()?;
    Ok(SmoothFunction::from_spec(parsed, domain))
}

/// Parses a function spec on its natural domain (tents) or on `fallback`.
pub fn builtin_on_natural_domain(spec: &str, fallback: Interval) -> Result<SmoothFunction> {
    let parsed: FunctionSpec = spec.parse()?;
    let domain = parsed.natural_domain().unwrap_or(fallback);
    Ok(SmoothFunction::from_spec(parsed, domain))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeEstimate {
    pub value: f64,
    /// Difference between the last two extrapolants.
    pub error: f64,
}

/// Default base step for a k-th derivative estimate at `x`.
///
/// Balances the O(h^6) truncation left after two Richardson levels against the
/// O(eps / h^k) round-off of the finest stencil.
pub fn default_step(k: usize, x: f64) -> f64 {
    2.0 * f64::EPSILON.powf(1.0 / (k as f64 + 6.0)) * x.abs().max(1.0)
}

/// Central-difference estimate of `f^{(k)}(x)` with two Richardson levels.
///
/// Near an endpoint the stencil is shifted to a one-sided form, evaluated at
/// `h0` and at a few longer steps. `h0` is the coarsest central step.
pub fn numeric_derivative(f: &SmoothFunction, k: usize, x: f64, h0: f64) -> Result<DerivativeEstimate> {
    if !f.domain.contains(x) {
        return Err(Error::Domain(format!("x = {x} outside domain of `{}`", f.label)));
    }
    let g = |z: f64| f.eval(0, z);
    richardson_derivative(&g, f.domain, k, x, h0)
}

pub(crate) fn richardson_derivative<G>(
    g: &G,
    domain: Interval,
    k: usize,
    x: f64,
    h0: f64,
) -> Result<DerivativeEstimate>
where
    G: Fn(f64) -> Result<f64>,
{
    if k == 0 {
        return Ok(DerivativeEstimate { value: g(x)?, error: 0.0 });
    }
    if k > MAX_FD_ORDER {
        return Err(Error::Domain(format!(
            "finite-difference order {k} exceeds cap {MAX_FD_ORDER}"
        )));
    }
    if !(h0 > 0.0 && h0.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {h0}")));
    }

    let base = Stencil::place(domain, k, x, h0, 1.0)?;
    if base.centered {
        return base.extrapolate(g, x);
    }
    // One-sided weights are large, so round-off can outgrow truncation here;
    // keep whichever step gives the smallest Richardson error.
    let mut best = base.extrapolate(g, x)?;
    for stretch in ONE_SIDED_STRETCHES {
        let est = Stencil::place(domain, k, x, h0, stretch)?.extrapolate(g, x)?;
        if est.error < best.error {
            best = est;
        }
    }
    Ok(best)
}

/// Longer one-sided steps tried besides `h0`.
const ONE_SIDED_STRETCHES: [f64; 2] = [2.0, 4.0];

/// Stencil offsets (in units of h) plus the two leading error orders.
struct Stencil {
    order: usize,
    step: f64,
    centered: bool,
    offsets: Vec<f64>,
    weights: Vec<f64>,
    orders: (usize, usize),
}

impl Stencil {
    fn place(domain: Interval, k: usize, x: f64, h0: f64, stretch: f64) -> Result<Self> {
        let h = h0;
        let central_points = k + 1;
        let half = k as f64 / 2.0;
        let left_room = (x - domain.lo) / h;
        let right_room = (domain.hi - x) / h;
        if left_room >= half && right_room >= half {
            let offsets: Vec<f64> = (0..central_points).map(|j| j as f64 - half).collect();
            let weights = fornberg_weights(&offsets, k);
            return Ok(Self { order: k, step: h, centered: true, offsets, weights, orders: (2, 4) });
        }
        // Short domains shrink the step to fit.
        let points = k + 6;
        let width = (points - 1) as f64;
        let h = (h0 * stretch).min(domain.span() / width);
        let (left_room, right_room) = ((x - domain.lo) / h, (domain.hi - x) / h);
        // Shift so the stencil [x - c h, x + (width - c) h] lies in the domain.
        let c = left_room.min(width).max(width - right_room).max(0.0);
        let offsets: Vec<f64> = (0..points).map(|j| j as f64 - c).collect();
        let weights = fornberg_weights(&offsets, k);
        Ok(Self { order: k, step: h, centered: false, offsets, weights, orders: (points - k, points - k + 1) })
    }

    /// Three levels `h, h/2, h/4` combined by two Richardson steps.
    fn extrapolate<G>(&self, g: &G, x: f64) -> Result<DerivativeEstimate>
    where
        G: Fn(f64) -> Result<f64>,
    {
        let h0 = self.step;
        let estimates = [h0, h0 / 2.0, h0 / 4.0]
            .iter()
            .map(|&h| self.apply(g, x, h))
            .collect::<Result<Vec<f64>>>()?;
        let (q0, q1) = self.orders;
        let f0 = 2f64.powi(q0 as i32);
        let f1 = 2f64.powi(q1 as i32);
        let r10 = (f0 * estimates[1] - estimates[0]) / (f0 - 1.0);
        let r11 = (f0 * estimates[2] - estimates[1]) / (f0 - 1.0);
        let r2 = (f1 * r11 - r10) / (f1 - 1.0);
        if !r2.is_finite() {
            return Err(Error::Evaluation(format!("non-finite derivative estimate at x = {x}")));
        }
        Ok(DerivativeEstimate { value: r2, error: (r2 - r11).abs() })
    }

    fn apply<G>(&self, g: &G, x: f64, h: f64) -> Result<f64>
    where
        G: Fn(f64) -> Result<f64>,
    {
        let values = self
            .offsets
            .iter()
            .map(|o| {
                let v = g(x + o * h)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Evaluation(format!("non-finite value at x = {}", x + o * h)))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        // The weights sum to zero; differencing against one sample keeps their
        // rounding from leaking the function's level into the result.
        let base = values[0];
        let acc: f64 = values.iter().zip(&self.weights).map(|(v, w)| w * (v - base)).sum();
        Ok(acc / h.powi(self.order as i32))
    }
}

/// Finite-difference weights for the m-th derivative at 0 on the given nodes
/// (Fornberg's recursion).
fn fornberg_weights(nodes: &[f64], m: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i];
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}
