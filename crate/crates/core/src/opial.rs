//! Weighted Opial-type inequalities for a general nonnegative kernel `Φ`.
//!
//! Given `y`, `h` with `|y(s)| <= |∫_a^s Φ(s,t)|h(t)| dt|`, weights `u >= 0`,
//! `v > 0` and exponents `(α, β, r)`, the left functional
//! `|∫_a^x u |y|^β |h|^α|` is compared with `C(x) |∫_a^x v |h|^r|^((α+β)/r)`,
//! where
//!
//! ```text
//! P(s) = |∫_a^s v(t)^(-1/(r-1)) Φ(s,t)^(r/(r-1)) dt|
//! C(x) = (α/(α+β))^(α/r) |∫_a^x (u^r v^-α)^(1/(r-α)) P^(β(r-1)/(r-α)) ds|^((r-α)/r)
//! ```
//!
//! The exponent triple selects a regime, and the regime fixes whether the
//! comparison is an upper or a lower bound.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcrep::{equispaced, Interval, SmoothFunction};
use crate::quad::{integrate, integrate_nested, IntegralResult, QuadratureSpec};
use crate::widder::KernelHandle;

/// Search grid for sup norms in the extreme-case bound.
pub const SUP_NORM_GRID: usize = 1025;
/// Grid used for weight and floor checks.
pub const CHECK_GRID: usize = 257;
/// Scan grid for sign changes of the inner extreme-case integral.
pub const ZERO_SCAN_GRID: usize = 33;
/// Number of `P(s)` samples returned with a constant.
pub const P_SAMPLE_COUNT: usize = 11;
/// Kernel values in `[-KERNEL_ROUNDOFF, 0)` are read as zero.
pub const KERNEL_ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentTriple {
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
}

impl ExponentTriple {
    pub fn new(alpha: f64, beta: f64, r: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && r.is_finite()) {
            return Err(Error::Invalid(format!("exponents must be finite: ({alpha}, {beta}, {r})")));
        }
        Ok(Self { alpha, beta, r })
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeTag {
    #[serde(rename = "MAIN")]
    Main,
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
    IX,
    #[serde(rename = "UNCLASSIFIED")]
    Unclassified,
}

impl RegimeTag {
    pub const NUMBERED: [RegimeTag; 9] = [
        RegimeTag::I,
        RegimeTag::II,
        RegimeTag::III,
        RegimeTag::IV,
        RegimeTag::V,
        RegimeTag::VI,
        RegimeTag::VII,
        RegimeTag::VIII,
        RegimeTag::IX,
    ];

    pub fn direction(self) -> Direction {
        use RegimeTag::*;
        match self {
            Main | I | II | III => Direction::UpperBound,
            IV | V | VI | VII | VIII | IX => Direction::LowerBound,
            Unclassified => Direction::NotApplicable,
        }
    }

    pub fn as_str(self) -> &'static str {
        use RegimeTag::*;
        match self {
            Main => "MAIN",
            I => "I",
            II => "II",
            III => "III",
            IV => "IV",
            V => "V",
            VI => "VI",
            VII => "VII",
            VIII => "VIII",
            IX => "IX",
            Unclassified => "UNCLASSIFIED",
        }
    }

    /// Whether `classified` is an acceptable classification for an instance
    /// drawn for `self`. Regime I and MAIN describe the same set.
    pub fn admits(self, classified: RegimeTag) -> bool {
        self == classified || (self == RegimeTag::I && classified == RegimeTag::Main)
    }
}

impl fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use RegimeTag::*;
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "MAIN" => Main,
            "I" => I,
            "II" => II,
            "III" => III,
            "IV" => IV,
            "V" => V,
            "VI" => VI,
            "VII" => VII,
            "VIII" => VIII,
            "IX" => IX,
            "UNCLASSIFIED" => Unclassified,
            other => return Err(Error::Parse(format!("unknown regime `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "upper-bound")]
    UpperBound,
    #[serde(rename = "lower-bound")]
    LowerBound,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::UpperBound => "upper-bound",
            Direction::LowerBound => "lower-bound",
            Direction::NotApplicable => "n/a",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "upper-bound" | "upper" => Ok(Direction::UpperBound),
            "lower-bound" | "lower" => Ok(Direction::LowerBound),
            "n/a" => Ok(Direction::NotApplicable),
            other => Err(Error::Parse(format!("unknown direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub direction: Direction,
}

impl From<RegimeTag> for Regime {
    fn from(tag: RegimeTag) -> Self {
        Regime { tag, direction: tag.direction() }
    }
}

/// First matching regime: MAIN, then (i) to (ix) in order.
pub fn classify_regime(e: &ExponentTriple) -> Regime {
    let (a, b, r) = (e.alpha, e.beta, e.r);
    let tag = if r > 1f64.max(a) && a > 0.0 && b > 0.0 {
        RegimeTag::Main
    } else if r > 1.0 && b > 0.0 && 0.0 < a && a < r {
        RegimeTag::I
    } else if r < a && a < 0.0 && b < 0.0 {
        RegimeTag::II
    } else if -a < b && b < 0.0 && 0.0 < a && a < r && r < 1.0 {
        RegimeTag::III
    } else if b > 0.0 && 0.0 < r && r < a.min(1.0) {
        RegimeTag::IV
    } else if a < 0.0 && 0.0 < r && r < 1.0 && 0.0 < b && b < -a {
        RegimeTag::V
    } else if b < 0.0 && a < 0.0 && r > 1.0 {
        RegimeTag::VI
    } else if 1.0 < r && r < a && -a < b && b < 0.0 {
        RegimeTag::VII
    } else if b > 0.0 && r < 0.0 && 0.0 < a {
        RegimeTag::VIII
    } else if a < r && r < 0.0 && 0.0 < b && b < -a {
        RegimeTag::IX
    } else {
        RegimeTag::Unclassified
    };
    tag.into()
}

/// Where `y` comes from.
#[derive(Debug, Clone)]
pub enum YSource {
    Given(SmoothFunction),
    /// `y(s) = ∫_a^s Φ(s,t) |h(t)| dt`, the equality case of the kernel condition.
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Floors {
    /// Relative floor on `|h|` (and a given `|y|`) when raised to a negative power.
    pub value_rel: f64,
    /// Smallest admissible value of `v`.
    pub v_min: f64,
}

impl Default for Floors {
    fn default() -> Self {
        Self { value_rel: 1e-6, v_min: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct OpialProblem {
    pub kernel: KernelHandle,
    pub u: SmoothFunction,
    pub v: SmoothFunction,
    pub h: SmoothFunction,
    pub y: YSource,
    pub a: f64,
    pub x: f64,
    pub exponents: ExponentTriple,
    pub quad: QuadratureSpec,
    pub floors: Floors,
}

/// `C(x)` together with its pieces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEvaluation {
    pub value: f64,
    /// Propagated quadrature error on `value`.
    pub error: f64,
    /// The oriented outer integral before the outer power.
    pub integral: IntegralResult,
    pub p_samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub theorem: String,
    pub regime: RegimeTag,
    pub direction: Direction,
    pub lhs: f64,
    pub constant: f64,
    pub rhs_core: f64,
    pub bound: f64,
    pub ratio: f64,
    pub satisfied: bool,
    pub quad_error: f64,
    pub as_printed_flag: bool,
    /// Power of a scale factor on `v` by which the printed extreme bound moves.
    #[serde(skip)]
    pub v_scale_exponent: Option<f64>,
    #[serde(skip)]
    pub converged: bool,
}

impl InequalityReport {
    /// Slack below which a violated comparison is attributed to quadrature.
    pub fn tol_slack(&self) -> f64 {
        10.0 * self.quad_error + 1e-9 * self.lhs.abs().max(self.bound.abs())
    }

    /// Same numbers judged in `direction`.
    pub fn reoriented(&self, direction: Direction) -> Self {
        let mut r = self.clone();
        r.direction = direction;
        r.ratio = ratio(direction, r.lhs, r.bound);
        r.satisfied = judge(direction, r.lhs, r.bound, r.tol_slack());
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| "{}".into())
    }
}

fn ratio(direction: Direction, lhs: f64, bound: f64) -> f64 {
    let (num, den) = match direction {
        Direction::LowerBound => (bound, lhs),
        _ => (lhs, bound),
    };
    if num == 0.0 && den == 0.0 {
        1.0
    } else {
        num / den
    }
}

fn judge(direction: Direction, lhs: f64, bound: f64, slack: f64) -> bool {
    match direction {
        Direction::UpperBound => lhs - bound <= slack,
        Direction::LowerBound => bound - lhs <= slack,
        Direction::NotApplicable => false,
    }
}

/// `base^e`, rejecting negative bases under fractional powers and
/// non-finite results.
fn power(base: f64, e: f64, what: &str) -> Result<f64> {
    if base < 0.0 && e.fract() != 0.0 {
        return Err(Error::PowerDomain(format!("{what}: ({base})^{e}")));
    }
    if e == 0.0 {
        return Ok(1.0);
    }
    let v = base.powf(e);
    if !v.is_finite() {
        return Err(Error::DegenerateIntegrand(format!("{what}: ({base})^{e} is not finite")));
    }
    Ok(v)
}

/// Zeros of `f` on `[lo, hi]`: exact grid zeros and bisected sign changes
/// between neighbouring grid points.
fn sign_changes<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if lo == hi {
        return Ok(Vec::new());
    }
    let grid = equispaced(lo, hi, n);
    let values = grid.iter().map(|&w| f(w)).collect::<Result<Vec<_>>>()?;
    let mut zeros = Vec::new();
    for k in 0..grid.len() {
        if values[k] == 0.0 {
            zeros.push(grid[k]);
            continue;
        }
        if k + 1 < grid.len() && values[k + 1] != 0.0 && (values[k] < 0.0) != (values[k + 1] < 0.0) {
            let (mut l, mut r, mut fl) = (grid[k], grid[k + 1], values[k]);
            while r - l > 4.0 * f64::EPSILON * (l.abs().max(r.abs()) + hi - lo) {
                let m = 0.5 * (l + r);
                let fm = f(m)?;
                if fm == 0.0 {
                    (l, r) = (m, m);
                } else if (fm < 0.0) == (fl < 0.0) {
                    (l, fl) = (m, fm);
                } else {
                    r = m;
                }
            }
            zeros.push(0.5 * (l + r));
        }
    }
    Ok(zeros)
}

/// `max |f|` over `[lo, hi]`.
fn sup_abs(f: &SmoothFunction, lo: f64, hi: f64) -> Result<f64> {
    let grid = equispaced(lo, hi, SUP_NORM_GRID);
    let g = |s: f64| f.value(s).map(f64::abs);
    let mut best = (0usize, g(grid[0])?);
    for (k, &s) in grid.iter().enumerate().skip(1) {
        let v = g(s)?;
        if v > best.1 {
            best = (k, v);
        }
    }
    let (k, mut sup) = best;
    let (mut l, mut r) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (r - ratio * (r - l), l + ratio * (r - l));
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    while r - l > 1e-12 * (1.0 + l.abs().max(r.abs())) {
        if gc >= gd {
            r = d;
            d = c;
            gd = gc;
            c = r - ratio * (r - l);
            gc = g(c)?;
        } else {
            l = c;
            c = d;
            gc = gd;
            d = l + ratio * (r - l);
            gd = g(d)?;
        }
        sup = sup.max(gc).max(gd);
    }
    Ok(sup)
}

impl OpialProblem {
    /// Problem with default quadrature and floors; `quad` breakpoints are
    /// gathered from the supplied functions.
    pub fn new(
        kernel: KernelHandle,
        u: SmoothFunction,
        v: SmoothFunction,
        h: SmoothFunction,
        y: YSource,
        a: f64,
        x: f64,
        exponents: ExponentTriple,
    ) -> Result<Self> {
        let prob = Self {
            kernel,
            u,
            v,
            h,
            y,
            a,
            x,
            exponents,
            quad: QuadratureSpec::default(),
            floors: Floors::default(),
        };
        prob.validate()?;
        Ok(prob.with_quad(QuadratureSpec::default()))
    }

    /// Replaces the quadrature spec, adding the functions' breakpoints.
    pub fn with_quad(mut self, quad: QuadratureSpec) -> Self {
        let mut bps: Vec<f64> = Vec::new();
        for f in [&self.u, &self.v, &self.h] {
            bps.extend_from_slice(f.breakpoints());
        }
        if let YSource::Given(y) = &self.y {
            bps.extend_from_slice(y.breakpoints());
        }
        self.quad = quad.with_breakpoints(bps);
        self
    }

    pub fn with_floors(mut self, floors: Floors) -> Self {
        self.floors = floors;
        self
    }

    pub fn with_x(mut self, x: f64) -> Self {
        self.x = x;
        self
    }

    pub fn with_exponents(mut self, exponents: ExponentTriple) -> Self {
        self.exponents = exponents;
        self
    }

    /// `[min(a,x), max(a,x)]` as a pair.
    pub fn range(&self) -> (f64, f64) {
        (self.a.min(self.x), self.a.max(self.x))
    }

    /// Checks that `a`, `x` lie in every domain, `u >= 0` and `v >= v_min`.
    pub fn validate(&self) -> Result<()> {
        let mut funcs = vec![("u", &self.u), ("v", &self.v), ("h", &self.h)];
        if let YSource::Given(y) = &self.y {
            funcs.push(("y", y));
        }
        for (name, f) in &funcs {
            for p in [self.a, self.x] {
                if !f.domain().contains(p) {
                    return Err(Error::Domain(format!("{p} lies outside the domain {} of {name}", f.domain())));
                }
            }
        }
        let (lo, hi) = self.range();
        for s in equispaced(lo, hi, CHECK_GRID) {
            let u = self.u.value(s)?;
            if u < 0.0 {
                return Err(Error::Weight(format!("u({s}) = {u} is negative")));
            }
            let v = self.v.value(s)?;
            if v < self.floors.v_min {
                return Err(Error::Weight(format!("v({s}) = {v} is below {}", self.floors.v_min)));
            }
        }
        Ok(())
    }

    fn u_at(&self, s: f64) -> Result<f64> {
        let u = self.u.value(s)?;
        if u < 0.0 {
            return Err(Error::Weight(format!("u({s}) = {u} is negative")));
        }
        Ok(u)
    }

    fn v_at(&self, s: f64) -> Result<f64> {
        let v = self.v.value(s)?;
        if v < self.floors.v_min {
            return Err(Error::Weight(format!("v({s}) = {v} is below {}", self.floors.v_min)));
        }
        Ok(v)
    }

    fn phi(&self, s: f64, t: f64) -> Result<f64> {
        let k = self.kernel.eval(s, t)?;
        if k < 0.0 {
            if k >= -KERNEL_ROUNDOFF {
                return Ok(0.0);
            }
            return Err(Error::KernelNegativity(format!("Φ({s}, {t}) = {k}")));
        }
        Ok(k)
    }

    fn ensure_floor(&self, f: &SmoothFunction, name: &str) -> Result<()> {
        let (lo, hi) = self.range();
        if lo == hi {
            return Ok(());
        }
        let grid = equispaced(lo, hi, CHECK_GRID);
        let values = grid.iter().map(|&s| f.value(s).map(f64::abs)).collect::<Result<Vec<_>>>()?;
        let max = values.iter().fold(0.0f64, |m, &v| m.max(v));
        let floor = self.floors.value_rel * max;
        for (s, v) in grid.iter().zip(&values) {
            if *v < floor || *v == 0.0 {
                return Err(Error::DegenerateIntegrand(format!(
                    "|{name}({s})| = {v} is below the floor {floor} needed for a negative exponent"
                )));
            }
        }
        Ok(())
    }

    /// `y(s) = ∫_a^s Φ(s,t)|h(t)| dt` (oriented) for a derived `y`, or the
    /// given `y(s)` with zero error.
    pub fn y_value(&self, s: f64) -> Result<IntegralResult> {
        match &self.y {
            YSource::Given(y) => Ok(IntegralResult {
                value: y.value(s)?,
                error_estimate: 0.0,
                panels_used: 0,
                converged: true,
            }),
            YSource::Derived => {
                integrate(|t| Ok(self.phi(s, t)? * self.h.value(t)?.abs()), self.a, s, &self.quad.relative_only())
            }
        }
    }

    fn p_integrand(&self, s: f64, t: f64) -> Result<f64> {
        let r = self.exponents.r;
        let vt = power(self.v_at(t)?, -1.0 / (r - 1.0), "v^(-1/(r-1))")?;
        let k = power(self.phi(s, t)?, r / (r - 1.0), "Φ^(r/(r-1))")?;
        Ok(vt * k)
    }

    fn p_precheck(&self) -> Result<()> {
        if self.exponents.r == 1.0 {
            return Err(Error::ExponentDegeneracy("P(s) needs r != 1".into()));
        }
        Ok(())
    }

    /// `P(s) = |∫_a^s v^(-1/(r-1)) Φ(s,t)^(r/(r-1)) dt|`.
    pub fn p_weight(&self, s: f64) -> Result<IntegralResult> {
        self.p_precheck()?;
        let mut res = integrate(|t| self.p_integrand(s, t), self.a, s, &self.quad.relative_only())?;
        res.value = res.value.abs();
        Ok(res)
    }

    /// The other reading of `P` in which the outer power also falls on the
    /// `v` factor: `|∫_a^s (v^(-1/(r-1)) Φ(s,t))^(r/(r-1)) dt|`.
    pub fn p_weight_product_form(&self, s: f64) -> Result<IntegralResult> {
        self.p_precheck()?;
        let r = self.exponents.r;
        let f = |t: f64| {
            let base = power(self.v_at(t)?, -1.0 / (r - 1.0), "v^(-1/(r-1))")? * self.phi(s, t)?;
            power(base, r / (r - 1.0), "(v^(-1/(r-1)) Φ)^(r/(r-1))")
        };
        let mut res = integrate(f, self.a, s, &self.quad.relative_only())?;
        res.value = res.value.abs();
        Ok(res)
    }

    /// Largest gap between the two readings of `P` over sample points in the range.
    pub fn p_form_delta(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for s in equispaced(self.a, self.x, P_SAMPLE_COUNT) {
            let p = self.p_weight(s)?.value;
            let p2 = self.p_weight_product_form(s)?.value;
            worst = worst.max((p - p2).abs());
        }
        Ok(worst)
    }

    fn constant_exponents(&self) -> Result<()> {
        let ExponentTriple { alpha, beta, r } = self.exponents;
        if alpha + beta == 0.0 {
            return Err(Error::ExponentDegeneracy("α + β = 0".into()));
        }
        if (r - alpha).abs() < 1e-12 {
            return Err(Error::ExponentDegeneracy(format!("r = {r} is too close to α = {alpha}")));
        }
        Ok(())
    }

    /// `C(x)` built from `P`.
    pub fn opial_constant(&self) -> Result<ConstantEvaluation> {
        self.p_precheck()?;
        self.constant_exponents()?;
        let ExponentTriple { alpha, beta, r } = self.exponents;
        let eu = r / (r - alpha);
        let ev = -alpha / (r - alpha);
        let ep = beta * (r - 1.0) / (r - alpha);
        let combine = |s: f64, p: f64| -> Result<f64> {
            let uw = power(self.u_at(s)?, eu, "u^(r/(r-α))")?;
            if uw == 0.0 {
                return Ok(0.0);
            }
            let vw = power(self.v_at(s)?, ev, "v^(-α/(r-α))")?;
            Ok(uw * vw * power(p.abs(), ep, "P^(β(r-1)/(r-α))")?)
        };
        let integral = integrate_nested(
            |s| (self.a, s),
            |s, t| self.p_integrand(s, t),
            combine,
            self.a,
            self.x,
            &self.quad.relative_only(),
        )?;
        let lead = power(alpha / (alpha + beta), alpha / r, "(α/(α+β))^(α/r)")?;
        let outer = (r - alpha) / r;
        let value = lead * power(integral.value.abs(), outer, "outer power of C")?;
        let error = if integral.value != 0.0 {
            value * outer.abs() * integral.error_estimate / integral.value.abs()
        } else {
            0.0
        };
        let p_samples = equispaced(self.a, self.x, P_SAMPLE_COUNT)
            .into_iter()
            .map(|s| Ok((s, self.p_weight(s)?.value)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConstantEvaluation { value, error, integral, p_samples })
    }

    /// `|∫_a^x u |y|^β |h|^α ds|`.
    pub fn lhs_functional(&self) -> Result<IntegralResult> {
        let ExponentTriple { alpha, beta, .. } = self.exponents;
        if alpha < 0.0 {
            self.ensure_floor(&self.h, "h")?;
        }
        let combine = |s: f64, y: f64| -> Result<f64> {
            let u = self.u_at(s)?;
            if u == 0.0 {
                return Ok(0.0);
            }
            let yb = power(y.abs(), beta, "|y|^β")?;
            let ha = power(self.h.value(s)?.abs(), alpha, "|h|^α")?;
            Ok(u * yb * ha)
        };
        let mut res = match &self.y {
            YSource::Given(y) => {
                if beta < 0.0 {
                    self.ensure_floor(y, "y")?;
                }
                integrate(|s| combine(s, y.value(s)?), self.a, self.x, &self.quad.relative_only())?
            }
            YSource::Derived => integrate_nested(
                |s| (self.a, s),
                |s, t| Ok(self.phi(s, t)? * self.h.value(t)?.abs()),
                combine,
                self.a,
                self.x,
                &self.quad.relative_only(),
            )?,
        };
        res.value = res.value.abs();
        Ok(res)
    }

    /// `|∫_a^x v |h|^r ds|`.
    pub fn rhs_core(&self) -> Result<IntegralResult> {
        let r = self.exponents.r;
        if r < 0.0 {
            self.ensure_floor(&self.h, "h")?;
        }
        let f = |s: f64| Ok(self.v_at(s)? * power(self.h.value(s)?.abs(), r, "|h|^r")?);
        let mut res = integrate(f, self.a, self.x, &self.quad.relative_only())?;
        res.value = res.value.abs();
        Ok(res)
    }

    fn report(
        &self,
        theorem: &str,
        regime: RegimeTag,
        direction: Direction,
        lhs: IntegralResult,
        constant: (f64, f64, bool),
        rhs: IntegralResult,
        rhs_power: f64,
    ) -> Result<InequalityReport> {
        let (c, c_err, c_conv) = constant;
        let rhs_pow = power(rhs.value, rhs_power, "rhs_core power")?;
        let bound = c * rhs_pow;
        if !bound.is_finite() {
            return Err(Error::DegenerateIntegrand(format!("bound {c} * {rhs_pow} is not finite")));
        }
        let mut quad_error = lhs.error_estimate;
        if c != 0.0 {
            quad_error += bound.abs() * c_err / c.abs();
        }
        if rhs.value != 0.0 {
            quad_error += bound.abs() * rhs_power.abs() * rhs.error_estimate / rhs.value;
        }
        let mut report = InequalityReport {
            theorem: theorem.to_string(),
            regime,
            direction,
            lhs: lhs.value,
            constant: c,
            rhs_core: rhs.value,
            bound,
            ratio: 0.0,
            satisfied: false,
            quad_error,
            as_printed_flag: false,
            v_scale_exponent: None,
            converged: lhs.converged && rhs.converged && c_conv,
        };
        report.ratio = ratio(direction, report.lhs, bound);
        report.satisfied = judge(direction, report.lhs, bound, report.tol_slack());
        Ok(report)
    }

    fn require_main(&self, theorem: &str) -> Result<()> {
        let regime = classify_regime(&self.exponents);
        if regime.tag != RegimeTag::Main {
            return Err(Error::Regime(format!(
                "{theorem} needs α, β > 0 and r > max(1, α); ({}, {}, {}) is {}",
                self.exponents.alpha, self.exponents.beta, self.exponents.r, regime.tag
            )));
        }
        Ok(())
    }

    /// The main theorem: `lhs <= C(x) rhs_core^((α+β)/r)`.
    pub fn verify_main(&self) -> Result<InequalityReport> {
        self.require_main("the main inequality")?;
        let c = self.opial_constant()?;
        let ExponentTriple { alpha, beta, r } = self.exponents;
        self.report(
            "main",
            RegimeTag::Main,
            Direction::UpperBound,
            self.lhs_functional()?,
            (c.value, c.error, c.integral.converged),
            self.rhs_core()?,
            (alpha + beta) / r,
        )
    }

    /// The `r = 2` specialization, evaluated from its own formulas:
    /// `P~(s) = |∫ v^-1 Φ^2|`, `C~ = (α/(α+β))^(α/2) |∫ (u^2 v^-α)^(1/(2-α)) P~^(β/(2-α))|^((2-α)/2)`.
    pub fn verify_r2(&self) -> Result<InequalityReport> {
        let ExponentTriple { alpha, beta, r } = self.exponents;
        if r != 2.0 || !(alpha > 0.0 && alpha < 2.0) || beta <= 0.0 {
            return Err(Error::Regime(format!(
                "the r = 2 form needs r = 2, 0 < α < 2, β > 0; got ({alpha}, {beta}, {r})"
            )));
        }
        let inner = |s: f64, t: f64| {
            let k = self.phi(s, t)?;
            Ok(k * k / self.v_at(t)?)
        };
        let combine = |s: f64, p: f64| -> Result<f64> {
            let u = self.u_at(s)?;
            let base = u * u * power(self.v_at(s)?, -alpha, "v^-α")?;
            if base == 0.0 {
                return Ok(0.0);
            }
            Ok(power(base, 1.0 / (2.0 - alpha), "(u^2 v^-α)^(1/(2-α))")?
                * power(p.abs(), beta / (2.0 - alpha), "P~^(β/(2-α))")?)
        };
        let integral = integrate_nested(|s| (self.a, s), inner, combine, self.a, self.x, &self.quad.relative_only())?;
        let outer = (2.0 - alpha) / 2.0;
        let c = power(alpha / (alpha + beta), alpha / 2.0, "(α/(α+β))^(α/2)")?
            * power(integral.value.abs(), outer, "outer power of C~")?;
        let c_err = if integral.value != 0.0 {
            c * outer * integral.error_estimate / integral.value.abs()
        } else {
            0.0
        };
        let rhs = {
            let f = |s: f64| {
                let h = self.h.value(s)?;
                Ok(self.v_at(s)? * h * h)
            };
            let mut res = integrate(f, self.a, self.x, &self.quad.relative_only())?;
            res.value = res.value.abs();
            res
        };
        self.report(
            "r2",
            RegimeTag::Main,
            Direction::UpperBound,
            self.lhs_functional()?,
            (c, c_err, integral.converged),
            rhs,
            (alpha + beta) / 2.0,
        )
    }

    /// The extreme-case bound taken literally:
    /// `∫_a^x u(w) |∫_a^x v(t) Φ(w,t) dt|^((r-α)/r) dw · ‖v‖∞^β · ‖h‖∞^(α+β)`.
    ///
    /// `constant` holds the double integral, `rhs_core` the product of sup
    /// norms over the range. Where the inner integral changes sign the outer
    /// integrand has a cusp `|w - w*|^((r-α)/r)`; such zeros are located and
    /// passed to the quadrature as breakpoints.
    pub fn extreme_bound(&self) -> Result<InequalityReport> {
        self.require_main("the extreme-case bound")?;
        let ExponentTriple { alpha, beta, r } = self.exponents;
        let e = (r - alpha) / r;
        let (a, x) = (self.a, self.x);
        let inner_spec = self.quad.tightened(10.0);
        let inner_at = |w: f64| -> Result<f64> {
            Ok(integrate(|t| Ok(self.v_at(t)? * self.kernel.eval(w, t)?), a, x, &inner_spec)?.value)
        };
        let (lo, hi) = self.range();
        let zeros = sign_changes(inner_at, lo, hi, ZERO_SCAN_GRID)?;
        let constant = integrate_nested(
            |_| (a, x),
            |w, t| Ok(self.v_at(t)? * self.kernel.eval(w, t)?),
            |w, inner| {
                let u = self.u_at(w)?;
                if u == 0.0 {
                    return Ok(0.0);
                }
                Ok(u * power(inner.abs(), e, "|∫ v Φ|^((r-α)/r)")?)
            },
            a,
            x,
            &self.quad.clone().with_breakpoints(zeros),
        )?;
        let (v_sup, h_sup) = self.sup_norms()?;
        let norms = power(v_sup, beta, "‖v‖^β")? * power(h_sup, alpha + beta, "‖h‖^(α+β)")?;
        let lhs = self.lhs_functional()?;
        let bound = constant.value * norms;
        let quad_error = lhs.error_estimate + norms * constant.error_estimate;
        let mut report = InequalityReport {
            theorem: "extreme".into(),
            regime: RegimeTag::Main,
            direction: Direction::UpperBound,
            lhs: lhs.value,
            constant: constant.value,
            rhs_core: norms,
            bound,
            ratio: 0.0,
            satisfied: false,
            quad_error,
            as_printed_flag: true,
            v_scale_exponent: Some(e + beta),
            converged: lhs.converged && constant.converged,
        };
        report.ratio = ratio(report.direction, report.lhs, bound);
        report.satisfied = judge(report.direction, report.lhs, bound, report.tol_slack());
        Ok(report)
    }

    /// Maxima of `|v|` and `|h|` over the range: the best point of a grid,
    /// refined by golden-section search between its neighbours.
    pub fn sup_norms(&self) -> Result<(f64, f64)> {
        let (lo, hi) = self.range();
        Ok((sup_abs(&self.v, lo, hi)?, sup_abs(&self.h, lo, hi)?))
    }

    /// The nine-regime theorem in the equality case, upper bound for
    /// (i)-(iii) and lower bound for (iv)-(ix).
    pub fn verify_regime(&self) -> Result<InequalityReport> {
        if !matches!(self.y, YSource::Derived) {
            return Err(Error::Invalid(
                "the regime theorem needs y derived from h through the kernel".into(),
            ));
        }
        let regime = classify_regime(&self.exponents);
        if regime.tag == RegimeTag::Unclassified {
            let e = self.exponents;
            return Err(Error::Regime(format!("({}, {}, {}) matches no regime", e.alpha, e.beta, e.r)));
        }
        let c = self.opial_constant()?;
        let ExponentTriple { alpha, beta, r } = self.exponents;
        self.report(
            "regime",
            regime.tag,
            regime.direction,
            self.lhs_functional()?,
            (c.value, c.error, c.integral.converged),
            self.rhs_core()?,
            (alpha + beta) / r,
        )
    }

    /// Opial's original inequality `∫|y y'| <= (ℓ/4) ∫ y'^2` on an interval of
    /// length `ℓ = |x - a|`, with `y` vanishing at both ends and `h = y'`.
    pub fn verify_classical(&self) -> Result<InequalityReport> {
        let e = self.exponents;
        if (e.alpha, e.beta, e.r) != (1.0, 1.0, 2.0) {
            return Err(Error::Regime(format!(
                "the classical inequality needs α = β = 1, r = 2; got ({}, {}, {})",
                e.alpha, e.beta, e.r
            )));
        }
        let c = (self.x - self.a).abs() / 4.0;
        self.report(
            "classical",
            RegimeTag::Main,
            Direction::UpperBound,
            self.lhs_functional()?,
            (c, 0.0, true),
            self.rhs_core()?,
            1.0,
        )
    }

    /// Dispatch by theorem tag.
    pub fn verify(&self, theorem: Theorem) -> Result<InequalityReport> {
        match theorem {
            Theorem::Main => self.verify_main(),
            Theorem::R2 => self.verify_r2(),
            Theorem::Extreme => self.extreme_bound(),
            Theorem::Regime => self.verify_regime(),
            Theorem::Classical => self.verify_classical(),
        }
    }

    /// Common domain of the functions of the problem.
    pub fn domain(&self) -> Interval {
        let mut lo = self.u.domain().lo.max(self.v.domain().lo).max(self.h.domain().lo);
        let mut hi = self.u.domain().hi.min(self.v.domain().hi).min(self.h.domain().hi);
        if let YSource::Given(y) = &self.y {
            lo = lo.max(y.domain().lo);
            hi = hi.min(y.domain().hi);
        }
        Interval { lo, hi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theorem {
    Main,
    R2,
    Extreme,
    Regime,
    Classical,
}

impl Theorem {
    pub fn as_str(self) -> &'static str {
        match self {
            Theorem::Main => "main",
            Theorem::R2 => "r2",
            Theorem::Extreme => "extreme",
            Theorem::Regime => "regime",
            Theorem::Classical => "classical",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "main" => Ok(Theorem::Main),
            "r2" => Ok(Theorem::R2),
            "extreme" => Ok(Theorem::Extreme),
            "regime" => Ok(Theorem::Regime),
            "classical" => Ok(Theorem::Classical),
            other => Err(Error::Parse(format!("unknown theorem `{other}`"))),
        }
    }
}
