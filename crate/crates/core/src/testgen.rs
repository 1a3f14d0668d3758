//! Seeded generation of equality-case problems for the property suites.
//!
//! Every instance draws from its own ChaCha8 stream keyed by
//! `(seed, regime, index)`, so a suite is reproducible instance by instance and
//! the manifest line of an instance is enough to rebuild it.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcrep::{equispaced, parse_float, FunctionSpec, Interval, SmoothFunction};
use crate::opial::{classify_regime, ExponentTriple, OpialProblem, RegimeTag, YSource};
use crate::quad::QuadratureSpec;
use crate::taylor::represent_from_h_with;
use crate::widder::{BasisFamily, BasisSpec, KernelHandle};

/// Identifier of the per-instance generator recorded in manifests.
pub const RNG_ID: &str = "chacha8";
/// Redraws allowed for a basis before generation gives up.
pub const MAX_BASIS_ATTEMPTS: usize = 10;
/// Redraws allowed for an exponent triple compatible with some basis.
pub const MAX_EXPONENT_ATTEMPTS: usize = 10_000;
/// Most negative power an integrand may carry at a vanishing point.
pub const SINGULAR_MARGIN: f64 = -0.25;
/// Largest magnitude of any exponent applied to a weight or to `P`.
pub const EXPONENT_CAP: f64 = 8.0;
const KERNEL_CHECK_GRID: usize = 17;
const REPRESENTATION_CHECK_GRID: usize = 33;
const REPRESENTATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Monomials,
    ExpBasis,
    ConstMonomials,
}

impl BasisKind {
    /// Range of the kernel order `n` this kind can produce.
    fn orders(self) -> (usize, usize) {
        match self {
            BasisKind::Monomials => (1, 4),
            BasisKind::ExpBasis => (0, 3),
            BasisKind::ConstMonomials => (0, 3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenFloors {
    pub value_floor: f64,
    pub u_floor: f64,
    pub v_floor: f64,
}

impl Default for GenFloors {
    fn default() -> Self {
        Self { value_floor: 0.1, u_floor: 0.1, v_floor: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub count: usize,
    pub interval: Interval,
    pub floors: GenFloors,
    pub basis_pool: Vec<BasisKind>,
    pub quad: QuadratureSpec,
    pub a: f64,
    /// Range for the evaluation point `x`.
    pub x_range: (f64, f64),
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 1,
            interval: Interval::unit(),
            floors: GenFloors::default(),
            basis_pool: vec![BasisKind::Monomials, BasisKind::ExpBasis, BasisKind::ConstMonomials],
            quad: QuadratureSpec::default(),
            a: 0.0,
            x_range: (0.4, 1.0),
        }
    }
}

impl SuiteConfig {
    pub fn new(seed: u64, count: usize) -> Self {
        Self { seed, count, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.floors;
        if self.count == 0 {
            return Err(Error::Invalid("suite count must be at least 1".into()));
        }
        if !(f.value_floor > 0.0 && f.u_floor > 0.0 && f.v_floor > 0.0) {
            return Err(Error::Invalid("generation floors must be positive".into()));
        }
        if self.basis_pool.is_empty() {
            return Err(Error::Invalid("basis pool is empty".into()));
        }
        let (lo, hi) = self.x_range;
        if !(self.interval.contains(self.a) && self.interval.contains(lo) && self.interval.contains(hi) && lo > self.a && hi >= lo) {
            return Err(Error::Invalid("a and the x range must lie in the interval with a < x".into()));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn regime_index(tag: RegimeTag) -> u64 {
    match tag {
        RegimeTag::Main => 0,
        RegimeTag::Unclassified => 10,
        t => RegimeTag::NUMBERED.iter().position(|&n| n == t).map_or(10, |p| p as u64 + 1),
    }
}

/// The generator for instance `index` of `regime` in the suite seeded by `seed`.
pub fn instance_rng(seed: u64, regime: RegimeTag, index: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(seed ^ splitmix64(regime_index(regime))) ^ index);
    ChaCha8Rng::seed_from_u64(key)
}

/// Rounds to four decimals so manifest lines stay short.
fn tidy(v: f64) -> f64 {
    let r = (v * 1e4).round() / 1e4;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    tidy(rng.gen_range(lo..hi))
}

/// Draws a basis spec whose kernel order lies in `[0, max_order]`.
fn draw_basis_spec<R: Rng>(cfg: &SuiteConfig, rng: &mut R, max_order: usize) -> Result<BasisSpec> {
    let kinds: Vec<BasisKind> = cfg.basis_pool.iter().copied().filter(|k| k.orders().0 <= max_order).collect();
    if kinds.is_empty() {
        return Err(Error::Generation(format!("no pooled basis has kernel order <= {max_order}")));
    }
    let kind = kinds[rng.gen_range(0..kinds.len())];
    let (lo, hi) = kind.orders();
    let n = rng.gen_range(lo..=hi.min(max_order));
    Ok(match kind {
        BasisKind::Monomials => BasisSpec::Monomials(n),
        BasisKind::ExpBasis => {
            // sorted rates in [0.1, 2] at least 0.2 apart
            loop {
                let mut l: Vec<f64> = (0..=n).map(|_| uniform(rng, 0.1, 2.0)).collect();
                l.sort_by(f64::total_cmp);
                if l.windows(2).all(|w| w[1] - w[0] >= 0.2) {
                    break BasisSpec::ExpBasis(l);
                }
            }
        }
        BasisKind::ConstMonomials => {
            let mut specs = vec![FunctionSpec::Const(uniform(rng, 0.5, 2.0))];
            for i in 1..=n {
                let mut c = vec![0.0; i + 1];
                c[i] = 1.0;
                specs.push(FunctionSpec::Poly(c));
            }
            BasisSpec::Custom(specs)
        }
    })
}

/// `g_n(s, t) >= 0` for `t <= s` on a grid over `[a, hi]`.
fn kernel_nonnegative(family: &BasisFamily, a: f64, hi: f64) -> Result<bool> {
    let n = family.order();
    let grid = equispaced(a, hi, KERNEL_CHECK_GRID);
    for (i, &s) in grid.iter().enumerate() {
        for &t in &grid[..=i] {
            if family.kernel_g(n, s, t)? < -1e-12 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A validated basis with nonnegative top kernel, redrawn up to ten times.
pub fn gen_basis<R: Rng>(cfg: &SuiteConfig, rng: &mut R, max_order: usize) -> Result<(BasisSpec, BasisFamily)> {
    let mut last = String::new();
    for _ in 0..MAX_BASIS_ATTEMPTS {
        let spec = draw_basis_spec(cfg, rng, max_order)?;
        match BasisFamily::from_spec(&spec, cfg.interval) {
            Ok(family) => {
                if kernel_nonnegative(&family, cfg.a, cfg.interval.hi)? {
                    return Ok((spec, family));
                }
                last = format!("{spec}: kernel negative on the check grid");
            }
            Err(e) => last = format!("{spec}: {e}"),
        }
    }
    Err(Error::Generation(format!(
        "{MAX_BASIS_ATTEMPTS} consecutive basis draws failed validation (last: {last})"
    )))
}

fn random_square<R: Rng>(rng: &mut R, shift: f64) -> FunctionSpec {
    let degree = rng.gen_range(0..=3usize);
    let coeffs = (0..=degree).map(|_| uniform(rng, -1.0, 1.0)).collect();
    FunctionSpec::SquaredPoly { coeffs, shift }
}

/// `u = p^2 + u_floor` (the floor only for lower-bound regimes) and `v = q^2 + v_floor`.
pub fn gen_weights<R: Rng>(cfg: &SuiteConfig, rng: &mut R, reversed: bool) -> (FunctionSpec, FunctionSpec) {
    let u_shift = if reversed { cfg.floors.u_floor } else { 0.0 };
    let u = random_square(rng, u_shift);
    let v = random_square(rng, cfg.floors.v_floor);
    (u, v)
}

/// Uniform draw from a box inside the open region of `tag`.
pub fn gen_exponents<R: Rng>(tag: RegimeTag, rng: &mut R) -> Result<ExponentTriple> {
    use RegimeTag::*;
    for _ in 0..1000 {
        let (alpha, beta, r) = match tag {
            Main | I => {
                let alpha = uniform(rng, 0.2, 1.8);
                let beta = uniform(rng, 0.2, 2.0);
                let r = if rng.gen_bool(0.25) { 2.0 } else { uniform(rng, alpha.max(1.0) + 0.2, alpha.max(1.0) + 2.0) };
                (alpha, beta, r)
            }
            II => {
                let alpha = uniform(rng, -2.0, -0.3);
                (alpha, uniform(rng, -0.25, -0.02), uniform(rng, alpha - 2.0, alpha - 0.2))
            }
            III => {
                let r = uniform(rng, 0.4, 0.9);
                let alpha = uniform(rng, 0.1, r - 0.2);
                (alpha, tidy(-alpha * rng.gen_range(0.1..0.9)), r)
            }
            IV => {
                let r = uniform(rng, 0.1, 0.8);
                (uniform(rng, r + 0.2, r + 2.0), uniform(rng, 0.1, 2.0), r)
            }
            V => {
                let alpha = uniform(rng, -2.0, -0.2);
                (alpha, tidy(-alpha * rng.gen_range(0.1..0.9)), uniform(rng, 0.1, 0.8))
            }
            VI => (uniform(rng, -2.0, -0.1), uniform(rng, -0.25, -0.02), uniform(rng, 1.3, 3.0)),
            VII => {
                let r = uniform(rng, 1.3, 3.0);
                let alpha = uniform(rng, r + 0.2, r + 2.0);
                (alpha, uniform(rng, -0.25, -0.02), r)
            }
            VIII => (uniform(rng, 0.2, 2.0), uniform(rng, 0.1, 2.0), uniform(rng, -2.0, -0.2)),
            IX => {
                let r = uniform(rng, -1.5, -0.2);
                let alpha = uniform(rng, r - 2.0, r - 0.2);
                (alpha, tidy(-alpha * rng.gen_range(0.1..0.9)), r)
            }
            Unclassified => return Err(Error::Generation("cannot draw exponents for UNCLASSIFIED".into())),
        };
        let e = ExponentTriple::new(alpha, beta, r)?;
        if tag.admits(classify_regime(&e).tag) {
            return Ok(e);
        }
    }
    Err(Error::Generation(format!("exponent box for {tag} produced no member")))
}

/// Largest kernel order `n <= 4` for which every integrand of the problem has
/// its vanishing-point powers above `SINGULAR_MARGIN`, or `None`.
///
/// With `g_n(s,t) ~ (s-t)^n`, `y(s) ~ (s-a)^(n+1)` and `P(s) ~ (s-a)^(nq+1)`
/// where `q = r/(r-1)`.
pub fn admissible_order(e: &ExponentTriple) -> Option<usize> {
    let ExponentTriple { alpha, beta, r } = *e;
    let q = r / (r - 1.0);
    let ep = beta * (r - 1.0) / (r - alpha);
    let caps = [1.0 / (r - 1.0), q, r / (r - alpha), alpha / (r - alpha), ep];
    if caps.iter().any(|c| c.abs() > EXPONENT_CAP) {
        return None;
    }
    (0..=4usize).rev().find(|&n| {
        let nf = n as f64;
        let p_power = nf * q + 1.0;
        beta * (nf + 1.0) >= SINGULAR_MARGIN
            && nf * q >= SINGULAR_MARGIN
            && p_power * ep >= SINGULAR_MARGIN
            && (q >= 0.0 || n <= 1)
    })
}

/// One line of a suite manifest: everything needed to rebuild a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub regime: RegimeTag,
    pub basis: BasisSpec,
    pub u: FunctionSpec,
    pub v: FunctionSpec,
    pub h: FunctionSpec,
    pub exponents: ExponentTriple,
    pub domain: Interval,
    pub a: f64,
    pub x: f64,
    pub seed: u64,
    pub index: u64,
}

impl fmt::Display for InstanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.exponents;
        write!(
            f,
            "regime={} basis={} u={} v={} h={} alpha={} beta={} r={} domain={} a={} x={} seed={} index={}",
            self.regime, self.basis, self.u, self.v, self.h, e.alpha, e.beta, e.r, self.domain, self.a, self.x,
            self.seed, self.index
        )
    }
}

impl FromStr for InstanceSpec {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for token in line.split_whitespace() {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("manifest token `{token}` is not key=value")))?;
            if fields.insert(k, v).is_some() {
                return Err(Error::Parse(format!("duplicate manifest key `{k}`")));
            }
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| Error::Parse(format!("manifest line lacks `{k}`")));
        let int = |k: &str| -> Result<u64> {
            get(k)?.parse().map_err(|_| Error::Parse(format!("`{k}` must be a nonnegative integer")))
        };
        Ok(Self {
            regime: get("regime")?.parse()?,
            basis: get("basis")?.parse()?,
            u: get("u")?.parse()?,
            v: get("v")?.parse()?,
            h: get("h")?.parse()?,
            exponents: ExponentTriple::new(
                parse_float(get("alpha")?)?,
                parse_float(get("beta")?)?,
                parse_float(get("r")?)?,
            )?,
            domain: get("domain")?.parse()?,
            a: parse_float(get("a")?)?,
            x: parse_float(get("x")?)?,
            seed: int("seed")?,
            index: int("index")?,
        })
    }
}

impl InstanceSpec {
    pub fn family(&self) -> Result<BasisFamily> {
        BasisFamily::from_spec(&self.basis, self.domain)
    }

    /// The equality-case problem with `Φ = g_n` and derived `y`.
    pub fn build_problem(&self, quad: &QuadratureSpec) -> Result<OpialProblem> {
        let family = Arc::new(self.family()?);
        let f = |s: &FunctionSpec| SmoothFunction::from_spec(s.clone(), self.domain);
        Ok(OpialProblem::new(
            KernelHandle::widder(family),
            f(&self.u),
            f(&self.v),
            f(&self.h),
            YSource::Derived,
            self.a,
            self.x,
            self.exponents,
        )?
        .with_quad(quad.clone()))
    }
}

/// Draws one equality-case instance for `regime`.
///
/// `h = p^2 + value_floor` is positive, so the derived `y` coincides with the
/// represented function `∫_a^s g_n(s,t) h(t) dt`; this is checked on a grid.
pub fn gen_equality_instance<R: Rng>(cfg: &SuiteConfig, regime: RegimeTag, rng: &mut R, index: u64) -> Result<InstanceSpec> {
    cfg.validate()?;
    let mut drawn = None;
    for _ in 0..MAX_EXPONENT_ATTEMPTS {
        let e = gen_exponents(regime, rng)?;
        if let Some(n) = admissible_order(&e) {
            drawn = Some((e, n));
            break;
        }
    }
    let (exponents, max_order) = drawn.ok_or_else(|| {
        Error::Generation(format!("no exponent triple for {regime} admits a kernel within the margins"))
    })?;
    let (basis, _) = gen_basis(cfg, rng, max_order)?;
    let reversed = regime.direction() == crate::opial::Direction::LowerBound;
    let (u, v) = gen_weights(cfg, rng, reversed);
    let h = random_square(rng, cfg.floors.value_floor);
    let x = uniform(rng, cfg.x_range.0, cfg.x_range.1);
    let spec = InstanceSpec {
        regime,
        basis,
        u,
        v,
        h,
        exponents,
        domain: cfg.interval,
        a: cfg.a,
        x,
        seed: cfg.seed,
        index,
    };
    check_instance(&spec, cfg)?;
    Ok(spec)
}

/// Generation-time assertions on an instance.
pub fn check_instance(spec: &InstanceSpec, cfg: &SuiteConfig) -> Result<()> {
    let fail = |what: String| Err(Error::Generation(format!("{what} in `{spec}`")));
    if !spec.regime.admits(classify_regime(&spec.exponents).tag) {
        return fail(format!("exponents classify as {}", classify_regime(&spec.exponents).tag));
    }
    let prob = spec.build_problem(&cfg.quad)?;
    let (lo, hi) = prob.range();
    for s in equispaced(lo, hi, crate::opial::CHECK_GRID) {
        if prob.v.value(s)? < cfg.floors.v_floor {
            return fail(format!("v({s}) below its floor"));
        }
        if prob.h.value(s)? < cfg.floors.value_floor {
            return fail(format!("h({s}) below its floor"));
        }
        if spec.regime.direction() == crate::opial::Direction::LowerBound && prob.u.value(s)? < cfg.floors.u_floor {
            return fail(format!("u({s}) below its floor"));
        }
    }
    let family = Arc::new(spec.family()?);
    let h = SmoothFunction::from_spec(spec.h.clone(), spec.domain);
    let represented = represent_from_h_with(family, h, spec.a, cfg.quad.clone())?;
    for s in equispaced(spec.a, spec.x, REPRESENTATION_CHECK_GRID) {
        let y = represented.value(s)?;
        let direct = prob.y_value(s)?.value;
        if (y - direct).abs() > REPRESENTATION_TOL {
            return fail(format!("represented y({s}) = {y} differs from ∫Φ|h| = {direct}"));
        }
    }
    Ok(())
}

/// `count` instances for each regime, in regime order then index order.
pub fn generate_suite(cfg: &SuiteConfig, regimes: &[RegimeTag]) -> Result<Vec<InstanceSpec>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.count * regimes.len());
    for &regime in regimes {
        for index in 0..cfg.count as u64 {
            let mut rng = instance_rng(cfg.seed, regime, index);
            out.push(gen_equality_instance(cfg, regime, &mut rng, index)?);
        }
    }
    Ok(out)
}

/// One manifest line per instance.
pub fn format_manifest(specs: &[InstanceSpec]) -> String {
    specs.iter().map(|s| format!("{s}\n")).collect()
}

/// Parses a manifest, skipping blank lines and `#` comments.
pub fn parse_manifest(text: &str) -> Result<Vec<InstanceSpec>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect()
}
