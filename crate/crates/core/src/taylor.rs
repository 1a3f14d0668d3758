//! Generalized Taylor expansion in a Widder basis:
//! `f(x) = Σ_{i=0}^n L_i f(t) g_i(x,t) + ∫_t^x g_n(x,s) L_{n+1} f(s) ds`,
//! and the converse construction of `f` from a prescribed `L_{n+1} f`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::funcrep::{Interval, SmoothFunction};
use crate::quad::{integrate, IntegralResult, QuadratureSpec};
use crate::widder::BasisFamily;

#[derive(Debug, Clone)]
pub struct TaylorExpansion {
    pub family: Arc<BasisFamily>,
    pub f: SmoothFunction,
    pub center: f64,
    pub order: usize,
    /// `L_0 f(t), ..., L_n f(t)`.
    pub coefficients: Vec<f64>,
}

impl TaylorExpansion {
    /// Expansion of order `n` about `t`; needs `n <= family.order()`.
    pub fn new(family: Arc<BasisFamily>, f: SmoothFunction, t: f64, n: usize) -> Result<Self> {
        if n > family.order() {
            return Err(Error::Invalid(format!(
                "expansion order {n} exceeds the basis order {}",
                family.order()
            )));
        }
        let coefficients = (0..=n)
            .map(|i| family.widder_derivative(&f, i, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { family, f, center: t, order: n, coefficients })
    }

    /// The partial sum `Σ_{i=0}^n L_i f(t) g_i(x,t)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (i, c) in self.coefficients.iter().enumerate() {
            acc += c * self.family.kernel_g(i, x, self.center)?;
        }
        Ok(acc)
    }

    /// `R_n(x) = ∫_t^x g_n(x,s) L_{n+1} f(s) ds`.
    pub fn remainder(&self, x: f64, quad: &QuadratureSpec) -> Result<IntegralResult> {
        let n = self.order;
        let quad = quad.clone().with_breakpoints(self.f.breakpoints().iter().copied());
        integrate(
            |s| Ok(self.family.kernel_g(n, x, s)? * self.family.widder_derivative(&self.f, n + 1, s)?),
            self.center,
            x,
            &quad,
        )
    }

    /// `f(x) - partial sum - remainder`.
    pub fn residual(&self, x: f64, quad: &QuadratureSpec) -> Result<f64> {
        Ok(self.f.value(x)? - self.eval(x)? - self.remainder(x, quad)?.value)
    }
}

pub fn taylor_eval(exp: &TaylorExpansion, x: f64) -> Result<f64> {
    exp.eval(x)
}

pub fn taylor_remainder(exp: &TaylorExpansion, x: f64, quad: &QuadratureSpec) -> Result<IntegralResult> {
    exp.remainder(x, quad)
}

/// `f(x) = ∫_{x0}^x g_n(x,t) h(t) dt` with the default quadrature.
pub fn represent_from_h(family: Arc<BasisFamily>, h: SmoothFunction, x0: f64) -> Result<SmoothFunction> {
    represent_from_h_with(family, h, x0, QuadratureSpec::default())
}

/// `f(x) = ∫_{x0}^x g_n(x,t) h(t) dt`, so that `L_i f(x0) = 0` for `i <= n`
/// and `L_{n+1} f = h`.
///
/// Derivatives up to order `n + 1` are exact up to quadrature, and two more
/// come from finite differences. For `k <= n` the boundary terms vanish
/// because `∂_x^k g_n(x,x) = 0`; at `k = n + 1` the boundary term is `h(x)`
/// since `∂_x^n g_n(x,x) = 1`.
pub fn represent_from_h_with(
    family: Arc<BasisFamily>,
    h: SmoothFunction,
    x0: f64,
    quad: QuadratureSpec,
) -> Result<SmoothFunction> {
    let fd = family.domain();
    let hd = h.domain();
    let domain = Interval::new(fd.lo.max(hd.lo), fd.hi.min(hd.hi))?;
    if !domain.contains(x0) {
        return Err(Error::Domain(format!("base point {x0} outside {domain}")));
    }
    let n = family.order();
    let quad = quad.with_breakpoints(h.breakpoints().iter().copied());
    let label = format!("repr[{}]", h.label());
    let breakpoints = h.breakpoints().to_vec();
    let eval = move |k: usize, x: f64| -> Result<f64> {
        let res = integrate(|t| Ok(family.kernel_g_dx(n, k, x, t)? * h.value(t)?), x0, x, &quad)?;
        if !res.converged {
            return Err(Error::Evaluation(format!(
                "represented function did not converge at x = {x} (order {k}, error {})",
                res.error_estimate
            )));
        }
        if k == n + 1 {
            Ok(res.value + h.value(x)?)
        } else {
            Ok(res.value)
        }
    };
    Ok(SmoothFunction::from_closure(domain, n + 1, n + 3, label, eval).with_breakpoints(breakpoints))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcrep::{builtin_family, DerivativeKind};

    fn dom() -> Interval {
        Interval::new(-1.0, 2.0).unwrap()
    }

    fn family(spec: &str) -> Arc<BasisFamily> {
        Arc::new(BasisFamily::parse(spec, dom()).unwrap())
    }

    #[test]
    fn monomial_expansion_is_classical_taylor() {
        let fam = family("monomials:3");
        let f = builtin_family("exp:1", dom()).unwrap();
        let exp = TaylorExpansion::new(fam, f, 0.5, 3).unwrap();
        let e = 0.5f64.exp();
        for c in &exp.coefficients {
            assert!((c - e).abs() <= 1e-10 * e);
        }
        for x in [-0.5, 0.0, 1.0, 1.7] {
            let d = x - 0.5;
            let classical = e * (1.0 + d + d * d / 2.0 + d * d * d / 6.0);
            assert!((exp.eval(x).unwrap() - classical).abs() <= 1e-10);
        }
    }

    #[test]
    fn center_and_annihilation() {
        let fam = family("exp-basis:0.5,1,1.5");
        let f = builtin_family("sin:1", dom()).unwrap();
        let exp = TaylorExpansion::new(fam.clone(), f, 0.3, 2).unwrap();
        assert!((exp.eval(0.3).unwrap() - 0.3f64.sin()).abs() <= 1e-14);
        assert_eq!(exp.remainder(0.3, &QuadratureSpec::default()).unwrap().value, 0.0);
        let u0 = fam.members()[0].clone();
        let exp = TaylorExpansion::new(fam, u0.clone(), 0.3, 2).unwrap();
        for c in &exp.coefficients[1..] {
            assert!(c.abs() < 1e-12);
        }
        assert!((exp.eval(1.4).unwrap() - u0.value(1.4).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn remainder_examples() {
        let q = QuadratureSpec::default();
        for n in 0..=3usize {
            let fam = family(&format!("monomials:{n}"));
            let mut c = vec![0.0; n + 2];
            c[n + 1] = 1.0;
            let f = SmoothFunction::from_spec(crate::funcrep::FunctionSpec::Poly(c), dom());
            let exp = TaylorExpansion::new(fam, f, 0.0, n).unwrap();
            for x in [0.5, 1.3, -0.7] {
                assert!(exp.eval(x).unwrap().abs() < 1e-14);
                let r = exp.remainder(x, &q).unwrap().value;
                assert!((r - x.powi(n as i32 + 1)).abs() < 1e-12, "n={n} x={x}: {r}");
            }
        }
        let fam = family("custom:const:2");
        let f = builtin_family("cos:2", dom()).unwrap();
        let exp = TaylorExpansion::new(fam, f.clone(), 0.1, 0).unwrap();
        let r = exp.remainder(1.2, &q).unwrap().value;
        assert!((r - (f.value(1.2).unwrap() - f.value(0.1).unwrap())).abs() < 1e-13);
    }

    #[test]
    fn identity_in_exponential_bases() {
        let q = QuadratureSpec::default();
        let fam = family("exp-basis:0.3,0.9,1.4,2");
        let f = builtin_family("sin:1.5", dom()).unwrap();
        for n in 0..=3 {
            let exp = TaylorExpansion::new(fam.clone(), f.clone(), 0.4, n).unwrap();
            for x in dom().grid(20) {
                let res = exp.residual(x, &q).unwrap();
                assert!(res.abs() <= 1e-7 * (1.0 + f.value(x).unwrap().abs()), "n={n} x={x}: {res}");
            }
        }
    }

    #[test]
    fn representation_examples() {
        let two = SmoothFunction::constant(2.0, dom());
        let f = represent_from_h(family("monomials:1"), two, 0.0).unwrap();
        assert_eq!(f.kind(), DerivativeKind::FiniteDifferenceFallback);
        for x in [0.0, 0.5, 1.5, -0.8] {
            assert!((f.value(x).unwrap() - x * x).abs() < 1e-13);
            assert!((f.eval(1, x).unwrap() - 2.0 * x).abs() < 1e-13);
            assert!((f.eval(2, x).unwrap() - 2.0).abs() < 1e-13);
        }
        let zero = SmoothFunction::constant(0.0, dom());
        let f = represent_from_h(family("monomials:2"), zero, 0.5).unwrap();
        assert_eq!(f.value(1.7).unwrap(), 0.0);
        let one = SmoothFunction::constant(1.0, dom());
        let f = represent_from_h(family("monomials:0"), one, 0.0).unwrap();
        assert!((f.value(0.9).unwrap() - 0.9).abs() < 1e-14);
    }

    #[test]
    fn representation_round_trip() {
        let h = builtin_family("poly:1,-0.5,0.25", dom()).unwrap();
        for spec in ["monomials:2", "exp-basis:0.2,0.7,1.5"] {
            let fam = family(spec);
            let n = fam.order();
            let f = represent_from_h(fam.clone(), h.clone(), 0.2).unwrap();
            for i in 0..=n {
                assert!(fam.widder_derivative(&f, i, 0.2).unwrap().abs() <= 1e-6, "{spec} i={i}");
            }
            for x in [0.0, 0.6, 1.1, 1.8] {
                let l = fam.widder_derivative(&f, n + 1, x).unwrap();
                assert!((l - h.value(x).unwrap()).abs() <= 1e-5, "{spec} x={x}: {l}");
            }
        }
    }
}
