//! Minimal graphs x₁ = f(x₂, x₃): the PDE residual
//!
//! ```text
//! (e^{2x₃} f₃² + 1) f₂₂ - 2 e^{2x₃} f₂ f₃ f₂₃
//!   + (e^{-2x₃} + e^{2x₃} f₂²) f₃₃ - (e^{2x₃} f₂² - e^{-2x₃}) f₃ = 0
//! ```
//!
//! and the four entire solution families
//! `a x₂ + b`, `a e^{-x₃}`, `a x₂ e^{-x₃}`, `x₂ e^{-2x₃}`.

use crate::error::Result;
use std::sync::Arc;

/// Second-order jet of a graph function at (x₂, x₃).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphJet {
    pub f: f64,
    pub f2: f64,
    pub f3: f64,
    pub f22: f64,
    pub f23: f64,
    pub f33: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// x₁ = a x₂ + b
    Affine { a: f64, b: f64 },
    /// x₁ = a e^{-x₃}
    Exp { a: f64 },
    /// x₁ = a x₂ e^{-x₃}
    MixedExp { a: f64 },
    /// x₁ = x₂ e^{-2x₃}
    Exp2,
}

/// A graph function with its derivative jet. Built-in families carry exact
/// derivatives; user-supplied functions get a second-order finite-difference
/// jet with a consistency gate.
#[derive(Clone)]
pub struct GraphFn {
    pub family: Option<Family>,
    eval: Arc<dyn Fn(f64, f64) -> GraphJet + Send + Sync>,
}

impl std::fmt::Debug for GraphFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GraphFn").field("family", &self.family).finish()
    }
}

impl GraphFn {
    pub fn jet(&self, x2: f64, x3: f64) -> GraphJet {
        (self.eval)(x2, x3)
    }

    /// Wrap a plain value function; the jet comes from centered second-order
    /// finite differences with step `h`.
    pub fn from_value_fn<F>(f: F, h: f64) -> GraphFn
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let eval = move |x2: f64, x3: f64| {
            let f0 = f(x2, x3);
            let (fp2, fm2) = (f(x2 + h, x3), f(x2 - h, x3));
            let (fp3, fm3) = (f(x2, x3 + h), f(x2, x3 - h));
            GraphJet {
                f: f0,
                f2: (fp2 - fm2) / (2.0 * h),
                f3: (fp3 - fm3) / (2.0 * h),
                f22: (fp2 - 2.0 * f0 + fm2) / (h * h),
                f33: (fp3 - 2.0 * f0 + fm3) / (h * h),
                f23: (f(x2 + h, x3 + h) - f(x2 + h, x3 - h) - f(x2 - h, x3 + h) + f(x2 - h, x3 - h)) / (4.0 * h * h),
            }
        };
        GraphFn { family: None, eval: Arc::new(eval) }
    }

    /// Max deviation between supplied first derivatives and O(h²) central
    /// differences of `f` over the given points (the derivative-consistency
    /// gate for user-supplied jets).
    pub fn jet_consistency(&self, points: &[(f64, f64)], h: f64) -> f64 {
        let mut worst = 0.0f64;
        for &(x2, x3) in points {
            let j = self.jet(x2, x3);
            let fd2 = (self.jet(x2 + h, x3).f - self.jet(x2 - h, x3).f) / (2.0 * h);
            let fd3 = (self.jet(x2, x3 + h).f - self.jet(x2, x3 - h).f) / (2.0 * h);
            worst = worst.max((fd2 - j.f2).abs()).max((fd3 - j.f3).abs());
        }
        worst
    }
}

/// Exact-jet evaluator for one of the entire families.
pub fn entire_family(family: Family) -> GraphFn {
    let eval: Arc<dyn Fn(f64, f64) -> GraphJet + Send + Sync> = match family {
        Family::Affine { a, b } => Arc::new(move |x2, _x3| GraphJet {
            f: a * x2 + b,
            f2: a,
            f3: 0.0,
            f22: 0.0,
            f23: 0.0,
            f33: 0.0,
        }),
        Family::Exp { a } => Arc::new(move |_x2, x3| {
            let e = (-x3).exp();
            GraphJet { f: a * e, f2: 0.0, f3: -a * e, f22: 0.0, f23: 0.0, f33: a * e }
        }),
        Family::MixedExp { a } => Arc::new(move |x2, x3| {
            let e = (-x3).exp();
            GraphJet { f: a * x2 * e, f2: a * e, f3: -a * x2 * e, f22: 0.0, f23: -a * e, f33: a * x2 * e }
        }),
        Family::Exp2 => Arc::new(move |x2, x3| {
            let e = (-2.0 * x3).exp();
            GraphJet { f: x2 * e, f2: e, f3: -2.0 * x2 * e, f22: 0.0, f23: -2.0 * e, f33: 4.0 * x2 * e }
        }),
    };
    GraphFn { family: Some(family), eval }
}

/// The minimal-graph PDE residual at (x₂, x₃); zero exactly on minimal
/// graphs x₁ = f(x₂, x₃).
pub fn residual(g: &GraphFn, x2: f64, x3: f64) -> f64 {
    let j = g.jet(x2, x3);
    let (ep, em) = ((2.0 * x3).exp(), (-2.0 * x3).exp());
    (ep * j.f3 * j.f3 + 1.0) * j.f22 - 2.0 * ep * j.f2 * j.f3 * j.f23
        + (em + ep * j.f2 * j.f2) * j.f33
        - (ep * j.f2 * j.f2 - em) * j.f3
}

/// Residual sweep over a rectangular grid, written as CSV (x2, x3, residual).
pub fn residual_sweep_csv(
    g: &GraphFn,
    x2_range: (f64, f64, usize),
    x3_range: (f64, f64, usize),
    path: &std::path::Path,
) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x2,x3,residual")?;
    let (a2, b2, n2) = x2_range;
    let (a3, b3, n3) = x3_range;
    for j in 0..n3 {
        let x3 = if n3 > 1 { a3 + (b3 - a3) * j as f64 / (n3 - 1) as f64 } else { a3 };
        for i in 0..n2 {
            let x2 = if n2 > 1 { a2 + (b2 - a2) * i as f64 / (n2 - 1) as f64 } else { a2 };
            writeln!(out, "{},{},{}", x2, x3, residual(g, x2, x3))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rand_pt(rng: &mut StdRng) -> (f64, f64) {
        (rng.gen_range(-3.0..3.0), rng.gen_range(-1.5..1.5))
    }

    #[test]
    fn all_four_families_are_solutions() {
        let mut rng = StdRng::seed_from_u64(61);
        let families = [
            Family::Affine { a: 1.3, b: -0.4 },
            Family::Exp { a: 0.8 },
            Family::MixedExp { a: -1.1 },
            Family::Exp2,
        ];
        for fam in families {
            let g = entire_family(fam);
            for _ in 0..1000 {
                let (x2, x3) = rand_pt(&mut rng);
                let r = residual(&g, x2, x3);
                assert!(r.abs() <= 1e-10, "{fam:?} residual {r} at ({x2},{x3})");
            }
        }
    }

    #[test]
    fn affine_with_random_params() {
        let mut rng = StdRng::seed_from_u64(67);
        for _ in 0..100 {
            let g = entire_family(Family::Affine { a: rng.gen_range(-2.0..2.0), b: rng.gen_range(-2.0..2.0) });
            let (x2, x3) = rand_pt(&mut rng);
            assert!(residual(&g, x2, x3).abs() <= 1e-12);
        }
    }

    #[test]
    fn x2_squared_residual_is_two() {
        let g = GraphFn {
            family: None,
            eval: std::sync::Arc::new(|x2, _| GraphJet { f: x2 * x2, f2: 2.0 * x2, f3: 0.0, f22: 2.0, f23: 0.0, f33: 0.0 }),
        };
        let mut rng = StdRng::seed_from_u64(71);
        for _ in 0..100 {
            let (x2, x3) = rand_pt(&mut rng);
            assert_eq!(residual(&g, x2, x3), 2.0);
        }
    }

    #[test]
    fn residual_invariant_under_x2_translation_and_constant_shift() {
        // the PDE has no explicit x₂ and never reads the value f itself,
        // only derivatives and x₃
        fn wavy(shift: f64) -> GraphFn {
            GraphFn {
                family: None,
                eval: std::sync::Arc::new(move |x2: f64, x3: f64| GraphJet {
                    f: x2.sin() * x3.cos() + shift,
                    f2: x2.cos() * x3.cos(),
                    f3: -x2.sin() * x3.sin(),
                    f22: -x2.sin() * x3.cos(),
                    f23: -x2.cos() * x3.sin(),
                    f33: -x2.sin() * x3.cos(),
                }),
            }
        }
        let plain = wavy(0.0);
        let shifted = wavy(5.0);
        let mut rng = StdRng::seed_from_u64(73);
        for _ in 0..50 {
            let (x2, x3) = rand_pt(&mut rng);
            // constant shift: identical residual, bit for bit
            assert_eq!(residual(&plain, x2, x3), residual(&shifted, x2, x3));
            // x₂-translation invariance of the equation: translating an
            // x₂-translated jet gives the residual of the translated point
            let dx2 = rng.gen_range(-2.0..2.0);
            let translated = GraphFn {
                family: None,
                eval: {
                    let inner = plain.clone();
                    std::sync::Arc::new(move |a: f64, b: f64| inner.jet(a + dx2, b))
                },
            };
            assert_eq!(residual(&translated, x2, x3), residual(&plain, x2 + dx2, x3));
        }
    }

    #[test]
    fn fd_fallback_consistency_gate() {
        let g = GraphFn::from_value_fn(|x2, x3| (x2 * 0.7).sin() * (-x3).exp(), 1e-5);
        let pts: Vec<(f64, f64)> = vec![(0.0, 0.0), (1.0, -0.5), (-2.0, 1.0)];
        assert!(g.jet_consistency(&pts, 1e-4) < 1e-7);
        // exact-jet families pass the gate trivially
        let fam = entire_family(Family::MixedExp { a: 1.0 });
        assert!(fam.jet_consistency(&pts, 1e-4) < 1e-7);
    }

    #[test]
    fn exp_family_example_jet() {
        let g = entire_family(Family::Exp { a: 1.0 });
        let j = g.jet(0.0, 0.0);
        assert_eq!(j.f, 1.0);
        assert_eq!(j.f3, -1.0);
    }
}
