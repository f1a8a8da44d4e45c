//! The Gauss map of CMC surfaces in Sol₃: coefficient functions of the
//! second-order elliptic equation
//!
//! ```text
//! g_zz̄ = A(g) g_z g_z̄ + B(g) g_z ḡ_z̄ ,
//! R(q) = H (1+|q|²)² + q² − q̄² ,   A = R_q / R ,   B = R_q̄/R − R̄_q̄/R̄ ,
//! ```
//!
//! the frame velocity / conformal factor / Hopf differential formulas, and
//! the representation integrator recovering the immersion
//! `(x₁)_z = e^{-x₃}(ḡ²-1)g_z/R`, `(x₂)_z = i e^{x₃}(ḡ²+1)g_z/R`,
//! `(x₃)_z = 2ḡ g_z/R` from a solution field.
//!
//! Values with |g| > 1 are held in the dual chart w = i/g throughout; the
//! substitution maps solutions to solutions of the same equation, so every
//! field operation works chart-locally and converts stencil neighbours
//! exactly where charts mix.

use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::quadrature::cumulative_integral4;
use crate::sol3::Point;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A point of the Riemann sphere ℂ ∪ {∞}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedComplex {
    Finite(Complex64),
    Infinity,
}

impl ExtendedComplex {
    pub fn finite(re: f64, im: f64) -> Self {
        ExtendedComplex::Finite(Complex64::new(re, im))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedComplex::Finite(_))
    }

    pub fn value(&self) -> Option<Complex64> {
        match self {
            ExtendedComplex::Finite(v) => Some(*v),
            ExtendedComplex::Infinity => None,
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            ExtendedComplex::Finite(v) => v.norm(),
            ExtendedComplex::Infinity => f64::INFINITY,
        }
    }

    /// Unit vector on S² under inverse stereographic projection from the
    /// southern pole: q ↦ (2 Re q, 2 Im q, 1-|q|²)/(1+|q|²).
    pub fn unit_sphere_point(&self) -> [f64; 3] {
        match self {
            ExtendedComplex::Finite(q) => {
                let n2 = q.norm_sqr();
                let d = 1.0 + n2;
                [2.0 * q.re / d, 2.0 * q.im / d, (1.0 - n2) / d]
            }
            ExtendedComplex::Infinity => [0.0, 0.0, -1.0],
        }
    }
}

impl From<Complex64> for ExtendedComplex {
    fn from(v: Complex64) -> Self {
        ExtendedComplex::Finite(v)
    }
}

/// The duality q ↦ i/q on the Riemann sphere (0 ↦ ∞, ∞ ↦ 0). Applying it
/// twice returns the original value.
pub fn dual_value(q: ExtendedComplex) -> ExtendedComplex {
    match q {
        ExtendedComplex::Infinity => ExtendedComplex::finite(0.0, 0.0),
        ExtendedComplex::Finite(v) if v.norm_sqr() == 0.0 => ExtendedComplex::Infinity,
        ExtendedComplex::Finite(v) => ExtendedComplex::Finite(I / v),
    }
}

/// R(q) = H (1+|q|²)² + q² - q̄².
pub fn r_of(q: Complex64, h: f64) -> Complex64 {
    let s = 1.0 + q.norm_sqr();
    Complex64::new(h * s * s, 0.0) + q * q - (q.conj() * q.conj())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub r: Complex64,
    pub a: Complex64,
    pub b: Complex64,
    pub m: Complex64,
}

/// Coefficient functions R, A, B and M = 1/R at a finite chart value `q`.
/// Fails only when R(q) = 0, which requires H = 0.
pub fn coefficients(q: Complex64, h: f64) -> Result<Coefficients> {
    let s = 1.0 + q.norm_sqr();
    let r = r_of(q, h);
    if r.norm() <= 1e-300 * s * s {
        return Err(Error::CoefficientSingular { q });
    }
    let a = (2.0 * h * s * q.conj() + 2.0 * q) / r;
    let b = -4.0 * h * s * (q.conj() + q * q * q) / r.norm_sqr();
    Ok(Coefficients { r, a, b, m: 1.0 / r })
}

/// M = 1/R extended over the sphere with M(∞) = 0.
pub fn m_extended(q: ExtendedComplex, h: f64) -> Result<Complex64> {
    match q {
        ExtendedComplex::Infinity => Ok(Complex64::new(0.0, 0.0)),
        ExtendedComplex::Finite(v) => Ok(coefficients(v, h)?.m),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FrameVelocity {
    /// Frame components of X_z.
    pub a1: Complex64,
    pub a2: Complex64,
    pub a3: Complex64,
    /// η = 2⟨E₃, X_z⟩ = 2 A₃.
    pub eta: Complex64,
    /// Conformal factor λ (from the g_z route, valid at g = 0 too).
    pub lambda: f64,
}

impl FrameVelocity {
    /// λ via the η route, (1+|g|²)² |η|² / (4|g|²); undefined at g = 0.
    pub fn lambda_from_eta(&self, g: Complex64) -> Option<f64> {
        let n2 = g.norm_sqr();
        if n2 == 0.0 {
            return None;
        }
        let s = 1.0 + n2;
        Some(s * s * self.eta.norm_sqr() / (4.0 * n2))
    }
}

/// Frame components of X_z, η and the conformal factor from (g, g_z, H).
/// Uses the cancelled forms A₁ = -(1-ḡ²)g_z/R, A₂ = i(1+ḡ²)g_z/R,
/// A₃ = 2ḡ g_z/R, which are regular at g = 0.
pub fn frame_velocity(g: Complex64, g_z: Complex64, h: f64) -> Result<FrameVelocity> {
    if g_z.norm() == 0.0 {
        return Err(Error::AntiholomorphicPoint);
    }
    let c = coefficients(g, h)?;
    let gb = g.conj();
    let a1 = -(1.0 - gb * gb) * g_z / c.r;
    let a2 = I * (1.0 + gb * gb) * g_z / c.r;
    let a3 = 2.0 * gb * g_z / c.r;
    let eta = 4.0 * gb * g_z / c.r;
    let s = 1.0 + g.norm_sqr();
    let lambda = 4.0 * s * s * g_z.norm_sqr() / c.r.norm_sqr();
    Ok(FrameVelocity { a1, a2, a3, eta, lambda })
}

/// Hopf differential coefficient P = 2 g_z ḡ_z / R - 2 (1-ḡ⁴) g_z² / R².
/// `gbar_z` is ∂_z of the conjugated map, i.e. conj(g_z̄).
pub fn hopf_p(g: Complex64, g_z: Complex64, gbar_z: Complex64, h: f64) -> Result<Complex64> {
    let c = coefficients(g, h)?;
    let gb = g.conj();
    Ok(2.0 * g_z * gbar_z / c.r - 2.0 * (1.0 - gb.powu(4)) * g_z * g_z / (c.r * c.r))
}

/// Mean curvature extracted from Gauss data:
/// H_X = 2 ḡ g_z / ((1+|g|²)² A₃) - (g² - ḡ²)/(1+|g|²)².
/// Returns (Re H_X, Im H_X); the imaginary part is a consistency residual.
pub fn mean_curvature_from_gauss(g: Complex64, g_z: Complex64, a3: Complex64) -> Result<(f64, f64)> {
    if a3.norm() == 0.0 {
        return Err(Error::DegenerateA3);
    }
    let s = 1.0 + g.norm_sqr();
    let gb = g.conj();
    let hx = 2.0 * gb * g_z / (s * s * a3) - (g * g - gb * gb) / (s * s);
    Ok((hx.re, hx.im))
}

/// Minimal-case quadratic differential Q* = g_z ḡ_z / R*(g), R* = q² - q̄².
/// Well defined only when R*(g) ≠ 0 (g neither real nor purely imaginary).
pub fn minimal_qstar(g: Complex64, g_z: Complex64, gbar_z: Complex64) -> Result<Complex64> {
    let rstar = g * g - g.conj() * g.conj();
    let scale = (1.0 + g.norm_sqr()).powi(2);
    if rstar.norm() <= 1e-14 * scale {
        return Err(Error::QstarUndefined { q: g });
    }
    Ok(g_z * gbar_z / rstar)
}

/// Antiholomorphic-derivative residual of Q* on a grid field (holomorphy
/// test for the minimal case): max |∂_z̄ Q*| over interior samples where Q*
/// is well defined.
pub fn minimal_qstar_residual(field: &GaussField) -> Result<f64> {
    let grid = field.grid.as_ref().ok_or(Error::NotAGrid)?;
    let (nu, nv) = (grid.nu, grid.nv);
    let qv: Vec<Option<Complex64>> = field
        .samples
        .iter()
        .map(|s| {
            let (g, gz, gzb) = s.primary_triple()?;
            minimal_qstar(g, gz, gzb.conj()).ok()
        })
        .collect();
    let mut max = 0.0f64;
    for j in 1..nv.saturating_sub(1) {
        for i in 1..nu.saturating_sub(1) {
            let idx = |a: usize, b: usize| b * nu + a;
            let need = [qv[idx(i - 1, j)], qv[idx(i + 1, j)], qv[idx(i, j - 1)], qv[idx(i, j + 1)]];
            if need.iter().any(|x| x.is_none()) {
                continue;
            }
            let qu = (need[1].unwrap() - need[0].unwrap()) / (2.0 * grid.du);
            let qv_ = (need[3].unwrap() - need[2].unwrap()) / (2.0 * grid.dv);
            let qzbar = (qu + I * qv_) / 2.0;
            max = max.max(qzbar.norm());
        }
    }
    Ok(max)
}

/// Chart tag of a stored sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    /// Stored value is g itself (used when |g| ≤ 1).
    Primary,
    /// Stored value is w = i/g (used when |g| > 1).
    Dual,
}

/// One sample of a discretized Gauss-map field. `value`, `dz`, `dzbar` are
/// the stored chart's function and its Wirtinger derivatives.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaussSample {
    pub chart: Chart,
    pub value: Complex64,
    pub dz: Complex64,
    pub dzbar: Complex64,
}

impl GaussSample {
    /// Build a sample from primary-chart data, storing the dual chart when
    /// |g| > 1 (the chain rule w_z = -i g_z / g² transforms derivatives).
    pub fn from_primary(g: Complex64, g_z: Complex64, g_zbar: Complex64) -> Self {
        if g.norm_sqr() > 1.0 {
            let f = -I / (g * g);
            GaussSample { chart: Chart::Dual, value: I / g, dz: f * g_z, dzbar: f * g_zbar }
        } else {
            GaussSample { chart: Chart::Primary, value: g, dz: g_z, dzbar: g_zbar }
        }
    }

    /// The sample's value on the Riemann sphere, in the primary chart.
    pub fn gauss_value(&self) -> ExtendedComplex {
        match self.chart {
            Chart::Primary => ExtendedComplex::Finite(self.value),
            Chart::Dual => dual_value(ExtendedComplex::Finite(self.value)),
        }
    }

    /// Primary-chart (g, g_z, g_z̄); `None` when the sample sits at g = ∞.
    pub fn primary_triple(&self) -> Option<(Complex64, Complex64, Complex64)> {
        match self.chart {
            Chart::Primary => Some((self.value, self.dz, self.dzbar)),
            Chart::Dual => {
                let w = self.value;
                if w.norm_sqr() == 0.0 {
                    return None;
                }
                let g = I / w;
                let f = -I / (w * w);
                Some((g, f * self.dz, f * self.dzbar))
            }
        }
    }

    /// Stored value converted into `chart` (exact involution).
    pub fn value_in(&self, chart: Chart) -> Complex64 {
        if self.chart == chart {
            self.value
        } else {
            I / self.value
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub nu: usize,
    pub nv: usize,
    pub u0: f64,
    pub du: f64,
    pub v0: f64,
    pub dv: f64,
}

impl GridInfo {
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nu && j < self.nv);
        j * self.nu + i
    }

    pub fn uv(&self, i: usize, j: usize) -> (f64, f64) {
        (self.u0 + i as f64 * self.du, self.v0 + j as f64 * self.dv)
    }
}

/// A discretized Gauss map together with its target mean curvature. The
/// samples may carry rectangular grid structure (`grid`) or come from an
/// unstructured parameter atlas such as mesh vertices (`grid = None`).
#[derive(Debug, Clone)]
pub struct GaussField {
    pub h: f64,
    pub samples: Vec<GaussSample>,
    pub grid: Option<GridInfo>,
}

impl GaussField {
    /// Build a grid field from a primary-chart closure `(u,v) -> (g, g_z, g_z̄)`.
    pub fn from_fn<F>(h: f64, grid: GridInfo, f: F) -> Self
    where
        F: Fn(f64, f64) -> (Complex64, Complex64, Complex64),
    {
        let mut samples = Vec::with_capacity(grid.nu * grid.nv);
        for j in 0..grid.nv {
            for i in 0..grid.nu {
                let (u, v) = grid.uv(i, j);
                let (g, gz, gzb) = f(u, v);
                samples.push(GaussSample::from_primary(g, gz, gzb));
            }
        }
        GaussField { h, samples, grid: Some(grid) }
    }

    pub fn at(&self, i: usize, j: usize) -> &GaussSample {
        let grid = self.grid.as_ref().expect("grid field");
        &self.samples[grid.index(i, j)]
    }

    /// The dual field g ↦ i/g (a solution whenever the field is one).
    /// Chart tags flip; stored numbers are unchanged.
    pub fn dual_field(&self) -> GaussField {
        let samples = self
            .samples
            .iter()
            .map(|s| GaussSample {
                chart: match s.chart {
                    Chart::Primary => Chart::Dual,
                    Chart::Dual => Chart::Primary,
                },
                ..*s
            })
            .collect();
        GaussField { h: self.h, samples, grid: self.grid }
    }

    /// Count of samples violating the nowhere-antiholomorphic requirement.
    pub fn antiholomorphic_points(&self) -> usize {
        self.samples.iter().filter(|s| s.dz.norm() == 0.0).count()
    }

    /// Serialize to CSV (`u, v, Re g, Im g, Re g_z, Im g_z, Re g_z̄, Im g_z̄`,
    /// primary-chart values) plus a JSON metadata header written next to it
    /// as `<path>.json`.
    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let grid = self.grid.as_ref().ok_or(Error::NotAGrid)?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "u,v,re_g,im_g,re_gz,im_gz,re_gzbar,im_gzbar")?;
        for j in 0..grid.nv {
            for i in 0..grid.nu {
                let (u, v) = grid.uv(i, j);
                let s = &self.samples[grid.index(i, j)];
                let (g, gz, gzb) = match s.primary_triple() {
                    Some(t) => t,
                    None => (
                        Complex64::new(f64::INFINITY, 0.0),
                        Complex64::new(f64::INFINITY, 0.0),
                        Complex64::new(f64::INFINITY, 0.0),
                    ),
                };
                writeln!(out, "{},{},{},{},{},{},{},{}", u, v, g.re, g.im, gz.re, gz.im, gzb.re, gzb.im)?;
            }
        }
        let meta = serde_json::json!({
            "h": self.h,
            "nu": grid.nu, "nv": grid.nv,
            "u0": grid.u0, "du": grid.du, "v0": grid.v0, "dv": grid.dv,
        });
        std::fs::write(path.with_extension(format!(
            "{}.json",
            path.extension().and_then(|e| e.to_str()).unwrap_or("csv")
        )), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load_csv(path: &std::path::Path) -> Result<GaussField> {
        let meta_path = path.with_extension(format!(
            "{}.json",
            path.extension().and_then(|e| e.to_str()).unwrap_or("csv")
        ));
        let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?;
        let get = |k: &str| -> Result<f64> {
            meta.get(k)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Parse { what: meta_path.display().to_string(), detail: format!("missing key {k}") })
        };
        let grid = GridInfo {
            nu: get("nu")? as usize,
            nv: get("nv")? as usize,
            u0: get("u0")?,
            du: get("du")?,
            v0: get("v0")?,
            dv: get("dv")?,
        };
        let h = get("h")?;
        let text = std::fs::read_to_string(path)?;
        let mut samples = Vec::with_capacity(grid.nu * grid.nv);
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let cols: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { what: path.display().to_string(), detail: format!("line {}: {e}", lineno + 1) })?;
            if cols.len() != 8 {
                return Err(Error::Parse { what: path.display().to_string(), detail: format!("line {}: expected 8 columns", lineno + 1) });
            }
            let g = Complex64::new(cols[2], cols[3]);
            if g.re.is_infinite() || g.im.is_infinite() {
                samples.push(GaussSample { chart: Chart::Dual, value: Complex64::new(0.0, 0.0), dz: Complex64::new(0.0, 0.0), dzbar: Complex64::new(0.0, 0.0) });
            } else {
                samples.push(GaussSample::from_primary(g, Complex64::new(cols[4], cols[5]), Complex64::new(cols[6], cols[7])));
            }
        }
        if samples.len() != grid.nu * grid.nv {
            return Err(Error::Parse { what: path.display().to_string(), detail: format!("expected {} samples, found {}", grid.nu * grid.nv, samples.len()) });
        }
        Ok(GaussField { h, samples, grid: Some(grid) })
    }
}

#[derive(Debug, Clone)]
pub struct PdeResidual {
    /// Residual per sample; `None` on the boundary and where the equation's
    /// coefficients are singular (possible only for H = 0).
    pub values: Vec<Option<Complex64>>,
    pub max_abs: f64,
    /// Samples with vanishing stored derivative (inadmissible fields).
    pub antiholomorphic_points: usize,
}

/// Residual g_zz̄ - A(g) g_z g_z̄ - B(g) g_z ḡ_z̄ per interior sample, with
/// all derivatives taken by centered second-order finite differences in the
/// sample's own chart (stencil neighbours are converted exactly).
pub fn pde_residual(field: &GaussField) -> Result<PdeResidual> {
    let grid = *field.grid.as_ref().ok_or(Error::NotAGrid)?;
    let (nu, nv) = (grid.nu, grid.nv);
    let h = field.h;
    let samples = &field.samples;
    let one_dim_v = nv < 3; // fields constant in v may come as thin grids
    let values: Vec<Option<Complex64>> = map_indexed(nu * nv, |idx| {
        let (i, j) = (idx % nu, idx / nu);
        if i == 0 || i + 1 >= nu || (!one_dim_v && (j == 0 || j + 1 >= nv)) {
            return None;
        }
        let c = samples[idx].chart;
        let w0 = samples[idx].value;
        let conv = |k: usize| samples[k].value_in(c);
        let (wl, wr) = (conv(grid.index(i - 1, j)), conv(grid.index(i + 1, j)));
        let wu = (wr - wl) / (2.0 * grid.du);
        let wuu = (wr - 2.0 * w0 + wl) / (grid.du * grid.du);
        let (wv, wvv) = if one_dim_v {
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        } else {
            let (wd, wu2) = (conv(grid.index(i, j - 1)), conv(grid.index(i, j + 1)));
            (
                (wu2 - wd) / (2.0 * grid.dv),
                (wu2 - 2.0 * w0 + wd) / (grid.dv * grid.dv),
            )
        };
        let wz = (wu - I * wv) / 2.0;
        let wzb = (wu + I * wv) / 2.0;
        let wzzb = (wuu + wvv) / 4.0;
        match coefficients(w0, h) {
            Ok(co) => Some(wzzb - co.a * wz * wzb - co.b * wz * wz.conj()),
            Err(_) => None,
        }
    });
    let max_abs = values.iter().flatten().map(|r| r.norm()).fold(0.0f64, f64::max);
    Ok(PdeResidual { values, max_abs, antiholomorphic_points: field.antiholomorphic_points() })
}

/// Reconstructed immersion patch with per-sample conformal factor.
#[derive(Debug, Clone)]
pub struct SurfacePatch {
    pub grid: GridInfo,
    pub points: Vec<Point>,
    pub lambda: Vec<f64>,
    /// Max relative plaquette loop defect of the coordinate 1-forms.
    pub integrability_residual: f64,
}

impl SurfacePatch {
    pub fn at(&self, i: usize, j: usize) -> Point {
        self.points[self.grid.index(i, j)]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    /// Relative loop-defect tolerance; exceeding it means the field does not
    /// solve the equation.
    pub defect_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { defect_tol: 0.01 }
    }
}

/// Complex coordinate-derivative integrands (F₁, F₂, F₃) = ((x₁)_z, (x₂)_z,
/// (x₃)_z) at one sample. F₁ and F₂ require the local x₃ value; F₃ does not.
/// Dual-chart samples use the swapped (x₂*, x₁*, -x₃*) relations.
fn integrand_f3(s: &GaussSample, h: f64) -> Result<Complex64> {
    let w = s.value;
    let c = coefficients(w, h)?;
    let f = 2.0 * w.conj() * s.dz / c.r;
    Ok(match s.chart {
        Chart::Primary => f,
        Chart::Dual => -f,
    })
}

fn integrand_f12(s: &GaussSample, h: f64, x3: f64) -> Result<(Complex64, Complex64)> {
    let w = s.value;
    let c = coefficients(w, h)?;
    let wb2 = w.conj() * w.conj();
    let (em, ep) = ((-x3).exp(), x3.exp());
    Ok(match s.chart {
        Chart::Primary => ((wb2 - 1.0) * s.dz / c.r * em, I * ep * (wb2 + 1.0) * s.dz / c.r),
        Chart::Dual => (I * em * (wb2 + 1.0) * s.dz / c.r, ep * (wb2 - 1.0) * s.dz / c.r),
    })
}

/// Integrate the representation formula over a simply connected grid field,
/// anchoring sample (0,0) at `seed`. x₃ is integrated first (its integrand is
/// position-free), then x₁ and x₂, whose integrands carry e^{∓x₃}. Paths run
/// along row 0 and then up each column; a trapezoidal plaquette-defect
/// monitor bounds the path dependence and rejects non-solution fields.
pub fn integrate_representation(field: &GaussField, seed: Point, opts: IntegrateOptions) -> Result<SurfacePatch> {
    let grid = *field.grid.as_ref().ok_or(Error::NotAGrid)?;
    if field.h == 0.0 {
        return Err(Error::InvalidParameter("representation integration requires H != 0".into()));
    }
    if field.antiholomorphic_points() > 0 {
        return Err(Error::AntiholomorphicPoint);
    }
    let (nu, nv) = (grid.nu, grid.nv);
    let n = nu * nv;
    let h = field.h;

    let f3: Vec<Complex64> = field.samples.iter().map(|s| integrand_f3(s, h)).collect::<Result<_>>()?;

    // x3 over the grid: row 0 in u, then every column in v.
    let mut x3 = vec![0.0; n];
    {
        let row: Vec<f64> = (0..nu).map(|i| 2.0 * f3[grid.index(i, 0)].re).collect();
        let cum = cumulative_integral4(&row, grid.du);
        for i in 0..nu {
            x3[grid.index(i, 0)] = seed.x3 + cum[i];
        }
        let cols: Vec<Vec<f64>> = map_indexed(nu, |i| {
            let col: Vec<f64> = (0..nv).map(|j| -2.0 * f3[grid.index(i, j)].im).collect();
            cumulative_integral4(&col, grid.dv)
        });
        for i in 0..nu {
            let base = x3[grid.index(i, 0)];
            for j in 1..nv {
                x3[grid.index(i, j)] = base + cols[i][j];
            }
        }
    }

    let f12: Vec<(Complex64, Complex64)> = field
        .samples
        .iter()
        .enumerate()
        .map(|(k, s)| integrand_f12(s, h, x3[k]))
        .collect::<Result<_>>()?;

    fn integrate_coord<F>(grid: &GridInfo, take: F, seed_val: f64) -> Vec<f64>
    where
        F: Fn(usize) -> Complex64 + Sync + Send,
    {
        let (nu, nv) = (grid.nu, grid.nv);
        let mut out = vec![0.0; nu * nv];
        let row: Vec<f64> = (0..nu).map(|i| 2.0 * take(grid.index(i, 0)).re).collect();
        let cum = cumulative_integral4(&row, grid.du);
        for i in 0..nu {
            out[grid.index(i, 0)] = seed_val + cum[i];
        }
        let cols: Vec<Vec<f64>> = map_indexed(nu, |i| {
            let col: Vec<f64> = (0..nv).map(|j| -2.0 * take(grid.index(i, j)).im).collect();
            cumulative_integral4(&col, grid.dv)
        });
        for i in 0..nu {
            let base = out[grid.index(i, 0)];
            for j in 1..nv {
                out[grid.index(i, j)] = base + cols[i][j];
            }
        }
        out
    }
    let x1 = integrate_coord(&grid, |k| f12[k].0, seed.x1);
    let x2 = integrate_coord(&grid, |k| f12[k].1, seed.x2);

    // Plaquette loop defects (trapezoid circulation) for the three 1-forms,
    // normalized as a curl density: |circulation| / (du dv ⟨|F|⟩). For exact
    // solution fields this decays like h²; for non-solutions it approaches
    // the genuine curl and stays bounded away from zero.
    let mut max_rel_defect = 0.0f64;
    if nu >= 2 && nv >= 2 {
        let comp = |k: usize, c: usize| match c {
            0 => f12[k].0,
            1 => f12[k].1,
            _ => f3[k],
        };
        for comp_idx in 0..3 {
            let circs: Vec<f64> = map_indexed((nu - 1) * (nv - 1), |p| {
                let (i, j) = (p % (nu - 1), p / (nu - 1));
                let (a, b, c, d) =
                    (grid.index(i, j), grid.index(i + 1, j), grid.index(i + 1, j + 1), grid.index(i, j + 1));
                // increments: dx = 2 Re F du (u-step), dx = -2 Im F dv
                // (v-step); trapezoid averages the endpoints
                let fu = |p0: usize, p1: usize| grid.du * (comp(p0, comp_idx) + comp(p1, comp_idx)).re;
                let fv = |p0: usize, p1: usize| -grid.dv * (comp(p0, comp_idx) + comp(p1, comp_idx)).im;
                (fu(a, b) + fv(b, c) - fu(d, c) - fv(a, d)).abs()
            });
            let max_circ = circs.iter().cloned().fold(0.0f64, f64::max);
            let mean_f = (0..n).map(|k| comp(k, comp_idx).norm()).sum::<f64>() / n as f64;
            max_rel_defect = max_rel_defect.max(max_circ / (grid.du * grid.dv * mean_f + 1e-300));
        }
    }

    let lambda: Vec<f64> = field
        .samples
        .iter()
        .map(|s| {
            let w = s.value;
            let ssum = 1.0 + w.norm_sqr();
            let r = r_of(w, h);
            4.0 * ssum * ssum * s.dz.norm_sqr() / r.norm_sqr()
        })
        .collect();

    if max_rel_defect > opts.defect_tol {
        return Err(Error::IntegrabilityFailure { defect: max_rel_defect, tol: opts.defect_tol });
    }

    let points: Vec<Point> = (0..n).map(|k| Point::new(x1[k], x2[k], x3[k])).collect();
    Ok(SurfacePatch { grid, points, lambda, integrability_residual: max_rel_defect })
}
