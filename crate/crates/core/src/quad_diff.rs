//! The quadratic differential Q(g) = L(g) g_z² + M(g) g_z ḡ_z built from a
//! solved sphere's Gauss map.
//!
//! When the sphere's Gauss map G is an orientation-preserving diffeomorphism,
//! L(G(z)) = -M(G(z)) Ḡ_z / G_z is a well-defined function on the Riemann
//! sphere with |L/M| < 1 and |q⁴ L(q)| bounded at ∞; the resulting Q
//! satisfies a Cauchy-Riemann inequality on every CMC H surface and vanishes
//! identically on the generating sphere. The table below stores L in the
//! double-chart atlas {q, i/q}, interpolates it by inverse-distance weights
//! on the unit sphere, and differentiates it by local quadratic fits.

use crate::error::{Error, Result};
use crate::gauss_map::{coefficients, Chart, ExtendedComplex, GaussField, I};
use crate::par::map_indexed;
use crate::sphere::{face_conformal, CmcSphereMesh};
use num_complex::Complex64;
use serde::Serialize;

/// One interpolation site of the L table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LSample {
    /// Unit vector on S² of the Gauss value (sample position).
    pub dir: [f64; 3],
    /// Chart coordinate in the primary chart (q = g); `None` at g = ∞.
    pub q_primary: Option<Complex64>,
    /// Chart coordinate in the dual chart (w = i/g); `None` at g = 0.
    pub q_dual: Option<Complex64>,
    /// L in the primary chart.
    pub l_primary: Option<Complex64>,
    /// L in the dual chart; L_dual(w) = -L(i/w)/w⁴, bounded by the decay
    /// condition.
    pub l_dual: Option<Complex64>,
}

/// Scattered-data representation of L over the Riemann sphere.
#[derive(Debug, Clone, Serialize)]
pub struct LTable {
    pub h: f64,
    pub samples: Vec<LSample>,
    /// Max |Q| of the generating sphere's own field (interpolation noise
    /// floor for vanishing tests).
    pub sphere_vanish_max: f64,
    /// Mean chordal spacing between neighbouring samples.
    pub mean_spacing: f64,
    /// Max over samples of |L/M| (chart-invariant; < 1 on honest tables).
    pub ratio_max: f64,
    #[serde(skip)]
    buckets: Buckets,
}

/// Latitude-band bucket grid on S² for nearest-neighbour queries.
#[derive(Debug, Clone, Default)]
struct Buckets {
    bands: usize,
    per_band: Vec<usize>,
    offsets: Vec<usize>,
    cells: Vec<Vec<u32>>,
}

impl Buckets {
    fn build(dirs: &[[f64; 3]], bands: usize) -> Buckets {
        let mut per_band = Vec::with_capacity(bands);
        let mut offsets = Vec::with_capacity(bands + 1);
        let mut total = 0usize;
        for b in 0..bands {
            let z0 = -1.0 + 2.0 * (b as f64 + 0.5) / bands as f64;
            let circumference = (1.0 - z0 * z0).max(0.0).sqrt() * 2.0 * std::f64::consts::PI;
            let cells = (circumference / (2.0 / bands as f64)).ceil().max(1.0) as usize;
            per_band.push(cells);
            offsets.push(total);
            total += cells;
        }
        offsets.push(total);
        let mut cells = vec![Vec::new(); total];
        for (i, d) in dirs.iter().enumerate() {
            let (b, c) = Buckets::locate(d, bands, &per_band);
            cells[offsets[b] + c].push(i as u32);
        }
        Buckets { bands, per_band, offsets, cells }
    }

    fn locate(d: &[f64; 3], bands: usize, per_band: &[usize]) -> (usize, usize) {
        let z = d[2].clamp(-1.0, 1.0);
        let b = (((z + 1.0) / 2.0) * bands as f64).min(bands as f64 - 1.0) as usize;
        let phi = d[1].atan2(d[0]).rem_euclid(2.0 * std::f64::consts::PI);
        let c = ((phi / (2.0 * std::f64::consts::PI)) * per_band[b] as f64).min(per_band[b] as f64 - 1.0) as usize;
        (b, c)
    }

    /// Visit candidates in growing band/cell rings around `d` until at
    /// least `min_count` have been seen (or the sphere is exhausted).
    fn for_near(&self, d: &[f64; 3], min_count: usize, mut f: impl FnMut(u32)) {
        let (b0, c0) = Buckets::locate(d, self.bands, &self.per_band);
        let mut ring = 1i64;
        loop {
            let mut count = 0usize;
            for db in -ring..=ring {
                let b = b0 as i64 + db;
                if b < 0 || b >= self.bands as i64 {
                    continue;
                }
                let b = b as usize;
                let nb = self.per_band[b] as i64;
                let c_center = (c0 as f64 / self.per_band[b0] as f64 * nb as f64) as i64;
                let span = ring.min(nb / 2);
                for dc in -span..=span.max(if nb % 2 == 0 { span - 1 } else { span }) {
                    let c = (c_center + dc).rem_euclid(nb) as usize;
                    for &i in &self.cells[self.offsets[b] + c] {
                        f(i);
                        count += 1;
                    }
                }
            }
            if count >= min_count || ring as usize >= self.bands {
                break;
            }
            ring += 1;
        }
    }
}

fn unit_dir(q: ExtendedComplex) -> [f64; 3] {
    q.unit_sphere_point()
}

/// Chart-change for L: L_dual(w) = -L_primary(q) q⁴ at q = i/w.
fn l_primary_to_dual(q: Complex64, l_primary: Complex64) -> Complex64 {
    -l_primary * q.powu(4)
}

/// L_primary(q) = -L_dual(w) w⁴ at w = i/q.
fn l_primary_from_dual(w: Complex64, l_dual: Complex64) -> Complex64 {
    -l_dual * w.powu(4)
}

fn chord(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Build the L table from a converged sphere whose Gauss map Jacobian is
/// positive at every vertex: per vertex, the frame-invariant ratio Ḡ_z/G_z
/// of its incident faces (area weighted, chart aligned) gives
/// L = -M(q) Ḡ_z/G_z at q = G(vertex).
pub fn build_l(m: &CmcSphereMesh) -> Result<LTable> {
    let mesh = &m.mesh;
    let data = &m.data;
    let h = m.target_h;
    let fc = face_conformal(mesh, data);
    let n = mesh.vertex_count();
    let mut jac_acc = vec![0.0; n];
    for (f, c) in fc.iter().enumerate() {
        for &v in &mesh.faces[f] {
            jac_acc[v as usize] += c.area * c.jacobian();
        }
    }
    if let Some((v, &j)) = jac_acc.iter().enumerate().find(|(_, &j)| j <= 0.0) {
        return Err(Error::GaussJacobianNotPositive { vertex: v, jac: j });
    }

    // per-vertex ratio in the vertex's own chart, area-weighted over faces,
    // with the exact chart conversion ρ_dual = -(g²/ḡ²) ρ_primary
    let vertex_chart: Vec<Chart> = data
        .gauss
        .iter()
        .map(|g| if g.norm() > 1.0 { Chart::Dual } else { Chart::Primary })
        .collect();
    let mut ratio_acc = vec![Complex64::new(0.0, 0.0); n];
    let mut w_acc = vec![0.0; n];
    for (f, c) in fc.iter().enumerate() {
        for &v in &mesh.faces[f] {
            let v = v as usize;
            let mut rho = c.ratio();
            if c.chart != vertex_chart[v] {
                let g = c.g;
                rho *= -(g * g) / (g.conj() * g.conj());
            }
            ratio_acc[v] += c.area * rho;
            w_acc[v] += c.area;
        }
    }

    let samples: Vec<LSample> = map_indexed(n, |v| {
        let rho = ratio_acc[v] / w_acc[v];
        let g = data.gauss[v];
        let dir = unit_dir(g);
        let (q_primary, q_dual) = match g {
            ExtendedComplex::Infinity => (None, Some(Complex64::new(0.0, 0.0))),
            ExtendedComplex::Finite(q) if q.norm_sqr() == 0.0 => (Some(q), None),
            ExtendedComplex::Finite(q) => (Some(q), Some(I / q)),
        };
        let (l_primary, l_dual) = match vertex_chart[v] {
            Chart::Primary => {
                let q = q_primary.expect("primary chart coordinate");
                let lp = coefficients(q, h).map(|c| -c.m * rho).unwrap_or_default();
                let ld = q_dual.map(|_| l_primary_to_dual(q, lp));
                (Some(lp), ld)
            }
            Chart::Dual => {
                let w = q_dual.expect("dual chart coordinate");
                let ld = coefficients(w, h).map(|c| -c.m * rho).unwrap_or_default();
                let lp = (w.norm_sqr() > 0.0).then(|| l_primary_from_dual(w, ld));
                (lp, Some(ld))
            }
        };
        LSample { dir, q_primary, q_dual, l_primary, l_dual }
    });

    let dirs: Vec<[f64; 3]> = samples.iter().map(|s| s.dir).collect();
    let bands = ((n as f64).sqrt() / 2.0).ceil().max(4.0) as usize;
    let buckets = Buckets::build(&dirs, bands);

    let mut spacing = 0.0;
    let mut count = 0usize;
    for v in (0..n).step_by((n / 64).max(1)) {
        let mut best = f64::INFINITY;
        buckets.for_near(&dirs[v], 2, |j| {
            if j as usize != v {
                let d = chord(dirs[v], dirs[j as usize]);
                if d < best {
                    best = d;
                }
            }
        });
        if best.is_finite() {
            spacing += best;
            count += 1;
        }
    }
    let mean_spacing = spacing / count.max(1) as f64;
    let ratio_max = (0..n).map(|v| (ratio_acc[v] / w_acc[v]).norm()).fold(0.0f64, f64::max);

    let mut table = LTable { h, samples, sphere_vanish_max: 0.0, mean_spacing, ratio_max, buckets };
    let own = crate::sphere::gauss_field_of_sphere(m);
    let q = q_eval_raw(&own, &table)?;
    table.sphere_vanish_max = q.iter().map(|x| x.norm()).fold(0.0, f64::max);
    Ok(table)
}

const KNN: usize = 8;

impl LTable {
    /// Interpolated L at `g`, returned in the query's chart (`Primary` when
    /// |g| ≤ 1, else `Dual`): inverse-squared-chordal-distance weights over
    /// the nearest table samples on the sphere.
    pub fn l_at(&self, g: ExtendedComplex) -> Result<(Complex64, Chart)> {
        let chart = if g.norm() > 1.0 { Chart::Dual } else { Chart::Primary };
        let dir = unit_dir(g);
        let mut nearest: Vec<(f64, u32)> = Vec::with_capacity(4 * KNN);
        self.buckets.for_near(&dir, 2 * KNN, |j| {
            nearest.push((chord(dir, self.samples[j as usize].dir), j));
        });
        if nearest.is_empty() {
            return Err(Error::InterpolationOutOfSupport);
        }
        nearest.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        nearest.truncate(KNN);
        let mut wsum = 0.0;
        let mut acc = Complex64::new(0.0, 0.0);
        let eps = (1e-3 * self.mean_spacing).powi(2);
        for &(d, j) in &nearest {
            let s = &self.samples[j as usize];
            let l = match chart {
                Chart::Primary => s.l_primary,
                Chart::Dual => s.l_dual,
            };
            let Some(l) = l else { continue };
            let w = 1.0 / (d * d + eps);
            wsum += w;
            acc += w * l;
        }
        if wsum == 0.0 {
            return Err(Error::InterpolationOutOfSupport);
        }
        Ok((acc / wsum, chart))
    }

    /// Decay diagnostic: (max, median) of |q⁴ L(q)| over outer-chart
    /// samples (|q| ≥ 1), which the construction keeps bounded.
    pub fn decay_stats(&self) -> (f64, f64) {
        let mut vals: Vec<f64> = self
            .samples
            .iter()
            .filter_map(|s| match (s.q_primary, s.l_primary) {
                (Some(q), Some(l)) if q.norm() >= 1.0 => Some((q.powu(4) * l).norm()),
                _ => match (s.q_dual, s.l_dual) {
                    (Some(w), Some(ld)) if w.norm_sqr() == 0.0 => Some(ld.norm()),
                    _ => None,
                },
            })
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let max = vals.last().cloned().unwrap_or(f64::NAN);
        let median = vals.get(vals.len() / 2).cloned().unwrap_or(f64::NAN);
        (max, median)
    }
}

/// Q per sample of a Gauss field (no thresholding).
fn q_eval_raw(f: &GaussField, t: &LTable) -> Result<Vec<Complex64>> {
    f.samples
        .iter()
        .map(|s| {
            let (l, chart) = t.l_at(s.gauss_value())?;
            let l = if chart == s.chart {
                l
            } else {
                match s.chart {
                    Chart::Primary => l_primary_from_dual(s.value_in(Chart::Dual), l),
                    Chart::Dual => l_primary_to_dual(s.value_in(Chart::Primary), l),
                }
            };
            let m = coefficients(s.value, t.h)?.m;
            Ok(l * s.dz * s.dz + m * s.dz * s.dzbar.conj())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct QReport {
    /// Q per sample.
    pub q: Vec<Complex64>,
    pub vanish_max: f64,
    /// Max |Q_z̄|/|Q| over grid samples with |Q| above the noise floor
    /// (`None` for unstructured fields).
    pub cr_ratio_max: Option<f64>,
    pub noise_floor: f64,
}

/// Evaluate Q = L(g) g_z² + M(g) g_z ḡ_z on a field; for grid fields also
/// the Cauchy-Riemann ratio with |Q| measured against the noise floor
/// 10 × (the generating sphere's vanish level).
pub fn q_eval(f: &GaussField, t: &LTable) -> Result<QReport> {
    if (f.h - t.h).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "field H = {} does not match table H = {}",
            f.h, t.h
        )));
    }
    let q = q_eval_raw(f, t)?;
    let vanish_max = q.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let noise_floor = 10.0 * t.sphere_vanish_max;
    let cr_ratio_max = f.grid.as_ref().map(|grid| {
        let (nu, nv) = (grid.nu, grid.nv);
        let mut worst: f64 = 0.0;
        for j in 1..nv.saturating_sub(1) {
            for i in 1..nu.saturating_sub(1) {
                let qc = q[grid.index(i, j)];
                if qc.norm() <= noise_floor {
                    continue;
                }
                let qu = (q[grid.index(i + 1, j)] - q[grid.index(i - 1, j)]) / (2.0 * grid.du);
                let qv = (q[grid.index(i, j + 1)] - q[grid.index(i, j - 1)]) / (2.0 * grid.dv);
                let qzbar = (qu + I * qv) / 2.0;
                worst = worst.max(qzbar.norm() / qc.norm());
            }
        }
        worst
    });
    Ok(QReport { q, vanish_max, cr_ratio_max, noise_floor })
}

#[derive(Debug, Clone, Serialize)]
pub struct LVerification {
    /// max |L/M| over table samples (strictly below 1 for honest tables).
    pub ratio_max: f64,
    /// Max residual of (L_q + 2LA)L̄ = (L_q̄ + 2LB + MB̄)M̄ over interior
    /// samples, derivatives from local quadratic fits in each chart.
    pub eq_l_residual: f64,
    /// Decay condition |q⁴L| on the outer chart: (max, median).
    pub decay_max: f64,
    pub decay_median: f64,
}

/// Check |L/M| < 1 and the defining differential equation of L on the
/// table. `scale` multiplies L before checking (for corrupted-table
/// negative controls); honest callers pass 1.
pub fn verify_l_scaled(t: &LTable, scale: f64) -> LVerification {
    let eq_res = |chart: Chart| -> f64 {
        let pts: Vec<(Complex64, Complex64)> = t
            .samples
            .iter()
            .filter_map(|s| {
                let (q, l) = match chart {
                    Chart::Primary => (s.q_primary?, s.l_primary?),
                    Chart::Dual => (s.q_dual?, s.l_dual?),
                };
                (q.norm() <= 1.05).then_some((q, l * scale))
            })
            .collect();
        if pts.len() < 12 {
            return f64::NAN;
        }
        let radius = 4.0 * t.mean_spacing;
        let residuals = map_indexed(pts.len(), |i| {
            let (q0, l0) = pts[i];
            let _ = l0;
            if q0.norm() > 0.95 {
                return 0.0; // boundary band: covered by the other chart
            }
            let mut rows: Vec<([f64; 6], Complex64)> = Vec::new();
            for &(q, l) in &pts {
                let d = q - q0;
                if d.norm() <= radius {
                    let (x, y) = (d.re / radius, d.im / radius);
                    rows.push(([1.0, x, y, 0.5 * x * x, x * y, 0.5 * y * y], l));
                }
            }
            if rows.len() < 8 {
                return 0.0;
            }
            let mut ata = nalgebra::SMatrix::<f64, 6, 6>::zeros();
            let mut atb_re = nalgebra::SVector::<f64, 6>::zeros();
            let mut atb_im = nalgebra::SVector::<f64, 6>::zeros();
            for (r, l) in &rows {
                for a in 0..6 {
                    for b in 0..6 {
                        ata[(a, b)] += r[a] * r[b];
                    }
                    atb_re[a] += r[a] * l.re;
                    atb_im[a] += r[a] * l.im;
                }
            }
            let lu = ata.lu();
            let (Some(cre), Some(cim)) = (lu.solve(&atb_re), lu.solve(&atb_im)) else {
                return 0.0;
            };
            let lx = Complex64::new(cre[1], cim[1]) / radius;
            let ly = Complex64::new(cre[2], cim[2]) / radius;
            let l_q = (lx - I * ly) / 2.0;
            let l_qb = (lx + I * ly) / 2.0;
            let l = Complex64::new(cre[0], cim[0]);
            let co = match coefficients(q0, t.h) {
                Ok(c) => c,
                Err(_) => return 0.0,
            };
            let lhs = (l_q + 2.0 * l * co.a) * l.conj();
            let rhs = (l_qb + 2.0 * l * co.b + co.m * co.b.conj()) * co.m.conj();
            (lhs - rhs).norm()
        });
        residuals.into_iter().fold(0.0, f64::max)
    };
    let (decay_max, decay_median) = t.decay_stats();
    LVerification {
        ratio_max: t.ratio_max * scale,
        eq_l_residual: eq_res(Chart::Primary).max(eq_res(Chart::Dual)),
        decay_max,
        decay_median,
    }
}

pub fn verify_l(t: &LTable) -> LVerification {
    verify_l_scaled(t, 1.0)
}
