//! Volume-constrained area descent for CMC spheres.
//!
//! A sphere of constant mean curvature H is area-critical at fixed enclosed
//! volume with Lagrange multiplier 2H. The solver runs projected gradient
//! descent on area along the volume level set, with the multiplier estimate
//! steering an outer volume controller toward the target H, tangential
//! smoothing keeping the Lagrangian mesh well shaped, and coarse-to-fine
//! icosphere levels providing warm starts.

use super::{face_geometry, CmcSphereMesh};
use crate::error::{Error, Result};
use crate::mesh::{icosphere, TriMesh};
use crate::par::map_indexed;
use crate::sol3::{group_inverse, group_mul, metric_eval, Point};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Target vertex count; the icosphere level is the smallest reaching it.
    pub resolution: usize,
    /// Convergence: max over vertices of |H_v - H|.
    pub tol: f64,
    /// Iteration budget per refinement level.
    pub max_iters: usize,
    /// Step dt = step_factor · (mean edge)².
    pub step_factor: f64,
    /// Tangential smoothing weight per iteration.
    pub smoothing: f64,
    /// Triangle-quality gate (4√3 area / Σℓ²; equilateral = 1).
    pub quality_gate: f64,
    /// Zero-cluster constant for the Jacobi spectrum (|λ| ≤ C·h).
    pub zero_cluster_c: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            resolution: 10_000,
            tol: 0.01,
            max_iters: 24_000,
            step_factor: 0.08,
            smoothing: 0.15,
            quality_gate: 0.05,
            zero_cluster_c: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub sphere: CmcSphereMesh,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// H below which the canonical-sphere theory is conjectural; solves are
/// allowed but flagged and the diameter bound is not asserted.
pub const H_GUARANTEED: f64 = 0.577_350_269_189_625_8; // 1/√3



fn min_triangle_quality(mesh: &TriMesh) -> f64 {
    let q = map_indexed(mesh.face_count(), |f| {
        let [p0, p1, p2] = mesh.face_points(f);
        let cen = Point::new(
            (p0.x1 + p1.x1 + p2.x1) / 3.0,
            (p0.x2 + p1.x2 + p2.x2) / 3.0,
            (p0.x3 + p1.x3 + p2.x3) / 3.0,
        );
        let l = |a: Point, b: Point| {
            let d = [b.x1 - a.x1, b.x2 - a.x2, b.x3 - a.x3];
            metric_eval(cen, d, d)
        };
        let (l01, l12, l20) = (l(p0, p1), l(p1, p2), l(p2, p0));
        let (area, _) = super::tri_area_grad(p0, p1, p2);
        4.0 * 3.0f64.sqrt() * area / (l01 + l12 + l20)
    });
    q.into_iter().fold(f64::INFINITY, f64::min)
}

struct IterationState {
    mesh: TriMesh,
    adjacency: Vec<Vec<u32>>,
    target_volume: f64,
    /// Adaptive step multiplier, halved when the residual blows up.
    step_scale: f64,
}

/// One descent step; returns (maxHdev, multiplier estimate H).
fn step(state: &mut IterationState, target_h: f64, opts: &SolveOptions) -> (f64, f64) {
    let n = state.mesh.vertex_count();
    let faces = face_geometry(&state.mesh);
    let mut vertex_area = vec![0.0; n];
    let mut ga = vec![[0.0; 3]; n];
    let mut gv = vec![[0.0; 3]; n];
    let mut normal_acc = vec![[0.0; 3]; n];
    let mut area = 0.0;
    let mut min_face_area = f64::INFINITY;
    for (f, fg) in faces.iter().enumerate() {
        area += fg.area;
        min_face_area = min_face_area.min(fg.area);
        for k in 0..3 {
            let v = state.mesh.faces[f][k] as usize;
            vertex_area[v] += fg.area / 3.0;
            for d in 0..3 {
                ga[v][d] += fg.area_grad[k][d];
                gv[v][d] += fg.vol_grad[k][d];
                normal_acc[v][d] += fg.area * fg.normal[d];
            }
        }
    }
    let dot_all = |a: &Vec<[f64; 3]>, b: &Vec<[f64; 3]>| -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| x[0] * y[0] + x[1] * y[1] + x[2] * y[2]).sum()
    };
    let gg = dot_all(&gv, &gv);
    let mu = dot_all(&ga, &gv) / gg;
    let h_est = mu / 2.0;

    // maxHdev from the same pass
    let mut max_hdev = 0.0f64;
    for v in 0..n {
        let p = state.mesh.vertices[v];
        let mut nv = normal_acc[v];
        let nn = metric_eval(p, nv, nv).sqrt();
        if nn > 0.0 {
            for d in 0..3 {
                nv[d] /= nn;
            }
        }
        let h = -(ga[v][0] * nv[0] + ga[v][1] * nv[1] + ga[v][2] * nv[2]) / (2.0 * vertex_area[v]);
        if h.is_finite() {
            max_hdev = max_hdev.max((h - target_h).abs());
        } else {
            max_hdev = f64::NAN;
        }
        normal_acc[v] = nv;
    }

    // descent direction, mass preconditioned; the smallest face sets the
    // explicit-flow stability limit
    let _ = area;
    let h2 = min_face_area;
    let dt = opts.step_factor * state.step_scale * h2;
    let max_step = 0.25 * h2.sqrt();
    let dirs: Vec<[f64; 3]> = map_indexed(n, |v| {
        let a = vertex_area[v];
        [
            -(ga[v][0] - mu * gv[v][0]) / a,
            -(ga[v][1] - mu * gv[v][1]) / a,
            -(ga[v][2] - mu * gv[v][2]) / a,
        ]
    });
    let max_d = dirs
        .iter()
        .map(|d| (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
        .fold(0.0f64, f64::max);
    let dt = if max_d * dt > max_step { max_step / max_d } else { dt };

    let smoothing = opts.smoothing;
    let vertices: Vec<Point> = {
        let mesh = &state.mesh;
        let adjacency = &state.adjacency;
        map_indexed(n, |v| {
            let p = mesh.vertices[v];
            let mut q = [p.x1 + dt * dirs[v][0], p.x2 + dt * dirs[v][1], p.x3 + dt * dirs[v][2]];
            // tangential smoothing toward the neighbour centroid
            let nb = &adjacency[v];
            if !nb.is_empty() && smoothing > 0.0 {
                let mut c = [0.0; 3];
                for &w in nb {
                    let pw = mesh.vertices[w as usize];
                    c[0] += pw.x1;
                    c[1] += pw.x2;
                    c[2] += pw.x3;
                }
                for d in 0..3 {
                    c[d] = c[d] / nb.len() as f64 - p.coords()[d];
                }
                let nv = normal_acc[v];
                let along = metric_eval(p, c, nv);
                for d in 0..3 {
                    q[d] += smoothing * (c[d] - along * nv[d]);
                }
            }
            Point::new(q[0], q[1], q[2])
        })
    };
    state.mesh.vertices = vertices;

    // volume restoration (two corrections with the pre-move gradient)
    for _ in 0..2 {
        let vol = state.mesh.enclosed_volume();
        let corr = (state.target_volume - vol) / gg;
        for v in 0..n {
            state.mesh.vertices[v].x1 += corr * gv[v][0];
            state.mesh.vertices[v].x2 += corr * gv[v][1];
            state.mesh.vertices[v].x3 += corr * gv[v][2];
        }
    }

    (max_hdev, h_est)
}

/// Relax at fixed target volume until tolerance, plateau, or the budget
/// runs out. Returns (iterations, final hdev, final multiplier H).
fn relax_fixed_volume(
    state: &mut IterationState,
    target_h: f64,
    tol: f64,
    budget: usize,
    opts: &SolveOptions,
) -> Result<(usize, f64, f64)> {
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let mut last = (f64::MAX / 4.0, 0.0);
    let trace = std::env::var_os("SOLCMC_TRACE").is_some();
    for it in 0..budget {
        let (hdev, h_est) = step(state, target_h, opts);
        last = (hdev, h_est);
        if trace && it % 100 == 0 {
            eprintln!(
                "    it {it}: hdev {hdev:.5} Hest {h_est:.5} V {:.5} Vt {:.5} n {}",
                state.mesh.enclosed_volume(),
                state.target_volume,
                state.mesh.vertex_count()
            );
        }
        if !hdev.is_finite() {
            return Err(Error::NonConvergence { iters: it + 1, hdev });
        }
        if hdev < best - 1e-6 * tol {
            best = hdev;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if hdev <= tol {
            return Ok((it + 1, hdev, h_est));
        }
        // residual blow-up: back the step off and keep going
        if it > 30 && hdev > 5.0 * best && state.step_scale > 1.0 / 64.0 {
            state.step_scale *= 0.5;
            since_best = 0;
        }
        // plateau: this level cannot improve at the current volume
        if since_best > 300 {
            return Ok((it + 1, hdev, h_est));
        }
        if it % 200 == 199 {
            let q = min_triangle_quality(&state.mesh);
            if q < opts.quality_gate {
                return Err(Error::DegenerateTriangle { quality: q, gate: opts.quality_gate });
            }
            if !state.mesh.vertices.iter().all(|p| p.is_finite()) {
                return Err(Error::NonConvergence { iters: it + 1, hdev: f64::NAN });
            }
        }
    }
    Ok((budget, last.0, last.1))
}

/// Alternate fixed-volume relaxation with discrete Newton updates of the
/// volume target: each outer round retargets the volume from the converged
/// multiplier via the near-round model dH/H ≈ -dV/(3V). Separating the two
/// timescales avoids the feedback oscillation a continuously running
/// controller sets up against the slowly relaxing surface.
fn relax_level(
    state: &mut IterationState,
    target_h: f64,
    tol: f64,
    opts: &SolveOptions,
) -> Result<(usize, f64)> {
    let mut total = 0usize;
    let mut hdev = f64::INFINITY;
    for _round in 0..12 {
        let budget = opts.max_iters.saturating_sub(total).min(opts.max_iters / 3 + 500);
        if budget == 0 {
            break;
        }
        let (iters, hd, h_est) = relax_fixed_volume(state, target_h, tol, budget, opts)?;
        total += iters;
        hdev = hd;
        let h_gap = (h_est - target_h) / target_h;
        if hdev <= tol && h_gap.abs() <= 0.25 * tol / target_h.abs() {
            return Ok((total, hdev));
        }
        if total >= opts.max_iters {
            break;
        }
        // retarget the volume (damped Newton step, capped per round)
        let rel = (3.0 * h_gap * 0.9).clamp(-0.5, 0.5);
        state.target_volume *= 1.0 + rel;
    }
    Ok((total, hdev))
}

fn icosphere_level_for(resolution: usize) -> usize {
    let mut level = 0;
    while 10 * 4usize.pow(level as u32) + 2 < resolution && level < 7 {
        level += 1;
    }
    level
}

/// Solve for the CMC sphere with the given target H, starting from a
/// coordinate icosphere of Euclidean radius 1/H and refining to the target
/// resolution. The converged mesh is centered so its volume centroid (the
/// symmetry point) sits at the origin.
pub fn solve(h: f64, opts: &SolveOptions) -> Result<SolveOutcome> {
    if h <= 0.0 {
        return Err(Error::InvalidParameter("sphere solves need H > 0".into()));
    }
    let final_level = icosphere_level_for(opts.resolution);
    let start_level = final_level.min(3);
    let mesh = icosphere(start_level, 1.0 / h);
    solve_from(mesh, start_level, final_level, h, opts)
}

/// Solve starting from a given mesh (used by warm starts); `level` counts
/// remaining refinements via `final_level - start_level`.
fn solve_from(
    mesh: TriMesh,
    start_level: usize,
    final_level: usize,
    h: f64,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    let mut warnings = Vec::new();
    if h <= H_GUARANTEED {
        warnings.push(format!(
            "H = {h} is at or below 1/sqrt(3) ≈ {H_GUARANTEED:.6}: existence of the canonical sphere is conjectural there; diameter bound not asserted"
        ));
    }
    let mut state = IterationState {
        adjacency: mesh.vertex_adjacency(),
        target_volume: mesh.enclosed_volume(),
        mesh,
        step_scale: 1.0,
    };
    let mut iterations = 0;
    for level in start_level..=final_level {
        let last = level == final_level;
        // coarse levels only pre-relax; the tolerance binds on the last level
        let tol_level = if last { opts.tol } else { opts.tol * 2.0 };
        let (iters, hdev) = relax_level(&mut state, h, tol_level, opts)?;
        iterations += iters;
        if last && hdev > opts.tol {
            return Err(Error::NonConvergence { iters: iterations, hdev });
        }
        if !last {
            state.mesh = state.mesh.subdivide_midpoint();
            state.adjacency = state.mesh.vertex_adjacency();
            state.target_volume = state.mesh.enclosed_volume();
        }
    }
    // center: move the volume centroid (the symmetry point) to the origin
    let c = state.mesh.volume_centroid();
    let shift = group_inverse(c);
    for p in &mut state.mesh.vertices {
        *p = group_mul(shift, *p);
    }
    let sphere = CmcSphereMesh::from_mesh(state.mesh, h)?;
    Ok(SolveOutcome { sphere, iterations, warnings })
}

/// One entry of a continued family.
#[derive(Debug, Clone)]
pub struct FamilyEntry {
    pub h: f64,
    pub sphere: CmcSphereMesh,
    pub area: f64,
    pub volume: f64,
    pub iterations: usize,
}

/// Warm-started solves along `h_targets` (processed in the given order,
/// starting from `m0`). Breaks with [`Error::ContinuationBreak`] carrying
/// the last good H if a solve diverges.
pub fn continue_family(m0: &CmcSphereMesh, h_targets: &[f64], opts: &SolveOptions) -> Result<Vec<FamilyEntry>> {
    let mut out = Vec::new();
    let mut current = m0.clone();
    let mut last_good = m0.target_h;
    for &h in h_targets {
        let res = if (h - current.target_h).abs() < 1e-12 {
            Ok(SolveOutcome { sphere: current.clone(), iterations: 0, warnings: Vec::new() })
        } else {
            let final_level = icosphere_level_for(opts.resolution);
            solve_from(current.mesh.clone(), final_level, final_level, h, opts)
        };
        match res {
            Ok(outcome) => {
                let data = &outcome.sphere.data;
                out.push(FamilyEntry {
                    h,
                    area: data.area,
                    volume: data.volume,
                    sphere: outcome.sphere.clone(),
                    iterations: outcome.iterations,
                });
                current = outcome.sphere;
                last_good = h;
            }
            Err(e) => {
                return Err(Error::ContinuationBreak { h: last_good, source: Box::new(e) });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_solve_converges_h2() {
        // H = 2 at coarse resolution: quick smoke test of the full loop
        let opts = SolveOptions { resolution: 600, tol: 0.02, ..Default::default() };
        let out = solve(2.0, &opts).unwrap();
        assert!(out.sphere.max_h_deviation() <= 0.02, "hdev {}", out.sphere.max_h_deviation());
        // centered: volume centroid at the origin
        let c = out.sphere.mesh.volume_centroid();
        assert!(c.x1.abs() < 1e-8 && c.x2.abs() < 1e-8 && c.x3.abs() < 1e-8);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn low_h_emits_conjecture_warning() {
        let opts = SolveOptions { resolution: 200, tol: 0.25, max_iters: 300, ..Default::default() };
        // H below 1/√3 still runs, with a warning
        let out = solve(0.5, &opts);
        if let Ok(o) = out {
            assert!(!o.warnings.is_empty());
        }
    }

    #[test]
    fn invalid_h_rejected() {
        assert!(solve(0.0, &SolveOptions::default()).is_err());
        assert!(solve(-1.0, &SolveOptions::default()).is_err());
    }
}
