//! Jacobi (stability) operator spectra.
//!
//! 𝓛 = Δ + ‖𝓑‖² + Ric(N) with Δ the Laplace-Beltrami operator of the
//! induced metric and Ric(N) = -2 N₃². Discretely: intrinsic cotan
//! stiffness S from Riemannian edge lengths, lumped mass M from Heron
//! areas, potential V on vertices; -𝓛 becomes the pencil
//! (S - M_V) x = λ M x, symmetrized by M^{-1/2} and solved for its lowest
//! eigenvalues with blocked LOBPCG (Jacobi preconditioner).

use super::{shape_operators, CmcSphereMesh};
use crate::error::{Error, Result};
use crate::par::map_indexed;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Symmetric sparse matrix in CSR form.
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(n: usize, triplets: &mut Vec<(u32, u32, f64)>) -> Csr {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut col = Vec::new();
        let mut val: Vec<f64> = Vec::new();
        let mut rows: Vec<u32> = Vec::new();
        for &(r, c, v) in triplets.iter() {
            if let (Some(&lr), Some(&lc)) = (rows.last(), col.last()) {
                if lr == r && lc == c {
                    *val.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col.push(c);
            val.push(v);
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &r in &rows {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr { n, row_ptr, col, val }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let out = map_indexed(self.n, |r| {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.val[k] * x[self.col[k] as usize];
            }
            s
        });
        y.copy_from_slice(&out);
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col[k] as usize == r {
                    d[r] += self.val[k];
                }
            }
        }
        d
    }
}

/// Intrinsic cotan stiffness matrix and lumped (Heron-area) mass vector from
/// Riemannian edge lengths evaluated per triangle.
pub fn laplace_beltrami(mesh: &crate::mesh::TriMesh) -> (Csr, Vec<f64>) {
    use crate::sol3::{metric_eval, Point};
    let n = mesh.vertex_count();
    let mut triplets: Vec<(u32, u32, f64)> = Vec::with_capacity(mesh.face_count() * 12);
    let mut mass = vec![0.0; n];
    for f in 0..mesh.face_count() {
        let [p0, p1, p2] = mesh.face_points(f);
        let cen = Point::new(
            (p0.x1 + p1.x1 + p2.x1) / 3.0,
            (p0.x2 + p1.x2 + p2.x2) / 3.0,
            (p0.x3 + p1.x3 + p2.x3) / 3.0,
        );
        let len = |a: Point, b: Point| {
            let d = [b.x1 - a.x1, b.x2 - a.x2, b.x3 - a.x3];
            metric_eval(cen, d, d).sqrt()
        };
        let (l01, l12, l20) = (len(p0, p1), len(p1, p2), len(p2, p0));
        let s = 0.5 * (l01 + l12 + l20);
        let area2 = (s * (s - l01) * (s - l12) * (s - l20)).max(1e-300);
        let area = area2.sqrt();
        // cot of the angle at vertex k (opposite edge lengths in order)
        let cot = |opp: f64, a: f64, b: f64| (a * a + b * b - opp * opp) / (4.0 * area);
        let c0 = cot(l12, l01, l20);
        let c1 = cot(l20, l01, l12);
        let c2 = cot(l01, l12, l20);
        let idx = mesh.faces[f];
        let mut add = |i: u32, j: u32, w: f64| {
            triplets.push((i, j, -w));
            triplets.push((j, i, -w));
            triplets.push((i, i, w));
            triplets.push((j, j, w));
        };
        add(idx[1], idx[2], 0.5 * c0);
        add(idx[2], idx[0], 0.5 * c1);
        add(idx[0], idx[1], 0.5 * c2);
        for &v in &idx {
            mass[v as usize] += area / 3.0;
        }
    }
    (Csr::from_triplets(n, &mut triplets), mass)
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobiSpectrum {
    /// Lowest eigenvalues of -𝓛, ascending.
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues below -zero_tolerance.
    pub index: usize,
    /// Eigenvalues with |λ| ≤ zero_tolerance (the discrete Killing kernel).
    pub zero_cluster: Vec<f64>,
    /// C·h with h the mean Riemannian edge length.
    pub zero_tolerance: f64,
    /// L2-normalized eigenvectors (columns), for nodal/diagnostic use.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    /// Potential ‖𝓑‖² + Ric(N) per vertex.
    #[serde(skip)]
    pub potential: Vec<f64>,
}

/// Lowest-`k` spectrum of -𝓛 on a converged sphere. `zero_cluster_c`
/// calibrates the kernel detection tolerance |λ| ≤ C·h.
pub fn jacobi_spectrum(m: &CmcSphereMesh, k: usize, zero_cluster_c: f64) -> Result<JacobiSpectrum> {
    let (stiff, mass) = laplace_beltrami(&m.mesh);
    let shapes = shape_operators(&m.mesh, &m.data);
    let potential: Vec<f64> = (0..m.mesh.vertex_count())
        .map(|v| {
            let n3 = m.data.frame_normal[v][2];
            shapes[v].b_norm_sq - 2.0 * n3 * n3
        })
        .collect();
    let n = stiff.n;
    // B = D^{-1/2} (S - M_V) D^{-1/2}, D = diag(mass)
    let dis: Vec<f64> = mass.iter().map(|&x| 1.0 / x.sqrt()).collect();
    let apply = |x: &DVector<f64>, y: &mut DVector<f64>| {
        let xs: Vec<f64> = (0..n).map(|i| x[i] * dis[i]).collect();
        let mut sx = vec![0.0; n];
        stiff.matvec(&xs, &mut sx);
        for i in 0..n {
            y[i] = dis[i] * sx[i] - potential[i] * x[i];
        }
    };
    let diag_b: Vec<f64> = {
        let sd = stiff.diagonal();
        (0..n).map(|i| sd[i] * dis[i] * dis[i] - potential[i]).collect()
    };
    let block = (k + 4).min(n);
    let (eigenvalues_all, vectors) = lobpcg_smallest(n, apply, &diag_b, block, k, 600, 1e-7)?;
    let eigenvalues: Vec<f64> = eigenvalues_all[..k.min(eigenvalues_all.len())].to_vec();
    let zero_tolerance = zero_cluster_c * m.data.mean_edge;
    let index = eigenvalues.iter().filter(|&&l| l < -zero_tolerance).count();
    let zero_cluster: Vec<f64> = eigenvalues.iter().cloned().filter(|l| l.abs() <= zero_tolerance).collect();
    // undo the mass scaling: eigenvectors of the pencil are D^{-1/2} y
    let eigenvectors: Vec<Vec<f64>> = (0..k.min(vectors.ncols()))
        .map(|j| (0..n).map(|i| vectors[(i, j)] * dis[i]).collect())
        .collect();
    Ok(JacobiSpectrum { eigenvalues, index, zero_cluster, zero_tolerance, eigenvectors, potential })
}

/// Blocked LOBPCG for the smallest eigenvalues of a symmetric operator with
/// a diagonal preconditioner. Returns ascending eigenvalues and vectors.
pub fn lobpcg_smallest<F>(
    n: usize,
    apply: F,
    diag: &[f64],
    block: usize,
    want: usize,
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<f64>, DMatrix<f64>)>
where
    F: Fn(&DVector<f64>, &mut DVector<f64>),
{
    let m = block;
    let want = want.min(m);
    // deterministic smooth-ish start block
    let mut x = DMatrix::<f64>::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            let t = (i + 1) as f64 * (j + 1) as f64;
            x[(i, j)] = ((t * 0.618_033_988_749_895).fract() - 0.5) + if j == 0 { 1.0 } else { 0.0 };
        }
    }
    orthonormalize(&mut x);
    let op_scale = diag.iter().map(|d| d.abs()).fold(0.0f64, f64::max).max(1.0);
    let mut p: Option<DMatrix<f64>> = None;
    let apply_block = |b: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, b.ncols());
        for j in 0..b.ncols() {
            let xj = DVector::from_column_slice(b.column(j).as_slice());
            let mut yj = DVector::zeros(n);
            apply(&xj, &mut yj);
            out.set_column(j, &yj);
        }
        out
    };
    let mut last_lambda = vec![f64::INFINITY; m];
    for it in 0..max_iters {
        let ax = apply_block(&x);
        let xtax = x.transpose() * &ax;
        let sym = (&xtax + xtax.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        // ascending order
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let mut rot = DMatrix::zeros(m, m);
        let mut lambda = vec![0.0; m];
        for (jj, &o) in order.iter().enumerate() {
            rot.set_column(jj, &eig.eigenvectors.column(o));
            lambda[jj] = eig.eigenvalues[o];
        }
        let xr = &x * &rot;
        let axr = &ax * &rot;
        // residuals
        let mut resid = DMatrix::zeros(n, m);
        let mut max_res = 0.0f64;
        for j in 0..m {
            let r = axr.column(j) - xr.column(j) * lambda[j];
            if j < want {
                max_res = max_res.max(r.norm());
            }
            resid.set_column(j, &r);
        }
        let drift = lambda
            .iter()
            .zip(last_lambda.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        last_lambda.clone_from(&lambda);
        if max_res <= tol * op_scale || (it > 40 && drift < 1e-13 * op_scale) {
            return Ok((lambda, xr));
        }
        // preconditioned residuals
        let mut w = resid;
        for j in 0..m {
            for i in 0..n {
                let d = diag[i] - lambda[j];
                w[(i, j)] /= if d.abs() > 1e-3 * op_scale { d } else { 1e-3 * op_scale * d.signum().max(0.5) };
            }
        }
        // subspace [X, W, P], orthonormalized
        let cols = m + w.ncols() + p.as_ref().map_or(0, |pp| pp.ncols());
        let mut z = DMatrix::zeros(n, cols);
        z.columns_mut(0, m).copy_from(&xr);
        z.columns_mut(m, w.ncols()).copy_from(&w);
        if let Some(pp) = &p {
            z.columns_mut(m + w.ncols(), pp.ncols()).copy_from(pp);
        }
        let kept = orthonormalize(&mut z);
        let z = z.columns(0, kept).into_owned();
        let az = apply_block(&z);
        let g = z.transpose() * &az;
        let g = (&g + g.transpose()) * 0.5;
        let eigz = g.symmetric_eigen();
        let mut order: Vec<usize> = (0..kept).collect();
        order.sort_by(|&a, &b| eigz.eigenvalues[a].partial_cmp(&eigz.eigenvalues[b]).unwrap());
        let mut y = DMatrix::zeros(kept, m);
        for (jj, &o) in order.iter().take(m).enumerate() {
            y.set_column(jj, &eigz.eigenvectors.column(o));
        }
        let x_new = &z * &y;
        // implicit P: the component of the update orthogonal to the old X
        let overlap = xr.transpose() * &x_new;
        let p_new = &x_new - &xr * overlap;
        x = x_new;
        orthonormalize(&mut x);
        let mut pn = p_new;
        let kept_p = orthonormalize(&mut pn);
        p = if kept_p > 0 { Some(pn.columns(0, kept_p.min(m)).into_owned()) } else { None };
    }
    Err(Error::EigenNonConvergence { iters: max_iters, residual: f64::NAN })
}

/// In-place modified Gram-Schmidt with column dropping; returns the number
/// of independent columns kept (moved to the front).
fn orthonormalize(a: &mut DMatrix<f64>) -> usize {
    let (n, m) = (a.nrows(), a.ncols());
    let mut kept = 0;
    for j in 0..m {
        let mut col = a.column(j).into_owned();
        for _ in 0..2 {
            for k in 0..kept {
                let proj = a.column(k).dot(&col);
                col -= a.column(k) * proj;
            }
        }
        let norm = col.norm();
        if norm > 1e-10 * (n as f64).sqrt() {
            col /= norm;
            a.set_column(kept, &col);
            kept += 1;
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;

    #[test]
    fn csr_matvec() {
        let mut trip = vec![(0u32, 0u32, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (2, 2, 1.0)];
        let m = Csr::from_triplets(3, &mut trip);
        let mut y = vec![0.0; 3];
        m.matvec(&[1.0, 2.0, 3.0], &mut y);
        assert_eq!(y, vec![0.0, 3.0, 3.0]);
    }

    #[test]
    fn laplacian_annihilates_constants_and_is_psd() {
        let mesh = icosphere(2, 0.7);
        let (s, mass) = laplace_beltrami(&mesh);
        let ones = vec![1.0; s.n];
        let mut y = vec![0.0; s.n];
        s.matvec(&ones, &mut y);
        for v in &y {
            assert!(v.abs() < 1e-12);
        }
        assert!(mass.iter().all(|&m| m > 0.0));
        // x^T S x >= 0 for a few deterministic vectors
        for seed in 1..4 {
            let x: Vec<f64> = (0..s.n).map(|i| ((i * seed) as f64 * 0.7).sin()).collect();
            let mut sx = vec![0.0; s.n];
            s.matvec(&x, &mut sx);
            let q: f64 = x.iter().zip(sx.iter()).map(|(a, b)| a * b).sum();
            assert!(q >= -1e-10);
        }
    }

    #[test]
    fn round_sphere_laplace_spectrum() {
        // small coordinate sphere ≈ Euclidean S²(r): -Δ spectrum l(l+1)/r²
        // with multiplicities 1, 3, 5
        let r = 0.05;
        let mesh = icosphere(3, r);
        let (s, mass) = laplace_beltrami(&mesh);
        let n = s.n;
        let dis: Vec<f64> = mass.iter().map(|&x| 1.0 / x.sqrt()).collect();
        let apply = |x: &DVector<f64>, y: &mut DVector<f64>| {
            let xs: Vec<f64> = (0..n).map(|i| x[i] * dis[i]).collect();
            let mut sx = vec![0.0; n];
            s.matvec(&xs, &mut sx);
            for i in 0..n {
                y[i] = dis[i] * sx[i];
            }
        };
        let sd = s.diagonal();
        let diag: Vec<f64> = (0..n).map(|i| sd[i] * dis[i] * dis[i]).collect();
        let (vals, _) = lobpcg_smallest(n, apply, &diag, 12, 9, 800, 1e-8).unwrap();
        let scale = 1.0 / (r * r);
        assert!(vals[0].abs() < 1e-6 * scale, "constant mode {}", vals[0]);
        for j in 1..4 {
            assert!((vals[j] / scale - 2.0).abs() < 0.02, "l=1 mode {} vs 2/r²", vals[j] / scale);
        }
        for j in 4..9 {
            assert!((vals[j] / scale - 6.0).abs() < 0.09, "l=2 mode {} vs 6/r²", vals[j] / scale);
        }
    }
}
