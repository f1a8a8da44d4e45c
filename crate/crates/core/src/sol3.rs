//! Exact geometry of the Lie group Sol₃.
//!
//! The model is ℝ³ with the left-invariant metric
//! `e^{2x₃} dx₁² + e^{-2x₃} dx₂² + dx₃²` and group law
//! `(a₁,a₂,a₃)·(b₁,b₂,b₃) = (a₁ + e^{-a₃} b₁, a₂ + e^{a₃} b₂, a₃ + b₃)`.
//! The canonical left-invariant orthonormal frame is
//! `E₁ = e^{-x₃} ∂₁, E₂ = e^{x₃} ∂₂, E₃ = ∂₃`; vectors expressed in that
//! frame are carried by [`FrameVector`], coordinate vectors by `[f64; 3]`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A position in the model coordinates of Sol₃.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x1: 0.0, x2: 0.0, x3: 0.0 };

    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Point { x1, x2, x3 }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn from_coords(c: [f64; 3]) -> Self {
        Point { x1: c[0], x2: c[1], x3: c[2] }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }
}

/// A tangent vector in the canonical orthonormal frame (E₁, E₂, E₃).
///
/// The frame is orthonormal, so `c1² + c2² + c3²` is the Riemannian squared
/// norm regardless of base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameVector {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl FrameVector {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Self {
        FrameVector { c1, c2, c3 }
    }

    pub fn zero() -> Self {
        FrameVector::new(0.0, 0.0, 0.0)
    }

    pub fn norm(&self) -> f64 {
        (self.c1 * self.c1 + self.c2 * self.c2 + self.c3 * self.c3).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        FrameVector::new(s * self.c1, s * self.c2, s * self.c3)
    }

    pub fn components(&self) -> [f64; 3] {
        [self.c1, self.c2, self.c3]
    }
}

/// Group multiplication `a · b`.
pub fn group_mul(a: Point, b: Point) -> Point {
    Point {
        x1: a.x1 + (-a.x3).exp() * b.x1,
        x2: a.x2 + a.x3.exp() * b.x2,
        x3: a.x3 + b.x3,
    }
}

/// Group inverse: `p · group_inverse(p) = group_inverse(p) · p = identity`.
pub fn group_inverse(p: Point) -> Point {
    Point {
        x1: -p.x3.exp() * p.x1,
        x2: -(-p.x3).exp() * p.x2,
        x3: -p.x3,
    }
}

/// Metric weights `(e^{2x₃}, e^{-2x₃}, 1)` at height `x3`.
#[inline]
pub fn metric_weights(x3: f64) -> [f64; 3] {
    [(2.0 * x3).exp(), (-2.0 * x3).exp(), 1.0]
}

/// Riemannian inner product of coordinate vectors `u`, `v` at `p`.
pub fn metric_eval(p: Point, u: [f64; 3], v: [f64; 3]) -> f64 {
    let w = metric_weights(p.x3);
    w[0] * u[0] * v[0] + w[1] * u[1] * v[1] + u[2] * v[2]
}

/// Riemannian norm of a coordinate vector at `p`.
pub fn metric_norm(p: Point, u: [f64; 3]) -> f64 {
    metric_eval(p, u, u).sqrt()
}

/// Direction of a frame conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameConvert {
    CoordToFrame,
    FrameToCoord,
}

/// Convert vector components between the coordinate basis (∂₁,∂₂,∂₃) and the
/// canonical frame (E₁,E₂,E₃) at base point `p`.
pub fn frame_convert(p: Point, v: [f64; 3], dir: FrameConvert) -> [f64; 3] {
    let e = p.x3.exp();
    match dir {
        FrameConvert::CoordToFrame => [e * v[0], v[1] / e, v[2]],
        FrameConvert::FrameToCoord => [v[0] / e, e * v[1], v[2]],
    }
}

pub fn coord_to_frame(p: Point, v: [f64; 3]) -> FrameVector {
    let c = frame_convert(p, v, FrameConvert::CoordToFrame);
    FrameVector::new(c[0], c[1], c[2])
}

pub fn frame_to_coord(p: Point, v: FrameVector) -> [f64; 3] {
    frame_convert(p, v.components(), FrameConvert::FrameToCoord)
}

/// The connection table `∇̂_{E_i} E_j` in frame components, `i, j ∈ {1,2,3}`.
pub fn connection(i: usize, j: usize) -> FrameVector {
    assert!((1..=3).contains(&i) && (1..=3).contains(&j), "frame indices must be 1..=3");
    match (i, j) {
        (1, 1) => FrameVector::new(0.0, 0.0, -1.0),
        (2, 2) => FrameVector::new(0.0, 0.0, 1.0),
        (1, 3) => FrameVector::new(1.0, 0.0, 0.0),
        (2, 3) => FrameVector::new(0.0, -1.0, 0.0),
        _ => FrameVector::zero(),
    }
}

/// Bilinear connection correction `Γ(v, w) = Σ v_i w_j ∇̂_{E_i} E_j` in frame
/// components. Used by the geodesic flow and covariant finite differences.
#[inline]
pub fn connection_bilinear(v: [f64; 3], w: [f64; 3]) -> [f64; 3] {
    [v[0] * w[2], -v[1] * w[2], -v[0] * w[0] + v[1] * w[1]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureInvariants {
    pub sectional_12: f64,
    pub sectional_13: f64,
    pub sectional_23: f64,
    pub ricci_diag: [f64; 3],
    pub scalar: f64,
}

/// Curvature invariants of Sol₃; constant by homogeneity (the argument exists
/// so call sites read naturally and homogeneity can be asserted in tests).
pub fn curvature_invariants(_p: Point) -> CurvatureInvariants {
    CurvatureInvariants {
        sectional_12: 1.0,
        sectional_13: -1.0,
        sectional_23: -1.0,
        ricci_diag: [0.0, 0.0, -2.0],
        scalar: -2.0,
    }
}

/// Ricci curvature evaluated on a unit frame vector: `Ric(N) = -2 N₃²`.
pub fn ricci_of_frame_vector(n: FrameVector) -> f64 {
    -2.0 * n.c3 * n.c3
}

/// Generators of the isometry group beyond the identity component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IsometryGen {
    /// σ: (x₁,x₂,x₃) ↦ (x₂, -x₁, -x₃); orientation-reversing, order 4.
    Sigma,
    /// τ: (x₁,x₂,x₃) ↦ (-x₁, x₂, x₃); orientation-reversing, order 2.
    Tau,
    /// Left translation by a group element.
    LeftTranslation(Point),
}

impl IsometryGen {
    pub fn apply(&self, p: Point) -> Point {
        match self {
            IsometryGen::Sigma => Point::new(p.x2, -p.x1, -p.x3),
            IsometryGen::Tau => Point::new(-p.x1, p.x2, p.x3),
            IsometryGen::LeftTranslation(a) => group_mul(*a, p),
        }
    }
}

/// An isometry of Sol₃ stored as a word over generators. Isometries of Sol₃
/// are not linear in model coordinates, so there is no matrix form; words
/// compose exactly and apply left-to-right as function composition,
/// i.e. `word = [f, g]` acts as `f(g(p))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    pub word: Vec<IsometryGen>,
}

impl Isometry {
    pub fn identity() -> Self {
        Isometry { word: Vec::new() }
    }

    pub fn sigma() -> Self {
        Isometry { word: vec![IsometryGen::Sigma] }
    }

    pub fn tau() -> Self {
        Isometry { word: vec![IsometryGen::Tau] }
    }

    pub fn left_translation(a: Point) -> Self {
        Isometry { word: vec![IsometryGen::LeftTranslation(a)] }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Isometry) -> Isometry {
        let mut word = self.word.clone();
        word.extend(other.word.iter().cloned());
        Isometry { word }
    }

    pub fn apply(&self, p: Point) -> Point {
        self.word.iter().rev().fold(p, |q, g| g.apply(q))
    }

    /// The 8-element D₄ isotropy words of the origin: {σ^a τ^b}.
    pub fn d4_words() -> Vec<Isometry> {
        let mut out = Vec::with_capacity(8);
        for b in 0..2 {
            for a in 0..4 {
                let mut word = Vec::new();
                word.extend(std::iter::repeat(IsometryGen::Sigma).take(a));
                word.extend(std::iter::repeat(IsometryGen::Tau).take(b));
                out.push(Isometry { word });
            }
        }
        out
    }
}

pub fn isometry_apply(iso: &Isometry, p: Point) -> Point {
    iso.apply(p)
}

/// The Killing field F_k evaluated at `p`, as a coordinate vector.
/// F₁ = ∂₁, F₂ = ∂₂, F₃ = -x₁∂₁ + x₂∂₂ + ∂₃.
pub fn killing_field(k: usize, p: Point) -> [f64; 3] {
    match k {
        1 => [1.0, 0.0, 0.0],
        2 => [0.0, 1.0, 0.0],
        3 => [-p.x1, p.x2, 1.0],
        _ => panic!("Killing field index must be 1..=3"),
    }
}

/// Relative speed drift above which [`geodesic_flow`] rejects its step size.
pub const GEODESIC_DRIFT_TOL: f64 = 1e-6;

fn geodesic_rhs(state: &[f64; 6]) -> [f64; 6] {
    // state = (x1,x2,x3, w1,w2,w3) with w the frame components of velocity
    let [x3, w1, w2, w3] = [state[2], state[3], state[4], state[5]];
    let e = x3.exp();
    let gamma = connection_bilinear([w1, w2, w3], [w1, w2, w3]);
    [w1 / e, e * w2, w3, -gamma[0], -gamma[1], -gamma[2]]
}

/// Integrate the geodesic with initial position `p` and initial velocity `v`
/// (frame components) for time `t` with a classical 4th-order one-step method
/// at fixed step `dt`. Returns the endpoint and final velocity.
///
/// The frame speed ‖w‖ is exactly conserved by the continuous flow; its
/// relative drift is monitored and the run fails if it exceeds
/// [`GEODESIC_DRIFT_TOL`].
pub fn geodesic_flow_state(p: Point, v: FrameVector, t: f64, dt: f64) -> Result<(Point, FrameVector)> {
    assert!(dt > 0.0 && t >= 0.0, "need dt > 0 and t >= 0");
    let mut s = [p.x1, p.x2, p.x3, v.c1, v.c2, v.c3];
    let speed0 = v.norm();
    let mut remaining = t;
    while remaining > 0.0 {
        let h = dt.min(remaining);
        let k1 = geodesic_rhs(&s);
        let mut s2 = s;
        for i in 0..6 {
            s2[i] = s[i] + 0.5 * h * k1[i];
        }
        let k2 = geodesic_rhs(&s2);
        for i in 0..6 {
            s2[i] = s[i] + 0.5 * h * k2[i];
        }
        let k3 = geodesic_rhs(&s2);
        for i in 0..6 {
            s2[i] = s[i] + h * k3[i];
        }
        let k4 = geodesic_rhs(&s2);
        for i in 0..6 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        remaining -= h;
    }
    let w = FrameVector::new(s[3], s[4], s[5]);
    if speed0 > 0.0 {
        let drift = (w.norm() - speed0).abs() / speed0;
        if drift > GEODESIC_DRIFT_TOL {
            return Err(Error::GeodesicDrift { drift, tol: GEODESIC_DRIFT_TOL });
        }
    }
    Ok((Point::new(s[0], s[1], s[2]), w))
}

/// Endpoint of the geodesic flow; see [`geodesic_flow_state`].
pub fn geodesic_flow(p: Point, v: FrameVector, t: f64, dt: f64) -> Result<Point> {
    geodesic_flow_state(p, v, t, dt).map(|(q, _)| q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn point_close(a: Point, b: Point, tol: f64) -> bool {
        close(a.x1, b.x1, tol) && close(a.x2, b.x2, tol) && close(a.x3, b.x3, tol)
    }

    fn rand_point(rng: &mut StdRng) -> Point {
        Point::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-1.5..1.5))
    }

    #[test]
    fn group_identity_and_examples() {
        let p = Point::new(0.3, -1.2, 0.7);
        assert_eq!(group_mul(Point::ORIGIN, p), p);
        assert_eq!(group_mul(p, Point::ORIGIN), p);

        let r = group_mul(Point::new(1.0, 2.0, 3.0), Point::new(1.0, 1.0, 0.0));
        assert!(point_close(r, Point::new(1.0 + (-3.0f64).exp(), 2.0 + 3.0f64.exp(), 3.0), 1e-15));
    }

    #[test]
    fn group_inverse_examples() {
        assert_eq!(group_inverse(Point::ORIGIN), Point::ORIGIN);
        assert!(point_close(group_inverse(Point::new(1.0, 0.0, 0.0)), Point::new(-1.0, 0.0, 0.0), 1e-15));
        let inv = group_inverse(Point::new(0.0, 1.0, 1.0));
        assert!(point_close(inv, Point::new(0.0, -(-1.0f64).exp(), -1.0), 1e-15));

        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let p = rand_point(&mut rng);
            assert!(point_close(group_mul(p, group_inverse(p)), Point::ORIGIN, 1e-12));
            assert!(point_close(group_mul(group_inverse(p), p), Point::ORIGIN, 1e-12));
        }
    }

    #[test]
    fn group_associativity() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let (a, b, c) = (rand_point(&mut rng), rand_point(&mut rng), rand_point(&mut rng));
            let lhs = group_mul(group_mul(a, b), c);
            let rhs = group_mul(a, group_mul(b, c));
            assert!(point_close(lhs, rhs, 1e-12), "{lhs:?} vs {rhs:?}");
        }
    }

    #[test]
    fn metric_examples() {
        let p = Point::new(5.0, -3.0, 0.0);
        assert_eq!(metric_eval(p, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]), 1.0);
        let q = Point::new(0.0, 0.0, 1.0);
        assert!(close(metric_eval(q, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]), 1f64.exp().powi(2), 1e-15));
        assert_eq!(metric_eval(q, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn left_invariance_of_metric() {
        // dL_a is linear: diag(e^{-a3}, e^{a3}, 1)
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..100 {
            let a = rand_point(&mut rng);
            let p = rand_point(&mut rng);
            let u = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let dl = |w: [f64; 3]| [(-a.x3).exp() * w[0], a.x3.exp() * w[1], w[2]];
            let lhs = metric_eval(group_mul(a, p), dl(u), dl(v));
            let rhs = metric_eval(p, u, v);
            assert!(close(lhs, rhs, 1e-10 * (1.0 + rhs.abs())));
        }
    }

    #[test]
    fn frame_convert_examples_and_roundtrip() {
        let p0 = Point::new(1.0, 2.0, 0.0);
        assert_eq!(frame_convert(p0, [0.3, 0.4, 0.5], FrameConvert::CoordToFrame), [0.3, 0.4, 0.5]);

        let p = Point::new(0.0, 0.0, 2f64.ln());
        let f = frame_convert(p, [1.0, 1.0, 1.0], FrameConvert::CoordToFrame);
        assert!(close(f[0], 2.0, 1e-15) && close(f[1], 0.5, 1e-15) && close(f[2], 1.0, 1e-15));

        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..50 {
            let p = rand_point(&mut rng);
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let back = frame_convert(p, frame_convert(p, v, FrameConvert::CoordToFrame), FrameConvert::FrameToCoord);
            for i in 0..3 {
                assert!(close(back[i], v[i], 1e-14));
            }
            // the frame is orthonormal: frame norm == metric norm
            let f = coord_to_frame(p, v);
            assert!(close(f.norm(), metric_norm(p, v), 1e-13));
        }
    }

    #[test]
    fn connection_table() {
        assert_eq!(connection(1, 1), FrameVector::new(0.0, 0.0, -1.0));
        assert_eq!(connection(2, 2), FrameVector::new(0.0, 0.0, 1.0));
        assert_eq!(connection(3, 3), FrameVector::zero());
        assert_eq!(connection(1, 3), FrameVector::new(1.0, 0.0, 0.0));
        assert_eq!(connection(2, 3), FrameVector::new(0.0, -1.0, 0.0));
        assert_eq!(connection(2, 1), FrameVector::zero());
        assert_eq!(connection(3, 1), FrameVector::zero());
        assert_eq!(connection(3, 2), FrameVector::zero());
        assert_eq!(connection(1, 2), FrameVector::zero());
    }

    #[test]
    fn curvature_constants() {
        let mut rng = StdRng::seed_from_u64(19);
        let c0 = curvature_invariants(Point::ORIGIN);
        assert_eq!(c0.sectional_12, 1.0);
        assert_eq!(c0.sectional_13, -1.0);
        assert_eq!(c0.sectional_23, -1.0);
        assert_eq!(c0.ricci_diag, [0.0, 0.0, -2.0]);
        assert_eq!(c0.scalar, -2.0);
        for _ in 0..100 {
            assert_eq!(curvature_invariants(rand_point(&mut rng)), c0);
        }
    }

    #[test]
    fn isometry_examples() {
        let p = Point::new(1.0, 2.0, 3.0);
        assert_eq!(Isometry::sigma().apply(p), Point::new(2.0, -1.0, -3.0));
        assert_eq!(Isometry::tau().apply(p), Point::new(-1.0, 2.0, 3.0));

        let s = Isometry::sigma();
        let s4 = s.compose(&s).compose(&s).compose(&s);
        assert_eq!(s4.apply(p), p);
        let t = Isometry::tau();
        assert_eq!(t.compose(&t).apply(p), p);
        assert_eq!(Isometry::d4_words().len(), 8);
    }

    /// σ and τ preserve the metric: pullback check via finite differences of
    /// test curves through random points.
    #[test]
    fn isometries_preserve_metric() {
        let mut rng = StdRng::seed_from_u64(23);
        let h = 1e-5;
        for iso in [Isometry::sigma(), Isometry::tau()] {
            for _ in 0..50 {
                let p = rand_point(&mut rng);
                let u = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                // differential by central difference along the straight curve p + s u
                let step = |s: f64| {
                    iso.apply(Point::new(p.x1 + s * u[0], p.x2 + s * u[1], p.x3 + s * u[2]))
                };
                let (a, b) = (step(h), step(-h));
                let du = [(a.x1 - b.x1) / (2.0 * h), (a.x2 - b.x2) / (2.0 * h), (a.x3 - b.x3) / (2.0 * h)];
                let lhs = metric_eval(iso.apply(p), du, du);
                let rhs = metric_eval(p, u, u);
                assert!(close(lhs, rhs, 1e-8 * (1.0 + rhs.abs())), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn geodesic_axis() {
        // v = E3 from the origin: the x3-axis is a geodesic
        for t in [0.25, 1.0, 2.0] {
            let q = geodesic_flow(Point::ORIGIN, FrameVector::new(0.0, 0.0, 1.0), t, 1e-3).unwrap();
            assert!(point_close(q, Point::new(0.0, 0.0, t), 1e-10));
        }
    }

    #[test]
    fn geodesic_speed_and_reversibility() {
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..10 {
            let p = rand_point(&mut rng);
            let v = FrameVector::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let (q, w) = geodesic_flow_state(p, v, 1.0, 1e-3).unwrap();
            assert!(close(w.norm(), v.norm(), 1e-8 * v.norm().max(1e-16)));
            // flow back with reversed velocity
            let (r, _) = geodesic_flow_state(q, w.scale(-1.0), 1.0, 1e-3).unwrap();
            assert!(point_close(r, p, 1e-6), "{r:?} vs {p:?}");
        }
    }

    /// Finite-difference Christoffel symbols of `metric_eval` reproduce the
    /// connection table at random points.
    #[test]
    fn connection_matches_fd_christoffels() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..20 {
            let p = rand_point(&mut rng);
            let max_err = fd_connection_error(p);
            assert!(max_err < 1e-6, "max deviation {max_err}");
        }
    }

    /// Max deviation between connection(i,j) and the finite-difference
    /// Christoffel construction at `p`. Also used by the acceptance suite.
    pub fn fd_connection_error(p: Point) -> f64 {
        let h = 1e-5;
        let g = |x: [f64; 3]| {
            let w = metric_weights(x[2]);
            [w[0], w[1], w[2]]
        };
        // dg[k][a] = d g_aa / d x_k (metric is diagonal)
        let mut dg = [[0.0; 3]; 3];
        for k in 0..3 {
            let mut xp = p.coords();
            let mut xm = p.coords();
            xp[k] += h;
            xm[k] -= h;
            let (gp, gm) = (g(xp), g(xm));
            for a in 0..3 {
                dg[k][a] = (gp[a] - gm[a]) / (2.0 * h);
            }
        }
        let w = metric_weights(p.x3);
        // Christoffels of a diagonal metric
        let mut gamma = [[[0.0; 3]; 3]; 3]; // gamma[k][a][b]
        for k in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    let mut s = 0.0;
                    if a == k {
                        s += dg[b][a];
                    }
                    if b == k {
                        s += dg[a][b];
                    }
                    if a == b {
                        s -= dg[k][a];
                    }
                    gamma[k][a][b] = 0.5 * s / w[k];
                }
            }
        }
        // frame fields E_i in coordinates and their coordinate derivatives (FD)
        let e_field = |i: usize, x: [f64; 3]| -> [f64; 3] {
            let p = Point::from_coords(x);
            match i {
                1 => frame_convert(p, [1.0, 0.0, 0.0], FrameConvert::FrameToCoord),
                2 => frame_convert(p, [0.0, 1.0, 0.0], FrameConvert::FrameToCoord),
                _ => [0.0, 0.0, 1.0],
            }
        };
        let mut max_err: f64 = 0.0;
        for i in 1..=3 {
            for j in 1..=3 {
                let ei = e_field(i, p.coords());
                // directional derivative of E_j along E_i by central difference
                let mut xp = p.coords();
                let mut xm = p.coords();
                for k in 0..3 {
                    xp[k] += h * ei[k];
                    xm[k] -= h * ei[k];
                }
                let (ejp, ejm) = (e_field(j, xp), e_field(j, xm));
                let mut dej = [0.0; 3];
                for k in 0..3 {
                    dej[k] = (ejp[k] - ejm[k]) / (2.0 * h);
                }
                let ej = e_field(j, p.coords());
                let mut cov = [0.0; 3];
                for k in 0..3 {
                    let mut s = dej[k];
                    for a in 0..3 {
                        for b in 0..3 {
                            s += gamma[k][a][b] * ei[a] * ej[b];
                        }
                    }
                    cov[k] = s;
                }
                let got = coord_to_frame(p, cov);
                let want = connection(i, j);
                max_err = max_err
                    .max((got.c1 - want.c1).abs())
                    .max((got.c2 - want.c2).abs())
                    .max((got.c3 - want.c3).abs());
            }
        }
        max_err
    }
}
