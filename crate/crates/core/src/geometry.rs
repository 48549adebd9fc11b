//! Upper half-plane model: ideal boundary points in homogeneous coordinates,
//! Mobius transformations, cross-ratios, shears and the wedge distance.

use thiserror::Error;

/// Tolerance for detecting coincident boundary points via the homogeneous
/// cross product of unit-normalized representatives.
pub const COINCIDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("cross-ratio requires four pairwise distinct boundary points")]
    DegenerateQuadruple,
    #[error("geodesics are not asymptotic (no shared ideal endpoint)")]
    NotAsymptotic,
    #[error("geodesic does not separate the two triangles")]
    NotSeparating,
    #[error("triangles are not adjacent along a common edge")]
    NotAdjacent,
    #[error("logarithm argument is not positive: {0}")]
    NonPositiveArgument(f64),
    #[error("matrix is not hyperbolic (|trace| = {0} <= 2)")]
    NonHyperbolic(f64),
    #[error("degenerate construction: {0}")]
    Degenerate(&'static str),
}

/// Point of the ideal boundary R u {inf} as a homogeneous pair (p, q),
/// kept unit-normalized with q >= 0 (and p = 1 when q = 0).
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint {
    pub p: f64,
    pub q: f64,
}

impl BoundaryPoint {
    pub fn new(p: f64, q: f64) -> Self {
        let mut b = BoundaryPoint { p, q };
        b.normalize();
        b
    }

    pub fn finite(x: f64) -> Self {
        BoundaryPoint::new(x, 1.0)
    }

    pub fn infinity() -> Self {
        BoundaryPoint { p: 1.0, q: 0.0 }
    }

    fn normalize(&mut self) {
        let n = self.p.hypot(self.q);
        assert!(n > 0.0 && n.is_finite(), "degenerate boundary point");
        self.p /= n;
        self.q /= n;
        if self.q < 0.0 || (self.q == 0.0 && self.p < 0.0) {
            self.p = -self.p;
            self.q = -self.q;
        }
    }

    pub fn is_infinity(&self) -> bool {
        self.q.abs() <= COINCIDENCE_TOL
    }

    /// Value as f64; infinity maps to f64::INFINITY.
    pub fn as_f64(&self) -> f64 {
        if self.is_infinity() {
            f64::INFINITY
        } else {
            self.p / self.q
        }
    }

    /// Homogeneous difference a - b (numerator of the affine difference).
    pub fn cross(a: &BoundaryPoint, b: &BoundaryPoint) -> f64 {
        a.p * b.q - b.p * a.q
    }

    pub fn approx_eq(&self, other: &BoundaryPoint) -> bool {
        Self::cross(self, other).abs() <= COINCIDENCE_TOL
    }
}

/// Point of the open upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UhpPoint {
    pub x: f64,
    pub y: f64,
}

impl UhpPoint {
    pub fn new(x: f64, y: f64) -> Self {
        assert!(y > 0.0, "upper half-plane point needs y > 0");
        UhpPoint { x, y }
    }
}

/// Hyperbolic distance between two points of the upper half-plane.
pub fn uhp_distance(a: UhpPoint, b: UhpPoint) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let u = (dx * dx + dy * dy) / (2.0 * a.y * b.y);
    // acosh(1 + u) in a form stable near u = 0
    (u + (u * (u + 2.0)).sqrt()).ln_1p()
}

/// Unoriented geodesic given by its two (distinct) ideal endpoints.
#[derive(Debug, Clone, Copy)]
pub struct Geodesic {
    pub e1: BoundaryPoint,
    pub e2: BoundaryPoint,
}

impl Geodesic {
    pub fn new(e1: BoundaryPoint, e2: BoundaryPoint) -> Result<Self, GeomError> {
        if e1.approx_eq(&e2) {
            return Err(GeomError::Degenerate("geodesic endpoints coincide"));
        }
        Ok(Geodesic { e1, e2 })
    }
}

/// Ideal triangle as a positively oriented vertex triple.
#[derive(Debug, Clone, Copy)]
pub struct IdealTriangle {
    pub v: [BoundaryPoint; 3],
}

/// Orientation sign of an ordered boundary triple: positive iff the triple is
/// counterclockwise along the ideal boundary of the upper half-plane.
pub fn orientation(a: &BoundaryPoint, b: &BoundaryPoint, c: &BoundaryPoint) -> f64 {
    BoundaryPoint::cross(b, a) * BoundaryPoint::cross(c, b) * BoundaryPoint::cross(c, a)
}

impl IdealTriangle {
    pub fn new(a: BoundaryPoint, b: BoundaryPoint, c: BoundaryPoint) -> Result<Self, GeomError> {
        if a.approx_eq(&b) || b.approx_eq(&c) || a.approx_eq(&c) {
            return Err(GeomError::Degenerate("triangle vertices coincide"));
        }
        if orientation(&a, &b, &c) <= 0.0 {
            return Err(GeomError::Degenerate("triangle vertices not positively oriented"));
        }
        Ok(IdealTriangle { v: [a, b, c] })
    }
}

/// Real Mobius transformation, stored as a 2x2 matrix with det = +1
/// (well defined up to sign).
#[derive(Debug, Clone, Copy)]
pub struct MobiusMap {
    pub m: [[f64; 2]; 2],
}

impl MobiusMap {
    pub fn identity() -> Self {
        MobiusMap { m: [[1.0, 0.0], [0.0, 1.0]] }
    }

    /// Build from raw entries; requires positive determinant.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, GeomError> {
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return Err(GeomError::Degenerate("mobius matrix needs positive determinant"));
        }
        let s = det.sqrt();
        Ok(MobiusMap { m: [[a / s, b / s], [c / s, d / s]] })
    }

    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        let a = &self.m;
        let b = &other.m;
        // renormalize to damp rounding drift in long products
        MobiusMap::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
        .expect("product of unimodular matrices is unimodular")
    }

    pub fn inverse(&self) -> MobiusMap {
        let m = &self.m;
        MobiusMap { m: [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]] }
    }

    pub fn apply_boundary(&self, b: &BoundaryPoint) -> BoundaryPoint {
        let m = &self.m;
        BoundaryPoint::new(m[0][0] * b.p + m[0][1] * b.q, m[1][0] * b.p + m[1][1] * b.q)
    }

    pub fn apply_uhp(&self, z: UhpPoint) -> UhpPoint {
        let [[a, b], [c, d]] = self.m;
        let den = (c * z.x + d) * (c * z.x + d) + c * c * z.y * z.y;
        let re = (a * z.x + b) * (c * z.x + d) + a * c * z.y * z.y;
        let im = (a * d - b * c) * z.y;
        UhpPoint::new(re / den, im / den)
    }

    pub fn apply_geodesic(&self, g: &Geodesic) -> Geodesic {
        Geodesic { e1: self.apply_boundary(&g.e1), e2: self.apply_boundary(&g.e2) }
    }

    pub fn apply_triangle(&self, t: &IdealTriangle) -> IdealTriangle {
        IdealTriangle {
            v: [
                self.apply_boundary(&t.v[0]),
                self.apply_boundary(&t.v[1]),
                self.apply_boundary(&t.v[2]),
            ],
        }
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    /// Hyperbolic translation along the imaginary axis by signed distance t.
    pub fn axis_translation(t: f64) -> MobiusMap {
        MobiusMap { m: [[(0.5 * t).exp(), 0.0], [0.0, (-0.5 * t).exp()]] }
    }

    /// Map with e1 -> 0, e2 -> inf (det > 0; unique up to axis translation).
    pub fn to_imaginary_axis(g: &Geodesic) -> MobiusMap {
        let (p1, q1) = (g.e1.p, g.e1.q);
        let (p2, q2) = (g.e2.p, g.e2.q);
        MobiusMap::new(q1, -p1, q2, -p2)
            .or_else(|_| MobiusMap::new(q1, -p1, -q2, p2))
            .expect("distinct endpoints give an invertible matrix")
    }

    /// Map sending the ordered triple (a, b, c) to (0, 1, inf). For a
    /// positively oriented triple this is orientation preserving.
    pub fn to_standard(a: &BoundaryPoint, b: &BoundaryPoint, c: &BoundaryPoint) -> Result<MobiusMap, GeomError> {
        // z -> w * (qa z - pa) / (qc z - pc), with w fixing b -> 1
        let n = BoundaryPoint::cross(b, a); // qa*pb - pa*qb
        let m = BoundaryPoint::cross(b, c);
        if n.abs() <= COINCIDENCE_TOL || m.abs() <= COINCIDENCE_TOL {
            return Err(GeomError::Degenerate("triple has coincident points"));
        }
        MobiusMap::new(m * a.q, -m * a.p, n * c.q, -n * c.p)
            .map_err(|_| GeomError::Degenerate("triple is not positively oriented"))
    }

    /// Fixed points of a hyperbolic element: (repelling, attracting).
    pub fn fixed_points(&self) -> Result<(BoundaryPoint, BoundaryPoint), GeomError> {
        let [[a, b], [c, d]] = self.m;
        let tr = a + d;
        if tr.abs() <= 2.0 {
            return Err(GeomError::NonHyperbolic(tr.abs()));
        }
        let disc = (tr * tr - 4.0).sqrt();
        // eigenvalues l1 = (tr - disc)/2 (small), l2 = (tr + disc)/2 (large);
        // fixed point for eigenvalue l solves c p + d q = l q, i.e. p/q = (l - d)/c.
        let fix = |l: f64| -> BoundaryPoint {
            if c.abs() > 1e-300 {
                BoundaryPoint::new(l - d, c)
            } else if (a - l).abs() > (d - l).abs() {
                // c = 0: fixed points are inf and b/(d-a)
                BoundaryPoint::new(b, d - a)
            } else {
                BoundaryPoint::infinity()
            }
        };
        let (l_small, l_big) = if tr > 0.0 {
            ((tr - disc) / 2.0, (tr + disc) / 2.0)
        } else {
            ((tr + disc) / 2.0, (tr - disc) / 2.0)
        };
        Ok((fix(l_small), fix(l_big)))
    }
}

/// Cross-ratio (t1 - t3)(t2 - t4) / ((t1 - t4)(t2 - t3)), computed
/// projectively so that points at infinity need no special casing.
pub fn cross_ratio(
    t1: &BoundaryPoint,
    t2: &BoundaryPoint,
    t3: &BoundaryPoint,
    t4: &BoundaryPoint,
) -> Result<f64, GeomError> {
    let pts = [t1, t2, t3, t4];
    for i in 0..4 {
        for j in (i + 1)..4 {
            if pts[i].approx_eq(pts[j]) {
                return Err(GeomError::DegenerateQuadruple);
            }
        }
    }
    let n = BoundaryPoint::cross(t1, t3) * BoundaryPoint::cross(t2, t4);
    let d = BoundaryPoint::cross(t1, t4) * BoundaryPoint::cross(t2, t3);
    if d == 0.0 {
        return Err(GeomError::DegenerateQuadruple);
    }
    Ok(n / d)
}

/// Shear from the cross-ratio of adjacent triangles [t1,t2,t3], [t1,t3,t4]
/// sharing the edge (t1, t3): s = log(kappa - 1).
pub fn shear_from_cross_ratio(da: &IdealTriangle, db: &IdealTriangle) -> Result<f64, GeomError> {
    // locate the shared edge: two vertices of da that also occur in db
    let mut shared: Vec<(usize, usize)> = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if da.v[i].approx_eq(&db.v[j]) {
                shared.push((i, j));
            }
        }
    }
    if shared.len() != 2 {
        return Err(GeomError::NotAdjacent);
    }
    // rotate labels of da to (t1, t2, t3) with t2 the non-shared vertex
    let shared_a = [shared[0].0, shared[1].0];
    let free_a = (0..3).find(|i| !shared_a.contains(i)).unwrap();
    let t2 = &da.v[free_a];
    let t1 = &da.v[(free_a + 2) % 3];
    let t3 = &da.v[(free_a + 1) % 3];
    let free_b = (0..3)
        .find(|&j| !shared.iter().any(|&(_, jj)| jj == j))
        .unwrap();
    let t4 = &db.v[free_b];
    // db must be (t1, t3, t4) up to rotation
    let jb1 = (0..3).find(|&j| db.v[j].approx_eq(t1)).unwrap();
    if !db.v[(jb1 + 1) % 3].approx_eq(t3) {
        return Err(GeomError::NotAdjacent);
    }
    let kappa = cross_ratio(t1, t2, t3, t4)?;
    if kappa <= 1.0 {
        return Err(GeomError::NonPositiveArgument(kappa - 1.0));
    }
    Ok((kappa - 1.0).ln())
}

/// Midpoints (incircle tangency points) of the sides of an ideal triangle,
/// returned in side order: (v0,v1), (v1,v2), (v2,v0).
pub fn midpoints(t: &IdealTriangle) -> Result<[UhpPoint; 3], GeomError> {
    let m = MobiusMap::to_standard(&t.v[0], &t.v[1], &t.v[2])?;
    let inv = m.inverse();
    Ok([
        inv.apply_uhp(UhpPoint::new(0.5, 0.5)), // side (0,1)
        inv.apply_uhp(UhpPoint::new(1.0, 1.0)), // side (1,inf)
        inv.apply_uhp(UhpPoint::new(0.0, 1.0)), // side (inf,0)
    ])
}

/// Project p0 onto `target` along the horocycle centered at the ideal point
/// p_inf (which must be an endpoint of both the source context and target).
pub fn horocyclic_projection(
    target: &Geodesic,
    p_inf: &BoundaryPoint,
    p0: UhpPoint,
) -> Result<UhpPoint, GeomError> {
    let other = if target.e1.approx_eq(p_inf) {
        target.e2
    } else if target.e2.approx_eq(p_inf) {
        target.e1
    } else {
        return Err(GeomError::NotAsymptotic);
    };
    // send p_inf -> inf; horocycles become horizontal lines
    let n = if p_inf.is_infinity() {
        MobiusMap::identity()
    } else {
        // z -> -1 / (z - p), matrix [[0,-1],[q,-p]] has det q... use homogeneous
        MobiusMap::new(0.0, -1.0, p_inf.q, -p_inf.p)
            .or_else(|_| MobiusMap::new(0.0, 1.0, -p_inf.q, p_inf.p))
            .map_err(|_| GeomError::Degenerate("projection center"))?
    };
    let w = n.apply_uhp(p0);
    let foot = n.apply_boundary(&other);
    if foot.is_infinity() {
        return Err(GeomError::Degenerate("target degenerates under projection"));
    }
    Ok(n.inverse().apply_uhp(UhpPoint::new(foot.as_f64(), w.y)))
}

fn triangle_side_sign(t: &IdealTriangle) -> Result<f64, GeomError> {
    // after mapping the reference geodesic to the imaginary axis, a triangle
    // disjoint from the axis has all vertices in x >= 0 or all in x <= 0
    let mut sign = 0.0f64;
    for v in &t.v {
        if v.is_infinity() {
            continue;
        }
        let x = v.as_f64();
        if x.abs() <= COINCIDENCE_TOL {
            continue;
        }
        if sign == 0.0 {
            sign = x.signum();
        } else if sign != x.signum() {
            return Err(GeomError::NotSeparating);
        }
    }
    if sign == 0.0 {
        return Err(GeomError::NotSeparating);
    }
    Ok(sign)
}

/// Side of `t` facing the imaginary axis: the side joining the extreme
/// vertices, with infinity counted as +inf on the right half and -inf on the
/// left half. Returns the side's vertex indices.
fn facing_side(t: &IdealTriangle, side_sign: f64) -> (usize, usize) {
    let key = |v: &BoundaryPoint| -> f64 {
        if v.is_infinity() {
            side_sign * f64::INFINITY
        } else {
            v.as_f64()
        }
    };
    let mut lo = 0usize;
    let mut hi = 0usize;
    for i in 1..3 {
        if key(&t.v[i]) < key(&t.v[lo]) {
            lo = i;
        }
        if key(&t.v[i]) > key(&t.v[hi]) {
            hi = i;
        }
    }
    (lo, hi)
}

/// Geometric shear of two ideal triangles separated by (and asymptotic to)
/// the geodesic g: the signed distance between the horocyclic projections of
/// the facing-side midpoints, with g oriented so that `da` lies on the left.
pub fn shear(da: &IdealTriangle, db: &IdealTriangle, g: &Geodesic) -> Result<f64, GeomError> {
    let m = MobiusMap::to_imaginary_axis(g);
    let a = m.apply_triangle(da);
    let b = m.apply_triangle(db);
    let sa = triangle_side_sign(&a)?;
    let sb = triangle_side_sign(&b)?;
    if sa == sb {
        return Err(GeomError::NotSeparating);
    }

    let axis = Geodesic::new(BoundaryPoint::finite(0.0), BoundaryPoint::infinity()).unwrap();
    let project = |t: &IdealTriangle, sign: f64| -> Result<f64, GeomError> {
        let (lo, hi) = facing_side(t, sign);
        // facing side as an ordered side of the triangle: (i, i+1)
        let i = if (lo + 1) % 3 == hi { lo } else { hi };
        let j = (i + 1) % 3;
        let mids = midpoints(t)?;
        let mid = mids[i];
        let on_axis = |v: &BoundaryPoint| {
            v.is_infinity() || v.as_f64().abs() <= COINCIDENCE_TOL
        };
        let (vi, vj) = (&t.v[i], &t.v[j]);
        let h = if on_axis(vi) && on_axis(vj) {
            mid // facing side is the axis itself
        } else if on_axis(vi) {
            horocyclic_projection(&axis, vi, mid)?
        } else if on_axis(vj) {
            horocyclic_projection(&axis, vj, mid)?
        } else {
            return Err(GeomError::NotAsymptotic);
        };
        Ok(h.y.ln())
    };

    let ta = project(&a, sa)?;
    let tb = project(&b, sb)?;
    // axis oriented upward = (0 -> inf); its left side is x < 0
    Ok(if sa < 0.0 { tb - ta } else { ta - tb })
}

/// Translation length of a hyperbolic Mobius map: 2 acosh(|tr|/2).
pub fn translation_length(m: &MobiusMap) -> Result<f64, GeomError> {
    let t = m.trace().abs();
    if t <= 2.0 {
        return Err(GeomError::NonHyperbolic(t));
    }
    let h = t / 2.0;
    Ok(2.0 * (h + (h * h - 1.0).sqrt()).ln())
}

/// Wedge distance d(x, y) = hyperbolic distance between i e^x and 1 + i e^y,
/// evaluated in the log domain so that large |x|, |y| stay cancellation-free:
/// cosh d - 1 = e^{-(x+y)}/2 + 2 sinh^2((x-y)/2).
pub fn wedge_distance(x: f64, y: f64) -> f64 {
    let a = -(x + y) - std::f64::consts::LN_2; // log of first term
    let w = 0.5 * (x - y).abs();
    // log(2 sinh^2 w) = ln2 + 2 (w + ln((1 - e^{-2w})/2)), care near w = 0
    let log_u = if w == 0.0 {
        a
    } else {
        // ln sinh(w) = w + ln(1 - e^{-2w}) - ln 2 for w > 0
        let log_sinh = w + (-(-2.0 * w).exp()).ln_1p() - std::f64::consts::LN_2;
        let b = std::f64::consts::LN_2 + 2.0 * log_sinh;
        logsumexp2(a, b)
    };
    if log_u > 33.0 {
        // d = acosh(1+u) ~ ln(2u) + ln(1 + 1/u + ...) with error < e^{-33}
        std::f64::consts::LN_2 + log_u
    } else {
        let u = log_u.exp();
        (u + (u * (u + 2.0)).sqrt()).ln_1p()
    }
}

fn logsumexp2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Gradient of the wedge distance.
pub fn wedge_distance_grad(x: f64, y: f64) -> [f64; 2] {
    let d = x - y;
    if d.abs() > 600.0 {
        // asymptotic regime: d(x,y) ~ |x - y|
        let s = d.signum();
        return [s, -s];
    }
    let e = (-(x + y)).exp();
    let u = 0.5 * e + 2.0 * (0.5 * d).sinh().powi(2);
    let ux = -0.5 * e + d.sinh();
    let uy = -0.5 * e - d.sinh();
    let s = (u * (u + 2.0)).sqrt();
    if s == 0.0 {
        return [0.0, 0.0];
    }
    [ux / s, uy / s]
}

/// Hessian of the wedge distance, row-major [[dxx, dxy], [dxy, dyy]].
pub fn wedge_distance_hess(x: f64, y: f64) -> [[f64; 2]; 2] {
    let d = x - y;
    if d.abs() > 600.0 {
        return [[0.0, 0.0], [0.0, 0.0]];
    }
    let e = (-(x + y)).exp();
    let u = 0.5 * e + 2.0 * (0.5 * d).sinh().powi(2);
    let ux = -0.5 * e + d.sinh();
    let uy = -0.5 * e - d.sinh();
    let uxx = 0.5 * e + d.cosh();
    let uxy = 0.5 * e - d.cosh();
    let s2 = u * (u + 2.0);
    let s = s2.sqrt();
    let s3 = s2 * s;
    let hxx = uxx / s - ux * ux * (u + 1.0) / s3;
    let hxy = uxy / s - ux * uy * (u + 1.0) / s3;
    let hyy = uxx / s - uy * uy * (u + 1.0) / s3;
    [[hxx, hxy], [hxy, hyy]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bp(x: f64) -> BoundaryPoint {
        BoundaryPoint::finite(x)
    }
    fn inf() -> BoundaryPoint {
        BoundaryPoint::infinity()
    }

    #[test]
    fn distance_reference_points() {
        let d = uhp_distance(UhpPoint::new(0.0, 1.0), UhpPoint::new(1.0, 1.0));
        assert_relative_eq!(d, 1.5f64.acosh(), epsilon = 1e-14);
        assert_relative_eq!(d, 0.9624236501192069, epsilon = 1e-14);
        let v = uhp_distance(UhpPoint::new(0.0, 1.0), UhpPoint::new(0.0, 2.0));
        assert_relative_eq!(v, 2.0f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn cross_ratio_standard_quadruple() {
        // (0, 1, inf, -1): kappa = (0-inf)(1+1)/((0+1)(1-inf)) = 2
        let k = cross_ratio(&bp(0.0), &bp(1.0), &inf(), &bp(-1.0)).unwrap();
        assert_relative_eq!(k, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn cross_ratio_rejects_degenerate() {
        assert_eq!(
            cross_ratio(&bp(0.0), &bp(0.0), &inf(), &bp(-1.0)).unwrap_err(),
            GeomError::DegenerateQuadruple
        );
    }

    #[test]
    fn mobius_invariance_of_cross_ratio() {
        let m = MobiusMap::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let pts = [bp(-0.7), bp(0.3), bp(2.0), inf()];
        let k0 = cross_ratio(&pts[0], &pts[1], &pts[2], &pts[3]).unwrap();
        let im: Vec<_> = pts.iter().map(|p| m.apply_boundary(p)).collect();
        let k1 = cross_ratio(&im[0], &im[1], &im[2], &im[3]).unwrap();
        assert_relative_eq!(k0, k1, epsilon = 1e-12);
    }

    #[test]
    fn midpoints_of_standard_triangle() {
        let t = IdealTriangle::new(bp(0.0), bp(1.0), inf()).unwrap();
        let m = midpoints(&t).unwrap();
        assert_relative_eq!(m[0].x, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m[0].y, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m[1].x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m[1].y, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m[2].x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(m[2].y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shear_matches_cross_ratio_on_reference_pair() {
        // [0,1,inf] and [0,inf,-2] share (0,inf); kappa - 1 = 1/2
        let da = IdealTriangle::new(bp(0.0), bp(1.0), inf()).unwrap();
        let db = IdealTriangle::new(bp(0.0), inf(), bp(-2.0)).unwrap();
        let g = Geodesic::new(bp(0.0), inf()).unwrap();
        let s_geo = shear(&da, &db, &g).unwrap();
        let s_cr = shear_from_cross_ratio(&da, &db).unwrap();
        assert_relative_eq!(s_geo, 0.5f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(s_cr, s_geo, epsilon = 1e-12);
        // symmetry
        let s_ba = shear(&db, &da, &g).unwrap();
        assert_relative_eq!(s_ba, s_geo, epsilon = 1e-12);
    }

    #[test]
    fn shear_zero_for_symmetric_pair() {
        let da = IdealTriangle::new(bp(0.0), bp(1.0), inf()).unwrap();
        let db = IdealTriangle::new(bp(0.0), inf(), bp(-1.0)).unwrap();
        let g = Geodesic::new(bp(0.0), inf()).unwrap();
        assert_relative_eq!(shear(&da, &db, &g).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn shear_separator_independence() {
        // chain [0,1,inf], [0,inf,-1], [-1,inf,-3]: shear of outer pair across
        // the middle separator equals the sum of adjacent shears
        let t0 = IdealTriangle::new(bp(0.0), bp(1.0), inf()).unwrap();
        let t1 = IdealTriangle::new(bp(0.0), inf(), bp(-1.0)).unwrap();
        let t2 = IdealTriangle::new(bp(-1.0), inf(), bp(-3.0)).unwrap();
        let g01 = Geodesic::new(bp(0.0), inf()).unwrap();
        let g12 = Geodesic::new(bp(-1.0), inf()).unwrap();
        let s01 = shear(&t0, &t1, &g01).unwrap();
        let s12 = shear(&t1, &t2, &g12).unwrap();
        let s02_a = shear(&t0, &t2, &g01).unwrap();
        let s02_b = shear(&t0, &t2, &g12).unwrap();
        assert_relative_eq!(s02_a, s02_b, epsilon = 1e-12);
        assert_relative_eq!(s02_a, s01 + s12, epsilon = 1e-12);
    }

    #[test]
    fn shear_isometry_invariance() {
        let da = IdealTriangle::new(bp(0.0), bp(1.0), inf()).unwrap();
        let db = IdealTriangle::new(bp(0.0), inf(), bp(-2.5)).unwrap();
        let g = Geodesic::new(bp(0.0), inf()).unwrap();
        let s0 = shear(&da, &db, &g).unwrap();
        let m = MobiusMap::new(3.0, 2.0, 1.0, 1.0).unwrap();
        let s1 = shear(
            &m.apply_triangle(&da),
            &m.apply_triangle(&db),
            &m.apply_geodesic(&g),
        )
        .unwrap();
        assert_relative_eq!(s0, s1, epsilon = 1e-11);
    }

    #[test]
    fn wedge_distance_reference_values() {
        assert_relative_eq!(wedge_distance(0.0, 0.0), 1.5f64.acosh(), epsilon = 1e-14);
        // against the direct uhp formula on moderate values
        for &(x, y) in &[(0.3f64, -1.2f64), (2.0, 2.5), (-3.0, 1.0), (5.0, 5.0)] {
            let direct = uhp_distance(UhpPoint::new(0.0, x.exp()), UhpPoint::new(1.0, y.exp()));
            assert_relative_eq!(wedge_distance(x, y), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn wedge_distance_lemma_bounds_large_args() {
        for &(x, y) in &[(100.0, 100.0), (350.0, 349.0), (-200.0, -200.5), (700.0, 0.0)] {
            let d = wedge_distance(x, y);
            let lo = (x - y).abs();
            let hi = lo + (-x.max(y)).exp();
            assert!(d >= lo - 1e-12, "d={d} below |x-y|={lo}");
            assert!(d <= hi + 1e-12, "d={d} above bound {hi}");
        }
        // decay of d(t,t) for large t
        assert!(wedge_distance(300.0, 300.0) < 1e-100);
    }

    #[test]
    fn wedge_grad_hess_match_finite_differences() {
        let h = 1e-5;
        for &(x, y) in &[(0.0, 0.0), (1.3, -0.7), (-2.0, 0.4), (4.0, 4.5)] {
            let g = wedge_distance_grad(x, y);
            let gx = (wedge_distance(x + h, y) - wedge_distance(x - h, y)) / (2.0 * h);
            let gy = (wedge_distance(x, y + h) - wedge_distance(x, y - h)) / (2.0 * h);
            assert_relative_eq!(g[0], gx, epsilon = 1e-6, max_relative = 1e-6);
            assert_relative_eq!(g[1], gy, epsilon = 1e-6, max_relative = 1e-6);
            let hs = wedge_distance_hess(x, y);
            let hxx = (wedge_distance_grad(x + h, y)[0] - wedge_distance_grad(x - h, y)[0]) / (2.0 * h);
            let hxy = (wedge_distance_grad(x, y + h)[0] - wedge_distance_grad(x, y - h)[0]) / (2.0 * h);
            let hyy = (wedge_distance_grad(x, y + h)[1] - wedge_distance_grad(x, y - h)[1]) / (2.0 * h);
            assert_relative_eq!(hs[0][0], hxx, epsilon = 1e-5, max_relative = 1e-4);
            assert_relative_eq!(hs[0][1], hxy, epsilon = 1e-5, max_relative = 1e-4);
            assert_relative_eq!(hs[1][1], hyy, epsilon = 1e-5, max_relative = 1e-4);
        }
    }

    #[test]
    fn wedge_hessian_positive_definite() {
        for &(x, y) in &[(0.0, 0.0), (2.0, -2.0), (-1.0, 3.0), (6.0, 6.0)] {
            let h = wedge_distance_hess(x, y);
            assert!(h[0][0] > 0.0);
            assert!(h[0][0] * h[1][1] - h[0][1] * h[0][1] > 0.0, "det at ({x},{y})");
        }
    }

    #[test]
    fn translation_length_of_axis_translation() {
        let m = MobiusMap::axis_translation(1.7);
        assert_relative_eq!(translation_length(&m).unwrap(), 1.7, epsilon = 1e-12);
        let p = MobiusMap::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(translation_length(&p), Err(GeomError::NonHyperbolic(_))));
    }

    #[test]
    fn fixed_points_of_hyperbolic_element() {
        let m = MobiusMap::axis_translation(2.0);
        let (r, a) = m.fixed_points().unwrap();
        assert!(r.as_f64().abs() < 1e-12);
        assert!(a.is_infinity());
        // conjugate and check invariance
        let c = MobiusMap::new(1.0, 2.0, 1.0, 3.0).unwrap();
        let n = c.compose(&m).compose(&c.inverse());
        let (r2, a2) = n.fixed_points().unwrap();
        assert_relative_eq!(r2.as_f64(), c.apply_boundary(&r).as_f64(), epsilon = 1e-10);
        assert_relative_eq!(a2.as_f64(), c.apply_boundary(&a).as_f64(), epsilon = 1e-10);
    }

    #[test]
    fn horocyclic_projection_reference() {
        // horocycle at 0 through (x, y) meets the imaginary axis at (x^2+y^2)/y
        let axis = Geodesic::new(bp(0.0), inf()).unwrap();
        let p = horocyclic_projection(&axis, &bp(0.0), UhpPoint::new(0.6, 0.8)).unwrap();
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, (0.36 + 0.64) / 0.8, epsilon = 1e-12);
        // at infinity: horizontal transfer
        let q = horocyclic_projection(&axis, &inf(), UhpPoint::new(3.0, 2.0)).unwrap();
        assert_relative_eq!(q.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(q.y, 2.0, epsilon = 1e-12);
    }
}
