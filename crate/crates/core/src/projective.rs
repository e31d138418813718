//! Projective algebra on RP¹, RP² and RP³.
//!
//! Homogeneous points and matrices are compared after normalization to unit
//! max-norm with the largest component made positive.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectiveError {
    #[error("homogeneous coordinates are all zero")]
    ZeroPoint,
    #[error("non-finite homogeneous coordinate")]
    NonFinite,
    #[error("indeterminate ratio [0:0]")]
    Indeterminate,
    #[error("frame targets {0} and {1} coincide")]
    CoincidentTargets(usize, usize),
    #[error("frame targets are not in general position")]
    Collinear,
    #[error("singular matrix (|det| = {0:e})")]
    Singular(f64),
    #[error("vanishing denominator: input lies on the exceptional plane")]
    VanishingDenominator,
    #[error("leading coefficient w of station {0} is zero")]
    ZeroLeadingCoefficient(usize),
    #[error("degenerate Moebius coefficients")]
    DegenerateCoefficients,
    #[error("zero direction")]
    ZeroDirection,
}

fn canonical<const N: usize>(h: [f64; N]) -> [f64; N] {
    let (mut idx, mut best) = (0, 0.0);
    for (i, x) in h.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    let s = if h[idx] < 0.0 { -best } else { best };
    h.map(|x| x / s)
}

fn check_point<const N: usize>(h: &[f64; N]) -> Result<(), ProjectiveError> {
    if h.iter().any(|x| !x.is_finite()) {
        Err(ProjectiveError::NonFinite)
    } else if h.iter().all(|x| *x == 0.0) {
        Err(ProjectiveError::ZeroPoint)
    } else {
        Ok(())
    }
}

/// A point `[p:q]` of the projective line; `[1:0]` is infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjPoint1 {
    pub h: [f64; 2],
}

impl ProjPoint1 {
    pub fn new(p: f64, q: f64) -> Result<Self, ProjectiveError> {
        let h = [p, q];
        check_point(&h)?;
        Ok(ProjPoint1 { h })
    }

    pub fn finite(v: f64) -> Self {
        ProjPoint1 { h: [v, 1.0] }
    }

    pub fn infinity() -> Self {
        ProjPoint1 { h: [1.0, 0.0] }
    }

    /// Affine value `p/q`, or `None` at infinity.
    pub fn value(&self) -> Option<f64> {
        (self.h[1] != 0.0).then(|| self.h[0] / self.h[1])
    }

    pub fn normalized(&self) -> [f64; 2] {
        canonical(self.h)
    }

    /// Sine of the angle between representatives; 0 iff equal.
    pub fn distance(&self, other: &ProjPoint1) -> f64 {
        let [a, b] = self.h;
        let [c, d] = other.h;
        (a * d - b * c).abs() / (a.hypot(b) * c.hypot(d))
    }

    fn vector(&self) -> Vector2<f64> {
        Vector2::new(self.h[0], self.h[1])
    }
}

/// A point `[p:q:r]` of the projective plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjPoint2 {
    pub h: [f64; 3],
}

impl ProjPoint2 {
    pub fn new(p: f64, q: f64, r: f64) -> Result<Self, ProjectiveError> {
        let h = [p, q, r];
        check_point(&h)?;
        Ok(ProjPoint2 { h })
    }

    pub fn finite(a: f64, b: f64) -> Self {
        ProjPoint2 { h: [a, b, 1.0] }
    }

    /// Affine chart values `(p/r, q/r)`, or `None` on the line at infinity.
    pub fn values(&self) -> Option<(f64, f64)> {
        (self.h[2] != 0.0).then(|| (self.h[0] / self.h[2], self.h[1] / self.h[2]))
    }

    pub fn normalized(&self) -> [f64; 3] {
        canonical(self.h)
    }

    /// Sine of the angle between representatives.
    pub fn distance(&self, other: &ProjPoint2) -> f64 {
        let a = self.vector();
        let b = other.vector();
        a.cross(&b).norm() / (a.norm() * b.norm())
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::from(self.h)
    }

    fn from_vector(v: &Vector3<f64>) -> Result<Self, ProjectiveError> {
        ProjPoint2::new(v[0], v[1], v[2])
    }
}

/// The point `[(a-c):(b-c)]`.
pub fn cross_ratio(a: f64, b: f64, c: f64) -> Result<ProjPoint1, ProjectiveError> {
    ProjPoint1::new(a - c, b - c).map_err(|e| match e {
        ProjectiveError::ZeroPoint => ProjectiveError::Indeterminate,
        other => other,
    })
}

/// An element of PGL(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameChange1 {
    pub matrix: Matrix2<f64>,
}

impl FrameChange1 {
    pub fn new(matrix: Matrix2<f64>) -> Result<Self, ProjectiveError> {
        let det = matrix.determinant();
        if !(det.abs() >= 1e-12 * matrix.norm_squared()) {
            return Err(ProjectiveError::Singular(det));
        }
        Ok(FrameChange1 { matrix })
    }

    pub fn identity() -> Self {
        FrameChange1 {
            matrix: Matrix2::identity(),
        }
    }

    pub fn inverse(&self) -> Self {
        let m = self.matrix;
        FrameChange1 {
            matrix: Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]),
        }
    }

    pub fn compose(&self, first: &FrameChange1) -> Self {
        FrameChange1 {
            matrix: self.matrix * first.matrix,
        }
    }
}

/// The frame change sending `[0:1]`, `[1:0]`, `[1:1]` to the three targets.
pub fn solve_frame_change_rp1(
    for_zero: ProjPoint1,
    for_infinity: ProjPoint1,
    for_one: ProjPoint1,
) -> Result<FrameChange1, ProjectiveError> {
    let pts = [for_zero, for_infinity, for_one];
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        if pts[i].distance(&pts[j]) <= 1e-14 {
            return Err(ProjectiveError::CoincidentTargets(i, j));
        }
    }
    let (z, inf, one) = (for_zero.vector(), for_infinity.vector(), for_one.vector());
    let det = inf[0] * z[1] - inf[1] * z[0];
    let lambda = (one[0] * z[1] - one[1] * z[0]) / det;
    let mu = (inf[0] * one[1] - inf[1] * one[0]) / det;
    let k = Matrix2::from_columns(&[inf * lambda, z * mu]);
    FrameChange1::new(k)
}

/// Frame change for finite stamp targets `(for 0, for ∞, for 1)`.
pub fn frame_change_from_stamps(
    for_zero: f64,
    for_infinity: f64,
    for_one: f64,
) -> Result<FrameChange1, ProjectiveError> {
    solve_frame_change_rp1(
        ProjPoint1::finite(for_zero),
        ProjPoint1::finite(for_infinity),
        ProjPoint1::finite(for_one),
    )
}

/// Stamp of `reading` under the map sending `0`, `∞`, `1` to the three
/// targets, evaluated as `τ̊ + a b (q - p) / (b q - a p)` with
/// `a = τ̃ - τ̊`, `b = τ̂ - τ̊`, which returns the targets themselves at the
/// three frame readings. `None` at the pole.
pub fn stamp_of_reading(
    for_zero: f64,
    for_infinity: f64,
    for_one: f64,
    reading: &ProjPoint1,
) -> Result<Option<f64>, ProjectiveError> {
    let t = [for_zero, for_infinity, for_one];
    if t.iter().any(|x| !x.is_finite()) {
        return Err(ProjectiveError::NonFinite);
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        if t[i] == t[j] {
            return Err(ProjectiveError::CoincidentTargets(i, j));
        }
    }
    let (a, b) = (for_zero - for_one, for_infinity - for_one);
    let [p, q] = reading.h;
    let den = b * q - a * p;
    if den == 0.0 {
        return Ok(None);
    }
    Ok(Some(for_one + a * b * (q - p) / den))
}

pub fn apply_moebius(k: &FrameChange1, t: &ProjPoint1) -> ProjPoint1 {
    let v = k.matrix * t.vector();
    ProjPoint1 { h: [v[0], v[1]] }
}

/// Coefficients of `t -> (uQ t + vQ) / (wl t + kl)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoebiusCoefficients {
    pub u_q: f64,
    pub v_q: f64,
    pub w_l: f64,
    pub k_l: f64,
}

impl MoebiusCoefficients {
    pub fn eval(&self, t: &ProjPoint1) -> ProjPoint1 {
        apply_moebius(&self.frame_change(), t)
    }

    pub fn frame_change(&self) -> FrameChange1 {
        FrameChange1 {
            matrix: Matrix2::new(self.u_q, self.v_q, self.w_l, self.k_l),
        }
    }

    /// `vQ wl - uQ kl`; zero when the map is constant.
    pub fn discriminant(&self) -> f64 {
        self.v_q * self.w_l - self.u_q * self.k_l
    }
}

/// Expanded coefficients of the station map with targets `(τ̃, τ̂, τ̊)` for
/// readings `0`, `∞` and `1`.
pub fn moebius_coefficients(
    tilde: f64,
    hat: f64,
    ring: f64,
) -> Result<MoebiusCoefficients, ProjectiveError> {
    if tilde == ring && hat == ring {
        return Err(ProjectiveError::DegenerateCoefficients);
    }
    Ok(MoebiusCoefficients {
        u_q: -hat * (tilde - ring),
        v_q: tilde * (hat - ring),
        w_l: -(tilde - ring),
        k_l: hat - ring,
    })
}

fn check_det4(m: &Matrix4<f64>) -> Result<(), ProjectiveError> {
    let det = m.determinant();
    let scale = m.norm_squared() * m.norm_squared();
    if !(det.abs() >= 1e-12 * scale) {
        return Err(ProjectiveError::Singular(det));
    }
    Ok(())
}

/// Fractional-linear action of `p` on three tangents.
pub fn pgl4_act(p: &Matrix4<f64>, tangents: [f64; 3]) -> Result<[f64; 3], ProjectiveError> {
    check_det4(p)?;
    let y = p * Vector4::new(tangents[0], tangents[1], tangents[2], 1.0);
    let scale = p.row(3).abs().sum() * (1.0 + tangents.iter().map(|t| t.abs()).sum::<f64>());
    if y[3].abs() <= 1e-14 * scale {
        return Err(ProjectiveError::VanishingDenominator);
    }
    Ok([y[0] / y[3], y[1] / y[3], y[2] / y[3]])
}

/// The PGL(4) element giving the three station fractions one denominator.
///
/// Off-diagonal entries of rows 1..3 are `(w_j + k_j - k_i) / w_i`, the
/// diagonal and the last column of those rows are 1 (entry `[i][3]` copies
/// entry `[i][2]`), and the last row is all ones.
pub fn common_denominator_p(
    coeffs: &[MoebiusCoefficients; 3],
) -> Result<Matrix4<f64>, ProjectiveError> {
    for (i, c) in coeffs.iter().enumerate() {
        if c.w_l == 0.0 {
            return Err(ProjectiveError::ZeroLeadingCoefficient(i));
        }
    }
    let mut p = Matrix4::from_element(1.0);
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                p[(i, j)] = (coeffs[j].w_l + coeffs[j].k_l - coeffs[i].k_l) / coeffs[i].w_l;
            }
        }
        p[(i, 3)] = p[(i, 2)];
    }
    Ok(p)
}

/// Numerator and denominator of each station fraction after substituting
/// the raw tangents by the action of `p` on `t`, cleared of the action's own
/// denominator. No invertibility requirement on `p`.
pub fn composed_fractions(
    coeffs: &[MoebiusCoefficients; 3],
    p: &Matrix4<f64>,
    t: [f64; 3],
) -> [(f64, f64); 3] {
    let y = p * Vector4::new(t[0], t[1], t[2], 1.0);
    std::array::from_fn(|i| {
        let c = &coeffs[i];
        (c.u_q * y[i] + c.v_q * y[3], c.w_l * y[i] + c.k_l * y[3])
    })
}

/// Rows of denominator coefficients: station `i` has denominator
/// `Σ_k H[i][k] t_k + H[i][3]`.
pub fn denominator_rows(coeffs: &[MoebiusCoefficients; 3], p: &Matrix4<f64>) -> [[f64; 4]; 3] {
    std::array::from_fn(|i| {
        let c = &coeffs[i];
        std::array::from_fn(|k| c.w_l * p[(i, k)] + c.k_l * p[(3, k)])
    })
}

/// Per-station charts for raw tangents plus a PGL(4) frame on the chart
/// space: chart point = `frame · [chart_1(t_1), chart_2(t_2), chart_3(t_3), 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentChart {
    pub stations: [FrameChange1; 3],
    pub frame: Matrix4<f64>,
}

impl TangentChart {
    pub fn identity() -> Self {
        TangentChart {
            stations: [FrameChange1::identity(); 3],
            frame: Matrix4::identity(),
        }
    }

    /// Homogeneous chart point of three raw readings.
    pub fn chart_point(&self, raw: &[ProjPoint1; 3]) -> Result<Vector4<f64>, ProjectiveError> {
        let mut y = [0.0; 3];
        for i in 0..3 {
            let c = apply_moebius(&self.stations[i], &raw[i]);
            if c.h[1] == 0.0 {
                return Err(ProjectiveError::VanishingDenominator);
            }
            y[i] = c.h[0] / c.h[1];
        }
        Ok(self.frame * Vector4::new(y[0], y[1], y[2], 1.0))
    }
}

/// Projective-linear identification of measured tangents with stereometric
/// positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SolderingMap {
    pub id: String,
    pub matrix: Matrix4<f64>,
    pub chart: TangentChart,
}

fn dehomogenize(v: &Vector4<f64>) -> Result<[f64; 3], ProjectiveError> {
    if v[3].abs() <= 1e-14 * v.amax() {
        return Err(ProjectiveError::VanishingDenominator);
    }
    Ok([v[0] / v[3], v[1] / v[3], v[2] / v[3]])
}

fn translation(y: [f64; 3]) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    for i in 0..3 {
        t[(i, 3)] = y[i];
    }
    t
}

impl SolderingMap {
    /// A map with identity charts.
    pub fn from_matrix(
        id: impl Into<String>,
        matrix: Matrix4<f64>,
    ) -> Result<Self, ProjectiveError> {
        check_det4(&matrix)?;
        Ok(SolderingMap {
            id: id.into(),
            matrix,
            chart: TangentChart::identity(),
        })
    }

    /// Precomposes with a chart-space frame `p`; the raw-to-stereometric
    /// correspondence is unchanged.
    pub fn with_tangent_frame(&self, p: &Matrix4<f64>) -> Result<Self, ProjectiveError> {
        check_det4(p)?;
        let p_inv = p
            .try_inverse()
            .ok_or(ProjectiveError::Singular(p.determinant()))?;
        Ok(SolderingMap {
            id: self.id.clone(),
            matrix: self.matrix * p,
            chart: TangentChart {
                stations: self.chart.stations,
                frame: p_inv * self.chart.frame,
            },
        })
    }

    /// Re-centers the chart so that chart point `y0` becomes the origin.
    pub fn anchored_at(&self, y0: [f64; 3]) -> Self {
        SolderingMap {
            id: self.id.clone(),
            matrix: self.matrix * translation(y0),
            chart: TangentChart {
                stations: self.chart.stations,
                frame: translation(y0.map(|x| -x)) * self.chart.frame,
            },
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Stereometric position of a chart-space point.
    pub fn map_chart(&self, y: [f64; 3]) -> Result<[f64; 3], ProjectiveError> {
        dehomogenize(&(self.matrix * Vector4::new(y[0], y[1], y[2], 1.0)))
    }

    /// Stereometric position from the three raw station readings.
    pub fn map_readings(&self, raw: &[ProjPoint1; 3]) -> Result<[f64; 3], ProjectiveError> {
        dehomogenize(&(self.matrix * self.chart.chart_point(raw)?))
    }

    /// Chart point of a stereometric position.
    pub fn preimage(&self, p: [f64; 3]) -> Result<[f64; 3], ProjectiveError> {
        let inv = self
            .matrix
            .try_inverse()
            .ok_or(ProjectiveError::Singular(0.0))?;
        dehomogenize(&(inv * Vector4::new(p[0], p[1], p[2], 1.0)))
    }
}

/// The station fractions as one map on the affinely re-charted tangents
/// `t'_i = 1 / (w_i t_i + k_i)`.
pub fn soldering_map(coeffs: &[MoebiusCoefficients; 3]) -> Result<SolderingMap, ProjectiveError> {
    let mut m = Matrix4::zeros();
    let mut stations = [FrameChange1::identity(); 3];
    for (i, c) in coeffs.iter().enumerate() {
        if c.w_l == 0.0 {
            return Err(ProjectiveError::ZeroLeadingCoefficient(i));
        }
        let b = c.discriminant() / c.w_l;
        if !(b.abs() > 1e-14 * (c.u_q.abs() + c.v_q.abs()) / c.w_l.abs()) {
            return Err(ProjectiveError::DegenerateCoefficients);
        }
        m[(i, i)] = b;
        m[(i, 3)] = c.u_q / c.w_l;
        stations[i] = FrameChange1 {
            matrix: Matrix2::new(0.0, 1.0, c.w_l, c.k_l),
        };
    }
    m[(3, 3)] = 1.0;
    Ok(SolderingMap {
        id: String::new(),
        matrix: m,
        chart: TangentChart {
            stations,
            frame: Matrix4::identity(),
        },
    })
}

/// Image of a tangent-space direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum VanishingPoint {
    Finite([f64; 3]),
    /// Homogeneous direction of a point that stays at infinity.
    AtInfinity([f64; 3]),
}

pub fn vanishing_point(
    m: &SolderingMap,
    direction: &ProjPoint2,
) -> Result<VanishingPoint, ProjectiveError> {
    let d = direction.h;
    if d.iter().all(|x| *x == 0.0) {
        return Err(ProjectiveError::ZeroDirection);
    }
    let v = m.matrix * Vector4::new(d[0], d[1], d[2], 0.0);
    if v[3].abs() <= 1e-14 * v.amax() {
        Ok(VanishingPoint::AtInfinity(canonical([v[0], v[1], v[2]])))
    } else {
        Ok(VanishingPoint::Finite([
            v[0] / v[3],
            v[1] / v[3],
            v[2] / v[3],
        ]))
    }
}

/// Transition between the stereometric positions of two data points.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupoidElement {
    pub source_id: String,
    pub target_id: String,
    pub matrix: Matrix4<f64>,
}

/// Scale-normalized copy of a matrix.
pub fn normalize_matrix(m: &Matrix4<f64>) -> Matrix4<f64> {
    let idx = m.iamax_full();
    m / m[idx]
}

impl GroupoidElement {
    pub fn apply(&self, p: [f64; 3]) -> Result<[f64; 3], ProjectiveError> {
        dehomogenize(&(self.matrix * Vector4::new(p[0], p[1], p[2], 1.0)))
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &GroupoidElement) -> GroupoidElement {
        GroupoidElement {
            source_id: first.source_id.clone(),
            target_id: self.target_id.clone(),
            matrix: self.matrix * first.matrix,
        }
    }

    /// Max entry difference after normalization; 0 iff equal up to scale.
    pub fn distance(&self, other: &GroupoidElement) -> f64 {
        (normalize_matrix(&self.matrix) - normalize_matrix(&other.matrix)).amax()
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        (normalize_matrix(&self.matrix) - Matrix4::identity()).amax() <= tol
    }
}

pub fn groupoid_pt(
    source: &SolderingMap,
    target: &SolderingMap,
) -> Result<GroupoidElement, ProjectiveError> {
    let inv = source
        .matrix
        .try_inverse()
        .ok_or(ProjectiveError::Singular(source.matrix.determinant()))?;
    Ok(GroupoidElement {
        source_id: source.id.clone(),
        target_id: target.id.clone(),
        matrix: target.matrix * inv,
    })
}

/// An element of PGL(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameChange2 {
    pub matrix: Matrix3<f64>,
}

impl FrameChange2 {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self, ProjectiveError> {
        let det = matrix.determinant();
        let n = matrix.norm();
        if !(det.abs() >= 1e-12 * n * n * n) {
            return Err(ProjectiveError::Singular(det));
        }
        Ok(FrameChange2 { matrix })
    }

    pub fn apply(&self, p: &ProjPoint2) -> Result<ProjPoint2, ProjectiveError> {
        ProjPoint2::from_vector(&(self.matrix * p.vector()))
    }

    pub fn inverse(&self) -> Result<Self, ProjectiveError> {
        let inv = self
            .matrix
            .try_inverse()
            .ok_or(ProjectiveError::Singular(self.matrix.determinant()))?;
        Ok(FrameChange2 { matrix: inv })
    }
}

/// The collineation sending `[1:0:0]`, `[0:1:0]`, `[0:0:1]`, `[1:1:1]` to
/// the four targets.
pub fn solve_frame_change_rp2(targets: &[ProjPoint2; 4]) -> Result<FrameChange2, ProjectiveError> {
    let t: Vec<Vector3<f64>> = targets.iter().map(|p| p.vector().normalize()).collect();
    let basis = Matrix3::from_columns(&[t[0], t[1], t[2]]);
    if basis.determinant().abs() <= 1e-12 {
        return Err(ProjectiveError::Collinear);
    }
    let scales = basis.lu().solve(&t[3]).ok_or(ProjectiveError::Collinear)?;
    if scales.iter().any(|s| s.abs() <= 1e-12) {
        return Err(ProjectiveError::Collinear);
    }
    FrameChange2::new(Matrix3::from_columns(&[
        t[0] * scales[0],
        t[1] * scales[1],
        t[2] * scales[2],
    ]))
}
