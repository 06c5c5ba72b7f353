//! Built-in mesh families.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use super::{build_connectivity, Element, Point, SurfaceMesh};
use crate::error::{Error, Result};
use crate::spectral::cheb2_nodes;

/// (center, first axis, second axis); axis1 × axis2 is the outward normal.
const CUBE_FACES: [(Point, Point, Point); 6] = [
    ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
    ([-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]),
    ([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
    ([0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
    ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
    ([0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]),
];

fn check_order(p: usize) -> Result<()> {
    if p < 2 {
        return Err(Error::InvalidOrder {
            order: p as i64,
            reason: "generated meshes need p >= 2",
        });
    }
    Ok(())
}

/// Subdivided surface of the cube `[-1,1]³` with every node passed through
/// `map`. Element `face·4ⁿ + row·2ⁿ + col`; columns run along the first face
/// axis (ξ), rows along the second (η).
pub fn generate_mapped_cube(n_ref: usize, p: usize, map: impl Fn(Point) -> Point) -> Result<SurfaceMesh> {
    warped_cube(n_ref, p, |s| s, map)
}

fn warped_cube(n_ref: usize, p: usize, warp: impl Fn(f64) -> f64, map: impl Fn(Point) -> Point) -> Result<SurfaceMesh> {
    check_order(p)?;
    let g = cheb2_nodes(p)?.nodes;
    let m = 1usize << n_ref;
    let h = 2.0 / m as f64;
    let mut elements = Vec::with_capacity(6 * m * m);
    for (c, a1, a2) in CUBE_FACES {
        for row in 0..m {
            for col in 0..m {
                let s0 = -1.0 + col as f64 * h;
                let t0 = -1.0 + row as f64 * h;
                let mut nodes = Vec::with_capacity((p + 1) * (p + 1));
                for xj in &g {
                    for xi in &g {
                        let s = warp(s0 + (xj + 1.0) * 0.5 * h);
                        let t = warp(t0 + (xi + 1.0) * 0.5 * h);
                        let x = [
                            c[0] + s * a1[0] + t * a2[0],
                            c[1] + s * a1[1] + t * a2[1],
                            c[2] + s * a1[2] + t * a2[2],
                        ];
                        nodes.push(map(x));
                    }
                }
                let id = elements.len();
                elements.push(Element::new(id, p, nodes)?);
            }
        }
    }
    build_connectivity(elements, None)
}

fn normalize(x: Point) -> Point {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    [x[0] / r, x[1] / r, x[2] / r]
}

/// Equiangular face coordinate: uniform in angle after projection.
fn equiangular(s: f64) -> f64 {
    (0.25 * PI * s).tan()
}

/// Unit sphere by radial projection of the subdivided cube, with face
/// coordinates spaced equally in angle.
pub fn generate_cubed_sphere(n_ref: usize, p: usize) -> Result<SurfaceMesh> {
    warped_cube(n_ref, p, equiangular, normalize)
}

/// Surface of the cube `[-1,1]³` (side 2).
pub fn generate_cube(n_ref: usize, p: usize) -> Result<SurfaceMesh> {
    generate_mapped_cube(n_ref, p, |x| x)
}

/// Star-shaped deformation of the sphere, radius `1 + amplitude·b(x̂)` with a
/// fixed smooth lobed profile `b`.
pub fn generate_blob(n_ref: usize, p: usize, amplitude: f64) -> Result<SurfaceMesh> {
    warped_cube(n_ref, p, equiangular, |x| {
        let u = normalize(x);
        let bump = (2.0 * u[0]).sin() * u[1] + 0.5 * (3.0 * u[2]).cos() + 0.3 * u[0] * u[2];
        let r = 1.0 + amplitude * bump;
        [r * u[0], r * u[1], r * u[2]]
    })
}

/// Cubed-mesh element and reference coordinates containing face parameter
/// `(s, t) ∈ [-1,1]²` (before any face warp).
pub fn locate_cubed(n_ref: usize, face: usize, s: f64, t: f64) -> (usize, f64, f64) {
    let m = 1usize << n_ref;
    let h = 2.0 / m as f64;
    let col = (((s + 1.0) / h).floor() as usize).min(m - 1);
    let row = (((t + 1.0) / h).floor() as usize).min(m - 1);
    let xi = 2.0 * (s - (-1.0 + col as f64 * h)) / h - 1.0;
    let eta = 2.0 * (t - (-1.0 + row as f64 * h)) / h - 1.0;
    (face * m * m + row * m + col, xi.clamp(-1.0, 1.0), eta.clamp(-1.0, 1.0))
}

/// Element and reference coordinates of a point on the cubed sphere.
pub fn locate_sphere(n_ref: usize, x: &Point) -> (usize, f64, f64) {
    let (face, (c, a1, a2)) = CUBE_FACES
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| dot3(&a.0, x).total_cmp(&dot3(&b.0, x)))
        .expect("six faces");
    let depth = dot3(c, x);
    let s = dot3(a1, x) / depth;
    let t = dot3(a2, x) / depth;
    let inv = |v: f64| (v.atan() * 4.0 / PI).clamp(-1.0, 1.0);
    locate_cubed(n_ref, face, inv(s), inv(t))
}

fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

type SectionFn = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

/// Cross-section of a torus: radial and vertical offsets from the core
/// circle as functions of the toroidal angle θ and poloidal parameter v.
#[derive(Clone)]
pub struct TorusProfile {
    section: SectionFn,
    phase: f64,
}

impl std::fmt::Debug for TorusProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusProfile")
            .field("phase", &self.phase)
            .finish_non_exhaustive()
    }
}

impl TorusProfile {
    /// Star-shaped section `r(θ, φ)` in polar form.
    pub fn new(radius: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_section(move |th, ph| {
            let r = radius(th, ph);
            [r * ph.cos(), r * ph.sin()]
        })
    }

    pub fn from_section(section: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self {
            section: Arc::new(section),
            phase: 0.0,
        }
    }

    /// Rotates the section by `twist(θ)`; mesh lines sit at `v = phase + 2πk/n_v`.
    pub fn with_twist(self, twist: impl Fn(f64) -> f64 + Send + Sync + 'static, phase: f64) -> Self {
        let inner = self.section;
        Self {
            section: Arc::new(move |th, v| {
                let [a, b] = inner(th, v);
                let (s, c) = twist(th).sin_cos();
                [c * a - s * b, s * a + c * b]
            }),
            phase,
        }
    }

    pub fn constant(r: f64) -> Self {
        Self::new(move |_, _| r)
    }

    /// Smooth non-axisymmetric cross-section.
    pub fn deformed(r: f64) -> Self {
        Self::new(move |th, ph| r * (1.0 + 0.2 * (2.0 * th).cos() * ph.sin() + 0.15 * (th + 2.0 * ph).cos()))
    }

    /// Square cross-section of half-width `half_width` rotating by a
    /// quarter turn per toroidal circuit. Each side is parametrized
    /// linearly in `v`; sharp edges run along mesh lines when `n_v` is a
    /// multiple of 4, and there are no sharp corners.
    pub fn twisted_square(half_width: f64) -> Self {
        Self::from_section(move |_, v| {
            let k = (v / FRAC_PI_2).round();
            let t = (v - k * FRAC_PI_2) / FRAC_PI_4;
            let (s, c) = (k * FRAC_PI_2).sin_cos();
            [half_width * (c - s * t), half_width * (s + c * t)]
        })
        .with_twist(|th| th / 4.0, FRAC_PI_4)
    }

    pub fn section(&self, theta: f64, v: f64) -> [f64; 2] {
        (self.section)(theta, v)
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }
}

/// Torus with major radius `major` and `n_u × n_v` elements (toroidal ×
/// poloidal). Element `iu·n_v + iv`; ξ runs toroidally, η poloidally.
/// A profile, when given, replaces the constant minor radius `minor`.
pub fn generate_torus(
    major: f64,
    minor: f64,
    n_u: usize,
    n_v: usize,
    p: usize,
    profile: Option<&TorusProfile>,
) -> Result<SurfaceMesh> {
    check_order(p)?;
    if !(major > minor && minor > 0.0) {
        return Err(Error::InvalidMesh(format!(
            "torus radii must satisfy R > r > 0 (R = {major}, r = {minor})"
        )));
    }
    if n_u < 2 || n_v < 2 {
        return Err(Error::InvalidMesh(format!(
            "torus needs at least 2x2 elements, got {n_u}x{n_v}"
        )));
    }
    let constant = TorusProfile::constant(minor);
    let prof = profile.unwrap_or(&constant);
    let g = cheb2_nodes(p)?.nodes;
    let du = 2.0 * PI / n_u as f64;
    let dv = 2.0 * PI / n_v as f64;
    let mut elements = Vec::with_capacity(n_u * n_v);
    for iu in 0..n_u {
        for iv in 0..n_v {
            let mut nodes = Vec::with_capacity((p + 1) * (p + 1));
            for xj in &g {
                for xi in &g {
                    let th = (iu as f64 + (xj + 1.0) * 0.5) * du;
                    let v = prof.phase + (iv as f64 + (xi + 1.0) * 0.5) * dv;
                    let [a, b] = prof.section(th, v);
                    let rho = a.hypot(b);
                    if !(rho > 0.0 && rho < major) {
                        return Err(Error::InvalidMesh(format!(
                            "profile radius {rho} outside (0, {major}) at theta={th}, v={v}"
                        )));
                    }
                    let w = major + a;
                    nodes.push([w * th.cos(), w * th.sin(), b]);
                }
            }
            let id = elements.len();
            elements.push(Element::new(id, p, nodes)?);
        }
    }
    build_connectivity(elements, None)
}

/// Torus element and reference coordinates for parameter fractions
/// `(a, b) ∈ [0,1)²` of the toroidal and (phase-shifted) poloidal periods.
pub fn locate_torus(n_u: usize, n_v: usize, a: f64, b: f64) -> (usize, f64, f64) {
    let su = a.rem_euclid(1.0) * n_u as f64;
    let sv = b.rem_euclid(1.0) * n_v as f64;
    let iu = (su.floor() as usize).min(n_u - 1);
    let iv = (sv.floor() as usize).min(n_v - 1);
    let xi = 2.0 * (su - iu as f64) - 1.0;
    let eta = 2.0 * (sv - iv as f64) - 1.0;
    (iu * n_v + iv, xi.clamp(-1.0, 1.0), eta.clamp(-1.0, 1.0))
}
