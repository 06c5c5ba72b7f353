//! Generator-backed mesh families indexed by refinement level.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::{
    generate_blob, generate_cube, generate_cubed_sphere, generate_torus, locate_cubed, locate_torus, SurfaceMesh,
    TorusProfile,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeshFamily {
    Sphere,
    Cube,
    Blob { amplitude: f64 },
    Torus,
    DeformedTorus,
    TwistedTorus,
}

pub const FAMILY_NAMES: [&str; 6] = ["sphere", "cube", "blob", "torus", "deformed-torus", "twisted-torus"];

const MAJOR: f64 = 2.0;
const MINOR: f64 = 0.7;

impl FromStr for MeshFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sphere" => Self::Sphere,
            "cube" => Self::Cube,
            "blob" => Self::Blob { amplitude: 0.2 },
            "torus" => Self::Torus,
            "deformed-torus" => Self::DeformedTorus,
            "twisted-torus" => Self::TwistedTorus,
            _ => {
                return Err(Error::Config(format!(
                    "unknown mesh generator `{s}` (expected one of {})",
                    FAMILY_NAMES.join(", ")
                )))
            }
        })
    }
}

impl MeshFamily {
    fn cubed(self) -> bool {
        matches!(self, Self::Sphere | Self::Cube | Self::Blob { .. })
    }

    /// Toroidal × poloidal element counts of torus families.
    fn torus_dims(refine: usize) -> (usize, usize) {
        (8 << refine, 4 << refine)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sphere => "sphere",
            Self::Cube => "cube",
            Self::Blob { .. } => "blob",
            Self::Torus => "torus",
            Self::DeformedTorus => "deformed-torus",
            Self::TwistedTorus => "twisted-torus",
        }
    }

    pub fn generate(self, refine: usize, p: usize) -> Result<SurfaceMesh> {
        let (nu, nv) = Self::torus_dims(refine);
        match self {
            Self::Sphere => generate_cubed_sphere(refine, p),
            Self::Cube => generate_cube(refine, p),
            Self::Blob { amplitude } => generate_blob(refine, p, amplitude),
            Self::Torus => generate_torus(MAJOR, MINOR, nu, nv, p, None),
            Self::DeformedTorus => generate_torus(MAJOR, MINOR, nu, nv, p, Some(&TorusProfile::deformed(MINOR))),
            Self::TwistedTorus => generate_torus(MAJOR, MINOR, nu, nv, p, Some(&TorusProfile::twisted_square(0.6))),
        }
    }

    pub fn element_count(self, refine: usize) -> usize {
        if self.cubed() {
            6 << (2 * refine)
        } else {
            let (nu, nv) = Self::torus_dims(refine);
            nu * nv
        }
    }

    /// Nominal mesh size: parameter width of one element.
    pub fn h(self, refine: usize) -> f64 {
        1.0 / (1u64 << refine) as f64
    }

    /// Patch index and patch parameters of element `k`'s reference point.
    pub fn param(self, refine: usize, k: usize, xi: f64, eta: f64) -> (usize, f64, f64) {
        if self.cubed() {
            let m = 1usize << refine;
            let h = 2.0 / m as f64;
            let (face, rem) = (k / (m * m), k % (m * m));
            let (row, col) = (rem / m, rem % m);
            let s = -1.0 + (col as f64 + 0.5 * (xi + 1.0)) * h;
            let t = -1.0 + (row as f64 + 0.5 * (eta + 1.0)) * h;
            (face, s, t)
        } else {
            let (nu, nv) = Self::torus_dims(refine);
            let (iu, iv) = (k / nv, k % nv);
            let a = (iu as f64 + 0.5 * (xi + 1.0)) / nu as f64;
            let b = (iv as f64 + 0.5 * (eta + 1.0)) / nv as f64;
            (0, a, b)
        }
    }

    pub fn locate(self, refine: usize, patch: usize, s: f64, t: f64) -> (usize, f64, f64) {
        if self.cubed() {
            locate_cubed(refine, patch, s, t)
        } else {
            let (nu, nv) = Self::torus_dims(refine);
            locate_torus(nu, nv, s.min(1.0 - 1e-15), t.min(1.0 - 1e-15))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::cheb2_nodes;

    #[test]
    fn counts_and_names() {
        for name in FAMILY_NAMES {
            let f: MeshFamily = name.parse().unwrap();
            assert_eq!(f.name(), name);
            let mesh = f.generate(0, 3).unwrap();
            assert_eq!(mesh.len(), f.element_count(0));
            assert!(mesh.closed());
        }
        assert!("klein".parse::<MeshFamily>().is_err());
    }

    #[test]
    fn nested_location_recovers_nodes() {
        for f in [MeshFamily::Sphere, MeshFamily::DeformedTorus] {
            let fine = f.generate(1, 4).unwrap();
            let coarse = f.generate(0, 4).unwrap();
            let g = cheb2_nodes(4).unwrap();
            for (k, e) in fine.elements().iter().enumerate().step_by(7) {
                let (j, i) = (3, 1);
                let (patch, s, t) = f.param(1, k, g.nodes[j], g.nodes[i]);
                let (kc, xi, eta) = f.locate(0, patch, s, t);
                let (patch2, s2, t2) = f.param(0, kc, xi, eta);
                assert_eq!(patch, patch2);
                assert!((s - s2).abs() < 1e-14 && (t - t2).abs() < 1e-14);
                let x = e.nodes[j * 5 + i];
                let y = crate::spectral::eval_tensor(
                    &g,
                    &coarse.element(kc).nodes.iter().map(|p| p[0]).collect::<Vec<_>>(),
                    xi,
                    eta,
                );
                assert!((x[0] - y).abs() < 0.05);
            }
        }
    }
}
