//! Field abstraction shared by the real and complex solver paths.

use std::fmt::Debug;

use nalgebra::ComplexField;
use num_complex::Complex64;

/// Tag written into binary caches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ScalarKind {
    Real = 0,
    Complex = 1,
}

/// Scalar type of the discretized operators: `f64` or `Complex64`.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync + Debug + 'static {
    const KIND: ScalarKind;

    fn real_part(self) -> f64;

    fn finite(self) -> bool;

    fn write_le(self, out: &mut Vec<u8>);

    /// Reads one value, advancing `bytes`. Returns `None` on truncation.
    fn read_le(bytes: &mut &[u8]) -> Option<Self>;
}

fn take_f64(bytes: &mut &[u8]) -> Option<f64> {
    let (head, rest) = bytes.split_first_chunk::<8>()?;
    *bytes = rest;
    Some(f64::from_le_bytes(*head))
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Real;

    fn real_part(self) -> f64 {
        self
    }

    fn finite(self) -> bool {
        self.is_finite()
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &mut &[u8]) -> Option<Self> {
        take_f64(bytes)
    }
}

impl Scalar for Complex64 {
    const KIND: ScalarKind = ScalarKind::Complex;

    fn real_part(self) -> f64 {
        self.re
    }

    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.re.to_le_bytes());
        out.extend_from_slice(&self.im.to_le_bytes());
    }

    fn read_le(bytes: &mut &[u8]) -> Option<Self> {
        let re = take_f64(bytes)?;
        let im = take_f64(bytes)?;
        Some(Complex64::new(re, im))
    }
}
