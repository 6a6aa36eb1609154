//! Lattice data structures with fixed, cache-line multiple byte sizes.

use std::mem::size_of;

use crate::complex::Complex;
use crate::layout::buffer::SiteBuffer;
use crate::layout::PlacementPolicy;
use crate::scalar::{Precision, Scalar};

/// A 3x3 complex link matrix, row-major: `e[row][col]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[repr(C)]
pub struct Su3Matrix<T> {
    pub e: [[Complex<T>; 3]; 3],
}

impl<T: Scalar> Su3Matrix<T> {
    pub fn splat(value: Complex<T>) -> Self {
        Su3Matrix { e: [[value; 3]; 3] }
    }

    pub fn identity() -> Self {
        let mut m = Self::splat(Complex::ZERO);
        for (k, row) in m.e.iter_mut().enumerate() {
            row[k] = Complex::ONE;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = *self;
        for k in 0..3 {
            for l in 0..3 {
                t.e[l][k] = self.e[k][l];
            }
        }
        t
    }
}

/// One lattice point: four links plus the bookkeeping fields MILC keeps,
/// padded to a multiple of 64 bytes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[repr(C, align(64))]
pub struct Site<T: Scalar> {
    pub link: [Su3Matrix<T>; 4],
    pub x: i32,
    pub y: i32,
    pub z: i32,
    pub t: i32,
    pub index: i32,
    pub parity: i32,
    pub pad: T::Pad,
}

impl<T: Scalar> Site<T> {
    /// Coordinates and parity of flat position `index` in an `dim`^4 lattice,
    /// with x varying fastest.
    pub fn at(index: usize, dim: usize, value: Complex<T>) -> Self {
        let x = index % dim;
        let y = (index / dim) % dim;
        let z = (index / (dim * dim)) % dim;
        let t = index / (dim * dim * dim);
        Site {
            link: [Su3Matrix::splat(value); 4],
            x: x as i32,
            y: y as i32,
            z: z as i32,
            t: t as i32,
            index: index as i32,
            parity: ((x + y + z + t) % 2) as i32,
            pad: T::Pad::default(),
        }
    }
}

/// The constant right-hand operand: one matrix per link direction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[repr(C)]
pub struct LinkSet<T> {
    pub b: [Su3Matrix<T>; 4],
}

impl<T: Scalar> LinkSet<T> {
    pub fn splat(value: Complex<T>) -> Self {
        LinkSet { b: [Su3Matrix::splat(value); 4] }
    }
}

const _: () = {
    assert!(size_of::<Su3Matrix<f32>>() == 72);
    assert!(size_of::<Su3Matrix<f64>>() == 144);
    assert!(size_of::<Site<f32>>() == 320);
    assert!(size_of::<Site<f64>>() == 640);
    assert!(size_of::<LinkSet<f32>>() == 288);
    assert!(size_of::<LinkSet<f64>>() == 576);
};

/// Byte sizes of the three storage types for one precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct LayoutSizes {
    pub su3_matrix: usize,
    pub site: usize,
    pub link_set: usize,
}

impl LayoutSizes {
    pub fn of<T: Scalar>() -> Self {
        LayoutSizes {
            su3_matrix: size_of::<Su3Matrix<T>>(),
            site: size_of::<Site<T>>(),
            link_set: size_of::<LinkSet<T>>(),
        }
    }

    pub fn expected(precision: Precision) -> Self {
        let scale = precision.scalar_bytes() / 4;
        LayoutSizes { su3_matrix: 72 * scale, site: 320 * scale, link_set: 288 * scale }
    }
}

/// Startup check that the in-memory sizes are the documented ones.
pub fn check_layout() -> Result<(), String> {
    for (got, precision) in [
        (LayoutSizes::of::<f32>(), Precision::F32),
        (LayoutSizes::of::<f64>(), Precision::F64),
    ] {
        let want = LayoutSizes::expected(precision);
        if got != want {
            return Err(format!("{precision} layout is {got:?}, expected {want:?}"));
        }
    }
    Ok(())
}

/// A flat array of `dim`^4 sites.
///
/// Created by [`crate::layout::allocate_lattice`]; the backing memory is
/// reserved but not written until initialized or computed into.
pub struct Lattice<T: Scalar> {
    pub(crate) dim: usize,
    pub(crate) buf: SiteBuffer<Site<T>>,
    pub(crate) placement: PlacementPolicy,
}

impl<T: Scalar> Lattice<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_sites(&self) -> usize {
        self.buf.len()
    }

    pub fn bytes(&self) -> usize {
        self.buf.byte_len()
    }

    pub fn precision(&self) -> Precision {
        T::PRECISION
    }

    pub fn placement(&self) -> PlacementPolicy {
        self.placement
    }

    pub fn sites(&self) -> &[Site<T>] {
        self.buf.as_slice()
    }

    pub fn sites_mut(&mut self) -> &mut [Site<T>] {
        self.buf.as_mut_slice()
    }

    pub(crate) fn as_mut_ptr(&mut self) -> *mut Site<T> {
        self.buf.as_mut_ptr()
    }
}

impl<T: Scalar> std::fmt::Debug for Lattice<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lattice")
            .field("dim", &self.dim)
            .field("precision", &T::PRECISION)
            .field("sites", &self.total_sites())
            .field("placement", &self.placement)
            .finish()
    }
}
