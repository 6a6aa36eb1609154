use serde::{Deserialize, Serialize};

use crate::lattice::Lattice;
use crate::scalar::{Precision, Scalar};

/// Outcome of checking a canonically initialized run, where every output
/// element should be exactly (1, 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub ok: bool,
    pub sum_real: f64,
    pub sum_imag: f64,
    pub max_deviation: f64,
}

/// Largest allowed distance of an output element from (1, 0).
pub fn canonical_tolerance(precision: Precision) -> f64 {
    match precision {
        Precision::F32 => 1e-6,
        Precision::F64 => 1e-12,
    }
}

/// Checks a lattice produced from A = (1,0), B = (1/3,0).
pub fn verify<T: Scalar>(c: &Lattice<T>) -> VerificationReport {
    let tol = canonical_tolerance(T::PRECISION);
    let mut sum_real = 0.0;
    let mut sum_imag = 0.0;
    let mut max_deviation: f64 = 0.0;
    for z in c.sites().iter().flat_map(|s| s.link.iter()).flat_map(|m| m.e.iter().flatten()) {
        let (re, im) = (z.re.to_f64(), z.im.to_f64());
        sum_real += re;
        sum_imag += im;
        let dev = (re - 1.0).abs().max(im.abs());
        // f64::max drops NaN operands; a NaN element must still fail.
        if re.is_nan() || im.is_nan() {
            max_deviation = f64::NAN;
        } else if !max_deviation.is_nan() {
            max_deviation = max_deviation.max(dev);
        }
    }
    VerificationReport { ok: max_deviation < tol, sum_real, sum_imag, max_deviation }
}

/// Largest elementwise `|x - y| / max(1, |y|)` over all link elements,
/// compared per real component.
pub fn max_relative_difference<T: Scalar>(x: &Lattice<T>, y: &Lattice<T>) -> f64 {
    assert_eq!(x.total_sites(), y.total_sites());
    let xs = x.sites().iter().flat_map(|s| s.link.iter()).flat_map(|m| m.e.iter().flatten());
    let ys = y.sites().iter().flat_map(|s| s.link.iter()).flat_map(|m| m.e.iter().flatten());
    xs.zip(ys)
        .flat_map(|(a, b)| [(a.re, b.re), (a.im, b.im)])
        .map(|(a, b)| {
            let (a, b) = (a.to_f64(), b.to_f64());
            (a - b).abs() / b.abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Complex;
    use crate::layout::{allocate_lattice, init_lattice, Partition, PlacementPolicy};

    fn ones(dim: usize) -> Lattice<f64> {
        let mut c = allocate_lattice::<f64>(dim, PlacementPolicy::TouchSequential).unwrap();
        let n = c.total_sites();
        init_lattice(&mut c, Complex::ONE, &Partition::sequential(n)).unwrap();
        c
    }

    #[test]
    fn single_site_checksum() {
        let r = verify(&ones(1));
        assert!(r.ok);
        assert_eq!(r.sum_real, 36.0);
        assert_eq!(r.sum_imag, 0.0);
    }

    #[test]
    fn perturbed_element_fails() {
        let mut c = ones(2);
        c.sites_mut()[3].link[2].e[1][0] = Complex::new(1.0 + 1e-3, 0.0);
        let r = verify(&c);
        assert!(!r.ok);
        assert!((r.max_deviation - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn nan_fails() {
        let mut c = ones(1);
        c.sites_mut()[0].link[0].e[0][0].im = f64::NAN;
        assert!(!verify(&c).ok);
    }

    #[test]
    fn untouched_output_fails() {
        let c = allocate_lattice::<f32>(2, PlacementPolicy::TouchSequential).unwrap();
        assert!(!verify(&c).ok);
    }

    #[test]
    fn relative_difference() {
        let a = ones(1);
        let mut b = ones(1);
        assert_eq!(max_relative_difference(&a, &b), 0.0);
        b.sites_mut()[0].link[1].e[2][2].re = 1.5;
        assert!((max_relative_difference(&a, &b) - 0.5 / 1.5).abs() < 1e-15);
    }
}
