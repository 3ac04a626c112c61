//! Closed-form Bergman kernels on the disc and the Hartogs triangle, and the
//! integrand of the generalized-triangle operator `K_A`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{DiscPoint, HartogsPoint};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// `1 / (π (1 − z w̄)^2)`.
pub fn kernel_disc(z: DiscPoint, w: DiscPoint) -> Complex64 {
    disc_kernel_c(z.c(), w.c())
}

#[inline]
pub(crate) fn disc_kernel_c(z: Complex64, w: Complex64) -> Complex64 {
    let d = ONE - z * w.conj();
    (d * d * PI).inv()
}

/// Hartogs kernel through the chart: `(z2 w̄2)^{-1} K_𝔻(t_z, t_w) K_𝔻(z2, w2)`.
pub fn kernel_hartogs(z: &HartogsPoint, w: &HartogsPoint) -> Result<Complex64> {
    let (z2, w2) = (z.z2.c(), w.z2.c());
    if z2.norm() == 0.0 || w2.norm() == 0.0 {
        return Err(Error::Domain("z2 = 0 is outside the Hartogs triangle".into()));
    }
    Ok(disc_kernel_c(z.t.c(), w.t.c()) * disc_kernel_c(z2, w2) / (z2 * w2.conj()))
}

/// Hartogs kernel straight from the ambient formula.
pub fn kernel_hartogs_ambient(z1: Complex64, z2: Complex64, w1: Complex64, w2: Complex64) -> Result<Complex64> {
    for (a, b) in [(z1, z2), (w1, w2)] {
        if !(a.norm() < b.norm() && b.norm() < 1.0) {
            return Err(Error::Domain(format!("({a}, {b}) is not in the Hartogs triangle")));
        }
    }
    let q = z2 * w2.conj();
    let d1 = ONE - z1 * w1.conj() / q;
    let d2 = ONE - q;
    Ok((q * d1 * d1 * d2 * d2 * (PI * PI)).inv())
}

/// Membership in `{|z1|^m < |z2|^n < 1}`.
pub fn in_generalized_triangle(z1: Complex64, z2: Complex64, m: u32, n: u32) -> bool {
    let b = z2.norm().powi(n as i32);
    z1.norm().powi(m as i32) < b && b < 1.0
}

/// `|z2 w̄2|^A / (|1 − z2 w̄2|^2 |z2^n w̄2^n − z1^m w̄1^m|^2)`.
pub fn kernel_ka(z: (Complex64, Complex64), w: (Complex64, Complex64), a: f64, m: u32, n: u32) -> Result<f64> {
    if m == 0 || n == 0 || gcd(m, n) != 1 {
        return Err(Error::Config(format!("(m, n) = ({m}, {n}) must be coprime positive integers")));
    }
    for (p1, p2) in [z, w] {
        if !in_generalized_triangle(p1, p2, m, n) {
            return Err(Error::Domain(format!("({p1}, {p2}) violates |z1|^{m} < |z2|^{n} < 1")));
        }
    }
    let q = z.1 * w.1.conj();
    let d = q.powu(n) - (z.0 * w.0.conj()).powu(m);
    Ok(q.norm().powf(a) / ((ONE - q).norm_sqr() * d.norm_sqr()))
}

pub fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_hartogs(rng: &mut ChaCha8Rng) -> HartogsPoint {
        let t = Complex64::from_polar(rng.gen::<f64>().sqrt() * 0.95, rng.gen::<f64>() * 6.3);
        let z2 = Complex64::from_polar(0.05 + 0.9 * rng.gen::<f64>(), rng.gen::<f64>() * 6.3);
        HartogsPoint::from_chart(t, z2).unwrap()
    }

    #[test]
    fn disc_values() {
        let o = DiscPoint::origin();
        assert_relative_eq!(kernel_disc(o, o).re, 1.0 / PI);
        let h = DiscPoint::new(0.5, 0.0).unwrap();
        assert_relative_eq!(kernel_disc(h, h).re, 16.0 / (9.0 * PI), max_relative = 1e-15);
    }

    #[test]
    fn disc_conjugate_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let mut p = || DiscPoint::polar(rng.gen::<f64>().sqrt() * 0.99, rng.gen::<f64>() * 6.3).unwrap();
            let (z, w) = (p(), p());
            let (a, b) = (kernel_disc(z, w), kernel_disc(w, z).conj());
            assert!((a - b).norm() <= 1e-12 * a.norm());
        }
    }

    #[test]
    fn hartogs_value_at_diagonal_point() {
        let p = HartogsPoint::from_chart(Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)).unwrap();
        let k = kernel_hartogs(&p, &p).unwrap();
        assert_relative_eq!(k.re, 64.0 / (9.0 * PI * PI), max_relative = 1e-14);
        assert!(k.im.abs() < 1e-15);
    }

    #[test]
    fn hartogs_chart_matches_ambient_and_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (z, w) = (rand_hartogs(&mut rng), rand_hartogs(&mut rng));
            let a = kernel_hartogs(&z, &w).unwrap();
            let b = kernel_hartogs_ambient(z.z1(), z.z2.c(), w.z1(), w.z2.c()).unwrap();
            assert!((a - b).norm() <= 1e-12 * a.norm(), "{a} vs {b}");
            let c = kernel_hartogs(&w, &z).unwrap().conj();
            assert!((a - c).norm() <= 1e-12 * a.norm());
            assert!(a.norm() > 0.0);
        }
    }

    #[test]
    fn ka_values() {
        let p = (Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0));
        assert_relative_eq!(kernel_ka(p, p, 1.0, 2, 1).unwrap(), 64.0 / 9.0, max_relative = 1e-14);
        assert!(kernel_ka(p, p, 1.0, 2, 2).is_err());
        let bad = (Complex64::new(0.6, 0.0), Complex64::new(0.5, 0.0));
        assert!(kernel_ka(bad, p, 1.0, 1, 1).is_err());
    }

    #[test]
    fn ka_specializes_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (z, w) = (rand_hartogs(&mut rng), rand_hartogs(&mut rng));
            let (zz, ww) = ((z.z1(), z.z2.c()), (w.z1(), w.z2.c()));
            let k = kernel_ka(zz, ww, 0.0, 1, 1).unwrap();
            let q = zz.1 * ww.1.conj();
            let direct = 1.0 / ((ONE - q).norm_sqr() * (q - zz.0 * ww.0.conj()).norm_sqr());
            assert_relative_eq!(k, direct, max_relative = 1e-12);
            // |K_H| = K_A(A=1) / π²
            let kh = kernel_hartogs(&z, &w).unwrap().norm();
            assert_relative_eq!(kernel_ka(zz, ww, 1.0, 1, 1).unwrap() / (PI * PI), kh, max_relative = 1e-10);
            let s = kernel_ka(ww, zz, 0.7, 1, 1).unwrap();
            assert_relative_eq!(kernel_ka(zz, ww, 0.7, 1, 1).unwrap(), s, max_relative = 1e-12);
        }
    }
}
