//! Bivariate standard-normal probabilities.
//!
//! Scalar implementation of the Drezner-Wesolowsky/Genz single-integral
//! quadrature (the `bvnd` routine of the tvpack family), with the corrected
//! combination for strongly negative correlation.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};
use crate::kernels::normal::{std_normal_cdf, SQRT_2PI};

const FRAC_1_2PI: f64 = 0.159154943091895335768883763373;

// Gauss-Legendre points and weights (half ranges); each entry is evaluated
// at 1-x and 1+x.
const QUAD_6: [(f64, f64); 3] = [
    (0.1713244923791705, -0.9324695142031522),
    (0.3607615730481384, -0.6612093864662647),
    (0.4679139345726904, -0.2386191860831970),
];
const QUAD_12: [(f64, f64); 6] = [
    (0.4717533638651177e-1, -0.9815606342467191),
    (0.1069393259953183, -0.9041172563704750),
    (0.1600783285433464, -0.7699026741943050),
    (0.2031674267230659, -0.5873179542866171),
    (0.2334925365383547, -0.3678314989981802),
    (0.2491470458134029, -0.1252334085114692),
];
const QUAD_20: [(f64, f64); 10] = [
    (0.1761400713915212e-1, -0.9931285991850949),
    (0.4060142980038694e-1, -0.9639719272779138),
    (0.6267204833410906e-1, -0.9122344282513259),
    (0.8327674157670475e-1, -0.8391169718222188),
    (0.1019301198172404, -0.7463319064601508),
    (0.1181945319615184, -0.6360536807265150),
    (0.1316886384491766, -0.5108670019508271),
    (0.1420961093183821, -0.3737060887154196),
    (0.1491729864726037, -0.2277858511416451),
    (0.1527533871307259, -0.7652652113349733e-1),
];

fn select_quadrature(rho_abs: f64) -> &'static [(f64, f64)] {
    if rho_abs < 0.3 {
        &QUAD_6
    } else if rho_abs < 0.75 {
        &QUAD_12
    } else {
        &QUAD_20
    }
}

fn phid(x: f64) -> f64 {
    std_normal_cdf(x)
}

/// `P(X > dh, Y > dk)` for standard bivariate normal with correlation `rho`.
fn bvn_survival(dh: f64, dk: f64, rho: f64) -> f64 {
    if dh == f64::INFINITY || dk == f64::INFINITY {
        return 0.0;
    }
    if dh == f64::NEG_INFINITY {
        return phid(-dk);
    }
    if dk == f64::NEG_INFINITY {
        return phid(-dh);
    }
    if rho == 0.0 {
        return phid(-dh) * phid(-dk);
    }
    if rho == 1.0 {
        return phid(-dh.max(dk));
    }
    if rho == -1.0 {
        return (phid(-dh) + phid(-dk) - 1.0).max(0.0);
    }

    let quad = select_quadrature(rho.abs());
    if rho.abs() <= 0.925 {
        let hk = dh * dk;
        let hs = 0.5 * (dh * dh + dk * dk);
        let asr = 0.5 * rho.asin();
        let mut bvn = 0.0;
        for &(w, x) in quad {
            for is in [-1.0, 1.0] {
                let sn = (asr * (is * x + 1.0)).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn * asr * FRAC_1_2PI + phid(-dh) * phid(-dk)
    } else {
        // |rho| in (0.925, 1). For negative rho reduce through
        // P(X > dh, Y > dk; rho) = P(Y > dk) - P(X > -dh, Y > dk; -rho).
        let (h, k) = if rho > 0.0 { (dh, dk) } else { (-dh, dk) };
        let hk = h * k;
        let a_s = (1.0 - rho) * (1.0 + rho);
        let a = a_s.sqrt();
        let b = h - k;
        let b_s = b * b;
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let common = c * (1.0 - d * b_s / 5.0) / 3.0;
        let mut bvn = 0.0;
        let asr0 = -0.5 * (b_s / a_s + hk);
        if asr0 > -100.0 {
            bvn = a * asr0.exp() * (1.0 - (b_s - a_s) * common + c * d * a_s * a_s / 5.0);
        }
        if -hk < 100.0 {
            let babs = b.abs();
            bvn -= (-0.5 * hk).exp() * SQRT_2PI * phid(-babs / a) * babs * (1.0 - b_s * common);
        }
        let a2 = 0.5 * a;
        for &(w, x) in quad {
            for is in [-1.0, 1.0] {
                let xx = a2 * (is * x + 1.0);
                let x_s = xx * xx;
                let asr = -0.5 * (b_s / x_s + hk);
                if asr > -100.0 {
                    let r_s = (1.0 - x_s).sqrt();
                    bvn += a2
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - r_s) / (2.0 * (1.0 + r_s))).exp() / r_s
                            - (1.0 + c * x_s * (1.0 + d * x_s)));
                }
            }
        }
        bvn *= -FRAC_1_2PI;
        if rho > 0.0 {
            bvn + phid(-h.max(k))
        } else if k >= h {
            -bvn
        } else {
            phid(-dk) + phid(-dh) - 1.0 - bvn
        }
    }
}

/// `P(X <= a, Y <= b)` for a standard bivariate normal pair with
/// correlation `rho`; absolute error well below 1e-10.
pub fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::Domain(format!(
            "correlation must lie in [-1, 1], got {rho}"
        )));
    }
    Ok(bvn_survival(-a, -b, rho).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independence_factorizes() {
        for &(a, b) in &[(0.3, -1.2), (-2.0, 0.0), (1.5, 1.5)] {
            let got = bivariate_normal_cdf(a, b, 0.0).unwrap();
            let want = std_normal_cdf(a) * std_normal_cdf(b);
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn comonotone_takes_the_minimum() {
        let got = bivariate_normal_cdf(0.3, -0.2, 1.0).unwrap();
        assert!((got - std_normal_cdf(-0.2)).abs() < 1e-15);
    }

    #[test]
    fn orthant_arcsine_value() {
        // P(X <= 0, Y <= 0) = 1/4 + asin(rho) / (2 pi)
        let got = bivariate_normal_cdf(0.0, 0.0, 0.5).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-12);
        let got = bivariate_normal_cdf(0.0, 0.0, -0.5).unwrap();
        assert!((got - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_correlation() {
        assert!(bivariate_normal_cdf(0.0, 0.0, 1.5).is_err());
        assert!(bivariate_normal_cdf(0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn symmetric_in_arguments() {
        for &rho in &[-0.99, -0.7, -0.2, 0.2, 0.7, 0.99] {
            for &(a, b) in &[(0.4, -1.3), (2.1, 0.7), (-0.6, -0.1)] {
                let xy = bivariate_normal_cdf(a, b, rho).unwrap();
                let yx = bivariate_normal_cdf(b, a, rho).unwrap();
                assert!((xy - yx).abs() < 1e-14, "rho={rho} a={a} b={b}");
            }
        }
    }

    #[test]
    fn complement_identity_holds() {
        // P(X<=a, Y<=b; rho) = Phi(a) - P(X<=a, Y<=-b; -rho)
        for &rho in &[-0.97, -0.5, 0.31, 0.96] {
            for &(a, b) in &[(0.4, -1.3), (-1.0, 2.0), (0.0, 0.3)] {
                let lhs = bivariate_normal_cdf(a, b, rho).unwrap();
                let rhs = std_normal_cdf(a) - bivariate_normal_cdf(a, -b, -rho).unwrap();
                assert!((lhs - rhs).abs() < 1e-14, "rho={rho} a={a} b={b}");
            }
        }
    }

    /// Tensor-product Gauss-Legendre integration of the joint density over
    /// (-inf, a] x (-inf, b], the brute-force oracle.
    pub(crate) fn bvn_quadrature_oracle(a: f64, b: f64, rho: f64) -> f64 {
        let (nodes, weights) = gauss_legendre_128();
        let lo = -9.0;
        let det = 1.0 - rho * rho;
        if det == 0.0 {
            // degenerate: reduce to a univariate probability
            return if rho > 0.0 {
                std_normal_cdf(a.min(b))
            } else {
                (std_normal_cdf(a) + std_normal_cdf(b) - 1.0).max(0.0)
            };
        }
        let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
        let (ax, bx) = (lo, a);
        let (ay, by) = (lo, b);
        let cx = 0.5 * (bx - ax);
        let cy = 0.5 * (by - ay);
        let mut total = 0.0;
        for (i, &xi) in nodes.iter().enumerate() {
            let x = 0.5 * (ax + bx) + cx * xi;
            for (j, &yj) in nodes.iter().enumerate() {
                let y = 0.5 * (ay + by) + cy * yj;
                let e = (x * x - 2.0 * rho * x * y + y * y) / (2.0 * det);
                total += weights[i] * weights[j] * (-e).exp();
            }
        }
        total * cx * cy * norm
    }

    fn gauss_legendre_128() -> (Vec<f64>, Vec<f64>) {
        // Newton iteration on Legendre polynomials.
        let n = 128usize;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = pk;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    }

    #[test]
    fn matches_quadrature_oracle_on_grid() {
        let pts = [-1.5, -0.5, 0.0, 0.8, 2.0];
        let rhos = [-0.9, -0.45, 0.0, 0.45, 0.9];
        let mut worst: f64 = 0.0;
        for &a in &pts {
            for &b in &pts {
                for &rho in &rhos {
                    let got = bivariate_normal_cdf(a, b, rho).unwrap();
                    let want = bvn_quadrature_oracle(a, b, rho);
                    worst = worst.max((got - want).abs());
                }
            }
        }
        assert!(worst < 1e-7, "worst abs error {worst}");
    }

    #[test]
    fn density_normalizes() {
        // quick self-check of the oracle machinery
        let total = bvn_quadrature_oracle(9.0, 9.0, 0.37);
        assert!((total - 1.0).abs() < 1e-10);
    }
}
