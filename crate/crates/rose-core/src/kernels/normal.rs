//! Standard-normal density, distribution function and quantile.

use crate::error::{Error, Result};

pub(crate) const SQRT_2PI: f64 = 2.506628274631000502415765284811;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Density of the standard normal distribution.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Distribution function of the standard normal, complementary-error-function
/// based so the tails keep full relative accuracy.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Density and distribution function evaluated together.
pub fn std_normal(x: f64) -> (f64, f64) {
    (std_normal_pdf(x), std_normal_cdf(x))
}

// Coefficients of Acklam's rational approximation to the normal quantile.
const A: [f64; 6] = [
    -39.696_830_286_653_76,
    220.946_098_424_520_9,
    -275.928_510_446_968_94,
    138.357_751_867_269_17,
    -30.664_798_066_147_16,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -54.476_098_798_224_06,
    161.585_836_858_040_94,
    -155.698_979_859_886_66,
    66.801_311_887_719_72,
    -13.280_681_552_885_72,
];
const C: [f64; 6] = [
    -0.007_784_894_002_430_293,
    -0.322_396_458_041_136_4,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    0.007_784_695_709_041_462,
    0.322_467_129_070_039_8,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

const LOW: f64 = 0.02425;

/// Inverse of the standard-normal distribution function.
///
/// Rational approximation refined by one Newton step on the cdf; the result
/// satisfies `|cdf(x) - u| <= 1e-12` over the open unit interval.
pub fn normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile needs u in (0,1), got {u}"
        )));
    }
    let x = if u < LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - u).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // One Newton step on the cdf squares the approximation error away.
    let pdf = std_normal_pdf(x);
    if pdf > 0.0 {
        Ok(x - (std_normal_cdf(x) - u) / pdf)
    } else {
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_cdf_at_zero() {
        let (pdf, cdf) = std_normal(0.0);
        assert!((pdf - 0.3989422804014327).abs() < 1e-15);
        assert!((cdf - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cdf_saturates_in_the_tail() {
        assert_eq!(std_normal_cdf(40.0), 1.0);
        assert!(std_normal_cdf(-37.0) > 0.0);
        assert!(std_normal_cdf(-37.0) < 1e-290);
    }

    #[test]
    fn cdf_hits_reference_value() {
        assert!((std_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
    }

    #[test]
    fn quantile_at_half_is_zero() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn quantile_hits_reference_value() {
        let z = normal_quantile(0.975).unwrap();
        assert!((z - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn quantile_is_antisymmetric() {
        let lo = normal_quantile(0.25).unwrap();
        let hi = normal_quantile(0.75).unwrap();
        assert!((lo + hi).abs() < 1e-12);
    }

    #[test]
    fn quantile_rejects_out_of_domain() {
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(-0.3).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_round_trips_through_cdf() {
        for i in 1..2000 {
            let u = i as f64 / 2000.0;
            let x = normal_quantile(u).unwrap();
            assert!(
                (std_normal_cdf(x) - u).abs() <= 1e-12,
                "u={u}, x={x}, cdf={}",
                std_normal_cdf(x)
            );
        }
        // a few deep-tail probes
        for &u in &[1e-10, 1e-6, 1.0 - 1e-6, 1.0 - 1e-10] {
            let x = normal_quantile(u).unwrap();
            assert!((std_normal_cdf(x) - u).abs() <= 1e-12);
        }
    }
}
