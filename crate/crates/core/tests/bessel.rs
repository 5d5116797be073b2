mod common;

use common::{j0_quad, y0_quad};
use helmddm::models::bessel::{hankel1_0, j0, y0};

#[test]
fn reference_values_at_one() {
    assert!((j0_quad(1.0) - 0.765_197_686_557_967).abs() < 1e-12);
    assert!((y0_quad(1.0) - 0.088_256_964_215_677).abs() < 1e-10);
    assert!((j0(1.0) - 0.765_197_686_557_967).abs() < 1e-12);
    assert!((y0(1.0) - 0.088_256_964_215_677).abs() < 1e-12);
}

#[test]
fn kernels_match_quadrature() {
    for x in [
        0.05, 0.5, 1.0, 2.5, 5.0, 8.0, 11.9, 12.1, 15.0, 25.0, 50.0, 120.0,
    ] {
        let (jq, yq) = (j0_quad(x), y0_quad(x));
        let scale = jq.hypot(yq);
        assert!(
            (j0(x) - jq).abs() <= 1e-8 * scale,
            "J0({x}) = {} vs {jq}",
            j0(x)
        );
        assert!(
            (y0(x) - yq).abs() <= 1e-8 * scale,
            "Y0({x}) = {} vs {yq}",
            y0(x)
        );
    }
}

#[test]
fn hankel_modulus_large_argument() {
    let z = 50.0;
    let expected = (2.0 / (std::f64::consts::PI * z)).sqrt();
    assert!((hankel1_0(z).norm() - expected).abs() <= 1e-4 * expected);
}
