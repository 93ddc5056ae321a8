//! Reference values for the special-function layer, frozen from independent
//! high-precision computations (integral representations and 40-digit series).

use fxvg_core::specfun::{
    bessel_k, integrate, integrate_with_breakpoints, ln_bessel_k, ln_gamma, norm_cdf, norm_pdf,
    psi_mixture, QuadratureSpec,
};

#[track_caller]
fn assert_rel(actual: f64, expected: f64, tol: f64) {
    let rel = (actual - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
    assert!(
        rel <= tol,
        "actual {actual:.17e}, expected {expected:.17e}, rel err {rel:.3e} > {tol:.1e}"
    );
}

#[track_caller]
fn assert_close(actual: f64, expected: f64, abs_tol: f64, rel_tol: f64) {
    let diff = (actual - expected).abs();
    assert!(
        diff <= abs_tol + rel_tol * expected.abs(),
        "actual {actual:.17e}, expected {expected:.17e}, diff {diff:.3e}"
    );
}

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

#[test]
fn ln_gamma_reference_values() {
    assert_rel(ln_gamma(7.3).unwrap(), 7.147892523022249, 1e-12);
    assert_rel(ln_gamma(0.019).unwrap(), 3.952643399235572, 1e-12);
    assert_rel(ln_gamma(0.5).unwrap(), 0.57236494292470009, 1e-12);
    assert_rel(ln_gamma(252.0).unwrap(), 1139.5706847299847, 1e-12);
    assert_rel(ln_gamma(2.5e7).unwrap(), 400859651.97255722, 1e-12);
    assert!(ln_gamma(1.0).unwrap().abs() <= 1e-15);
}

#[test]
fn ln_gamma_rejects_nonpositive() {
    assert!(ln_gamma(0.0).is_err());
    assert!(ln_gamma(-3.2).is_err());
    assert!(ln_gamma(f64::NAN).is_err());
}

#[test]
fn norm_cdf_reference_values() {
    assert_close(norm_cdf(1.0), 0.84134474606854295, 1e-12, 0.0);
    assert_close(norm_cdf(-5.5), 1.8989562465887719e-8, 1e-12, 0.0);
    assert_close(norm_cdf(2.345), 0.99048646020045308, 1e-12, 0.0);
    assert_close(norm_cdf(-0.25), 0.40129367431707628, 1e-12, 0.0);
    assert_close(norm_cdf(0.0), 0.5, 1e-16, 0.0);
    assert_eq!(norm_cdf(-40.0), 0.0);
    assert_eq!(norm_cdf(40.0), 1.0);
    assert_close(norm_pdf(0.0), 0.3989422804014327, 1e-15, 0.0);
}

#[test]
fn norm_cdf_monotone_on_grid() {
    let mut prev = 0.0;
    for i in 0..=400 {
        let x = -10.0 + i as f64 * 0.05;
        let p = norm_cdf(x);
        assert!((0.0..=1.0).contains(&p));
        assert!(p >= prev, "norm_cdf not monotone at x={x}");
        prev = p;
    }
}

#[test]
fn bessel_k_reference_values() {
    assert_rel(bessel_k(0.8, 1.3).unwrap(), 0.33575174397162167, 1e-9);
    assert_rel(bessel_k(0.5, 2.0).unwrap(), 0.11993777196806145, 1e-9);
    assert_rel(bessel_k(4.2394, 0.00327).unwrap(), 2655753177465.745, 1e-9);
    assert_rel(bessel_k(10.5, 30.0).unwrap(), 1.279044369153198e-13, 1e-9);
    assert_rel(bessel_k(0.3, 1e-5).unwrap(), 58.178619126715338, 1e-9);
    assert_rel(bessel_k(3.25, 17.0).unwrap(), 1.6887324606783533e-8, 1e-9);
    // order symmetry: K_{-nu} = K_{nu}
    assert_rel(bessel_k(-0.8, 1.3).unwrap(), 0.33575174397162167, 1e-9);
}

#[test]
fn ln_bessel_k_reference_values() {
    assert_rel(ln_bessel_k(25.0, 1e-4).unwrap(), 301.67877103085141, 1e-9);
    assert_rel(ln_bessel_k(2.7, 500.0).unwrap(), -502.87447973895026, 1e-9);
    assert_rel(ln_bessel_k(0.0, 1.0).unwrap(), -0.8650643989067881, 1e-9);
    // huge order: the forward recurrence must carry its power-of-ten exponent
    assert_rel(ln_bessel_k(4238.5, 0.08).unwrap(), 44800.557444001351, 1e-9);
}

#[test]
fn bessel_k_overflow_and_domain_errors() {
    // value ~ e^44800 cannot be returned on the linear scale
    assert!(bessel_k(4238.5, 0.08).is_err());
    assert!(bessel_k(0.5, 0.0).is_err());
    assert!(bessel_k(0.5, -1.0).is_err());
    assert!(ln_bessel_k(1.0, f64::NAN).is_err());
}

#[test]
fn quadrature_polynomials_and_smooth_integrands() {
    let q = quad();
    assert_close(
        integrate(|x| x * x, 0.0, 1.0, &q).unwrap(),
        1.0 / 3.0,
        1e-12,
        1e-12,
    );
    assert_close(
        integrate(f64::sin, 0.0, std::f64::consts::PI, &q).unwrap(),
        2.0,
        1e-12,
        1e-12,
    );
    assert_close(
        integrate(f64::exp, 0.0, 1.0, &q).unwrap(),
        std::f64::consts::E - 1.0,
        1e-12,
        1e-12,
    );
    // orientation: empty interval
    assert_eq!(integrate(|x| x, 2.0, 2.0, &q).unwrap(), 0.0);
}

#[test]
fn quadrature_breakpoints_resolve_narrow_peak() {
    let q = quad();
    let w = 1e-5;
    let c = 0.3;
    let f = |x: f64| (-(x - c) * (x - c) / (2.0 * w * w)).exp();
    // mass of a width-1e-5 Gaussian inside [0, 1]: w·sqrt(2π) up to ~e^{-4.5e8} tails;
    // the seeds must bracket the support the caller cares about (8 sd keeps the
    // un-seeded remainder below 1e-15 of the mass)
    let expected = w * (2.0 * std::f64::consts::PI).sqrt();
    let got = integrate_with_breakpoints(
        &f,
        &[0.0, c - 8.0 * w, c - w, c, c + w, c + 8.0 * w, 1.0],
        &q,
    )
    .unwrap();
    assert_rel(got, expected, 1e-9);
}

#[test]
fn quadrature_reports_subdivision_exhaustion() {
    let tight = QuadratureSpec {
        rel_tol: 1e-14,
        abs_tol: 1e-15,
        max_subdivisions: 2,
    };
    let err = integrate(|x| x.sqrt().recip(), 1e-12, 1.0, &tight).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("subdivision"), "unexpected error: {msg}");
}

#[test]
fn quadrature_rejects_nonfinite_integrand() {
    let q = quad();
    assert!(integrate(|x| if x > 0.9 { f64::NAN } else { x }, 0.0, 1.0, &q).is_err());
    assert!(integrate(|_| f64::INFINITY, 0.0, 1.0, &q).is_err());
}

#[test]
fn psi_reference_values() {
    let q = quad();
    assert_close(
        psi_mixture(0.3, -0.2, 4.0, &q).unwrap(),
        0.41316537015896007,
        1e-8,
        1e-8,
    );
    assert_close(
        psi_mixture(1.5, 0.3, 0.019, &q).unwrap(),
        0.99958945047087892,
        1e-8,
        1e-8,
    );
    assert_close(
        psi_mixture(-2.0, 1.0, 2.5, &q).unwrap(),
        0.51913951957686955,
        1e-8,
        1e-8,
    );
    assert_close(
        psi_mixture(0.1, -0.3, 250.0, &q).unwrap(),
        1.4164683681455156e-6,
        1e-8,
        1e-8,
    );
    assert_close(
        psi_mixture(0.0, 0.35, 1.7, &q).unwrap(),
        0.66212952018306767,
        1e-8,
        1e-8,
    );
}

#[test]
fn psi_saturates_at_large_first_argument() {
    let q = quad();
    assert_close(psi_mixture(1e6, 0.0, 1.0, &q).unwrap(), 1.0, 1e-9, 0.0);
}

#[test]
fn psi_symmetry_spot_check() {
    let q = quad();
    let p = psi_mixture(0.7, -0.1, 2.3, &q).unwrap();
    let pc = psi_mixture(-0.7, 0.1, 2.3, &q).unwrap();
    assert_close(p + pc, 1.0, 1e-8, 0.0);
}

#[test]
fn psi_rejects_bad_shape() {
    let q = quad();
    assert!(psi_mixture(0.1, 0.1, 0.0, &q).is_err());
    assert!(psi_mixture(0.1, 0.1, -1.0, &q).is_err());
    assert!(psi_mixture(f64::NAN, 0.1, 1.0, &q).is_err());
}
