use std::f64::consts::LN_2;

use julia_thermo::poly::{evaluate_orbit, green_function, lyapunov_exponent, periodic_points, preimages, LyapunovMethod, Polynomial};
use julia_thermo::C64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn period_three_points_of_the_square_map() {
    let f = Polynomial::quadratic(c(0.0, 0.0));
    let pts = periodic_points(&f, 3).unwrap();
    for p in &pts {
        assert!((f.iterate(p.z, 3) - p.z).norm() < 1e-10);
        if (p.z.norm() - 1.0).abs() < 1e-9 {
            assert!((p.multiplier.norm() - 8.0).abs() < 1e-8);
        }
    }
    let on_circle = pts.iter().filter(|p| (p.z.norm() - 1.0).abs() < 1e-9).count();
    assert_eq!(on_circle, 7);
}

#[test]
fn preimages_map_back() {
    let f = Polynomial::quadratic(c(-0.3, 0.6));
    let w = c(0.7, -0.2);
    let pre = preimages(&f, w).unwrap();
    assert_eq!(pre.len(), 2);
    for z in pre {
        assert!((f.eval(z) - w).norm() < 1e-12);
    }
}

#[test]
fn green_function_of_monomials() {
    let z = c(2.0, 2.0);
    for d in [2, 3] {
        let f = Polynomial::monomial(d).unwrap();
        assert!((green_function(&f, z, 40) - z.norm().ln()).abs() < 1e-12);
    }
    assert_eq!(green_function(&Polynomial::quadratic(c(0.0, 0.0)), c(0.5, 0.0), 40), 0.0);
}

#[test]
fn lyapunov_of_the_cubic_monomial() {
    let f = Polynomial::monomial(3).unwrap();
    let lz = lyapunov_exponent(&f, LyapunovMethod::Przytycki, 40).unwrap();
    let lp = lyapunov_exponent(&f, LyapunovMethod::Periodic, 5).unwrap();
    assert!((lz - 3f64.ln()).abs() < 1e-12);
    assert!((lp - 3f64.ln()).abs() < 1e-9);
}

#[test]
fn chebyshev_orbit_of_the_critical_point() {
    let f = Polynomial::quadratic(c(-2.0, 0.0));
    let orbit = evaluate_orbit(&f, c(0.0, 0.0), 5, 1e6);
    let re: Vec<f64> = orbit.points.iter().map(|z| z.re).collect();
    assert_eq!(re, vec![0.0, -2.0, 2.0, 2.0, 2.0, 2.0]);
    assert!(!orbit.escaped);
    let l = lyapunov_exponent(&f, LyapunovMethod::Przytycki, 60).unwrap();
    assert!((l - LN_2).abs() < 1e-12);
}

proptest! {
    #[test]
    fn chain_rule_matches_central_difference(cr in -0.5f64..0.5, ci in -0.5f64..0.5, zr in -1.0f64..1.0, zi in -1.0f64..1.0) {
        let f = Polynomial::quadratic(c(cr, ci));
        let z = c(zr, zi);
        let (w, d) = f.iterate_d1(z, 3);
        prop_assert!((w - f.iterate(z, 3)).norm() < 1e-12);
        let h = 1e-6;
        let fd = (f.iterate(z + h, 3) - f.iterate(z - h, 3)) / (2.0 * h);
        prop_assert!((fd - d).norm() <= 1e-5 * (1.0 + d.norm()));
    }
}
