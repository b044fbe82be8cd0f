use patspec::mechanisms::{
    field_angle_factor, matrix_element_ratio, rate_ratio_main_text, so_direction_vector, t_nuc_rms, t_so_magnitude,
    DotGeometry, HyperfineParams, SoCouplingParams, GAAS_EFFECTIVE_MASS,
};
use proptest::prelude::*;

fn hyperfine() -> HyperfineParams {
    HyperfineParams::new(100.0, 4e6).unwrap()
}

fn geometry(sigma: f64, a: f64) -> DotGeometry {
    DotGeometry::from_sigma(sigma, a, 0.3, GAAS_EFFECTIVE_MASS).unwrap()
}

fn norm((z, y): (f64, f64)) -> f64 {
    z.hypot(y)
}

#[test]
fn direction_vector_limits() {
    let (a, b) = (0.8, 0.6);
    assert_eq!(so_direction_vector(0.0, a, b), (-(a - b), 0.0));
    let (nz, ny) = so_direction_vector(std::f64::consts::FRAC_PI_2, a, b);
    assert!(nz.abs() < 1e-16);
    assert!((ny + (b - a)).abs() < 1e-15);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert_eq!(so_direction_vector(0.0, s, s), (0.0, 0.0));
}

#[test]
fn spin_orbit_element_scaling() {
    let so = SoCouplingParams::new(0.8, 0.6, 10.0).unwrap();
    let long = SoCouplingParams::new(0.8, 0.6, 20.0).unwrap();
    let g = geometry(33.7, 75.0);
    assert!((t_so_magnitude(&g, &long) / t_so_magnitude(&g, &so) - 0.5).abs() < 1e-14);
    assert_eq!(t_so_magnitude(&geometry(33.7, 0.0), &so), 0.0);
    assert!(t_so_magnitude(&geometry(33.7, 5000.0), &so) < 1e-100);
}

#[test]
fn spin_orbit_element_peaks_at_two_sigma() {
    let so = SoCouplingParams::new(0.8, 0.6, 10.0).unwrap();
    let sigma = 30.0;
    let at = |a: f64| t_so_magnitude(&geometry(sigma, a), &so);
    let peak = at(2.0 * sigma);
    for a in [1.5 * sigma, 1.9 * sigma, 2.1 * sigma, 2.5 * sigma] {
        assert!(at(a) < peak);
    }
}

#[test]
fn hyperfine_element_values() {
    let hf = hyperfine();
    assert!((t_nuc_rms(&geometry(30.0, 0.0), &hf) - 0.05).abs() < 1e-15);
    let two_sigma = t_nuc_rms(&geometry(30.0, 60.0), &hf);
    assert!((two_sigma - 0.05 * (-0.5f64).exp()).abs() < 1e-15);
    let many = HyperfineParams::new(100.0, 1e30).unwrap();
    assert!(t_nuc_rms(&geometry(30.0, 0.0), &many) < 1e-12);
    assert!(HyperfineParams::new(100.0, 0.5).is_err());
}

#[test]
fn element_ratio_reference_estimate() {
    let g = DotGeometry {
        sigma_nm: DotGeometry::sigma_for_spacing(1000.0, GAAS_EFFECTIVE_MASS),
        a_nm: 75.0,
        theta: 0.0,
        delta_orbital: 1000.0,
    };
    let so = SoCouplingParams::new(1.0, 0.0, 10.0).unwrap();
    let r = matrix_element_ratio(&g, &so, &hyperfine(), 1.5).unwrap();
    assert!((r - 56.25).abs() < 1e-12);
    assert!((r / 60.0 - 1.0).abs() < 0.15);
    assert_eq!(matrix_element_ratio(&g, &so, &hyperfine(), 0.0).unwrap(), 0.0);
    assert!(matrix_element_ratio(&g, &so, &hyperfine(), 1.6).is_err());
    let touching = DotGeometry { a_nm: 0.0, ..g };
    assert_eq!(matrix_element_ratio(&touching, &so, &hyperfine(), 1.5).unwrap(), 0.0);
}

#[test]
fn field_along_n_blocks_spin_orbit_flips() {
    let n = so_direction_vector(0.4, 0.8, 0.6);
    let f = field_angle_factor(n, (0.0, n.1, n.0)).unwrap();
    assert!(f.abs() < 1e-15);
    let perpendicular = field_angle_factor(n, (1.0, 0.0, 0.0)).unwrap();
    assert!((perpendicular - 1.5 * norm(n)).abs() < 1e-15);
    assert!(field_angle_factor(n, (0.0, 0.0, 0.0)).is_err());
}

#[test]
fn main_text_estimate_and_square() {
    let r = rate_ratio_main_text(1000.0, &hyperfine(), 75.0, 10.0).unwrap();
    assert!((r.expression - 37.5).abs() < 1e-12);
    assert!((r.square - 1406.25).abs() < 1e-9);
    assert!(!r.note.is_empty());
    assert_eq!(
        rate_ratio_main_text(1000.0, &hyperfine(), 0.0, 10.0)
            .unwrap()
            .expression,
        0.0
    );
    let double_d = rate_ratio_main_text(1000.0, &hyperfine(), 150.0, 10.0)
        .unwrap()
        .expression;
    let double_l = rate_ratio_main_text(1000.0, &hyperfine(), 75.0, 20.0)
        .unwrap()
        .expression;
    assert!((double_d - 75.0).abs() < 1e-12);
    assert!((double_l - 18.75).abs() < 1e-12);
}

proptest! {
    #[test]
    fn overlap_factors_cancel(sigma in 10.0..80.0f64, a in 1.0..300.0f64, theta in 0.0..std::f64::consts::PI, alpha in 0.05..1.0f64, beta in 0.0..1.0f64, lambda in 0.5..50.0f64) {
        let g = DotGeometry::from_sigma(sigma, a, theta, GAAS_EFFECTIVE_MASS).unwrap();
        let so = SoCouplingParams::new(alpha, beta, lambda).unwrap();
        let hf = hyperfine();
        let n = norm(so_direction_vector(theta, so.alpha, so.beta));
        let direct = t_so_magnitude(&g, &so) / t_nuc_rms(&g, &hf);
        let closed = matrix_element_ratio(&g, &so, &hf, n).unwrap();
        prop_assume!(closed > 1e-300);
        prop_assert!((direct / closed - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_falls_with_dot_size(sigma in 10.0..80.0f64, grow in 1.01..2.0f64, a in 10.0..200.0f64) {
        let so = SoCouplingParams::new(0.8, 0.6, 10.0).unwrap();
        let r = |s: f64| matrix_element_ratio(&geometry(s, a), &so, &hyperfine(), 1.5).unwrap();
        prop_assert!(r(sigma * grow) < r(sigma));
    }

    #[test]
    fn ratio_grows_with_distance(sigma in 10.0..80.0f64, a in 1.0..200.0f64, grow in 1.01..2.0f64) {
        let so = SoCouplingParams::new(0.8, 0.6, 10.0).unwrap();
        let r = |d: f64| matrix_element_ratio(&geometry(sigma, d), &so, &hyperfine(), 1.5).unwrap();
        prop_assert!(r(a * grow) > r(a));
    }
}
