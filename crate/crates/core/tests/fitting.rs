use patspec::constants::{photon_energy, BOHR_MAGNETON_UEV_PER_T};
use patspec::fitting::{
    closed_form_delta_eps_prime, delta_eps_plus_zero, fit_g_factor, fit_relaxation_rate, fit_tc_b0,
    model_delta_eps_plus, model_delta_eps_pm, numeric_delta_eps_prime, PeakSeries, Scenario, SeriesKind, SeriesPoint,
};
use patspec::physics::DeviceParams;
use patspec::spectra::AxisRange;
use patspec::synth::{line_distance_series, relaxation_series};
use patspec::Error;

fn bare() -> DeviceParams {
    DeviceParams::new(0.382, 8.7, 0.109)
}

/// Ordinary least-squares slope of `(x, y)`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn plus_curve(device: &DeviceParams, nu: f64, fields: &[f64]) -> Vec<f64> {
    fields
        .iter()
        .map(|&b| model_delta_eps_plus(b, nu, device, Scenario::Singlet).unwrap())
        .collect()
}

fn fields(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    AxisRange::new(lo, hi, n).values()
}

#[test]
fn plus_distance_has_zeeman_slope() {
    let b = fields(1.5, 3.0, 16);
    let s = slope(&b, &plus_curve(&bare(), 20.0, &b));
    let expect = 0.382 * BOHR_MAGNETON_UEV_PER_T;
    assert!((s / expect - 1.0).abs() < 0.01, "{s} vs {expect}");
}

#[test]
fn zero_tunnel_coupling_gives_bare_zeeman_distances() {
    let d = DeviceParams::new(0.382, 0.0, 0.109);
    for b in [0.8, 1.5, 2.4] {
        let r = model_delta_eps_pm(b, 20.0, &d, Scenario::Singlet).unwrap();
        assert!((r.plus - d.zeeman(b)).abs() < 1e-8);
        assert!((r.minus - d.zeeman(b)).abs() < 1e-8);
    }
}

#[test]
fn tunnel_coupling_moves_intercept_not_slope() {
    let b = fields(1.5, 3.0, 16);
    let low = plus_curve(&bare(), 20.0, &b);
    let high = plus_curve(&DeviceParams::new(0.382, 11.0, 0.109), 20.0, &b);
    assert!(high.iter().zip(&low).all(|(h, l)| h > l));
    let (s_low, s_high) = (slope(&b, &low), slope(&b, &high));
    assert!((s_high / s_low - 1.0).abs() < 0.01, "{s_low} {s_high}");
}

#[test]
fn slope_is_invariant_under_remanence_changes() {
    let b = fields(2.0, 3.0, 11);
    let base = slope(&b, &plus_curve(&bare(), 20.0, &b));
    for b0 in [0.0, 0.05, 0.2, 0.3] {
        let s = slope(&b, &plus_curve(&DeviceParams::new(0.382, 8.7, b0), 20.0, &b));
        assert!((s / base - 1.0).abs() < 1e-3, "b0={b0}: {s} vs {base}");
    }
}

#[test]
fn tunnel_coupling_tilts_slope_through_exchange_only() {
    // The exchange term adds a slope proportional to t_c^2 on top of |g| mu_B.
    let b = fields(2.0, 3.0, 11);
    let at = |t_c: f64| slope(&b, &plus_curve(&DeviceParams::new(0.382, t_c, 0.109), 20.0, &b));
    let zeeman = at(0.0);
    let tilt = |t_c: f64| at(t_c) / zeeman - 1.0;
    let per_tc2 = tilt(8.7) / 8.7f64.powi(2);
    assert!(per_tc2 > 0.0);
    for t_c in [4.0, 7.0, 10.0, 12.0] {
        let expect = per_tc2 * t_c * t_c;
        assert!(
            (tilt(t_c) / expect - 1.0).abs() < 0.05,
            "t_c={t_c}: {} vs {expect}",
            tilt(t_c)
        );
    }
    assert!((at(8.0) / at(8.7) - 1.0).abs() < 1e-3);
    assert!((at(9.4) / at(8.7) - 1.0).abs() < 1e-3);
}

#[test]
fn singlet_scenario_separates_plus_and_minus_by_twice_exchange() {
    let d = bare();
    for b in [0.6, 0.9, 1.2] {
        let r = model_delta_eps_pm(b, 20.0, &d, Scenario::Singlet).unwrap();
        assert!(r.plus > r.minus, "B={b}: {r:?}");
        let t = model_delta_eps_pm(b, 20.0, &d, Scenario::Triplet0).unwrap();
        assert!(t.plus - t.minus <= 1e-9, "B={b}: {t:?}");
    }
}

#[test]
fn noiseless_g_fit_has_small_model_bias() {
    for device in [bare(), DeviceParams::reference()] {
        let series = line_distance_series(
            &device,
            20.0,
            &AxisRange::new(1.5, 3.0, 15),
            &[SeriesKind::Plus],
            Scenario::Singlet,
            0.0,
            0,
        )
        .unwrap();
        let fit = fit_g_factor(&series, Some(&device)).unwrap();
        let g = fit.value("g_abs").unwrap();
        // Δε⁺ = E_z + J(ε) and J drifts with B, which tilts the line slightly.
        assert!((g - 0.382).abs() < 0.002, "{g}");
        assert!(g > 0.382);
    }
}

#[test]
fn noisy_g_fit_within_one_percent() {
    let device = bare();
    for seed in 0..20 {
        let series = line_distance_series(
            &device,
            20.0,
            &AxisRange::new(1.5, 3.0, 15),
            &[SeriesKind::Plus],
            Scenario::Singlet,
            0.5,
            seed,
        )
        .unwrap();
        let fit = fit_g_factor(&series, None).unwrap();
        let g = fit.get("g_abs").unwrap();
        assert!((g.value - 0.382).abs() < 0.01, "seed {seed}: {}", g.value);
        assert!(g.sigma > 0.0 && g.sigma < 0.01);
    }
}

#[test]
fn flat_series_has_zero_g() {
    let points = (0..5)
        .map(|k| SeriesPoint {
            b_ext: 1.0 + 0.3 * k as f64,
            delta_eps: 12.5,
            kind: SeriesKind::Plus,
            sigma: Some(0.5),
        })
        .collect();
    let fit = fit_g_factor(&PeakSeries::new(20.0, points), None).unwrap();
    let g = fit.get("g_abs").unwrap();
    assert!(g.value.abs() < 1e-12);
    assert!(g.sigma.is_finite() && g.sigma > 0.0);
}

#[test]
fn g_fit_refuses_short_or_curved_series() {
    let device = bare();
    let short = line_distance_series(
        &device,
        20.0,
        &AxisRange::new(1.5, 3.0, 2),
        &[SeriesKind::Plus],
        Scenario::Singlet,
        0.0,
        0,
    )
    .unwrap();
    assert!(matches!(fit_g_factor(&short, None), Err(Error::InvalidInput(_))));
    // A strongly coupled device bends the line at low field.
    let strong = DeviceParams::new(0.382, 38.0, 0.109);
    let low = line_distance_series(
        &strong,
        20.0,
        &AxisRange::new(0.0, 2.0, 11),
        &[SeriesKind::Plus],
        Scenario::Singlet,
        0.0,
        0,
    )
    .unwrap();
    assert!(fit_g_factor(&low, None).is_ok());
    assert!(matches!(fit_g_factor(&low, Some(&strong)), Err(Error::InvalidInput(_))));
    let high = line_distance_series(
        &strong,
        20.0,
        &AxisRange::new(1.5, 3.0, 11),
        &[SeriesKind::Plus],
        Scenario::Singlet,
        0.0,
        0,
    )
    .unwrap();
    assert!(fit_g_factor(&high, Some(&strong)).is_ok());
}

#[test]
fn closed_form_blue_distance() {
    let d = bare();
    assert!((closed_form_delta_eps_prime(1.5, 11.0, &d).unwrap() + 44.31).abs() < 0.005);
    let hv = photon_energy(11.0);
    let flat = DeviceParams::new(0.382, 0.0, 0.0);
    for b in [0.5, 1.2, 1.9] {
        let ez = flat.zeeman(b);
        assert!((closed_form_delta_eps_prime(b, 11.0, &flat).unwrap() - (-(hv - ez) - hv)).abs() < 1e-9);
    }
    let b_star = (hv - d.t_c) / (0.382 * BOHR_MAGNETON_UEV_PER_T) - d.b0;
    let second = (hv * hv - 4.0 * d.t_c * d.t_c).sqrt();
    assert!((closed_form_delta_eps_prime(b_star, 11.0, &d).unwrap() + second).abs() < 1e-9);
}

#[test]
fn closed_form_matches_eigensystem_resonances() {
    let d = bare();
    for b in fields(1.2, 1.9, 15) {
        let closed = closed_form_delta_eps_prime(b, 11.0, &d).unwrap();
        let numeric = numeric_delta_eps_prime(b, 11.0, &d).unwrap();
        assert!((closed - numeric).abs() < 0.05, "B={b}: {closed} vs {numeric}");
    }
}

#[test]
fn blue_distance_domain_errors_name_the_term() {
    let d = bare();
    match closed_form_delta_eps_prime(3.0, 11.0, &d) {
        Err(Error::Domain(msg)) => assert!(msg.contains("T+")),
        other => panic!("{other:?}"),
    }
    match closed_form_delta_eps_prime(0.5, 11.0, &DeviceParams::new(0.382, 30.0, 0.109)) {
        Err(Error::Domain(msg)) => assert!(msg.contains("singlet")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn noiseless_tunnel_coupling_fit() {
    let series = line_distance_series(
        &bare(),
        11.0,
        &AxisRange::new(1.2, 1.9, 8),
        &[SeriesKind::Prime],
        Scenario::Singlet,
        0.0,
        0,
    )
    .unwrap();
    let fit = fit_tc_b0(&series, 0.382).unwrap();
    assert!((fit.value("t_c_ueV").unwrap() - 8.7).abs() < 1e-3);
    assert!((fit.value("b0_T").unwrap() - 0.109).abs() < 1e-4);
}

#[test]
fn noisy_tunnel_coupling_fit() {
    for seed in 0..20 {
        let series = line_distance_series(
            &bare(),
            11.0,
            &AxisRange::new(1.2, 1.9, 12),
            &[SeriesKind::Prime],
            Scenario::Singlet,
            0.5,
            seed,
        )
        .unwrap();
        let fit = fit_tc_b0(&series, 0.382).unwrap();
        let (t, b0) = (fit.get("t_c_ueV").unwrap(), fit.get("b0_T").unwrap());
        assert!((t.value - 8.7).abs() < 0.2, "seed {seed}: t_c {}", t.value);
        assert!((b0.value - 0.109).abs() < 0.02, "seed {seed}: b0 {}", b0.value);
        assert!(t.sigma > 0.0 && b0.sigma > 0.0);
    }
}

#[test]
fn single_field_series_is_not_identifiable() {
    let v = closed_form_delta_eps_prime(1.5, 11.0, &bare()).unwrap();
    let series = PeakSeries::new(
        11.0,
        vec![SeriesPoint {
            b_ext: 1.5,
            delta_eps: v,
            kind: SeriesKind::Prime,
            sigma: None,
        }],
    );
    assert!(matches!(fit_tc_b0(&series, 0.382), Err(Error::FitFailure { .. })));
}

fn remanence_series(device: &DeviceParams) -> Vec<PeakSeries> {
    [15.0, 20.0, 25.0]
        .iter()
        .map(|&nu| {
            line_distance_series(
                device,
                nu,
                &AxisRange::new(1.5, 3.0, 7),
                &[SeriesKind::Plus],
                Scenario::Singlet,
                0.0,
                0,
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn remanence_round_trip_prefers_singlet() {
    let truth = DeviceParams::new(0.382, 8.7, 0.070);
    let start = DeviceParams { b0: 0.109, ..truth };
    let series = remanence_series(&truth);
    let singlet = delta_eps_plus_zero(&series, &start, Scenario::Singlet).unwrap();
    let triplet = delta_eps_plus_zero(&series, &start, Scenario::Triplet0).unwrap();
    assert!((singlet.value("remanence_T").unwrap() - 0.070).abs() < 0.005);
    assert_eq!(singlet.scenario, Some(Scenario::Singlet));
    assert!(singlet.residual_norm < 1e-3 * triplet.residual_norm);
}

#[test]
fn zero_tunnel_coupling_intercepts_are_frequency_independent() {
    let truth = DeviceParams::new(0.382, 0.0, 0.070);
    let fit = delta_eps_plus_zero(&remanence_series(&truth), &truth, Scenario::Singlet).unwrap();
    let offset = 0.382 * BOHR_MAGNETON_UEV_PER_T * 0.070;
    let intercepts: Vec<f64> = fit
        .params
        .iter()
        .filter(|p| p.name.starts_with("delta_eps0"))
        .map(|p| p.value)
        .collect();
    assert_eq!(intercepts.len(), 3);
    for v in intercepts {
        assert!((v - offset).abs() < 1e-9, "{v} vs {offset}");
    }
}

#[test]
fn triplet_model_cannot_explain_small_coupling_data() {
    let truth = DeviceParams::new(0.382, 4.0, 0.070);
    let series = remanence_series(&truth);
    let singlet = delta_eps_plus_zero(&series, &truth, Scenario::Singlet).unwrap();
    let triplet = delta_eps_plus_zero(&series, &truth, Scenario::Triplet0).unwrap();
    assert!(triplet.residual_norm > 1.0);
    assert!(singlet.residual_norm < 1e-6);
}

#[test]
fn noiseless_relaxation_round_trip() {
    let gamma = 1.0 / 2000.0;
    let points = relaxation_series(gamma, &[1000.0, 2000.0, 5000.0, 10000.0], 0.0, 0).unwrap();
    let fit = fit_relaxation_rate(&points).unwrap();
    assert!(!fit.limit_only);
    assert!((fit.value("gamma_s_per_ns").unwrap() / gamma - 1.0).abs() < 1e-6);
}

#[test]
fn unresolved_decay_is_a_lower_bound() {
    let points = [(1000.0, 1.0), (2000.0, 1.0), (5000.0, 1.0)];
    let fit = fit_relaxation_rate(&points).unwrap();
    assert!(fit.limit_only);
    assert!(fit.note.as_deref().unwrap().contains("not resolved"));
    assert!(fit.value("gamma_s_per_ns").unwrap() > 0.0);
}

#[test]
fn noisy_relaxation_within_ten_percent() {
    let gamma = 1.0 / 2000.0;
    let taus: Vec<f64> = (1..=10).map(|k| 1000.0 * k as f64).collect();
    for seed in 0..20 {
        let points = relaxation_series(gamma, &taus, 0.02, seed).unwrap();
        let fit = fit_relaxation_rate(&points).unwrap();
        let g = fit.value("gamma_s_per_ns").unwrap();
        assert!((g / gamma - 1.0).abs() < 0.1, "seed {seed}: {g}");
    }
}

#[test]
fn relaxation_input_is_validated() {
    assert!(fit_relaxation_rate(&[(1.0, 0.5), (2.0, 0.4)]).is_err());
    assert!(fit_relaxation_rate(&[(1.0, 0.5), (2.0, 1.4), (3.0, 0.3)]).is_err());
    assert!(fit_relaxation_rate(&[(-1.0, 0.5), (2.0, 0.4), (3.0, 0.3)]).is_err());
}
