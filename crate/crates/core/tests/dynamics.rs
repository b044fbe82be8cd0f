use nalgebra::Matrix5;
use patspec::constants::{photon_energy, BOLTZMANN_UEV_PER_K};
use patspec::dissipation::{
    asymptotic_state, bose_occupation, build_superoperator, gibbs_state, kernel_dimension, propagate, spectral_density,
    steady_state, trace_vector, transition_rates, vec_index, DensityMatrix, PhononBath, Superoperator, DIM,
};
use patspec::fitting::{locate_resonance, Transition};
use patspec::physics::{build_hamiltonian, eigensystem, Character, DeviceParams, EigenSystem, FieldPoint, C64};
use patspec::rwa::{assign_bands, build_drive_perturbation, DriveParams};
use patspec::Error;

fn generator(
    device: &DeviceParams,
    point: FieldPoint,
    drive: &DriveParams,
    bath: &PhononBath,
) -> (EigenSystem, Superoperator) {
    let eig = eigensystem(&build_hamiltonian(device, point)).unwrap();
    let bands = assign_bands(&eig, drive.nu);
    let model = build_drive_perturbation(&eig, &bands, drive);
    let sup = build_superoperator(&model, &transition_rates(&eig, bath));
    (eig, sup)
}

#[test]
fn two_level_drive_element_is_half_omega() {
    let nu = 11.0;
    let t_c = photon_energy(nu) / 2.0;
    let device = DeviceParams::new(0.382, t_c, 0.0);
    let eig = eigensystem(&build_hamiltonian(&device, FieldPoint::new(0.0, 0.0))).unwrap();
    let (bond, anti) = (0, 4);
    assert!((eig.weight(bond, Character::S02) - 0.5).abs() < 1e-12);
    assert!((eig.weight(anti, Character::S02) - 0.5).abs() < 1e-12);
    assert!((eig.energies[anti] - eig.energies[bond] - photon_energy(nu)).abs() < 1e-9);
    let bands = assign_bands(&eig, nu);
    let model = build_drive_perturbation(&eig, &bands, &DriveParams::new(nu, 1.3));
    assert!((model.v_drive[(bond, anti)].norm() - 0.65).abs() < 1e-12);
    assert!((model.h_eff[(bond, bond)] - model.h_eff[(anti, anti)]).norm() < 1e-9);
}

#[test]
fn drive_only_couples_adjacent_bands() {
    let device = DeviceParams::reference();
    for &(b, eps) in &[(0.5, 10.0), (1.5, 40.0), (2.5, 6.0), (2.5, 102.0)] {
        let eig = eigensystem(&build_hamiltonian(&device, FieldPoint::new(b, eps))).unwrap();
        let bands = assign_bands(&eig, 11.0);
        let model = build_drive_perturbation(&eig, &bands, &DriveParams::new(11.0, 1.0));
        assert_eq!(model.h_eff, model.h_eff.adjoint());
        assert!((model.v_drive - model.v_drive.adjoint()).norm() < 1e-15);
        for i in 0..5 {
            for j in 0..5 {
                if (bands.band_index[i] - bands.band_index[j]).abs() != 1 {
                    assert_eq!(model.v_drive[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }
}

#[test]
fn t_plus_resonance_has_drive_coupling() {
    let device = DeviceParams::reference();
    let eps = locate_resonance(&device, 2.5, 11.0, Transition::TPlus).unwrap();
    let eig = eigensystem(&build_hamiltonian(&device, FieldPoint::new(2.5, eps))).unwrap();
    let bands = assign_bands(&eig, 11.0);
    let model = build_drive_perturbation(&eig, &bands, &DriveParams::new(11.0, 1.0));
    let tp = eig.most_like(Character::TPlus);
    let v = model.v_drive[(0, tp)].norm();
    assert!(v > 0.0);
    assert!((v - eig.s02_amplitude(0).norm() * eig.s02_amplitude(tp).norm()).abs() < 1e-12);
    let bare = DeviceParams {
        t_so_y: 0.0,
        ..device.with_gradient(0.0, 0.0, 0.0)
    };
    let eig0 = eigensystem(&build_hamiltonian(&bare, FieldPoint::new(2.5, eps))).unwrap();
    assert!(eig0.s02_amplitude(eig0.most_like(Character::TPlus)).norm() < 1e-12);
}

#[test]
fn detailed_balance_of_rates() {
    let device = DeviceParams::reference();
    let bath = PhononBath {
        temperature: 0.25,
        ..PhononBath::default()
    };
    let eig = eigensystem(&build_hamiltonian(&device, FieldPoint::new(1.2, 25.0))).unwrap();
    let r = transition_rates(&eig, &bath);
    for i in 0..5 {
        for j in 0..i {
            let (up, down) = (r.gamma[i][j], r.gamma[j][i]);
            assert!(up >= 0.0 && down >= 0.0);
            if down > 0.0 {
                let de = eig.energies[i] - eig.energies[j];
                let expect = (-de / (BOLTZMANN_UEV_PER_K * bath.temperature)).exp();
                assert!((up / down / expect - 1.0).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn spectral_density_vanishes_at_zero_frequency() {
    let bath = PhononBath::default();
    assert_eq!(spectral_density(0.0, &bath).unwrap(), 0.0);
    assert!(spectral_density(1e-3, &bath).unwrap() < 1e-15);
    assert!(matches!(spectral_density(-1.0, &bath), Err(Error::Domain(_))));
    assert_eq!(bose_occupation(10.0, 0.0), 0.0);
}

#[test]
fn default_coupling_gives_hundred_nanosecond_charge_relaxation() {
    let bath = PhononBath::default();
    let t_c = 8.7;
    let eps = 100.0;
    let d2 = t_c * t_c / (eps * eps + 4.0 * t_c * t_c);
    let rate = bath.coupling_eta * d2 * spectral_density(45.0, &bath).unwrap();
    assert!((rate - 0.01).abs() < 1e-15);
}

#[test]
fn generator_preserves_trace_and_hermiticity() {
    let device = DeviceParams::reference();
    let (_, sup) = generator(
        &device,
        FieldPoint::new(2.5, 102.0),
        &DriveParams::new(11.0, 1.0),
        &PhononBath::default(),
    );
    let annihilated = trace_vector().transpose() * sup.generator;
    assert!(annihilated.norm() < 1e-12);
    let rho = DensityMatrix {
        rho: Matrix5::from_fn(|r, c| C64::new((r + 2 * c) as f64 * 0.01, (r as f64 - c as f64) * 0.02)),
    };
    let rho = DensityMatrix {
        rho: (rho.rho + rho.rho.adjoint()) * C64::new(0.5, 0.0),
    };
    let out = DensityMatrix::from_vector(&(sup.generator * rho.to_vector()));
    assert!(out.hermiticity_defect() < 1e-12);
    assert_eq!(vec_index(2, 3), 17);
    assert_eq!(DIM, 25);
}

#[test]
fn propagation_preserves_trace() {
    let device = DeviceParams::reference();
    let (_, sup) = generator(
        &device,
        FieldPoint::new(1.5, 40.0),
        &DriveParams::new(11.0, 2.0),
        &PhononBath::default(),
    );
    let rho0 = gibbs_state(&[0.0, 1.0, 2.0, 3.0, 4.0], 0.1);
    for t in [0.1, 3.0, 250.0] {
        let rho = propagate(&sup, &rho0, t);
        assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-9);
    }
}

#[test]
fn undriven_steady_state_is_thermal() {
    let device = DeviceParams::reference();
    let bath = PhononBath::default();
    for &(b, eps) in &[(0.8, -10.0), (1.5, 33.0), (2.5, 90.0)] {
        let (eig, sup) = generator(&device, FieldPoint::new(b, eps), &DriveParams::new(11.0, 0.0), &bath);
        let ss = steady_state(&sup).unwrap();
        let gibbs = gibbs_state(&eig.energies, bath.temperature).populations();
        let p = ss.populations();
        let kl: f64 = (0..5)
            .filter(|&k| p[k] > 0.0)
            .map(|k| p[k] * (p[k] / gibbs[k]).ln())
            .sum();
        assert!(kl.abs() < 1e-8, "B={b} eps={eps} KL={kl}");
        for r in 0..5 {
            for c in 0..5 {
                if r != c {
                    assert!(ss.rho[(r, c)].norm() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn resonant_drive_raises_t_plus_above_thermal() {
    let device = DeviceParams::reference();
    let bath = PhononBath::default();
    let eps = locate_resonance(&device, 2.5, 11.0, Transition::TPlus).unwrap();
    let (eig, sup) = generator(&device, FieldPoint::new(2.5, eps), &DriveParams::new(11.0, 1.0), &bath);
    let ss = steady_state(&sup).unwrap();
    let tp = eig.most_like(Character::TPlus);
    let gibbs = gibbs_state(&eig.energies, bath.temperature).populations();
    assert!(ss.populations()[tp] > gibbs[tp] + 1e-3);
    let long = asymptotic_state(&sup, &gibbs_state(&eig.energies, bath.temperature));
    assert!((long.rho - ss.rho).norm() < 1e-6);
}

#[test]
fn decoupled_generator_has_degenerate_kernel() {
    let device = DeviceParams::new(0.382, 8.7, 0.109);
    let (_, sup) = generator(
        &device,
        FieldPoint::new(1.5, 40.0),
        &DriveParams::new(11.0, 1.0),
        &PhononBath::default(),
    );
    assert!(kernel_dimension(&sup) > 1);
    assert!(matches!(steady_state(&sup), Err(Error::Multiplicity { .. })));
}

/// S(1,1)-character population of a steady state in the eigenbasis.
fn s11_population(rho: &DensityMatrix, eig: &EigenSystem) -> f64 {
    let p = rho.populations();
    (0..5).map(|k| p[k] * eig.weight(k, Character::S11)).sum()
}

#[test]
fn blue_drive_pumps_into_metastable_singlet_at_low_field() {
    let device = DeviceParams::reference();
    let bath = PhononBath::default();
    let drive = DriveParams::new(11.0, 1.0);
    let pumped = |b: f64| {
        let eps = locate_resonance(&device, b, 11.0, Transition::Blue).unwrap();
        let (eig, sup) = generator(&device, FieldPoint::new(b, eps), &drive, &bath);
        s11_population(&steady_state(&sup).unwrap(), &eig)
    };
    assert!(pumped(0.5) > pumped(2.5));
}
