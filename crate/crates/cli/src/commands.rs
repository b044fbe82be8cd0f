//! Subcommand implementations. Each writes its tables into the output
//! directory next to the resolved configuration.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use patspec::calibration::{align_rows, shear_to_epsilon, CalibratedScan, ShearMode};
use patspec::fitting::{
    delta_eps_plus_zero, fit_g_factor, fit_relaxation_rate, fit_tc_b0, FitResult, PeakSeries, SeriesKind,
};
use patspec::mechanisms::{
    field_angle_factor, matrix_element_ratio, rate_ratio_main_text, so_direction_vector, t_nuc_rms, t_so_magnitude,
    DotGeometry, HyperfineParams, SoCouplingParams,
};
use patspec::physics::level_diagram;
use patspec::spectra::{locate_peaks, scan_spectrum, AxisRange, ScanAxis};
use patspec::synth::{drifted_raw_scan, line_distance_series, relaxation_series, DriftedScanSpec};
use patspec::Execution;

use crate::config::{parse_kinds, parse_scenarios, parse_shear, RunConfig};
use crate::io::{self, num, write_table};

/// Which inverse problem `fit` solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FitKind {
    G,
    Tcb0,
    Remanence,
    Relax,
}

/// Which synthetic data set `synth` writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    Series,
    Relax,
    Drift,
}

pub fn levels(cfg: &RunConfig, out: &Path) -> Result<()> {
    let device = cfg.device()?;
    let l = cfg.levels()?;
    if !(l.eps_min < l.eps_max) || !l.b_ext.is_finite() {
        bail!("[levels] needs a finite field and eps_min < eps_max");
    }
    let rows = level_diagram(&device, l.b_ext, (l.eps_min, l.eps_max), l.points)?;
    let mut header = vec!["epsilon_ueV".to_string()];
    header.extend((1..=5).map(|k| format!("E{k}_ueV")));
    header.extend((1..=5).map(|k| format!("label{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(
        &out.join("levels.csv"),
        &header,
        rows.iter().map(|r| {
            let mut cells = vec![num(r.epsilon)];
            cells.extend(r.energies.iter().map(|&e| num(e)));
            cells.extend(r.labels.iter().map(|c| c.label().to_string()));
            cells
        }),
    )
}

pub fn spectrum(cfg: &RunConfig, out: &Path, exec: Execution, with_peaks: bool) -> Result<()> {
    let spec = cfg.scan_spec()?;
    let grid = scan_spectrum(&spec, exec)?;
    let axis = match spec.axis {
        ScanAxis::Field(_) => "B_T",
        ScanAxis::Power { .. } => "omega_ueV",
    };
    let cols = grid.cols();
    write_table(
        &out.join("spectrum.csv"),
        &[axis, "epsilon_ueV", "delta_n"],
        (0..grid.rows() * cols).map(|k| {
            let (r, c) = (k / cols, k % cols);
            vec![num(grid.axis_values[r]), num(grid.epsilon[c]), num(grid.get(r, c))]
        }),
    )?;
    let mut meta = vec![
        ("axis", axis.to_string()),
        ("rows", grid.rows().to_string()),
        ("cols", cols.to_string()),
        ("nu_GHz", num(spec.drive.nu)),
        ("omega_ueV", num(spec.drive.omega)),
        ("masked_cells", grid.masked.len().to_string()),
    ];
    if let ScanAxis::Power { b_ext, .. } = spec.axis {
        meta.push(("B_T", num(b_ext)));
    }
    write_table(
        &out.join("spectrum_meta.csv"),
        &["key", "value"],
        meta.into_iter().map(|(k, v)| vec![k.to_string(), v]),
    )?;
    if !grid.masked.is_empty() {
        log::warn!("{} grid cells masked", grid.masked.len());
        write_table(
            &out.join("masked.csv"),
            &["row", "col", "diagnostic"],
            grid.masked
                .iter()
                .map(|m| vec![m.row.to_string(), m.col.to_string(), m.diagnostic.clone()]),
        )?;
    }
    if with_peaks {
        let mut cells = Vec::new();
        for r in 0..grid.rows() {
            match locate_peaks(&grid, r) {
                Ok(list) => cells.extend(list.peaks.into_iter().map(|p| {
                    vec![
                        num(p.axis),
                        num(p.center),
                        p.sign.to_string(),
                        num(p.height),
                        num(p.fwhm),
                    ]
                })),
                Err(e) => log::warn!("row {r} ({axis} = {}): {e}", grid.axis_values[r]),
            }
        }
        write_table(
            &out.join("peaks.csv"),
            &[axis, "center_ueV", "sign", "height", "fwhm_ueV"],
            cells,
        )?;
    }
    Ok(())
}

pub fn calibrate(cfg: &RunConfig, out: &Path, exec: Execution, input: &Path, mode: Option<&str>) -> Result<()> {
    let c = cfg.calibration()?;
    let device = cfg.device()?;
    let lever = cfg.lever_arm()?;
    let shear = parse_shear(mode.unwrap_or(&c.shear))?;
    let raw = io::read_raw_scan(input, c.p_eps_mv)?;
    let mut cal = align_rows(&raw, lever, &device, cfg.on_missing()?, exec)?;
    if let Some(m) = shear {
        cal = shear_to_epsilon(&cal, &device, m)?;
    }
    write_calibrated(&cal, out)
}

fn write_calibrated(cal: &CalibratedScan, out: &Path) -> Result<()> {
    write_table(
        &out.join("calibrated.csv"),
        &["B_T", cal.scale.label(), "signal"],
        cal.rows.iter().flat_map(|row| {
            cal.axis
                .iter()
                .zip(&row.signal)
                .filter(|(_, s)| !s.is_nan())
                .map(move |(e, s)| vec![num(row.b_ext), num(*e), num(*s)])
        }),
    )?;
    write_table(
        &out.join("shifts.csv"),
        &["B_T", "shift_ueV"],
        cal.rows.iter().map(|r| vec![num(r.b_ext), num(r.shift_uev)]),
    )?;
    let shear = match cal.shear {
        None => "none",
        Some(ShearMode::PaperFaithful) => "paper",
        Some(ShearMode::Exact) => "exact",
    };
    write_table(
        &out.join("calibration_meta.csv"),
        &["key", "value"],
        [
            vec!["alpha_ueV_per_mV".into(), num(cal.lever.alpha)],
            vec!["p_eps_mV".into(), num(cal.p_eps_mv)],
            vec!["reference_ueV".into(), num(cal.lever.alpha * cal.p_eps_mv)],
            vec!["shear".into(), shear.into()],
            vec!["rows".into(), cal.rows.len().to_string()],
            vec!["dropped".into(), cal.dropped.len().to_string()],
        ],
    )?;
    if !cal.dropped.is_empty() {
        write_table(
            &out.join("dropped.csv"),
            &["B_T", "reason"],
            cal.dropped.iter().map(|d| vec![num(d.b_ext), d.reason.clone()]),
        )?;
    }
    Ok(())
}

fn report_block(text: &mut String, title: &str, fit: &FitResult) {
    let _ = writeln!(text, "[{title}]");
    for p in &fit.params {
        let _ = writeln!(text, "{} = {} +- {}", p.name, p.value, p.sigma);
    }
    let _ = writeln!(text, "residual_norm = {}", fit.residual_norm);
    if let Some(s) = fit.scenario {
        let _ = writeln!(text, "scenario = {}", s.label());
    }
    if fit.limit_only {
        let _ = writeln!(text, "limit_only = true");
    }
    if let Some(n) = &fit.note {
        let _ = writeln!(text, "note = {n}");
    }
    text.push('\n');
}

fn param_rows(group: &str, fit: &FitResult) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = fit
        .params
        .iter()
        .map(|p| vec![group.to_string(), p.name.clone(), num(p.value), num(p.sigma)])
        .collect();
    rows.push(vec![
        group.to_string(),
        "residual_norm".into(),
        num(fit.residual_norm),
        String::new(),
    ]);
    rows
}

fn require_kind(series: &[PeakSeries], kind: SeriesKind, input: &Path) -> Result<()> {
    if series.iter().all(|s| s.of_kind(kind).is_empty()) {
        bail!("{} has no '{}' rows", input.display(), kind.label());
    }
    Ok(())
}

pub fn fit(cfg: &RunConfig, out: &Path, which: FitKind, input: &Path, mode: Option<&str>) -> Result<()> {
    let settings = cfg.fit();
    let mut report = String::new();
    let mut table = Vec::new();
    match which {
        FitKind::G => {
            let series = io::read_series(input)?;
            require_kind(&series, SeriesKind::Plus, input)?;
            let device = match settings.check_linearity {
                true => Some(
                    cfg.device()
                        .context("the linearity check needs [device]; set fit.check_linearity = false to skip it")?,
                ),
                false => None,
            };
            for s in series.iter().filter(|s| !s.of_kind(SeriesKind::Plus).is_empty()) {
                let r = fit_g_factor(s, device.as_ref())?;
                let group = format!("nu={}", s.nu);
                report_block(&mut report, &group, &r);
                table.extend(param_rows(&group, &r));
            }
        }
        FitKind::Tcb0 => {
            let series = io::read_series(input)?;
            require_kind(&series, SeriesKind::Prime, input)?;
            let g = match settings.g_abs {
                Some(g) => g,
                None => cfg.device().context("tcb0 needs fit.g_abs or [device] g_abs")?.g_abs,
            };
            for s in series.iter().filter(|s| !s.of_kind(SeriesKind::Prime).is_empty()) {
                let r = fit_tc_b0(s, g)?;
                let group = format!("nu={}", s.nu);
                report_block(&mut report, &group, &r);
                table.extend(param_rows(&group, &r));
            }
        }
        FitKind::Remanence => {
            let series = io::read_series(input)?;
            require_kind(&series, SeriesKind::Plus, input)?;
            let device = cfg.device()?;
            for scenario in parse_scenarios(mode.unwrap_or(&settings.scenario))? {
                let r = delta_eps_plus_zero(&series, &device, scenario)?;
                report_block(&mut report, scenario.label(), &r);
                table.extend(param_rows(scenario.label(), &r));
            }
        }
        FitKind::Relax => {
            let points = io::read_relaxation(input)?;
            let r = fit_relaxation_rate(&points)?;
            report_block(&mut report, "relaxation", &r);
            table.extend(param_rows("relaxation", &r));
            table.push(vec![
                "relaxation".into(),
                "limit_only".into(),
                r.limit_only.to_string(),
                String::new(),
            ]);
        }
    }
    write_table(&out.join("fit.csv"), &["group", "param", "value", "sigma"], table)?;
    std::fs::write(out.join("report.txt"), report)?;
    Ok(())
}

pub fn mechanism(cfg: &RunConfig, out: &Path) -> Result<()> {
    let m = cfg.mechanism()?;
    let geom = match m.sigma_nm {
        Some(s) => DotGeometry::from_sigma(s, m.a_nm, m.theta, m.effective_mass)?,
        None => {
            let g = DotGeometry {
                sigma_nm: DotGeometry::sigma_for_spacing(m.delta_orbital, m.effective_mass),
                a_nm: m.a_nm,
                theta: m.theta,
                delta_orbital: m.delta_orbital,
            };
            g.validate()?;
            g
        }
    };
    let so = SoCouplingParams::new(m.alpha, m.beta, m.lambda_so_um)?;
    let hf = HyperfineParams::new(m.a_hf, m.n_nuclei)?;
    let n = so_direction_vector(geom.theta, so.alpha, so.beta);
    let [bx, by, bz] = m.field_direction;
    let factor = field_angle_factor(n, (bx, by, bz))?;
    let ratio = matrix_element_ratio(&geom, &so, &hf, factor)?;
    let main = rate_ratio_main_text(geom.delta_orbital, &hf, geom.a_nm, so.lambda_so_um)?;
    let rows = [
        ("sigma_nm", geom.sigma_nm),
        ("delta_orbital_ueV", geom.delta_orbital),
        ("n_z", n.0),
        ("n_y", n.1),
        ("field_angle_factor", factor),
        ("t_so_ueV", t_so_magnitude(&geom, &so)),
        ("t_nuc_rms_ueV", t_nuc_rms(&geom, &hf)),
        ("element_ratio", ratio),
        ("main_text_expression", main.expression),
        ("main_text_square", main.square),
    ];
    write_table(
        &out.join("mechanism.csv"),
        &["quantity", "value"],
        rows.iter().map(|(k, v)| vec![k.to_string(), num(*v)]),
    )?;
    let mut report = String::new();
    for (k, v) in rows {
        let _ = writeln!(report, "{k} = {v}");
    }
    let _ = writeln!(report, "note = {}", main.note);
    std::fs::write(out.join("report.txt"), report)?;
    Ok(())
}

/// Seed of the `k`-th sub-run derived from the master seed.
fn sub_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn synth(cfg: &RunConfig, out: &Path, exec: Execution, which: SynthKind) -> Result<()> {
    let s = cfg.synth()?;
    match which {
        SynthKind::Series => {
            let p = s.series.as_ref().context("missing required section [synth.series]")?;
            let device = cfg.device()?;
            let kinds = parse_kinds(&p.kinds)?;
            let scenario = match parse_scenarios(&p.scenario)?.as_slice() {
                [one] => *one,
                _ => bail!("synth.series.scenario must be singlet or triplet0"),
            };
            let fields = AxisRange::new(p.b_min, p.b_max, p.b_points);
            let mut rows = Vec::new();
            for (k, &nu) in p.frequencies.iter().enumerate() {
                let series =
                    line_distance_series(&device, nu, &fields, &kinds, scenario, p.sigma, sub_seed(cfg.seed, k))?;
                rows.extend(io::series_rows(&series));
            }
            write_table(&out.join("series.csv"), &io::SERIES_HEADER, rows)
        }
        SynthKind::Relax => {
            let p = s.relax.as_ref().context("missing required section [synth.relax]")?;
            let points = relaxation_series(p.gamma_s, &p.taus, p.sigma, cfg.seed)?;
            write_table(
                &out.join("relax.csv"),
                &io::RELAX_HEADER,
                points.iter().map(|(t, y)| vec![num(*t), num(*y)]),
            )
        }
        SynthKind::Drift => {
            let p = s.drift.as_ref().context("missing required section [synth.drift]")?;
            AxisRange::new(p.b_min, p.b_max, p.b_points).validate("field")?;
            let spec = DriftedScanSpec {
                device: cfg.device()?,
                drive: cfg.drive()?,
                bath: cfg.bath.bath(),
                lever: cfg.lever_arm()?,
                p_eps_mv: cfg.calibration()?.p_eps_mv,
                fields: AxisRange::new(p.b_min, p.b_max, p.b_points).values(),
                energy: AxisRange::new(p.u_min, p.u_max, p.u_points),
                drift_max_uev: p.drift_max,
                reference_height: p.reference_height,
                reference_fwhm_uev: p.reference_fwhm,
                signal_scale: p.signal_scale,
                noise_sigma: p.noise_sigma,
            };
            let (raw, drifts) = drifted_raw_scan(&spec, cfg.seed, exec)?;
            write_table(&out.join("raw.csv"), &io::RAW_HEADER, io::raw_rows(&raw))?;
            write_table(
                &out.join("drifts.csv"),
                &["B_T", "drift_ueV"],
                raw.rows.iter().zip(&drifts).map(|(r, d)| vec![num(r.b_ext), num(*d)]),
            )
        }
    }
}
