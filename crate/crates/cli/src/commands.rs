use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use selfheal_core::channel::{scattering_matrix, simulate_counts, CountTable, MatrixKind, ScatteringMatrix, ScatteringSetup};
use selfheal_core::field::PolarizedField;
use selfheal_core::healing::{self_healing_scan, HealingPoint};
use selfheal_core::io::{write_intensity_pgm, PgmDepth};
use selfheal_core::jones::{prepare_state_with, MubLabel};
use selfheal_core::modes::{nondiffracting_distance, shadow_length, ModeSpec};
use selfheal_core::propagation::{NumericalWarning, Propagator};
use selfheal_core::security::{
    qber_from_matrix, security_report, security_report_from_qber, PhotonStatistics, SecurityReport,
};

use crate::config::{Config, OutputKind, ScenarioConfig};
use crate::CliError;

pub struct Context {
    pub config: Config,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Context {
    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text)
    }

    fn prepare_dir(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out_dir).map_err(|e| CliError::Io(format!("{}: {e}", self.out_dir.display())))
    }
}

struct ScenarioRun<'a> {
    scenario: &'a ScenarioConfig,
    spec: ModeSpec,
    q: f64,
    matrix: ScatteringMatrix,
    counts: Option<CountTable>,
}

fn run_scenarios(ctx: &Context) -> Result<Vec<ScenarioRun<'_>>, CliError> {
    let config = &ctx.config;
    if config.scenarios.is_empty() {
        return Err(CliError::Config("the config lists no scenarios".into()));
    }
    let grid = config.grid()?;
    config
        .scenarios
        .par_iter()
        .enumerate()
        .map(|(i, scenario)| {
            let (spec, q) = config.source(&scenario.source)?;
            let mut setup = ScatteringSetup::new(grid, spec, scenario.channel(), config.detection.model());
            setup.noise_floor = config.detection.noise_floor;
            setup.q = q;
            log::info!("scenario {}: computing the scattering matrix", scenario.name);
            let matrix = scattering_matrix(&setup)?;
            let counts = if config.run.events > 0.0 && config.run.wants(OutputKind::Counts) {
                Some(simulate_counts(&matrix, &config.run.rates(), ctx.seed.wrapping_add(i as u64))?)
            } else {
                None
            };
            Ok(ScenarioRun {
                scenario,
                spec,
                q,
                matrix,
                counts,
            })
        })
        .collect()
}

/// Exit-3 check: any signal field with too much power near the grid edge.
fn guard(runs: &[ScenarioRun], limit: f64) -> Result<(), CliError> {
    let violations: Vec<String> = runs
        .iter()
        .flat_map(|r| {
            r.matrix.warnings.iter().filter_map(move |w| match w {
                NumericalWarning::BoundaryPower { stage, fraction } if *fraction > limit => {
                    Some(format!("{}: {stage} has {fraction:.2e} of its power at the grid edge", r.scenario.name))
                }
                _ => None,
            })
        })
        .collect();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Guard(format!(
            "boundary power above {limit:.1e}; enlarge grid.extent\n  {}",
            violations.join("\n  ")
        )))
    }
}

#[derive(Serialize)]
struct MatrixDocument<'a> {
    scenario: &'a ScenarioConfig,
    source: ModeSpec,
    q: f64,
    qber: Option<f64>,
    #[serde(flatten)]
    matrix: &'a ScatteringMatrix,
}

#[derive(Serialize)]
struct ScenarioSummary<'a> {
    name: &'a str,
    source: &'a str,
    qber: Option<f64>,
    matched_diagonal_mean: f64,
    psi00_detection: f64,
    transmission: &'a [f64],
    blocked_rows: Vec<MubLabel>,
    warnings: usize,
}

fn snapshot_name(prefix: &str, label: MubLabel, z: f64) -> String {
    format!("{prefix}.{label}.z{:.1}mm.pgm", z * 1e3)
}

fn write_pgm_file(ctx: &Context, name: &str, f: &PolarizedField) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    write_intensity_pgm(&mut bytes, f, PgmDepth::Sixteen)?;
    ctx.write(name, bytes)
}

fn write_snapshots(ctx: &Context, run: &ScenarioRun) -> Result<(), CliError> {
    let stations = &ctx.config.run.snapshot_stations;
    if stations.is_empty() {
        log::warn!("pgm output requested but run.snapshot_stations is empty");
        return Ok(());
    }
    let grid = ctx.config.grid()?;
    let prop = Propagator::new(grid, run.spec.wavelength)?;
    let channel = run.scenario.channel();
    let input = PolarizedField::horizontal(&run.spec.evaluate(grid, 0.0)?, run.spec.wavelength)?;
    for label in MubLabel::ALL {
        let state = prepare_state_with(label, &input, run.q)?;
        for z in stations {
            if z.0 < 0.0 || z.0 > channel.length {
                return Err(CliError::Config(format!(
                    "run.snapshot_stations: {} m lies outside scenario {} (0 to {} m)",
                    z.0, run.scenario.name, channel.length
                )));
            }
            let (f, _) = channel.transmit_between(&prop, &state, 0.0, z.0)?;
            write_pgm_file(ctx, &snapshot_name(&run.scenario.name, label, z.0), &f)?;
        }
    }
    Ok(())
}

pub fn scattering(ctx: &Context) -> Result<(), CliError> {
    let runs = run_scenarios(ctx)?;
    ctx.prepare_dir()?;
    let run_cfg = &ctx.config.run;
    let mut summary = Vec::new();
    for run in &runs {
        let name = &run.scenario.name;
        let m = &run.matrix;
        let qber = qber_from_matrix(m, ctx.config.security.weighting).ok().map(|q| q.qber);
        if run_cfg.wants(OutputKind::Json) {
            ctx.write_json(
                &format!("{name}.matrix.json"),
                &MatrixDocument {
                    scenario: run.scenario,
                    source: run.spec,
                    q: run.q,
                    qber,
                    matrix: m,
                },
            )?;
        }
        if run_cfg.wants(OutputKind::Csv) {
            ctx.write(&format!("{name}.raw.csv"), m.to_csv(MatrixKind::Raw))?;
            ctx.write(&format!("{name}.normalized.csv"), m.to_csv(MatrixKind::Normalized))?;
        }
        if run_cfg.wants(OutputKind::Heatmap) {
            ctx.write(&format!("{name}.heatmap.csv"), m.to_heatmap_csv())?;
        }
        if let Some(counts) = &run.counts {
            ctx.write(&format!("{name}.counts.csv"), counts.to_csv())?;
        }
        if run_cfg.wants(OutputKind::Pgm) {
            write_snapshots(ctx, run)?;
        }
        summary.push(ScenarioSummary {
            name,
            source: &run.scenario.source,
            qber,
            matched_diagonal_mean: m.matched_diagonal_mean(),
            psi00_detection: m.raw[0][0],
            transmission: &m.transmission,
            blocked_rows: m.blocked_rows(),
            warnings: m.warnings.len(),
        });
        println!(
            "{name}: matched diagonal {:.4}, QBER {}, Ψ00 detection {:.4e}",
            m.matched_diagonal_mean(),
            qber.map_or("n/a".into(), |q| format!("{q:.4}")),
            m.raw[0][0]
        );
    }
    if run_cfg.wants(OutputKind::Json) {
        ctx.write_json("scattering.json", &summary)?;
    }
    guard(&runs, run_cfg.boundary_guard)
}

#[derive(Serialize)]
struct NamedReport {
    name: String,
    source: Option<String>,
    report: SecurityReport,
}

fn format_table(reports: &[NamedReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>8} {:>8} {:>10} {:>9} {:>12} {:>9} {:>7}",
        "scenario", "QBER", "I_AB", "Delta", "R/Q_mu", "R/Q_mu(1-H)", "NC", "secure"
    );
    for r in reports {
        let p = &r.report;
        let qber = match p.qber_uncertainty {
            Some(u) => format!("{:.3}±{u:.3}", p.qber),
            None => format!("{:.3}", p.qber),
        };
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>8.3} {:>10.2e} {:>9.3} {:>12.3} {:>9} {:>7}",
            r.name,
            qber,
            p.mutual_information,
            p.delta,
            p.key_rate_ratio,
            p.key_rate_ratio_as_printed,
            p.normalized_counts.map_or("-".into(), |v| format!("{v:.4}")),
            if p.secure { "yes" } else { "no" }
        );
    }
    out
}

pub fn security(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let params = config.security.params();
    let stats = config.spdc.photon_statistics;
    let mut reports = Vec::new();
    let mut runs = Vec::new();
    if !config.security.direct.is_empty() {
        for entry in &config.security.direct {
            let stats = entry.delta.map_or(stats, |delta| PhotonStatistics::Direct { delta });
            let mut report = security_report_from_qber(entry.qber, entry.qber_uncertainty, &stats, &params)
                .map_err(|e| CliError::Config(format!("security.direct {}: {e}", entry.name)))?;
            report.normalized_counts = entry.normalized_counts;
            reports.push(NamedReport {
                name: entry.name.clone(),
                source: None,
                report,
            });
        }
    } else {
        runs = run_scenarios(ctx)?;
        for run in &runs {
            let reference = run
                .scenario
                .reference
                .as_ref()
                .and_then(|r| runs.iter().find(|o| &o.scenario.name == r))
                .map(|o| &o.matrix);
            let report = security_report(&run.matrix, run.counts.as_ref(), &stats, reference, &params)?;
            reports.push(NamedReport {
                name: run.scenario.name.clone(),
                source: Some(run.scenario.source.clone()),
                report,
            });
        }
    }
    ctx.prepare_dir()?;
    ctx.write_json("security.json", &reports)?;
    let table = format_table(&reports);
    ctx.write("security.txt", &table)?;
    print!("{table}");
    guard(&runs, config.run.boundary_guard)
}

#[derive(Serialize)]
struct ScanRow<'a> {
    source: &'a str,
    /// Distance behind the obstacle (m).
    distance: f64,
    #[serde(flatten)]
    point: HealingPoint,
    on_axis_ratio: f64,
}

pub fn selfheal_scan(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let scan = config
        .scan
        .as_ref()
        .ok_or_else(|| CliError::Config("the config has no [scan] section".into()))?;
    let grid = config.grid()?;
    let obstacle = scan.obstacle.spec();
    let mut distances: Vec<f64> = scan.stations.iter().map(|s| s.0).collect();
    if !scan.stations_zmin.is_empty() {
        let bg = scan
            .sources
            .iter()
            .map(|s| config.source(s).map(|x| x.0))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .find(|s| s.is_bessel())
            .ok_or_else(|| CliError::Config("scan.stations_zmin needs a bessel_gauss source".into()))?;
        let zmin = shadow_length(obstacle.radius, &bg)?
            .finite()
            .ok_or_else(|| CliError::Config("scan.stations_zmin needs a finite shadow length".into()))?;
        distances.extend(scan.stations_zmin.iter().map(|f| f * zmin));
    }
    if distances.is_empty() {
        return Err(CliError::Config("scan lists no stations".into()));
    }
    if let Some(d) = distances.iter().find(|d| !(**d >= 0.0)) {
        return Err(CliError::Config(format!("scan station {d} m lies before the obstacle")));
    }
    let absolute: Vec<f64> = distances.iter().map(|d| obstacle.z + d).collect();
    let window = scan.window.map(|w| w.0);

    let results: Vec<(String, ModeSpec, Vec<HealingPoint>)> = scan
        .sources
        .par_iter()
        .map(|name| {
            let (spec, _) = config.source(name)?;
            let points = self_healing_scan(&spec, scan.label, &obstacle, &absolute, grid, window)?;
            Ok((name.clone(), spec, points))
        })
        .collect::<Result<_, CliError>>()?;

    ctx.prepare_dir()?;
    let mut csv = String::from(
        "source,distance_m,fidelity,global_fidelity,transmitted_power,on_axis_intensity,reference_on_axis_intensity,on_axis_ratio\n",
    );
    let mut rows = Vec::new();
    for (name, _, points) in &results {
        for (d, p) in distances.iter().zip(points) {
            let _ = writeln!(
                csv,
                "{name},{d:.6},{:.9},{:.9},{:.9},{:.9e},{:.9e},{:.9}",
                p.fidelity,
                p.global_fidelity,
                p.transmitted_power,
                p.on_axis_intensity,
                p.reference_on_axis_intensity,
                p.on_axis_ratio()
            );
            println!(
                "{name} at {:.4} m behind the obstacle: windowed fidelity {:.4}, on-axis ratio {:.4}",
                d,
                p.fidelity,
                p.on_axis_ratio()
            );
            rows.push(ScanRow {
                source: name,
                distance: *d,
                point: *p,
                on_axis_ratio: p.on_axis_ratio(),
            });
        }
    }
    ctx.write("selfheal_scan.csv", csv)?;
    ctx.write_json("selfheal_scan.json", &rows)?;
    if scan.snapshots {
        let channel = selfheal_core::propagation::ChannelSpec {
            length: obstacle.z + distances.iter().cloned().fold(0.0, f64::max),
            obstacles: vec![obstacle],
        };
        for (name, spec, _) in &results {
            let prop = Propagator::new(grid, spec.wavelength)?;
            let input = PolarizedField::horizontal(&spec.evaluate(grid, 0.0)?, spec.wavelength)?;
            let state = prepare_state_with(scan.label, &input, selfheal_core::jones::DEFAULT_Q)?;
            for &z in &absolute {
                let (f, _) = channel.transmit_between(&prop, &state, 0.0, z)?;
                write_pgm_file(ctx, &snapshot_name(&format!("scan-{name}"), scan.label, z - obstacle.z), &f)?;
            }
        }
    }
    Ok(())
}

fn describe_obstacle(out: &mut String, spec: &ModeSpec, radius: f64, distance: Option<f64>) -> Result<(), CliError> {
    match shadow_length(radius, spec)?.finite() {
        Some(zmin) => {
            let _ = write!(
                out,
                "    disk R = {:.1} µm: z_min = {zmin:.4} m, full reconstruction at {:.4} m",
                radius * 1e6,
                2.0 * zmin
            );
            if let Some(l) = distance {
                let verdict = if l > zmin { "beyond the shadow" } else { "inside the shadow" };
                let _ = write!(out, "; receiver at L = {l:.4} m is {verdict}");
            }
            out.push('\n');
        }
        None => {
            let _ = writeln!(out, "    disk R = {:.1} µm: no finite shadow", radius * 1e6);
        }
    }
    Ok(())
}

pub fn info(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let grid = config.grid()?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "grid: {} × {} samples over {:.2} mm (spacing {:.2} µm)",
        grid.n(),
        grid.n(),
        grid.extent() * 1e3,
        grid.spacing() * 1e6
    );
    let _ = writeln!(out, "pump waist: {:.3} mm", config.spdc.pump_waist.0 * 1e3);
    for name in config.sources.keys() {
        let (spec, q) = config.source(name)?;
        let _ = write!(
            out,
            "source {name}: w0 = {:.3} mm, λ = {:.1} nm, q = {q}, z_R = {:.3} m",
            spec.w0 * 1e3,
            spec.wavelength * 1e9,
            spec.rayleigh_range()
        );
        if let Some(k_r) = spec.k_r() {
            let zmax = nondiffracting_distance(&spec)?
                .finite()
                .map_or("unbounded".into(), |z| format!("{z:.4} m"));
            let _ = write!(out, ", k_r = {:.2} rad/mm, z_max = {zmax}", k_r * 1e-3);
        }
        out.push('\n');
    }
    for sc in &config.scenarios {
        let (spec, _) = config.source(&sc.source)?;
        let channel = sc.channel();
        let _ = writeln!(
            out,
            "scenario {} ({}): length {:.4} m, {} obstacle(s)",
            sc.name,
            sc.source,
            channel.length,
            channel.obstacles.len()
        );
        if spec.is_bessel() {
            for o in &channel.obstacles {
                describe_obstacle(&mut out, &spec, o.radius, Some(channel.length - o.z))?;
            }
        }
    }
    if let Some(scan) = &config.scan {
        let _ = writeln!(out, "scan of {} behind a {:.1} µm disk", scan.label, scan.obstacle.radius.0 * 1e6);
        for name in &scan.sources {
            let (spec, _) = config.source(name)?;
            if spec.is_bessel() {
                describe_obstacle(&mut out, &spec, scan.obstacle.radius.0, None)?;
            }
        }
    }
    print!("{out}");
    Ok(())
}

pub fn out_dir_or_default(dir: Option<&Path>) -> PathBuf {
    dir.map_or_else(|| PathBuf::from("selfheal-out"), Path::to_path_buf)
}
