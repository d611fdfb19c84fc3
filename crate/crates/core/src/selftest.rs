//! Acceptance battery: eight numbered checks against reference values of the
//! model, each reporting pass/fail with a short diagnostic.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::edge::{self, Eta, Region, Sector};
use crate::eigen;
use crate::spectra::{self, sample_contour};
use crate::sweep::{self, Axis, AxisName, SweepSpec, Task, TaskOptions};
use crate::table;
use crate::topology::{self, wilson_loop_phase, Contour, DEFAULT_NK};
use crate::walk::{build_floquet, check_symmetries, Boundary, Frame, WalkParams};
use crate::C64;

pub const CRITERIA: [&str; 8] = [
    "gap-closing recovery",
    "edge-mode counting (unitary)",
    "analytic edge-mode fidelity",
    "transfer-boundary values",
    "non-Bloch equals unitary phase diagram",
    "loop/transfer correspondence",
    "skin effect",
    "property suites",
];

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {}. {} ({:.2} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn p(t1: f64, t2: f64, gamma: f64, n: usize, boundary: Boundary) -> WalkParams {
    WalkParams { theta1: t1 * PI, theta2: t2 * PI, gamma, n_sites: n, boundary }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn gap_closing_recovery() -> Check {
    let start = Instant::now();
    let grid: Vec<f64> = (0..=2000).map(|i| (-1.0 + i as f64 * 1e-3) * PI).collect();
    let scan = sweep::gap_scan(&p(0.2, 0.0, 0.0, 60, Boundary::Pbc), &grid, 512).map_err(e2s)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut detail = Vec::new();
    for (sector, want) in [(Sector::Zero, [-0.8, -0.2]), (Sector::Pi, [0.2, 0.8])] {
        let found: Vec<f64> = scan.touchings(sector, 1e-2).iter().map(|x| x / PI).collect();
        ensure(found.len() == 2, || format!("E = {sector}: touchings at {found:?}·π"))?;
        for (f, w) in found.iter().zip(want) {
            ensure((f - w).abs() <= 2e-3, || format!("E = {sector}: touching at {f}π, expected {w}π"))?;
        }
        detail.push(format!("E={sector} at {:.4}π, {:.4}π", found[0], found[1]));
    }
    ensure(elapsed < 10.0, || format!("scan took {elapsed:.2} s"))?;
    Ok(format!("{}; scan {elapsed:.2} s", detail.join("; ")))
}

fn edge_mode_counting() -> Check {
    let fbc = p(0.2, -0.15, 0.0, 60, Boundary::Fbc);
    let s = spectra::spectrum_fbc(&fbc).map_err(e2s)?;
    let n0 = s.count_near(Sector::Zero, 1e-6);
    let npi = s.count_near(Sector::Pi, 1e-6);
    let inv = topology::invariants(&fbc.with_boundary(Boundary::Pbc), Contour::Bloch, DEFAULT_NK).map_err(e2s)?;
    let (c0, cpi) = inv.edge_mode_counts();
    ensure((n0, npi) == (2, 2), || format!("found {n0} zero and {npi} pi modes"))?;
    ensure((c0, cpi) == (n0, npi), || format!("2|nu| = ({c0}, {cpi}) but modes ({n0}, {npi})"))?;
    Ok(format!("modes (0, pi) = ({n0}, {npi}); (nu0, nupi) = ({}, {})", inv.nu0, inv.nupi))
}

fn analytic_fidelity() -> Check {
    let mut worst_fid: f64 = 1.0;
    let mut worst_res: f64 = 0.0;
    for params in [p(0.2, -0.15, 0.0, 60, Boundary::Fbc), p(0.2, 0.15, 0.2, 60, Boundary::Fbc)] {
        let s = spectra::spectrum_fbc(&params).map_err(e2s)?;
        for alpha in Sector::BOTH {
            for eta in Eta::BOTH {
                let r = edge::verify_against_numeric(&params, alpha, eta, &s).map_err(e2s)?;
                ensure(r.fidelity > 1.0 - 1e-5 && r.eigen_residual < 1e-7, || {
                    format!("gamma={} alpha={alpha} eta={eta}: fidelity {:.3e}, residual {:.3e}", params.gamma, r.fidelity, r.eigen_residual)
                })?;
                worst_fid = worst_fid.min(r.fidelity);
                worst_res = worst_res.max(r.eigen_residual);
            }
        }
    }
    Ok(format!("min fidelity 1 - {:.1e}; max residual {worst_res:.1e}", 1.0 - worst_fid))
}

fn transfer_boundary_values() -> Check {
    let cases = [
        (Sector::Zero, [-0.9138, -0.7095, -0.2905, -0.0862]),
        (Sector::Pi, [0.0862, 0.2905, 0.7095, 0.9138]),
    ];
    let mut worst: f64 = 0.0;
    for (alpha, want) in cases {
        let roots = edge::transfer_boundaries(0.2, 0.2 * PI, alpha).map_err(e2s)?;
        ensure(roots.len() == 4, || format!("{alpha}: {} roots", roots.len()))?;
        for (r, w) in roots.iter().zip(want) {
            let d = (r / PI - w).abs();
            worst = worst.max(d);
            ensure(d <= 1e-4, || format!("{alpha}: root {:.6}π vs {w}π", r / PI))?;
        }
    }
    Ok(format!("max deviation {worst:.1e}π"))
}

/// 21 angles per axis, offset so that no point lies on a gap-closing line.
pub fn gapped_grid() -> Vec<(f64, f64)> {
    let step = 2.0 / 21.0;
    let t1: Vec<f64> = (0..21).map(|i| -1.0 + (i as f64 + 0.3) * step).collect();
    let t2: Vec<f64> = (0..21).map(|j| -1.0 + (j as f64 + 0.6) * step).collect();
    t1.iter().flat_map(|&a| t2.iter().map(move |&b| (a, b))).collect()
}

fn non_bloch_equals_unitary() -> Check {
    let grid = gapped_grid();
    let mismatches: Vec<String> = grid
        .par_iter()
        .map(|&(a, b)| {
            let unitary = topology::invariants(&p(a, b, 0.0, 60, Boundary::Pbc), Contour::Bloch, DEFAULT_NK);
            let gbz = topology::invariants(&p(a, b, 0.2, 60, Boundary::Pbc), Contour::Gbz, DEFAULT_NK);
            match (unitary, gbz) {
                (Ok(u), Ok(g)) if (u.nu0, u.nupi) == (g.nu0, g.nupi) => None,
                (Ok(u), Ok(g)) => Some(format!("({a:.3}π, {b:.3}π): ({}, {}) vs ({}, {})", u.nu0, u.nupi, g.nu0, g.nupi)),
                (u, g) => Some(format!("({a:.3}π, {b:.3}π): {:?} / {:?}", u.err(), g.err())),
            }
        })
        .filter_map(|x| x)
        .collect();
    ensure(mismatches.is_empty(), || format!("{} mismatches, first {}", mismatches.len(), mismatches[0]))?;
    Ok(format!("{} points agree", grid.len()))
}

/// Reference points of the four transfer regions at γ = 0.2.
pub const REGION_POINTS: [((f64, f64), Region); 4] = [
    ((-0.4, -0.2), Region::One),
    ((-0.2, 0.1), Region::Two),
    ((0.2, 0.15), Region::Three),
    ((0.04, 0.08), Region::Four),
];

fn loop_transfer_correspondence() -> Check {
    let mut detail = Vec::new();
    for ((a, b), region) in REGION_POINTS {
        let pbc = p(a, b, 0.2, 60, Boundary::Pbc);
        let class = edge::transfer_classification_with_loops(&pbc, DEFAULT_NK).map_err(e2s)?;
        let check = class.loop_check.expect("loop check attached");
        ensure(class.region == region, || format!("({a}π, {b}π): region {} expected {}", class.region.symbol(), region.symbol()))?;
        ensure(check.agrees, || format!("({a}π, {b}π): loops {:?} vs signs ({}, {})", check.loops, class.s_zero, class.s_pi))?;
        let im = spectra::spectrum_fbc(&pbc.with_boundary(Boundary::Fbc)).map_err(e2s)?.max_abs_imag();
        ensure(im < 1e-6, || format!("({a}π, {b}π): FBC max |Im E| = {im:.3e}"))?;
        detail.push(format!("{} |ImE|<{im:.0e}", region.symbol()));
    }
    Ok(detail.join(", "))
}

fn skin_effect() -> Check {
    let gain = spectra::spectrum_fbc(&p(0.2, -0.15, 0.2, 60, Boundary::Fbc)).map_err(e2s)?;
    let r = spectra::skin_report(&gain, 1e-3).map_err(e2s)?;
    let bulk: Vec<f64> = r.mean_positions.iter().zip(&r.bulk).filter(|(_, &b)| b).map(|(x, _)| *x).collect();
    let right = bulk.iter().filter(|&&x| x > 30.0).count() as f64 / bulk.len() as f64;
    ensure(right >= 0.95, || format!("only {:.1}% of bulk modes right of N/2", 100.0 * right))?;

    let flat = spectra::spectrum_fbc(&p(0.2, -0.15, 0.0, 60, Boundary::Fbc)).map_err(e2s)?;
    let r0 = spectra::skin_report(&flat, 1e-3).map_err(e2s)?;
    let bulk0: Vec<f64> = r0.mean_positions.iter().zip(&r0.bulk).filter(|(_, &b)| b).map(|(x, _)| *x).collect();
    let mean = bulk0.iter().sum::<f64>() / bulk0.len() as f64;
    ensure((mean - 30.5).abs() <= 2.0, || format!("unitary mean center of mass {mean:.3}"))?;
    Ok(format!("gamma=0.2: {:.1}% right of N/2; gamma=0: mean CoM {mean:.3}", 100.0 * right))
}

fn random_angle(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-PI..PI)
}

/// Random angle at least `margin` away from the poles of sec/tan.
fn random_regular_angle(rng: &mut ChaCha8Rng, margin: f64) -> f64 {
    loop {
        let t = random_angle(rng);
        if t.cos().abs() > margin {
            return t;
        }
    }
}

/// Random point at least `margin` (radians) from every unitary gap-closing line.
pub fn random_gapped_point(rng: &mut ChaCha8Rng, margin: f64) -> (f64, f64) {
    loop {
        let t1 = random_angle(rng);
        let t2 = random_angle(rng);
        let b = edge::phase_boundaries(t1);
        let d = b.zero.iter().chain(&b.pi).map(|x| edge::fold_angle(t2 - x).abs()).fold(f64::INFINITY, f64::min);
        if d > margin {
            return (t1, t2);
        }
    }
}

/// Largest distance of `{E}` from `{−E}` under greedy one-to-one matching.
pub fn pm_symmetry_defect(energies: &[C64]) -> f64 {
    let mut used = vec![false; energies.len()];
    let mut worst: f64 = 0.0;
    for &e in energies {
        let target = -e;
        let (best, d) = energies
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, &f)| (j, eigen::quasienergy_distance(f, target)))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if best == usize::MAX {
            return f64::INFINITY;
        }
        used[best] = true;
        worst = worst.max(d);
    }
    worst
}

fn suite(name: &str, result: std::result::Result<(), String>, log: &mut Vec<String>) -> std::result::Result<(), String> {
    result.map_err(|e| format!("{name}: {e}"))?;
    log.push(name.to_owned());
    Ok(())
}

fn unitarity(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for _ in 0..16 {
        let boundary = if rng.random_bool(0.5) { Boundary::Pbc } else { Boundary::Fbc };
        let params = WalkParams { theta1: random_angle(rng), theta2: random_angle(rng), gamma: 0.0, n_sites: 20, boundary };
        let u = build_floquet(&params, Frame::Standard).map_err(e2s)?.into_array();
        let d = crate::walk::max_abs_diff(&u.t().mapv(|z| z.conj()).dot(&u), &Array2::eye(40));
        ensure(d < 1e-12, || format!("U†U − I = {d:.3e} at {params:?}"))?;
    }
    Ok(())
}

fn symmetry_residuals(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for _ in 0..16 {
        let boundary = if rng.random_bool(0.5) { Boundary::Pbc } else { Boundary::Fbc };
        let gamma = rng.random_range(-0.4..0.4);
        let params = WalkParams { theta1: random_angle(rng), theta2: random_angle(rng), gamma, n_sites: 20, boundary };
        let r = check_symmetries(&build_floquet(&params, Frame::Standard).map_err(e2s)?).map_err(e2s)?;
        ensure(r.sublattice < 1e-8 && r.time_reversal < 1e-8, || format!("{r:?} at {params:?}"))?;
    }
    Ok(())
}

fn gauge_invariance(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for _ in 0..8 {
        let (t1, t2) = random_gapped_point(rng, 0.05);
        let params = WalkParams { theta1: t1, theta2: t2, gamma: rng.random_range(-0.3..0.3), n_sites: 60, boundary: Boundary::Pbc };
        let samples = sample_contour(&params, Frame::Standard, 0.0, 256).map_err(e2s)?;
        for band in 0..2 {
            let left: Vec<[C64; 2]> = samples.iter().map(|e| e.left[band]).collect();
            let right: Vec<[C64; 2]> = samples.iter().map(|e| e.right[band]).collect();
            let reference = wilson_loop_phase(&left, &right);
            let mut phase = || C64::from_polar(1.0, random_angle(rng));
            let left2: Vec<[C64; 2]> = left.iter().map(|v| { let c = phase(); [v[0] * c, v[1] * c] }).collect();
            let right2: Vec<[C64; 2]> = right.iter().map(|v| { let c = phase(); [v[0] * c, v[1] * c] }).collect();
            let d = (wilson_loop_phase(&left2, &right2) - reference).abs();
            ensure(d < 1e-10, || format!("phase changed by {d:.3e} at {params:?}"))?;
        }
    }
    Ok(())
}

fn pm_symmetry(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for _ in 0..12 {
        let boundary = if rng.random_bool(0.5) { Boundary::Pbc } else { Boundary::Fbc };
        let params = WalkParams {
            theta1: random_angle(rng),
            theta2: random_angle(rng),
            gamma: rng.random_range(-0.3..0.3),
            n_sites: 20,
            boundary,
        };
        let s = spectra::spectrum_full(&params).map_err(e2s)?;
        let d = pm_symmetry_defect(&s.energies);
        ensure(d < 1e-7, || format!("±E defect {d:.3e} at {params:?}"))?;
    }
    Ok(())
}

fn grid_stability(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for _ in 0..8 {
        let (t1, t2) = random_gapped_point(rng, 0.05);
        let params = WalkParams { theta1: t1, theta2: t2, gamma: 0.0, n_sites: 60, boundary: Boundary::Pbc };
        for frame in [Frame::Standard, Frame::Shifted] {
            let a = topology::berry_phase_on_grid(&params, frame, Contour::Bloch, 256).map_err(e2s)?.winding();
            let b = topology::berry_phase_on_grid(&params, frame, Contour::Bloch, 512).map_err(e2s)?.winding();
            ensure((a - b).abs() < 1e-3, || format!("winding {a} vs {b} at {params:?}"))?;
        }
        let lossy = params.with_gamma(rng.random_range(-0.3..0.3));
        match (spectra::loop_classification(&lossy, 256), spectra::loop_classification(&lossy, 512)) {
            (Ok(a), Ok(b)) => ensure(a == b, || format!("loop winding changed under refinement at {lossy:?}"))?,
            (Err(_), Err(_)) => {}
            (a, b) => return Err(format!("loop classification {a:?} vs {b:?} at {lossy:?}")),
        }
    }
    Ok(())
}

fn profile_laws(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for _ in 0..16 {
        let params = WalkParams {
            theta1: random_regular_angle(rng, 0.05),
            theta2: random_regular_angle(rng, 0.05),
            gamma: rng.random_range(-0.4..0.4),
            n_sites: 2 * rng.random_range(2..60),
            boundary: Boundary::Fbc,
        };
        for alpha in Sector::BOTH {
            for eta in Eta::BOTH {
                let m = edge::analytic_edge_mode(&params, alpha, eta).map_err(e2s)?;
                let norm: f64 = m.amplitudes().iter().map(|a| a * a).sum();
                ensure((norm - 0.5).abs() < 1e-12, || format!("Σa² = {norm} at {params:?}"))?;
                for w in m.amplitudes_odd.windows(2) {
                    if w[0].abs() > 1e-280 && w[1].abs() > 1e-280 {
                        let step = w[1].abs().ln() - w[0].abs().ln();
                        ensure((step - 2.0 * m.t_tilde).abs() < 1e-10, || format!("log step {step} vs 2T̃ {}", 2.0 * m.t_tilde))?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn degenerate_continuity(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for _ in 0..8 {
        let base = WalkParams {
            theta1: random_regular_angle(rng, 0.05),
            theta2: random_regular_angle(rng, 0.05),
            gamma: 0.0,
            n_sites: 60,
            boundary: Boundary::Fbc,
        };
        let alpha = if rng.random_bool(0.5) { Sector::Zero } else { Sector::Pi };
        let eta = if rng.random_bool(0.5) { Eta::Plus } else { Eta::Minus };
        let (t, _) = edge::inverse_localization(&base, alpha, eta).map_err(e2s)?;
        let flat = edge::analytic_edge_mode(&base.with_gamma(-t), alpha, eta).map_err(e2s)?;
        let near = edge::analytic_edge_mode(&base.with_gamma(-t + 1e-6), alpha, eta).map_err(e2s)?;
        let d = flat.amplitudes().iter().zip(near.amplitudes()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(d < 1e-4, || format!("branches differ by {d:.3e} at {base:?}"))?;
    }
    Ok(())
}

fn csv_determinism() -> std::result::Result<(), String> {
    let spec = SweepSpec {
        axis1: Axis::new(AxisName::Theta1, -0.9 * PI, 0.9 * PI, 5).map_err(e2s)?,
        axis2: Some(Axis::new(AxisName::Theta2, -0.9 * PI, 0.9 * PI, 5).map_err(e2s)?),
        fixed: p(0.0, 0.0, 0.2, 20, Boundary::Pbc),
        task: Task::TransferMap,
        options: TaskOptions { n_k: 128, contour: Contour::Gbz },
    };
    let mut outputs = Vec::new();
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(e2s)?;
        let t = pool.install(|| sweep::run_sweep(&spec)).map_err(e2s)?;
        let mut buf = Vec::new();
        table::write_csv_to(&t, &mut buf).map_err(e2s)?;
        outputs.push(buf);
    }
    ensure(outputs[0] == outputs[1], || "CSV bytes differ between thread counts".into())
}

fn property_suites() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut log = Vec::new();
    suite("unitarity", unitarity(&mut rng), &mut log)?;
    suite("symmetry", symmetry_residuals(&mut rng), &mut log)?;
    suite("gauge", gauge_invariance(&mut rng), &mut log)?;
    suite("±E", pm_symmetry(&mut rng), &mut log)?;
    suite("grid", grid_stability(&mut rng), &mut log)?;
    suite("profile", profile_laws(&mut rng), &mut log)?;
    suite("continuity", degenerate_continuity(&mut rng), &mut log)?;
    suite("csv", csv_determinism(), &mut log)?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 60.0, || format!("suites took {elapsed:.1} s"))?;
    Ok(format!("{} suites ok", log.len()))
}

/// Runs criterion `id` (1 to 8).
pub fn run_criterion(id: usize) -> CriterionOutcome {
    assert!((1..=8).contains(&id), "criterion id out of range");
    let start = Instant::now();
    let result = match id {
        1 => gap_closing_recovery(),
        2 => edge_mode_counting(),
        3 => analytic_fidelity(),
        4 => transfer_boundary_values(),
        5 => non_bloch_equals_unitary(),
        6 => loop_transfer_correspondence(),
        7 => skin_effect(),
        _ => property_suites(),
    };
    let (passed, detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CriterionOutcome { id, name: CRITERIA[id - 1], passed, detail, elapsed: start.elapsed() }
}

pub fn run_all() -> Vec<CriterionOutcome> {
    (1..=8).map(run_criterion).collect()
}
