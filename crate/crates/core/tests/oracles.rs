use std::f64::consts::PI;

use qwalk_core::edge::{self, Eta, Region, Sector};
use qwalk_core::error::Error;
use qwalk_core::spectra;
use qwalk_core::sweep::{self, Axis, AxisName, SweepSpec, Task, TaskOptions};
use qwalk_core::table::Value;
use qwalk_core::topology::{self, Contour};
use qwalk_core::walk::{Boundary, WalkParams};
use rayon::prelude::*;

fn params(t1: f64, t2: f64, gamma: f64, n: usize, boundary: Boundary) -> WalkParams {
    WalkParams::new(t1, t2, gamma, n, boundary).unwrap()
}

/// Whether the ellipse traced by `D(p) = c₁c₂ cos 2(p + iγ) − s₁s₂` encloses `x`.
fn ellipse_encloses(t1: f64, t2: f64, gamma: f64, x: f64) -> bool {
    let (s1, c1) = t1.sin_cos();
    let (s2, c2) = t2.sin_cos();
    let centre = -s1 * s2;
    let a = (c1 * c2).abs() * (2.0 * gamma).cosh();
    let b = (c1 * c2).abs() * (2.0 * gamma).sinh().abs();
    b > 0.0 && (x - centre).abs() < a
}

#[test]
fn transfer_map_matches_loops_and_ellipse_oracle() {
    let gamma = 0.2;
    let n = 41;
    let axis: Vec<f64> = (0..n).map(|i| -PI + 2.0 * PI * i as f64 / (n - 1) as f64).collect();
    let points: Vec<(f64, f64)> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect();
    let results: Vec<Option<String>> = points
        .par_iter()
        .map(|&(t1, t2)| {
            let p = params(t1, t2, gamma, 20, Boundary::Pbc);
            let class = match edge::transfer_classification_with_loops(&p, 512) {
                Ok(c) => c,
                Err(Error::Pole { .. } | Error::BoundaryPoint(_) | Error::TargetOnCurve { .. }) => return None,
                Err(e) => return Some(format!("({t1}, {t2}): {e}")),
            };
            let check = class.loop_check.unwrap();
            let oracle = (ellipse_encloses(t1, t2, gamma, 1.0), ellipse_encloses(t1, t2, gamma, -1.0));
            if !check.agrees || (check.loops.inside_zero, check.loops.inside_pi) != oracle {
                return Some(format!("({:.3}π, {:.3}π): {class:?} oracle {oracle:?}", t1 / PI, t2 / PI));
            }
            None
        })
        .collect();
    let bad: Vec<&String> = results.iter().flatten().collect();
    assert!(bad.is_empty(), "{} disagreements: {:?}", bad.len(), &bad[..bad.len().min(5)]);
}

#[test]
fn transfer_map_has_four_regions() {
    let spec = SweepSpec {
        axis1: Axis::new(AxisName::Theta1, -PI, PI, 41).unwrap(),
        axis2: Some(Axis::new(AxisName::Theta2, -PI, PI, 41).unwrap()),
        fixed: params(0.0, 0.0, 0.2, 20, Boundary::Pbc),
        task: Task::TransferMap,
        options: TaskOptions { n_k: 256, contour: Contour::Gbz },
    };
    let t = sweep::run_sweep(&spec).unwrap();
    assert_eq!(t.len(), 41 * 41);
    let region = t.column_index("region").unwrap();
    let mut seen = [false; 4];
    for r in &t.rows {
        if let Value::Integer(k) = r[region] {
            seen[k as usize - 1] = true;
        }
    }
    assert_eq!(seen, [true; 4]);
}

#[test]
fn non_bloch_bulk_boundary_correspondence() {
    let gamma = 0.2;
    let grid: Vec<f64> = (0..5).map(|i| (-0.87 + 0.41 * i as f64) * PI).collect();
    for &t1 in &grid {
        for &t2 in &grid {
            let pbc = params(t1, t2, gamma, 60, Boundary::Pbc);
            let inv = match topology::invariants(&pbc, Contour::Gbz, topology::DEFAULT_NK) {
                Ok(inv) => inv,
                Err(Error::Gapless(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            let tt: Vec<f64> = Sector::BOTH
                .iter()
                .flat_map(|&a| Eta::BOTH.map(|e| edge::inverse_localization(&pbc, a, e).unwrap().1.abs()))
                .collect();
            // finite-size splitting of the edge pair must be far below the counting tolerance
            if tt.iter().any(|t| t * 60.0 < 20.0) {
                continue;
            }
            let s = spectra::spectrum_fbc(&pbc.with_boundary(Boundary::Fbc)).unwrap();
            let counts = (s.count_near(Sector::Zero, spectra::EDGE_TOL), s.count_near(Sector::Pi, spectra::EDGE_TOL));
            assert_eq!(counts, inv.edge_mode_counts(), "({:.2}π, {:.2}π)", t1 / PI, t2 / PI);
        }
    }
}

#[test]
fn invariants_change_only_across_gap_lines() {
    let n = 41;
    let axis: Vec<f64> = (0..n).map(|i| (-1.0 + (2.0 * i as f64 + 0.5) / n as f64) * PI).collect();
    let inv: Vec<Vec<Option<(f64, f64)>>> = axis
        .par_iter()
        .map(|&t1| {
            axis.iter()
                .map(|&t2| {
                    topology::invariants(&params(t1, t2, 0.0, 20, Boundary::Pbc), Contour::Bloch, 256)
                        .ok()
                        .map(|i| (i.nu0, i.nupi))
                })
                .collect()
        })
        .collect();
    // along θ₂ at fixed θ₁, ν₀ (ν_π) flips once per E = 0 (E = π) line crossed;
    // lines are counted with multiplicity since they coincide at θ₁ = ±π/2
    for (i, &t1) in axis.iter().enumerate() {
        let zero = [-t1, t1 + PI].map(edge::fold_angle);
        let pi = [t1, PI - t1].map(edge::fold_angle);
        for j in 0..n - 1 {
            let (Some(a), Some(c)) = (inv[i][j], inv[i][j + 1]) else { continue };
            let odd = |lines: &[f64]| lines.iter().filter(|&&x| x > axis[j] && x < axis[j + 1]).count() % 2 == 1;
            assert_eq!(a.0 != c.0, odd(&zero), "nu0 at θ₁={:.3}π between {:.3}π and {:.3}π", t1 / PI, axis[j] / PI, axis[j + 1] / PI);
            assert_eq!(a.1 != c.1, odd(&pi), "nupi at θ₁={:.3}π", t1 / PI);
        }
    }
}

#[test]
fn phase_boundaries_match_numeric_gap_closings() {
    let grid: Vec<f64> = (0..=1000).map(|i| (-1.0 + i as f64 * 2e-3) * PI).collect();
    for t1 in [0.2, 0.5, -0.35, 0.13] {
        let base = params(t1 * PI, 0.0, 0.0, 20, Boundary::Pbc);
        let scan = sweep::gap_scan(&base, &grid, 256).unwrap();
        let expected = edge::phase_boundaries(t1 * PI);
        for alpha in Sector::BOTH {
            let mut found: Vec<f64> = scan.touchings(alpha, 2e-2).into_iter().map(edge::fold_angle).collect();
            found.sort_by(f64::total_cmp);
            found.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            let want = expected.get(alpha);
            assert_eq!(found.len(), want.len(), "θ₁={t1}π E={alpha}: {found:?} vs {want:?}");
            for (f, w) in found.iter().zip(want) {
                assert!((f - w).abs() <= 2e-3 * PI, "θ₁={t1}π E={alpha}: {f} vs {w}");
            }
        }
    }
}

/// Bisection on `T̃(θ₂)` as an independent route to the transfer roots.
#[test]
fn transfer_roots_match_bisection() {
    let tt = |t1: f64, t2: f64, gamma: f64, alpha: Sector, eta: Eta| {
        edge::inverse_localization(&params(t1, t2, gamma, 20, Boundary::Fbc), alpha, eta).unwrap().1
    };
    for (gamma, t1) in [(0.2, 0.2 * PI), (-0.15, 0.37 * PI), (0.05, -0.61 * PI)] {
        for alpha in Sector::BOTH {
            let mut oracle = Vec::new();
            for eta in Eta::BOTH {
                let steps = 4000;
                let xs: Vec<f64> = (0..=steps).map(|i| -PI + 2.0 * PI * i as f64 / steps as f64).collect();
                for w in xs.windows(2) {
                    let (mut lo, mut hi) = (w[0], w[1]);
                    if lo.cos().abs() < 1e-9 || hi.cos().abs() < 1e-9 {
                        continue;
                    }
                    let (flo, fhi) = (tt(t1, lo, gamma, alpha, eta), tt(t1, hi, gamma, alpha, eta));
                    // T̃ diverges with a sign flip at the poles θ₂ = ±π/2; skip those brackets
                    if flo * fhi > 0.0 || (flo - fhi).abs() > 1.0 {
                        continue;
                    }
                    while hi - lo > 1e-12 {
                        let mid = 0.5 * (lo + hi);
                        if tt(t1, mid, gamma, alpha, eta) * flo > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    oracle.push(0.5 * (lo + hi));
                }
            }
            oracle.sort_by(f64::total_cmp);
            let closed = edge::transfer_boundaries(gamma, t1, alpha).unwrap();
            assert_eq!(closed.len(), oracle.len(), "{closed:?} vs {oracle:?}");
            for (c, o) in closed.iter().zip(&oracle) {
                assert!((c - o).abs() < 1e-10, "γ={gamma} θ₁={t1} {alpha}: {c} vs {o}");
            }
        }
    }
}

#[test]
fn fbc_spectrum_real_across_theta2_with_gain_loss() {
    for i in 0..=40 {
        let t2 = (-1.0 + 0.05 * i as f64) * PI;
        let b = edge::phase_boundaries(0.2 * PI);
        if b.zero.iter().chain(&b.pi).any(|x| edge::fold_angle(t2 - x).abs() < 0.02) {
            continue;
        }
        let s = spectra::spectrum_fbc(&params(0.2 * PI, t2, 0.2, 60, Boundary::Fbc)).unwrap();
        assert!(s.max_abs_imag() < 1e-6, "θ₂ = {:.2}π: {:.3e}", t2 / PI, s.max_abs_imag());
    }
}

#[test]
fn spectrum_scan_shows_edge_pairs_in_gapped_regions() {
    let spec = SweepSpec {
        axis1: Axis::new(AxisName::Theta2, -PI, PI, 201).unwrap(),
        axis2: None,
        fixed: params(0.2 * PI, 0.0, 0.0, 60, Boundary::Fbc),
        task: Task::SpectrumScan,
        options: TaskOptions::default(),
    };
    let t = sweep::run_sweep(&spec).unwrap();
    let (pt, e) = (t.column_index("point").unwrap(), t.column_index("E").unwrap());
    let points = spec.points();
    let mut counts = vec![(0usize, 0usize); points.len()];
    for r in &t.rows {
        let (Value::Integer(i), Value::Complex(z)) = (&r[pt], &r[e]) else { panic!("status row {r:?}") };
        let c = &mut counts[*i as usize];
        if z.norm() < 1e-6 {
            c.0 += 1;
        }
        if (z.re.abs() - PI).abs() < 1e-6 && z.im.abs() < 1e-6 {
            c.1 += 1;
        }
    }
    for (p, (n0, npi)) in points.iter().zip(counts) {
        let far = |alpha| Eta::BOTH.iter().all(|&eta| edge::inverse_localization(p, alpha, eta).map_or(false, |t| t.1.abs() * 60.0 > 20.0));
        if far(Sector::Zero) {
            assert_eq!(n0, 2, "θ₂ = {:.3}π", p.theta2 / PI);
        }
        if far(Sector::Pi) {
            assert_eq!(npi, 2, "θ₂ = {:.3}π", p.theta2 / PI);
        }
    }
}

#[test]
fn region_points_have_expected_transfer_signs() {
    for ((a, b), region) in qwalk_core::selftest::REGION_POINTS {
        let c = edge::transfer_classification(&params(a * PI, b * PI, 0.2, 20, Boundary::Pbc)).unwrap();
        assert_eq!(c.region, region);
        assert_eq!(Region::from_signs(c.s_zero, c.s_pi), region);
    }
}
