use std::f64::consts::PI;

use ndarray::Array2;
use proptest::prelude::*;
use qwalk_core::edge::{self, Eta, Sector};
use qwalk_core::eigen::{self, eig_general, quasienergy_distance};
use qwalk_core::selftest::pm_symmetry_defect;
use qwalk_core::spectra::{self, sample_contour};
use qwalk_core::topology::{self, wilson_loop_phase, Contour, DEFAULT_NK};
use qwalk_core::walk::{build_bloch_block, build_floquet, Boundary, Frame, WalkParams};
use qwalk_core::C64;

fn angle() -> impl Strategy<Value = f64> {
    -0.999 * PI..0.999 * PI
}

fn regular_angle() -> impl Strategy<Value = f64> {
    angle().prop_filter("away from sec/tan poles", |t| t.cos().abs() > 0.05)
}

fn boundary_distance(t1: f64, t2: f64) -> f64 {
    let b = edge::phase_boundaries(t1);
    b.zero.iter().chain(&b.pi).map(|x| edge::fold_angle(t2 - x).abs()).fold(f64::INFINITY, f64::min)
}

/// (θ₁, θ₂) at least 0.05 rad from every unitary gap-closing line.
fn gapped_angles() -> impl Strategy<Value = (f64, f64)> {
    (angle(), angle()).prop_filter("gapped", |&(a, b)| boundary_distance(a, b) > 0.05)
}

fn params(t1: f64, t2: f64, gamma: f64, n: usize, boundary: Boundary) -> WalkParams {
    WalkParams::new(t1, t2, gamma, n, boundary).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quasienergy_round_trip(re in -PI + 1e-9..PI, im in -3.0f64..3.0) {
        let e = C64::new(re, im);
        let back = eigen::quasienergy_from_eigenvalue(eigen::eigenvalue_from_quasienergy(e)).unwrap();
        prop_assert!((back - e).norm() < 1e-12);
    }

    #[test]
    fn r_reciprocity(t in regular_angle()) {
        prop_assert!((edge::r_of(t).unwrap() * edge::r_of(-t).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn localization_shift_and_antisymmetry(t1 in regular_angle(), t2 in regular_angle(), g in -1.0f64..1.0) {
        let p = params(t1, t2, g, 20, Boundary::Fbc);
        for alpha in Sector::BOTH {
            let (tp, ttp) = edge::inverse_localization(&p, alpha, Eta::Plus).unwrap();
            let (tm, ttm) = edge::inverse_localization(&p, alpha, Eta::Minus).unwrap();
            prop_assert!((ttp - tp - g).abs() < 1e-14 && (ttm - tm - g).abs() < 1e-14);
            prop_assert!((tp + tm).abs() < 1e-14);
        }
    }

    #[test]
    fn unitary_spectrum_is_real(t1 in angle(), t2 in angle(), fbc in any::<bool>()) {
        let b = if fbc { Boundary::Fbc } else { Boundary::Pbc };
        let s = spectra::spectrum_full(&params(t1, t2, 0.0, 16, b)).unwrap();
        prop_assert!(s.max_abs_imag() < 1e-8);
    }

    #[test]
    fn spectrum_is_plus_minus_symmetric(t1 in angle(), t2 in angle(), g in -0.3f64..0.3, fbc in any::<bool>()) {
        let b = if fbc { Boundary::Fbc } else { Boundary::Pbc };
        let s = spectra::spectrum_full(&params(t1, t2, g, 16, b)).unwrap();
        prop_assert!(pm_symmetry_defect(&s.energies) < 1e-7);
    }

    #[test]
    fn bloch_bands_are_sign_partners(t1 in angle(), t2 in angle(), g in -0.5f64..0.5) {
        let s = spectra::spectrum_pbc_bloch(&params(t1, t2, g, 16, Boundary::Pbc), 64).unwrap();
        for (a, b) in s.band(0).iter().zip(s.band(1)) {
            prop_assert!(quasienergy_distance(*a, -b) < 1e-9);
        }
    }

    /// The periodic chain is translation invariant with a one-site unit cell,
    /// so its spectrum is the union of the Bloch blocks at `p = 2πm/N`.
    #[test]
    fn full_periodic_spectrum_is_union_of_bloch_blocks(t1 in angle(), t2 in angle(), g in -0.3f64..0.3) {
        let n = 16;
        let p = params(t1, t2, g, n, Boundary::Pbc);
        let full = eig_general(build_floquet(&p, Frame::Standard).unwrap().as_array()).unwrap();
        let mut bloch = Vec::new();
        for m in 0..n {
            let block = build_bloch_block(&p, 2.0 * PI * m as f64 / n as f64, 0.0).unwrap();
            bloch.extend(eigen::eig2(&block.entries).values);
        }
        let mut used = vec![false; bloch.len()];
        for lam in &full.values {
            let (j, d) = bloch.iter().enumerate().filter(|(j, _)| !used[*j])
                .map(|(j, b)| (j, (b - lam).norm())).fold((0, f64::INFINITY), |a, x| if x.1 < a.1 { x } else { a });
            used[j] = true;
            prop_assert!(d < 1e-7, "unmatched eigenvalue {lam} ({d:.3e})");
        }
    }

    #[test]
    fn berry_phase_is_gauge_invariant((t1, t2) in gapped_angles(), g in -0.3f64..0.3, seed in any::<u64>()) {
        let p = params(t1, t2, g, 20, Boundary::Pbc);
        let samples = sample_contour(&p, Frame::Shifted, g, 128).unwrap();
        let mut state = seed;
        let mut phase = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            C64::from_polar(1.0, (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 * PI)
        };
        for band in 0..2 {
            let left: Vec<[C64; 2]> = samples.iter().map(|e| e.left[band]).collect();
            let right: Vec<[C64; 2]> = samples.iter().map(|e| e.right[band]).collect();
            let reference = wilson_loop_phase(&left, &right);
            let left2: Vec<[C64; 2]> = left.iter().map(|v| { let c = phase(); [v[0] * c, v[1] * c] }).collect();
            let right2: Vec<[C64; 2]> = right.iter().map(|v| { let c = phase(); [v[0] * c, v[1] * c] }).collect();
            prop_assert!((wilson_loop_phase(&left2, &right2) - reference).abs() < 1e-10);
        }
    }

    #[test]
    fn winding_converges_under_refinement((t1, t2) in gapped_angles()) {
        let p = params(t1, t2, 0.0, 20, Boundary::Pbc);
        for frame in [Frame::Standard, Frame::Shifted] {
            let a = topology::berry_phase_on_grid(&p, frame, Contour::Bloch, 256).unwrap();
            let b = topology::berry_phase_on_grid(&p, frame, Contour::Bloch, 512).unwrap();
            prop_assert!((a.winding() - b.winding()).abs() < 1e-3);
            prop_assert!((b.winding() - b.winding().round()).abs() < 0.02);
        }
    }

    #[test]
    fn invariant_pair_assembles_frame_windings((t1, t2) in gapped_angles()) {
        let inv = topology::invariants(&params(t1, t2, 0.0, 20, Boundary::Pbc), Contour::Bloch, 256).unwrap();
        let (nu, nup) = inv.frame_windings;
        prop_assert_eq!(inv.nu0, (nu + nup) / 2.0);
        prop_assert_eq!(inv.nupi, (nu - nup) / 2.0);
        prop_assert_eq!((inv.nu0.abs(), inv.nupi.abs()), (1.0, 1.0));
    }

    /// Sign convention: `ν_α > 0` exactly when the η = +1 α-mode is localized at the right edge.
    #[test]
    fn invariant_signs_follow_localization((t1, t2) in gapped_angles()) {
        prop_assume!(t1.cos().abs() > 0.05 && t2.cos().abs() > 0.05);
        let p = params(t1, t2, 0.0, 20, Boundary::Pbc);
        let inv = topology::invariants(&p, Contour::Bloch, 256).unwrap();
        let (t0, _) = edge::inverse_localization(&p, Sector::Zero, Eta::Plus).unwrap();
        let (tpi, _) = edge::inverse_localization(&p, Sector::Pi, Eta::Plus).unwrap();
        prop_assert_eq!(inv.nu0.signum(), t0.signum());
        prop_assert_eq!(inv.nupi.signum(), tpi.signum());
    }

    #[test]
    fn loop_winding_is_grid_stable((t1, t2) in gapped_angles(), g in -0.4f64..0.4) {
        let p = params(t1, t2, g, 20, Boundary::Pbc);
        if let Ok(a) = spectra::loop_classification(&p, 512) {
            prop_assert_eq!(Ok(a), spectra::loop_classification(&p, 1024).map_err(|e| e.to_string()));
            prop_assert_eq!(a.inside_zero, a.winding_about_zero != 0);
            prop_assert_eq!(a.inside_pi, a.winding_about_pi != 0);
        }
    }

    #[test]
    fn analytic_modes_are_eigenvectors(t1 in regular_angle(), t2 in regular_angle(), g in -0.3f64..0.3) {
        let p = params(t1, t2, g, 60, Boundary::Fbc);
        let u: Array2<C64> = build_floquet(&p, Frame::Standard).unwrap().into_array();
        for alpha in Sector::BOTH {
            for eta in Eta::BOTH {
                let m = edge::analytic_edge_mode(&p, alpha, eta).unwrap();
                prop_assume!(m.t_tilde.abs() * 60.0 > 8.0);
                let psi = m.to_state();
                let r = u.dot(&psi) - &psi * C64::new(alpha.floquet_eigenvalue(), 0.0);
                let res = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                prop_assert!(res < 1e-8, "residual {res:.3e} for {alpha} {eta}");
            }
        }
    }

    /// `sign T̃ = +1` exactly when the matched numeric edge mode sits right of N/2.
    #[test]
    fn localization_side_law(t1 in regular_angle(), t2 in regular_angle(), g in -0.3f64..0.3) {
        let p = params(t1, t2, g, 60, Boundary::Fbc);
        let s = spectra::spectrum_fbc(&p).unwrap();
        let modes = s.modes.as_ref().unwrap();
        for alpha in Sector::BOTH {
            let picked = s.indices_near(alpha, spectra::EDGE_TOL);
            prop_assume!(picked.len() == 2);
            for eta in Eta::BOTH {
                let m = edge::analytic_edge_mode(&p, alpha, eta).unwrap();
                prop_assume!(m.t_tilde.abs() * 60.0 > 8.0);
                // project the analytic state onto the numeric pair
                let a = modes.column(picked[0]);
                let b = modes.column(picked[1]);
                let psi = m.to_state();
                let dot = |x: ndarray::ArrayView1<C64>, y: ndarray::ArrayView1<C64>| x.iter().zip(y).map(|(u, v)| u.conj() * v).sum::<C64>();
                let gram = [[dot(a, a), dot(a, b)], [dot(b, a), dot(b, b)]];
                let rhs = [dot(a, psi.view()), dot(b, psi.view())];
                let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
                let ca = (rhs[0] * gram[1][1] - gram[0][1] * rhs[1]) / det;
                let cb = (gram[0][0] * rhs[1] - gram[1][0] * rhs[0]) / det;
                let matched = &a.to_owned() * ca + &b.to_owned() * cb;
                let com = spectra::center_of_mass(matched.view());
                prop_assert_eq!(m.t_tilde > 0.0, com > 30.0, "T̃ {} CoM {}", m.t_tilde, com);
            }
        }
    }

    #[test]
    fn transfer_roots_zero_t_tilde(g in -0.5f64..0.5, t1 in regular_angle()) {
        for alpha in Sector::BOTH {
            for root in edge::transfer_boundaries(g, t1, alpha).unwrap() {
                prop_assume!(root.cos().abs() > 1e-6);
                let p = params(t1, root, g, 20, Boundary::Fbc);
                let (_, plus) = edge::inverse_localization(&p, alpha, Eta::Plus).unwrap();
                let (_, minus) = edge::inverse_localization(&p, alpha, Eta::Minus).unwrap();
                prop_assert!(plus.abs().min(minus.abs()) < 1e-9);
            }
        }
    }

    #[test]
    fn eigen_reconstruction(seed in any::<u64>()) {
        let mut state = seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let m = Array2::from_shape_fn((50, 50), |_| C64::new(next(), next()));
        let sys = eig_general(&m).unwrap();
        prop_assume!(!sys.is_ill_conditioned());
        let rl = sys.right.dot(&Array2::from_diag(&ndarray::Array1::from(sys.values.clone())));
        let lhs = m.dot(&sys.right);
        let err = (&lhs - &rl).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let norm = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err / norm < 1e-7);
        prop_assert!(sys.biorthogonality_defect < 1e-7);
    }
}

#[test]
fn gbz_contour_restores_unitary_values_at_default_resolution() {
    let a = topology::invariants(&params(0.3 * PI, 0.55 * PI, 0.0, 20, Boundary::Pbc), Contour::Bloch, DEFAULT_NK).unwrap();
    let b = topology::invariants(&params(0.3 * PI, 0.55 * PI, -0.25, 20, Boundary::Pbc), Contour::Gbz, DEFAULT_NK).unwrap();
    assert_eq!((a.nu0, a.nupi), (b.nu0, b.nupi));
}
