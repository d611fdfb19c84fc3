//! Biorthogonal Berry phases, frame winding numbers and the invariant pair
//! (ν₀, ν_π) on the Bloch and generalized Brillouin zone contours.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::eigen::{braket2, Eig2};
use crate::error::{Error, Result};
use crate::spectra::{momentum_grid, sample_contour};
use crate::walk::{bloch_dispersion, Frame, WalkParams};
use crate::C64;

pub const DEFAULT_NK: usize = 512;
pub const MAX_NK: usize = 8192;
/// Smallest band separation `|λ₊ − λ₋|` tolerated along the contour.
pub const MIN_GAP: f64 = 1e-6;
/// Largest change of a phase under grid doubling, in units of 2π.
pub const CONVERGENCE: f64 = 0.01;
/// Largest distance of a winding from the nearest half-integer.
pub const ROUNDING_RESIDUAL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contour {
    Bloch,
    Gbz,
}

impl Contour {
    /// Radial deformation `δ` of the contour `β = e^δ e^{ip}`.
    pub fn deformation(self, gamma: f64) -> f64 {
        match self {
            Contour::Bloch => 0.0,
            Contour::Gbz => gamma,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Contour::Bloch => "bloch",
            Contour::Gbz => "gbz",
        }
    }
}

impl std::fmt::Display for Contour {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Contour {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bloch" => Ok(Contour::Bloch),
            "gbz" => Ok(Contour::Gbz),
            other => Err(Error::InvalidParameter(format!("unknown contour '{other}'"))),
        }
    }
}

/// `n_k` points `β = e^γ e^{ip}` on the generalized Brillouin zone.
pub fn gbz_contour(gamma: f64, n_k: usize) -> Vec<C64> {
    momentum_grid(n_k).into_iter().map(|p| C64::from_polar(gamma.exp(), p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerryPhaseResult {
    /// Phase of the band continuing from `E₊ = arccos D` at `p = 0`.
    pub phase_plus: f64,
    pub phase_minus: f64,
    pub total: f64,
    pub n_k: usize,
}

impl BerryPhaseResult {
    /// Frame winding number `φ_B / 2π`, unrounded.
    pub fn winding(&self) -> f64 {
        self.total / (2.0 * PI)
    }
}

/// Gauge with real, positive weight on the chiral eigenvector `(1, 1)/√2`.
///
/// Both chiral components of a Floquet eigenvector are nonzero unless
/// `λ = ±1`, so the gauge is smooth wherever the bands are gapped.
fn chiral_gauge(v: &[C64; 2]) -> [C64; 2] {
    let c = v[0] + v[1];
    if c.norm() == 0.0 {
        return *v;
    }
    let phase = c.conj() / c.norm();
    [v[0] * phase, v[1] * phase]
}

/// Discrete Wilson-loop phase `−Im Σ_j ln[⟨L_j|R_{j+1}⟩ / ⟨L_j|R_j⟩]` of one
/// band, the loop being closed back onto the first sample.
///
/// The right vectors are first brought to the chiral gauge, which makes the
/// result independent of the phases of the supplied vectors, including its
/// integer part in units of 2π.
pub fn wilson_loop_phase(left: &[[C64; 2]], right: &[[C64; 2]]) -> f64 {
    let n = left.len().min(right.len());
    let right: Vec<[C64; 2]> = right[..n].iter().map(chiral_gauge).collect();
    let mut phase = 0.0;
    for j in 0..n {
        let next = (j + 1) % n;
        let ratio = braket2(&left[j], &right[next]) / braket2(&left[j], &right[j]);
        phase -= ratio.ln().im;
    }
    phase
}

fn plus_band_first(params: &WalkParams, deformation: f64, first: &Eig2) -> bool {
    let d = bloch_dispersion(params, 0.0, deformation);
    let e_plus = d.acos();
    let lam_plus = (C64::new(0.0, -1.0) * e_plus).exp();
    (first.values[0] - lam_plus).norm() <= (first.values[1] - lam_plus).norm()
}

/// Berry phases on a single grid of `n_k` momenta, without refinement.
pub fn berry_phase_on_grid(params: &WalkParams, frame: Frame, contour: Contour, n_k: usize) -> Result<BerryPhaseResult> {
    if n_k < 8 {
        return Err(Error::InvalidParameter(format!("n_k must be at least 8, got {n_k}")));
    }
    params.validate()?;
    let deformation = contour.deformation(params.gamma);
    let samples = sample_contour(params, frame, deformation, n_k)?;
    let min_gap = samples.iter().map(Eig2::gap).fold(f64::INFINITY, f64::min);
    if min_gap <= MIN_GAP {
        return Err(Error::Gapless(format!(
            "bands meet along the {contour} contour (min gap {min_gap:.3e}) at theta1={}, theta2={}",
            params.theta1, params.theta2
        )));
    }
    let mut phases = [0.0; 2];
    for (band, phase) in phases.iter_mut().enumerate() {
        let left: Vec<[C64; 2]> = samples.iter().map(|e| e.left[band]).collect();
        let right: Vec<[C64; 2]> = samples.iter().map(|e| e.right[band]).collect();
        *phase = wilson_loop_phase(&left, &right);
    }
    if !plus_band_first(params, deformation, &samples[0]) {
        phases.swap(0, 1);
    }
    Ok(BerryPhaseResult { phase_plus: phases[0], phase_minus: phases[1], total: phases[0] + phases[1], n_k })
}

/// Berry phases with grid doubling from `n_k` until both band phases change by
/// less than `0.01·2π`, up to `MAX_NK` points.
pub fn berry_phase(params: &WalkParams, frame: Frame, contour: Contour, n_k: usize) -> Result<BerryPhaseResult> {
    let mut coarse = berry_phase_on_grid(params, frame, contour, n_k)?;
    let cap = MAX_NK.max(2 * n_k);
    let mut n = n_k;
    while 2 * n <= cap {
        n *= 2;
        let fine = berry_phase_on_grid(params, frame, contour, n)?;
        let change = (fine.phase_plus - coarse.phase_plus).abs().max((fine.phase_minus - coarse.phase_minus).abs());
        if change < CONVERGENCE * 2.0 * PI {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(Error::Resolution(format!("Berry phase not converged at n_k = {n}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantPair {
    pub nu0: f64,
    pub nupi: f64,
    pub contour: Contour,
    /// Rounded windings (ν, ν′) of the standard and shifted frames.
    pub frame_windings: (f64, f64),
    /// Unrounded windings before snapping to half-integers.
    pub raw_windings: (f64, f64),
}

impl InvariantPair {
    /// Number of edge modes expected at E = 0 and E = π.
    pub fn edge_mode_counts(&self) -> (usize, usize) {
        ((2.0 * self.nu0.abs()).round() as usize, (2.0 * self.nupi.abs()).round() as usize)
    }
}

fn round_half(x: f64) -> Result<f64> {
    let r = (2.0 * x).round() / 2.0;
    if (x - r).abs() > ROUNDING_RESIDUAL {
        return Err(Error::Resolution(format!("winding {x:.4} is not within {ROUNDING_RESIDUAL} of a half-integer")));
    }
    Ok(r)
}

/// Invariant pair `(ν₀, ν_π) = ((ν + ν′)/2, (ν − ν′)/2)` from the two time frames.
pub fn invariants(params: &WalkParams, contour: Contour, n_k: usize) -> Result<InvariantPair> {
    let nu_raw = berry_phase(params, Frame::Standard, contour, n_k)?.winding();
    let nu_prime_raw = berry_phase(params, Frame::Shifted, contour, n_k)?.winding();
    let nu = round_half(nu_raw)?;
    let nu_prime = round_half(nu_prime_raw)?;
    Ok(InvariantPair {
        nu0: (nu + nu_prime) / 2.0,
        nupi: (nu - nu_prime) / 2.0,
        contour,
        frame_windings: (nu, nu_prime),
        raw_windings: (nu_raw, nu_prime_raw),
    })
}
