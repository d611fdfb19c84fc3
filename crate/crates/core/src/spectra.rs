//! Quasienergy spectra under fixed and periodic boundaries, edge-mode
//! selection, skin-effect diagnostics and complex-plane loop winding.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::edge::Sector;
use crate::eigen::{self, braket2, eig2, Eig2};
use crate::error::{Error, Result};
use crate::walk::{build_bloch_block_in_frame, build_floquet, Boundary, Frame, WalkParams};
use crate::C64;

/// Default distance below which an eigenvalue counts as an edge mode at 0 or π.
pub const EDGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumSource {
    FullMatrix,
    BlochSampled,
}

#[derive(Debug, Clone)]
pub struct QuasienergySpectrum {
    pub params: WalkParams,
    pub energies: Vec<C64>,
    /// Unit-norm right eigenvectors (columns), aligned with `energies`. Only
    /// full-matrix spectra carry modes.
    pub modes: Option<Array2<C64>>,
    /// Momentum of each energy (Bloch-sampled spectra only).
    pub momenta: Vec<f64>,
    /// Continuity-tracked band label of each energy (Bloch-sampled spectra only).
    pub bands: Vec<usize>,
    pub source: SpectrumSource,
}

impl QuasienergySpectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.energies.iter().map(|e| e.im.abs()).fold(0.0, f64::max)
    }

    /// Indices of energies within `tol` (modulo 2π) of the sector's quasienergy.
    pub fn indices_near(&self, sector: Sector, tol: f64) -> Vec<usize> {
        let target = C64::new(sector.quasienergy(), 0.0);
        (0..self.energies.len())
            .filter(|&j| eigen::quasienergy_distance(self.energies[j], target) < tol)
            .collect()
    }

    pub fn count_near(&self, sector: Sector, tol: f64) -> usize {
        self.indices_near(sector, tol).len()
    }

    /// Energies of one tracked band, in momentum order.
    pub fn band(&self, band: usize) -> Vec<C64> {
        self.energies.iter().zip(&self.bands).filter(|(_, &b)| b == band).map(|(e, _)| *e).collect()
    }
}

/// Full-matrix spectrum for either boundary condition.
pub fn spectrum_full(params: &WalkParams) -> Result<QuasienergySpectrum> {
    params.validate()?;
    let u = build_floquet(params, Frame::Standard)?;
    let (values, modes) = eigen::eig_right(u.as_array())?;
    let energies = values.iter().map(|&l| eigen::quasienergy_from_eigenvalue(l)).collect::<Result<Vec<_>>>()?;
    Ok(QuasienergySpectrum {
        params: *params,
        energies,
        modes: Some(modes),
        momenta: Vec::new(),
        bands: Vec::new(),
        source: SpectrumSource::FullMatrix,
    })
}

/// Spectrum of the finite chain with fixed boundaries.
pub fn spectrum_fbc(params: &WalkParams) -> Result<QuasienergySpectrum> {
    if params.boundary != Boundary::Fbc {
        return Err(Error::InvalidParameter("spectrum_fbc needs fixed boundaries".into()));
    }
    spectrum_full(params)
}

/// Reorder `cur` so that it continues `prev`: maximal biorthogonal
/// eigenvector overlap, eigenvalue proximity as tie-break.
pub fn continue_bands(prev: &Eig2, cur: Eig2) -> Eig2 {
    let ov = |i: usize, j: usize| braket2(&prev.left[i], &cur.right[j]).norm();
    let keep = ov(0, 0) * ov(1, 1);
    let swap = ov(0, 1) * ov(1, 0);
    let scale = keep.max(swap);
    if scale.is_finite() && (keep - swap).abs() > 1e-8 * scale {
        return if swap > keep { cur.swapped() } else { cur };
    }
    let d_keep = (prev.values[0] - cur.values[0]).norm() + (prev.values[1] - cur.values[1]).norm();
    let d_swap = (prev.values[0] - cur.values[1]).norm() + (prev.values[1] - cur.values[0]).norm();
    if d_swap < d_keep {
        cur.swapped()
    } else {
        cur
    }
}

/// Uniform momentum grid `p_j = 2πj/n_k`, `j = 0..n_k`.
pub fn momentum_grid(n_k: usize) -> Vec<f64> {
    (0..n_k).map(|j| 2.0 * PI * j as f64 / n_k as f64).collect()
}

/// Band-tracked 2×2 eigensystems along the contour `β = e^δ e^{ip}`.
pub fn sample_contour(params: &WalkParams, frame: Frame, deformation: f64, n_k: usize) -> Result<Vec<Eig2>> {
    let mut out: Vec<Eig2> = Vec::with_capacity(n_k);
    for p in momentum_grid(n_k) {
        let block = build_bloch_block_in_frame(params, frame, p, deformation)?;
        let cur = eig2(&block.entries);
        let next = match out.last() {
            Some(prev) => continue_bands(prev, cur),
            None => cur,
        };
        out.push(next);
    }
    Ok(out)
}

/// Periodic-boundary spectrum sampled from the Bloch blocks (no deformation).
///
/// Energies are laid out band-major: all of band 0, then all of band 1.
pub fn spectrum_pbc_bloch(params: &WalkParams, n_k: usize) -> Result<QuasienergySpectrum> {
    if n_k < 64 {
        return Err(Error::InvalidParameter(format!("n_k must be at least 64, got {n_k}")));
    }
    let samples = sample_contour(params, Frame::Standard, 0.0, n_k)?;
    let grid = momentum_grid(n_k);
    let mut energies = Vec::with_capacity(2 * n_k);
    let mut momenta = Vec::with_capacity(2 * n_k);
    let mut bands = Vec::with_capacity(2 * n_k);
    for band in 0..2 {
        for (e, &p) in samples.iter().zip(&grid) {
            energies.push(eigen::quasienergy_from_eigenvalue(e.values[band])?);
            momenta.push(p);
            bands.push(band);
        }
    }
    Ok(QuasienergySpectrum {
        params: *params,
        energies,
        modes: None,
        momenta,
        bands,
        source: SpectrumSource::BlochSampled,
    })
}

/// Whether the periodic-boundary spectral loop encloses E = 0 and E = π.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LoopClassification {
    pub winding_about_zero: i32,
    pub winding_about_pi: i32,
    pub inside_zero: bool,
    pub inside_pi: bool,
}

/// Largest allowed distance of an accumulated winding from an integer.
pub const WINDING_RESIDUAL: f64 = 0.05;
/// Closest approach of the curve to a target before it counts as "on" the curve.
pub const TARGET_CLEARANCE: f64 = 1e-6;

/// Winding of the periodic-boundary spectral curve around the target quasienergy.
///
/// The curve is followed on its image `λ = e^{−iE}`, which is closed in the
/// punctured plane even when the quasienergy bands wrap around the strip, and
/// is orientation-preserving, so loops that stay inside the strip wind the
/// same way as in the E-plane.
pub fn winding_about(params: &WalkParams, target: Sector, n_k: usize) -> Result<i32> {
    let samples = sample_contour(params, Frame::Standard, 0.0, n_k)?;
    winding_from_samples(&samples, target)
}

fn winding_from_samples(samples: &[Eig2], target: Sector) -> Result<i32> {
    let lam0 = C64::new(target.floquet_eigenvalue(), 0.0);
    let clearance = samples
        .iter()
        .flat_map(|e| e.values.iter())
        .map(|&l| (l - lam0).norm())
        .fold(f64::INFINITY, f64::min);
    if clearance < TARGET_CLEARANCE {
        return Err(Error::TargetOnCurve { distance: clearance });
    }
    let n = samples.len();
    let closing = continue_bands(&samples[n - 1], samples[0]);
    let mut total = 0.0;
    for band in 0..2 {
        for j in 0..n {
            let a = samples[j].values[band] - lam0;
            let b = if j + 1 < n { samples[j + 1].values[band] } else { closing.values[band] } - lam0;
            total += (b / a).arg();
        }
    }
    let w = total / (2.0 * PI);
    let rounded = w.round();
    if (w - rounded).abs() > WINDING_RESIDUAL {
        return Err(Error::Resolution(format!("accumulated winding {w:.4} is not an integer; refine the grid")));
    }
    Ok(rounded as i32)
}

pub fn loop_classification(params: &WalkParams, n_k: usize) -> Result<LoopClassification> {
    if n_k < 8 {
        return Err(Error::InvalidParameter(format!("n_k must be at least 8, got {n_k}")));
    }
    params.validate()?;
    let samples = sample_contour(params, Frame::Standard, 0.0, n_k)?;
    let wz = winding_from_samples(&samples, Sector::Zero)?;
    let wp = winding_from_samples(&samples, Sector::Pi)?;
    Ok(LoopClassification { winding_about_zero: wz, winding_about_pi: wp, inside_zero: wz != 0, inside_pi: wp != 0 })
}

/// Skin-effect diagnostics of a full-matrix spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct SkinReport {
    /// Center of mass `Σₙ n·wₙ` of each eigenmode, in sites `1..=N`.
    pub mean_positions: Vec<f64>,
    /// Inverse participation ratio `Σₙ wₙ²` of each eigenmode.
    pub ipr: Vec<f64>,
    /// Whether each mode passed the bulk filter.
    pub bulk: Vec<bool>,
    /// Fraction of bulk modes whose center of mass lies right of the chain
    /// midpoint `(N + 1)/2`.
    pub fraction_right: f64,
}

/// Site weights `wₙ = |ψ(n,H)|² + |ψ(n,V)|²` of a state, normalized to 1.
pub fn site_weights(state: ndarray::ArrayView1<C64>) -> Vec<f64> {
    let n_sites = state.len() / 2;
    let w: Vec<f64> = (0..n_sites).map(|n| state[2 * n].norm_sqr() + state[2 * n + 1].norm_sqr()).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.into_iter().map(|x| x / total).collect()
    } else {
        w
    }
}

pub fn center_of_mass(state: ndarray::ArrayView1<C64>) -> f64 {
    site_weights(state).iter().enumerate().map(|(n, w)| (n + 1) as f64 * w).sum()
}

/// Bulk modes are those farther than `bulk_threshold` from both 0 and π.
pub fn skin_report(spectrum: &QuasienergySpectrum, bulk_threshold: f64) -> Result<SkinReport> {
    let modes = spectrum
        .modes
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("skin report needs a full-matrix spectrum with modes".into()))?;
    let n_sites = spectrum.params.n_sites;
    let mut mean_positions = Vec::with_capacity(spectrum.len());
    let mut ipr = Vec::with_capacity(spectrum.len());
    let mut bulk = Vec::with_capacity(spectrum.len());
    for (j, &e) in spectrum.energies.iter().enumerate() {
        let w = site_weights(modes.column(j));
        mean_positions.push(w.iter().enumerate().map(|(n, x)| (n + 1) as f64 * x).sum());
        ipr.push(w.iter().map(|x| x * x).sum());
        let d0 = eigen::quasienergy_distance(e, C64::new(0.0, 0.0));
        let dpi = eigen::quasienergy_distance(e, C64::new(PI, 0.0));
        bulk.push(d0.min(dpi) > bulk_threshold);
    }
    let n_bulk = bulk.iter().filter(|&&b| b).count();
    if n_bulk == 0 {
        return Err(Error::EmptyBulk);
    }
    let midpoint = (n_sites as f64 + 1.0) / 2.0;
    let right = mean_positions.iter().zip(&bulk).filter(|(&x, &b)| b && x > midpoint).count();
    Ok(SkinReport { mean_positions, ipr, bulk, fraction_right: right as f64 / n_bulk as f64 })
}
