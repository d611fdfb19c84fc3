//! Closed-form edge modes, inverse localization lengths, phase boundaries
//! and the transfer classification of edge states under gain and loss.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{self, LoopClassification, QuasienergySpectrum, SpectrumSource};
use crate::walk::{build_floquet, Boundary, Frame, WalkParams};
use crate::C64;

/// `|cos θ|` at or below which `sec θ` and `tan θ` count as poles.
pub const POLE_TOL: f64 = 1e-12;
/// `|T̃|` below which the flat-profile branch is used.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Quasienergy sector of an edge mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Zero,
    Pi,
}

impl Sector {
    pub const BOTH: [Sector; 2] = [Sector::Zero, Sector::Pi];

    pub fn quasienergy(self) -> f64 {
        match self {
            Sector::Zero => 0.0,
            Sector::Pi => PI,
        }
    }

    /// Floquet eigenvalue `e^{−iE}` of the sector, `+1` or `−1`.
    pub fn floquet_eigenvalue(self) -> f64 {
        match self {
            Sector::Zero => 1.0,
            Sector::Pi => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sector::Zero => "zero",
            Sector::Pi => "pi",
        }
    }
}

impl std::fmt::Display for Sector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" | "0" => Ok(Sector::Zero),
            "pi" | "π" => Ok(Sector::Pi),
            other => Err(Error::InvalidParameter(format!("unknown sector '{other}'"))),
        }
    }
}

/// Sublattice (chiral) eigenvalue of an edge mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eta {
    Plus,
    Minus,
}

impl Eta {
    pub const BOTH: [Eta; 2] = [Eta::Plus, Eta::Minus];

    pub fn value(self) -> f64 {
        match self {
            Eta::Plus => 1.0,
            Eta::Minus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Eta::Plus => "+1",
            Eta::Minus => "-1",
        }
    }
}

impl std::fmt::Display for Eta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Eta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "+1" | "1" | "+" | "plus" => Ok(Eta::Plus),
            "-1" | "-" | "minus" => Ok(Eta::Minus),
            other => Err(Error::InvalidParameter(format!("unknown sublattice eigenvalue '{other}'"))),
        }
    }
}

/// `R(θ) = sec θ − tan θ`, evaluated as `tan(π/4 − θ/2)`.
pub fn r_of(theta: f64) -> Result<f64> {
    if theta.cos().abs() <= POLE_TOL {
        return Err(Error::Pole { theta });
    }
    Ok((FRAC_PI_4 - theta / 2.0).tan())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalizationConstants {
    pub r1: f64,
    pub r2: f64,
    pub z0: f64,
    pub zpi: f64,
}

impl LocalizationConstants {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        let r1 = r_of(theta1)?;
        let r2 = r_of(theta2)?;
        Ok(Self { r1, r2, z0: r1, zpi: -1.0 / r1 })
    }

    pub fn z(&self, alpha: Sector) -> f64 {
        match alpha {
            Sector::Zero => self.z0,
            Sector::Pi => self.zpi,
        }
    }
}

/// Inverse localization lengths `(T, T̃)` with `T = (η/2) ln|Z R₂|` and `T̃ = γ + T`.
pub fn inverse_localization(params: &WalkParams, alpha: Sector, eta: Eta) -> Result<(f64, f64)> {
    let k = LocalizationConstants::new(params.theta1, params.theta2)?;
    let t = 0.5 * eta.value() * (k.z(alpha) * k.r2).abs().ln();
    Ok((t, params.gamma + t))
}

/// Angle folded into `(−π, π]`.
pub fn fold_angle(theta: f64) -> f64 {
    let mut x = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

fn sorted_unique(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    xs
}

/// Unitary gap-closing lines in θ₂ at fixed θ₁.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseBoundaries {
    pub zero: Vec<f64>,
    pub pi: Vec<f64>,
}

impl PhaseBoundaries {
    pub fn get(&self, alpha: Sector) -> &[f64] {
        match alpha {
            Sector::Zero => &self.zero,
            Sector::Pi => &self.pi,
        }
    }
}

/// `θ₂ ∈ {−θ₁, θ₁ ± π}` close the gap at E = 0, `θ₂ ∈ {θ₁, −θ₁ ± π}` at E = π.
pub fn phase_boundaries(theta1: f64) -> PhaseBoundaries {
    let zero = [-theta1, theta1 + PI, theta1 - PI].into_iter().map(fold_angle).collect();
    let pi = [theta1, PI - theta1, -PI - theta1].into_iter().map(fold_angle).collect();
    PhaseBoundaries { zero: sorted_unique(zero), pi: sorted_unique(pi) }
}

/// Closed-form right eigenstate of an edge mode under fixed boundaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeModeAnalytic {
    pub alpha: Sector,
    pub eta: Eta,
    /// `a₁, a₃, …, a_{N−1}`.
    pub amplitudes_odd: Vec<f64>,
    /// `a₂, a₄, …, a_N`.
    pub amplitudes_even: Vec<f64>,
    pub t_tilde: f64,
}

impl EdgeModeAnalytic {
    pub fn n_sites(&self) -> usize {
        self.amplitudes_odd.len() + self.amplitudes_even.len()
    }

    /// Site amplitudes `a₁ … a_N` in site order.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.amplitudes_odd.iter().zip(&self.amplitudes_even).flat_map(|(&o, &e)| [o, e]).collect()
    }

    /// Full state `Σₙ aₙ |n⟩ ⊗ (|H⟩ + η|V⟩)`, which has unit norm because
    /// `Σₙ aₙ² = 1/2`.
    pub fn to_state(&self) -> Array1<C64> {
        let eta = self.eta.value();
        let mut psi = Array1::zeros(2 * self.n_sites());
        for (n, a) in self.amplitudes().into_iter().enumerate() {
            psi[2 * n] = C64::new(a, 0.0);
            psi[2 * n + 1] = C64::new(eta * a, 0.0);
        }
        psi
    }
}

/// `ln|e^x − 1|` without overflow for large positive `x`.
fn ln_abs_expm1(x: f64) -> f64 {
    if x > 0.0 {
        x + (-(-x).exp_m1()).ln()
    } else {
        (-x.exp_m1()).ln()
    }
}

/// Evaluates the closed-form amplitudes for sector `alpha` and sublattice
/// eigenvalue `eta`, whether or not the mode exists at these parameters.
pub fn analytic_edge_mode(params: &WalkParams, alpha: Sector, eta: Eta) -> Result<EdgeModeAnalytic> {
    params.validate()?;
    let k = LocalizationConstants::new(params.theta1, params.theta2)?;
    let (_, t_tilde) = inverse_localization(params, alpha, eta)?;
    let z = k.z(alpha);
    let z_eta = z.powf(eta.value());
    let weight = 1.0 + z_eta * z_eta;
    let sign = (z * k.r2).signum();
    let half = params.n_sites / 2;
    let n = params.n_sites as f64;

    let amplitudes_odd: Vec<f64> = if t_tilde.abs() < DEGENERATE_TOL {
        let flat = (1.0 / (n * weight)).sqrt();
        (0..half).map(|m| sign.powi(m as i32) * flat).collect()
    } else {
        let log_norm = ln_abs_expm1(4.0 * t_tilde) - ln_abs_expm1(2.0 * n * t_tilde) - (2.0 * weight).ln();
        (0..half)
            .map(|m| sign.powi(m as i32) * (0.5 * (4.0 * m as f64 * t_tilde + log_norm)).exp())
            .collect()
    };
    let amplitudes_even = amplitudes_odd.iter().map(|a| eta.value() * z_eta * a).collect();
    Ok(EdgeModeAnalytic { alpha, eta, amplitudes_odd, amplitudes_even, t_tilde })
}

/// Comparison of an analytic edge mode with a numerically diagonalized chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityReport {
    pub alpha: Sector,
    pub eta: Eta,
    /// `⟨ψ|P|ψ⟩` with `P` the orthogonal projector onto the numeric edge-mode subspace.
    pub fidelity: f64,
    /// `‖Uψ − λψ‖` with `λ = ±1`.
    pub eigen_residual: f64,
    /// `‖Γψ − ηψ‖`.
    pub sublattice_residual: f64,
    pub t_tilde: f64,
    pub numeric_modes: usize,
}

/// Orthonormal basis of the span of the given columns (twice-iterated Gram–Schmidt).
fn orthonormal_basis(columns: &[Array1<C64>]) -> Vec<Array1<C64>> {
    let mut basis: Vec<Array1<C64>> = Vec::new();
    for col in columns {
        let mut v = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let c: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                v.zip_mut_with(q, |x, y| *x -= c * y);
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-10 {
            basis.push(v / C64::new(norm, 0.0));
        }
    }
    basis
}

fn vec_norm(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn verify_against_numeric(
    params: &WalkParams,
    alpha: Sector,
    eta: Eta,
    spectrum: &QuasienergySpectrum,
) -> Result<FidelityReport> {
    if params.boundary != Boundary::Fbc || spectrum.source != SpectrumSource::FullMatrix {
        return Err(Error::InvalidParameter("verification needs a full-matrix spectrum under fixed boundaries".into()));
    }
    let modes = spectrum.modes.as_ref().ok_or_else(|| Error::InvalidParameter("spectrum carries no modes".into()))?;
    let picked = spectrum.indices_near(alpha, spectra::EDGE_TOL);
    if picked.len() < 2 {
        return Err(Error::EdgeModesNotFound(format!(
            "{} mode(s) within {:.0e} of E = {}, expected a degenerate pair",
            picked.len(),
            spectra::EDGE_TOL,
            alpha
        )));
    }
    let mode = analytic_edge_mode(params, alpha, eta)?;
    let psi = mode.to_state();
    let psi = &psi / C64::new(vec_norm(&psi), 0.0);

    let columns: Vec<Array1<C64>> = picked.iter().map(|&j| modes.column(j).to_owned()).collect();
    let fidelity = orthonormal_basis(&columns)
        .iter()
        .map(|q| q.iter().zip(psi.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr())
        .sum();

    let u: Array2<C64> = build_floquet(params, Frame::Standard)?.into_array();
    let lam = C64::new(alpha.floquet_eigenvalue(), 0.0);
    let eigen_residual = vec_norm(&(u.dot(&psi) - &psi * lam));

    let mut gamma_psi = psi.clone();
    for n in 0..params.n_sites {
        gamma_psi.swap(2 * n, 2 * n + 1);
    }
    let sublattice_residual = vec_norm(&(gamma_psi - &psi * C64::new(eta.value(), 0.0)));

    Ok(FidelityReport {
        alpha,
        eta,
        fidelity,
        eigen_residual,
        sublattice_residual,
        t_tilde: mode.t_tilde,
        numeric_modes: picked.len(),
    })
}

/// Regions of the transfer diagram, labelled by `(S(0), S(π))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    One,
    Two,
    Three,
    Four,
}

impl Region {
    pub fn from_signs(s_zero: i8, s_pi: i8) -> Region {
        match (s_zero > 0, s_pi > 0) {
            (false, false) => Region::One,
            (true, false) => Region::Two,
            (false, true) => Region::Three,
            (true, true) => Region::Four,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Region::One => 1,
            Region::Two => 2,
            Region::Three => 3,
            Region::Four => 4,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Region::One => "①",
            Region::Two => "②",
            Region::Three => "③",
            Region::Four => "④",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopCheck {
    pub loops: LoopClassification,
    /// `inside_zero ⇔ S(0) = +1` and `inside_pi ⇔ S(π) = +1`.
    pub agrees: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferClass {
    pub s_zero: i8,
    pub s_pi: i8,
    pub region: Region,
    pub loop_check: Option<LoopCheck>,
}

/// `S(α) = sgn[T̃_α(+1) T̃_α(−1)]`: `+1` when both α-modes sit at the same boundary.
pub fn transfer_classification(params: &WalkParams) -> Result<TransferClass> {
    let mut signs = [0i8; 2];
    for (slot, alpha) in signs.iter_mut().zip(Sector::BOTH) {
        let (_, plus) = inverse_localization(params, alpha, Eta::Plus)?;
        let (_, minus) = inverse_localization(params, alpha, Eta::Minus)?;
        if plus.abs() < DEGENERATE_TOL || minus.abs() < DEGENERATE_TOL {
            return Err(Error::BoundaryPoint(format!(
                "T̃ vanishes for the E = {alpha} modes at theta1={}, theta2={}, gamma={}",
                params.theta1, params.theta2, params.gamma
            )));
        }
        *slot = if plus * minus > 0.0 { 1 } else { -1 };
    }
    Ok(TransferClass { s_zero: signs[0], s_pi: signs[1], region: Region::from_signs(signs[0], signs[1]), loop_check: None })
}

/// Transfer classification together with the periodic-boundary loop check.
pub fn transfer_classification_with_loops(params: &WalkParams, n_k: usize) -> Result<TransferClass> {
    let mut class = transfer_classification(params)?;
    let loops = spectra::loop_classification(params, n_k)?;
    let agrees = loops.inside_zero == (class.s_zero > 0) && loops.inside_pi == (class.s_pi > 0);
    class.loop_check = Some(LoopCheck { loops, agrees });
    Ok(class)
}

/// θ₂ at which `T̃_α(η)` vanishes for either η, i.e. `|Z_α R₂| = e^{∓2γ}`,
/// folded into `(−π, π]` and sorted. Each η contributes two roots.
pub fn transfer_boundaries(gamma: f64, theta1: f64, alpha: Sector) -> Result<Vec<f64>> {
    let z = LocalizationConstants::new(theta1, 0.0)?.z(alpha).abs();
    let mut roots = Vec::with_capacity(4);
    for eta in Eta::BOTH {
        // |tan(π/4 − θ₂/2)| = c
        let c = (-2.0 * eta.value() * gamma).exp() / z;
        let a = c.atan();
        roots.push(fold_angle(FRAC_PI_2 - 2.0 * a));
        roots.push(fold_angle(FRAC_PI_2 + 2.0 * a));
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}
