//! Real-space and momentum-space operators of the two-step nonunitary walk
//!
//! ```text
//! U  = C(θ₂/2) G(γ) S C(θ₁) S G(γ) C(θ₂/2)      standard frame
//! U' = C(θ₁/2) S G(γ) C(θ₂) G(γ) S C(θ₁/2)      shifted frame
//! ```
//!
//! The rightmost factor acts first. Real-space matrices use a site-major,
//! coin-minor basis: `index(n, c) = 2(n - 1) + c` for sites `n = 1..=N` and
//! coin `c = 0` (|H⟩) or `c = 1` (|V⟩).

use ndarray::Array2;
use ndarray_linalg::Inverse;
use serde::{Deserialize, Serialize};

use crate::eigen::{mat2_adjoint, mat2_mul, Mat2};
use crate::error::{Error, Result};
use crate::C64;

/// Boundary condition of the finite chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Periodic: sites 1 and N are joined.
    Pbc,
    /// Fixed: the polarization flips at both ends.
    Fbc,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Pbc => "pbc",
            Boundary::Fbc => "fbc",
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbc" | "periodic" => Ok(Boundary::Pbc),
            "fbc" | "fixed" => Ok(Boundary::Fbc),
            other => Err(Error::InvalidParameter(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Time frame in which the Floquet operator is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Standard,
    Shifted,
}

/// Coin basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coin {
    H = 0,
    V = 1,
}

/// Full parameter record of the walk.
///
/// Angles are in radians and taken modulo 2π. `n_sites` must be even and at
/// least 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub theta1: f64,
    pub theta2: f64,
    pub gamma: f64,
    pub n_sites: usize,
    pub boundary: Boundary,
}

impl WalkParams {
    pub fn new(theta1: f64, theta2: f64, gamma: f64, n_sites: usize, boundary: Boundary) -> Result<Self> {
        let params = WalkParams { theta1, theta2, gamma, n_sites, boundary };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta1.is_finite() && self.theta2.is_finite()) {
            return Err(Error::InvalidParameter("coin angles must be finite".into()));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidParameter("gamma must be finite".into()));
        }
        if self.n_sites < 4 || self.n_sites % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "n_sites must be an even integer >= 4, got {}",
                self.n_sites
            )));
        }
        Ok(())
    }

    pub fn with_angles(self, theta1: f64, theta2: f64) -> Self {
        WalkParams { theta1, theta2, ..self }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        WalkParams { gamma, ..self }
    }

    pub fn with_boundary(self, boundary: Boundary) -> Self {
        WalkParams { boundary, ..self }
    }
}

/// Dense 2N×2N operator in the site-major, coin-minor basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    n_sites: usize,
    data: Array2<C64>,
}

impl OperatorMatrix {
    pub fn from_array(n_sites: usize, data: Array2<C64>) -> Result<Self> {
        if data.dim() != (2 * n_sites, 2 * n_sites) {
            return Err(Error::InvalidParameter(format!(
                "operator of shape {:?} does not match {} sites",
                data.dim(),
                n_sites
            )));
        }
        Ok(OperatorMatrix { n_sites, data })
    }

    pub fn identity(n_sites: usize) -> Self {
        OperatorMatrix { n_sites, data: Array2::eye(2 * n_sites) }
    }

    /// Basis index of `(site, coin)`, sites counted from 1.
    #[inline]
    pub fn index(site: usize, coin: Coin) -> usize {
        2 * (site - 1) + coin as usize
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        2 * self.n_sites
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<C64> {
        self.data
    }

    pub fn get(&self, row: (usize, Coin), col: (usize, Coin)) -> C64 {
        self.data[[Self::index(row.0, row.1), Self::index(col.0, col.1)]]
    }

    /// Matrix product `self · rhs`.
    pub fn dot(&self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.n_sites, rhs.n_sites, "operator size mismatch");
        OperatorMatrix { n_sites: self.n_sites, data: self.data.dot(&rhs.data) }
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix { n_sites: self.n_sites, data: self.data.t().mapv(|z| z.conj()) }
    }

    /// Largest absolute entry of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Array2<C64>) -> f64 {
        max_abs_diff(&self.data, rhs)
    }
}

pub(crate) fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn block_diagonal(n_sites: usize, block: Mat2) -> OperatorMatrix {
    let mut data = Array2::zeros((2 * n_sites, 2 * n_sites));
    for n in 0..n_sites {
        for r in 0..2 {
            for c in 0..2 {
                data[[2 * n + r, 2 * n + c]] = block[r][c];
            }
        }
    }
    OperatorMatrix { n_sites, data }
}

pub(crate) fn coin_block(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]]
}

pub(crate) fn gain_loss_block(gamma: f64) -> Mat2 {
    [[C64::new(gamma.exp(), 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new((-gamma).exp(), 0.0)]]
}

/// Coin rotation `⊕ₙ [[cos θ, −sin θ], [sin θ, cos θ]]`.
pub fn build_coin(theta: f64, n_sites: usize) -> Result<OperatorMatrix> {
    if n_sites < 1 {
        return Err(Error::InvalidParameter("coin operator needs at least one site".into()));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidParameter("coin angle must be finite".into()));
    }
    Ok(block_diagonal(n_sites, coin_block(theta)))
}

/// Gain/loss operator `⊕ₙ diag(e^γ, e^−γ)`.
pub fn build_gain_loss(gamma: f64, n_sites: usize) -> Result<OperatorMatrix> {
    if n_sites < 1 {
        return Err(Error::InvalidParameter("gain/loss operator needs at least one site".into()));
    }
    if !gamma.is_finite() {
        return Err(Error::InvalidParameter("gamma must be finite".into()));
    }
    Ok(block_diagonal(n_sites, gain_loss_block(gamma)))
}

/// Coin-conditioned shift: |H⟩ hops right, |V⟩ hops left.
///
/// Periodic boundaries wrap the hops around the ring. Fixed boundaries flip
/// the polarization in place at the ends: `(1,V) → (1,H)` and `(N,H) → (N,V)`.
pub fn build_shift(n_sites: usize, boundary: Boundary) -> Result<OperatorMatrix> {
    if n_sites < 2 {
        return Err(Error::InvalidParameter(format!("shift operator needs at least 2 sites, got {n_sites}")));
    }
    let idx = OperatorMatrix::index;
    let one = C64::new(1.0, 0.0);
    let mut data = Array2::zeros((2 * n_sites, 2 * n_sites));
    for n in 1..n_sites {
        data[[idx(n + 1, Coin::H), idx(n, Coin::H)]] = one;
        data[[idx(n, Coin::V), idx(n + 1, Coin::V)]] = one;
    }
    match boundary {
        Boundary::Pbc => {
            data[[idx(1, Coin::H), idx(n_sites, Coin::H)]] = one;
            data[[idx(n_sites, Coin::V), idx(1, Coin::V)]] = one;
        }
        Boundary::Fbc => {
            data[[idx(1, Coin::H), idx(1, Coin::V)]] = one;
            data[[idx(n_sites, Coin::V), idx(n_sites, Coin::H)]] = one;
        }
    }
    Ok(OperatorMatrix { n_sites, data })
}

/// Floquet operator of one period in the requested time frame.
pub fn build_floquet(params: &WalkParams, frame: Frame) -> Result<OperatorMatrix> {
    params.validate()?;
    let n = params.n_sites;
    let shift = build_shift(n, params.boundary)?;
    let gain = build_gain_loss(params.gamma, n)?;
    let factors = match frame {
        Frame::Standard => [
            build_coin(params.theta2 / 2.0, n)?,
            gain.clone(),
            shift.clone(),
            build_coin(params.theta1, n)?,
            shift,
            gain,
            build_coin(params.theta2 / 2.0, n)?,
        ],
        Frame::Shifted => [
            build_coin(params.theta1 / 2.0, n)?,
            shift.clone(),
            gain.clone(),
            build_coin(params.theta2, n)?,
            gain,
            shift,
            build_coin(params.theta1 / 2.0, n)?,
        ],
    };
    let mut iter = factors.into_iter();
    let first = iter.next().expect("seven factors");
    Ok(iter.fold(first, |acc, f| acc.dot(&f)))
}

/// Half-trace of the Bloch block, `D = cos[2(p + i(γ − δ))] cos θ₁ cos θ₂ − sin θ₁ sin θ₂`,
/// where δ is the contour deformation (`β = e^δ e^{ip}`).
///
/// With δ = 0 this is the Bloch dispersion including the gain/loss shift;
/// with δ = γ the dependence on γ cancels and `D` is real.
pub fn bloch_dispersion(params: &WalkParams, p: f64, deformation: f64) -> C64 {
    let (s1, c1) = params.theta1.sin_cos();
    let (s2, c2) = params.theta2.sin_cos();
    let arg = C64::new(2.0 * p, 2.0 * (params.gamma - deformation));
    arg.cos() * (c1 * c2) - s1 * s2
}

/// 2×2 momentum-space Floquet block on the contour `β = e^δ e^{ip}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochBlock {
    pub momentum: f64,
    pub deformation: f64,
    pub frame: Frame,
    pub entries: Mat2,
}

impl BlochBlock {
    pub fn trace(&self) -> C64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn det(&self) -> C64 {
        self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0]
    }
}

const TRACE_CONTRACT_TOL: f64 = 1e-10;

/// Standard-frame Bloch block.
pub fn build_bloch_block(params: &WalkParams, p: f64, deformation: f64) -> Result<BlochBlock> {
    build_bloch_block_in_frame(params, Frame::Standard, p, deformation)
}

/// Bloch block in either frame.
///
/// A plane wave `ψₙ ∝ βⁿ` turns the shift into `diag(β⁻¹, β)`. The half-trace
/// must reproduce [`bloch_dispersion`]; a mismatch is reported as a
/// consistency error.
pub fn build_bloch_block_in_frame(params: &WalkParams, frame: Frame, p: f64, deformation: f64) -> Result<BlochBlock> {
    let beta = C64::from_polar(deformation.exp(), p);
    let zero = C64::new(0.0, 0.0);
    let shift = [[beta.inv(), zero], [zero, beta]];
    let gain = gain_loss_block(params.gamma);
    let entries = match frame {
        Frame::Standard => {
            let half = coin_block(params.theta2 / 2.0);
            let inner = mat2_mul(&mat2_mul(&shift, &coin_block(params.theta1)), &shift);
            let mid = mat2_mul(&mat2_mul(&gain, &inner), &gain);
            mat2_mul(&mat2_mul(&half, &mid), &half)
        }
        Frame::Shifted => {
            let half = coin_block(params.theta1 / 2.0);
            let inner = mat2_mul(&mat2_mul(&gain, &coin_block(params.theta2)), &gain);
            let mid = mat2_mul(&mat2_mul(&shift, &inner), &shift);
            mat2_mul(&mat2_mul(&half, &mid), &half)
        }
    };
    let block = BlochBlock { momentum: p, deformation, frame, entries };
    let expected = bloch_dispersion(params, p, deformation);
    let mismatch = (block.trace() * 0.5 - expected).norm();
    if !(mismatch <= TRACE_CONTRACT_TOL * (1.0 + expected.norm())) {
        return Err(Error::Consistency(format!(
            "Bloch block half-trace differs from dispersion by {mismatch:.3e} at p = {p}"
        )));
    }
    Ok(block)
}

/// Max-norm residuals of the three symmetry relations of the walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    /// `‖Γ U Γ⁻¹ − U⁻¹‖_max` with `Γ = ⊕ₙ σ_x`.
    pub sublattice: f64,
    /// `‖T U* T⁻¹ − U⁻¹‖_max` with `T = ⊕ₙ σ_x`.
    pub time_reversal: f64,
    /// `‖Ξ U* Ξ⁻¹ − U‖_max` with `Ξ` the identity, i.e. a test that `U` is real.
    pub particle_hole: f64,
}

/// `Γ A Γ` for `Γ = ⊕ₙ σ_x`: swaps the coin label of every row and column.
pub fn conjugate_by_sublattice(a: &Array2<C64>) -> Array2<C64> {
    Array2::from_shape_fn(a.dim(), |(i, j)| a[[i ^ 1, j ^ 1]])
}

pub fn check_symmetries(u: &OperatorMatrix) -> Result<SymmetryReport> {
    let a = u.as_array();
    let inv = a.inv().map_err(|e| Error::Singular(e.to_string()))?;
    let eye: Array2<C64> = Array2::eye(u.dim());
    let check = max_abs_diff(&a.dot(&inv), &eye);
    if !check.is_finite() || check > 1e-6 {
        return Err(Error::Singular(format!("inverse residual {check:.3e}")));
    }
    let conj = a.mapv(|z| z.conj());
    Ok(SymmetryReport {
        sublattice: max_abs_diff(&conjugate_by_sublattice(a), &inv),
        time_reversal: max_abs_diff(&conjugate_by_sublattice(&conj), &inv),
        particle_hole: max_abs_diff(&conj, a),
    })
}

/// Adjoint of a Bloch block, used for left eigenvectors.
pub fn bloch_adjoint(block: &BlochBlock) -> Mat2 {
    mat2_adjoint(&block.entries)
}
