//! Non-Hermitian eigendecomposition with biorthogonal left/right pairing.
//!
//! Right eigenvectors come from the LAPACK driver behind `ndarray-linalg`;
//! left eigenvectors come from an independent decomposition of `M†`, paired
//! to the right ones by conjugate eigenvalue proximity. Degenerate clusters
//! are re-biorthogonalized with a small solve on the cluster subspace.

use std::f64::consts::PI;

use ndarray::{s, Array2};
use ndarray_linalg::{Eig, Inverse};

use crate::error::{Error, Result};
use crate::C64;

pub type Mat2 = [[C64; 2]; 2];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

pub fn mat2_apply(a: &Mat2, v: &[C64; 2]) -> [C64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// `⟨a|b⟩` for two-component vectors.
#[inline]
pub fn braket2(a: &[C64; 2], b: &[C64; 2]) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// Eigenpairs of a 2×2 matrix. `right[j]` and `left[j]` belong to
/// `values[j]`, with `⟨left[j]|right[j]⟩ = 1` whenever the pair is not defective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eig2 {
    pub values: [C64; 2],
    pub right: [[C64; 2]; 2],
    pub left: [[C64; 2]; 2],
}

impl Eig2 {
    pub fn gap(&self) -> f64 {
        (self.values[0] - self.values[1]).norm()
    }

    pub fn swapped(self) -> Eig2 {
        Eig2 {
            values: [self.values[1], self.values[0]],
            right: [self.right[1], self.right[0]],
            left: [self.left[1], self.left[0]],
        }
    }
}

fn pick_larger(a: [C64; 2], b: [C64; 2]) -> [C64; 2] {
    let na = a[0].norm_sqr() + a[1].norm_sqr();
    let nb = b[0].norm_sqr() + b[1].norm_sqr();
    if na >= nb {
        a
    } else {
        b
    }
}

/// Closed-form eigendecomposition of a 2×2 complex matrix.
pub fn eig2(m: &Mat2) -> Eig2 {
    let [[a, b], [c, d]] = *m;
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = ((a - d) * (a - d) * 0.25 + b * c).sqrt();
    // larger-modulus root first, the partner from the determinant
    let (r1, r2) = (half_tr + disc, half_tr - disc);
    let big = if r1.norm() >= r2.norm() { r1 } else { r2 };
    let small = if big.norm() > 0.0 { det / big } else { C64::new(0.0, 0.0) };
    let values = if r1.norm() >= r2.norm() { [big, small] } else { [small, big] };

    let scale = a.norm() + b.norm() + c.norm() + d.norm();
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let mut right = [[C64::new(0.0, 0.0); 2]; 2];
    let mut left = [[C64::new(0.0, 0.0); 2]; 2];
    for (j, &lam) in values.iter().enumerate() {
        let mut r = pick_larger([b, lam - a], [lam - d, c]);
        // row eigenvector y with y·M = λ y; the left vector is y†
        let y = pick_larger([lam - d, b], [c, lam - a]);
        let mut l = [y[0].conj(), y[1].conj()];
        let nr = (r[0].norm_sqr() + r[1].norm_sqr()).sqrt();
        if nr <= tiny {
            // scalar matrix: any basis works
            r = if j == 0 { [C64::new(1.0, 0.0), C64::new(0.0, 0.0)] } else { [C64::new(0.0, 0.0), C64::new(1.0, 0.0)] };
            l = r;
        } else {
            r = [r[0] / nr, r[1] / nr];
            let nl = (l[0].norm_sqr() + l[1].norm_sqr()).sqrt();
            if nl <= tiny {
                l = r;
            }
        }
        let ov = braket2(&l, &r);
        if ov.norm() > 0.0 {
            let k = ov.conj();
            l = [l[0] / k, l[1] / k];
        }
        right[j] = r;
        left[j] = l;
    }
    Eig2 { values, right, left }
}

/// Biorthogonal eigendecomposition of a dense square matrix.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<C64>,
    /// Unit-norm right eigenvectors as columns.
    pub right: Array2<C64>,
    /// Left eigenvectors as columns, scaled so that `⟨l_j|r_j⟩ = 1`.
    pub left: Array2<C64>,
    /// For each right eigenvalue, the index of its partner in the `M†` decomposition.
    pub pairing: Vec<usize>,
    /// Largest `|λ_j − conj(μ_pairing[j])|` accepted by the pairing.
    pub max_pairing_distance: f64,
    /// Eigenvalue condition numbers `‖l_j‖‖r_j‖ / |⟨l_j|r_j⟩|` (infinite when defective).
    pub condition: Vec<f64>,
    /// `max_{i≠j} |⟨l_i|r_j⟩|` after pairing.
    pub biorthogonality_defect: f64,
}

/// Threshold on the eigenvalue condition number above which a decomposition is
/// reported as ill-conditioned (near an exceptional point).
pub const ILL_CONDITIONED: f64 = 1e3;

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_condition(&self) -> f64 {
        self.condition.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.max_condition() > ILL_CONDITIONED
    }
}

/// Options for [`eig_general_with`].
#[derive(Debug, Clone, Copy)]
pub struct EigOptions {
    /// Eigenvalues closer than `cluster_tol·(1 + |λ|)` are treated as one degenerate cluster.
    pub cluster_tol: f64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions { cluster_tol: 1e-6 }
    }
}

fn check_square(m: &Array2<C64>) -> Result<()> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::InvalidParameter(format!("eigendecomposition needs a square matrix, got {r}x{c}")));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn lapack_eig(m: &Array2<C64>) -> Result<(Vec<C64>, Array2<C64>)> {
    let (vals, vecs) = m
        .eig()
        .map_err(|e| Error::Linalg(format!("eigensolver did not converge: {e}")))?;
    let mut vecs = vecs;
    for mut col in vecs.columns_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.mapv_inplace(|z| z / norm);
        }
    }
    Ok((vals.to_vec(), vecs))
}

/// Eigenvalues and unit-norm right eigenvectors only.
pub fn eig_right(m: &Array2<C64>) -> Result<(Vec<C64>, Array2<C64>)> {
    check_square(m)?;
    if m.nrows() == 0 {
        return Ok((Vec::new(), Array2::zeros((0, 0))));
    }
    lapack_eig(m)
}

pub fn eig_general(m: &Array2<C64>) -> Result<EigenSystem> {
    eig_general_with(m, EigOptions::default())
}

pub fn eig_general_with(m: &Array2<C64>, opts: EigOptions) -> Result<EigenSystem> {
    check_square(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(EigenSystem {
            values: Vec::new(),
            right: Array2::zeros((0, 0)),
            left: Array2::zeros((0, 0)),
            pairing: Vec::new(),
            max_pairing_distance: 0.0,
            condition: Vec::new(),
            biorthogonality_defect: 0.0,
        });
    }
    let (values, right) = lapack_eig(m)?;
    let adj = m.t().mapv(|z| z.conj());
    let (adj_values, adj_vecs) = lapack_eig(&adj)?;

    let (pairing, max_pairing_distance) = pair_by_conjugate(&values, &adj_values);
    let mut left = Array2::zeros((n, n));
    for (j, &k) in pairing.iter().enumerate() {
        left.column_mut(j).assign(&adj_vecs.column(k));
    }

    let mut condition = vec![0.0; n];
    for cluster in clusters(&values, opts.cluster_tol) {
        if cluster.len() == 1 {
            let j = cluster[0];
            let ov: C64 = left.column(j).iter().zip(right.column(j).iter()).map(|(l, r)| l.conj() * r).sum();
            if ov.norm() <= f64::MIN_POSITIVE {
                condition[j] = f64::INFINITY;
                continue;
            }
            let k = ov.conj();
            left.column_mut(j).mapv_inplace(|z| z / k);
            condition[j] = left.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        } else {
            rebiorthogonalize(&mut left, &right, &cluster, &mut condition);
        }
    }

    let gram = left.t().mapv(|z| z.conj()).dot(&right);
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                defect = defect.max(gram[[i, j]].norm());
            }
        }
    }

    Ok(EigenSystem { values, right, left, pairing, max_pairing_distance, condition, biorthogonality_defect: defect })
}

/// Greedy global matching of `λ_i` to `conj(μ_k)`, closest pairs first. Each
/// left index is used once; collisions fall through to the next-closest free
/// partner.
fn pair_by_conjugate(values: &[C64], adj_values: &[C64]) -> (Vec<usize>, f64) {
    let n = values.len();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, v) in values.iter().enumerate() {
        for (k, w) in adj_values.iter().enumerate() {
            candidates.push(((v - w.conj()).norm(), i, k));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pairing = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut remaining = n;
    let mut worst: f64 = 0.0;
    for (dist, i, k) in candidates {
        if remaining == 0 {
            break;
        }
        if pairing[i] == usize::MAX && !taken[k] {
            pairing[i] = k;
            taken[k] = true;
            remaining -= 1;
            worst = worst.max(dist);
        }
    }
    (pairing, worst)
}

/// Single-linkage clusters of nearly equal eigenvalues.
pub fn clusters(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        let mut i = i;
        while label[i] != r {
            let next = label[i];
            label[i] = r;
            i = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let scale = 1.0 + values[i].norm().max(values[j].norm());
            if (values[i] - values[j]).norm() < tol * scale {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut label, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Replace the left block `L_c` of a degenerate cluster by `L_c (L_c† R_c)^{-†}`
/// so that `L_c† R_c = I` on the cluster.
fn rebiorthogonalize(left: &mut Array2<C64>, right: &Array2<C64>, cluster: &[usize], condition: &mut [f64]) {
    let n = right.nrows();
    let k = cluster.len();
    let mut lc = Array2::zeros((n, k));
    let mut rc = Array2::zeros((n, k));
    for (c, &j) in cluster.iter().enumerate() {
        lc.column_mut(c).assign(&left.column(j));
        rc.column_mut(c).assign(&right.column(j));
    }
    let overlap = lc.t().mapv(|z: C64| z.conj()).dot(&rc);
    match overlap.inv() {
        Ok(inv) if inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
            let new_l = lc.dot(&inv.t().mapv(|z| z.conj()));
            for (c, &j) in cluster.iter().enumerate() {
                left.column_mut(j).assign(&new_l.slice(s![.., c]));
                condition[j] = left.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            }
        }
        _ => {
            for &j in cluster {
                condition[j] = f64::INFINITY;
            }
        }
    }
}

/// Quasienergy `E = i ln λ` on the strip `Re E ∈ (−π, π]`.
pub fn quasienergy_from_eigenvalue(lambda: C64) -> Result<C64> {
    if lambda.norm() == 0.0 || !lambda.norm().is_finite() {
        return Err(Error::InvalidParameter(format!("quasienergy undefined for eigenvalue {lambda}")));
    }
    // i ln(r e^{iφ}) = −φ + i ln r
    let mut re = -lambda.arg();
    if re <= -PI {
        re += 2.0 * PI;
    }
    Ok(C64::new(re, lambda.norm().ln()))
}

/// `λ = e^{−iE}`.
pub fn eigenvalue_from_quasienergy(energy: C64) -> C64 {
    (C64::new(0.0, -1.0) * energy).exp()
}

/// Distance between two quasienergies with the real part taken modulo 2π.
pub fn quasienergy_distance(a: C64, b: C64) -> f64 {
    let mut dre = (a.re - b.re).rem_euclid(2.0 * PI);
    if dre > PI {
        dre -= 2.0 * PI;
    }
    dre.hypot(a.im - b.im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_matrix() {
        let m = array![[c(2.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 3.0)]];
        let es = eig_general(&m).unwrap();
        let mut vals = es.values.clone();
        vals.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((vals[0] - c(2.0, 0.0)).norm() < 1e-14);
        assert!((vals[1] - c(0.0, 3.0)).norm() < 1e-14);
        for j in 0..2 {
            let col = es.right.column(j);
            let k = if (es.values[j] - c(2.0, 0.0)).norm() < 1e-9 { 0 } else { 1 };
            assert!((col[k].norm() - 1.0).abs() < 1e-14);
            assert!(col[1 - k].norm() < 1e-14);
        }
        assert!(es.biorthogonality_defect < 1e-14);
    }

    #[test]
    fn near_defective_matrix_is_flagged() {
        let eps: f64 = 1e-10;
        let m = array![[c(1.0, 0.0), c(1.0, 0.0)], [c(eps, 0.0), c(1.0, 0.0)]];
        let es = eig_general(&m).unwrap();
        // closed-form roots 1 ± sqrt(eps)
        let mut vals: Vec<f64> = es.values.iter().map(|z| z.re).collect();
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] - (1.0 - eps.sqrt())).abs() < 1e-9);
        assert!((vals[1] - (1.0 + eps.sqrt())).abs() < 1e-9);
        assert!(es.is_ill_conditioned(), "condition {}", es.max_condition());
    }

    #[test]
    fn non_square_rejected() {
        let m = Array2::<C64>::zeros((2, 3));
        assert!(matches!(eig_general(&m), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn degenerate_cluster_is_rebiorthogonalized() {
        // diag(1, 1, 2) rotated by a non-unitary similarity
        let p = array![
            [c(1.0, 0.0), c(0.3, 0.1), c(0.0, 0.2)],
            [c(0.2, 0.0), c(1.0, 0.0), c(0.5, 0.0)],
            [c(0.0, 0.0), c(0.1, -0.3), c(1.0, 0.0)]
        ];
        let d = array![
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]
        ];
        let m = p.dot(&d).dot(&p.inv().unwrap());
        let es = eig_general(&m).unwrap();
        assert!(es.biorthogonality_defect < 1e-10, "{}", es.biorthogonality_defect);
        let gram = es.left.t().mapv(|z| z.conj()).dot(&es.right);
        for j in 0..3 {
            assert!((gram[[j, j]] - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn eig2_matches_definition() {
        let m: Mat2 = [[c(0.3, 1.0), c(-2.0, 0.5)], [c(0.7, -0.1), c(1.5, 0.2)]];
        let e = eig2(&m);
        let adj = mat2_adjoint(&m);
        for j in 0..2 {
            let mr = mat2_apply(&m, &e.right[j]);
            let al = mat2_apply(&adj, &e.left[j]);
            for i in 0..2 {
                assert!((mr[i] - e.values[j] * e.right[j][i]).norm() < 1e-13);
                assert!((al[i] - e.values[j].conj() * e.left[j][i]).norm() < 1e-13);
            }
            assert!((braket2(&e.left[j], &e.right[j]) - 1.0).norm() < 1e-13);
        }
        assert!(braket2(&e.left[0], &e.right[1]).norm() < 1e-13);
    }

    #[test]
    fn eig2_scalar_matrix() {
        let m: Mat2 = [[c(2.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(2.0, 0.0)]];
        let e = eig2(&m);
        assert_eq!(e.gap(), 0.0);
        assert!((braket2(&e.left[0], &e.right[0]) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn quasienergy_branch() {
        assert_eq!(quasienergy_from_eigenvalue(c(1.0, 0.0)).unwrap(), c(0.0, 0.0));
        let e = quasienergy_from_eigenvalue(c(-1.0, 0.0)).unwrap();
        assert!((e - c(PI, 0.0)).norm() < 1e-15);
        let e = quasienergy_from_eigenvalue(c(-1.0, -0.0)).unwrap();
        assert!((e.re - PI).abs() < 1e-15);
        let lam = C64::from_polar(0.3f64.exp(), -0.5);
        let e = quasienergy_from_eigenvalue(lam).unwrap();
        assert!((e - c(0.5, 0.3)).norm() < 1e-14);
        assert!(quasienergy_from_eigenvalue(c(0.0, 0.0)).is_err());
    }

    #[test]
    fn periodic_distance() {
        assert!(quasienergy_distance(c(-PI + 1e-9, 0.0), c(PI, 0.0)) < 2e-9);
        assert!((quasienergy_distance(c(0.1, 0.0), c(-0.1, 0.0)) - 0.2).abs() < 1e-15);
    }
}
