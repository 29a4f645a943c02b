//! Dense complex matrices, Haar-random unitaries, permutations, and the
//! fidelity distance.
//!
//! Matrices are stored row-major. Everything here is sized for interferometer
//! work (n up to a few hundred), so the implementations favour clarity and
//! exact determinism over cache tricks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default Frobenius-norm tolerance for accepting a matrix as unitary.
///
/// Loose enough for matrices reassembled from a few hundred two-mode factors,
/// tight enough to catch genuinely non-unitary input.
pub const DEFAULT_UNITARITY_TOL: f64 = 1e-10;

/// A dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::OutOfRange("matrix must be non-empty".into()));
        }
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            for (j, z) in row.iter().enumerate() {
                m.set(i, j, *z);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: rhs.rows });
        }
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.get(i, j) + a * rhs.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ‖A†A − I‖_F; zero exactly when the matrix is unitary.
    pub fn unitarity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut defect = 0.0;
        for i in 0..n {
            for j in 0..n {
                // (A†A)_{ij} = Σ_k conj(A_{ki}) A_{kj}
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    s += self.get(k, i).conj() * self.get(k, j);
                }
                if i == j {
                    s -= C64::new(1.0, 0.0);
                }
                defect += s.norm_sqr();
            }
        }
        defect.sqrt()
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// In-place left multiplication by a 2x2 block acting on rows (a, a+1).
    ///
    /// `z` is row-major: [z00, z01, z10, z11].
    pub(crate) fn apply_left_pair(&mut self, a: usize, z: &[C64; 4]) {
        debug_assert!(a + 1 < self.rows);
        let c = self.cols;
        for j in 0..c {
            let top = self.data[a * c + j];
            let bot = self.data[(a + 1) * c + j];
            self.data[a * c + j] = z[0] * top + z[1] * bot;
            self.data[(a + 1) * c + j] = z[2] * top + z[3] * bot;
        }
    }

    /// In-place right multiplication by a 2x2 block acting on columns (b, b+1).
    pub(crate) fn apply_right_pair(&mut self, b: usize, z: &[C64; 4]) {
        debug_assert!(b + 1 < self.cols);
        let c = self.cols;
        for i in 0..self.rows {
            let left = self.data[i * c + b];
            let right = self.data[i * c + b + 1];
            self.data[i * c + b] = left * z[0] + right * z[2];
            self.data[i * c + b + 1] = left * z[1] + right * z[3];
        }
    }

    /// Scales row `r` by a unit-modulus factor (or any scalar).
    pub(crate) fn scale_row(&mut self, r: usize, s: C64) {
        let c = self.cols;
        for j in 0..c {
            self.data[r * c + j] *= s;
        }
    }

    /// Serializes to the matrix interchange format:
    /// `{"n": …, "re": [[…]], "im": [[…]]}`. Square matrices only.
    pub fn to_json_string(&self) -> Result<String> {
        if !self.is_square() {
            return Err(Error::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let re: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| self.get(i, j).re).collect()).collect();
        let im: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| self.get(i, j).im).collect()).collect();
        Ok(serde_json::to_string_pretty(&MatrixJson { n, re, im })?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: MatrixJson = serde_json::from_str(s)?;
        if raw.re.len() != raw.n || raw.im.len() != raw.n {
            return Err(Error::ShapeMismatch(format!(
                "matrix file declares n = {} but carries {} re rows and {} im rows",
                raw.n,
                raw.re.len(),
                raw.im.len()
            )));
        }
        let mut m = ComplexMatrix::zeros(raw.n, raw.n);
        for i in 0..raw.n {
            if raw.re[i].len() != raw.n || raw.im[i].len() != raw.n {
                return Err(Error::ShapeMismatch(format!("row {i} has the wrong length")));
            }
            for j in 0..raw.n {
                m.set(i, j, C64::new(raw.re[i][j], raw.im[i][j]));
            }
        }
        Ok(m)
    }

    /// CSV with interleaved real/imaginary columns, one matrix row per line.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let mut fields = Vec::with_capacity(2 * self.cols);
            for j in 0..self.cols {
                let z = self.get(i, j);
                fields.push(format!("{}", z.re));
                fields.push(format!("{}", z.im));
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

impl std::fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ComplexMatrix {}x{}", self.rows, self.cols)?;
        if self.rows <= 8 && self.cols <= 8 {
            for i in 0..self.rows {
                for j in 0..self.cols {
                    let z = self.get(i, j);
                    write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

/// A square matrix checked to be unitary within a Frobenius tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    inner: ComplexMatrix,
}

impl UnitaryMatrix {
    /// Validates with [`DEFAULT_UNITARITY_TOL`].
    pub fn try_new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, DEFAULT_UNITARITY_TOL)
    }

    pub fn with_tolerance(m: ComplexMatrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare(m.rows(), m.cols()));
        }
        let defect = m.unitarity_defect();
        if !defect.is_finite() || defect > tol {
            return Err(Error::NotUnitary { defect, tol });
        }
        Ok(Self { inner: m })
    }

    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.inner.get(r, c)
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.inner
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        UnitaryMatrix { inner: self.inner.adjoint() }
    }

    /// Product of two unitaries (stays unitary by construction).
    pub fn mul(&self, rhs: &UnitaryMatrix) -> Result<UnitaryMatrix> {
        Ok(UnitaryMatrix { inner: self.inner.mul(&rhs.inner)? })
    }
}

/// A permutation of `n` labels; `apply(i)` is the image of `i`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn try_new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n {
                return Err(Error::InvalidPermutation(format!(
                    "image {v} out of range for {n} labels"
                )));
            }
            if seen[v] {
                return Err(Error::InvalidPermutation(format!("image {v} repeated")));
            }
            seen[v] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    /// The transposition exchanging `a` and `b`.
    pub fn transposition(n: usize, a: usize, b: usize) -> Result<Self> {
        if a >= n || b >= n {
            return Err(Error::InvalidPermutation(format!(
                "transposition ({a},{b}) out of range for {n} labels"
            )));
        }
        let mut map: Vec<usize> = (0..n).collect();
        map.swap(a, b);
        Ok(Self { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }

    /// Composition `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        Ok(Permutation { map: other.map.iter().map(|&v| self.map[v]).collect() })
    }

    /// 1-based labels for file formats and CLI output.
    pub fn to_one_based(&self) -> Vec<usize> {
        self.map.iter().map(|&v| v + 1).collect()
    }

    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        let map: Vec<usize> = labels
            .iter()
            .map(|&v| {
                v.checked_sub(1).ok_or_else(|| {
                    Error::InvalidPermutation("labels in files are 1-based; found 0".into())
                })
            })
            .collect::<Result<_>>()?;
        Self::try_new(map)
    }

    /// The matrix `P` with `P e_j = e_{p(j)}`.
    pub fn matrix(&self) -> UnitaryMatrix {
        let n = self.map.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (j, &i) in self.map.iter().enumerate() {
            m.set(i, j, C64::new(1.0, 0.0));
        }
        UnitaryMatrix { inner: m }
    }
}

/// The matrix `P` with `P e_j = e_{p(j)}` (column `j` carries a 1 in row `p(j)`).
pub fn permutation_matrix(p: &Permutation) -> UnitaryMatrix {
    p.matrix()
}

/// Draws a Haar-distributed `n x n` unitary.
///
/// An i.i.d. complex Gaussian matrix is orthonormalized column by column
/// (modified Gram-Schmidt with a second pass); this is the unique QR
/// factorization with positive-real diagonal of R, whose Q factor carries the
/// Haar measure. Fully deterministic for a given `(n, seed)`.
pub fn haar_random_unitary(n: usize, seed: u64) -> Result<UnitaryMatrix> {
    if n == 0 {
        return Err(Error::OutOfRange("mode count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<C64>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                })
                .collect()
        })
        .collect();

    for k in 0..n {
        let (head, tail) = cols.split_at_mut(k);
        let ck = &mut tail[0];
        for _ in 0..2 {
            for cj in head.iter() {
                let proj: C64 = cj.iter().zip(ck.iter()).map(|(a, b)| a.conj() * b).sum();
                for (t, a) in ck.iter_mut().zip(cj.iter()) {
                    *t -= proj * a;
                }
            }
        }
        let norm = ck.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::OutOfRange("degenerate Gaussian sample".into()));
        }
        for t in ck.iter_mut() {
            *t /= norm;
        }
    }

    let mut m = ComplexMatrix::zeros(n, n);
    for (c, col) in cols.iter().enumerate() {
        for (r, &z) in col.iter().enumerate() {
            m.set(r, c, z);
        }
    }
    UnitaryMatrix::try_new(m)
}

/// Distance between a target unitary and a realized one, insensitive to output
/// phases: `‖ |U_t U_r†| − I ‖_F` with the modulus taken entrywise.
///
/// Zero iff the two agree up to a diagonal phase on the output side; the raw
/// Frobenius value is reported without any dimension normalization.
pub fn fidelity_distance(target: &UnitaryMatrix, realized: &UnitaryMatrix) -> Result<f64> {
    if target.dim() != realized.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), got: realized.dim() });
    }
    let n = target.dim();
    let m = target.as_matrix().mul(&realized.as_matrix().adjoint())?;
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = m.get(i, j).norm();
            let d = if i == j { a - 1.0 } else { a };
            sum += d * d;
        }
    }
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn multiplication_against_hand_computed_product() {
        let a = ComplexMatrix::from_rows(&[
            vec![c(1.0, 1.0), c(0.0, 2.0)],
            vec![c(3.0, 0.0), c(-1.0, 0.5)],
        ])
        .unwrap();
        let b = ComplexMatrix::from_rows(&[
            vec![c(0.0, 1.0), c(1.0, 0.0)],
            vec![c(2.0, 0.0), c(0.0, -1.0)],
        ])
        .unwrap();
        let p = a.mul(&b).unwrap();
        assert!((p.get(0, 0) - c(-1.0, 5.0)).norm() < 1e-14);
        assert!((p.get(0, 1) - c(3.0, 1.0)).norm() < 1e-14);
        assert!((p.get(1, 0) - c(-2.0, 4.0)).norm() < 1e-14);
        assert!((p.get(1, 1) - c(3.5, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn identity_is_unitary_and_scaled_identity_is_not() {
        let id = ComplexMatrix::identity(4);
        assert!(UnitaryMatrix::try_new(id.clone()).is_ok());
        let mut scaled = id;
        scaled.set(2, 2, c(1.5, 0.0));
        match UnitaryMatrix::try_new(scaled) {
            Err(Error::NotUnitary { defect, .. }) => assert!(defect > 1.0),
            other => panic!("expected NotUnitary, got {other:?}"),
        }
    }

    #[test]
    fn haar_sample_is_unitary_and_seed_deterministic() {
        let u1 = haar_random_unitary(7, 42).unwrap();
        let u2 = haar_random_unitary(7, 42).unwrap();
        let u3 = haar_random_unitary(7, 43).unwrap();
        assert!(u1.as_matrix().unitarity_defect() < 1e-12);
        assert_eq!(u1.as_matrix().max_abs_diff(u2.as_matrix()), 0.0);
        assert!(u1.as_matrix().max_abs_diff(u3.as_matrix()) > 1e-3);
    }

    #[test]
    fn haar_single_mode_is_a_pure_phase() {
        for seed in 0..10 {
            let u = haar_random_unitary(1, seed).unwrap();
            assert!((u.get(0, 0).norm() - 1.0).abs() < 1e-12);
        }
    }

    // For a Haar-random 2x2 unitary the transmission |U00|^2 is uniform on
    // [0, 1]; a Kolmogorov-Smirnov check against that analytic law catches both
    // bias in the sampler and broken phase normalization.
    #[test]
    fn haar_two_mode_transmission_is_uniform() {
        let samples = 100_000usize;
        let mut values: Vec<f64> =
            (0..samples).map(|s| haar_random_unitary(2, s as u64).unwrap().get(0, 0).norm_sqr()).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks = 0.0f64;
        for (i, v) in values.iter().enumerate() {
            let lo = i as f64 / samples as f64;
            let hi = (i + 1) as f64 / samples as f64;
            ks = ks.max((v - lo).abs()).max((v - hi).abs());
        }
        assert!(ks < 0.01, "KS statistic {ks} too large for a uniform transmission law");
    }

    #[test]
    fn fidelity_distance_basics() {
        let u = haar_random_unitary(5, 7).unwrap();
        assert!(fidelity_distance(&u, &u).unwrap() < 1e-12);

        let id = UnitaryMatrix::try_new(ComplexMatrix::identity(2)).unwrap();
        let x = Permutation::transposition(2, 0, 1).unwrap().matrix();
        assert!((fidelity_distance(&id, &x).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn fidelity_distance_ignores_output_phases() {
        let u = haar_random_unitary(6, 11).unwrap();
        let mut phased = u.as_matrix().clone();
        for (k, phi) in [0.3, 1.1, -0.4, 2.9, 0.0, -1.7].iter().enumerate() {
            phased.scale_row(k, C64::from_polar(1.0, *phi));
        }
        let phased = UnitaryMatrix::try_new(phased).unwrap();
        assert!(fidelity_distance(&u, &phased).unwrap() < 1e-12);
    }

    #[test]
    fn permutation_matrix_places_columns() {
        // mapping 0->2, 1->0, 2->1, 3->3
        let p = Permutation::try_new(vec![2, 0, 1, 3]).unwrap();
        let m = p.matrix();
        let expected = [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((m.get(i, j).re - expected[i][j]).abs() < 1e-15);
                assert_eq!(m.get(i, j).im, 0.0);
            }
        }
    }

    #[test]
    fn permutation_rejects_non_bijections() {
        assert!(Permutation::try_new(vec![0, 0, 1]).is_err());
        assert!(Permutation::try_new(vec![0, 3]).is_err());
        assert!(Permutation::from_one_based(&[0, 1]).is_err());
        let p = Permutation::from_one_based(&[2, 3, 1, 4]).unwrap();
        assert_eq!(p.as_slice(), &[1, 2, 0, 3]);
        assert_eq!(p.to_one_based(), vec![2, 3, 1, 4]);
    }

    #[test]
    fn matrix_json_round_trip() {
        let u = haar_random_unitary(3, 5).unwrap();
        let s = u.as_matrix().to_json_string().unwrap();
        let back = ComplexMatrix::from_json_str(&s).unwrap();
        assert_eq!(back.max_abs_diff(u.as_matrix()), 0.0);
        let again = back.to_json_string().unwrap();
        assert_eq!(s, again);
    }

    proptest! {
        #[test]
        fn permutation_matrix_is_orthogonal(n in 1usize..8, seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut map: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                map.swap(i, j);
            }
            let p = Permutation::try_new(map).unwrap();
            let m = p.matrix();
            let prod = m.as_matrix().mul(&m.as_matrix().adjoint()).unwrap();
            prop_assert!(prod.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-15);
            // inverse permutation gives the adjoint matrix
            let inv = p.inverse().matrix();
            prop_assert!(inv.as_matrix().max_abs_diff(&m.as_matrix().adjoint()) < 1e-15);
        }

        #[test]
        fn compose_then_apply_matches_matrix_product(seed in 0u64..200) {
            let n = 5usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let shuffle = |rng: &mut ChaCha8Rng| {
                let mut map: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    let j = rng.gen_range(0..=i);
                    map.swap(i, j);
                }
                Permutation::try_new(map).unwrap()
            };
            let p = shuffle(&mut rng);
            let q = shuffle(&mut rng);
            let composed = p.compose(&q).unwrap();
            let lhs = composed.matrix();
            let rhs = p.matrix().as_matrix().mul(q.matrix().as_matrix()).unwrap();
            prop_assert!(lhs.as_matrix().max_abs_diff(&rhs) < 1e-15);
        }
    }
}
