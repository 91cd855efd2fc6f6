//! Dense complex linear algebra: the numeric substrate for channels, frames,
//! and measurement operators.
//!
//! Matrices are row-major `Complex64` buffers. The Hermitian eigensolver is a
//! cyclic Jacobi iteration, which keeps the eigenvector columns orthonormal by
//! construction and needs no balancing or pivot heuristics at the small
//! dimensions used here.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerances for the eigensolver and PSD operations.
///
/// The defaults are used everywhere unless a caller supplies its own record.
#[derive(Debug, Clone, Copy)]
pub struct NumericSettings {
    /// Relative Frobenius tolerance for accepting an input as Hermitian.
    pub hermiticity_tol: f64,
    /// Jacobi stops once the off-diagonal Frobenius norm drops below this
    /// factor times the input norm.
    pub jacobi_offdiag_factor: f64,
    /// Maximum number of full Jacobi sweeps before reporting failure.
    pub jacobi_max_sweeps: usize,
    /// Eigenvalues in [-psd_clamp, 0) are treated as rounding noise and
    /// clamped to zero; anything below -psd_clamp is genuine negativity.
    pub psd_clamp: f64,
}

impl Default for NumericSettings {
    fn default() -> Self {
        NumericSettings {
            hermiticity_tol: 1e-10,
            jacobi_offdiag_factor: 1e-13,
            jacobi_max_sweeps: 100,
            psd_clamp: 1e-10,
        }
    }
}

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting size mismatches and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {rows}x{cols} = {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Convenience constructor from (re, im) pairs in row-major order.
    pub fn from_pairs(rows: usize, cols: usize, pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            pairs.iter().map(|&(re, im)| Complex64::new(re, im)).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    /// Matrix product; errors on inner-dimension mismatch.
    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &ComplexMatrix,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<ComplexMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "elementwise op: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, factor: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise distance to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Kronecker product: `(a ⊗ b)[(i*b.rows + k), (j*b.cols + l)] = a[i,j] b[k,l]`.
    pub fn kron(&self, other: &ComplexMatrix) -> ComplexMatrix {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = ComplexMatrix::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.data[i * self.cols + j];
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.data[(i * other.rows + k) * cols + (j * other.cols + l)] =
                            a * other.data[k * other.cols + l];
                    }
                }
            }
        }
        out
    }

    /// Frobenius distance from the nearest Hermitian matrix, relative check.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let diff = self.sub(&self.dagger()).expect("square");
        diff.frobenius_norm() <= tol * (1.0 + self.frobenius_norm())
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "apply: {}x{} to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self.data[i * self.cols + j] * v[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }
}

/// ⟨a|b⟩ with conjugation on the left argument.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Outer product |a⟩⟨b|.
pub fn outer(a: &[Complex64], b: &[Complex64]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.len(), b.len());
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out.set(i, j, x * y.conj());
        }
    }
    out
}

/// tr(ab) without forming the product; shapes must be transposes of each
/// other.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    assert_eq!(a.cols(), b.rows());
    assert_eq!(a.rows(), b.cols());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            acc += a.get(i, j) * b.get(j, i);
        }
    }
    acc
}

/// ‖ab − ba‖_F for equal square shapes.
pub fn commutator_norm(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() || a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "commutator: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let ab = a.matmul(b)?;
    let ba = b.matmul(a)?;
    Ok(ab.sub(&ba)?.frobenius_norm())
}

/// Eigensystem of a Hermitian matrix: ascending real eigenvalues and
/// orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianEigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigenDecomposition {
    /// V diag(λ) V†.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let d = ComplexMatrix::from_real_diag(&self.eigenvalues);
        v.matmul(&d).unwrap().matmul(&v.dagger()).unwrap()
    }
}

/// Hermitian eigendecomposition with default settings.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<HermitianEigenDecomposition> {
    eig_hermitian_with(a, &NumericSettings::default())
}

/// Hermitian eigendecomposition by cyclic Jacobi rotations.
///
/// The input is symmetrized to (a + a†)/2 before solving; grossly
/// non-Hermitian inputs are rejected. Each eigenvector is phase-fixed so its
/// largest-modulus entry is real and positive, which keeps columns stable when
/// the decomposition is tracked along a parameter curve.
pub fn eig_hermitian_with(
    a: &ComplexMatrix,
    settings: &NumericSettings,
) -> Result<HermitianEigenDecomposition> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "eig_hermitian: {}x{} is not square",
            a.rows(),
            a.cols()
        )));
    }
    let herm_gap = a.sub(&a.dagger())?.frobenius_norm();
    if herm_gap > settings.hermiticity_tol * (1.0 + a.frobenius_norm()) {
        return Err(Error::NotHermitian(herm_gap));
    }

    let n = a.rows();
    // Symmetrize so the iteration sees an exactly Hermitian matrix.
    let mut m = a.add(&a.dagger())?.scale(Complex64::new(0.5, 0.0));
    let mut v = ComplexMatrix::identity(n);
    let norm_a = m.frobenius_norm();
    let target = settings.jacobi_offdiag_factor * norm_a;

    let off_norm = |m: &ComplexMatrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += m.get(i, j).norm_sqr();
                }
            }
        }
        acc.sqrt()
    };

    let mut converged = n <= 1 || off_norm(&m) <= target;
    for _ in 0..settings.jacobi_max_sweeps {
        if converged {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let gamma = m.get(p, q);
                let gnorm = gamma.norm();
                // Subnormal pivots would overflow tau; they are far below
                // any convergence target anyway.
                if gnorm < 1e-300 {
                    continue;
                }
                let alpha = m.get(p, p).re;
                let beta = m.get(q, q).re;
                let phase = gamma / gnorm;
                let tau = (beta - alpha) / (2.0 * gnorm);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Plane rotation g: g_pp = c, g_pq = s·phase,
                // g_qp = -s·conj(phase), g_qq = c; apply m <- g† m g, v <- v g.
                let gpq = phase * s;
                let gqp = -phase.conj() * s;
                for j in 0..n {
                    let mpj = m.get(p, j);
                    let mqj = m.get(q, j);
                    m.set(p, j, mpj * c + mqj * gqp.conj());
                    m.set(q, j, mpj * gpq.conj() + mqj * c);
                }
                for i in 0..n {
                    let mip = m.get(i, p);
                    let miq = m.get(i, q);
                    m.set(i, p, mip * c + miq * gqp);
                    m.set(i, q, mip * gpq + miq * c);
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, vip * c + viq * gqp);
                    v.set(i, q, vip * gpq + viq * c);
                }
                // Rounding can leave a tiny residue where an exact zero is due.
                m.set(p, q, Complex64::new(0.0, 0.0));
                m.set(q, p, Complex64::new(0.0, 0.0));
            }
        }
        converged = off_norm(&m) <= target;
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Jacobi eigensolver did not converge in {} sweeps (off-diagonal {:.3e}, target {:.3e})",
            settings.jacobi_max_sweeps,
            off_norm(&m),
            target
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let eigvals: Vec<f64> = (0..n).map(|i| m.get(i, i).re).collect();
    order.sort_by(|&i, &j| eigvals[i].partial_cmp(&eigvals[j]).unwrap());

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(eigvals[src]);
        let mut col = v.column(src);
        phase_fix(&mut col);
        for i in 0..n {
            vectors.set(i, dst, col[i]);
        }
    }

    Ok(HermitianEigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

/// Rotates a vector's global phase so its largest-modulus entry is real and
/// positive. Ties go to the earliest index.
pub fn phase_fix(v: &mut [Complex64]) {
    let mut best = 0;
    let mut best_norm = 0.0;
    for (i, z) in v.iter().enumerate() {
        let nz = z.norm();
        if nz > best_norm + 1e-15 {
            best_norm = nz;
            best = i;
        }
    }
    if best_norm == 0.0 {
        return;
    }
    let phase = v[best] / best_norm;
    let correction = phase.conj();
    for z in v.iter_mut() {
        *z *= correction;
    }
}

/// Principal square root of a Hermitian PSD matrix with default settings.
pub fn psd_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    psd_sqrt_with(a, &NumericSettings::default())
}

/// Principal square root via eigendecomposition. Eigenvalues below
/// `-psd_clamp` are an error; tiny negatives are clamped to zero.
pub fn psd_sqrt_with(a: &ComplexMatrix, settings: &NumericSettings) -> Result<ComplexMatrix> {
    let eig = eig_hermitian_with(a, settings)?;
    let mut roots = Vec::with_capacity(eig.eigenvalues.len());
    for &lambda in &eig.eigenvalues {
        if lambda < -settings.psd_clamp {
            return Err(Error::NotPsd(lambda));
        }
        roots.push(lambda.max(0.0).sqrt());
    }
    let v = &eig.eigenvectors;
    let b = v
        .matmul(&ComplexMatrix::from_real_diag(&roots))?
        .matmul(&v.dagger())?;
    // Symmetrize away rounding in the two matrix products.
    b.add(&b.dagger()).map(|s| s.scale(Complex64::new(0.5, 0.0)))
}
