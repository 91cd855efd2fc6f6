//! Canonical Kraus decompositions relative to a pure input state.
//!
//! For a pure input |ψ₀⟩ the Gram matrix G_jk = ⟨ψ₀|Υ_j†Υ_k|ψ₀⟩ is Hermitian
//! PSD; diagonalizing it as G = V diag(p) V† and remixing the source operators
//! into Ω_k = Σ_j V_jk Υ_j yields a decomposition with
//! tr(Ω_j†Ω_k ρ₀) = δ_jk p_k. The nonzero p_k are the eigenvalues of the
//! output state, and |f_k⟩ = Ω_k|ψ₀⟩/√p_k its eigenvectors, giving a local
//! coordinate frame along the output curve.
//!
//! Tracking V smoothly in θ (column matching by maximal overlap plus phase
//! alignment) gives a well-defined V'(θ) by finite differences, which is what
//! the frame derivatives Ω_k' = Σ_j (V_jk' Υ_j + V_jk Υ_j') are built from.

use num_complex::Complex64;

use crate::channel::{ParamKrausFamily, QuantumState, DERIV_STEP};
use crate::error::{Error, Result};
use crate::linalg::{commutator_norm, eig_hermitian, inner, ComplexMatrix};

/// Weights at or below this floor are treated as vanishing Kraus directions:
/// they stay in the decomposition but get no normalized vector.
pub const P_FLOOR: f64 = 1e-12;

/// Off-diagonal Gram weight allowed before a set is rejected as non-canonical.
pub const GRAM_OFFDIAG_TOL: f64 = 1e-9;

/// Two column-overlap candidates closer than this are ambiguous.
pub const DEGENERACY_OVERLAP_TOL: f64 = 1e-6;

/// Tolerance for each quasi-classicality witness.
pub const QC_TOL: f64 = 1e-8;

/// Nonzero weights closer than this are flagged as degenerate.
pub const DEGENERATE_WEIGHT_TOL: f64 = 1e-9;

/// Canonical decomposition at one parameter value.
#[derive(Debug, Clone)]
pub struct CanonicalFrame {
    pub theta: f64,
    /// Canonical operators Ω_k, ordered by descending weight at the first
    /// grid point and held fixed along a curve by overlap matching.
    pub kraus_ops: Vec<ComplexMatrix>,
    /// Ω_k'(θ), combining the source derivatives with the tracked remix
    /// derivative.
    pub kraus_derivs: Vec<ComplexMatrix>,
    /// Weights p_k = tr(Ω_k†Ω_k ρ₀) ≥ 0.
    pub probabilities: Vec<f64>,
    /// |e_k⟩ = Ω_k|ψ₀⟩.
    pub unnormalized_vectors: Vec<Vec<Complex64>>,
    /// |f_k⟩ = |e_k⟩/√p_k, present only where p_k exceeds the floor.
    pub normalized_vectors: Vec<Option<Vec<Complex64>>>,
    /// Remix matrix V with Ω_k = Σ_j V_jk Υ_j (columns index canonical
    /// operators).
    pub remix_unitary: ComplexMatrix,
    /// Pairs of nonzero weights that are degenerate within tolerance;
    /// eigenvectors inside such blocks carry a basis ambiguity.
    pub degenerate_pairs: Vec<(usize, usize)>,
    /// The pure input the frame was built for.
    pub input: Vec<Complex64>,
}

impl CanonicalFrame {
    /// ∂|e_k⟩ = Ω_k'|ψ₀⟩.
    pub fn derivative_vectors(&self) -> Vec<Vec<Complex64>> {
        self.kraus_derivs
            .iter()
            .map(|d| d.apply(&self.input).expect("frame dims consistent"))
            .collect()
    }

    pub fn n_kraus(&self) -> usize {
        self.kraus_ops.len()
    }

    pub fn dim(&self) -> usize {
        self.input.len()
    }
}

/// Result of testing a family for θ-independence of the output eigenbasis.
#[derive(Debug, Clone, serde::Serialize)]
pub struct QuasiClassicalReport {
    pub is_quasi_classical: bool,
    /// Largest ‖[ρ(θ_i), ρ(θ_j)]‖_F over grid pairs.
    pub max_commutator: f64,
    /// Largest |tr(Ω_j†Ω_k' ρ₀)| over j ≠ k and the grid.
    pub max_offdiag_overlap: f64,
    /// Largest |Im tr(Ω_k†Ω_k' ρ₀)| over the grid.
    pub max_imag_mu: f64,
}

/// Eigenprojector POVM built from a frame, with a degeneracy warning when
/// distinct nonzero weights coincide.
#[derive(Debug, Clone)]
pub struct EigenframePovm {
    pub povm: crate::fisher::Povm,
    pub degenerate_pairs: Vec<(usize, usize)>,
}

fn require_pure(state: &QuantumState) -> Result<&[Complex64]> {
    state.amplitudes().ok_or(Error::NotPure)
}

/// Eigendata of the Gram matrix at one θ, ordered but not yet matched to a
/// neighboring frame.
struct GramEigen {
    weights: Vec<f64>,
    vectors: ComplexMatrix,
}

fn gram_eigen(family: &ParamKrausFamily, theta: f64, psi: &[Complex64]) -> Result<GramEigen> {
    let ops = family.kraus_at(theta);
    let n = ops.len();
    let e_vecs: Vec<Vec<Complex64>> = ops
        .iter()
        .map(|op| op.apply(psi))
        .collect::<Result<_>>()?;
    let mut gram = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let g = inner(&e_vecs[j], &e_vecs[k]);
            gram.set(j, k, g);
            gram.set(k, j, g.conj());
        }
    }
    let eig = eig_hermitian(&gram)?;
    // Reconstruction guard: a failed diagonalization would silently corrupt
    // every downstream quantity.
    let recon_err = eig.reconstruct().sub(&gram)?.frobenius_norm();
    if recon_err > 1e-9 * (1.0 + gram.frobenius_norm()) {
        return Err(Error::Numeric(format!(
            "Gram matrix reconstruction failed at theta {theta} (residual {recon_err:.3e})"
        )));
    }
    // Descending weights; tiny negative eigenvalues are PSD rounding noise.
    let n_eig = eig.eigenvalues.len();
    let weights: Vec<f64> = (0..n_eig)
        .rev()
        .map(|i| eig.eigenvalues[i].max(0.0))
        .collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, src) in (0..n_eig).rev().enumerate() {
        for i in 0..n {
            vectors.set(i, dst, eig.eigenvectors.get(i, src));
        }
    }
    Ok(GramEigen { weights, vectors })
}

/// Reorders and phase-aligns `cur` columns against `prev`. Matching is by
/// maximal |⟨v_prev | v_cur⟩|; a tie within `DEGENERACY_OVERLAP_TOL` on a
/// carried weight is an error, while vanishing directions are matched
/// greedily since nothing downstream depends on their basis.
fn match_to_previous(prev: &GramEigen, cur: GramEigen, theta: f64) -> Result<GramEigen> {
    let n = prev.weights.len();
    let mut taken = vec![false; n];
    let mut order = vec![0usize; n];
    for k in 0..n {
        let prev_col = prev.vectors.column(k);
        let mut best = None;
        let mut best_overlap = -1.0;
        let mut second_overlap = -1.0;
        let mut second = None;
        for j in 0..n {
            if taken[j] {
                continue;
            }
            let overlap = inner(&prev_col, &cur.vectors.column(j)).norm();
            if overlap > best_overlap {
                second_overlap = best_overlap;
                second = best;
                best_overlap = overlap;
                best = Some(j);
            } else if overlap > second_overlap {
                second_overlap = overlap;
                second = Some(j);
            }
        }
        let best = best.expect("at least one column free");
        if prev.weights[k] > P_FLOOR {
            if let Some(second) = second {
                if best_overlap - second_overlap < DEGENERACY_OVERLAP_TOL {
                    return Err(Error::Degeneracy {
                        theta,
                        first: best,
                        second,
                    });
                }
            }
        }
        taken[best] = true;
        order[k] = best;
    }

    let mut weights = Vec::with_capacity(n);
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        weights.push(cur.weights[src]);
        let mut col = cur.vectors.column(src);
        // Rotate so the overlap with the previous column is real positive.
        let overlap = inner(&prev.vectors.column(dst), &col);
        if overlap.norm() > 0.0 {
            let phase = (overlap / overlap.norm()).conj();
            for z in col.iter_mut() {
                *z *= phase;
            }
        }
        for i in 0..n {
            vectors.set(i, dst, col[i]);
        }
    }
    Ok(GramEigen { weights, vectors })
}

fn degenerate_pairs(weights: &[f64]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..weights.len() {
        for j in (i + 1)..weights.len() {
            if weights[i] > P_FLOOR
                && weights[j] > P_FLOOR
                && (weights[i] - weights[j]).abs() <= DEGENERATE_WEIGHT_TOL
            {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

fn build_frame(
    family: &ParamKrausFamily,
    theta: f64,
    psi: &[Complex64],
    eigen: &GramEigen,
    v_deriv: &ComplexMatrix,
) -> Result<CanonicalFrame> {
    let ops = family.kraus_at(theta);
    let derivs = family.kraus_deriv_at(theta);
    let n = ops.len();
    let d = family.dim();
    let mut kraus_ops = Vec::with_capacity(n);
    let mut kraus_derivs = Vec::with_capacity(n);
    for k in 0..n {
        let mut omega = ComplexMatrix::zeros(d, d);
        let mut omega_d = ComplexMatrix::zeros(d, d);
        for j in 0..n {
            let v = eigen.vectors.get(j, k);
            let dv = v_deriv.get(j, k);
            if v.norm_sqr() > 0.0 {
                omega = omega.add(&ops[j].scale(v))?;
                omega_d = omega_d.add(&derivs[j].scale(v))?;
            }
            if dv.norm_sqr() > 0.0 {
                omega_d = omega_d.add(&ops[j].scale(dv))?;
            }
        }
        kraus_ops.push(omega);
        kraus_derivs.push(omega_d);
    }
    let unnormalized: Vec<Vec<Complex64>> = kraus_ops
        .iter()
        .map(|op| op.apply(psi))
        .collect::<Result<_>>()?;
    let normalized: Vec<Option<Vec<Complex64>>> = unnormalized
        .iter()
        .zip(eigen.weights.iter())
        .map(|(e, &p)| {
            if p > P_FLOOR {
                let scale = 1.0 / p.sqrt();
                Some(e.iter().map(|z| z * scale).collect())
            } else {
                None
            }
        })
        .collect();
    Ok(CanonicalFrame {
        theta,
        degenerate_pairs: degenerate_pairs(&eigen.weights),
        kraus_ops,
        kraus_derivs,
        probabilities: eigen.weights.clone(),
        unnormalized_vectors: unnormalized,
        normalized_vectors: normalized,
        remix_unitary: eigen.vectors.clone(),
        input: psi.to_vec(),
    })
}

/// Canonical decomposition of `family` at `theta` for the pure input `psi0`.
///
/// The remix derivative V'(θ) comes from a symmetric finite difference with
/// matched, phase-aligned neighbors.
pub fn canonical_decompose(
    family: &ParamKrausFamily,
    theta: f64,
    psi0: &QuantumState,
) -> Result<CanonicalFrame> {
    let psi = require_pure(psi0)?;
    family.domain().check(theta)?;
    let dom = family.domain();
    let mut h = DERIV_STEP * theta.abs().max(1.0);
    if dom.lo.is_finite() {
        h = h.min((theta - dom.lo) / 2.0);
    }
    if dom.hi.is_finite() {
        h = h.min((dom.hi - theta) / 2.0);
    }
    let center = gram_eigen(family, theta, psi)?;
    let plus = match_to_previous(&center, gram_eigen(family, theta + h, psi)?, theta + h)?;
    let minus = match_to_previous(&center, gram_eigen(family, theta - h, psi)?, theta - h)?;
    let v_deriv = plus
        .vectors
        .sub(&minus.vectors)?
        .scale(Complex64::new(1.0 / (2.0 * h), 0.0));
    build_frame(family, theta, psi, &center, &v_deriv)
}

/// Frame for a family whose given Kraus set is already canonical for `psi0`;
/// keeps the family's analytic derivatives and its operator order.
///
/// Errors with the off-diagonal Gram weight when the set is not canonical.
pub fn from_canonical_family(
    family: &ParamKrausFamily,
    theta: f64,
    psi0: &QuantumState,
) -> Result<CanonicalFrame> {
    let psi = require_pure(psi0)?;
    family.domain().check(theta)?;
    let ops = family.kraus_at(theta);
    let n = ops.len();
    let e_vecs: Vec<Vec<Complex64>> = ops
        .iter()
        .map(|op| op.apply(psi))
        .collect::<Result<_>>()?;
    let mut offdiag: f64 = 0.0;
    let mut weights = Vec::with_capacity(n);
    for j in 0..n {
        for k in 0..n {
            let g = inner(&e_vecs[j], &e_vecs[k]);
            if j == k {
                weights.push(g.re.max(0.0));
            } else {
                offdiag = offdiag.max(g.norm());
            }
        }
    }
    if offdiag > GRAM_OFFDIAG_TOL {
        return Err(Error::NotCanonical(offdiag));
    }
    let eigen = GramEigen {
        weights,
        vectors: ComplexMatrix::identity(n),
    };
    build_frame(family, theta, psi, &eigen, &ComplexMatrix::zeros(n, n))
}

/// Canonical frames along an ascending grid, tracked column by column.
///
/// Frames are ordered by descending weight at the first point and matched
/// forward by maximal eigenvector overlap, with phases aligned so successive
/// ⟨f_k(θ_i)|f_k(θ_{i+1})⟩ are real positive. V'(θ) uses central differences
/// in the interior and second-order one-sided stencils at the ends.
pub fn smooth_frame_curve(
    family: &ParamKrausFamily,
    thetas: &[f64],
    psi0: &QuantumState,
) -> Result<Vec<CanonicalFrame>> {
    let psi = require_pure(psi0)?;
    if thetas.len() < 2 {
        return Err(Error::GridTooCoarse {
            points: thetas.len(),
            needed: 2,
        });
    }
    for w in thetas.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidConfig(format!(
                "grid must be strictly ascending, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    for &t in thetas {
        family.domain().check(t)?;
    }

    let mut eigens: Vec<GramEigen> = Vec::with_capacity(thetas.len());
    for (i, &t) in thetas.iter().enumerate() {
        let raw = gram_eigen(family, t, psi)?;
        let matched = if i == 0 {
            raw
        } else {
            match_to_previous(&eigens[i - 1], raw, t)?
        };
        eigens.push(matched);
    }

    let n = eigens[0].weights.len();
    let m = thetas.len();
    let deriv_at = |i: usize| -> ComplexMatrix {
        let fd = |a: &GramEigen, b: &GramEigen, scale: f64| {
            b.vectors
                .sub(&a.vectors)
                .unwrap()
                .scale(Complex64::new(scale, 0.0))
        };
        if i == 0 {
            if m >= 3 {
                // (-3 v0 + 4 v1 - v2) / (2h) on a uniform grid; generalized
                // to uneven spacing via two divided differences.
                one_sided(&eigens[0], &eigens[1], &eigens[2], thetas[0], thetas[1], thetas[2])
            } else {
                fd(&eigens[0], &eigens[1], 1.0 / (thetas[1] - thetas[0]))
            }
        } else if i == m - 1 {
            if m >= 3 {
                one_sided(
                    &eigens[m - 1],
                    &eigens[m - 2],
                    &eigens[m - 3],
                    thetas[m - 1],
                    thetas[m - 2],
                    thetas[m - 3],
                )
            } else {
                fd(&eigens[m - 2], &eigens[m - 1], 1.0 / (thetas[m - 1] - thetas[m - 2]))
            }
        } else {
            fd(
                &eigens[i - 1],
                &eigens[i + 1],
                1.0 / (thetas[i + 1] - thetas[i - 1]),
            )
        }
    };

    let mut frames = Vec::with_capacity(m);
    for i in 0..m {
        let v_deriv = deriv_at(i);
        debug_assert_eq!(eigens[i].weights.len(), n);
        frames.push(build_frame(family, thetas[i], psi, &eigens[i], &v_deriv)?);
    }
    Ok(frames)
}

/// Second-order one-sided derivative of the eigenvector matrix at `t0` using
/// values at t0, t1, t2 (t1, t2 on the same side).
fn one_sided(
    e0: &GramEigen,
    e1: &GramEigen,
    e2: &GramEigen,
    t0: f64,
    t1: f64,
    t2: f64,
) -> ComplexMatrix {
    // Lagrange derivative weights at t0 for nodes {t0, t1, t2}.
    let w0 = (2.0 * t0 - t1 - t2) / ((t0 - t1) * (t0 - t2));
    let w1 = (t0 - t2) / ((t1 - t0) * (t1 - t2));
    let w2 = (t0 - t1) / ((t2 - t0) * (t2 - t1));
    e0.vectors
        .scale(Complex64::new(w0, 0.0))
        .add(&e1.vectors.scale(Complex64::new(w1, 0.0)))
        .unwrap()
        .add(&e2.vectors.scale(Complex64::new(w2, 0.0)))
        .unwrap()
}

/// Quasi-classicality witnesses over a grid: output commutators, off-diagonal
/// frame overlaps, and the imaginary part of μ_k = tr(Ω_k†Ω_k'ρ₀).
pub fn quasi_classical_check(
    family: &ParamKrausFamily,
    thetas: &[f64],
    psi0: &QuantumState,
) -> Result<QuasiClassicalReport> {
    if thetas.len() < 2 {
        return Err(Error::GridTooCoarse {
            points: thetas.len(),
            needed: 2,
        });
    }
    // Per-point frames: the overlap witnesses need the symmetric micro-step
    // remix derivative, not the coarse grid one.
    let frames: Vec<CanonicalFrame> = thetas
        .iter()
        .map(|&t| canonical_decompose(family, t, psi0))
        .collect::<Result<_>>()?;
    let outputs: Vec<ComplexMatrix> = thetas
        .iter()
        .map(|&t| family.output_state(t, psi0))
        .collect::<Result<_>>()?;
    let mut max_commutator: f64 = 0.0;
    for i in 0..outputs.len() {
        for j in (i + 1)..outputs.len() {
            max_commutator = max_commutator.max(commutator_norm(&outputs[i], &outputs[j])?);
        }
    }
    let mut max_offdiag: f64 = 0.0;
    let mut max_imag_mu: f64 = 0.0;
    for frame in &frames {
        let deriv_vecs = frame.derivative_vectors();
        for j in 0..frame.n_kraus() {
            for k in 0..frame.n_kraus() {
                let overlap = inner(&frame.unnormalized_vectors[j], &deriv_vecs[k]);
                if j == k {
                    max_imag_mu = max_imag_mu.max(overlap.im.abs());
                } else {
                    max_offdiag = max_offdiag.max(overlap.norm());
                }
            }
        }
    }
    Ok(QuasiClassicalReport {
        is_quasi_classical: max_commutator <= QC_TOL
            && max_offdiag <= QC_TOL
            && max_imag_mu <= QC_TOL,
        max_commutator,
        max_offdiag_overlap: max_offdiag,
        max_imag_mu,
    })
}

/// Rank-one projectors onto the frame's |f_k⟩ plus one complementary
/// projector when the carried directions do not span the space. For
/// quasi-classical families this measurement attains the Fisher bound at the
/// frame's θ.
pub fn quasiclassical_optimal_povm(frame: &CanonicalFrame) -> Result<EigenframePovm> {
    let d = frame.dim();
    let mut effects = Vec::new();
    let mut labels = Vec::new();
    let mut sum = ComplexMatrix::zeros(d, d);
    for (k, f) in frame.normalized_vectors.iter().enumerate() {
        if let Some(f) = f {
            let proj = crate::linalg::outer(f, f);
            sum = sum.add(&proj)?;
            effects.push(proj);
            labels.push(format!("f{k}"));
        }
    }
    let complement = ComplexMatrix::identity(d).sub(&sum)?;
    if complement.frobenius_norm() > 1e-10 {
        effects.push(complement);
        labels.push("complement".to_string());
    }
    let povm = crate::fisher::Povm::new(effects, labels)?;
    Ok(EigenframePovm {
        povm,
        degenerate_pairs: frame.degenerate_pairs.clone(),
    })
}

/// Convenience: ‖Σ_k Ω_k ρ₀ Ω_k† − ρ(θ)‖_F, the remix-invariance defect.
pub fn reconstruction_defect(
    family: &ParamKrausFamily,
    frame: &CanonicalFrame,
    psi0: &QuantumState,
) -> Result<f64> {
    let rho = psi0.density();
    let mut acc = ComplexMatrix::zeros(frame.dim(), frame.dim());
    for op in &frame.kraus_ops {
        acc = acc.add(&op.matmul(&rho)?.matmul(&op.dagger())?)?;
    }
    Ok(acc
        .sub(&family.output_state(frame.theta, psi0)?)?
        .frobenius_norm())
}
