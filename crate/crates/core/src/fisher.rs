//! Fisher information of measurements, the Kraus-derivative bound, POVM
//! optimality residuals, statistical-distance curves, and an independent
//! symmetric-logarithmic-derivative oracle.
//!
//! The central quantity is the bound
//! C(θ) = 4 Σ_k tr(Υ_k'†(θ) Υ_k'(θ) ρ₀), which upper-bounds the classical
//! Fisher information of any measurement on the channel output. Its value
//! depends on the Kraus set used (remixing with a θ-dependent unitary
//! changes it); for quasi-classical families the canonical decomposition
//! attains the minimum, where the bound is tight.

use num_complex::Complex64;
use rand::Rng;

use crate::canonical::{CanonicalFrame, P_FLOOR};
use crate::channel::{ParamKrausFamily, QuantumState};
use crate::error::{Error, Result};
use crate::linalg::{
    eig_hermitian, inner, outer, psd_sqrt, trace_product, vec_norm, ComplexMatrix,
};

/// Outcome probabilities below this floor are treated as structurally zero.
pub const EPS_PROB: f64 = 1e-12;

/// Residual threshold for declaring the optimality conditions satisfied.
pub const OPTIMALITY_TOL: f64 = 1e-8;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Finite POVM: nonnegative Hermitian effects summing to the identity.
#[derive(Debug, Clone)]
pub struct Povm {
    effects: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

impl Povm {
    /// Validates Hermiticity, positivity (eigenvalues ≥ −1e-10), and
    /// completeness within 1e-10.
    pub fn new(effects: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::InvalidPovm("no effects".into()));
        }
        if labels.len() != effects.len() {
            return Err(Error::InvalidPovm(format!(
                "{} labels for {} effects",
                labels.len(),
                effects.len()
            )));
        }
        let d = effects[0].rows();
        let mut sum = ComplexMatrix::zeros(d, d);
        for (i, e) in effects.iter().enumerate() {
            if e.rows() != d || e.cols() != d {
                return Err(Error::InvalidPovm(format!(
                    "effect {i} has shape {}x{}, expected {d}x{d}",
                    e.rows(),
                    e.cols()
                )));
            }
            if !e.is_hermitian(1e-10) {
                return Err(Error::InvalidPovm(format!("effect {i} is not Hermitian")));
            }
            let eig = eig_hermitian(e)?;
            if eig.eigenvalues[0] < -1e-10 {
                return Err(Error::InvalidPovm(format!(
                    "effect {i} has negative eigenvalue {:.3e}",
                    eig.eigenvalues[0]
                )));
            }
            sum = sum.add(e)?;
        }
        let defect = sum.sub(&ComplexMatrix::identity(d))?.frobenius_norm();
        if defect > 1e-10 {
            return Err(Error::InvalidPovm(format!(
                "effects sum to identity only within {defect:.3e}"
            )));
        }
        Ok(Povm { effects, labels })
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].rows()
    }

    /// {|0⟩⟨0|, |1⟩⟨1|}.
    pub fn z_basis() -> Self {
        let e0 = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        let e1 = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        Povm {
            effects: vec![e0, e1],
            labels: vec!["0".into(), "1".into()],
        }
    }

    /// {|+⟩⟨+|, |−⟩⟨−|}.
    pub fn x_basis() -> Self {
        let plus = QuantumState::plus();
        let minus = QuantumState::minus();
        Povm {
            effects: vec![
                outer(plus.amplitudes().unwrap(), plus.amplitudes().unwrap()),
                outer(minus.amplitudes().unwrap(), minus.amplitudes().unwrap()),
            ],
            labels: vec!["plus".into(), "minus".into()],
        }
    }

    /// Projectors onto the four maximally entangled two-qubit states.
    pub fn bell_basis() -> Self {
        let labels = ["psi+", "psi-", "phi+", "phi-"];
        let mut effects = Vec::with_capacity(4);
        for i in 0..4 {
            let state = QuantumState::bell(i).unwrap();
            let amps = state.amplitudes().unwrap();
            effects.push(outer(amps, amps));
        }
        Povm {
            effects,
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Number-state projectors {|n⟩⟨n|} for n = 0..dim.
    pub fn photon_number(dim: usize) -> Self {
        Self::diagonal_projectors(dim, "n")
    }

    /// Position projectors {|x⟩⟨x|} for x = 0..dim.
    pub fn position(dim: usize) -> Self {
        Self::diagonal_projectors(dim, "x")
    }

    fn diagonal_projectors(dim: usize, prefix: &str) -> Self {
        let mut effects = Vec::with_capacity(dim);
        let mut labels = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut diag = vec![0.0; dim];
            diag[i] = 1.0;
            effects.push(ComplexMatrix::from_real_diag(&diag));
            labels.push(format!("{prefix}={i}"));
        }
        Povm { effects, labels }
    }
}

/// Per-outcome proportionality constants and residuals of the optimality
/// conditions, with the scale-free verdict.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OptimalityReport {
    pub lambdas: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub satisfied: bool,
}

/// Statistical-distance curve: the frame bound and the eigen-coordinate
/// metric evaluated on a grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DistanceCurve {
    pub thetas: Vec<f64>,
    pub bound_values: Vec<f64>,
    pub eigencoord_values: Vec<f64>,
    pub label: String,
}

/// C(θ) = 4 Σ_k tr(Υ_k'†Υ_k' ρ₀) for the family's own Kraus set.
///
/// The value is decomposition dependent: equivalent Kraus sets related by a
/// θ-dependent unitary remix give different bounds.
pub fn kraus_bound(family: &ParamKrausFamily, theta: f64, rho0: &QuantumState) -> Result<f64> {
    family.domain().check(theta)?;
    if rho0.dim() != family.dim() {
        return Err(Error::Shape(format!(
            "input state dimension {} vs channel dimension {}",
            rho0.dim(),
            family.dim()
        )));
    }
    let derivs = family.kraus_deriv_at(theta);
    bound_from_derivs(&derivs, rho0)
}

/// Same bound evaluated on a canonical frame's operators.
pub fn kraus_bound_frame(frame: &CanonicalFrame, rho0: &QuantumState) -> Result<f64> {
    if rho0.dim() != frame.dim() {
        return Err(Error::Shape(format!(
            "input state dimension {} vs frame dimension {}",
            rho0.dim(),
            frame.dim()
        )));
    }
    bound_from_derivs(&frame.kraus_derivs, rho0)
}

fn bound_from_derivs(derivs: &[ComplexMatrix], rho0: &QuantumState) -> Result<f64> {
    let total = match rho0 {
        QuantumState::Pure(psi) => derivs
            .iter()
            .map(|d| Ok(vec_norm(&d.apply(psi)?).powi(2)))
            .sum::<Result<f64>>()?,
        QuantumState::Mixed(rho) => derivs
            .iter()
            .map(|d| Ok(trace_product(&d.dagger().matmul(d)?, rho).re))
            .sum::<Result<f64>>()?,
    };
    Ok(4.0 * total)
}

/// Classical Fisher information Σ_ξ (tr E_ξ ρ')² / tr E_ξ ρ of a POVM on the
/// channel output.
///
/// Outcomes with probability below `EPS_PROB` contribute nothing when their
/// derivative term is also negligible; otherwise the term diverges and an
/// error names the outcome.
pub fn classical_fisher(
    povm: &Povm,
    family: &ParamKrausFamily,
    theta: f64,
    rho0: &QuantumState,
) -> Result<f64> {
    if povm.dim() != family.dim() {
        return Err(Error::Shape(format!(
            "POVM dimension {} vs channel dimension {}",
            povm.dim(),
            family.dim()
        )));
    }
    let rho = family.output_state(theta, rho0)?;
    let drho = family.output_derivative(theta, rho0)?;
    let mut fisher = 0.0;
    for (effect, label) in povm.effects().iter().zip(povm.labels()) {
        let prob = trace_product(effect, &rho).re;
        let num = trace_product(effect, &drho).re;
        if prob < EPS_PROB {
            if num.abs() >= EPS_PROB.sqrt() {
                return Err(Error::DivergentFisherTerm {
                    outcome: label.clone(),
                });
            }
            continue;
        }
        fisher += num * num / prob;
    }
    Ok(fisher)
}

/// Least-squares fit of the optimality conditions
/// E_ξ^{1/2} Ω_k' ρ₀^{1/2} = λ_ξ E_ξ^{1/2} Ω_k ρ₀^{1/2} over the stacked
/// Kraus index, one λ and one relative residual per outcome.
pub fn optimality_check(
    povm: &Povm,
    frame: &CanonicalFrame,
    rho0: &QuantumState,
) -> Result<OptimalityReport> {
    rho0.amplitudes().ok_or(Error::NotPure)?;
    if povm.dim() != frame.dim() {
        return Err(Error::Shape(format!(
            "POVM dimension {} vs frame dimension {}",
            povm.dim(),
            frame.dim()
        )));
    }
    // For a pure input ρ₀^{1/2} = |ψ₀⟩⟨ψ₀|, so each stacked block is a rank-one
    // matrix |E^{1/2} v⟩⟨ψ₀| and Frobenius inner products reduce to vector ones.
    let deriv_vecs = frame.derivative_vectors();
    let mut lambdas = Vec::with_capacity(povm.len());
    let mut residuals = Vec::with_capacity(povm.len());
    let mut max_residual: f64 = 0.0;
    for effect in povm.effects() {
        let root = psd_sqrt(effect)?;
        let a_vecs: Vec<Vec<Complex64>> = deriv_vecs
            .iter()
            .map(|v| root.apply(v))
            .collect::<Result<_>>()?;
        let b_vecs: Vec<Vec<Complex64>> = frame
            .unnormalized_vectors
            .iter()
            .map(|v| root.apply(v))
            .collect::<Result<_>>()?;
        let b_norm_sq: f64 = b_vecs.iter().map(|v| vec_norm(v).powi(2)).sum();
        let a_norm_sq: f64 = a_vecs.iter().map(|v| vec_norm(v).powi(2)).sum();
        let b_norm = b_norm_sq.sqrt();
        let (lambda, residual) = if b_norm < EPS_PROB {
            if a_norm_sq.sqrt() >= EPS_PROB.sqrt() {
                (0.0, f64::INFINITY)
            } else {
                // Both stacks vanish: the outcome carries no constraint.
                (0.0, 0.0)
            }
        } else {
            let overlap: Complex64 = a_vecs
                .iter()
                .zip(b_vecs.iter())
                .map(|(a, b)| inner(b, a))
                .sum();
            let lambda = overlap.re / b_norm_sq;
            let mut defect_sq = 0.0;
            for (a, b) in a_vecs.iter().zip(b_vecs.iter()) {
                for (x, y) in a.iter().zip(b.iter()) {
                    defect_sq += (x - y * c(lambda, 0.0)).norm_sqr();
                }
            }
            (lambda, defect_sq.sqrt() / b_norm)
        };
        max_residual = max_residual.max(residual);
        lambdas.push(lambda);
        residuals.push(residual);
    }
    Ok(OptimalityReport {
        lambdas,
        residuals,
        satisfied: max_residual <= OPTIMALITY_TOL,
        max_residual,
    })
}

/// Eigen-coordinate statistical-distance metric along a tracked frame curve:
/// Σ_k (p_k')²/p_k + 4 Σ_k p_k |⟨f_k|∂f_k⟩|², with derivatives by grid
/// differences and floor-weight terms excluded.
pub fn statistical_distance_eigencoords(
    frames: &[CanonicalFrame],
    label: impl Into<String>,
) -> Result<DistanceCurve> {
    if frames.len() < 3 {
        return Err(Error::GridTooCoarse {
            points: frames.len(),
            needed: 3,
        });
    }
    let m = frames.len();
    let n = frames[0].n_kraus();
    let thetas: Vec<f64> = frames.iter().map(|f| f.theta).collect();

    // Derivative stencil indices and weights at each grid point.
    let stencil = |i: usize| -> [(usize, f64); 3] {
        if i == 0 {
            lagrange_weights(thetas[0], thetas[0], thetas[1], thetas[2], [0, 1, 2])
        } else if i == m - 1 {
            lagrange_weights(
                thetas[m - 1],
                thetas[m - 1],
                thetas[m - 2],
                thetas[m - 3],
                [m - 1, m - 2, m - 3],
            )
        } else {
            let h = thetas[i + 1] - thetas[i - 1];
            [(i - 1, -1.0 / h), (i, 0.0), (i + 1, 1.0 / h)]
        }
    };

    let mut bound_values = Vec::with_capacity(m);
    let mut eigencoord_values = Vec::with_capacity(m);
    let rho0 = QuantumState::pure_normalized(frames[0].input.clone())?;
    for i in 0..m {
        bound_values.push(kraus_bound_frame(&frames[i], &rho0)?);
        let weights = stencil(i);
        let mut metric = 0.0;
        for k in 0..n {
            // Exclude directions that sink below the floor anywhere in the
            // stencil; their normalized vectors are undefined there.
            let involved: Vec<usize> = weights.iter().map(|&(idx, _)| idx).collect();
            if involved
                .iter()
                .any(|&idx| frames[idx].probabilities[k] <= P_FLOOR)
            {
                continue;
            }
            let p = frames[i].probabilities[k];
            let p_deriv: f64 = weights
                .iter()
                .map(|&(idx, w)| w * frames[idx].probabilities[k])
                .sum();
            metric += p_deriv * p_deriv / p;

            let f_i = frames[i].normalized_vectors[k].as_ref().unwrap();
            let mut df = vec![c(0.0, 0.0); f_i.len()];
            for &(idx, w) in &weights {
                let f = frames[idx].normalized_vectors[k].as_ref().unwrap();
                for (acc, z) in df.iter_mut().zip(f.iter()) {
                    *acc += z * c(w, 0.0);
                }
            }
            let berry = inner(f_i, &df);
            metric += 4.0 * p * berry.norm_sqr();
        }
        eigencoord_values.push(metric);
    }
    Ok(DistanceCurve {
        thetas,
        bound_values,
        eigencoord_values,
        label: label.into(),
    })
}

fn lagrange_weights(
    at: f64,
    t0: f64,
    t1: f64,
    t2: f64,
    idx: [usize; 3],
) -> [(usize, f64); 3] {
    let w0 = (2.0 * at - t1 - t2) / ((t0 - t1) * (t0 - t2));
    let w1 = (2.0 * at - t0 - t2) / ((t1 - t0) * (t1 - t2));
    let w2 = (2.0 * at - t0 - t1) / ((t2 - t0) * (t2 - t1));
    [(idx[0], w0), (idx[1], w1), (idx[2], w2)]
}

/// Applies a smooth unitary remix u(θ) = exp(θ·G) to a canonical frame and
/// returns `(C_remixed, predicted)` where
/// `predicted = C_frame + 4 Σ_{jk} |u'_{kj}|² p_j`.
///
/// The two agree when the optimality conditions hold for the frame, which the
/// supplied POVM is required to witness. The penalty term is nonnegative, so
/// no smooth remix can undercut the canonical bound.
pub fn remix_penalty(
    frame: &CanonicalFrame,
    generator: &ComplexMatrix,
    theta: f64,
    rho0: &QuantumState,
    povm: &Povm,
) -> Result<(f64, f64)> {
    let psi = rho0.amplitudes().ok_or(Error::NotPure)?;
    if (theta - frame.theta).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "theta {theta} does not match the frame's theta {}",
            frame.theta
        )));
    }
    let n = frame.n_kraus();
    if generator.rows() != n || generator.cols() != n {
        return Err(Error::Shape(format!(
            "generator is {}x{}, expected {n}x{n}",
            generator.rows(),
            generator.cols()
        )));
    }
    let anti_defect = generator.add(&generator.dagger())?.frobenius_norm();
    if anti_defect > 1e-10 * (1.0 + generator.frobenius_norm()) {
        return Err(Error::NotAntiHermitian(anti_defect));
    }
    let witness = optimality_check(povm, frame, rho0)?;
    if !witness.satisfied {
        return Err(Error::InvalidPovm(format!(
            "POVM does not satisfy the optimality conditions for this frame (max residual {:.3e})",
            witness.max_residual
        )));
    }

    // exp(θG) through the Hermitian eigensystem of iG.
    let herm = generator.scale(c(0.0, 1.0));
    let eig = eig_hermitian(&herm)?;
    let v = &eig.eigenvectors;
    let mut phases = ComplexMatrix::zeros(n, n);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        phases.set(i, i, Complex64::from_polar(1.0, -theta * lambda));
    }
    let u = v.matmul(&phases)?.matmul(&v.dagger())?;
    let u_deriv = generator.matmul(&u)?;

    // Remixed operators Ω_j = Σ_k u_{jk} Υ_k and their θ-derivatives.
    let mut c_remixed = 0.0;
    for j in 0..n {
        let mut dvec = vec![c(0.0, 0.0); frame.dim()];
        for k in 0..n {
            let coeff = u.get(j, k);
            let dcoeff = u_deriv.get(j, k);
            let e_k = &frame.unnormalized_vectors[k];
            let de_k = frame.kraus_derivs[k].apply(psi)?;
            for i in 0..dvec.len() {
                dvec[i] += dcoeff * e_k[i] + coeff * de_k[i];
            }
        }
        c_remixed += vec_norm(&dvec).powi(2);
    }
    let c_remixed = 4.0 * c_remixed;

    let mut penalty = 0.0;
    for k in 0..n {
        for j in 0..n {
            penalty += u_deriv.get(k, j).norm_sqr() * frame.probabilities[j];
        }
    }
    let predicted = kraus_bound_frame(frame, rho0)? + 4.0 * penalty;
    Ok((c_remixed, predicted))
}

/// Quantum Fisher information through the symmetric logarithmic derivative:
/// Σ_{m,n} 2 |⟨m|ρ'|n⟩|² / (λ_m + λ_n) over eigenpairs of ρ(θ) with
/// λ_m + λ_n above the probability floor.
///
/// Serves as an oracle: for quasi-classical families it equals the canonical
/// Kraus bound without touching any Kraus decomposition.
pub fn sld_fisher(family: &ParamKrausFamily, theta: f64, rho0: &QuantumState) -> Result<f64> {
    let rho = family.output_state(theta, rho0)?;
    let drho = family.output_derivative(theta, rho0)?;
    let eig = eig_hermitian(&rho)?;
    let d = rho.rows();
    let mut fisher = 0.0;
    for m_idx in 0..d {
        let vm = eig.eigenvectors.column(m_idx);
        let drho_vm = drho.apply(&vm)?;
        for n_idx in 0..d {
            let denom = eig.eigenvalues[m_idx] + eig.eigenvalues[n_idx];
            if denom <= EPS_PROB {
                continue;
            }
            let vn = eig.eigenvectors.column(n_idx);
            let elem = inner(&vn, &drho_vm);
            fisher += 2.0 * elem.norm_sqr() / denom;
        }
    }
    Ok(fisher)
}

/// Random rank-one decomposition of the identity with `n_outcomes ≥ dim`
/// effects, built from the rows of a Haar-ish random isometry.
pub fn random_rank_one_povm(dim: usize, n_outcomes: usize, rng: &mut impl Rng) -> Result<Povm> {
    if n_outcomes < dim {
        return Err(Error::InvalidPovm(format!(
            "need at least {dim} outcomes, got {n_outcomes}"
        )));
    }
    // Gaussian matrix with orthonormalized columns.
    fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        // Box-Muller from two uniforms.
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| {
            (0..n_outcomes)
                .map(|_| c(gauss(rng), gauss(rng)))
                .collect()
        })
        .collect();
    // Modified Gram-Schmidt.
    for i in 0..dim {
        for j in 0..i {
            let proj = inner(&cols[j], &cols[i]);
            let prev = cols[j].clone();
            for (x, y) in cols[i].iter_mut().zip(prev.iter()) {
                *x -= proj * y;
            }
        }
        let norm = vec_norm(&cols[i]);
        if norm < 1e-12 {
            return Err(Error::Numeric(
                "degenerate random isometry draw".into(),
            ));
        }
        for x in cols[i].iter_mut() {
            *x /= norm;
        }
    }
    let mut effects = Vec::with_capacity(n_outcomes);
    let mut labels = Vec::with_capacity(n_outcomes);
    for row in 0..n_outcomes {
        let w: Vec<Complex64> = (0..dim).map(|col| cols[col][row].conj()).collect();
        effects.push(outer(&w, &w));
        labels.push(format!("r{row}"));
    }
    Povm::new(effects, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{canonical_decompose, from_canonical_family};
    use crate::channel::{
        damping, dephasing, depolarizing, depolarizing_canonical, phase_rotation,
        phase_rotation_rephased, QuantumState,
    };
    use crate::error::Error;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn bound_on_canonical_depolarizing_matches_closed_form() {
        let family = depolarizing_canonical();
        let psi0 = QuantumState::basis(2, 0).unwrap();
        let bound = kraus_bound(&family, 0.5, &psi0).unwrap();
        assert!((bound - 2.0).abs() < 1e-12);
        for &p in &[0.1, 0.37, 0.8] {
            let bound = kraus_bound(&family, p, &psi0).unwrap();
            let expect = 6.0 / (p * (9.0 - 6.0 * p));
            assert!((bound - expect).abs() < 1e-11);
        }
    }

    #[test]
    fn bound_vanishes_for_constant_family() {
        let family = crate::channel::ParamKrausFamily::new(
            "constant",
            2,
            1,
            crate::channel::ThetaDomain::new(-1.0, 1.0),
            |_| vec![ComplexMatrix::identity(2)],
            None,
        );
        let bound = kraus_bound(&family, 0.2, &QuantumState::plus()).unwrap();
        assert!(bound.abs() < 1e-12);
    }

    #[test]
    fn damping_bound_closed_form() {
        let family = damping(1).unwrap();
        let psi0 = QuantumState::basis(2, 1).unwrap();
        let theta = 2.0_f64.ln();
        let bound = kraus_bound(&family, theta, &psi0).unwrap();
        assert!((bound - 1.0).abs() < 1e-12, "bound {bound}");
    }

    #[test]
    fn bound_is_linear_in_the_input_state() {
        let family = dephasing();
        let theta = 0.6;
        let q = 0.3;
        let pure0 = QuantumState::plus();
        let pure1 = QuantumState::basis(2, 0).unwrap();
        let mix = QuantumState::mixed(
            pure0
                .density()
                .scale(Complex64::new(q, 0.0))
                .add(&pure1.density().scale(Complex64::new(1.0 - q, 0.0)))
                .unwrap(),
        )
        .unwrap();
        let lhs = kraus_bound(&family, theta, &mix).unwrap();
        let rhs = q * kraus_bound(&family, theta, &pure0).unwrap()
            + (1.0 - q) * kraus_bound(&family, theta, &pure1).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn decomposition_dependence_witness() {
        let psi0 = QuantumState::basis(2, 0).unwrap();
        let a = kraus_bound(&phase_rotation(), 0.4, &psi0).unwrap();
        let b = kraus_bound(&phase_rotation_rephased(), 0.4, &psi0).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
        assert!(b.abs() < 1e-12);
    }

    #[test]
    fn classical_fisher_values() {
        let family = depolarizing();
        let psi0 = QuantumState::basis(2, 0).unwrap();
        let fisher = classical_fisher(&Povm::z_basis(), &family, 0.5, &psi0).unwrap();
        assert!((fisher - 2.0).abs() < 1e-12);

        let trivial = Povm::new(vec![ComplexMatrix::identity(2)], vec!["all".into()]).unwrap();
        let zero = classical_fisher(&trivial, &family, 0.5, &psi0).unwrap();
        assert!(zero.abs() < 1e-12);

        let deph = dephasing();
        let fx = classical_fisher(&Povm::x_basis(), &deph, 0.5, &QuantumState::plus()).unwrap();
        let expect = 4.0 / (4.0_f64 * 0.5).exp_m1();
        assert!((fx - expect).abs() < 1e-12, "{fx} vs {expect}");
    }

    #[test]
    fn optimality_dephasing_x_basis() {
        let family = dephasing();
        let psi0 = QuantumState::plus();
        let theta = 0.5;
        let frame = from_canonical_family(&family, theta, &psi0).unwrap();
        let report = optimality_check(&Povm::x_basis(), &frame, &psi0).unwrap();
        assert!(report.satisfied, "{report:?}");
        let lam_plus = -1.0 / ((2.0 * theta).exp() + 1.0);
        let lam_minus = 1.0 / ((2.0 * theta).exp() - 1.0);
        assert!((report.lambdas[0] - lam_plus).abs() < 1e-12);
        assert!((report.lambdas[1] - lam_minus).abs() < 1e-12);
    }

    #[test]
    fn optimality_damping_photodetection() {
        let n_photons = 2usize;
        let family = damping(n_photons).unwrap();
        let psi0 = QuantumState::basis(n_photons + 1, n_photons).unwrap();
        let theta = 0.8;
        let frame = from_canonical_family(&family, theta, &psi0).unwrap();
        let povm = Povm::photon_number(n_photons + 1);
        let report = optimality_check(&povm, &frame, &psi0).unwrap();
        assert!(report.satisfied, "{report:?}");
        let e = (-theta).exp();
        for m in 0..=n_photons {
            let expect = (n_photons as f64 * e - m as f64) / (2.0 * (1.0 - e));
            assert!(
                (report.lambdas[m] - expect).abs() < 1e-10,
                "m={m}: {} vs {expect}",
                report.lambdas[m]
            );
        }
    }

    #[test]
    fn optimality_fails_for_wrong_basis() {
        let family = depolarizing();
        let psi0 = QuantumState::basis(2, 0).unwrap();
        let frame = canonical_decompose(&family, 0.5, &psi0).unwrap();
        let report = optimality_check(&Povm::x_basis(), &frame, &psi0).unwrap();
        assert!(!report.satisfied);
        assert!(report.max_residual > 1e-2);
    }

    #[test]
    fn remix_zero_generator_is_identity_remix() {
        let family = dephasing();
        let psi0 = QuantumState::plus();
        let frame = from_canonical_family(&family, 0.5, &psi0).unwrap();
        let generator = ComplexMatrix::zeros(2, 2);
        let (c_remixed, predicted) =
            remix_penalty(&frame, &generator, 0.5, &psi0, &Povm::x_basis()).unwrap();
        let base = kraus_bound_frame(&frame, &psi0).unwrap();
        assert!((c_remixed - base).abs() < 1e-12);
        assert!((predicted - base).abs() < 1e-12);
    }

    #[test]
    fn remix_rotation_generator_penalty() {
        let family = dephasing();
        let psi0 = QuantumState::plus();
        let theta = 0.5;
        let frame = from_canonical_family(&family, theta, &psi0).unwrap();
        let r = 0.3;
        let generator =
            ComplexMatrix::from_pairs(2, 2, &[(0.0, 0.0), (r, 0.0), (-r, 0.0), (0.0, 0.0)])
                .unwrap();
        let (c_remixed, predicted) =
            remix_penalty(&frame, &generator, theta, &psi0, &Povm::x_basis()).unwrap();
        let base = kraus_bound_frame(&frame, &psi0).unwrap();
        assert!((c_remixed - predicted).abs() < 1e-8);
        assert!((c_remixed - base - 4.0 * r * r).abs() < 1e-10);
    }

    #[test]
    fn remix_rejects_non_anti_hermitian_generators() {
        let family = dephasing();
        let psi0 = QuantumState::plus();
        let frame = from_canonical_family(&family, 0.5, &psi0).unwrap();
        let generator = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        assert!(matches!(
            remix_penalty(&frame, &generator, 0.5, &psi0, &Povm::x_basis()),
            Err(Error::NotAntiHermitian(_))
        ));
    }

    #[test]
    fn sld_oracle_values() {
        let psi0 = QuantumState::basis(2, 0).unwrap();
        let qfi = sld_fisher(&depolarizing(), 0.5, &psi0).unwrap();
        assert!((qfi - 2.0).abs() < 1e-10);

        let constant = crate::channel::ParamKrausFamily::new(
            "constant",
            2,
            1,
            crate::channel::ThetaDomain::new(-1.0, 1.0),
            |_| vec![ComplexMatrix::identity(2)],
            None,
        );
        assert!(sld_fisher(&constant, 0.1, &psi0).unwrap().abs() < 1e-10);

        let family = damping(1).unwrap();
        let qfi = sld_fisher(&family, 2.0_f64.ln(), &QuantumState::basis(2, 1).unwrap()).unwrap();
        assert!((qfi - 1.0).abs() < 1e-10);
    }

    #[test]
    fn optimal_povm_achieves_the_frame_bound() {
        // The eigenprojector measurement built from a canonical frame
        // extracts exactly the bound's worth of Fisher information.
        let rs = crate::channel::random_shift(None, 1.0).unwrap();
        let rs_input = QuantumState::basis(rs.dim(), 0).unwrap();
        let cases: Vec<(crate::channel::ParamKrausFamily, QuantumState)> = vec![
            (depolarizing_canonical(), QuantumState::basis(2, 0).unwrap()),
            (dephasing(), QuantumState::plus()),
            (damping(2).unwrap(), QuantumState::basis(3, 2).unwrap()),
            (rs, rs_input),
            (
                depolarizing().extend_identity(),
                QuantumState::bell(0).unwrap(),
            ),
        ];
        let theta = 0.5;
        for (family, input) in &cases {
            let frame = from_canonical_family(family, theta, input).unwrap();
            let povm = crate::canonical::quasiclassical_optimal_povm(&frame)
                .unwrap()
                .povm;
            let achieved = classical_fisher(&povm, family, theta, input).unwrap();
            let bound = kraus_bound_frame(&frame, input).unwrap();
            assert!(
                (achieved - bound).abs() < 1e-8,
                "{}: achieved {achieved} vs bound {bound}",
                family.label()
            );
        }
        // Same statement with the frame reached by Gram diagonalization of
        // the non-canonical textbook set.
        let family = depolarizing();
        let input = QuantumState::basis(2, 0).unwrap();
        let frame = canonical_decompose(&family, theta, &input).unwrap();
        let povm = crate::canonical::quasiclassical_optimal_povm(&frame)
            .unwrap()
            .povm;
        let achieved = classical_fisher(&povm, &family, theta, &input).unwrap();
        let bound = kraus_bound_frame(&frame, &input).unwrap();
        assert!(
            (achieved - bound).abs() < 1e-8,
            "decomposed: {achieved} vs {bound}"
        );
    }

    #[test]
    fn distance_curve_bound_agrees_with_eigencoords_when_quasi_classical() {
        use crate::canonical::smooth_frame_curve;
        use crate::channel::linspace;
        let cases: Vec<(crate::channel::ParamKrausFamily, QuantumState, Vec<f64>)> = vec![
            (dephasing(), QuantumState::plus(), linspace(0.495, 0.505, 101)),
            (
                depolarizing_canonical(),
                QuantumState::basis(2, 0).unwrap(),
                linspace(0.3, 0.7, 101),
            ),
            (
                damping(1).unwrap(),
                QuantumState::basis(2, 1).unwrap(),
                linspace(0.496, 0.504, 101),
            ),
        ];
        for (family, input, grid) in &cases {
            let frames = smooth_frame_curve(family, grid, input).unwrap();
            let curve = statistical_distance_eigencoords(&frames, family.label()).unwrap();
            for i in 0..curve.thetas.len() {
                assert!(
                    (curve.bound_values[i] - curve.eigencoord_values[i]).abs() < 1e-7,
                    "{} at {}: {} vs {}",
                    family.label(),
                    curve.thetas[i],
                    curve.bound_values[i],
                    curve.eigencoord_values[i]
                );
                assert!(curve.bound_values[i] >= 0.0);
                assert!(curve.eigencoord_values[i] >= 0.0);
            }
        }
    }

    #[test]
    fn distance_curve_matches_closed_forms() {
        use crate::canonical::smooth_frame_curve;
        use crate::channel::{linspace, random_shift};
        // Dephasing at |+>: 4/(e^{4θ} - 1).
        let family = dephasing();
        let grid = linspace(0.48, 0.52, 101);
        let frames = smooth_frame_curve(&family, &grid, &QuantumState::plus()).unwrap();
        let curve = statistical_distance_eigencoords(&frames, "dephasing").unwrap();
        for (i, &t) in curve.thetas.iter().enumerate() {
            let expect = 4.0 / (4.0 * t).exp_m1();
            assert!(
                (curve.eigencoord_values[i] - expect).abs() < 1e-6,
                "θ={t}: {} vs {expect}",
                curve.eigencoord_values[i]
            );
        }
        // Random shift at the fiducial input: 1/θ around θ = 1.
        let family = random_shift(None, 1.06).unwrap();
        let input = QuantumState::basis(family.dim(), 0).unwrap();
        let grid = linspace(0.98, 1.02, 101);
        let frames = smooth_frame_curve(&family, &grid, &input).unwrap();
        let curve = statistical_distance_eigencoords(&frames, "random-shift").unwrap();
        for (i, &t) in curve.thetas.iter().enumerate() {
            assert!(
                (curve.eigencoord_values[i] - 1.0 / t).abs() < 1e-6,
                "θ={t}: {} vs {}",
                curve.eigencoord_values[i],
                1.0 / t
            );
        }
    }

    #[test]
    fn vanishing_probability_with_live_derivative_is_divergent() {
        // Near θ = 0 the |-> outcome probability sinks below the floor while
        // its derivative stays order one: the Fisher term diverges and the
        // error names the outcome.
        let family = dephasing();
        let err = classical_fisher(&Povm::x_basis(), &family, 1e-13, &QuantumState::plus());
        match err {
            Err(Error::DivergentFisherTerm { outcome }) => assert_eq!(outcome, "minus"),
            other => panic!("expected divergent Fisher term, got {other:?}"),
        }
    }

    #[test]
    fn random_povm_is_valid_and_dominated() {
        let mut rng = StdRng::seed_from_u64(99);
        let family = depolarizing_canonical();
        let psi0 = QuantumState::basis(2, 0).unwrap();
        let theta = 0.5;
        let bound = kraus_bound(&family, theta, &psi0).unwrap();
        for _ in 0..20 {
            let povm = random_rank_one_povm(2, 4, &mut rng).unwrap();
            let fisher = classical_fisher(&povm, &depolarizing(), theta, &psi0).unwrap();
            assert!(fisher <= bound + 1e-8, "{fisher} vs bound {bound}");
        }
    }

    #[test]
    fn povm_validation() {
        let half = ComplexMatrix::identity(2).scale(Complex64::new(0.5, 0.0));
        assert!(Povm::new(vec![half.clone(), half], vec!["a".into(), "b".into()]).is_ok());
        let third = ComplexMatrix::identity(2).scale(Complex64::new(0.3, 0.0));
        assert!(Povm::new(vec![third.clone(), third], vec!["a".into(), "b".into()]).is_err());
        let neg = ComplexMatrix::from_real_diag(&[1.5, -0.5]);
        let fix = ComplexMatrix::from_real_diag(&[-0.5, 1.5]);
        assert!(Povm::new(vec![neg, fix], vec!["a".into(), "b".into()]).is_err());
    }
}
