//! Parametrized Kraus-operator channel families.
//!
//! A [`ParamKrausFamily`] is a map θ ↦ {Υ_k(θ)} together with its derivative
//! map θ ↦ {Υ_k'(θ)}. Families constructed without analytic derivatives get a
//! central finite-difference wrapper. The module ships the builtin channels
//! (`depolarizing`, `depolarizing-canonical`, `dephasing`, `random-shift`,
//! `damping`) plus the tensor-extension combinators used for
//! entanglement-assisted estimation.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, outer, vec_norm, ComplexMatrix};

/// Default tolerance on ‖Σ Υ_k†Υ_k − I‖_F for exactly trace-preserving
/// families.
pub const TRACE_PRESERVATION_TOL: f64 = 1e-10;

/// Poisson tail mass below which the random-shift truncation is accepted.
pub const RANDOM_SHIFT_TAIL: f64 = 1e-12;

/// Finite-difference step used by the derivative fallback, scaled by
/// max(1, |θ|).
pub const DERIV_STEP: f64 = 1e-6;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_pairs(2, 2, &[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)]).unwrap()
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_pairs(2, 2, &[(0.0, 0.0), (0.0, -1.0), (0.0, 1.0), (0.0, 0.0)]).unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&[1.0, -1.0])
}

/// Open parameter interval; the upper end may be infinite.
#[derive(Debug, Clone, Copy)]
pub struct ThetaDomain {
    pub lo: f64,
    pub hi: f64,
}

impl ThetaDomain {
    pub fn new(lo: f64, hi: f64) -> Self {
        ThetaDomain { lo, hi }
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta > self.lo && theta < self.hi
    }

    pub fn check(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                theta,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

/// Pure state vector or density operator.
#[derive(Debug, Clone)]
pub enum QuantumState {
    Pure(Vec<Complex64>),
    Mixed(ComplexMatrix),
}

impl QuantumState {
    /// Unit-norm pure state; the norm must already be 1 within 1e-12.
    pub fn pure(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("empty amplitude vector".into()));
        }
        let norm = vec_norm(&amplitudes);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!(
                "pure state norm {norm} differs from 1 by more than 1e-12"
            )));
        }
        Ok(QuantumState::Pure(amplitudes))
    }

    /// Normalizes the amplitudes, then builds a pure state.
    pub fn pure_normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = vec_norm(&amplitudes);
        if norm < 1e-12 {
            return Err(Error::InvalidState("zero amplitude vector".into()));
        }
        for z in amplitudes.iter_mut() {
            *z /= norm;
        }
        Ok(QuantumState::Pure(amplitudes))
    }

    /// Density operator: Hermitian, unit trace within 1e-12, eigenvalues
    /// above -1e-10.
    pub fn mixed(density: ComplexMatrix) -> Result<Self> {
        if !density.is_square() {
            return Err(Error::InvalidState("density matrix is not square".into()));
        }
        if !density.is_hermitian(1e-12) {
            return Err(Error::InvalidState("density matrix is not Hermitian".into()));
        }
        let tr = density.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidState(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let eig = eig_hermitian(&density)?;
        if eig.eigenvalues[0] < -1e-10 {
            return Err(Error::InvalidState(format!(
                "density matrix has negative eigenvalue {}",
                eig.eigenvalues[0]
            )));
        }
        Ok(QuantumState::Mixed(density))
    }

    /// Computational basis state |index⟩ in the given dimension.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidState(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amps = vec![c(0.0, 0.0); dim];
        amps[index] = c(1.0, 0.0);
        Ok(QuantumState::Pure(amps))
    }

    /// |+⟩ = (|0⟩ + |1⟩)/√2.
    pub fn plus() -> Self {
        QuantumState::Pure(vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)])
    }

    /// |−⟩ = (|0⟩ − |1⟩)/√2.
    pub fn minus() -> Self {
        QuantumState::Pure(vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)])
    }

    /// Two-qubit maximally entangled states: 0 ↦ (|00⟩+|11⟩)/√2,
    /// 1 ↦ (|00⟩−|11⟩)/√2, 2 ↦ (|01⟩+|10⟩)/√2, 3 ↦ (|01⟩−|10⟩)/√2.
    pub fn bell(index: usize) -> Result<Self> {
        let h = FRAC_1_SQRT_2;
        let amps = match index {
            0 => vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)],
            1 => vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-h, 0.0)],
            2 => vec![c(0.0, 0.0), c(h, 0.0), c(h, 0.0), c(0.0, 0.0)],
            3 => vec![c(0.0, 0.0), c(h, 0.0), c(-h, 0.0), c(0.0, 0.0)],
            _ => {
                return Err(Error::InvalidState(format!(
                    "Bell index {index} out of range 0..=3"
                )))
            }
        };
        Ok(QuantumState::Pure(amps))
    }

    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Mixed(m) => m.rows(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, QuantumState::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        match self {
            QuantumState::Pure(v) => Some(v),
            QuantumState::Mixed(_) => None,
        }
    }

    /// Density operator form (|ψ⟩⟨ψ| for pure states).
    pub fn density(&self) -> ComplexMatrix {
        match self {
            QuantumState::Pure(v) => outer(v, v),
            QuantumState::Mixed(m) => m.clone(),
        }
    }
}

type KrausFn = Arc<dyn Fn(f64) -> Vec<ComplexMatrix> + Send + Sync>;

/// One-parameter family of Kraus operators with derivatives.
///
/// Evaluation closures are pure; the family is immutable after construction
/// and safe to share across threads.
#[derive(Clone)]
pub struct ParamKrausFamily {
    label: String,
    dim: usize,
    n_kraus: usize,
    domain: ThetaDomain,
    trace_tol: f64,
    kraus: KrausFn,
    kraus_deriv: KrausFn,
}

impl std::fmt::Debug for ParamKrausFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParamKrausFamily")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("n_kraus", &self.n_kraus)
            .field("domain", &self.domain)
            .finish()
    }
}

impl ParamKrausFamily {
    /// Builds a family from an operator closure and an optional analytic
    /// derivative closure. Without one, derivatives come from a central
    /// finite difference with step `DERIV_STEP * max(1, |θ|)`, shrunk near
    /// the domain ends.
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        n_kraus: usize,
        domain: ThetaDomain,
        kraus: impl Fn(f64) -> Vec<ComplexMatrix> + Send + Sync + 'static,
        kraus_deriv: Option<KrausFn>,
    ) -> Self {
        let kraus: KrausFn = Arc::new(kraus);
        let deriv = match kraus_deriv {
            Some(d) => d,
            None => {
                let inner_fn = Arc::clone(&kraus);
                Arc::new(move |theta: f64| {
                    let mut h = DERIV_STEP * theta.abs().max(1.0);
                    if domain.lo.is_finite() {
                        h = h.min((theta - domain.lo) / 2.0);
                    }
                    if domain.hi.is_finite() {
                        h = h.min((domain.hi - theta) / 2.0);
                    }
                    let plus = inner_fn(theta + h);
                    let minus = inner_fn(theta - h);
                    plus.into_iter()
                        .zip(minus)
                        .map(|(p, m)| {
                            p.sub(&m)
                                .expect("family returns fixed shapes")
                                .scale(c(1.0 / (2.0 * h), 0.0))
                        })
                        .collect()
                }) as KrausFn
            }
        };
        ParamKrausFamily {
            label: label.into(),
            dim,
            n_kraus,
            domain,
            trace_tol: TRACE_PRESERVATION_TOL,
            kraus,
            kraus_deriv: deriv,
        }
    }

    pub fn with_trace_tol(mut self, tol: f64) -> Self {
        self.trace_tol = tol;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_kraus(&self) -> usize {
        self.n_kraus
    }

    pub fn domain(&self) -> ThetaDomain {
        self.domain
    }

    pub fn trace_tol(&self) -> f64 {
        self.trace_tol
    }

    /// Raw operator evaluation; no domain check so closed-form endpoints can
    /// be inspected directly.
    pub fn kraus_at(&self, theta: f64) -> Vec<ComplexMatrix> {
        (self.kraus)(theta)
    }

    pub fn kraus_deriv_at(&self, theta: f64) -> Vec<ComplexMatrix> {
        (self.kraus_deriv)(theta)
    }

    /// ‖Σ Υ_k†Υ_k − I‖_F at θ.
    pub fn trace_preservation_defect(&self, theta: f64) -> f64 {
        let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
        for op in self.kraus_at(theta) {
            acc = acc.add(&op.dagger().matmul(&op).unwrap()).unwrap();
        }
        acc.sub(&ComplexMatrix::identity(self.dim))
            .unwrap()
            .frobenius_norm()
    }

    /// ρ(θ) = Σ_k Υ_k ρ₀ Υ_k†.
    pub fn output_state(&self, theta: f64, rho0: &QuantumState) -> Result<ComplexMatrix> {
        self.domain.check(theta)?;
        self.check_state_dim(rho0)?;
        let rho = rho0.density();
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for op in self.kraus_at(theta) {
            out = out.add(&op.matmul(&rho)?.matmul(&op.dagger())?)?;
        }
        Ok(out)
    }

    /// ρ'(θ) = Σ_k (Υ_k' ρ₀ Υ_k† + Υ_k ρ₀ Υ_k'†).
    pub fn output_derivative(&self, theta: f64, rho0: &QuantumState) -> Result<ComplexMatrix> {
        self.domain.check(theta)?;
        self.check_state_dim(rho0)?;
        let rho = rho0.density();
        let ops = self.kraus_at(theta);
        let derivs = self.kraus_deriv_at(theta);
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for (op, dop) in ops.iter().zip(derivs.iter()) {
            let term = dop.matmul(&rho)?.matmul(&op.dagger())?;
            out = out.add(&term)?.add(&term.dagger())?;
        }
        Ok(out)
    }

    fn check_state_dim(&self, rho0: &QuantumState) -> Result<()> {
        if rho0.dim() != self.dim {
            return Err(Error::Shape(format!(
                "input state dimension {} does not match channel dimension {}",
                rho0.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Extends the channel to I ⊗ E on dimension d², leaving the first
    /// factor untouched.
    pub fn extend_identity(&self) -> ParamKrausFamily {
        let d = self.dim;
        let kraus = Arc::clone(&self.kraus);
        let deriv = Arc::clone(&self.kraus_deriv);
        let lift = move |ops: Vec<ComplexMatrix>| -> Vec<ComplexMatrix> {
            let eye = ComplexMatrix::identity(d);
            ops.into_iter().map(|op| eye.kron(&op)).collect()
        };
        let lift2 = lift;
        ParamKrausFamily {
            label: format!("identity⊗{}", self.label),
            dim: d * d,
            n_kraus: self.n_kraus,
            domain: self.domain,
            trace_tol: self.trace_tol,
            kraus: Arc::new(move |theta| lift(kraus(theta))),
            kraus_deriv: Arc::new(move |theta| lift2(deriv(theta))),
        }
    }

    /// Two independent copies E ⊗ E with the same parameter; derivatives by
    /// the product rule.
    pub fn tensor_square(&self) -> ParamKrausFamily {
        let kraus = Arc::clone(&self.kraus);
        let kraus2 = Arc::clone(&self.kraus);
        let deriv = Arc::clone(&self.kraus_deriv);
        let d = self.dim;
        let n = self.n_kraus;
        ParamKrausFamily {
            label: format!("{0}⊗{0}", self.label),
            dim: d * d,
            n_kraus: n * n,
            domain: self.domain,
            trace_tol: self.trace_tol,
            kraus: Arc::new(move |theta| {
                let ops = kraus(theta);
                let mut out = Vec::with_capacity(ops.len() * ops.len());
                for a in &ops {
                    for b in &ops {
                        out.push(a.kron(b));
                    }
                }
                out
            }),
            kraus_deriv: Arc::new(move |theta| {
                let ops = kraus2(theta);
                let dops = deriv(theta);
                let mut out = Vec::with_capacity(ops.len() * ops.len());
                for (a, da) in ops.iter().zip(dops.iter()) {
                    for (b, db) in ops.iter().zip(dops.iter()) {
                        out.push(da.kron(b).add(&a.kron(db)).unwrap());
                    }
                }
                out
            }),
        }
    }
}

/// Channel-specific settings for [`builtin`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinParams {
    /// Fock cutoff for `damping`.
    pub n_max: Option<usize>,
    /// Hilbert-space dimension for `random-shift` (defaults to the smallest
    /// wraparound-free choice).
    pub dim: Option<usize>,
    /// Largest parameter value the `random-shift` truncation must cover.
    pub theta_max: Option<f64>,
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 5] = [
    "depolarizing",
    "depolarizing-canonical",
    "dephasing",
    "random-shift",
    "damping",
];

/// Constructs a builtin channel family by name.
pub fn builtin(name: &str, params: &BuiltinParams) -> Result<ParamKrausFamily> {
    match name {
        "depolarizing" => Ok(depolarizing()),
        "depolarizing-canonical" => Ok(depolarizing_canonical()),
        "dephasing" => Ok(dephasing()),
        "random-shift" => {
            let theta_max = params.theta_max.ok_or_else(|| {
                Error::InvalidChannel("random-shift requires theta_max".into())
            })?;
            random_shift(params.dim, theta_max)
        }
        "damping" => {
            let n_max = params
                .n_max
                .ok_or_else(|| Error::InvalidChannel("damping requires n_max".into()))?;
            damping(n_max)
        }
        other => Err(Error::InvalidChannel(format!(
            "unknown channel '{other}'; available: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// Qubit depolarizing channel {√(1−p) I, √(p/3) X, √(p/3) Y, √(p/3) Z} on
/// p ∈ (0, 1).
pub fn depolarizing() -> ParamKrausFamily {
    let ops = |p: f64| {
        vec![
            ComplexMatrix::identity(2).scale(c((1.0 - p).sqrt(), 0.0)),
            pauli_x().scale(c((p / 3.0).sqrt(), 0.0)),
            pauli_y().scale(c((p / 3.0).sqrt(), 0.0)),
            pauli_z().scale(c((p / 3.0).sqrt(), 0.0)),
        ]
    };
    let derivs: KrausFn = Arc::new(|p: f64| {
        let d_sq1p = -0.5 / (1.0 - p).sqrt();
        let d_sqp3 = 0.5 / (3.0 * p).sqrt();
        vec![
            ComplexMatrix::identity(2).scale(c(d_sq1p, 0.0)),
            pauli_x().scale(c(d_sqp3, 0.0)),
            pauli_y().scale(c(d_sqp3, 0.0)),
            pauli_z().scale(c(d_sqp3, 0.0)),
        ]
    });
    ParamKrausFamily::new(
        "depolarizing",
        2,
        4,
        ThetaDomain::new(0.0, 1.0),
        ops,
        Some(derivs),
    )
}

/// The depolarizing channel in the Kraus form that is canonical for the
/// input |0⟩: the Gram matrix ⟨0|Υ_j†Υ_k|0⟩ is diagonal at every p.
pub fn depolarizing_canonical() -> ParamKrausFamily {
    let ops = |p: f64| {
        let q = 1.0 - p;
        let s = q + p / 3.0;
        let w = (p / 6.0).sqrt();
        let g = (q * (p / 3.0) / s).sqrt();
        vec![
            pauli_x()
                .scale(c(0.0, w))
                .add(&pauli_y().scale(c(w, 0.0)))
                .unwrap(),
            ComplexMatrix::identity(2)
                .scale(c(q / s.sqrt(), 0.0))
                .add(&pauli_z().scale(c(p / 3.0 / s.sqrt(), 0.0)))
                .unwrap(),
            pauli_x()
                .scale(c(w, 0.0))
                .add(&pauli_y().scale(c(0.0, w)))
                .unwrap(),
            ComplexMatrix::identity(2)
                .scale(c(-g, 0.0))
                .add(&pauli_z().scale(c(g, 0.0)))
                .unwrap(),
        ]
    };
    let derivs: KrausFn = Arc::new(|p: f64| {
        let q = 1.0 - p;
        let s = q + p / 3.0;
        let dw = 0.5 / (6.0 * p).sqrt();
        // d/dp of q·s^{-1/2} and (p/3)·s^{-1/2}, using ds/dp = -2/3.
        let d_qs = -s.powf(-0.5) + (q / 3.0) * s.powf(-1.5);
        let d_ps = s.powf(-0.5) / 3.0 + (p / 9.0) * s.powf(-1.5);
        let g = (q * (p / 3.0) / s).sqrt();
        let dg = 0.5 * g * (1.0 / p - 1.0 / q + 2.0 / (3.0 * s));
        vec![
            pauli_x()
                .scale(c(0.0, dw))
                .add(&pauli_y().scale(c(dw, 0.0)))
                .unwrap(),
            ComplexMatrix::identity(2)
                .scale(c(d_qs, 0.0))
                .add(&pauli_z().scale(c(d_ps, 0.0)))
                .unwrap(),
            pauli_x()
                .scale(c(dw, 0.0))
                .add(&pauli_y().scale(c(0.0, dw)))
                .unwrap(),
            ComplexMatrix::identity(2)
                .scale(c(-dg, 0.0))
                .add(&pauli_z().scale(c(dg, 0.0)))
                .unwrap(),
        ]
    });
    ParamKrausFamily::new(
        "depolarizing-canonical",
        2,
        4,
        ThetaDomain::new(0.0, 1.0),
        ops,
        Some(derivs),
    )
}

/// Pure dephasing channel {√((1+e^{−2θ})/2) I, √((1−e^{−2θ})/2) Z} on
/// θ ∈ (0, ∞).
pub fn dephasing() -> ParamKrausFamily {
    let ops = |theta: f64| {
        let e = (-2.0 * theta).exp();
        vec![
            ComplexMatrix::identity(2).scale(c(((1.0 + e) / 2.0).sqrt(), 0.0)),
            pauli_z().scale(c(((1.0 - e) / 2.0).sqrt(), 0.0)),
        ]
    };
    let derivs: KrausFn = Arc::new(|theta: f64| {
        let e = (-2.0 * theta).exp();
        let p_plus = (1.0 + e) / 2.0;
        let p_minus = (1.0 - e) / 2.0;
        vec![
            ComplexMatrix::identity(2).scale(c(-e / (2.0 * p_plus.sqrt()), 0.0)),
            pauli_z().scale(c(e / (2.0 * p_minus.sqrt()), 0.0)),
        ]
    });
    ParamKrausFamily::new(
        "dephasing",
        2,
        2,
        ThetaDomain::new(0.0, f64::INFINITY),
        ops,
        Some(derivs),
    )
}

/// Smallest k with Poisson(θ) tail mass beyond k below `RANDOM_SHIFT_TAIL`,
/// together with that tail mass.
pub fn poisson_cutoff(theta: f64) -> (usize, f64) {
    let mut pmf = (-theta).exp();
    let mut cum = pmf;
    let mut k = 0usize;
    while 1.0 - cum >= RANDOM_SHIFT_TAIL && k < 10_000 {
        k += 1;
        pmf *= theta / k as f64;
        cum += pmf;
    }
    (k, (1.0 - cum).max(0.0))
}

/// Random shift channel realized on a d-dimensional cyclic shift:
/// Λ_k(θ) = (θ^{k/2}/√k!) e^{−θ/2} U^k for k = 0..k_max, with k_max set by
/// the Poisson tail rule at `theta_max` and d ≥ k_max + 2 so reachable
/// positions never wrap.
pub fn random_shift(dim: Option<usize>, theta_max: f64) -> Result<ParamKrausFamily> {
    if !(theta_max > 0.0) || !theta_max.is_finite() {
        return Err(Error::InvalidChannel(format!(
            "random-shift theta_max must be positive and finite, got {theta_max}"
        )));
    }
    // Pad the covered range slightly so theta_max itself lies strictly
    // inside the open domain.
    let covered = theta_max * (1.0 + 1e-3);
    let (k_max, tail) = poisson_cutoff(covered);
    let d = dim.unwrap_or(k_max + 2);
    if d < k_max + 2 {
        return Err(Error::InvalidChannel(format!(
            "random-shift dimension {d} too small: need at least k_max + 2 = {}",
            k_max + 2
        )));
    }
    // Cyclic shift U|x⟩ = |x+1 mod d⟩.
    let mut shift = ComplexMatrix::zeros(d, d);
    for x in 0..d {
        shift.set((x + 1) % d, x, c(1.0, 0.0));
    }
    let powers = {
        let mut powers = Vec::with_capacity(k_max + 1);
        powers.push(ComplexMatrix::identity(d));
        for k in 1..=k_max {
            let next = shift.matmul(&powers[k - 1]).unwrap();
            powers.push(next);
        }
        Arc::new(powers)
    };
    let weights = move |theta: f64| -> Vec<f64> {
        // w_k = θ^{k/2} e^{−θ/2} / √k!, built iteratively.
        let mut w = Vec::with_capacity(k_max + 1);
        let mut cur = (-theta / 2.0).exp();
        w.push(cur);
        for k in 1..=k_max {
            cur *= (theta / k as f64).sqrt();
            w.push(cur);
        }
        w
    };
    let powers2 = Arc::clone(&powers);
    let weights2 = weights;
    let ops = move |theta: f64| -> Vec<ComplexMatrix> {
        weights2(theta)
            .into_iter()
            .enumerate()
            .map(|(k, w)| powers[k].scale(c(w, 0.0)))
            .collect()
    };
    let derivs: KrausFn = Arc::new(move |theta: f64| {
        weights2(theta)
            .into_iter()
            .enumerate()
            .map(|(k, w)| {
                let factor = k as f64 / (2.0 * theta) - 0.5;
                powers2[k].scale(c(w * factor, 0.0))
            })
            .collect()
    });
    Ok(ParamKrausFamily::new(
        "random-shift",
        d,
        k_max + 1,
        ThetaDomain::new(0.0, covered),
        ops,
        Some(derivs),
    )
    .with_trace_tol(TRACE_PRESERVATION_TOL.max(2.0 * tail * (d as f64).sqrt())))
}

/// Damping channel on a Fock space truncated at `n_max`:
/// Δ_k(θ) = ((1−e^{−θ})^{k/2}/√k!) e^{−(θ/2) n̂} a^k for k = 0..n_max.
///
/// The truncation is exact for inputs with at most `n_max` quanta, so the
/// family is trace preserving on the whole truncated space.
pub fn damping(n_max: usize) -> Result<ParamKrausFamily> {
    if n_max == 0 {
        return Err(Error::InvalidChannel(
            "damping n_max must be at least 1".into(),
        ));
    }
    let d = n_max + 1;
    let mut lower = ComplexMatrix::zeros(d, d);
    for n in 1..d {
        lower.set(n - 1, n, c((n as f64).sqrt(), 0.0));
    }
    let lower_powers = {
        let mut powers = Vec::with_capacity(d);
        powers.push(ComplexMatrix::identity(d));
        for k in 1..d {
            let next = lower.matmul(&powers[k - 1]).unwrap();
            powers.push(next);
        }
        Arc::new(powers)
    };
    let number_diag: Vec<f64> = (0..d).map(|n| n as f64).collect();
    let ops_at = {
        let lower_powers = Arc::clone(&lower_powers);
        let number_diag = number_diag.clone();
        move |theta: f64| -> Vec<ComplexMatrix> {
            let decay = ComplexMatrix::from_real_diag(
                &number_diag
                    .iter()
                    .map(|&n| (-theta * n / 2.0).exp())
                    .collect::<Vec<_>>(),
            );
            let q = 1.0 - (-theta).exp();
            let mut coeff = 1.0;
            (0..=n_max)
                .map(|k| {
                    if k > 0 {
                        coeff *= (q / k as f64).sqrt();
                    }
                    decay.matmul(&lower_powers[k]).unwrap().scale(c(coeff, 0.0))
                })
                .collect()
        }
    };
    let ops_for_deriv = ops_at.clone();
    let derivs: KrausFn = Arc::new(move |theta: f64| {
        // Δ_k'(θ) = (k e^{−θ} / (2(1−e^{−θ})) − n̂/2) Δ_k(θ).
        let e = (-theta).exp();
        let q = 1.0 - e;
        let ops = ops_for_deriv(theta);
        ops.into_iter()
            .enumerate()
            .map(|(k, op)| {
                let scalar = k as f64 * e / (2.0 * q);
                let mut out = op.scale(c(scalar, 0.0));
                // Subtract (n̂/2) Δ_k row by row: row n of Δ_k scales by n/2.
                for i in 0..op.rows() {
                    for j in 0..op.cols() {
                        let v = out.get(i, j) - op.get(i, j) * c(i as f64 / 2.0, 0.0);
                        out.set(i, j, v);
                    }
                }
                out
            })
            .collect()
    });
    Ok(ParamKrausFamily::new(
        "damping",
        d,
        n_max + 1,
        ThetaDomain::new(0.0, f64::INFINITY),
        ops_at,
        Some(derivs),
    ))
}

/// One-operator unitary family exp(−iθZ/2); its bound at |0⟩ is 1.
pub fn phase_rotation() -> ParamKrausFamily {
    let ops = |theta: f64| {
        vec![ComplexMatrix::new(
            2,
            2,
            vec![
                Complex64::from_polar(1.0, -theta / 2.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                Complex64::from_polar(1.0, theta / 2.0),
            ],
        )
        .unwrap()]
    };
    let derivs: KrausFn = Arc::new(|theta: f64| {
        vec![ComplexMatrix::new(
            2,
            2,
            vec![
                Complex64::from_polar(0.5, -theta / 2.0 - std::f64::consts::FRAC_PI_2),
                c(0.0, 0.0),
                c(0.0, 0.0),
                Complex64::from_polar(0.5, theta / 2.0 + std::f64::consts::FRAC_PI_2),
            ],
        )
        .unwrap()]
    });
    ParamKrausFamily::new(
        "phase-rotation",
        2,
        1,
        ThetaDomain::new(-10.0, 10.0),
        ops,
        Some(derivs),
    )
}

/// The same unitary family with the θ-dependent phase e^{iθ/2} pulled out:
/// diag(1, e^{iθ}). Same channel, different decomposition; its bound at |0⟩
/// is 0.
pub fn phase_rotation_rephased() -> ParamKrausFamily {
    let ops = |theta: f64| {
        vec![ComplexMatrix::new(
            2,
            2,
            vec![
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                Complex64::from_polar(1.0, theta),
            ],
        )
        .unwrap()]
    };
    let derivs: KrausFn = Arc::new(|theta: f64| {
        vec![ComplexMatrix::new(
            2,
            2,
            vec![
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                Complex64::from_polar(1.0, theta + std::f64::consts::FRAC_PI_2),
            ],
        )
        .unwrap()]
    });
    ParamKrausFamily::new(
        "phase-rotation-rephased",
        2,
        1,
        ThetaDomain::new(-10.0, 10.0),
        ops,
        Some(derivs),
    )
}

/// Evenly spaced grid of `points` values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    let step = (stop - start) / (points - 1) as f64;
    (0..points).map(|i| start + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inner;

    fn grid(dom: &ThetaDomain, points: usize) -> Vec<f64> {
        let hi = if dom.hi.is_finite() { dom.hi } else { 3.0 };
        let span = hi - dom.lo;
        linspace(dom.lo + 0.02 * span, hi - 0.02 * span, points)
    }

    fn all_builtins() -> Vec<ParamKrausFamily> {
        vec![
            depolarizing(),
            depolarizing_canonical(),
            dephasing(),
            random_shift(None, 2.0).unwrap(),
            damping(3).unwrap(),
        ]
    }

    #[test]
    fn depolarizing_full_strength_matches_hand_evaluation() {
        // At p = 1 the surviving operators are the three Pauli terms with
        // weight 1/3; |0⟩⟨0| maps to diag(1/3, 2/3). The endpoint sits
        // outside the open domain, so evaluate the raw Kraus closure.
        let family = depolarizing();
        let ops = family.kraus_at(1.0);
        let rho = QuantumState::basis(2, 0).unwrap().density();
        let mut out = ComplexMatrix::zeros(2, 2);
        for op in &ops {
            out = out.add(&op.matmul(&rho).unwrap().matmul(&op.dagger()).unwrap()).unwrap();
        }
        let expect = ComplexMatrix::from_real_diag(&[1.0 / 3.0, 2.0 / 3.0]);
        assert!(out.max_abs_diff(&expect) < 1e-14);
        assert!(family.output_state(1.0, &QuantumState::basis(2, 0).unwrap()).is_err());
    }

    #[test]
    fn depolarizing_weak_limit_is_identity() {
        let family = depolarizing();
        let rho0 = QuantumState::pure_normalized(vec![
            Complex64::new(0.8, 0.1),
            Complex64::new(0.3, -0.4),
        ])
        .unwrap();
        let out = family.output_state(1e-13, &rho0).unwrap();
        assert!(out.max_abs_diff(&rho0.density()) < 1e-12);
    }

    #[test]
    fn dephasing_diagonal_in_x_basis() {
        let family = dephasing();
        let theta = 0.7;
        let out = family.output_state(theta, &QuantumState::plus()).unwrap();
        let plus = QuantumState::plus();
        let minus = QuantumState::minus();
        let p_plus = inner(
            plus.amplitudes().unwrap(),
            &out.apply(plus.amplitudes().unwrap()).unwrap(),
        );
        let p_minus = inner(
            minus.amplitudes().unwrap(),
            &out.apply(minus.amplitudes().unwrap()).unwrap(),
        );
        let e = (-2.0 * theta).exp();
        assert!((p_plus.re - (1.0 + e) / 2.0).abs() < 1e-13);
        assert!((p_minus.re - (1.0 - e) / 2.0).abs() < 1e-13);
        let cross = inner(
            plus.amplitudes().unwrap(),
            &out.apply(minus.amplitudes().unwrap()).unwrap(),
        );
        assert!(cross.norm() < 1e-13);
    }

    #[test]
    fn output_derivative_constant_family_is_zero() {
        let family = ParamKrausFamily::new(
            "constant",
            2,
            1,
            ThetaDomain::new(-1.0, 1.0),
            |_theta| vec![ComplexMatrix::identity(2)],
            None,
        );
        let out = family
            .output_derivative(0.3, &QuantumState::basis(2, 0).unwrap())
            .unwrap();
        assert!(out.frobenius_norm() < 1e-12);
    }

    #[test]
    fn output_derivative_dephasing_plus_state() {
        let family = dephasing();
        let theta = 0.45;
        let d = family.output_derivative(theta, &QuantumState::plus()).unwrap();
        let e = (-2.0 * theta).exp();
        let plus = QuantumState::plus();
        let minus = QuantumState::minus();
        let d_plus = inner(plus.amplitudes().unwrap(), &d.apply(plus.amplitudes().unwrap()).unwrap());
        let d_minus = inner(
            minus.amplitudes().unwrap(),
            &d.apply(minus.amplitudes().unwrap()).unwrap(),
        );
        assert!((d_plus.re + e).abs() < 1e-12);
        assert!((d_minus.re - e).abs() < 1e-12);
        assert!(d.trace().norm() < 1e-12);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        for family in all_builtins() {
            for &theta in &grid(&family.domain(), 20) {
                let h = 1e-6;
                let plus = family.kraus_at(theta + h);
                let minus = family.kraus_at(theta - h);
                let derivs = family.kraus_deriv_at(theta);
                for ((p, m), d) in plus.iter().zip(minus.iter()).zip(derivs.iter()) {
                    let fd = p.sub(m).unwrap().scale(Complex64::new(0.5 / h, 0.0));
                    assert!(
                        fd.sub(d).unwrap().frobenius_norm() < 1e-5,
                        "family {} theta {}",
                        family.label(),
                        theta
                    );
                }
            }
        }
    }

    #[test]
    fn builtins_preserve_trace_and_positivity_on_grid() {
        let rho0s: Vec<QuantumState> = vec![
            QuantumState::basis(2, 0).unwrap(),
            QuantumState::basis(2, 0).unwrap(),
            QuantumState::plus(),
            QuantumState::basis(random_shift(None, 2.0).unwrap().dim(), 0).unwrap(),
            QuantumState::basis(4, 3).unwrap(),
        ];
        for (family, rho0) in all_builtins().into_iter().zip(rho0s) {
            for &theta in &grid(&family.domain(), 20) {
                let defect = family.trace_preservation_defect(theta);
                assert!(
                    defect <= family.trace_tol(),
                    "family {} theta {} defect {defect:.3e}",
                    family.label(),
                    theta
                );
                let out = family.output_state(theta, &rho0).unwrap();
                assert!((out.trace().re - 1.0).abs() < family.trace_tol().max(1e-10));
                let eig = eig_hermitian(&out).unwrap();
                assert!(eig.eigenvalues[0] > -1e-9);
                let dtrace = family.output_derivative(theta, &rho0).unwrap().trace();
                assert!(dtrace.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn dephasing_asymptotic_weights() {
        let ops = dephasing().kraus_at(20.0);
        let w0 = ops[0].get(0, 0).re;
        let w1 = ops[1].get(0, 0).re;
        assert!((w0 - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((w1 - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn damping_truncation_is_exact() {
        let family = damping(3).unwrap();
        assert!(family.trace_preservation_defect(0.5) < 1e-10);
    }

    #[test]
    fn random_shift_tail_rule() {
        let family = random_shift(Some(40), 1.0).unwrap();
        // Trace defect comes only from the Poisson tail.
        let mut acc = ComplexMatrix::zeros(40, 40);
        for op in family.kraus_at(1.0) {
            acc = acc.add(&op.dagger().matmul(&op).unwrap()).unwrap();
        }
        let deficiency = (1.0 - acc.get(0, 0).re).abs();
        assert!(deficiency <= 1e-12, "deficiency {deficiency:.3e}");
        assert!(random_shift(Some(3), 1.0).is_err());
    }

    #[test]
    fn extend_identity_preserves_structure() {
        let base = depolarizing();
        let extended = base.extend_identity();
        assert_eq!(extended.n_kraus(), base.n_kraus());
        assert_eq!(extended.dim(), 4);
        assert!(extended.trace_preservation_defect(0.3) < 1e-10);
        // Operators are I⊗Υ_k by construction.
        let ops = extended.kraus_at(0.3);
        let base_ops = base.kraus_at(0.3);
        let eye = ComplexMatrix::identity(2);
        for (ext, b) in ops.iter().zip(base_ops.iter()) {
            assert!(ext.max_abs_diff(&eye.kron(b)) < 1e-15);
        }
    }

    #[test]
    fn tensor_square_factorizes_on_product_input() {
        let base = dephasing();
        let squared = base.tensor_square();
        assert_eq!(squared.n_kraus(), 4);
        assert!(squared.trace_preservation_defect(0.4) < 1e-10);
        let theta = 0.4;
        let a = QuantumState::plus();
        let b = QuantumState::basis(2, 1).unwrap();
        let product = QuantumState::pure_normalized({
            let mut amps = Vec::new();
            for x in a.amplitudes().unwrap() {
                for y in b.amplitudes().unwrap() {
                    amps.push(x * y);
                }
            }
            amps
        })
        .unwrap();
        let joint = squared.output_state(theta, &product).unwrap();
        let separate = base
            .output_state(theta, &a)
            .unwrap()
            .kron(&base.output_state(theta, &b).unwrap());
        assert!(joint.max_abs_diff(&separate) < 1e-12);
    }

    #[test]
    fn builtin_dispatch() {
        assert!(builtin("depolarizing", &BuiltinParams::default()).is_ok());
        assert!(builtin("damping", &BuiltinParams::default()).is_err());
        assert!(builtin(
            "damping",
            &BuiltinParams {
                n_max: Some(2),
                ..Default::default()
            }
        )
        .is_ok());
        assert!(builtin("nonsense", &BuiltinParams::default()).is_err());
    }

    #[test]
    fn out_of_domain_and_dimension_errors() {
        let family = depolarizing();
        let rho0 = QuantumState::basis(2, 0).unwrap();
        assert!(family.output_state(-0.1, &rho0).is_err());
        assert!(family.output_state(1.5, &rho0).is_err());
        let wrong = QuantumState::basis(3, 0).unwrap();
        assert!(family.output_state(0.5, &wrong).is_err());
    }

    #[test]
    fn quantum_state_validation() {
        assert!(QuantumState::pure(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(QuantumState::pure(vec![c(1.0, 0.0), c(0.0, 0.0)]).is_ok());
        let not_density = ComplexMatrix::from_real_diag(&[0.9, 0.3]);
        assert!(QuantumState::mixed(not_density).is_err());
        let ok = ComplexMatrix::from_real_diag(&[0.25, 0.75]);
        assert!(QuantumState::mixed(ok).is_ok());
        assert!(QuantumState::bell(4).is_err());
        assert_eq!(QuantumState::bell(0).unwrap().dim(), 4);
    }
}
