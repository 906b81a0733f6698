//! The Bell operator, the GHZ state, quantum values, Born probabilities,
//! generalized correlators, and evaluation of the Bell functional on
//! correlator tables.
//!
//! The operator for N parties with m inputs and d outcomes sums, over
//! α⃗ ∈ [1..m]^{N−1} (with α_N = 1) and k ∈ 1..d−1, the two conjugate term
//! families a_k·A₁ᵏ⊗∏Aᵢ^{±k} and a_k*·(first index shifted by one), with
//! out-of-range indices resolved through the cyclic convention.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{check_root_of_unity_observable, tensor_product, CMatrix, CVector};
use crate::observables::{
    bell_coefficients, ideal_observable, omega_int, BellCoefficients, PartyClass, QuditObservable,
};
use crate::scenario::{resolve_observable_index, BellScenario, DeterministicStrategy};

/// Joint-dimension cap for dense operator work.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// A state and per-party observables over a scenario.
#[derive(Debug, Clone)]
pub struct Realization {
    scenario: BellScenario,
    state: CVector,
    /// observables[i][x-1] is party (i+1)'s observable for input x.
    observables: Vec<Vec<QuditObservable>>,
}

impl Realization {
    pub fn new(
        scenario: BellScenario,
        state: CVector,
        observables: Vec<Vec<QuditObservable>>,
    ) -> Result<Self> {
        if observables.len() != scenario.parties() {
            return Err(Error::InvalidArgument(format!(
                "expected observables for {} parties, got {}",
                scenario.parties(),
                observables.len()
            )));
        }
        let mut joint_dim = 1usize;
        for (i, party) in observables.iter().enumerate() {
            if party.len() != scenario.inputs() {
                return Err(Error::InvalidArgument(format!(
                    "party {} has {} observables, expected {}",
                    i + 1,
                    party.len(),
                    scenario.inputs()
                )));
            }
            let dim = party[0].matrix().rows();
            for (x, obs) in party.iter().enumerate() {
                if obs.matrix().rows() != dim || obs.matrix().cols() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "party {} input {} has inconsistent dimension",
                        i + 1,
                        x + 1
                    )));
                }
                let rep = check_root_of_unity_observable(obs.matrix(), scenario.outcomes(), 1e-9)?;
                if !(rep.is_unitary && rep.order_d_holds) {
                    return Err(Error::ContractViolation {
                        check: format!("party {} input {} observable validity", i + 1, x + 1),
                        residual: rep.max_residual,
                        tol: 1e-9,
                    });
                }
            }
            joint_dim = joint_dim
                .checked_mul(dim)
                .ok_or_else(|| Error::InvalidArgument("joint dimension overflow".into()))?;
        }
        if state.dim() != joint_dim {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} does not match joint observable dimension {}",
                state.dim(),
                joint_dim
            )));
        }
        if (state.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::ContractViolation {
                check: "state normalization".into(),
                residual: (state.norm() - 1.0).abs(),
                tol: 1e-12,
            });
        }
        Ok(Self {
            scenario,
            state,
            observables,
        })
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn state(&self) -> &CVector {
        &self.state
    }

    /// Observable of 1-based `party` for 1-based `input`.
    pub fn observable(&self, party: usize, input: usize) -> &QuditObservable {
        &self.observables[party - 1][input - 1]
    }

    pub fn observables(&self) -> &[Vec<QuditObservable>] {
        &self.observables
    }

    pub fn party_dims(&self) -> Vec<usize> {
        self.observables
            .iter()
            .map(|p| p[0].matrix().rows())
            .collect()
    }
}

/// The N-partite GHZ state (1/√d)Σ|i⟩^⊗N with party 1 most significant.
pub fn ghz_state(parties: usize, outcomes: usize) -> Result<CVector> {
    ghz_state_with_cap(parties, outcomes, DEFAULT_DIM_CAP)
}

pub fn ghz_state_with_cap(parties: usize, outcomes: usize, dim_cap: usize) -> Result<CVector> {
    if parties < 2 || outcomes < 2 {
        return Err(Error::InvalidArgument(format!(
            "ghz_state needs N, d >= 2, got ({parties}, {outcomes})"
        )));
    }
    let dim = outcomes
        .checked_pow(parties as u32)
        .filter(|&dim| dim <= dim_cap)
        .ok_or(Error::ResourceLimit {
            what: "joint dimension d^N".into(),
            required: (outcomes as u128).pow(parties as u32),
            cap: dim_cap as u128,
            hint: None,
        })?;
    let mut v = CVector::zeros(dim);
    let amp = Complex64::new(1.0 / (outcomes as f64).sqrt(), 0.0);
    // |i⟩^⊗N sits at index i·(d^{N-1} + ... + d + 1)
    let stride: usize = (0..parties).map(|p| outcomes.pow(p as u32)).sum();
    for i in 0..outcomes {
        v.entries_mut()[i * stride] = amp;
    }
    Ok(v)
}

/// The GHZ state together with the ideal observables for every party.
pub fn ideal_realization(scenario: &BellScenario) -> Result<Realization> {
    let (n, m, d) = (scenario.parties(), scenario.inputs(), scenario.outcomes());
    let state = ghz_state(n, d)?;
    let mut observables = Vec::with_capacity(n);
    for party in 1..=n {
        let class = PartyClass::for_party(party);
        let mut per_input = Vec::with_capacity(m);
        for x in 1..=m {
            per_input.push(ideal_observable(class, x, m, d)?);
        }
        observables.push(per_input);
    }
    Realization::new(*scenario, state, observables)
}

/// The assembled Bell operator with its scenario and the closed-form
/// quantum maximum m^{N−1}(d−1) it is certified against.
#[derive(Debug, Clone)]
pub struct BellOperatorMatrix {
    matrix: CMatrix,
    scenario: BellScenario,
    beta_q_formula: f64,
}

impl BellOperatorMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn beta_q_formula(&self) -> f64 {
        self.beta_q_formula
    }
}

/// One additive term of the Bell operator: a scalar times a tensor product
/// of powered party observables.
struct BellTerm {
    coeff: Complex64,
    factor_indices: Vec<(usize, usize)>, // (party-1, power index 0..d-1) into a power table
}

/// Powers A^p, p = 0..d−1, for every (party, input).
struct PowerTable {
    d: usize,
    inputs: usize,
    powers: Vec<CMatrix>, // [(party, input, p)] flattened
}

impl PowerTable {
    fn build(r: &Realization) -> Self {
        let d = r.scenario().outcomes();
        let m = r.scenario().inputs();
        let mut powers = Vec::with_capacity(r.scenario().parties() * m * d);
        for party in 0..r.scenario().parties() {
            for input in 0..m {
                let a = r.observable(party + 1, input + 1).matrix();
                let mut acc = CMatrix::identity(a.rows());
                for _ in 0..d {
                    powers.push(acc.clone());
                    acc = acc.matmul(a);
                }
            }
        }
        Self {
            d,
            inputs: m,
            powers,
        }
    }

    fn get(&self, party: usize, input: usize, p: usize) -> &CMatrix {
        &self.powers[(party * self.inputs + input) * self.d + p]
    }
}

pub(crate) fn for_each_alpha(
    parties: usize,
    inputs: usize,
    mut f: impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    // α⃗ ∈ [1..m]^{N−1}, fixed α_N = 1 appended
    let free = parties - 1;
    let mut alphas = vec![1usize; parties];
    loop {
        f(&alphas)?;
        let mut pos = free;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            if alphas[pos] < inputs {
                alphas[pos] += 1;
                for a in alphas.iter_mut().take(free).skip(pos + 1) {
                    *a = 1;
                }
                break;
            }
        }
    }
}

fn bell_terms(realization: &Realization, coeffs: &BellCoefficients) -> Result<Vec<BellTerm>> {
    let scenario = realization.scenario();
    let (n, m, d) = (scenario.parties(), scenario.inputs(), scenario.outcomes());
    let mut terms = Vec::new();
    for_each_alpha(n, m, |alphas| {
        for k in 1..d {
            // shared factors for parties 2..N
            let mut rest = Vec::with_capacity(n - 1);
            let mut rest_phase = Complex64::new(1.0, 0.0);
            for party in 2..=n {
                let raw = alphas[party - 2] + alphas[party - 1] - 1;
                let signed = if party % 2 == 1 {
                    k as i64
                } else {
                    -(k as i64)
                };
                let resolved = resolve_observable_index(raw, m)?;
                rest_phase *= omega_int(d, resolved.phase_exponent * signed);
                rest.push((
                    party - 1,
                    signed.rem_euclid(d as i64) as usize,
                    resolved.base_input - 1,
                ));
            }
            for (shift, conj) in [(0usize, false), (1usize, true)] {
                let raw_first = alphas[0] + shift;
                let resolved = resolve_observable_index(raw_first, m)?;
                let base_coeff = if conj {
                    coeffs.a(k).conj()
                } else {
                    coeffs.a(k)
                };
                let coeff =
                    base_coeff * omega_int(d, resolved.phase_exponent * k as i64) * rest_phase;
                let mut factor_indices = Vec::with_capacity(n);
                factor_indices.push((resolved.base_input - 1, k));
                for &(party_idx, p, input_idx) in &rest {
                    let _ = party_idx;
                    factor_indices.push((input_idx, p));
                }
                terms.push(BellTerm {
                    coeff,
                    factor_indices,
                });
            }
        }
        Ok(())
    })?;
    Ok(terms)
}

/// Assembles the Bell operator for a realization. The result is validated
/// Hermitian within 1e−9 relative Frobenius norm.
pub fn bell_operator(realization: &Realization) -> Result<BellOperatorMatrix> {
    let scenario = *realization.scenario();
    let (n, m, d) = (scenario.parties(), scenario.inputs(), scenario.outcomes());
    let dims = realization.party_dims();
    let joint_dim: usize = dims.iter().product();
    let coeffs = bell_coefficients(m, d)?;
    let table = PowerTable::build(realization);
    let terms = bell_terms(realization, &coeffs)?;

    // fixed-size chunks keep the summation order independent of thread count
    let chunk = 32;
    let partials: Vec<CMatrix> = terms
        .par_chunks(chunk)
        .map(|chunk_terms| {
            let mut acc = CMatrix::zeros(joint_dim, joint_dim);
            for term in chunk_terms {
                let factors: Vec<&CMatrix> = term
                    .factor_indices
                    .iter()
                    .enumerate()
                    .map(|(party, &(input, p))| table.get(party, input, p))
                    .collect();
                let product = tensor_product(&factors).expect("factor list is non-empty");
                acc.axpy(term.coeff, &product);
            }
            acc
        })
        .collect();
    let mut matrix = CMatrix::zeros(joint_dim, joint_dim);
    for p in partials {
        matrix.axpy(Complex64::new(1.0, 0.0), &p);
    }

    let herm = matrix.hermiticity_residual();
    // degenerate observable draws can cancel the operator to near zero;
    // floor the scale at identity size so the check stays meaningful
    let scale = matrix.frobenius_norm().max((joint_dim as f64).sqrt());
    if herm > 1e-9 * scale {
        return Err(Error::ContractViolation {
            check: "Bell operator Hermiticity".into(),
            residual: herm / scale,
            tol: 1e-9,
        });
    }
    let beta_q_formula = (m as f64).powi(n as i32 - 1) * (d as f64 - 1.0);
    Ok(BellOperatorMatrix {
        matrix,
        scenario,
        beta_q_formula,
    })
}

/// ⟨ψ|Î|ψ⟩. The imaginary part must be below 1e−10 and is discarded.
pub fn quantum_value(state: &CVector, op: &BellOperatorMatrix) -> Result<f64> {
    if state.dim() != op.matrix().rows() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs operator dim {}",
            state.dim(),
            op.matrix().rows()
        )));
    }
    let value = state.dot(&op.matrix().apply(state));
    if value.im.abs() >= 1e-10 {
        return Err(Error::Numerical(format!(
            "expectation value has imaginary part {:.3e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// Joint outcome probabilities p(a⃗|x⃗) over a scenario, dense over both
/// input and outcome tuples (party 1 most significant).
#[derive(Debug, Clone)]
pub struct ProbabilityTable {
    scenario: BellScenario,
    values: Vec<f64>,
}

impl ProbabilityTable {
    pub fn new(scenario: BellScenario, values: Vec<f64>) -> Result<Self> {
        let expected = scenario
            .inputs()
            .pow(scenario.parties() as u32)
            .checked_mul(scenario.total_dim()?)
            .ok_or_else(|| Error::InvalidArgument("probability table too large".into()))?;
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "expected {expected} probabilities, got {}",
                values.len()
            )));
        }
        Ok(Self { scenario, values })
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn flat_input_index(&self, inputs: &[usize]) -> usize {
        let m = self.scenario.inputs();
        inputs.iter().fold(0, |acc, &x| acc * m + (x - 1))
    }

    pub fn flat_outcome_index(&self, outcomes: &[usize]) -> usize {
        let d = self.scenario.outcomes();
        outcomes.iter().fold(0, |acc, &a| acc * d + a)
    }

    pub fn probability(&self, inputs: &[usize], outcomes: &[usize]) -> f64 {
        let dn = self
            .scenario
            .total_dim()
            .expect("validated at construction");
        self.values[self.flat_input_index(inputs) * dn + self.flat_outcome_index(outcomes)]
    }

    /// All outcome probabilities for one input tuple.
    pub fn slice(&self, flat_input: usize) -> &[f64] {
        let dn = self
            .scenario
            .total_dim()
            .expect("validated at construction");
        &self.values[flat_input * dn..(flat_input + 1) * dn]
    }

    pub fn input_count(&self) -> usize {
        self.scenario.inputs().pow(self.scenario.parties() as u32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn apply_local_operator(
    op: &CMatrix,
    party: usize,
    dims: &[usize],
    state: &CVector,
) -> CVector {
    let d = dims[party];
    let right: usize = dims[party + 1..].iter().product();
    let left: usize = dims[..party].iter().product();
    let mut out = CVector::zeros(state.dim());
    let src = state.entries();
    let dst = out.entries_mut();
    for l in 0..left {
        for r in 0..right {
            let base = l * d * right + r;
            for row in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for col in 0..d {
                    acc += op[(row, col)] * src[base + col * right];
                }
                dst[base + row * right] = acc;
            }
        }
    }
    out
}

/// Born-rule probabilities of a realization. Measurement operators are
/// rebuilt from the observables by the inverse Fourier transform over
/// powers, M^a = (1/d)Σ_k ω^{−ak}A^k, and must be idempotent within 1e−7.
pub fn born_probabilities(realization: &Realization) -> Result<ProbabilityTable> {
    let scenario = *realization.scenario();
    let (n, m, d) = (scenario.parties(), scenario.inputs(), scenario.outcomes());
    let dims = realization.party_dims();

    // projectors[party][input][outcome]
    let mut projectors: Vec<Vec<Vec<CMatrix>>> = Vec::with_capacity(n);
    for party in 1..=n {
        let mut per_input = Vec::with_capacity(m);
        for input in 1..=m {
            let obs = realization.observable(party, input);
            let dim = obs.matrix().rows();
            let mut powers = Vec::with_capacity(d);
            let mut acc = CMatrix::identity(dim);
            for _ in 0..d {
                powers.push(acc.clone());
                acc = acc.matmul(obs.matrix());
            }
            let mut per_outcome = Vec::with_capacity(d);
            for a in 0..d {
                let mut proj = CMatrix::zeros(dim, dim);
                for (k, power) in powers.iter().enumerate() {
                    proj.axpy(omega_int(d, -((a * k) as i64)) / d as f64, power);
                }
                let idem = proj.matmul(&proj).sub(&proj).frobenius_norm();
                if idem > 1e-7 {
                    return Err(Error::ContractViolation {
                        check: format!(
                            "projector idempotency (party {party}, input {input}, outcome {a})"
                        ),
                        residual: idem,
                        tol: 1e-7,
                    });
                }
                per_outcome.push(proj);
            }
            per_input.push(per_outcome);
        }
        projectors.push(per_input);
    }

    let dn = scenario.total_dim()?;
    let input_combos = m.pow(n as u32);
    let mut values = vec![0.0f64; input_combos * dn];
    let mut inputs = vec![1usize; n];
    for flat_x in 0..input_combos {
        {
            let mut rest = flat_x;
            for i in (0..n).rev() {
                inputs[i] = rest % m + 1;
                rest /= m;
            }
        }
        // depth-first over outcome branches, projecting one party at a time
        let slice = &mut values[flat_x * dn..(flat_x + 1) * dn];
        let mut stack: Vec<(usize, usize, CVector)> = vec![(0, 0, realization.state().clone())];
        let mut outcome_path = vec![0usize; n];
        while let Some((party, outcome, state)) = stack.pop() {
            if party == n {
                continue;
            }
            if outcome >= d {
                continue;
            }
            // schedule the next sibling before descending
            stack.push((party, outcome + 1, state.clone()));
            outcome_path[party] = outcome;
            let projected = apply_local_operator(
                &projectors[party][inputs[party] - 1][outcome],
                party,
                &dims,
                &state,
            );
            if party + 1 == n {
                let p = projected.norm().powi(2);
                let flat_a = outcome_path.iter().fold(0, |acc, &a| acc * d + a);
                slice[flat_a] = p;
            } else {
                stack.push((party + 1, 0, projected));
            }
        }
        // clamp tiny negatives, verify slice normalization
        let mut sum = 0.0;
        for p in slice.iter_mut() {
            if *p < 0.0 {
                if *p < -1e-10 {
                    return Err(Error::Numerical(format!(
                        "probability {p:.3e} below tolerance at input tuple {inputs:?}"
                    )));
                }
                *p = 0.0;
            }
            sum += *p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::ContractViolation {
                check: format!("probability normalization at input tuple {inputs:?}"),
                residual: (sum - 1.0).abs(),
                tol: 1e-9,
            });
        }
    }
    ProbabilityTable::new(scenario, values)
}

/// Generalized correlators ⟨A₁^{k₁}…A_N^{k_N}⟩ over all (x⃗, k⃗), dense.
#[derive(Debug, Clone)]
pub struct CorrelatorTable {
    scenario: BellScenario,
    values: Vec<Complex64>,
}

impl CorrelatorTable {
    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn entry(&self, inputs: &[usize], powers: &[usize]) -> Complex64 {
        let m = self.scenario.inputs();
        let d = self.scenario.outcomes();
        let dn = self.scenario.total_dim().expect("validated");
        let fx = inputs.iter().fold(0, |acc, &x| acc * m + (x - 1));
        let fk = powers.iter().fold(0, |acc, &k| acc * d + k);
        self.values[fx * dn + fk]
    }

    /// Correlators of a deterministic strategy: ω^{a⃗·k⃗} per (x⃗, k⃗).
    pub fn from_strategy(
        strategy: &DeterministicStrategy,
        scenario: &BellScenario,
    ) -> Result<Self> {
        let (n, m, d) = (scenario.parties(), scenario.inputs(), scenario.outcomes());
        let dn = scenario.total_dim()?;
        let input_combos = m.pow(n as u32);
        let mut values = vec![Complex64::new(0.0, 0.0); input_combos * dn];
        let mut inputs = vec![1usize; n];
        let mut powers = vec![0usize; n];
        for fx in 0..input_combos {
            let mut rest = fx;
            for i in (0..n).rev() {
                inputs[i] = rest % m + 1;
                rest /= m;
            }
            for fk in 0..dn {
                let mut rest = fk;
                for i in (0..n).rev() {
                    powers[i] = rest % d;
                    rest /= d;
                }
                values[fx * dn + fk] =
                    crate::scenario::strategy_correlator(strategy, &inputs, &powers, d)?;
            }
        }
        Ok(Self {
            scenario: *scenario,
            values,
        })
    }
}

/// Fourier-transforms a probability table into generalized correlators,
/// entry(x⃗, k⃗) = Σ_a⃗ ω^{a⃗·k⃗} p(a⃗|x⃗). The input must be nonnegative and
/// normalized per input slice within 1e−6.
pub fn correlators_from_probabilities(table: &ProbabilityTable) -> Result<CorrelatorTable> {
    let scenario = *table.scenario();
    let (n, d) = (scenario.parties(), scenario.outcomes());
    let dn = scenario.total_dim()?;

    let mut worst_dev = 0.0f64;
    let mut worst_slice = 0usize;
    for fx in 0..table.input_count() {
        let slice = table.slice(fx);
        if let Some(&bad) = slice.iter().find(|&&p| p < -1e-12) {
            return Err(Error::Validation(format!(
                "negative probability {bad:.3e} in input slice {fx}"
            )));
        }
        let dev = (slice.iter().sum::<f64>() - 1.0).abs();
        if dev > worst_dev {
            worst_dev = dev;
            worst_slice = fx;
        }
    }
    if worst_dev > 1e-6 {
        return Err(Error::Validation(format!(
            "input slice {worst_slice} sums to 1{:+.3e}; tolerance is 1e-6",
            worst_dev
        )));
    }

    // d-point DFT along one party axis at a time
    let dft: Vec<Complex64> = (0..d * d)
        .map(|i| omega_int(d, (i / d * (i % d)) as i64))
        .collect();
    let mut values = vec![Complex64::new(0.0, 0.0); table.values().len()];
    let mut scratch = vec![Complex64::new(0.0, 0.0); dn];
    for fx in 0..table.input_count() {
        let out = &mut values[fx * dn..(fx + 1) * dn];
        for (o, &p) in out.iter_mut().zip(table.slice(fx)) {
            *o = Complex64::new(p, 0.0);
        }
        for axis in 0..n {
            let stride = d.pow((n - 1 - axis) as u32);
            let blocks = dn / (d * stride);
            for b in 0..blocks {
                for r in 0..stride {
                    let base = b * d * stride + r;
                    for k in 0..d {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for a in 0..d {
                            acc += dft[k * d + a] * out[base + a * stride];
                        }
                        scratch[k] = acc;
                    }
                    for k in 0..d {
                        out[base + k * stride] = scratch[k];
                    }
                }
            }
        }
    }
    Ok(CorrelatorTable { scenario, values })
}

/// Evaluates the Bell functional on a correlator table. Returns the real
/// part; the conjugate-pair structure keeps the imaginary residue below
/// 1e−9, which is asserted.
pub fn bell_value_from_correlators(
    table: &CorrelatorTable,
    coeffs: &BellCoefficients,
    scenario: &BellScenario,
) -> Result<f64> {
    if table.scenario() != scenario {
        return Err(Error::InvalidArgument(
            "correlator table scenario does not match".into(),
        ));
    }
    if coeffs.inputs() != scenario.inputs() || coeffs.outcomes() != scenario.outcomes() {
        return Err(Error::InvalidArgument(
            "coefficient table does not match scenario".into(),
        ));
    }
    let (n, m, d) = (scenario.parties(), scenario.inputs(), scenario.outcomes());
    let mut total = Complex64::new(0.0, 0.0);
    let mut inputs = vec![0usize; n];
    let mut powers = vec![0usize; n];
    for_each_alpha(n, m, |alphas| {
        for k in 1..d {
            for (shift, conj) in [(0usize, false), (1usize, true)] {
                let mut phase_exp = 0i64;
                let first = resolve_observable_index(alphas[0] + shift, m)?;
                inputs[0] = first.base_input;
                powers[0] = k;
                phase_exp += first.phase_exponent * k as i64;
                for party in 2..=n {
                    let raw = alphas[party - 2] + alphas[party - 1] - 1;
                    let resolved = resolve_observable_index(raw, m)?;
                    let signed = if party % 2 == 1 {
                        k as i64
                    } else {
                        -(k as i64)
                    };
                    inputs[party - 1] = resolved.base_input;
                    powers[party - 1] = signed.rem_euclid(d as i64) as usize;
                    phase_exp += resolved.phase_exponent * signed;
                }
                let coeff = if conj {
                    coeffs.a(k).conj()
                } else {
                    coeffs.a(k)
                };
                total += coeff * omega_int(d, phase_exp) * table.entry(&inputs, &powers);
            }
        }
        Ok(())
    })?;
    if total.im.abs() >= 1e-9 {
        return Err(Error::Numerical(format!(
            "Bell functional value has imaginary part {:.3e}",
            total.im
        )));
    }
    Ok(total.re)
}
