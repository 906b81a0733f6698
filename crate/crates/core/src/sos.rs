//! The sum-of-squares side of the certification: the P and R operators,
//! the operator identity β_Q·I − Î = ½ΣP†P + (m^{N−2}/2)ΣR†R in its main
//! and complementary variants, the full relation suite implied by maximal
//! violation, and the structural check that a state is GHZ-shaped.
//!
//! The identity holds for arbitrary valid observables, not just the ideal
//! ones; verifying it on random draws certifies the decomposition itself,
//! while the per-term norms vanish exactly at the ideal realization.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::bell::{bell_operator, Realization};
use crate::error::{Error, Result};
use crate::linalg::{check_root_of_unity_observable, tensor_product, CMatrix, CVector};
use crate::observables::{
    bell_coefficients, omega, omega_int, BellCoefficients, Frac, QuditObservable,
};
use crate::scenario::{resolve_observable_index, BellScenario};

/// Key for a P-term: (variant, free α-tuple, k).
pub type PTermKey = (usize, Vec<usize>, usize);

/// Residuals and per-term norms gathered by the SOS checks. Maps are keyed
/// with 1-based parties/inputs; all norms are nonnegative and finite.
#[derive(Debug, Clone, Default)]
pub struct SosReport {
    /// ‖β_Q·I − Î − ½ΣP†P − (m^{N−2}/2)ΣR†R‖_F (max over the variants run).
    pub identity_residual: f64,
    /// ‖P|ψ⟩‖ per (variant, α⃗, k).
    pub per_term_p_norms: BTreeMap<PTermKey, f64>,
    /// ‖R‖_F per (variant, α, k).
    pub per_term_r_norms: BTreeMap<(usize, usize, usize), f64>,
    /// |Tr(A_{i,x}^n)| per (party, input, n) for n ∈ 1..d−1.
    pub trace_table: BTreeMap<(usize, usize, usize), f64>,
    /// ‖C†C − I‖_F for C = a_k A_x^k + a_k* A_{x+1}^k per (party, x, k).
    pub combined_unitarity: BTreeMap<(usize, usize, usize), f64>,
    /// Residual of the symmetric pair relation on (A_2, A_3) per (party, k).
    pub pair_sym_residuals: BTreeMap<(usize, usize), f64>,
    /// Residual of the squared pair relation per (party, k), k ≤ ⌊d/2⌋.
    pub pair_sq_residuals: BTreeMap<(usize, usize), f64>,
    /// Power-trace identity residual per (party, x, t).
    pub power_trace_residuals: BTreeMap<(usize, usize, usize), f64>,
}

impl SosReport {
    pub fn max_p_norm(&self) -> f64 {
        self.per_term_p_norms.values().cloned().fold(0.0, f64::max)
    }

    pub fn max_r_norm(&self) -> f64 {
        self.per_term_r_norms.values().cloned().fold(0.0, f64::max)
    }

    pub fn max_trace(&self) -> f64 {
        self.trace_table.values().cloned().fold(0.0, f64::max)
    }

    /// Largest residual across every populated table.
    pub fn max_residual(&self) -> f64 {
        [
            self.identity_residual,
            self.max_p_norm(),
            self.max_r_norm(),
            self.max_trace(),
            self.combined_unitarity
                .values()
                .cloned()
                .fold(0.0, f64::max),
            self.pair_sym_residuals
                .values()
                .cloned()
                .fold(0.0, f64::max),
            self.pair_sq_residuals.values().cloned().fold(0.0, f64::max),
            self.power_trace_residuals
                .values()
                .cloned()
                .fold(0.0, f64::max),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Structural verdict on a candidate GHZ state with a declared auxiliary
/// factor (party-1-most-significant qudits, auxiliary index trailing).
#[derive(Debug, Clone)]
pub struct GhzStructureReport {
    /// Total squared norm on components whose qudit indices are not all equal.
    pub off_pattern_mass: f64,
    /// max_i ‖ψ_{i..i} − ψ_{0..0}‖ over the diagonal components.
    pub diagonal_spread: f64,
    /// Normalized ψ_{0..0}; absent when the reference component vanishes
    /// on a state that already fails the off-pattern test.
    pub aux_state: Option<CVector>,
    pub verdict: bool,
}

fn check_variant(variant: usize, parties: usize) -> Result<()> {
    if variant < 1 || variant > parties {
        return Err(Error::InvalidArgument(format!(
            "variant {variant} outside 1..={parties}"
        )));
    }
    Ok(())
}

fn check_k(k: usize, d: usize) -> Result<()> {
    if k < 1 || k >= d {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside 1..={}",
            d - 1
        )));
    }
    Ok(())
}

/// A_{party, raw}^{signed} resolved through the cyclic convention, taken
/// from an explicit per-party observable list.
fn powered_from_list(
    obs: &[QuditObservable],
    raw: usize,
    signed: i64,
    m: usize,
    d: usize,
) -> Result<CMatrix> {
    let resolved = resolve_observable_index(raw, m)?;
    let phase = omega_int(d, resolved.phase_exponent * signed);
    Ok(obs[resolved.base_input - 1].power(signed).scaled(phase))
}

/// The combined observable entering a P term at the party carrying the
/// coefficient pair: a_k A_j^k + a_k* A_{j+1}^k for odd parties (party 1
/// included), and a_k A_j^{−k} + a_k* A_{j−1}^{−k} for even parties.
fn combined_observable(
    obs: &[QuditObservable],
    party: usize,
    raw: usize,
    k: usize,
    coeffs: &BellCoefficients,
    m: usize,
    d: usize,
) -> Result<CMatrix> {
    let a = coeffs.a(k);
    if party % 2 == 1 {
        let lead = powered_from_list(obs, raw, k as i64, m, d)?;
        let trail = powered_from_list(obs, raw + 1, k as i64, m, d)?;
        Ok(lead.scaled(a).add(&trail.scaled(a.conj())))
    } else {
        let lead = powered_from_list(obs, raw, -(k as i64), m, d)?;
        let trail = powered_from_list(obs, raw - 1, -(k as i64), m, d)?;
        Ok(lead.scaled(a).add(&trail.scaled(a.conj())))
    }
}

/// Per-party factors of the product operator X with P = I − X.
fn p_term_factors(
    variant: usize,
    alphas: &[usize],
    k: usize,
    realization: &Realization,
    coeffs: &BellCoefficients,
) -> Result<Vec<CMatrix>> {
    let scenario = realization.scenario();
    let (n, m, d) = (scenario.parties(), scenario.inputs(), scenario.outcomes());
    check_variant(variant, n)?;
    check_k(k, d)?;
    if alphas.len() != n - 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} free α indices, got {}",
            n - 1,
            alphas.len()
        )));
    }
    for &a in alphas {
        if a < 1 || a > m {
            return Err(Error::InvalidArgument(format!("α = {a} outside 1..={m}")));
        }
    }
    let mut full = alphas.to_vec();
    full.push(1); // α_N = 1
    let mut factors = Vec::with_capacity(n);
    for party in 1..=n {
        let raw = if party == 1 {
            full[0]
        } else {
            full[party - 2] + full[party - 1] - 1
        };
        let obs = &realization.observables()[party - 1];
        let factor = if party == variant {
            combined_observable(obs, party, raw, k, coeffs, m, d)?
        } else {
            let signed = if party % 2 == 1 {
                k as i64
            } else {
                -(k as i64)
            };
            powered_from_list(obs, raw, signed, m, d)?
        };
        factors.push(factor);
    }
    Ok(factors)
}

/// The positive-part operator P = I − X of one SOS term. `variant` 1 puts
/// the combined coefficient pair at party 1 (the main decomposition);
/// variants 2..N put it at that party instead (the complementary ones).
pub fn p_operator(
    variant: usize,
    alphas: &[usize],
    k: usize,
    realization: &Realization,
) -> Result<CMatrix> {
    let scenario = realization.scenario();
    let coeffs = bell_coefficients(scenario.inputs(), scenario.outcomes())?;
    let factors = p_term_factors(variant, alphas, k, realization, &coeffs)?;
    let refs: Vec<&CMatrix> = factors.iter().collect();
    let x = tensor_product(&refs)?;
    Ok(CMatrix::identity(x.rows()).sub(&x))
}

/// The three-term R operator on one party's observables. Vanishes exactly
/// on the ideal observables; only exists for m ≥ 3.
pub fn r_operator(
    variant: usize,
    alpha: usize,
    k: usize,
    party_observables: &[QuditObservable],
) -> Result<CMatrix> {
    let m = party_observables.len();
    let d = party_observables
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty observable list".into()))?
        .order();
    if m < 3 {
        return Err(Error::EmptyRange(format!(
            "R operators do not exist for m = {m}"
        )));
    }
    if alpha < 1 || alpha > m - 2 {
        return Err(Error::InvalidArgument(format!(
            "alpha = {alpha} outside 1..={}",
            m - 2
        )));
    }
    check_k(k, d)?;
    let coeffs = bell_coefficients(m, d)?;
    let (mu, nu, tau) = coeffs.mu_nu_tau(alpha, k)?;
    let (c1, c2, c3, sign) = if variant % 2 == 1 {
        (mu.conj(), nu.conj(), tau, k as i64)
    } else {
        (mu, nu, tau, -(k as i64))
    };
    let t1 = powered_from_list(party_observables, 2, sign, m, d)?;
    let t2 = powered_from_list(party_observables, alpha + 2, sign, m, d)?;
    let t3 = powered_from_list(party_observables, alpha + 3, sign, m, d)?;
    Ok(t1.scaled(c1).add(&t2.scaled(c2)).add(&t3.scaled(c3)))
}

fn embed_at_party(op: &CMatrix, party: usize, dims: &[usize]) -> Result<CMatrix> {
    let ids: Vec<CMatrix> = dims.iter().map(|&d| CMatrix::identity(d)).collect();
    let mut refs: Vec<&CMatrix> = ids.iter().collect();
    refs[party - 1] = op;
    tensor_product(&refs)
}

fn apply_factors(factors: &[CMatrix], dims: &[usize], state: &CVector) -> CVector {
    let mut out = state.clone();
    for (party, f) in factors.iter().enumerate() {
        out = crate::bell::apply_local_operator(f, party, dims, &out);
    }
    out
}

fn validate_realization(realization: &Realization, tol: f64) -> Result<()> {
    let d = realization.scenario().outcomes();
    for (i, party) in realization.observables().iter().enumerate() {
        for (x, obs) in party.iter().enumerate() {
            let rep = check_root_of_unity_observable(obs.matrix(), d, tol)?;
            if !(rep.is_unitary && rep.order_d_holds) {
                return Err(Error::ContractViolation {
                    check: format!("observable (party {}, input {})", i + 1, x + 1),
                    residual: rep.max_residual,
                    tol,
                });
            }
        }
    }
    Ok(())
}

fn sos_residual_for_variant(
    variant: usize,
    realization: &Realization,
    op_matrix: &CMatrix,
    coeffs: &BellCoefficients,
    report: &mut SosReport,
) -> Result<f64> {
    let scenario = realization.scenario();
    let (n, m, d) = (scenario.parties(), scenario.inputs(), scenario.outcomes());
    let dims = realization.party_dims();
    let joint_dim: usize = dims.iter().product();
    let state = realization.state();

    // ½ Σ P†P, expanded per term as I − X − X† + ⊗(F_i†F_i) to stay at
    // dim² work; the last factor is exact, not a unitarity assumption.
    let mut rhs = CMatrix::zeros(joint_dim, joint_dim);
    crate::bell::for_each_alpha(n, m, |full| {
        let free = &full[..n - 1];
        for k in 1..d {
            let factors = p_term_factors(variant, free, k, realization, coeffs)?;
            let refs: Vec<&CMatrix> = factors.iter().collect();
            let x = tensor_product(&refs)?;
            let gram_factors: Vec<CMatrix> =
                factors.iter().map(|f| f.adjoint().matmul(f)).collect();
            let gram_refs: Vec<&CMatrix> = gram_factors.iter().collect();
            let xdx = tensor_product(&gram_refs)?;
            let half = Complex64::new(0.5, 0.0);
            for i in 0..joint_dim {
                rhs[(i, i)] += half;
            }
            rhs.axpy(-half, &x);
            rhs.axpy(-half, &x.adjoint());
            rhs.axpy(half, &xdx);

            let p_psi = state.sub(&apply_factors(&factors, &dims, state));
            report
                .per_term_p_norms
                .insert((variant, free.to_vec(), k), p_psi.norm());
        }
        Ok(())
    })?;

    // (m^{N−2}/2) Σ R†R at the variant party
    if m >= 3 {
        let weight = Complex64::new((m as f64).powi(n as i32 - 2) / 2.0, 0.0);
        for alpha in 1..=m - 2 {
            for k in 1..d {
                let r = r_operator(variant, alpha, k, &realization.observables()[variant - 1])?;
                report
                    .per_term_r_norms
                    .insert((variant, alpha, k), r.frobenius_norm());
                let gram = r.adjoint().matmul(&r);
                let embedded = embed_at_party(&gram, variant, &dims)?;
                rhs.axpy(weight, &embedded);
            }
        }
    }

    let beta_q = (m as f64).powi(n as i32 - 1) * (d as f64 - 1.0);
    let mut lhs = op_matrix.scaled(Complex64::new(-1.0, 0.0));
    for i in 0..joint_dim {
        lhs[(i, i)] += beta_q;
    }
    Ok(lhs.sub(&rhs).frobenius_norm())
}

/// Checks the operator identity β_Q·I − Î = ½ΣP†P + (m^{N−2}/2)ΣR†R for
/// one variant. Holds for any valid observables; the report additionally
/// carries ‖P|ψ⟩‖ and ‖R‖_F per term.
pub fn verify_sos_identity(
    variant: usize,
    realization: &Realization,
    tol: f64,
) -> Result<SosReport> {
    check_variant(variant, realization.scenario().parties())?;
    validate_realization(realization, tol.max(1e-9))?;
    let scenario = realization.scenario();
    let coeffs = bell_coefficients(scenario.inputs(), scenario.outcomes())?;
    let op = bell_operator(realization)?;
    let mut report = SosReport::default();
    report.identity_residual =
        sos_residual_for_variant(variant, realization, op.matrix(), &coeffs, &mut report)?;
    Ok(report)
}

/// Runs every relation implied by maximal violation on one realization:
/// the SOS identity for all variants, per-term P and R norms, the
/// power-trace table, combined-observable unitarity, the two pair
/// relations on each party's (x=2, x=3) observables, and the power-trace
/// identity chain.
pub fn selftest_relation_suite(realization: &Realization, tol: f64) -> Result<SosReport> {
    validate_realization(realization, tol.max(1e-9))?;
    let scenario = realization.scenario();
    let (n, m, d) = (scenario.parties(), scenario.inputs(), scenario.outcomes());
    let coeffs = bell_coefficients(m, d)?;
    let op = bell_operator(realization)?;
    let mut report = SosReport::default();

    let mut worst_identity = 0.0f64;
    for variant in 1..=n {
        let res =
            sos_residual_for_variant(variant, realization, op.matrix(), &coeffs, &mut report)?;
        worst_identity = worst_identity.max(res);
    }
    report.identity_residual = worst_identity;

    for party in 1..=n {
        let obs = &realization.observables()[party - 1];
        let dim = obs[0].matrix().rows();
        let id = CMatrix::identity(dim);

        for x in 1..=m {
            for p in 1..d {
                report
                    .trace_table
                    .insert((party, x, p), obs[x - 1].power(p as i64).trace().norm());
            }
            for k in 1..d {
                let lead = powered_from_list(obs, x, k as i64, m, d)?;
                let trail = powered_from_list(obs, x + 1, k as i64, m, d)?;
                let combined = lead
                    .scaled(coeffs.a(k))
                    .add(&trail.scaled(coeffs.a(k).conj()));
                let res = combined
                    .adjoint()
                    .matmul(&combined)
                    .sub(&id)
                    .frobenius_norm();
                report.combined_unitarity.insert((party, x, k), res);
            }
        }

        // pair relations on the (x=2, x=3) observables
        let a2 = powered_from_list(obs, 2, 1, m, d)?;
        let a3 = powered_from_list(obs, 3, 1, m, d)?;
        let two_cos = Complex64::new(2.0 * (std::f64::consts::PI / m as f64).cos(), 0.0);
        for k in 1..d {
            let phase = omega(d, Frac::new(2 * k as i64 - d as i64, 2 * m as i64));
            let lhs = a2
                .pow(k)
                .matmul(&a3.pow((d - k) % d))
                .scaled(phase)
                .add(&a3.pow(k).matmul(&a2.pow((d - k) % d)).scaled(phase.conj()));
            let res = lhs.sub(&id.scaled(two_cos)).frobenius_norm();
            report.pair_sym_residuals.insert((party, k), res);
        }
        // the squared relation is an identity only up to k = ⌊d/2⌋ (its
        // derivation leaves the coefficient family at larger k)
        for k in 1..=d / 2 {
            let phase = omega(d, Frac::new(k as i64, m as i64));
            let lhs = a2
                .pow(2 * k % d)
                .scaled(phase)
                .add(&a3.pow(2 * k % d).scaled(phase.conj()));
            let rhs = a2
                .pow(k)
                .matmul(&a3.pow(k))
                .add(&a3.pow(k).matmul(&a2.pow(k)));
            report
                .pair_sq_residuals
                .insert((party, k), lhs.sub(&rhs).frobenius_norm());
        }
        for x in 1..=d / 2 {
            for t in 0..4i64 {
                let lhs = a2.pow(x).trace();
                let rhs = omega(d, Frac::new(2 * t * x as i64, m as i64))
                    * a2.pow(((2 * t + 1) * x as i64).rem_euclid(d as i64) as usize)
                        .matmul(&a3.pow((-2 * t * x as i64).rem_euclid(d as i64) as usize))
                        .trace();
                report
                    .power_trace_residuals
                    .insert((party, x, t as usize), (lhs - rhs).norm());
            }
        }
    }
    Ok(report)
}

/// Decomposes a state over `d^N × aux_dim` into components ψ_{i₁..i_N} and
/// measures how far it sits from the GHZ pattern: mass off the all-equal
/// index tuples and the spread among the diagonal components.
pub fn verify_ghz_structure(
    state: &CVector,
    scenario: &BellScenario,
    aux_dim: usize,
    tol: f64,
) -> Result<GhzStructureReport> {
    if aux_dim < 1 {
        return Err(Error::InvalidArgument("aux_dim must be >= 1".into()));
    }
    let (n, d) = (scenario.parties(), scenario.outcomes());
    let qudit_dim = scenario.total_dim()?;
    let expected = qudit_dim
        .checked_mul(aux_dim)
        .ok_or_else(|| Error::InvalidArgument("state dimension overflow".into()))?;
    if state.dim() != expected {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} is not d^N × aux = {qudit_dim} × {aux_dim}",
            state.dim()
        )));
    }

    let component =
        |flat: usize| -> &[Complex64] { &state.entries()[flat * aux_dim..(flat + 1) * aux_dim] };
    let mut off_pattern_mass = 0.0f64;
    for flat in 0..qudit_dim {
        let mut rest = flat;
        let mut first = None;
        let mut all_equal = true;
        for _ in 0..n {
            let digit = rest % d;
            rest /= d;
            match first {
                None => first = Some(digit),
                Some(f) if f != digit => {
                    all_equal = false;
                    break;
                }
                _ => {}
            }
        }
        if !all_equal {
            off_pattern_mass += component(flat).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }

    let diag_flat = |i: usize| -> usize { (0..n).fold(0, |acc, _| acc * d + i) };
    let reference: Vec<Complex64> = component(diag_flat(0)).to_vec();
    let mut diagonal_spread = 0.0f64;
    for i in 0..d {
        let diff: f64 = component(diag_flat(i))
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        diagonal_spread = diagonal_spread.max(diff);
    }

    let ref_norm = reference.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let aux_state = if ref_norm > 1e-12 {
        Some(CVector::new(
            reference.iter().map(|z| z / ref_norm).collect(),
        ))
    } else if off_pattern_mass <= tol {
        // concentrated on the diagonal but with no usable reference
        // component: the auxiliary factor cannot be extracted
        return Err(Error::DegenerateState(
            "diagonal reference component ψ_{0..0} vanishes".into(),
        ));
    } else {
        None
    };

    Ok(GhzStructureReport {
        off_pattern_mass,
        diagonal_spread,
        aux_state,
        verdict: off_pattern_mass <= tol && diagonal_spread <= tol,
    })
}
