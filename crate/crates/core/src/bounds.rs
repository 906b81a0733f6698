//! Classical bound by exhaustive deterministic enumeration, the spectral
//! (Tsirelson-type) bound, and white-noise robustness sweeps.
//!
//! Enumeration walks all d^(N·m) response tables in lexicographic order,
//! sharded into contiguous index ranges so shards evaluate independently
//! and combine by max-reduction. The result is exact and deterministic,
//! independent of the worker count; ties break toward the smallest index.

use rayon::prelude::*;

use crate::bell::{bell_operator, ideal_realization, quantum_value, BellOperatorMatrix};
use crate::error::{Error, Result};
use crate::linalg::hermitian_spectrum;
use crate::observables::{omega_int, BellCoefficients};
use crate::scenario::{
    resolve_observable_index, BellScenario, DeterministicStrategy, DEFAULT_STRATEGY_CAP,
};

/// Strategies per enumeration shard.
pub const DEFAULT_SHARD_SIZE: u128 = 1 << 16;

/// Outcome of the exhaustive classical-bound computation, together with
/// the quantum reference values it is measured against.
#[derive(Debug, Clone)]
pub struct BoundsResult {
    pub beta_local: f64,
    pub argmax_strategy: DeterministicStrategy,
    /// Largest eigenvalue of the ideal Bell operator.
    pub beta_quantum_spec: f64,
    /// Closed form m^{N−1}(d−1).
    pub beta_q_formula: f64,
    pub strategy_count_evaluated: u128,
}

/// One term row of the functional, pre-resolved: strategy cells, signs,
/// and cyclic phase offsets for both conjugate halves.
struct Row {
    first_cell: usize,
    shifted_cell: usize,
    shifted_phase: usize,
    rest: Vec<(usize, bool)>, // (cell, negate outcome)
    base: usize,              // reduced phase offset of the shared factors
}

/// Evaluates the Bell functional on deterministic strategies in O(terms)
/// per strategy via precomputed coefficient tables: the k-sum for each
/// term row collapses into one lookup g[e] = Re Σ_k a_k ω^{ke}.
pub struct StrategyEvaluator {
    scenario: BellScenario,
    rows: Vec<Row>,
    g_lead: Vec<f64>,
    g_conj: Vec<f64>,
}

impl StrategyEvaluator {
    pub fn new(scenario: &BellScenario, coeffs: &BellCoefficients) -> Result<Self> {
        if coeffs.inputs() != scenario.inputs() || coeffs.outcomes() != scenario.outcomes() {
            return Err(Error::InvalidArgument(
                "coefficient table does not match scenario".into(),
            ));
        }
        let (n, m, d) = (scenario.parties(), scenario.inputs(), scenario.outcomes());
        let mut rows = Vec::new();
        crate::bell::for_each_alpha(n, m, |alphas| {
            let mut rest = Vec::with_capacity(n - 1);
            let mut base = 0i64;
            for party in 2..=n {
                let raw = alphas[party - 2] + alphas[party - 1] - 1;
                let resolved = resolve_observable_index(raw, m)?;
                let negate = party % 2 == 0;
                let sigma = if negate { -1i64 } else { 1 };
                base += sigma * resolved.phase_exponent;
                rest.push(((party - 1) * m + resolved.base_input - 1, negate));
            }
            let shifted = resolve_observable_index(alphas[0] + 1, m)?;
            rows.push(Row {
                first_cell: alphas[0] - 1,
                shifted_cell: shifted.base_input - 1,
                shifted_phase: shifted.phase_exponent.rem_euclid(d as i64) as usize,
                rest,
                base: base.rem_euclid(d as i64) as usize,
            });
            Ok(())
        })?;
        // extended lookup tables avoid reductions mod d in the hot loop
        let ext = (n + 3) * d + 1;
        let mut g_lead = vec![0.0f64; ext];
        let mut g_conj = vec![0.0f64; ext];
        for (e, (gl, gc)) in g_lead.iter_mut().zip(g_conj.iter_mut()).enumerate() {
            for k in 1..d {
                let phase = omega_int(d, (k * e) as i64);
                *gl += (coeffs.a(k) * phase).re;
                *gc += (coeffs.a(k).conj() * phase).re;
            }
        }
        Ok(Self {
            scenario: *scenario,
            rows,
            g_lead,
            g_conj,
        })
    }

    #[inline]
    fn value_of_digits(&self, pos: &[usize], neg: &[usize]) -> f64 {
        let mut total = 0.0;
        for row in &self.rows {
            let mut e = row.base;
            for &(cell, negate) in &row.rest {
                e += if negate { neg[cell] } else { pos[cell] };
            }
            total += self.g_lead[e + pos[row.first_cell]]
                + self.g_conj[e + pos[row.shifted_cell] + row.shifted_phase];
        }
        total
    }

    /// Functional value of one deterministic strategy.
    pub fn evaluate(&self, strategy: &DeterministicStrategy) -> Result<f64> {
        let cells = self.scenario.parties() * self.scenario.inputs();
        if strategy.outputs().len() != cells {
            return Err(Error::InvalidArgument(format!(
                "strategy has {} cells, scenario needs {cells}",
                strategy.outputs().len()
            )));
        }
        let d = self.scenario.outcomes();
        let pos: Vec<usize> = strategy.outputs().iter().map(|&a| a as usize).collect();
        if let Some(&bad) = pos.iter().find(|&&a| a >= d) {
            return Err(Error::InvalidArgument(format!(
                "outcome {bad} out of range"
            )));
        }
        let neg: Vec<usize> = pos.iter().map(|&a| (d - a) % d).collect();
        Ok(self.value_of_digits(&pos, &neg))
    }

    fn best_in_range(&self, start: u128, end: u128) -> (f64, u128) {
        let d = self.scenario.outcomes();
        let cells = self.scenario.parties() * self.scenario.inputs();
        let mut pos = vec![0usize; cells];
        let mut rest = start;
        for cell in (0..cells).rev() {
            pos[cell] = (rest % d as u128) as usize;
            rest /= d as u128;
        }
        let mut neg: Vec<usize> = pos.iter().map(|&a| (d - a) % d).collect();
        let mut best = f64::NEG_INFINITY;
        let mut best_idx = start;
        let mut idx = start;
        loop {
            let v = self.value_of_digits(&pos, &neg);
            if v > best {
                best = v;
                best_idx = idx;
            }
            idx += 1;
            if idx >= end {
                break;
            }
            // odometer increment of the outcome digits
            let mut cell = cells;
            loop {
                cell -= 1;
                pos[cell] += 1;
                if pos[cell] < d {
                    neg[cell] = (d - pos[cell]) % d;
                    break;
                }
                pos[cell] = 0;
                neg[cell] = 0;
            }
        }
        (best, best_idx)
    }
}

/// Exhaustive classical bound: the exact maximum of the Bell functional
/// over all deterministic strategies, with the lexicographically smallest
/// maximizer.
pub fn local_bound(scenario: &BellScenario, coeffs: &BellCoefficients) -> Result<BoundsResult> {
    local_bound_with_caps(scenario, coeffs, DEFAULT_STRATEGY_CAP, DEFAULT_SHARD_SIZE)
}

pub fn local_bound_with_caps(
    scenario: &BellScenario,
    coeffs: &BellCoefficients,
    cap: u128,
    shard_size: u128,
) -> Result<BoundsResult> {
    let count = scenario.strategy_count()?;
    if count > cap {
        return Err(Error::ResourceLimit {
            what: "strategy enumeration".into(),
            required: count,
            cap,
            hint: Some(format!(
                "would need {} shards of {shard_size}; raise the cap or shard externally",
                count.div_ceil(shard_size)
            )),
        });
    }
    let evaluator = StrategyEvaluator::new(scenario, coeffs)?;
    let shards: Vec<(u128, u128)> = (0..count.div_ceil(shard_size))
        .map(|s| (s * shard_size, ((s + 1) * shard_size).min(count)))
        .collect();
    let results: Vec<(f64, u128)> = shards
        .par_iter()
        .map(|&(start, end)| evaluator.best_in_range(start, end))
        .collect();
    let (beta_local, best_idx) = results
        .into_iter()
        .reduce(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("at least one shard");

    let ideal = ideal_realization(scenario)?;
    let op = bell_operator(&ideal)?;
    let beta_quantum_spec = spectral_bound(&op)?;
    if beta_local > beta_quantum_spec + 1e-8 {
        return Err(Error::Numerical(format!(
            "classical bound {beta_local} exceeds spectral bound {beta_quantum_spec}"
        )));
    }
    Ok(BoundsResult {
        beta_local,
        argmax_strategy: DeterministicStrategy::from_index(scenario, best_idx),
        beta_quantum_spec,
        beta_q_formula: op.beta_q_formula(),
        strategy_count_evaluated: count,
    })
}

/// Largest eigenvalue of a Bell operator.
pub fn spectral_bound(op: &BellOperatorMatrix) -> Result<f64> {
    let (vals, _) = hermitian_spectrum(op.matrix(), 1e-9)?;
    Ok(*vals.last().expect("non-empty spectrum"))
}

/// One visibility sample of the white-noise mixture v·|GHZ⟩⟨GHZ| + (1−v)·I/d^N.
#[derive(Debug, Clone, Copy)]
pub struct VisibilityPoint {
    pub v: f64,
    pub value: f64,
    pub violates: bool,
}

/// Full sweep result with the classical/quantum context values.
#[derive(Debug, Clone)]
pub struct VisibilitySweep {
    pub points: Vec<VisibilityPoint>,
    pub beta_local: f64,
    pub beta_quantum: f64,
    /// Crossing point of the affine value curve with β_L, derived from the
    /// sweep endpoints v = 0 and v = 1.
    pub critical_visibility: f64,
}

/// Sweeps the Bell value of the noisy GHZ state over a visibility grid.
/// The value is affine in v; the violation flags compare against the
/// exhaustively enumerated classical bound.
pub fn visibility_sweep(scenario: &BellScenario, grid: &[f64]) -> Result<VisibilitySweep> {
    if let Some(&bad) = grid.iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidArgument(format!(
            "visibility {bad} outside [0, 1]"
        )));
    }
    let ideal = ideal_realization(scenario)?;
    let op = bell_operator(&ideal)?;
    let pure_value = quantum_value(ideal.state(), &op)?;
    let dim = scenario.total_dim()? as f64;
    let mixed_value = op.matrix().trace().re / dim;
    let coeffs = crate::observables::bell_coefficients(scenario.inputs(), scenario.outcomes())?;
    let beta_local = local_bound(scenario, &coeffs)?.beta_local;
    let value_at = |v: f64| v * pure_value + (1.0 - v) * mixed_value;
    let points = grid
        .iter()
        .map(|&v| VisibilityPoint {
            v,
            value: value_at(v),
            violates: value_at(v) > beta_local + 1e-9,
        })
        .collect();
    Ok(VisibilitySweep {
        points,
        beta_local,
        beta_quantum: pure_value,
        critical_visibility: (beta_local - value_at(0.0)) / (value_at(1.0) - value_at(0.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{bell_value_from_correlators, CorrelatorTable};
    use crate::observables::bell_coefficients;
    use crate::scenario::enumerate_strategies;

    fn scenario(n: usize, m: usize, d: usize) -> BellScenario {
        BellScenario::new(n, m, d).unwrap()
    }

    /// Independent oracle: maximize through the correlator-table path.
    fn oracle_bound(s: &BellScenario) -> f64 {
        let coeffs = bell_coefficients(s.inputs(), s.outcomes()).unwrap();
        let mut best = f64::NEG_INFINITY;
        for st in enumerate_strategies(s).unwrap() {
            let t = CorrelatorTable::from_strategy(&st, s).unwrap();
            let v = bell_value_from_correlators(&t, &coeffs, s).unwrap();
            best = best.max(v);
        }
        best
    }

    #[test]
    fn chsh_bound_is_sqrt_two() {
        let s = scenario(2, 2, 2);
        let coeffs = bell_coefficients(2, 2).unwrap();
        let r = local_bound(&s, &coeffs).unwrap();
        assert!((r.beta_local - 2.0_f64.sqrt()).abs() < 1e-9);
        assert_eq!(r.strategy_count_evaluated, 16);
        assert!((r.beta_local - oracle_bound(&s)).abs() < 1e-12);
    }

    #[test]
    fn qutrit_bound_matches_oracle() {
        // frozen from the independent correlator-path enumeration
        let s = scenario(2, 2, 3);
        let coeffs = bell_coefficients(2, 3).unwrap();
        let r = local_bound(&s, &coeffs).unwrap();
        assert!((r.beta_local - 3.0980762113533157).abs() < 1e-9);
        assert!((r.beta_local - oracle_bound(&s)).abs() < 1e-12);
    }

    #[test]
    fn three_party_bounds() {
        let s = scenario(3, 2, 2);
        let coeffs = bell_coefficients(2, 2).unwrap();
        let r = local_bound(&s, &coeffs).unwrap();
        assert!((r.beta_local - 2.0 * 2.0_f64.sqrt()).abs() < 1e-9);
        // frozen: (3,3,2) maximum is 8/sqrt(3)
        let s2 = scenario(3, 3, 2);
        let coeffs2 = bell_coefficients(3, 2).unwrap();
        let r2 = local_bound(&s2, &coeffs2).unwrap();
        assert!((r2.beta_local - 8.0 / 3.0_f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn zero_functional_gives_zero_bound() {
        let s = scenario(2, 2, 2);
        let coeffs = BellCoefficients::zero(2, 2);
        let r = local_bound(&s, &coeffs).unwrap();
        assert_eq!(r.beta_local, 0.0);
        // every strategy ties; lexicographically smallest argmax wins
        assert_eq!(r.argmax_strategy.index(2), 0);
    }

    #[test]
    fn bound_strictly_below_quantum() {
        for (n, m, d) in [(2, 2, 2), (2, 2, 3), (2, 3, 2), (3, 2, 2), (2, 3, 3)] {
            let s = scenario(n, m, d);
            let coeffs = bell_coefficients(m, d).unwrap();
            let r = local_bound(&s, &coeffs).unwrap();
            assert!(
                r.beta_local < r.beta_q_formula - 1e-6,
                "({n},{m},{d}): {} !< {}",
                r.beta_local,
                r.beta_q_formula
            );
            assert!((r.beta_quantum_spec - r.beta_q_formula).abs() < 1e-8);
        }
    }

    #[test]
    fn evaluator_agrees_with_correlator_path() {
        let s = scenario(3, 2, 2);
        let coeffs = bell_coefficients(2, 2).unwrap();
        let ev = StrategyEvaluator::new(&s, &coeffs).unwrap();
        for st in enumerate_strategies(&s).unwrap() {
            let direct = ev.evaluate(&st).unwrap();
            let t = CorrelatorTable::from_strategy(&st, &s).unwrap();
            let via_table = bell_value_from_correlators(&t, &coeffs, &s).unwrap();
            assert!((direct - via_table).abs() < 1e-10);
        }
    }

    #[test]
    fn bound_dominates_random_strategies() {
        let s = scenario(2, 2, 3);
        let coeffs = bell_coefficients(2, 3).unwrap();
        let r = local_bound(&s, &coeffs).unwrap();
        let ev = StrategyEvaluator::new(&s, &coeffs).unwrap();
        let mut rng = crate::sampling::seeded_rng(31);
        use rand::Rng;
        for _ in 0..100 {
            let idx = rng.gen_range(0..s.strategy_count().unwrap());
            let st = DeterministicStrategy::from_index(&s, idx);
            assert!(ev.evaluate(&st).unwrap() <= r.beta_local + 1e-12);
        }
    }

    #[test]
    fn bound_invariant_under_outcome_relabeling() {
        // shifting all outcomes of one party cyclically permutes the
        // strategy set, so the maximum cannot move
        for (n, m, d) in [(2, 2, 2), (2, 2, 3)] {
            let s = scenario(n, m, d);
            let coeffs = bell_coefficients(m, d).unwrap();
            let ev = StrategyEvaluator::new(&s, &coeffs).unwrap();
            let base = local_bound(&s, &coeffs).unwrap().beta_local;
            let mut best = f64::NEG_INFINITY;
            for st in enumerate_strategies(&s).unwrap() {
                let mut outputs = st.outputs().to_vec();
                for cell in outputs.iter_mut().take(m) {
                    *cell = (*cell + 1) % d as u8;
                }
                let shifted = DeterministicStrategy::new(n, m, outputs).unwrap();
                best = best.max(ev.evaluate(&shifted).unwrap());
            }
            assert!((best - base).abs() < 1e-12);
        }
    }

    #[test]
    fn sharding_is_deterministic() {
        let s = scenario(2, 2, 3);
        let coeffs = bell_coefficients(2, 3).unwrap();
        let r1 = local_bound_with_caps(&s, &coeffs, DEFAULT_STRATEGY_CAP, 7).unwrap();
        let r2 = local_bound_with_caps(&s, &coeffs, DEFAULT_STRATEGY_CAP, 4096).unwrap();
        assert_eq!(r1.beta_local, r2.beta_local);
        assert_eq!(r1.argmax_strategy, r2.argmax_strategy);
    }

    #[test]
    fn cap_error_suggests_sharding() {
        let s = scenario(4, 4, 4);
        let coeffs = bell_coefficients(4, 4).unwrap();
        match local_bound(&s, &coeffs) {
            Err(Error::ResourceLimit { hint, .. }) => assert!(hint.is_some()),
            other => panic!("expected resource error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn spectral_bound_chsh() {
        let s = scenario(2, 2, 2);
        let op = bell_operator(&ideal_realization(&s).unwrap()).unwrap();
        assert!((spectral_bound(&op).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_bound_three_party() {
        let s = scenario(3, 2, 2);
        let op = bell_operator(&ideal_realization(&s).unwrap()).unwrap();
        assert!((spectral_bound(&op).unwrap() - 4.0).abs() < 1e-8);
    }

    #[test]
    fn gap_operator_is_positive_semidefinite() {
        let s = scenario(2, 2, 3);
        let op = bell_operator(&ideal_realization(&s).unwrap()).unwrap();
        let dim = op.matrix().rows();
        let mut gap = op.matrix().scaled(num_complex::Complex64::new(-1.0, 0.0));
        for i in 0..dim {
            gap[(i, i)] += op.beta_q_formula();
        }
        let (vals, _) = hermitian_spectrum(&gap, 1e-9).unwrap();
        assert!(vals[0] > -1e-8);
    }

    #[test]
    fn visibility_endpoints_and_crossing() {
        let s = scenario(2, 2, 2);
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let sweep = visibility_sweep(&s, &grid).unwrap();
        let first = sweep.points.first().unwrap();
        let last = sweep.points.last().unwrap();
        assert!(first.value.abs() < 1e-8);
        assert!((last.value - 2.0).abs() < 1e-9);
        assert!((sweep.critical_visibility - 2.0_f64.sqrt() / 2.0).abs() < 1e-9);
        // the violation flag flips exactly past the crossing
        for p in &sweep.points {
            assert_eq!(
                p.violates,
                p.v > sweep.critical_visibility + 1e-12,
                "v = {}",
                p.v
            );
        }
    }

    #[test]
    fn visibility_values_are_affine() {
        let s = scenario(2, 2, 3);
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let sweep = visibility_sweep(&s, &grid).unwrap();
        let v0 = sweep.points[0].value;
        let v1 = sweep.points.last().unwrap().value;
        for p in &sweep.points {
            let chord = v0 + (v1 - v0) * p.v;
            assert!((p.value - chord).abs() < 1e-9);
        }
    }

    #[test]
    fn visibility_rejects_out_of_range() {
        let s = scenario(2, 2, 2);
        assert!(matches!(
            visibility_sweep(&s, &[0.5, 1.5]),
            Err(Error::InvalidArgument(_))
        ));
    }
}
