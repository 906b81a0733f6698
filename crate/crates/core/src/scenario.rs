//! Scenario bookkeeping: the (N, m, d) parameters, the cyclic
//! observable-index convention, and deterministic-strategy enumeration.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Upper bound on exhaustive strategy enumeration, d^(N·m) strategies.
pub const DEFAULT_STRATEGY_CAP: u128 = 100_000_000;

/// A Bell scenario: `parties` observers (N), each choosing one of `inputs`
/// measurements (m) with `outcomes` results (d). All three are at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BellScenario {
    parties: usize,
    inputs: usize,
    outcomes: usize,
}

impl BellScenario {
    pub fn new(parties: usize, inputs: usize, outcomes: usize) -> Result<Self> {
        if parties < 2 || inputs < 2 || outcomes < 2 {
            return Err(Error::InvalidArgument(format!(
                "scenario requires N, m, d >= 2, got ({parties}, {inputs}, {outcomes})"
            )));
        }
        Ok(Self {
            parties,
            inputs,
            outcomes,
        })
    }

    #[inline]
    pub fn parties(&self) -> usize {
        self.parties
    }

    #[inline]
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    #[inline]
    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    /// d^N, the joint carrier dimension for single-qudit parties.
    pub fn total_dim(&self) -> Result<usize> {
        self.outcomes
            .checked_pow(self.parties as u32)
            .ok_or_else(|| Error::InvalidArgument("d^N overflows usize".into()))
    }

    /// d^(N·m), the number of deterministic strategies.
    pub fn strategy_count(&self) -> Result<u128> {
        (self.outcomes as u128)
            .checked_pow((self.parties * self.inputs) as u32)
            .ok_or_else(|| Error::InvalidArgument("d^(N*m) overflows u128".into()))
    }
}

/// Result of resolving a raw observable index against the cyclic convention
/// `A_{i,x+m} = ω A_{i,x}` and `A_{i,0} = ω^{-1} A_{i,m}`:
/// `A_raw = ω^phase_exponent · A_base_input`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedIndex {
    pub base_input: usize,
    /// Exact integer exponent q with semantics ω^q = exp(2πi q/d);
    /// always in {-1, 0, +1}.
    pub phase_exponent: i64,
}

/// Maps a raw observable index x ∈ [0, 2m] onto an in-range input together
/// with the cyclic phase: x ∈ [1, m] is itself, x = 0 wraps down to m with
/// ω^{-1}, and x ∈ [m+1, 2m] wraps up with ω^{+1}. Indices up to 2m occur in
/// the Bell operator because party i reads input α_{i-1} + α_i - 1 (and its
/// ±1 shifts in the complementary decompositions).
pub fn resolve_observable_index(x: usize, m: usize) -> Result<ResolvedIndex> {
    if x == 0 {
        Ok(ResolvedIndex {
            base_input: m,
            phase_exponent: -1,
        })
    } else if x <= m {
        Ok(ResolvedIndex {
            base_input: x,
            phase_exponent: 0,
        })
    } else if x <= 2 * m {
        Ok(ResolvedIndex {
            base_input: x - m,
            phase_exponent: 1,
        })
    } else {
        Err(Error::InvalidArgument(format!(
            "observable index {x} outside [0, {}] for m = {m}",
            2 * m
        )))
    }
}

/// A local deterministic response table: outcome for every (party, input).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicStrategy {
    parties: usize,
    inputs: usize,
    /// Row-major over (party, input), parties outermost.
    outputs: Vec<u8>,
}

impl DeterministicStrategy {
    pub fn new(parties: usize, inputs: usize, outputs: Vec<u8>) -> Result<Self> {
        if outputs.len() != parties * inputs {
            return Err(Error::InvalidArgument(format!(
                "expected {} outputs, got {}",
                parties * inputs,
                outputs.len()
            )));
        }
        Ok(Self {
            parties,
            inputs,
            outputs,
        })
    }

    /// Strategy at position `index` in the lexicographic order of the
    /// flattened output table (first cell most significant).
    pub fn from_index(scenario: &BellScenario, index: u128) -> Self {
        let cells = scenario.parties() * scenario.inputs();
        let d = scenario.outcomes() as u128;
        let mut outputs = vec![0u8; cells];
        let mut rest = index;
        for cell in (0..cells).rev() {
            outputs[cell] = (rest % d) as u8;
            rest /= d;
        }
        Self {
            parties: scenario.parties(),
            inputs: scenario.inputs(),
            outputs,
        }
    }

    pub fn index(&self, outcomes: usize) -> u128 {
        let mut idx = 0u128;
        for &o in &self.outputs {
            idx = idx * outcomes as u128 + o as u128;
        }
        idx
    }

    /// Outcome for 1-based `party` and `input`.
    #[inline]
    pub fn output(&self, party: usize, input: usize) -> u8 {
        self.outputs[(party - 1) * self.inputs + (input - 1)]
    }

    pub fn outputs(&self) -> &[u8] {
        &self.outputs
    }
}

/// Streams all d^(N·m) deterministic strategies in lexicographic order of
/// the flattened output table. Nothing is materialized; contiguous index
/// sub-ranges may be enumerated independently via
/// [`enumerate_strategy_range`].
pub fn enumerate_strategies(
    scenario: &BellScenario,
) -> Result<impl Iterator<Item = DeterministicStrategy> + '_> {
    enumerate_strategies_with_cap(scenario, DEFAULT_STRATEGY_CAP)
}

pub fn enumerate_strategies_with_cap(
    scenario: &BellScenario,
    cap: u128,
) -> Result<impl Iterator<Item = DeterministicStrategy> + '_> {
    let count = scenario.strategy_count()?;
    if count > cap {
        return Err(Error::ResourceLimit {
            what: "strategy enumeration".into(),
            required: count,
            cap,
            hint: Some("shard by contiguous index ranges".into()),
        });
    }
    Ok(enumerate_strategy_range(scenario, 0, count))
}

/// Streams strategies with indices in `[start, end)`.
pub fn enumerate_strategy_range(
    scenario: &BellScenario,
    start: u128,
    end: u128,
) -> impl Iterator<Item = DeterministicStrategy> + '_ {
    (start..end).map(move |i| DeterministicStrategy::from_index(scenario, i))
}

/// Generalized correlator of a deterministic strategy:
/// ω^(Σ_i a_i k_i) with a_i the strategy's outcome for (i, x_i).
pub fn strategy_correlator(
    strategy: &DeterministicStrategy,
    inputs: &[usize],
    powers: &[usize],
    outcomes: usize,
) -> Result<Complex64> {
    if inputs.len() != strategy.parties || powers.len() != strategy.parties {
        return Err(Error::InvalidArgument(format!(
            "expected {} inputs and powers, got {} and {}",
            strategy.parties,
            inputs.len(),
            powers.len()
        )));
    }
    let mut exponent = 0usize;
    for (party, (&x, &k)) in inputs.iter().zip(powers).enumerate() {
        if x < 1 || x > strategy.inputs {
            return Err(Error::InvalidArgument(format!(
                "input {x} out of range for party {}",
                party + 1
            )));
        }
        if k >= outcomes {
            return Err(Error::InvalidArgument(format!(
                "power {k} out of range 0..{outcomes}"
            )));
        }
        exponent += strategy.output(party + 1, x) as usize * k;
    }
    let angle = std::f64::consts::TAU * (exponent % outcomes) as f64 / outcomes as f64;
    Ok(Complex64::from_polar(1.0, angle))
}
