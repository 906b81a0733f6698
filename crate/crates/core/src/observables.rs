//! Constructors for every concrete matrix in the scheme: Fourier and clock
//! matrices, the diagonal phase unitaries, the ideal party observables (both
//! the conjugated-Fourier and the band-matrix construction), the Bell
//! functional coefficients, the canonical observable pair, its eigenvectors,
//! and the extraction unitaries that map the canonical pair onto the ideal
//! observables.
//!
//! Fractional phases follow one fixed branch everywhere:
//! ω^q := exp(2πi·q/d) for rational q. Exponents are kept as exact rationals
//! and converted to a complex number once, at evaluation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{check_root_of_unity_observable, CMatrix, CVector};
use crate::scenario::resolve_observable_index;

/// Exact rational exponent. Only tiny numerators/denominators occur
/// (denominators divide 4m), so i64 arithmetic never overflows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    num: i64,
    den: i64,
}

impl Frac {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        Self {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn int(n: i64) -> Self {
        Self { num: n, den: 1 }
    }

    pub fn times(self, n: i64) -> Self {
        Self::new(self.num * n, self.den)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::ops::Add for Frac {
    type Output = Frac;
    fn add(self, other: Self) -> Self {
        Self::new(
            self.num * other.den + other.num * self.den,
            self.den * other.den,
        )
    }
}

impl std::ops::Sub for Frac {
    type Output = Frac;
    fn sub(self, other: Self) -> Self {
        self + (-other)
    }
}

impl std::ops::Neg for Frac {
    type Output = Frac;
    fn neg(self) -> Self {
        Self {
            num: -self.num,
            den: self.den,
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// ω^q = exp(2πi·q/d) for a rational exponent q.
pub fn omega(d: usize, q: Frac) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * q.to_f64() / d as f64)
}

/// ω^e for an integer exponent, reduced mod d before conversion.
pub fn omega_int(d: usize, e: i64) -> Complex64 {
    let r = e.rem_euclid(d as i64);
    Complex64::from_polar(1.0, std::f64::consts::TAU * r as f64 / d as f64)
}

/// The four construction classes of ideal observables: party 1, party 2,
/// and the remaining odd-/even-numbered parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartyClass {
    First,
    Second,
    Odd,
    Even,
}

impl PartyClass {
    /// Class of the 1-based party index.
    pub fn for_party(party: usize) -> Self {
        match party {
            1 => Self::First,
            2 => Self::Second,
            p if p % 2 == 1 => Self::Odd,
            _ => Self::Even,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::First => "first",
            Self::Second => "second",
            Self::Odd => "odd",
            Self::Even => "even",
        }
    }
}

/// A d-outcome quantum observable: a unitary whose spectrum lies in the
/// d-th roots of unity, plus provenance metadata.
#[derive(Debug, Clone)]
pub struct QuditObservable {
    matrix: CMatrix,
    order: usize,
    label: String,
}

impl QuditObservable {
    /// Validates the defining invariants: ‖A†A − I‖_F ≤ 1e−10 and
    /// ‖A^d − I‖_F ≤ 1e−9.
    pub fn new(matrix: CMatrix, order: usize, label: impl Into<String>) -> Result<Self> {
        let rep = check_root_of_unity_observable(&matrix, order, 1e-9)?;
        let id = CMatrix::identity(matrix.rows());
        let unitary_residual = matrix.adjoint().matmul(&matrix).sub(&id).frobenius_norm();
        if unitary_residual > 1e-10 {
            return Err(Error::ContractViolation {
                check: "observable unitarity".into(),
                residual: unitary_residual,
                tol: 1e-10,
            });
        }
        if !rep.order_d_holds {
            return Err(Error::ContractViolation {
                check: format!("observable order A^{order} = I"),
                residual: rep.max_residual,
                tol: 1e-9,
            });
        }
        Ok(Self {
            matrix,
            order,
            label: label.into(),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// A^k for any signed k, reduced through A^d = I.
    pub fn power(&self, k: i64) -> CMatrix {
        self.matrix.pow(k.rem_euclid(self.order as i64) as usize)
    }
}

/// The d-dimensional discrete Fourier matrix, entries ω^{ij}/√d.
pub fn fourier_matrix(d: usize) -> Result<CMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "fourier_matrix needs d >= 2, got {d}"
        )));
    }
    let scale = 1.0 / (d as f64).sqrt();
    Ok(CMatrix::from_fn(d, d, |i, j| {
        omega_int(d, (i * j) as i64) * scale
    }))
}

/// The clock matrix diag[1, ω, …, ω^{d−1}].
pub fn clock_matrix(d: usize) -> Result<CMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "clock_matrix needs d >= 2, got {d}"
        )));
    }
    Ok(CMatrix::diagonal(
        &(0..d).map(|i| omega_int(d, i as i64)).collect::<Vec<_>>(),
    ))
}

/// Which diagonal phase unitary to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    /// Entries ω^{−j·γ_m(x)}; dresses the first party.
    U,
    /// Entries ω^{+j·ζ_m(x)}; dresses the second party.
    V,
    /// Entries ω^{−j·θ_m(x)}; dresses the remaining parties.
    W,
}

/// The per-input phase parameters γ_m(x) = (x − 1/2)/m, ζ_m(x) = x/m, and
/// θ_m(x) = (x − 1)/m, kept as exact rationals. θ_m(1) = 0 exactly.
#[derive(Debug, Clone, Copy)]
pub struct MeasurementParameters {
    m: usize,
}

impl MeasurementParameters {
    pub fn new(m: usize) -> Self {
        Self { m }
    }

    pub fn gamma(&self, x: usize) -> Frac {
        Frac::new(2 * x as i64 - 1, 2 * self.m as i64)
    }

    pub fn zeta(&self, x: usize) -> Frac {
        Frac::new(x as i64, self.m as i64)
    }

    pub fn theta(&self, x: usize) -> Frac {
        Frac::new(x as i64 - 1, self.m as i64)
    }
}

/// Diagonal phase unitary U_x, V_x, or W_x for input x ∈ 1..m.
pub fn phase_unitary(kind: PhaseKind, x: usize, m: usize, d: usize) -> Result<CMatrix> {
    check_input(x, m)?;
    let params = MeasurementParameters::new(m);
    let exponent = |j: i64| match kind {
        PhaseKind::U => params.gamma(x).times(-j),
        PhaseKind::V => params.zeta(x).times(j),
        PhaseKind::W => params.theta(x).times(-j),
    };
    Ok(CMatrix::diagonal(
        &(0..d)
            .map(|j| omega(d, exponent(j as i64)))
            .collect::<Vec<_>>(),
    ))
}

fn check_input(x: usize, m: usize) -> Result<()> {
    if x < 1 || x > m {
        return Err(Error::InvalidArgument(format!(
            "input x = {x} outside 1..={m}"
        )));
    }
    Ok(())
}

fn class_phase(class: PartyClass, m: usize, x: usize) -> Frac {
    let params = MeasurementParameters::new(m);
    match class {
        PartyClass::First => params.gamma(x),
        PartyClass::Second => params.zeta(x),
        PartyClass::Odd | PartyClass::Even => params.theta(x),
    }
}

/// Ideal observable via the conjugated-Fourier construction, e.g.
/// U_x F_d Ω_d F_d† U_x† for the first party. Equals the band form
/// ([`ideal_observable_band`]) to machine precision; both constructions are
/// kept as independent cross-checks on each other.
pub fn ideal_observable(
    class: PartyClass,
    x: usize,
    m: usize,
    d: usize,
) -> Result<QuditObservable> {
    check_input(x, m)?;
    let f = fourier_matrix(d)?;
    let om = clock_matrix(d)?;
    let matrix = match class {
        PartyClass::First => {
            let u = phase_unitary(PhaseKind::U, x, m, d)?;
            u.matmul(&f)
                .matmul(&om)
                .matmul(&f.adjoint())
                .matmul(&u.adjoint())
        }
        PartyClass::Second => {
            let v = phase_unitary(PhaseKind::V, x, m, d)?;
            v.matmul(&f.adjoint())
                .matmul(&om)
                .matmul(&f)
                .matmul(&v.adjoint())
        }
        PartyClass::Odd => {
            let w = phase_unitary(PhaseKind::W, x, m, d)?;
            w.matmul(&f)
                .matmul(&om)
                .matmul(&f.adjoint())
                .matmul(&w.adjoint())
        }
        PartyClass::Even => {
            let w = phase_unitary(PhaseKind::W, x, m, d)?;
            w.adjoint()
                .matmul(&f.adjoint())
                .matmul(&om)
                .matmul(&f)
                .matmul(&w)
        }
    };
    QuditObservable::new(
        matrix,
        d,
        format!("{}[x={x}] m={m} d={d} fourier", class.name()),
    )
}

/// Ideal observable in its explicit band-matrix form: one cyclic
/// off-diagonal of unit-modulus phases, e.g. for the first party
/// Σ_i ω^{γ_m(x)}|i⟩⟨i+1| + ω^{(1−d)γ_m(x)}|d−1⟩⟨0|.
///
/// Unlike [`ideal_observable`] this accepts any raw x (the band formula
/// evaluated at x + m automatically equals ω times the value at x, so it
/// realizes the cyclic index convention by itself).
pub fn ideal_observable_band(class: PartyClass, x: usize, m: usize, d: usize) -> Result<CMatrix> {
    if x < 1 {
        return Err(Error::InvalidArgument("band form needs x >= 1".into()));
    }
    let phase = class_phase(class, m, x);
    let step = omega(d, phase);
    let wrap = omega(d, phase.times(1 - d as i64));
    let mut mat = CMatrix::zeros(d, d);
    match class {
        // upper cyclic band: |i><i+1|
        PartyClass::First | PartyClass::Odd => {
            for i in 0..d - 1 {
                mat[(i, i + 1)] = step;
            }
            mat[(d - 1, 0)] = wrap;
        }
        // lower cyclic band: |i+1><i|
        PartyClass::Second | PartyClass::Even => {
            for i in 0..d - 1 {
                mat[(i + 1, i)] = step;
            }
            mat[(0, d - 1)] = wrap;
        }
    }
    Ok(mat)
}

/// Ideal observable at a raw index in [0, 2m], resolved through the cyclic
/// convention: returns ω^q · O_{class, base}.
pub fn ideal_observable_resolved(
    class: PartyClass,
    x_raw: usize,
    m: usize,
    d: usize,
) -> Result<CMatrix> {
    let r = resolve_observable_index(x_raw, m)?;
    let base = ideal_observable(class, r.base_input, m, d)?;
    Ok(base.matrix().scaled(omega_int(d, r.phase_exponent)))
}

/// Coefficients of the Bell functional: the a_k weights plus the
/// (μ, ν, τ) triples entering the R operators.
#[derive(Debug, Clone)]
pub struct BellCoefficients {
    m: usize,
    d: usize,
    /// a_k for k = 1..d−1 at index k−1.
    a: Vec<Complex64>,
    /// (μ, ν, τ) for α = 1..m−2 (outer, index α−1) and k = 1..d−1 (inner).
    mnt: Vec<Vec<(Complex64, Complex64, Complex64)>>,
}

impl BellCoefficients {
    pub fn inputs(&self) -> usize {
        self.m
    }

    pub fn outcomes(&self) -> usize {
        self.d
    }

    /// a_k = ω^{(2k−d)/4m} / (2 cos(π/2m)) for k ∈ 1..d−1.
    pub fn a(&self, k: usize) -> Complex64 {
        self.a[k - 1]
    }

    /// (μ_{α,k}, ν_{α,k}, τ_{α,k}) for α ∈ 1..m−2.
    pub fn mu_nu_tau(&self, alpha: usize, k: usize) -> Result<(Complex64, Complex64, Complex64)> {
        if self.m < 3 {
            return Err(Error::EmptyRange(format!(
                "no (mu, nu, tau) coefficients exist for m = {}",
                self.m
            )));
        }
        if alpha < 1 || alpha > self.m - 2 {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} outside 1..={}",
                self.m - 2
            )));
        }
        if k < 1 || k >= self.d {
            return Err(Error::InvalidArgument(format!(
                "k = {k} outside 1..={}",
                self.d - 1
            )));
        }
        Ok(self.mnt[alpha - 1][k - 1])
    }

    /// Number of (α, k) pairs carried (zero when m = 2).
    pub fn mnt_len(&self) -> usize {
        self.mnt.len() * self.a.len()
    }

    /// The all-zero functional of the same shape; a degenerate probe whose
    /// classical bound is exactly zero.
    pub fn zero(m: usize, d: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            m,
            d,
            a: vec![zero; d - 1],
            mnt: vec![vec![(zero, zero, zero); d - 1]; m.saturating_sub(2)],
        }
    }
}

/// Builds the coefficient tables for the (m, d) functional.
pub fn bell_coefficients(m: usize, d: usize) -> Result<BellCoefficients> {
    if m < 2 || d < 2 {
        return Err(Error::InvalidArgument(format!(
            "bell_coefficients needs m, d >= 2, got ({m}, {d})"
        )));
    }
    let half_sec = 2.0 * (std::f64::consts::PI / (2.0 * m as f64)).cos();
    let a: Vec<Complex64> = (1..d)
        .map(|k| omega(d, Frac::new(2 * k as i64 - d as i64, 4 * m as i64)) / half_sec)
        .collect();
    let sin_m = (std::f64::consts::PI / m as f64).sin();
    let sin_at = |j: usize| (std::f64::consts::PI * j as f64 / m as f64).sin();
    let mut mnt = Vec::new();
    for alpha in 1..=m.saturating_sub(2) {
        let mut row = Vec::with_capacity(d - 1);
        for k in 1..d {
            let dk = Frac::new(d as i64 - 2 * k as i64, 2 * m as i64);
            let triple = if alpha <= m - 3 {
                let mu = omega(d, dk.times(alpha as i64 + 1)) / half_sec * sin_m
                    / (sin_at(alpha) * sin_at(alpha + 1)).sqrt();
                let nu = -omega(d, dk) / half_sec * (sin_at(alpha + 1) / sin_at(alpha)).sqrt();
                let tau =
                    Complex64::new((sin_at(alpha) / sin_at(alpha + 1)).sqrt() / half_sec, 0.0);
                (mu, nu, tau)
            } else {
                // the closing alpha = m-2 branch
                let root = (2.0 * (std::f64::consts::PI / m as f64).cos()).sqrt();
                let mu = -omega_int(d, -(k as i64)) * omega(d, -dk) / (half_sec * root);
                let nu = -omega(d, dk) / (half_sec * root);
                let tau = Complex64::new(root / half_sec, 0.0);
                (mu, nu, tau)
            };
            row.push(triple);
        }
        mnt.push(row);
    }
    Ok(BellCoefficients { m, d, a, mnt })
}

/// The canonical observable pair: the clock matrix Z and its partner T,
/// the fixed normal forms onto which any maximally violating pair of
/// observables can be rotated.
pub fn canonical_pair(d: usize, m: usize) -> Result<(QuditObservable, QuditObservable)> {
    if m < 2 || d < 2 {
        return Err(Error::InvalidArgument(format!(
            "canonical_pair needs d, m >= 2, got ({d}, {m})"
        )));
    }
    let z = QuditObservable::new(clock_matrix(d)?, d, format!("Z_{d}"))?;
    let sin_m = (std::f64::consts::PI / m as f64).sin();
    let prefactor = Complex64::new(0.0, -2.0 * sin_m / d as f64);
    let mut t = CMatrix::zeros(d, d);
    for i in 0..d {
        t[(i, i)] = omega(d, Frac::int(i as i64) + Frac::new(1, m as i64));
    }
    for i in 0..d {
        for j in 0..d {
            let sign = if (i == 0) ^ (j == 0) { -1.0 } else { 1.0 };
            let expo = Frac::new((i + j) as i64, 2) - Frac::new(d as i64 - 2, 2 * m as i64);
            t[(i, j)] += prefactor * sign * omega(d, expo);
        }
    }
    let t = QuditObservable::new(t, d, format!("T_{d},{m}"))?;
    Ok((z, t))
}

/// Eigenvector |r⟩ of the canonical T with eigenvalue ω^r, r ∈ 0..d−1.
/// Comes out exactly unit-norm.
pub fn t_eigenvector(r: usize, d: usize, m: usize) -> Result<CVector> {
    if r >= d {
        return Err(Error::InvalidArgument(format!("r = {r} outside 0..{d}")));
    }
    let sin_m = (std::f64::consts::PI / m as f64).sin();
    let prefactor = Complex64::new(0.0, 2.0 * sin_m / d as f64)
        * omega(d, Frac::new(-(d as i64), 2 * m as i64));
    let mut entries = Vec::with_capacity(d);
    for q in 0..d {
        let sign = if q == 0 { -1.0 } else { 1.0 };
        let num = omega(d, Frac::new(-(q as i64), 2));
        let den = Complex64::new(1.0, 0.0)
            - omega(d, Frac::int(r as i64 - q as i64) - Frac::new(1, m as i64));
        entries.push(prefactor * sign * num / den);
    }
    Ok(CVector::new(entries))
}

/// The fixed unitary conjugating the canonical pair onto a class's ideal
/// observables: W Z W† = O_{class,2} and W T W† = O_{class,3}.
pub fn extraction_unitary(class: PartyClass, m: usize, d: usize) -> Result<CMatrix> {
    if m < 2 || d < 2 {
        return Err(Error::InvalidArgument(format!(
            "extraction_unitary needs m, d >= 2, got ({m}, {d})"
        )));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut w = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let sign = if j == 0 { -1.0 } else { 1.0 };
            let row_phase = match class {
                PartyClass::First => Frac::new(-3 * i as i64, 2 * m as i64),
                PartyClass::Second => Frac::new(-2 * i as i64, m as i64),
                PartyClass::Odd | PartyClass::Even => Frac::new(-(i as i64), m as i64),
            };
            let expo = row_phase + Frac::int((i * j) as i64) + Frac::new(j as i64, 2);
            let row = match class {
                PartyClass::First | PartyClass::Odd => i,
                PartyClass::Second | PartyClass::Even => d - 1 - i,
            };
            w[(row, j)] = sign * omega(d, expo) * scale;
        }
    }
    let unitarity = w
        .adjoint()
        .matmul(&w)
        .sub(&CMatrix::identity(d))
        .frobenius_norm();
    if unitarity > 1e-11 {
        return Err(Error::ContractViolation {
            check: "extraction unitary".into(),
            residual: unitarity,
            tol: 1e-11,
        });
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fourier_d2_is_hadamard() {
        let f = fourier_matrix(2).unwrap();
        let h = 1.0 / 2.0_f64.sqrt();
        for (r, cc, expect) in [(0, 0, h), (0, 1, h), (1, 0, h), (1, 1, -h)] {
            assert!((f[(r, cc)] - c(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn fourier_unitary_d5() {
        let f = fourier_matrix(5).unwrap();
        let res = f
            .adjoint()
            .matmul(&f)
            .sub(&CMatrix::identity(5))
            .frobenius_norm();
        assert!(res < 1e-12);
    }

    #[test]
    fn fourier_d3_entry() {
        // entry (1,2) = omega^2 / sqrt(3) = e^{4 pi i / 3} / sqrt(3)
        let f = fourier_matrix(3).unwrap();
        let expect = Complex64::from_polar(1.0 / 3.0_f64.sqrt(), 2.0 * TAU / 3.0);
        assert!((f[(1, 2)] - expect).norm() < 1e-14);
    }

    #[test]
    fn fourier_rejects_small_d() {
        assert!(fourier_matrix(1).is_err());
    }

    #[test]
    fn clock_d2() {
        let z = clock_matrix(2).unwrap();
        assert!((z[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((z[(1, 1)] - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn clock_has_order_d() {
        let z = clock_matrix(4).unwrap();
        assert!(z.pow(4).sub(&CMatrix::identity(4)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn clock_trace_vanishes() {
        // geometric sum of the cube roots of unity
        assert!(clock_matrix(3).unwrap().trace().norm() < 1e-14);
    }

    #[test]
    fn phase_unitary_w_at_x1_is_identity() {
        for (m, d) in [(2, 3), (3, 4), (4, 2)] {
            let w = phase_unitary(PhaseKind::W, 1, m, d).unwrap();
            assert!(w.sub(&CMatrix::identity(d)).frobenius_norm() < 1e-15);
        }
    }

    #[test]
    fn phase_unitary_u_example() {
        // gamma_2(1) = 1/4, so U_1 = diag(1, omega^{-1/4}) = diag(1, e^{-i pi/4})
        let u = phase_unitary(PhaseKind::U, 1, 2, 2).unwrap();
        assert!((u[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        let expect = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
        assert!((u[(1, 1)] - expect).norm() < 1e-15);
    }

    #[test]
    fn phase_unitaries_are_unitary() {
        for kind in [PhaseKind::U, PhaseKind::V, PhaseKind::W] {
            for x in 1..=3 {
                let p = phase_unitary(kind, x, 3, 4).unwrap();
                let res = p
                    .adjoint()
                    .matmul(&p)
                    .sub(&CMatrix::identity(4))
                    .frobenius_norm();
                assert!(res < 1e-13);
            }
        }
    }

    #[test]
    fn ideal_observables_have_order_d() {
        for class in [
            PartyClass::First,
            PartyClass::Second,
            PartyClass::Odd,
            PartyClass::Even,
        ] {
            for (m, d) in [(2, 2), (2, 5), (3, 3), (4, 4)] {
                for x in 1..=m {
                    let o = ideal_observable(class, x, m, d).unwrap();
                    let rep = check_root_of_unity_observable(o.matrix(), d, 1e-9).unwrap();
                    assert!(
                        rep.is_unitary && rep.order_d_holds,
                        "{class:?} x={x} m={m} d={d}"
                    );
                }
            }
        }
    }

    #[test]
    fn conjugation_path_matches_band_path() {
        // spot example from the contract plus a sweep
        let a = ideal_observable(PartyClass::Odd, 2, 3, 4).unwrap();
        let b = ideal_observable_band(PartyClass::Odd, 2, 3, 4).unwrap();
        assert!(a.matrix().sub(&b).frobenius_norm() < 1e-10);
        for class in [
            PartyClass::First,
            PartyClass::Second,
            PartyClass::Odd,
            PartyClass::Even,
        ] {
            for (m, d) in [(2, 2), (2, 3), (3, 2), (3, 5), (4, 3)] {
                for x in 1..=m {
                    let f = ideal_observable(class, x, m, d).unwrap();
                    let band = ideal_observable_band(class, x, m, d).unwrap();
                    assert!(
                        f.matrix().sub(&band).frobenius_norm() < 1e-10,
                        "{class:?} x={x} m={m} d={d}"
                    );
                }
            }
        }
    }

    #[test]
    fn band_form_realizes_cyclic_convention() {
        // evaluating the band formula at x + m equals omega times the value at x
        for class in [
            PartyClass::First,
            PartyClass::Second,
            PartyClass::Odd,
            PartyClass::Even,
        ] {
            let at_x = ideal_observable_band(class, 1, 2, 3).unwrap();
            let shifted = ideal_observable_band(class, 3, 2, 3).unwrap();
            let expect = at_x.scaled(omega_int(3, 1));
            assert!(shifted.sub(&expect).frobenius_norm() < 1e-13);
        }
    }

    #[test]
    fn first_class_m2_d2_reproduces_cglmp_pair() {
        // x=1: (sigma_x - sigma_y)/sqrt(2); x=2: -(sigma_x + sigma_y)/sqrt(2)
        let h = 1.0 / 2.0_f64.sqrt();
        let o1 = ideal_observable(PartyClass::First, 1, 2, 2).unwrap();
        let expect1 = CMatrix::from_rows(&[&[c(0.0, 0.0), c(h, h)], &[c(h, -h), c(0.0, 0.0)]]);
        assert!(o1.matrix().sub(&expect1).frobenius_norm() < 1e-12);
        let o2 = ideal_observable(PartyClass::First, 2, 2, 2).unwrap();
        let expect2 = CMatrix::from_rows(&[&[c(0.0, 0.0), c(-h, h)], &[c(-h, -h), c(0.0, 0.0)]]);
        assert!(o2.matrix().sub(&expect2).frobenius_norm() < 1e-12);
    }

    #[test]
    fn coefficient_a1_m2_d2() {
        let coeffs = bell_coefficients(2, 2).unwrap();
        assert!((coeffs.a(1) - c(1.0 / 2.0_f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn coefficients_conjugate_pairing_and_modulus() {
        let (m, d) = (3, 5);
        let coeffs = bell_coefficients(m, d).unwrap();
        let expect_mod = 1.0 / (2.0 * (std::f64::consts::PI / (2.0 * m as f64)).cos());
        for k in 1..d {
            assert!((coeffs.a(d - k) - coeffs.a(k).conj()).norm() < 1e-14);
            assert!((coeffs.a(k).norm() - expect_mod).abs() < 1e-14);
        }
    }

    #[test]
    fn coefficients_mnt_empty_for_m2() {
        let coeffs = bell_coefficients(2, 4).unwrap();
        assert_eq!(coeffs.mnt_len(), 0);
        assert!(matches!(coeffs.mu_nu_tau(1, 1), Err(Error::EmptyRange(_))));
    }

    #[test]
    fn canonical_t22_is_minus_sigma_x() {
        let (_, t) = canonical_pair(2, 2).unwrap();
        let expect =
            CMatrix::from_rows(&[&[c(0.0, 0.0), c(-1.0, 0.0)], &[c(-1.0, 0.0), c(0.0, 0.0)]]);
        assert!(t.matrix().sub(&expect).frobenius_norm() < 1e-12);
    }

    #[test]
    fn canonical_z_traceless() {
        for d in 2..=6 {
            let (z, _) = canonical_pair(d, 2).unwrap();
            assert!(z.matrix().trace().norm() < 1e-12);
        }
    }

    #[test]
    fn canonical_t_cubed_is_identity() {
        let (_, t) = canonical_pair(3, 2).unwrap();
        assert!(
            t.matrix()
                .pow(3)
                .sub(&CMatrix::identity(3))
                .frobenius_norm()
                < 1e-9
        );
    }

    #[test]
    fn t_eigenvector_qubit_case() {
        // eigenvector of -sigma_x with eigenvalue +1, proportional to (1,-1)/sqrt(2)
        let v = t_eigenvector(0, 2, 2).unwrap();
        let reference = CVector::new(vec![c(1.0, 0.0), c(-1.0, 0.0)]).normalized();
        let overlap = reference.dot(&v).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_eigenvectors_orthonormal() {
        let (d, m) = (4, 3);
        let vecs: Vec<_> = (0..d).map(|r| t_eigenvector(r, d, m).unwrap()).collect();
        for i in 0..d {
            for j in 0..d {
                let g = vecs[i].dot(&vecs[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(expect, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn t_eigenvector_residuals() {
        let (d, m) = (5, 2);
        let (_, t) = canonical_pair(d, m).unwrap();
        for r in 0..d {
            let v = t_eigenvector(r, d, m).unwrap();
            let residual = t
                .matrix()
                .apply(&v)
                .sub(&v.scaled(omega_int(d, r as i64)))
                .norm();
            assert!(residual < 1e-10, "r = {r}: {residual:.2e}");
        }
    }

    #[test]
    fn t_eigenvector_range_check() {
        assert!(t_eigenvector(3, 3, 2).is_err());
    }

    #[test]
    fn extraction_unitary_qubit_example() {
        let w = extraction_unitary(PartyClass::First, 2, 2).unwrap();
        let (z, _) = canonical_pair(2, 2).unwrap();
        let o2 = ideal_observable(PartyClass::First, 2, 2, 2).unwrap();
        let conj = w.matmul(z.matrix()).matmul(&w.adjoint());
        assert!(conj.sub(o2.matrix()).frobenius_norm() < 1e-10);
    }

    #[test]
    fn extraction_unitary_even_t_example() {
        let w = extraction_unitary(PartyClass::Even, 3, 3).unwrap();
        let (_, t) = canonical_pair(3, 3).unwrap();
        let o3 = ideal_observable(PartyClass::Even, 3, 3, 3).unwrap();
        let conj = w.matmul(t.matrix()).matmul(&w.adjoint());
        assert!(conj.sub(o3.matrix()).frobenius_norm() < 1e-9);
    }

    #[test]
    fn extraction_unitaries_are_unitary() {
        for class in [
            PartyClass::First,
            PartyClass::Second,
            PartyClass::Odd,
            PartyClass::Even,
        ] {
            for (m, d) in [(2, 2), (3, 4), (4, 3)] {
                let w = extraction_unitary(class, m, d).unwrap();
                let res = w
                    .adjoint()
                    .matmul(&w)
                    .sub(&CMatrix::identity(d))
                    .frobenius_norm();
                assert!(res < 1e-11);
            }
        }
    }

    #[test]
    fn ideal_powers_are_traceless() {
        for class in [
            PartyClass::First,
            PartyClass::Second,
            PartyClass::Odd,
            PartyClass::Even,
        ] {
            for (m, d) in [(2, 4), (3, 5), (4, 3)] {
                for x in 1..=m {
                    let o = ideal_observable(class, x, m, d).unwrap();
                    for n in 1..d {
                        assert!(o.power(n as i64).trace().norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_pair_trace_relations() {
        // the two operator identities tying Z^k to T^k, full range for the
        // symmetric one, k <= d/2 for the squared one (matching the sos suite)
        for (d, m) in [(2, 2), (3, 2), (4, 3), (5, 3)] {
            let (z, t) = canonical_pair(d, m).unwrap();
            let id = CMatrix::identity(d);
            let two_cos = 2.0 * (std::f64::consts::PI / m as f64).cos();
            for k in 1..d {
                let lhs = z
                    .power(k as i64)
                    .matmul(&t.power(-(k as i64)))
                    .scaled(omega(d, Frac::new(2 * k as i64 - d as i64, 2 * m as i64)));
                let rhs = t
                    .power(k as i64)
                    .matmul(&z.power(-(k as i64)))
                    .scaled(omega(
                        d,
                        Frac::new(-(2 * k as i64 - d as i64), 2 * m as i64),
                    ));
                let res = lhs
                    .add(&rhs)
                    .sub(&id.scaled(c(two_cos, 0.0)))
                    .frobenius_norm();
                assert!(res < 1e-9, "d={d} m={m} k={k}: {res:.2e}");
            }
            for k in 1..=d / 2 {
                let lhs = z
                    .power(2 * k as i64)
                    .scaled(omega(d, Frac::new(k as i64, m as i64)))
                    .add(
                        &t.power(2 * k as i64)
                            .scaled(omega(d, Frac::new(-(k as i64), m as i64))),
                    );
                let rhs = z
                    .power(k as i64)
                    .matmul(&t.power(k as i64))
                    .add(&t.power(k as i64).matmul(&z.power(k as i64)));
                let res = lhs.sub(&rhs).frobenius_norm();
                assert!(res < 1e-9, "d={d} m={m} k={k}: {res:.2e}");
            }
        }
    }

    #[test]
    fn canonical_pair_power_trace_identity() {
        // |Tr(Z^x) - omega^{2tx/m} Tr(Z^{(2t+1)x} T^{-2tx})| vanishes
        for (d, m) in [(3, 2), (4, 3), (5, 2)] {
            let (z, t) = canonical_pair(d, m).unwrap();
            for x in 1..=d / 2 {
                for tt in 0..4i64 {
                    let lhs = z.power(x as i64).trace();
                    let rhs = omega(d, Frac::new(2 * tt * x as i64, m as i64))
                        * z.power((2 * tt + 1) * x as i64)
                            .matmul(&t.power(-2 * tt * x as i64))
                            .trace();
                    assert!((lhs - rhs).norm() < 1e-9, "d={d} m={m} x={x} t={tt}");
                }
            }
        }
    }

    #[test]
    fn combined_observables_are_unitary_for_ideal_pairs() {
        // a_k O_x^k + a_k^* O_{x+1}^k is unitary for every class and k
        for (m, d) in [(2, 2), (3, 3), (3, 4)] {
            let coeffs = bell_coefficients(m, d).unwrap();
            for class in [
                PartyClass::First,
                PartyClass::Second,
                PartyClass::Odd,
                PartyClass::Even,
            ] {
                for x in 1..=m {
                    let ox = ideal_observable_resolved(class, x, m, d).unwrap();
                    let ox1 = ideal_observable_resolved(class, x + 1, m, d).unwrap();
                    for k in 1..d {
                        let combined = ox
                            .pow(k)
                            .scaled(coeffs.a(k))
                            .add(&ox1.pow(k).scaled(coeffs.a(k).conj()));
                        let res = combined
                            .adjoint()
                            .matmul(&combined)
                            .sub(&CMatrix::identity(d))
                            .frobenius_norm();
                        assert!(res < 1e-9, "{class:?} m={m} d={d} x={x} k={k}: {res:.2e}");
                    }
                }
            }
        }
    }
}
