//! The preserved Pauli subspace of a gate family, the commutant basis B in
//! which adjusted family members decompose, and the dual basis Q.
//!
//! A family F of n-qubit unitaries fixes a subspace of Pauli rows that every
//! member maps to ±itself under conjugation. Working in the binary symplectic
//! picture, the commutant of that subspace is the null space of F·Ω; its
//! basis `B_1..B_{2n-r}` carries every adjusted family member as a linear
//! combination of the phase-tracked products `B_x = B_1^{x_1}···B_k^{x_k}`.

use num_complex::Complex64;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gates;
use crate::gf2::{affine_space_iter, solution_space, Gf2Matrix};
use crate::pauli::{omega_row, CMat, PauliString};

/// Conjugation and reconstruction tolerance used throughout the analysis.
pub const TOL: f64 = 1e-10;

/// Brute-force enumeration guard for the preserved-subspace search.
pub const MAX_ANALYSIS_QUBITS: usize = 5;

/// A GF(2) row space of Pauli `(x|z)` rows in canonical reduced form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PauliSubspace {
    n: usize,
    generators: Gf2Matrix,
}

impl PauliSubspace {
    pub fn new(n: usize, rows: Vec<u64>) -> Result<Self> {
        let m = Gf2Matrix::new(rows, 2 * n)?;
        Ok(Self {
            n,
            generators: m.rref(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension r of the row space.
    pub fn rank(&self) -> usize {
        self.generators.nrows()
    }

    pub fn generators(&self) -> &Gf2Matrix {
        &self.generators
    }

    pub fn generator_paulis(&self) -> Vec<PauliString> {
        self.generators
            .rows()
            .iter()
            .map(|&r| PauliString::from_row(self.n, r).expect("rows validated"))
            .collect()
    }

    pub fn contains(&self, row: u64) -> bool {
        self.generators.row_space_contains(row)
    }

    /// All rows of the space; intended for desk-scale subspaces.
    pub fn enumerate_rows(&self) -> Vec<u64> {
        affine_space_iter(0, &self.generators).collect()
    }
}

/// One member of a gate family: either a fixed unitary or a parametrized
/// generator represented by probe instantiations.
#[derive(Clone, Debug)]
pub enum FamilyGate {
    Fixed(CMat),
    /// Probe values (parameter, unitary) standing in for a continuous family.
    Parametric(Vec<(f64, CMat)>),
}

impl FamilyGate {
    pub fn probes(&self) -> Vec<&CMat> {
        match self {
            FamilyGate::Fixed(m) => vec![m],
            FamilyGate::Parametric(ps) => ps.iter().map(|(_, m)| m).collect(),
        }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self, FamilyGate::Parametric(_))
    }

    pub fn fixed(&self) -> Result<&CMat> {
        match self {
            FamilyGate::Fixed(m) => Ok(m),
            FamilyGate::Parametric(_) => Err(Error::Unsupported(
                "parametrized gate needs a concrete parameter".into(),
            )),
        }
    }
}

/// A register width plus the list of gates Bob agrees to implement blindly.
/// Gate 0 is always the identity.
#[derive(Clone, Debug)]
pub struct GateFamily {
    pub n: usize,
    pub gates: Vec<FamilyGate>,
}

impl GateFamily {
    pub fn new(n: usize, gates: Vec<FamilyGate>) -> Result<Self> {
        if gates.is_empty() {
            return Err(Error::Validation("family has no gates".into()));
        }
        let dim = 1usize << n;
        for (d, gate) in gates.iter().enumerate() {
            for m in gate.probes() {
                if m.shape() != (dim, dim) {
                    return Err(Error::Dimension(format!(
                        "gate {d} has shape {:?} for n={n}",
                        m.shape()
                    )));
                }
                if !gates::is_unitary(m, TOL) {
                    return Err(Error::Validation(format!("gate {d} is not unitary")));
                }
            }
        }
        let id = gates::identity(dim);
        if gates::max_norm_diff(gates[0].probes()[0], &id) > TOL {
            return Err(Error::Validation("gate 0 must be the identity".into()));
        }
        Ok(Self { n, gates })
    }

    /// Two-gate convenience family {I, u}.
    pub fn pair(n: usize, u: CMat) -> Result<Self> {
        Self::new(
            n,
            vec![
                FamilyGate::Fixed(gates::identity(1 << n)),
                FamilyGate::Fixed(u),
            ],
        )
    }

    fn all_probes(&self) -> Vec<&CMat> {
        self.gates.iter().flat_map(|g| g.probes()).collect()
    }
}

/// Conjugation sign of a Pauli under a unitary: `u p u^dagger = ±p`.
/// Returns None when the Pauli is not preserved.
fn conjugation_sign(u: &CMat, p: &CMat) -> Option<i8> {
    let conj = u * p * u.adjoint();
    if gates::max_norm_diff(&conj, p) <= TOL {
        Some(1)
    } else if gates::max_norm_diff(&conj, &(-p)) <= TOL {
        Some(-1)
    } else {
        None
    }
}

/// The subspace of Pauli rows every family member conjugates to ±itself,
/// found by brute-force enumeration of all 4^n rows.
pub fn preserved_subspace(family: &GateFamily) -> Result<PauliSubspace> {
    let n = family.n;
    if n > MAX_ANALYSIS_QUBITS {
        return Err(Error::Resource(format!(
            "preserved-subspace enumeration refused for n={n}"
        )));
    }
    let probes = family.all_probes();
    let mut rows = Vec::new();
    for row in 0..(1u64 << (2 * n)) {
        let dense = PauliString::from_row(n, row)?.dense()?;
        if probes.iter().all(|u| conjugation_sign(u, &dense).is_some()) {
            rows.push(row);
        }
    }
    let space = PauliSubspace::new(n, rows.clone())?;
    // The preserved set must itself be a row space.
    if rows.len() != 1 << space.rank() {
        return Err(Error::Invariant(format!(
            "preserved set of size {} is not closed under multiplication",
            rows.len()
        )));
    }
    Ok(space)
}

/// Replace each family gate `U` by `P_y · U` so that every gate commutes with
/// every generator of the preserved subspace. Returns the adjusted family and
/// the adjustment Pauli chosen per gate.
pub fn adjust_family(
    family: &GateFamily,
    pf: &PauliSubspace,
) -> Result<(GateFamily, Vec<PauliString>)> {
    let n = family.n;
    let gen_dense: Vec<CMat> = pf
        .generator_paulis()
        .iter()
        .map(|p| p.dense())
        .collect::<Result<_>>()?;
    let mut adjusted = Vec::new();
    let mut adjustments = Vec::new();
    for (d, gate) in family.gates.iter().enumerate() {
        // Anti-commutation bits against each generator, consistent across
        // probe values of a parametrized gate.
        let mut signs: Option<u64> = None;
        for u in gate.probes() {
            let mut s = 0u64;
            for (i, g) in gen_dense.iter().enumerate() {
                match conjugation_sign(u, g) {
                    Some(-1) => s |= 1 << i,
                    Some(1) => {}
                    _ => {
                        return Err(Error::Invariant(format!(
                            "gate {d} does not preserve the computed subspace"
                        )))
                    }
                }
            }
            match signs {
                None => signs = Some(s),
                Some(prev) if prev == s => {}
                Some(_) => {
                    return Err(Error::Invariant(format!(
                        "gate {d} has parameter-dependent conjugation signs"
                    )))
                }
            }
        }
        let s = signs.unwrap_or(0);
        let y = if s == 0 {
            PauliString::identity(n)
        } else {
            solve_adjustment(n, pf, s)?
        };
        adjustments.push(y);
        if y.is_identity_up_to_phase() {
            adjusted.push(gate.clone());
        } else {
            let yd = y.dense()?;
            adjusted.push(match gate {
                FamilyGate::Fixed(m) => FamilyGate::Fixed(&yd * m),
                FamilyGate::Parametric(ps) => FamilyGate::Parametric(
                    ps.iter().map(|(t, m)| (*t, &yd * m)).collect(),
                ),
            });
        }
    }
    let out = GateFamily::new(n, adjusted)?;
    // Every adjusted gate must now commute with every generator.
    for gate in &out.gates {
        for u in gate.probes() {
            for g in &gen_dense {
                if conjugation_sign(u, g) != Some(1) {
                    return Err(Error::Invariant(
                        "adjustment failed to enforce commutation".into(),
                    ));
                }
            }
        }
    }
    Ok((out, adjustments))
}

/// Solve `c(P_y, P_g) = s_g` over all generators, choosing the solution whose
/// `(x|z)` bit string is lexicographically smallest (x block first, qubit 0
/// most significant).
fn solve_adjustment(n: usize, pf: &PauliSubspace, s: u64) -> Result<PauliString> {
    let rows: Vec<u64> = pf
        .generators()
        .rows()
        .iter()
        .map(|&g| omega_row(g, n))
        .collect();
    let system = Gf2Matrix::new(rows, 2 * n)?;
    let (particular, nullspace) = solution_space(&system, s)
        .ok_or_else(|| Error::Invariant("adjustment system is inconsistent".into()))?;
    let best = affine_space_iter(particular, &nullspace)
        .min_by_key(|&row| lex_key(row, n))
        .expect("affine space is never empty");
    PauliString::from_row(n, best)
}

/// Lexicographic ordering key of the `(x|z)` bit string read x block first,
/// qubit 0 most significant.
fn lex_key(row: u64, n: usize) -> u64 {
    let mut key = 0u64;
    for i in 0..(2 * n) {
        key |= ((row >> i) & 1) << (2 * n - 1 - i);
    }
    key
}

/// Ordered basis of the commutant of the preserved subspace, with the
/// strictly-lower-triangular commutator vectors `c_i`.
#[derive(Clone, Debug)]
pub struct BasisB {
    n: usize,
    r: usize,
    paulis: Vec<PauliString>,
    /// Bit j of `c_vectors[i]` is c(B_{i+1}, B_{j+1}) for j < i.
    c_vectors: Vec<u64>,
}

impl BasisB {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// dim(B) = 2n - r.
    pub fn len(&self) -> usize {
        self.paulis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paulis.is_empty()
    }

    pub fn paulis(&self) -> &[PauliString] {
        &self.paulis
    }

    pub fn c_vectors(&self) -> &[u64] {
        &self.c_vectors
    }

    /// `c_z = xor_i z_i c_i`.
    pub fn c_of(&self, z: u64) -> u64 {
        let mut acc = 0;
        for (i, &c) in self.c_vectors.iter().enumerate() {
            if (z >> i) & 1 == 1 {
                acc ^= c;
            }
        }
        acc
    }

    /// Phase-tracked left-to-right product `B_x = B_1^{x_1}···B_k^{x_k}`.
    pub fn b_x(&self, x: u64) -> PauliString {
        let mut acc = PauliString::identity(self.n);
        for (i, b) in self.paulis.iter().enumerate() {
            if (x >> i) & 1 == 1 {
                acc = acc.multiply(b).expect("equal widths");
            }
        }
        acc
    }

    pub fn row_matrix(&self) -> Gf2Matrix {
        Gf2Matrix::new(self.paulis.iter().map(|p| p.row()).collect(), 2 * self.n)
            .expect("rows validated")
    }

    /// Coordinates of a Pauli row in this basis, if supported.
    pub fn coordinates(&self, row: u64) -> Option<u64> {
        self.row_matrix().express(row)
    }
}

/// Basis of the null space of F·Ω, ordered by packed `(x|z)` key.
pub fn support_basis(pf: &PauliSubspace) -> Result<BasisB> {
    let n = pf.n();
    let f_omega = Gf2Matrix::new(
        pf.generators()
            .rows()
            .iter()
            .map(|&g| omega_row(g, n))
            .collect(),
        2 * n,
    )?;
    let null = if pf.rank() == 0 {
        Gf2Matrix::identity(2 * n)
    } else {
        f_omega.nullspace()
    };
    let mut rows: Vec<u64> = null.rref().rows().to_vec();
    rows.sort_unstable();
    let paulis: Vec<PauliString> = rows
        .iter()
        .map(|&r| PauliString::from_row(n, r))
        .collect::<Result<_>>()?;
    // All basis elements must commute with the whole preserved subspace.
    for b in &paulis {
        for g in pf.generator_paulis() {
            if b.commutator(&g)? != 0 {
                return Err(Error::Invariant(
                    "support basis fails to commute with the preserved subspace".into(),
                ));
            }
        }
    }
    let mut c_vectors = Vec::with_capacity(paulis.len());
    for i in 0..paulis.len() {
        let mut c = 0u64;
        for j in 0..i {
            if paulis[i].commutator(&paulis[j])? == 1 {
                c |= 1 << j;
            }
        }
        c_vectors.push(c);
    }
    Ok(BasisB {
        n,
        r: pf.rank(),
        paulis,
        c_vectors,
    })
}

/// Basis dual to B under the symplectic form: c(Q_i, B_j) = delta_ij.
#[derive(Clone, Debug)]
pub struct DualBasisQ {
    n: usize,
    paulis: Vec<PauliString>,
}

impl DualBasisQ {
    pub fn paulis(&self) -> &[PauliString] {
        &self.paulis
    }

    /// Phase-tracked product `Q_y = Q_1^{y_1}···Q_k^{y_k}`.
    pub fn q_y(&self, y: u64) -> PauliString {
        let mut acc = PauliString::identity(self.n);
        for (i, q) in self.paulis.iter().enumerate() {
            if (y >> i) & 1 == 1 {
                acc = acc.multiply(q).expect("equal widths");
            }
        }
        acc
    }
}

pub fn dual_basis(b: &BasisB) -> Result<DualBasisQ> {
    let n = b.n();
    let system = Gf2Matrix::new(
        b.paulis().iter().map(|p| omega_row(p.row(), n)).collect(),
        2 * n,
    )?;
    let mut paulis = Vec::with_capacity(b.len());
    for i in 0..b.len() {
        let q = system
            .solve(1u64 << i)
            .ok_or_else(|| Error::Invariant("dual basis system is inconsistent".into()))?;
        paulis.push(PauliString::from_row(n, q)?);
    }
    // Full delta-matrix check.
    for (i, q) in paulis.iter().enumerate() {
        for (j, bj) in b.paulis().iter().enumerate() {
            let expect = u8::from(i == j);
            if q.commutator(bj)? != expect {
                return Err(Error::Invariant("dual basis fails the delta check".into()));
            }
        }
    }
    Ok(DualBasisQ { n, paulis })
}

/// Full Pauli decomposition `gamma_y = Tr(P_y^dagger u) / 2^n` over canonical
/// Hermitian representatives, keyed by packed `(x|z)` row.
pub fn pauli_decompose(u: &CMat, n: usize) -> Result<BTreeMap<u64, Complex64>> {
    let dim = 1usize << n;
    if u.shape() != (dim, dim) {
        return Err(Error::Dimension(format!(
            "matrix shape {:?} for n={n}",
            u.shape()
        )));
    }
    if !gates::is_unitary(u, TOL) {
        return Err(Error::Validation("input is not unitary".into()));
    }
    let mut coeffs = BTreeMap::new();
    let scale = 1.0 / dim as f64;
    for row in 0..(1u64 << (2 * n)) {
        let p = PauliString::from_row(n, row)?.dense()?;
        let gamma = (p.adjoint() * u).trace() * scale;
        if gamma.norm() > 1e-12 {
            coeffs.insert(row, gamma);
        }
    }
    Ok(coeffs)
}

/// Coefficients of `u = sum_x gamma_x B_x` over the phase-tracked basis
/// products, indexed by x with x_1 the least significant bit.
pub fn decompose_in_b(u: &CMat, b: &BasisB) -> Result<Vec<Complex64>> {
    let n = b.n();
    let dim = 1usize << n;
    if u.shape() != (dim, dim) {
        return Err(Error::Dimension(format!(
            "matrix shape {:?} for n={n}",
            u.shape()
        )));
    }
    let k = b.len();
    let scale = 1.0 / dim as f64;
    let mut gamma = Vec::with_capacity(1 << k);
    let mut residual = u.clone();
    for x in 0..(1u64 << k) {
        let bx = b.b_x(x).dense()?;
        let g = (bx.adjoint() * u).trace() * scale;
        residual -= bx.map(|e| e * g);
        gamma.push(g);
    }
    let res = residual.iter().map(|e| e.norm()).fold(0.0, f64::max);
    if res > TOL {
        return Err(Error::Unsupported(format!(
            "gate not supported on B (residual {res:.2e})"
        )));
    }
    Ok(gamma)
}
