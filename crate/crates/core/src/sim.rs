//! Dense pure-state / density-matrix simulator with named register layout.
//!
//! Amplitude indices are register-major: qubit 0 is the most significant bit
//! of the index. States are value-like; operations return new states.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates;
use crate::pauli::{CMat, PauliString};
use crate::report::Real;

pub type CVec = DVector<Complex64>;

/// Dense-simulation guards.
pub const MAX_PURE_QUBITS: usize = 14;
pub const MAX_MIXED_QUBITS: usize = 10;

pub const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub qubits: usize,
}

/// Ordered list of named registers; earlier registers take the more
/// significant amplitude bits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout(pub Vec<Register>);

impl Layout {
    pub fn single(name: &str, qubits: usize) -> Self {
        Layout(vec![Register {
            name: name.into(),
            qubits,
        }])
    }

    pub fn total_qubits(&self) -> usize {
        self.0.iter().map(|r| r.qubits).sum()
    }

    pub fn qubit_range(&self, name: &str) -> Result<std::ops::Range<usize>> {
        let mut offset = 0;
        for reg in &self.0 {
            if reg.name == name {
                return Ok(offset..offset + reg.qubits);
            }
            offset += reg.qubits;
        }
        Err(Error::Dimension(format!("no register named {name:?}")))
    }

    fn without_first(&self) -> Layout {
        Layout(self.0[1..].to_vec())
    }
}

#[derive(Clone, Debug)]
enum StateData {
    Pure(CVec),
    Mixed(CMat),
}

/// A quantum state over an explicit register layout.
#[derive(Clone, Debug)]
pub struct QuantumState {
    layout: Layout,
    data: StateData,
}

impl QuantumState {
    pub fn pure(layout: Layout, amplitudes: CVec) -> Result<Self> {
        let n = layout.total_qubits();
        if n > MAX_PURE_QUBITS {
            return Err(Error::Resource(format!("{n} qubits exceed pure-state cap")));
        }
        if amplitudes.len() != 1 << n {
            return Err(Error::Dimension(format!(
                "amplitude vector of length {} for {n} qubits",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Validation(format!("state norm {norm} is not 1")));
        }
        Ok(Self {
            layout,
            data: StateData::Pure(amplitudes),
        })
    }

    pub fn mixed(layout: Layout, rho: CMat) -> Result<Self> {
        let n = layout.total_qubits();
        if n > MAX_MIXED_QUBITS {
            return Err(Error::Resource(format!(
                "{n} qubits exceed density-matrix cap"
            )));
        }
        let dim = 1usize << n;
        if rho.shape() != (dim, dim) {
            return Err(Error::Dimension(format!(
                "density matrix of shape {:?} for {n} qubits",
                rho.shape()
            )));
        }
        validate_density_matrix(&rho)?;
        Ok(Self {
            layout,
            data: StateData::Mixed(rho),
        })
    }

    pub fn zero(layout: Layout) -> Result<Self> {
        Self::basis_state(layout, 0)
    }

    pub fn basis_state(layout: Layout, index: usize) -> Result<Self> {
        let dim = 1usize << layout.total_qubits();
        let mut v = CVec::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Self::pure(layout, v)
    }

    /// |+...+> on a fresh register.
    pub fn plus(layout: Layout) -> Result<Self> {
        let dim = 1usize << layout.total_qubits();
        let amp = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self::pure(layout, CVec::from_element(dim, amp))
    }

    /// Maximally entangled pair of same-width registers.
    pub fn maximally_entangled(a: &str, b: &str, qubits: usize) -> Result<Self> {
        let layout = Layout(vec![
            Register {
                name: a.into(),
                qubits,
            },
            Register {
                name: b.into(),
                qubits,
            },
        ]);
        let d = 1usize << qubits;
        let mut v = CVec::zeros(d * d);
        let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
        for i in 0..d {
            v[i * d + i] = amp;
        }
        Self::pure(layout, v)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn total_qubits(&self) -> usize {
        self.layout.total_qubits()
    }

    pub fn dim(&self) -> usize {
        1 << self.total_qubits()
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    pub fn amplitudes(&self) -> Result<&CVec> {
        match &self.data {
            StateData::Pure(v) => Ok(v),
            StateData::Mixed(_) => Err(Error::Validation("state is mixed".into())),
        }
    }

    /// The density matrix of this state (an outer product for pure states).
    pub fn density_matrix(&self) -> CMat {
        match &self.data {
            StateData::Pure(v) => v * v.adjoint(),
            StateData::Mixed(m) => m.clone(),
        }
    }

    /// Tensor product; `self` takes the more significant bits.
    pub fn tensor(&self, other: &QuantumState) -> Result<QuantumState> {
        let mut regs = self.layout.0.clone();
        regs.extend(other.layout.0.iter().cloned());
        let layout = Layout(regs);
        match (&self.data, &other.data) {
            (StateData::Pure(a), StateData::Pure(b)) => {
                QuantumState::pure(layout, a.kronecker(b))
            }
            _ => QuantumState::mixed(
                layout,
                self.density_matrix().kronecker(&other.density_matrix()),
            ),
        }
    }

    fn bit_position(&self, qubit: usize) -> usize {
        self.total_qubits() - 1 - qubit
    }

    fn gather_indices(&self, targets: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        let n = self.total_qubits();
        let mut seen = vec![false; n];
        for &t in targets {
            if t >= n {
                return Err(Error::Dimension(format!("target qubit {t} out of range")));
            }
            if seen[t] {
                return Err(Error::Dimension(format!("duplicate target qubit {t}")));
            }
            seen[t] = true;
        }
        let k = targets.len();
        // target_offsets[a] = bits of a distributed over the target positions,
        // with targets[0] the most significant gate qubit.
        let mut target_offsets = vec![0usize; 1 << k];
        for a in 0..(1 << k) {
            let mut idx = 0usize;
            for (j, &t) in targets.iter().enumerate() {
                if (a >> (k - 1 - j)) & 1 == 1 {
                    idx |= 1 << self.bit_position(t);
                }
            }
            target_offsets[a] = idx;
        }
        let rest_positions: Vec<usize> = (0..n)
            .filter(|q| !seen[*q])
            .map(|q| self.bit_position(q))
            .collect();
        let mut rest_offsets = vec![0usize; 1 << rest_positions.len()];
        for (r, off) in rest_offsets.iter_mut().enumerate() {
            let mut idx = 0usize;
            for (j, &pos) in rest_positions.iter().enumerate() {
                if (r >> j) & 1 == 1 {
                    idx |= 1 << pos;
                }
            }
            *off = idx;
        }
        Ok((target_offsets, rest_offsets))
    }

    /// Apply a unitary to the listed target qubits (identity elsewhere).
    /// `targets[0]` is the most significant qubit of the gate matrix.
    pub fn apply_unitary(&self, targets: &[usize], u: &CMat) -> Result<QuantumState> {
        let dim_t = 1usize << targets.len();
        if u.shape() != (dim_t, dim_t) {
            return Err(Error::Dimension(format!(
                "gate of shape {:?} on {} targets",
                u.shape(),
                targets.len()
            )));
        }
        if !gates::is_unitary(u, 1e-10) {
            return Err(Error::Validation("gate is not unitary".into()));
        }
        let (toff, roff) = self.gather_indices(targets)?;
        match &self.data {
            StateData::Pure(v) => {
                let mut out = v.clone();
                let mut block = vec![Complex64::default(); dim_t];
                for &base in &roff {
                    for (a, &t) in toff.iter().enumerate() {
                        block[a] = v[base | t];
                    }
                    for (a, &t) in toff.iter().enumerate() {
                        let mut acc = Complex64::default();
                        for (b, &amp) in block.iter().enumerate() {
                            acc += u[(a, b)] * amp;
                        }
                        out[base | t] = acc;
                    }
                }
                Ok(QuantumState {
                    layout: self.layout.clone(),
                    data: StateData::Pure(out),
                })
            }
            StateData::Mixed(rho) => {
                let big = self.embed_unitary(&toff, &roff, u);
                let out = &big * rho * big.adjoint();
                Ok(QuantumState {
                    layout: self.layout.clone(),
                    data: StateData::Mixed(out),
                })
            }
        }
    }

    fn embed_unitary(&self, toff: &[usize], roff: &[usize], u: &CMat) -> CMat {
        let dim = self.dim();
        let mut big = CMat::zeros(dim, dim);
        for &base in roff {
            for (a, &ta) in toff.iter().enumerate() {
                for (b, &tb) in toff.iter().enumerate() {
                    big[(base | ta, base | tb)] = u[(a, b)];
                }
            }
        }
        big
    }

    /// |0><0| ⊗ I + |1><1| ⊗ P with an explicit control qubit.
    pub fn apply_controlled_pauli(
        &self,
        control: usize,
        p: &PauliString,
        targets: &[usize],
    ) -> Result<QuantumState> {
        if targets.contains(&control) {
            return Err(Error::Dimension(format!(
                "control qubit {control} overlaps targets"
            )));
        }
        if p.n() != targets.len() {
            return Err(Error::Dimension(format!(
                "pauli on {} qubits with {} targets",
                p.n(),
                targets.len()
            )));
        }
        let gate = gates::controlled(&p.dense()?);
        let mut all = Vec::with_capacity(targets.len() + 1);
        all.push(control);
        all.extend_from_slice(targets);
        self.apply_unitary(&all, &gate)
    }

    /// Born-rule measurement of the listed qubits in the given basis. The
    /// outcome register is collapsed in place; probabilities are exact.
    pub fn measure_in_basis<R: Rng + ?Sized>(
        &self,
        targets: &[usize],
        basis: &MeasurementBasis,
        rng: &mut R,
        forced: Option<usize>,
    ) -> Result<(usize, QuantumState, f64)> {
        if basis.qubits != targets.len() {
            return Err(Error::Dimension(format!(
                "basis on {} qubits with {} targets",
                basis.qubits, targets.len()
            )));
        }
        let rotated = self.apply_unitary(targets, &basis.matrix.adjoint())?;
        let probs = rotated.pattern_probabilities(targets)?;
        let outcome = choose_outcome(&probs, rng, forced)?;
        let projected = rotated.project_pattern(targets, outcome, probs[outcome])?;
        let back = projected.apply_unitary(targets, &basis.matrix)?;
        Ok((outcome, back, probs[outcome]))
    }

    fn pattern_probabilities(&self, targets: &[usize]) -> Result<Vec<f64>> {
        let (toff, roff) = self.gather_indices(targets)?;
        let mut probs = vec![0.0; toff.len()];
        match &self.data {
            StateData::Pure(v) => {
                for (a, &ta) in toff.iter().enumerate() {
                    for &base in &roff {
                        probs[a] += v[base | ta].norm_sqr();
                    }
                }
            }
            StateData::Mixed(rho) => {
                for (a, &ta) in toff.iter().enumerate() {
                    for &base in &roff {
                        probs[a] += rho[(base | ta, base | ta)].re;
                    }
                }
            }
        }
        Ok(probs)
    }

    fn project_pattern(&self, targets: &[usize], outcome: usize, p: f64) -> Result<QuantumState> {
        let (toff, roff) = self.gather_indices(targets)?;
        let keep = toff[outcome];
        match &self.data {
            StateData::Pure(v) => {
                let mut out = CVec::zeros(v.len());
                let scale = Complex64::new(1.0 / p.sqrt(), 0.0);
                for &base in &roff {
                    out[base | keep] = v[base | keep] * scale;
                }
                Ok(QuantumState {
                    layout: self.layout.clone(),
                    data: StateData::Pure(out),
                })
            }
            StateData::Mixed(rho) => {
                let mut out = CMat::zeros(rho.nrows(), rho.ncols());
                let scale = Complex64::new(1.0 / p, 0.0);
                for &b1 in &roff {
                    for &b2 in &roff {
                        out[(b1 | keep, b2 | keep)] = rho[(b1 | keep, b2 | keep)] * scale;
                    }
                }
                Ok(QuantumState {
                    layout: self.layout.clone(),
                    data: StateData::Mixed(out),
                })
            }
        }
    }

    /// All branches of measuring the *first* register in `basis`; the
    /// measured register is removed from the returned states. Branches are
    /// listed by outcome index with their exact probabilities.
    pub fn branch_first_register(&self, basis: &MeasurementBasis) -> Result<Vec<(f64, QuantumState)>> {
        let first = &self.layout.0[0];
        if basis.qubits != first.qubits {
            return Err(Error::Dimension(format!(
                "basis on {} qubits but register {} has {}",
                basis.qubits, first.name, first.qubits
            )));
        }
        let targets: Vec<usize> = (0..first.qubits).collect();
        let rotated = self.apply_unitary(&targets, &basis.matrix.adjoint())?;
        let rest_layout = self.layout.without_first();
        let rest_dim = 1usize << rest_layout.total_qubits();
        let mut branches = Vec::new();
        match &rotated.data {
            StateData::Pure(v) => {
                for o in 0..(1 << first.qubits) {
                    let block = v.rows(o * rest_dim, rest_dim).into_owned();
                    let p = block.norm().powi(2);
                    let state = if p > 1e-300 {
                        QuantumState {
                            layout: rest_layout.clone(),
                            data: StateData::Pure(block / Complex64::new(p.sqrt(), 0.0)),
                        }
                    } else {
                        QuantumState::zero(rest_layout.clone())?
                    };
                    branches.push((p, state));
                }
            }
            StateData::Mixed(rho) => {
                for o in 0..(1 << first.qubits) {
                    let block = rho
                        .view((o * rest_dim, o * rest_dim), (rest_dim, rest_dim))
                        .into_owned();
                    let p = block.diagonal().iter().map(|e| e.re).sum::<f64>();
                    let state = if p > 1e-300 {
                        QuantumState {
                            layout: rest_layout.clone(),
                            data: StateData::Mixed(block / Complex64::new(p, 0.0)),
                        }
                    } else {
                        QuantumState {
                            layout: rest_layout.clone(),
                            data: StateData::Mixed(CMat::identity(rest_dim, rest_dim)
                                / Complex64::new(rest_dim as f64, 0.0)),
                        }
                    };
                    branches.push((p, state));
                }
            }
        }
        Ok(branches)
    }

    /// Sampled variant of [`Self::branch_first_register`].
    pub fn measure_first_register<R: Rng + ?Sized>(
        &self,
        basis: &MeasurementBasis,
        rng: &mut R,
        forced: Option<usize>,
    ) -> Result<(usize, QuantumState, f64)> {
        let branches = self.branch_first_register(basis)?;
        let probs: Vec<f64> = branches.iter().map(|(p, _)| *p).collect();
        let outcome = choose_outcome(&probs, rng, forced)?;
        let (p, state) = branches.into_iter().nth(outcome).unwrap();
        Ok((outcome, state, p))
    }

    /// Reduced density matrix over the listed qubits, in list order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<CMat> {
        let n = self.total_qubits();
        let mut seen = vec![false; n];
        for &q in keep {
            if q >= n {
                return Err(Error::Dimension(format!("qubit {q} out of range")));
            }
            if seen[q] {
                return Err(Error::Dimension(format!("duplicate qubit {q}")));
            }
            seen[q] = true;
        }
        let (koff, roff) = self.gather_indices(keep)?;
        let kd = koff.len();
        match &self.data {
            StateData::Pure(v) => {
                // Reshape to a (keep x rest) matrix, then rho = A A^dagger.
                let mut a = CMat::zeros(kd, roff.len());
                for (ki, &k) in koff.iter().enumerate() {
                    for (ri, &r) in roff.iter().enumerate() {
                        a[(ki, ri)] = v[k | r];
                    }
                }
                Ok(&a * a.adjoint())
            }
            StateData::Mixed(rho) => {
                let mut out = CMat::zeros(kd, kd);
                for (ki, &bi) in koff.iter().enumerate() {
                    for (kj, &bj) in koff.iter().enumerate() {
                        let mut acc = Complex64::default();
                        for &r in &roff {
                            acc += rho[(bi | r, bj | r)];
                        }
                        out[(ki, kj)] = acc;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Reduced density matrix keeping whole named registers, in layout order.
    pub fn partial_trace_registers(&self, names: &[&str]) -> Result<CMat> {
        let mut keep = Vec::new();
        for reg in &self.layout.0 {
            if names.contains(&reg.name.as_str()) {
                keep.extend(self.layout.qubit_range(&reg.name)?);
            }
        }
        if keep.is_empty() {
            return Err(Error::Dimension("no matching registers to keep".into()));
        }
        self.partial_trace(&keep)
    }
}

fn choose_outcome<R: Rng + ?Sized>(
    probs: &[f64],
    rng: &mut R,
    forced: Option<usize>,
) -> Result<usize> {
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Invariant(format!(
            "outcome probabilities sum to {total}"
        )));
    }
    match forced {
        Some(o) => {
            if o >= probs.len() {
                return Err(Error::Dimension(format!("forced outcome {o} out of range")));
            }
            if probs[o] < 1e-12 {
                return Err(Error::Validation(format!(
                    "forced outcome {o} has probability {}",
                    probs[o]
                )));
            }
            Ok(o)
        }
        None => {
            let draw: f64 = rng.gen();
            let mut acc = 0.0;
            for (o, &p) in probs.iter().enumerate() {
                acc += p;
                if draw < acc {
                    return Ok(o);
                }
            }
            Ok(probs.len() - 1)
        }
    }
}

/// An orthonormal measurement basis given as the columns of a unitary.
#[derive(Clone, Debug)]
pub struct MeasurementBasis {
    pub qubits: usize,
    pub matrix: CMat,
}

impl MeasurementBasis {
    pub fn new(qubits: usize, matrix: CMat) -> Result<Self> {
        let dim = 1usize << qubits;
        if matrix.shape() != (dim, dim) {
            return Err(Error::Dimension(format!(
                "basis matrix shape {:?} for {qubits} qubits",
                matrix.shape()
            )));
        }
        if !gates::is_unitary(&matrix, 1e-10) {
            return Err(Error::Validation("basis columns are not orthonormal".into()));
        }
        Ok(Self { qubits, matrix })
    }

    pub fn computational(qubits: usize) -> Self {
        Self {
            qubits,
            matrix: CMat::identity(1 << qubits, 1 << qubits),
        }
    }

    /// Eigenbasis of a single-qubit Pauli letter, +1 eigenvector first.
    pub fn pauli_eigenbasis(letter: char) -> Result<CMat> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = match letter {
            'Z' => CMat::identity(2, 2),
            'X' => gates::hadamard(),
            'Y' => CMat::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(h, 0.0),
                    Complex64::new(h, 0.0),
                    Complex64::new(0.0, h),
                    Complex64::new(0.0, -h),
                ],
            ),
            _ => return Err(Error::Parse(format!("unknown basis letter {letter:?}"))),
        };
        Ok(m)
    }

    /// Tensor product of single-qubit Pauli eigenbases, one letter per qubit.
    pub fn pauli_product(letters: &[char]) -> Result<Self> {
        let mut m = CMat::identity(1, 1);
        for &l in letters {
            m = m.kronecker(&Self::pauli_eigenbasis(l)?);
        }
        Self::new(letters.len(), m)
    }
}

fn validate_density_matrix(rho: &CMat) -> Result<()> {
    let herm = gates::max_norm_diff(rho, &rho.adjoint());
    if herm > 1e-9 {
        return Err(Error::Validation(format!(
            "density matrix not Hermitian (deviation {herm:.2e})"
        )));
    }
    let trace: Complex64 = rho.diagonal().iter().sum();
    if (trace.re - 1.0).abs() > 1e-8 || trace.im.abs() > 1e-10 {
        return Err(Error::Validation(format!("density matrix trace {trace}")));
    }
    let eigs = hermitian_eigenvalues(rho)?;
    if let Some(min) = eigs.iter().cloned().reduce(f64::min) {
        if min < -1e-9 {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min:.2e}"
            )));
        }
    }
    Ok(())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    let herm = gates::max_norm_diff(m, &m.adjoint());
    if herm > 1e-8 {
        return Err(Error::Validation(format!(
            "matrix not Hermitian (deviation {herm:.2e})"
        )));
    }
    // Symmetrise to suppress roundoff before the eigensolver.
    let sym = (m + m.adjoint()) / Complex64::new(2.0, 0.0);
    let eig = sym.symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}

/// Von Neumann entropy in bits; eigenvalues below 1e-12 are treated as zero.
pub fn von_neumann_entropy(rho: &CMat) -> Result<f64> {
    let eigs = hermitian_eigenvalues(rho)?;
    if let Some(min) = eigs.iter().cloned().reduce(f64::min) {
        if min < -1e-10 {
            return Err(Error::Validation(format!(
                "not positive semidefinite: eigenvalue {min:.2e}"
            )));
        }
    }
    let mut s = 0.0;
    for lambda in eigs {
        if lambda > 1e-12 {
            s -= lambda * lambda.log2();
        }
    }
    Ok(s)
}

/// Trace distance (1/2)·||a - b||_1 between density matrices.
pub fn trace_distance(a: &CMat, b: &CMat) -> Result<f64> {
    let eigs = hermitian_eigenvalues(&(a - b))?;
    Ok(eigs.iter().map(|e| e.abs()).sum::<f64>() / 2.0)
}

pub fn fidelity_pure(a: &CVec, b: &CVec) -> f64 {
    a.dotc(b).norm_sqr()
}

/// True iff the pure states agree up to a global phase.
pub fn equal_up_to_global_phase(a: &QuantumState, b: &QuantumState) -> Result<bool> {
    let (va, vb) = (a.amplitudes()?, b.amplitudes()?);
    if va.len() != vb.len() {
        return Err(Error::Dimension("state dimensions differ".into()));
    }
    Ok(fidelity_pure(va, vb) >= 1.0 - 1e-9)
}

/// Haar-random unitary via QR of a complex Ginibre matrix.
pub fn haar_random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(dim, dim, |_, _| {
        Complex64::new(gaussian(rng), gaussian(rng))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / Complex64::new(d.norm(), 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_random_pure<R: Rng + ?Sized>(layout: Layout, rng: &mut R) -> Result<QuantumState> {
    let dim = 1usize << layout.total_qubits();
    let mut v = CVec::from_fn(dim, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    let norm = v.norm();
    v /= Complex64::new(norm, 0.0);
    QuantumState::pure(layout, v)
}

/// Random rank-`rank` density matrix.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> CMat {
    let a = CMat::from_fn(dim, rank, |_, _| {
        Complex64::new(gaussian(rng), gaussian(rng))
    });
    let m = &a * a.adjoint();
    let trace: f64 = m.diagonal().iter().map(|e| e.re).sum();
    m / Complex64::new(trace, 0.0)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; avoids pulling in a distributions crate.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// On-disk fixture for pure states: a layout header plus sparse
/// (index, re, im) amplitude triples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateFixture {
    pub layout: Vec<(String, usize)>,
    pub amplitudes: Vec<(usize, Real, Real)>,
}

impl StateFixture {
    pub fn from_state(state: &QuantumState) -> Result<Self> {
        let v = state.amplitudes()?;
        let layout = state
            .layout
            .0
            .iter()
            .map(|r| (r.name.clone(), r.qubits))
            .collect();
        let amplitudes = v
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > 0.0)
            .map(|(i, a)| (i, Real(a.re), Real(a.im)))
            .collect();
        Ok(Self { layout, amplitudes })
    }

    pub fn to_state(&self) -> Result<QuantumState> {
        let layout = Layout(
            self.layout
                .iter()
                .map(|(name, qubits)| Register {
                    name: name.clone(),
                    qubits: *qubits,
                })
                .collect(),
        );
        let dim = 1usize << layout.total_qubits();
        let mut v = CVec::zeros(dim);
        for &(i, re, im) in &self.amplitudes {
            if i >= dim {
                return Err(Error::Parse(format!("amplitude index {i} out of range")));
            }
            v[i] = Complex64::new(re.0, im.0);
        }
        QuantumState::pure(layout, v)
    }
}
