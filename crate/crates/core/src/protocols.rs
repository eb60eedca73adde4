//! Blind gate protocols: the receive-and-measure protocol, the two
//! prepare-and-send variants, blindness verification, the entropy ledger and
//! the resource-bound experiment.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::clifford::{clifford_from_action, separable_v, stabilizers_of_phi, CliffordTableau};
use crate::error::{Error, Result};
use crate::gates;
use crate::pauli::{CMat, PauliString};
use crate::report::Real;
use crate::sim::{
    fidelity_pure, trace_distance, von_neumann_entropy, Layout, MeasurementBasis, QuantumState,
    Register,
};
use crate::subspaces::{
    adjust_family, decompose_in_b, dual_basis, preserved_subspace, support_basis, BasisB,
    DualBasisQ, GateFamily, PauliSubspace,
};

pub const PHASE_TOL: f64 = 1e-10;
pub const FIDELITY_TOL: f64 = 1e-9;
pub const BLINDNESS_TOL: f64 = 1e-10;
pub const LEDGER_SLACK: f64 = 1e-8;

/// The Clifford taking each basis element `B_i ⊗ I` to `X_i Z_{c_i}`.
#[derive(Clone, Debug)]
pub struct StandardTransform {
    /// Register width max(n, 2n-r).
    pub m: usize,
    pub matrix: CMat,
    /// Verified conjugation pairs (source, image).
    pub action: Vec<(PauliString, PauliString)>,
}

pub fn standard_transformation(b: &BasisB) -> Result<StandardTransform> {
    let n = b.n();
    let k = b.len();
    let m = n.max(k);
    let mut action = Vec::with_capacity(k);
    for (i, (bi, &ci)) in b.paulis().iter().zip(b.c_vectors()).enumerate() {
        let source = bi.embed(m, 0)?;
        let image = PauliString::from_xz(m, 1u64 << i, ci)?;
        action.push((source, image));
    }
    let matrix = if k == 0 {
        gates::identity(1 << m)
    } else {
        clifford_from_action(&action)?
    };
    // Definition check: conjugating any basis product sends |0...0> to the
    // matching computational state.
    for x in 0..(1u64 << k) {
        let bx = b.b_x(x).embed(m, 0)?.dense()?;
        let conj = &matrix * bx * matrix.adjoint();
        let col = conj.column(0);
        let expect = amplitude_index(x, k) << (m - k);
        for (row, e) in col.iter().enumerate() {
            let want = if row == expect { 1.0 } else { 0.0 };
            if (e - Complex64::new(want, 0.0)).norm() > PHASE_TOL {
                return Err(Error::Invariant(
                    "standard transformation fails the basis-state action".into(),
                ));
            }
        }
    }
    Ok(StandardTransform { m, matrix, action })
}

/// Map logical selection bits (bit i selects B_{i+1}) to the amplitude index
/// of |x> with qubit i carrying x_{i+1}.
pub fn amplitude_index(x: u64, k: usize) -> usize {
    let mut idx = 0usize;
    for i in 0..k {
        if (x >> i) & 1 == 1 {
            idx |= 1 << (k - 1 - i);
        }
    }
    idx
}

/// The coefficient state of a family member over the agreed basis.
#[derive(Clone, Debug)]
pub struct PhiState {
    pub coefficients: Vec<Complex64>,
    pub conjugated: bool,
}

impl PhiState {
    /// Amplitude vector over the sent register (qubit i carries x_{i+1}).
    pub fn vector(&self) -> nalgebra::DVector<Complex64> {
        let k = self.coefficients.len().trailing_zeros() as usize;
        let mut v = nalgebra::DVector::zeros(self.coefficients.len());
        for (x, &g) in self.coefficients.iter().enumerate() {
            v[amplitude_index(x as u64, k)] = if self.conjugated { g.conj() } else { g };
        }
        v
    }
}

/// Analysis bundle for a gate family: adjusted gates, the preserved subspace,
/// the decomposition basis and its dual, and the standard transformation.
#[derive(Clone, Debug)]
pub struct FamilyAnalysis {
    pub family: GateFamily,
    pub adjustments: Vec<PauliString>,
    pub pf: PauliSubspace,
    pub basis: BasisB,
    pub dual: DualBasisQ,
    pub vst: StandardTransform,
}

impl FamilyAnalysis {
    pub fn analyze(raw: &GateFamily) -> Result<Self> {
        let pf = preserved_subspace(raw)?;
        let (family, adjustments) = adjust_family(raw, &pf)?;
        let basis = support_basis(&pf)?;
        if basis.is_empty() {
            return Err(Error::Unsupported(
                "family needs no quantum communication (basis is empty)".into(),
            ));
        }
        let dual = dual_basis(&basis)?;
        let vst = standard_transformation(&basis)?;
        // Every adjusted member must decompose over the basis.
        for gate in &family.gates {
            for probe in gate.probes() {
                decompose_in_b(probe, &basis)?;
            }
        }
        Ok(Self {
            family,
            adjustments,
            pf,
            basis,
            dual,
            vst,
        })
    }

    pub fn n(&self) -> usize {
        self.family.n
    }

    /// Qubits of communication, dim(B) = 2n - r.
    pub fn qubit_cost(&self) -> usize {
        self.basis.len()
    }

    pub fn gate(&self, d: usize) -> Result<&CMat> {
        self.family
            .gates
            .get(d)
            .ok_or_else(|| Error::Dimension(format!("gate index {d} out of range")))?
            .fixed()
    }

    /// Apply the stored adjustment to a freshly built instance of a
    /// parametrized gate.
    pub fn adjust_concrete(&self, d: usize, raw: &CMat) -> Result<CMat> {
        let y = self
            .adjustments
            .get(d)
            .ok_or_else(|| Error::Dimension(format!("gate index {d} out of range")))?;
        if y.is_identity_up_to_phase() {
            Ok(raw.clone())
        } else {
            Ok(y.dense()? * raw)
        }
    }

    /// Coefficient state of a concrete (adjusted) member.
    pub fn phi_state(&self, u: &CMat, conjugated: bool) -> Result<PhiState> {
        let gamma = decompose_in_b(u, &self.basis)?;
        let phi = PhiState {
            coefficients: gamma,
            conjugated,
        };
        // Cross-check against the standard-transform construction.
        let m = self.vst.m;
        let embedded = if m > self.n() {
            gates::kron(u, &gates::identity(1 << (m - self.n())))
        } else {
            u.clone()
        };
        let w = &self.vst.matrix * embedded * self.vst.matrix.adjoint();
        let col = w.column(0);
        let k = self.qubit_cost();
        let direct = phi.vector();
        for x in 0..(1u64 << k) {
            let idx = amplitude_index(x, k) << (m - k);
            let expect = if phi.conjugated {
                col[idx].conj()
            } else {
                col[idx]
            };
            if (direct[amplitude_index(x, k)] - expect).norm() > PHASE_TOL {
                return Err(Error::Invariant(
                    "coefficient state disagrees with the transform construction".into(),
                ));
            }
        }
        Ok(phi)
    }

    /// Alice's measurement basis for gate `u`: columns `V |phi*_(B_x u)>`
    /// indexed by the logical selection bits x.
    pub fn rm_measurement_basis(&self, u: &CMat, v: &CMat) -> Result<MeasurementBasis> {
        let k = self.qubit_cost();
        let dim = 1usize << k;
        let mut mat = CMat::zeros(dim, dim);
        for z in 0..(1u64 << k) {
            let shifted = self.basis.b_x(z).dense()? * u;
            let phi = self.phi_state(&shifted, true)?;
            let col = v * phi.vector();
            mat.set_column(z as usize, &col);
        }
        MeasurementBasis::new(k, mat)
    }

    /// The separable rotation for a two-gate Clifford family: the inverse of
    /// the stabilizer-aligning V, to be applied by Bob inside the circuit.
    pub fn separable_protocol_v(&self) -> Result<CMat> {
        if self.family.gates.len() != 2 {
            return Err(Error::Unsupported(
                "separable construction needs a two-gate family".into(),
            ));
        }
        if self.vst.m != self.qubit_cost() {
            return Err(Error::Unsupported(
                "separable construction needs r <= n".into(),
            ));
        }
        let u = self.gate(1)?;
        let g = stabilizers_of_phi(&gates::identity(1 << self.n()), &self.basis, &self.vst.matrix)?;
        let h = stabilizers_of_phi(u, &self.basis, &self.vst.matrix)?;
        let v = separable_v(&g, &h)?;
        Ok(v.to_dense()?.adjoint())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolMode {
    Rm,
    PsTwoRound,
    PsSingleRound,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalMessage {
    /// Measurement outcome bits reported by Bob.
    Outcome { bits: u64 },
    /// Dense correction unitary sent by Alice.
    Correction { matrix: Vec<Vec<[Real; 2]>> },
}

#[derive(Clone, Debug, Serialize)]
pub struct Round {
    pub from: &'static str,
    pub qubits_sent: usize,
    pub classical_messages: Vec<ClassicalMessage>,
    pub measurement_outcome: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LedgerRow {
    pub round: usize,
    pub s_before: Real,
    pub expected_qubits_sent: Real,
    pub s_after: Real,
    /// `s_before + E(N) - s_after`; nonnegative up to tolerance.
    pub slack: Real,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolTranscript {
    pub mode: ProtocolMode,
    pub alice_choice: Option<usize>,
    pub rounds: Vec<Round>,
    pub total_qubits_sent: usize,
    pub outcome: Option<u64>,
    pub outcome_probability: Option<Real>,
    pub final_padding: Option<String>,
    pub padding_index: Option<u64>,
    pub fidelity_to_target: Option<Real>,
    pub entropy_ledger: Vec<LedgerRow>,
}

impl ProtocolTranscript {
    /// Total qubits Alice sent to Bob after the start of the protocol; the
    /// receive-and-measure mode must keep this at zero.
    pub fn alice_to_bob_traffic(&self) -> usize {
        self.rounds
            .iter()
            .filter(|r| r.from == "alice")
            .map(|r| r.qubits_sent + r.classical_messages.len())
            .sum()
    }
}

fn matrix_to_rows(m: &CMat) -> Vec<Vec<[Real; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [Real(m[(i, j)].re), Real(m[(i, j)].im)])
                .collect()
        })
        .collect()
}

pub struct RmRun {
    pub transcript: ProtocolTranscript,
    pub bob_state: QuantumState,
    pub outcome: u64,
    pub probability: f64,
    pub padding: PauliString,
}

/// Build the circuit state of the receive-and-measure protocol: the sent
/// register in |+...+>, one controlled basis element per sent qubit, then V.
fn rm_circuit_state(fa: &FamilyAnalysis, v: &CMat, psi: &QuantumState) -> Result<QuantumState> {
    let n = fa.n();
    let k = fa.qubit_cost();
    let psi_range = psi.layout().qubit_range("psi")?;
    if psi_range.len() != n {
        return Err(Error::Dimension(format!(
            "psi register has {} qubits, family needs {n}",
            psi_range.len()
        )));
    }
    let alice = QuantumState::plus(Layout::single("alice", k))?;
    let mut state = alice.tensor(psi)?;
    let targets: Vec<usize> = psi_range.map(|q| q + k).collect();
    for (i, b) in fa.basis.paulis().iter().enumerate() {
        state = state.apply_controlled_pauli(i, b, &targets)?;
    }
    let alice_targets: Vec<usize> = (0..k).collect();
    state.apply_unitary(&alice_targets, v)
}

/// Run the receive-and-measure protocol for gate choice `d` realised by the
/// concrete adjusted unitary `gate`.
pub fn run_rm<R: Rng + ?Sized>(
    fa: &FamilyAnalysis,
    d: usize,
    gate: &CMat,
    v: &CMat,
    psi: &QuantumState,
    rng: &mut R,
    forced: Option<u64>,
) -> Result<RmRun> {
    let k = fa.qubit_cost();
    let state = rm_circuit_state(fa, v, psi)?;
    let basis = fa.rm_measurement_basis(gate, v)?;
    let (z, bob_state, p) = state.measure_first_register(
        &basis,
        rng,
        forced.map(|f| f as usize),
    )?;
    let uniform = 1.0 / (1u64 << k) as f64;
    if (p - uniform).abs() > 1e-9 {
        return Err(Error::Invariant(format!(
            "outcome probability {p} deviates from uniform {uniform}"
        )));
    }
    let z = z as u64;
    let padding = fa.basis.b_x(z);
    let fidelity = if psi.is_pure() {
        let target = target_state(fa, &(padding.dense()? * gate), psi)?;
        Some(Real(fidelity_pure(
            target.amplitudes()?,
            bob_state.amplitudes()?,
        )))
    } else {
        None
    };
    let transcript = ProtocolTranscript {
        mode: ProtocolMode::Rm,
        alice_choice: Some(d),
        rounds: vec![Round {
            from: "bob",
            qubits_sent: k,
            classical_messages: vec![],
            measurement_outcome: Some(z),
        }],
        total_qubits_sent: k,
        outcome: Some(z),
        outcome_probability: Some(Real(p)),
        final_padding: Some(padding.to_string()),
        padding_index: Some(z),
        fidelity_to_target: fidelity,
        entropy_ledger: vec![],
    };
    Ok(RmRun {
        transcript,
        bob_state,
        outcome: z,
        probability: p,
        padding,
    })
}

/// Apply an n-qubit operator to the psi register of a (possibly larger) state.
fn target_state(fa: &FamilyAnalysis, op: &CMat, psi: &QuantumState) -> Result<QuantumState> {
    let range = psi.layout().qubit_range("psi")?;
    let targets: Vec<usize> = range.collect();
    let _ = fa;
    psi.apply_unitary(&targets, op)
}

#[derive(Clone, Debug, Serialize)]
pub struct RmBlindnessRow {
    pub psi: String,
    pub max_pairwise_distance: Real,
    pub distance_to_twirl: Real,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RmBlindnessReport {
    pub rows: Vec<RmBlindnessRow>,
    pub pass: bool,
}

/// Bob's post-protocol mixture for one gate: the outcome-weighted average of
/// his conditional states.
fn rm_bob_mixture(
    fa: &FamilyAnalysis,
    gate: &CMat,
    v: &CMat,
    psi: &QuantumState,
) -> Result<CMat> {
    let state = rm_circuit_state(fa, v, psi)?;
    let basis = fa.rm_measurement_basis(gate, v)?;
    let branches = state.branch_first_register(&basis)?;
    let dim = 1usize << (state.total_qubits() - fa.qubit_cost());
    let mut avg = CMat::zeros(dim, dim);
    for (p, s) in branches {
        avg += s.density_matrix().map(|e| e * p);
    }
    Ok(avg)
}

/// The basis twirl of the input state on the psi register.
fn basis_twirl(fa: &FamilyAnalysis, psi: &QuantumState) -> Result<CMat> {
    let k = fa.qubit_cost();
    let range = psi.layout().qubit_range("psi")?;
    let targets: Vec<usize> = range.collect();
    let dim = psi.dim();
    let mut avg = CMat::zeros(dim, dim);
    let w = 1.0 / (1u64 << k) as f64;
    for x in 0..(1u64 << k) {
        let bx = fa.basis.b_x(x).dense()?;
        let padded = psi.apply_unitary(&targets, &bx)?;
        avg += padded.density_matrix().map(|e| e * w);
    }
    Ok(avg)
}

/// Verify that Bob's mixture is identical across gate choices and equal to
/// the basis twirl of his input.
pub fn verify_blindness_rm(
    fa: &FamilyAnalysis,
    gates_concrete: &[CMat],
    v: &CMat,
    psis: &[(String, QuantumState)],
) -> Result<RmBlindnessReport> {
    let mut rows = Vec::new();
    for (label, psi) in psis {
        let mixtures: Vec<CMat> = gates_concrete
            .iter()
            .map(|g| rm_bob_mixture(fa, g, v, psi))
            .collect::<Result<_>>()?;
        let mut max_pair = 0.0f64;
        for i in 0..mixtures.len() {
            for j in (i + 1)..mixtures.len() {
                max_pair = max_pair.max(trace_distance(&mixtures[i], &mixtures[j])?);
            }
        }
        let twirl = basis_twirl(fa, psi)?;
        let mut twirl_dist = 0.0f64;
        for m in &mixtures {
            twirl_dist = twirl_dist.max(trace_distance(m, &twirl)?);
        }
        rows.push(RmBlindnessRow {
            psi: label.clone(),
            max_pairwise_distance: Real(max_pair),
            distance_to_twirl: Real(twirl_dist),
            pass: max_pair <= BLINDNESS_TOL && twirl_dist <= BLINDNESS_TOL,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(RmBlindnessReport { rows, pass })
}

pub struct PsRun {
    pub transcript: ProtocolTranscript,
    pub bob_state: QuantumState,
    pub pad_x: u64,
    pub outcome_y: u64,
    pub decoy: CMat,
    pub correction: CMat,
}

/// Bob's half of the prepare-and-send circuit: entangle the received register
/// with his state, rotate to the dual readout and measure.
fn ps_bob_measurement<R: Rng + ?Sized>(
    fa: &FamilyAnalysis,
    phi_vector: nalgebra::DVector<Complex64>,
    psi: &QuantumState,
    rng: &mut R,
    forced_y: Option<u64>,
) -> Result<(u64, QuantumState, f64)> {
    let k = fa.qubit_cost();
    let sent = QuantumState::pure(Layout::single("phi", k), phi_vector)?;
    let mut state = sent.tensor(psi)?;
    let psi_range = state.layout().qubit_range("psi")?;
    let targets: Vec<usize> = psi_range.collect();
    for (i, b) in fa.basis.paulis().iter().enumerate() {
        state = state.apply_controlled_pauli(i, b, &targets)?;
    }
    // Hadamard on every sent qubit then a computational readout is the
    // X-basis measurement.
    let basis = MeasurementBasis::pauli_product(&vec!['X'; k])?;
    let forced_idx = forced_y.map(|y| amplitude_index(y, k));
    let (o, collapsed, p) = state.measure_first_register(&basis, rng, forced_idx)?;
    let y = logical_bits(o as u64, k);
    Ok((y, collapsed, p))
}

/// Inverse of [`amplitude_index`].
fn logical_bits(idx: u64, k: usize) -> u64 {
    let mut y = 0u64;
    for i in 0..k {
        if (idx >> (k - 1 - i)) & 1 == 1 {
            y |= 1 << i;
        }
    }
    y
}

/// Two-round prepare-and-send protocol for the target gate `target`
/// (a concrete adjusted family member).
pub fn run_ps_two_round<R: Rng + ?Sized>(
    fa: &FamilyAnalysis,
    d: usize,
    target: &CMat,
    psi: &QuantumState,
    rng: &mut R,
    adversarial_y: Option<u64>,
) -> Result<PsRun> {
    let k = fa.qubit_cost();
    let mask = (1u64 << k) - 1;
    // Alice samples the decoy U = B_a Q_b target Q_b^dagger.
    let a = rng.gen::<u64>() & mask;
    let b = rng.gen::<u64>() & mask;
    let qb = fa.dual.q_y(b).dense()?;
    let decoy = fa.basis.b_x(a).dense()? * &qb * target * qb.adjoint();
    let phi = fa.phi_state(&decoy, false)?;
    let (y, after_measure, _p) = ps_bob_measurement(fa, phi.vector(), psi, rng, adversarial_y)?;
    // Alice samples the output pad and sends the correction
    // Lambda = B_x target Q_y^dagger U^dagger Q_y.
    let x = rng.gen::<u64>() & mask;
    let qy = fa.dual.q_y(y).dense()?;
    let correction = fa.basis.b_x(x).dense()? * target * qy.adjoint() * decoy.adjoint() * &qy;
    if !gates::is_unitary(&correction, 1e-9) {
        return Err(Error::Invariant(
            "correction is not unitary; extension closure violated".into(),
        ));
    }
    let psi_targets: Vec<usize> = after_measure.layout().qubit_range("psi")?.collect();
    let bob_state = after_measure.apply_unitary(&psi_targets, &correction)?;
    let fidelity = if psi.is_pure() {
        let padded = fa.basis.b_x(x).dense()? * target;
        let want = target_state(fa, &padded, psi)?;
        Some(Real(fidelity_pure(
            want.amplitudes()?,
            bob_state.amplitudes()?,
        )))
    } else {
        None
    };
    let transcript = ProtocolTranscript {
        mode: ProtocolMode::PsTwoRound,
        alice_choice: Some(d),
        rounds: vec![
            Round {
                from: "alice",
                qubits_sent: k,
                classical_messages: vec![],
                measurement_outcome: None,
            },
            Round {
                from: "bob",
                qubits_sent: 0,
                classical_messages: vec![ClassicalMessage::Outcome { bits: y }],
                measurement_outcome: Some(y),
            },
            Round {
                from: "alice",
                qubits_sent: 0,
                classical_messages: vec![ClassicalMessage::Correction {
                    matrix: matrix_to_rows(&correction),
                }],
                measurement_outcome: None,
            },
        ],
        total_qubits_sent: k,
        outcome: Some(y),
        outcome_probability: None,
        final_padding: Some(fa.basis.b_x(x).to_string()),
        padding_index: Some(x),
        fidelity_to_target: fidelity,
        entropy_ledger: vec![],
    };
    Ok(PsRun {
        transcript,
        bob_state,
        pad_x: x,
        outcome_y: y,
        decoy,
        correction,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PsBlindnessRow {
    pub target: usize,
    pub forced_y: u64,
    pub gram_deviation: Real,
    pub mixture_deviation: Real,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PsBlindnessReport {
    pub rows: Vec<PsBlindnessRow>,
    /// Largest distance between the x-averaged sent states of two targets.
    pub cross_target_deviation: Real,
    pub pass: bool,
}

/// For each target and forced report y, reconstruct Bob's hypothesis family
/// `U(x) = Q_y^dagger Lambda^dagger B_x target Q_y` and check that the sent
/// states are an orthonormal basis averaging to the maximally mixed state.
pub fn verify_blindness_ps<R: Rng + ?Sized>(
    fa: &FamilyAnalysis,
    targets: &[usize],
    adversarial_ys: &[u64],
    rng: &mut R,
) -> Result<PsBlindnessReport> {
    let k = fa.qubit_cost();
    let dim = 1usize << k;
    let mask = (1u64 << k) - 1;
    let mut rows = Vec::new();
    let mut mixtures = Vec::new();
    for &d in targets {
        let target = fa.gate(d)?.clone();
        for &y in adversarial_ys {
            let y = y & mask;
            // A concrete correction as Alice would send for some sampled
            // (a, b, x*).
            let a = rng.gen::<u64>() & mask;
            let b = rng.gen::<u64>() & mask;
            let xstar = rng.gen::<u64>() & mask;
            let qb = fa.dual.q_y(b).dense()?;
            let decoy = fa.basis.b_x(a).dense()? * &qb * &target * qb.adjoint();
            let qy = fa.dual.q_y(y).dense()?;
            let correction =
                fa.basis.b_x(xstar).dense()? * &target * qy.adjoint() * decoy.adjoint() * &qy;
            let mut vectors = Vec::with_capacity(dim);
            for x in 0..(1u64 << k) {
                let u_x = qy.adjoint()
                    * correction.adjoint()
                    * fa.basis.b_x(x).dense()?
                    * &target
                    * &qy;
                vectors.push(fa.phi_state(&u_x, false)?.vector());
            }
            let mut gram_dev = 0.0f64;
            for (i, vi) in vectors.iter().enumerate() {
                for (j, vj) in vectors.iter().enumerate() {
                    let g = vi.dotc(vj);
                    let want = if i == j { 1.0 } else { 0.0 };
                    gram_dev = gram_dev.max((g - Complex64::new(want, 0.0)).norm());
                }
            }
            let mut mix = CMat::zeros(dim, dim);
            for v in &vectors {
                mix += (v * v.adjoint()).map(|e| e / dim as f64);
            }
            let max_mixed = CMat::identity(dim, dim).map(|e| e / dim as f64);
            let mix_dev = gates::max_norm_diff(&mix, &max_mixed);
            rows.push(PsBlindnessRow {
                target: d,
                forced_y: y,
                gram_deviation: Real(gram_dev),
                mixture_deviation: Real(mix_dev),
                pass: gram_dev <= BLINDNESS_TOL && mix_dev <= BLINDNESS_TOL,
            });
            mixtures.push(mix);
        }
    }
    let mut cross = 0.0f64;
    for i in 0..mixtures.len() {
        for j in (i + 1)..mixtures.len() {
            cross = cross.max(trace_distance(&mixtures[i], &mixtures[j])?);
        }
    }
    let pass = rows.iter().all(|r| r.pass) && cross <= BLINDNESS_TOL;
    Ok(PsBlindnessReport {
        rows,
        cross_target_deviation: Real(cross),
        pass,
    })
}

/// Single-round prepare-and-send for Clifford families: Alice sends the
/// basis state of `B_x target`; Bob measures and both derive the Pauli pad.
pub fn run_ps_single_round<R: Rng + ?Sized>(
    fa: &FamilyAnalysis,
    d: usize,
    target: &CMat,
    psi: &QuantumState,
    rng: &mut R,
    forced_y: Option<u64>,
) -> Result<PsRun> {
    let k = fa.qubit_cost();
    let mask = (1u64 << k) - 1;
    let tableau = CliffordTableau::from_dense(target)
        .map_err(|_| Error::Unsupported("single-round mode needs a Clifford target".into()))?;
    let x = rng.gen::<u64>() & mask;
    let padded = fa.basis.b_x(x).dense()? * target;
    let phi = fa.phi_state(&padded, false)?;
    let (y, after_measure, _p) = ps_bob_measurement(fa, phi.vector(), psi, rng, forced_y)?;
    // Resulting state is Q_y B_x target Q_y^dagger |psi> = P_z target |psi>.
    let qy = fa.dual.q_y(y);
    let conj = tableau.conjugate_pauli(&qy)?;
    let padding = qy.multiply(&fa.basis.b_x(x))?.multiply(&conj.adjoint())?;
    let bob_state = after_measure;
    let fidelity = if psi.is_pure() {
        let want = target_state(fa, &(padding.dense()? * target), psi)?;
        Some(Real(fidelity_pure(
            want.amplitudes()?,
            bob_state.amplitudes()?,
        )))
    } else {
        None
    };
    let transcript = ProtocolTranscript {
        mode: ProtocolMode::PsSingleRound,
        alice_choice: Some(d),
        rounds: vec![
            Round {
                from: "alice",
                qubits_sent: k,
                classical_messages: vec![],
                measurement_outcome: None,
            },
            Round {
                from: "bob",
                qubits_sent: 0,
                classical_messages: vec![ClassicalMessage::Outcome { bits: y }],
                measurement_outcome: Some(y),
            },
        ],
        total_qubits_sent: k,
        outcome: Some(y),
        outcome_probability: None,
        final_padding: Some(padding.to_string()),
        padding_index: Some(x),
        fidelity_to_target: fidelity,
        entropy_ledger: vec![],
    };
    Ok(PsRun {
        transcript,
        bob_state,
        pad_x: x,
        outcome_y: y,
        decoy: padded,
        correction: gates::identity(1 << fa.n()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LedgerReport {
    pub rows: Vec<LedgerRow>,
    pub cumulative_bound_holds: bool,
    pub final_entropy: Real,
    pub pass: bool,
}

fn ledger_row(round: usize, s_before: f64, qubits: f64, s_after: f64) -> LedgerRow {
    LedgerRow {
        round,
        s_before: Real(s_before),
        expected_qubits_sent: Real(qubits),
        s_after: Real(s_after),
        slack: Real(s_before + qubits - s_after),
    }
}

fn finish_ledger(rows: Vec<LedgerRow>, s0: f64, total_qubits: f64) -> LedgerReport {
    let final_entropy = rows.last().map(|r| r.s_after.0).unwrap_or(s0);
    let per_round = rows.iter().all(|r| r.slack.0 >= -LEDGER_SLACK);
    let cumulative = s0 + total_qubits - final_entropy >= -LEDGER_SLACK;
    LedgerReport {
        rows,
        cumulative_bound_holds: cumulative,
        final_entropy: Real(final_entropy),
        pass: per_round && cumulative,
    }
}

/// Entropy ledger of the receive-and-measure protocol from Bob's perspective,
/// averaging over every Alice outcome.
pub fn entropy_ledger_rm(
    fa: &FamilyAnalysis,
    gate: &CMat,
    v: &CMat,
    psi: &QuantumState,
) -> Result<LedgerReport> {
    let k = fa.qubit_cost() as f64;
    let s0 = von_neumann_entropy(&psi.density_matrix())?;
    let mixture = rm_bob_mixture(fa, gate, v, psi)?;
    let s1 = von_neumann_entropy(&mixture)?;
    let rows = vec![
        ledger_row(1, s0, k, s1),
        // Alice's measurement round sends Bob nothing and he learns nothing.
        ledger_row(2, s1, 0.0, s1),
    ];
    Ok(finish_ledger(rows, s0, k))
}

/// Entropy ledger of the two-round prepare-and-send protocol with full
/// enumeration of Alice's private randomness and Bob's outcomes.
pub fn entropy_ledger_ps2(
    fa: &FamilyAnalysis,
    target: &CMat,
    psi: &QuantumState,
) -> Result<LedgerReport> {
    let k = fa.qubit_cost();
    if k > 3 {
        return Err(Error::Resource(format!(
            "ledger enumeration refused for {k} sent qubits"
        )));
    }
    let count = 1usize << k;
    let psi_rho = psi.density_matrix();
    let s0 = von_neumann_entropy(&psi_rho)?;
    // Stage 1: Bob receives the coefficient state of an unknown decoy.
    let mut sent_mix = CMat::zeros(count, count);
    let mut decoys = Vec::new();
    for a in 0..(count as u64) {
        for b in 0..(count as u64) {
            let qb = fa.dual.q_y(b).dense()?;
            let decoy = fa.basis.b_x(a).dense()? * &qb * target * qb.adjoint();
            let v = fa.phi_state(&decoy, false)?.vector();
            sent_mix += (&v * v.adjoint()).map(|e| e / (count * count) as f64);
            decoys.push((a, b, decoy));
        }
    }
    let s1 = von_neumann_entropy(&sent_mix)? + s0;
    // Stage 2: Bob measures y; outcomes are uniform and independent of the
    // decoy choice.
    let n_dim = 1usize << fa.n();
    let mut s2 = 0.0;
    for y in 0..(count as u64) {
        let qy = fa.dual.q_y(y).dense()?;
        let mut rho_y = CMat::zeros(n_dim, n_dim);
        for (_, _, decoy) in &decoys {
            let eff = &qy * decoy * qy.adjoint();
            rho_y += (&eff * &psi_rho * eff.adjoint()).map(|e| e / decoys.len() as f64);
        }
        s2 += von_neumann_entropy(&rho_y)? / count as f64;
    }
    // Stage 3: Alice's classical correction refines Bob's description; after
    // applying it he holds B_x target |psi> for the unknown x.
    let mut s3 = 0.0;
    let mut total_weight = 0.0;
    for y in 0..count as u64 {
        let qy = fa.dual.q_y(y).dense()?;
        let mut classes: Vec<(String, CMat, f64)> = Vec::new();
        for (_, _, decoy) in &decoys {
            for x in 0..(count as u64) {
                let correction =
                    fa.basis.b_x(x).dense()? * target * qy.adjoint() * decoy.adjoint() * &qy;
                let key = canonical_matrix_key(&correction);
                let final_op = fa.basis.b_x(x).dense()? * target;
                let final_state = &final_op * &psi_rho * final_op.adjoint();
                let w = 1.0 / (count as f64 * decoys.len() as f64 * count as f64);
                if let Some(entry) = classes.iter_mut().find(|(k2, _, _)| *k2 == key) {
                    entry.1 += final_state.map(|e| e * w);
                    entry.2 += w;
                } else {
                    classes.push((key, final_state.map(|e| e * w), w));
                }
            }
        }
        for (_, acc, w) in classes {
            let rho = acc.map(|e| e / w);
            s3 += w * von_neumann_entropy(&rho)?;
            total_weight += w;
        }
    }
    if (total_weight - 1.0).abs() > 1e-9 {
        return Err(Error::Invariant(format!(
            "ledger branch weights sum to {total_weight}"
        )));
    }
    let rows = vec![
        ledger_row(1, s0, k as f64, s1),
        ledger_row(2, s1, 0.0, s2),
        ledger_row(3, s2, 0.0, s3),
    ];
    Ok(finish_ledger(rows, s0, k as f64))
}

/// Entropy ledger of the single-round Clifford prepare-and-send protocol.
pub fn entropy_ledger_ps1(
    fa: &FamilyAnalysis,
    target: &CMat,
    psi: &QuantumState,
) -> Result<LedgerReport> {
    let k = fa.qubit_cost();
    let count = 1usize << k;
    let psi_rho = psi.density_matrix();
    let s0 = von_neumann_entropy(&psi_rho)?;
    // Stage 1: the sent states over the unknown pad average to the
    // maximally mixed register.
    let mut sent_mix = CMat::zeros(count, count);
    for x in 0..(count as u64) {
        let padded = fa.basis.b_x(x).dense()? * target;
        let v = fa.phi_state(&padded, false)?.vector();
        sent_mix += (&v * v.adjoint()).map(|e| e / count as f64);
    }
    let s1 = von_neumann_entropy(&sent_mix)? + s0;
    // Stage 2: Bob measures y and keeps the x-mixture of padded outputs.
    let n_dim = 1usize << fa.n();
    let mut s2 = 0.0;
    for y in 0..(count as u64) {
        let qy = fa.dual.q_y(y).dense()?;
        let mut rho_y = CMat::zeros(n_dim, n_dim);
        for x in 0..(count as u64) {
            let padded = fa.basis.b_x(x).dense()? * target;
            let eff = &qy * padded * qy.adjoint();
            rho_y += (&eff * &psi_rho * eff.adjoint()).map(|e| e / count as f64);
        }
        s2 += von_neumann_entropy(&rho_y)? / count as f64;
    }
    let rows = vec![
        ledger_row(1, s0, k as f64, s1),
        ledger_row(2, s1, 0.0, s2),
    ];
    Ok(finish_ledger(rows, s0, k as f64))
}

/// Deterministic key identifying a unitary up to global phase.
fn canonical_matrix_key(m: &CMat) -> String {
    let mut best = 0usize;
    let mut best_norm = 0.0;
    for (i, e) in m.iter().enumerate() {
        if e.norm() > best_norm + 1e-6 {
            best_norm = e.norm();
            best = i;
        }
    }
    let pivot = m.iter().nth(best).copied().unwrap();
    let phase = pivot / Complex64::new(pivot.norm(), 0.0);
    let fixed = m.map(|e| e / phase);
    let mut key = String::new();
    for e in fixed.iter() {
        key.push_str(&format!("{:.9},{:.9};", e.re, e.im));
    }
    key
}

#[derive(Clone, Debug, Serialize)]
pub struct ResourceBoundReport {
    pub n: usize,
    pub r: usize,
    pub qubit_cost: usize,
    pub witness_entropy: Real,
    pub final_entropy: Real,
    pub max_deviation_from_maximally_mixed: Real,
    pub implied_bound: usize,
    pub bound_equals_cost: bool,
    pub pass: bool,
}

/// Build the correlated witness state `(1/2^{2n}) prod_i (I + P_i' ⊗ P_i')`
/// over the extension of the preserved subspace to a full row basis.
pub fn witness_state(pf: &PauliSubspace) -> Result<(QuantumState, f64)> {
    let n = pf.n();
    let full = pf.generators().extend_to_full_basis()?;
    let dim = 1usize << (2 * n);
    let mut rho = CMat::identity(dim, dim);
    for i in pf.rank()..(2 * n) {
        let p = PauliString::from_row(n, full.row(i))?;
        let pp = p.tensor(&p)?.dense()?;
        let id = CMat::identity(dim, dim);
        rho *= id + pp;
    }
    rho /= Complex64::new(dim as f64, 0.0);
    let layout = Layout(vec![
        Register {
            name: "psi".into(),
            qubits: n,
        },
        Register {
            name: "ref".into(),
            qubits: n,
        },
    ]);
    let entropy = von_neumann_entropy(&rho)?;
    Ok((QuantumState::mixed(layout, rho)?, entropy))
}

/// Resource-bound experiment: start from the correlated witness state, run
/// the protocol with the identity choice, and verify that Bob's averaged
/// state is maximally mixed with entropy 2n, matching the qubit cost 2n - r.
pub fn resource_bound_experiment(fa: &FamilyAnalysis) -> Result<ResourceBoundReport> {
    let n = fa.n();
    let r = fa.pf.rank();
    let k = fa.qubit_cost();
    let (state, s_rho) = witness_state(&fa.pf)?;
    let v = gates::identity(1 << k);
    let gate = gates::identity(1 << n);
    let circuit = rm_circuit_state(fa, &v, &state)?;
    let basis = fa.rm_measurement_basis(&gate, &v)?;
    let branches = circuit.branch_first_register(&basis)?;
    let dim = 1usize << (2 * n);
    let mut avg = CMat::zeros(dim, dim);
    for (z, (p, cond)) in branches.iter().enumerate() {
        // Sanity: each conditional state is the padded witness state.
        let bz = fa.basis.b_x(z as u64).dense()?;
        let bz_full = gates::kron(&bz, &gates::identity(1 << n));
        let expect = &bz_full * state.density_matrix() * bz_full.adjoint();
        if gates::max_norm_diff(&cond.density_matrix(), &expect) > 1e-8 {
            return Err(Error::Invariant(
                "conditional state deviates from the padded witness".into(),
            ));
        }
        avg += cond.density_matrix().map(|e| e * p);
    }
    let max_mixed = CMat::identity(dim, dim).map(|e| e / dim as f64);
    let deviation = gates::max_norm_diff(&avg, &max_mixed);
    let final_entropy = von_neumann_entropy(&avg)?;
    let pass = (s_rho - r as f64).abs() <= 1e-8
        && deviation <= BLINDNESS_TOL
        && (final_entropy - (2 * n) as f64).abs() <= 1e-8
        && 2 * n - r == k;
    Ok(ResourceBoundReport {
        n,
        r,
        qubit_cost: k,
        witness_entropy: Real(s_rho),
        final_entropy: Real(final_entropy),
        max_deviation_from_maximally_mixed: Real(deviation),
        implied_bound: 2 * n - r,
        bound_equals_cost: 2 * n - r == k,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{cx, cz, hadamard, identity, rz, s_gate};
    use crate::subspaces::FamilyGate;
    use crate::sim::{equal_up_to_global_phase, haar_random_pure};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn analyze(u: CMat, n: usize) -> FamilyAnalysis {
        FamilyAnalysis::analyze(&GateFamily::pair(n, u).unwrap()).unwrap()
    }

    fn psi_random(n: usize, seed: u64) -> QuantumState {
        haar_random_pure(Layout::single("psi", n), &mut rng(seed)).unwrap()
    }

    #[test]
    fn standard_transform_for_xz_basis_matches_example() {
        // B = <X, Z> has images X_1 and Z_1 X_2.
        let pf = PauliSubspace::new(1, vec![]).unwrap();
        let b = support_basis(&pf).unwrap();
        let vst = standard_transformation(&b).unwrap();
        assert_eq!(vst.m, 2);
        let x1 = "XI".parse::<PauliString>().unwrap();
        let z1x2 = "ZX".parse::<PauliString>().unwrap();
        let got_x = &vst.matrix
            * "X".parse::<PauliString>().unwrap().embed(2, 0).unwrap().dense().unwrap()
            * vst.matrix.adjoint();
        assert!(gates::max_norm_diff(&got_x, &x1.dense().unwrap()) < 1e-10);
        let got_z = &vst.matrix
            * "Z".parse::<PauliString>().unwrap().embed(2, 0).unwrap().dense().unwrap()
            * vst.matrix.adjoint();
        assert!(gates::max_norm_diff(&got_z, &z1x2.dense().unwrap()) < 1e-10);
    }

    #[test]
    fn standard_transform_for_single_y() {
        let pf = PauliSubspace::new(1, vec!["Y".parse::<PauliString>().unwrap().row()]).unwrap();
        let b = support_basis(&pf).unwrap();
        let vst = standard_transformation(&b).unwrap();
        let got = &vst.matrix * "Y".parse::<PauliString>().unwrap().dense().unwrap()
            * vst.matrix.adjoint();
        assert!(gates::max_norm_diff(&got, &gates::pauli_x()) < 1e-10);
    }

    #[test]
    fn phi_states_match_worked_examples() {
        let fa = analyze(cz(), 2);
        let phi_i = fa.phi_state(&identity(4), false).unwrap().vector();
        assert!((phi_i[0] - Complex64::new(1.0, 0.0)).norm() < 1e-10);

        let phi_cz = fa.phi_state(&cz(), false).unwrap().vector();
        for (idx, want) in [(0, 0.5), (1, 0.5), (2, 0.5), (3, -0.5)] {
            assert!((phi_cz[idx] - Complex64::new(want, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn rz_phi_state_matches_example() {
        let theta = 1.234f64;
        let fam = GateFamily::pair(1, rz(theta)).unwrap();
        let fa = FamilyAnalysis::analyze(&fam).unwrap();
        let phi = fa.phi_state(&rz(theta), true).unwrap().vector();
        // cos(t/2)|0> + i sin(t/2)|1> up to a global phase.
        let expect = nalgebra::DVector::from_vec(vec![
            Complex64::new((theta / 2.0).cos(), 0.0),
            Complex64::new(0.0, (theta / 2.0).sin()),
        ]);
        let overlap = expect.dotc(&phi).norm();
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rm_run_correctness_cnot() {
        let fa = analyze(cx(), 2);
        let psi = psi_random(2, 42);
        let v = identity(4);
        let mut r = rng(7);
        for d in [0usize, 1] {
            let gate = fa.gate(d).unwrap().clone();
            for _ in 0..5 {
                let run = run_rm(&fa, d, &gate, &v, &psi, &mut r, None).unwrap();
                assert!((run.probability - 0.25).abs() < 1e-10);
                assert!(run.transcript.fidelity_to_target.unwrap().0 >= 1.0 - FIDELITY_TOL);
                let target = target_state(
                    &fa,
                    &(run.padding.dense().unwrap() * &gate),
                    &psi,
                )
                .unwrap();
                assert!(equal_up_to_global_phase(&target, &run.bob_state).unwrap());
            }
        }
    }

    #[test]
    fn rm_identity_branch_is_exact() {
        let fa = analyze(cx(), 2);
        let psi = psi_random(2, 1);
        let v = identity(4);
        let run = run_rm(&fa, 0, &identity(4), &v, &psi, &mut rng(3), Some(0)).unwrap();
        assert!(equal_up_to_global_phase(&psi, &run.bob_state).unwrap());
    }

    #[test]
    fn rm_outcomes_are_uniform_for_all_gates() {
        let fa = analyze(hadamard(), 1);
        let psi = psi_random(1, 5);
        let v = identity(2);
        for d in [0usize, 1] {
            let gate = fa.gate(d).unwrap().clone();
            let state = rm_circuit_state(&fa, &v, &psi).unwrap();
            let basis = fa.rm_measurement_basis(&gate, &v).unwrap();
            let branches = state.branch_first_register(&basis).unwrap();
            for (p, _) in branches {
                assert!((p - 0.5).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rm_run_rz_family() {
        let probes: Vec<(f64, CMat)> = (1..=8)
            .map(|i| {
                let t = (i as f64) * 0.7;
                (t, rz(t))
            })
            .collect();
        let fam = GateFamily::new(
            1,
            vec![FamilyGate::Fixed(identity(2)), FamilyGate::Parametric(probes)],
        )
        .unwrap();
        let fa = FamilyAnalysis::analyze(&fam).unwrap();
        let theta = std::f64::consts::FRAC_PI_2;
        let gate = fa.adjust_concrete(1, &rz(theta)).unwrap();
        let psi = psi_random(1, 9);
        let v = identity(2);
        for forced in [0u64, 1] {
            let run = run_rm(&fa, 1, &gate, &v, &psi, &mut rng(11), Some(forced)).unwrap();
            // Z^i Rz(theta)|psi>
            let zi = fa.basis.b_x(forced).dense().unwrap();
            let want = target_state(&fa, &(zi * rz(theta)), &psi).unwrap();
            assert!(equal_up_to_global_phase(&want, &run.bob_state).unwrap());
        }
    }

    #[test]
    fn rm_blindness_for_cnot_and_reference_input() {
        let fa = analyze(cx(), 2);
        let gates_c = vec![fa.gate(0).unwrap().clone(), fa.gate(1).unwrap().clone()];
        let v = identity(4);
        let zero = QuantumState::zero(Layout::single("psi", 2)).unwrap();
        let entangled = QuantumState::maximally_entangled("psi", "ref", 2).unwrap();
        let report = verify_blindness_rm(
            &fa,
            &gates_c,
            &v,
            &[("zero".into(), zero), ("entref".into(), entangled)],
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn rm_blindness_is_v_independent() {
        let fa = analyze(cx(), 2);
        let gates_c = vec![fa.gate(0).unwrap().clone(), fa.gate(1).unwrap().clone()];
        let psi = psi_random(2, 13);
        let mut r = rng(17);
        let mut mixtures = Vec::new();
        for _ in 0..10 {
            let v = crate::sim::haar_random_unitary(4, &mut r);
            for g in &gates_c {
                mixtures.push(rm_bob_mixture(&fa, g, &v, &psi).unwrap());
            }
        }
        for i in 0..mixtures.len() {
            for j in (i + 1)..mixtures.len() {
                assert!(trace_distance(&mixtures[i], &mixtures[j]).unwrap() <= BLINDNESS_TOL);
            }
        }
    }

    #[test]
    fn rz_blindness_is_theta_independent() {
        let probes: Vec<(f64, CMat)> = (1..=8).map(|i| (i as f64 * 0.4, rz(i as f64 * 0.4))).collect();
        let fam = GateFamily::new(
            1,
            vec![FamilyGate::Fixed(identity(2)), FamilyGate::Parametric(probes)],
        )
        .unwrap();
        let fa = FamilyAnalysis::analyze(&fam).unwrap();
        let psi = psi_random(1, 19);
        let v = identity(2);
        let mut mixtures = Vec::new();
        for i in 0..16 {
            let theta = i as f64 * std::f64::consts::TAU / 16.0;
            let gate = fa.adjust_concrete(1, &rz(theta)).unwrap();
            mixtures.push(rm_bob_mixture(&fa, &gate, &v, &psi).unwrap());
        }
        // Bob's view equals (|psi><psi| + Z|psi><psi|Z)/2 for every theta.
        let z = gates::pauli_z();
        let rho = psi.density_matrix();
        let expect = (&rho + z.clone() * &rho * z).map(|e| e * 0.5);
        for m in &mixtures {
            assert!(trace_distance(m, &expect).unwrap() <= BLINDNESS_TOL);
        }
        for i in 0..mixtures.len() {
            for j in (i + 1)..mixtures.len() {
                assert!(trace_distance(&mixtures[i], &mixtures[j]).unwrap() <= BLINDNESS_TOL);
            }
        }
    }

    #[test]
    fn ps_two_round_reaches_padded_target() {
        let mut r = rng(23);
        for (u, n) in [(cx(), 2usize), (cz(), 2), (hadamard(), 1)] {
            let fa = analyze(u, n);
            let psi = psi_random(n, 31 + n as u64);
            for d in [0usize, 1] {
                let target = fa.gate(d).unwrap().clone();
                for _ in 0..5 {
                    let run = run_ps_two_round(&fa, d, &target, &psi, &mut r, None).unwrap();
                    assert!(run.transcript.fidelity_to_target.unwrap().0 >= 1.0 - FIDELITY_TOL);
                    // Lambda · (Q_y U Q_y^dag) == B_x target up to phase.
                    let qy = fa.dual.q_y(run.outcome_y).dense().unwrap();
                    let eff = &qy * &run.decoy * qy.adjoint();
                    let lhs = &run.correction * eff;
                    let rhs = fa.basis.b_x(run.pad_x).dense().unwrap() * &target;
                    let dim = (1usize << n) as f64;
                    let overlap = (rhs.adjoint() * &lhs).trace().norm() / dim;
                    assert!((overlap - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn ps_intermediate_state_matches_dual_conjugation() {
        let fa = analyze(cz(), 2);
        let psi = psi_random(2, 41);
        let mut r = rng(43);
        let target = fa.gate(1).unwrap().clone();
        for forced_y in 0..4u64 {
            let a = 2u64;
            let b = 1u64;
            let qb = fa.dual.q_y(b).dense().unwrap();
            let decoy = fa.basis.b_x(a).dense().unwrap() * &qb * &target * qb.adjoint();
            let phi = fa.phi_state(&decoy, false).unwrap();
            let (y, after, _) =
                ps_bob_measurement(&fa, phi.vector(), &psi, &mut r, Some(forced_y)).unwrap();
            assert_eq!(y, forced_y);
            let qy = fa.dual.q_y(y).dense().unwrap();
            let eff = &qy * &decoy * qy.adjoint();
            let want = target_state(&fa, &eff, &psi).unwrap();
            assert!(equal_up_to_global_phase(&want, &after).unwrap());
        }
    }

    #[test]
    fn ps_blindness_for_adversarial_reports() {
        let fa = analyze(cz(), 2);
        let mut r = rng(47);
        let report = verify_blindness_ps(&fa, &[0, 1], &[0, 1, 2, 3], &mut r).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn ps_single_round_padding_prediction() {
        let mut r = rng(53);
        for (u, n) in [(cz(), 2usize), (cx(), 2), (hadamard(), 1)] {
            let fa = analyze(u, n);
            let psi = psi_random(n, 61 + n as u64);
            let target = fa.gate(1).unwrap().clone();
            for _ in 0..10 {
                let run = run_ps_single_round(&fa, 1, &target, &psi, &mut r, None).unwrap();
                assert!(
                    run.transcript.fidelity_to_target.unwrap().0 >= 1.0 - FIDELITY_TOL,
                    "fidelity {:?}",
                    run.transcript.fidelity_to_target
                );
            }
        }
    }

    #[test]
    fn ps_single_round_cz_padding_is_z_type() {
        let fa = analyze(cz(), 2);
        let psi = psi_random(2, 67);
        let target = fa.gate(1).unwrap().clone();
        let mut r = rng(71);
        for _ in 0..20 {
            let run = run_ps_single_round(&fa, 1, &target, &psi, &mut r, None).unwrap();
            let pad: PauliString = run.transcript.final_padding.unwrap().parse().unwrap();
            assert_eq!(pad.x_bits(), 0, "padding {pad} has X support");
        }
    }

    #[test]
    fn ps_single_round_rejects_non_clifford() {
        let t = gates::t_gate();
        let fam = GateFamily::pair(1, t.clone()).unwrap();
        let fa = FamilyAnalysis::analyze(&fam).unwrap();
        let psi = psi_random(1, 73);
        let gate = fa.gate(1).unwrap().clone();
        assert!(matches!(
            run_ps_single_round(&fa, 1, &gate, &psi, &mut rng(79), None),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn ledger_rm_cnot_grows_by_two_on_unbiased_input() {
        let fa = analyze(cx(), 2);
        // |+0> has zero expectation on every nonzero basis element, so the
        // twirl is maximally mixed over the four padded branches.
        let plus = QuantumState::plus(Layout::single("psi", 1)).unwrap();
        let zero = QuantumState::zero(Layout::single("q", 1)).unwrap();
        let joint = plus.tensor(&zero).unwrap();
        let psi = QuantumState::pure(
            Layout::single("psi", 2),
            joint.amplitudes().unwrap().clone(),
        )
        .unwrap();
        let report =
            entropy_ledger_rm(&fa, fa.gate(1).unwrap(), &identity(4), &psi).unwrap();
        assert!(report.pass);
        assert!((report.rows[0].s_before.0 - 0.0).abs() < 1e-9);
        assert!((report.final_entropy.0 - 2.0).abs() < 1e-8);
        // Equality case of the bound: slack is zero.
        assert!(report.rows[0].slack.0.abs() < 1e-8);

        // For a generic input the inequality is strict but still holds.
        let generic = entropy_ledger_rm(
            &fa,
            fa.gate(1).unwrap(),
            &identity(4),
            &psi_random(2, 83),
        )
        .unwrap();
        assert!(generic.pass);
        assert!(generic.final_entropy.0 <= 2.0 + 1e-8);
    }

    #[test]
    fn ledger_rm_degenerate_round_keeps_entropy_constant() {
        let fa = analyze(cx(), 2);
        let psi = psi_random(2, 107);
        let report =
            entropy_ledger_rm(&fa, fa.gate(0).unwrap(), &identity(4), &psi).unwrap();
        // The measurement round moves no qubits and no information.
        let row = &report.rows[1];
        assert!((row.s_before.0 - row.s_after.0).abs() < 1e-10);
        assert!((row.expected_qubits_sent.0).abs() < 1e-12);
    }

    #[test]
    fn ledger_ps_two_round_bounded_by_cost() {
        let fa = analyze(cz(), 2);
        let psi = psi_random(2, 89);
        let report = entropy_ledger_ps2(&fa, fa.gate(1).unwrap(), &psi).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.final_entropy.0 <= fa.qubit_cost() as f64 + 1e-8);
    }

    #[test]
    fn resource_bound_experiment_for_the_paper_families() {
        for (u, n, want_r) in [
            (cx(), 2usize, 2usize),
            (hadamard(), 1, 1),
            (hadamard() * s_gate(), 1, 0),
            (cz(), 2, 2),
        ] {
            let fa = analyze(u, n);
            let report = resource_bound_experiment(&fa).unwrap();
            assert!(report.pass, "n={n} report={report:?}");
            assert_eq!(report.r, want_r);
            assert_eq!(report.implied_bound, 2 * n - want_r);
            assert_eq!(report.qubit_cost, 2 * n - want_r);
        }
    }

    #[test]
    fn lemma6_gram_identity_for_random_families() {
        let mut r = rng(97);
        for trial in 0..10 {
            let n = 1 + (trial % 2);
            let u = crate::sim::haar_random_unitary(1 << n, &mut r);
            let fa = analyze(u, n);
            let k = fa.qubit_cost();
            let gate = fa.gate(1).unwrap().clone();
            let mut vectors = Vec::new();
            for x in 0..(1u64 << k) {
                let shifted = fa.basis.b_x(x).dense().unwrap() * &gate;
                vectors.push(fa.phi_state(&shifted, false).unwrap().vector());
            }
            for (i, vi) in vectors.iter().enumerate() {
                for (j, vj) in vectors.iter().enumerate() {
                    let g = vi.dotc(vj);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (g - Complex64::new(want, 0.0)).norm() < 1e-9,
                        "n={n} i={i} j={j} g={g}"
                    );
                }
            }
        }
    }

    #[test]
    fn random_clifford_families_share_no_stabilizers() {
        use crate::clifford::{shared_stabilizer_check, stabilizers_of_phi, CliffordTableau};
        let mut r = rng(109);
        let mut done = 0;
        while done < 20 {
            let n = 1 + (r.gen::<u64>() % 2) as usize;
            let u = CliffordTableau::random(n, &mut r).to_dense().unwrap();
            let fam = GateFamily::pair(n, u).unwrap();
            // Pauli-like members leave no communication to verify.
            let Ok(fa) = FamilyAnalysis::analyze(&fam) else {
                continue;
            };
            let g = stabilizers_of_phi(&identity(1 << n), &fa.basis, &fa.vst.matrix).unwrap();
            let h = stabilizers_of_phi(fa.gate(1).unwrap(), &fa.basis, &fa.vst.matrix).unwrap();
            assert!(!shared_stabilizer_check(&g, &h).unwrap());
            done += 1;
        }
    }

    #[test]
    fn separable_v_for_cnot_family_is_cz() {
        let fa = analyze(cx(), 2);
        let v = fa.separable_protocol_v().unwrap();
        assert!(gates::max_norm_diff(&v, &cz()) < 1e-9);
    }

    #[test]
    fn separable_measurement_bases_are_z_and_x_products() {
        // With the separable V in the circuit, the measurement basis for the
        // identity choice is the computational basis and the one for the
        // Clifford choice is the X product basis, up to phases on columns.
        for (u, n) in [(cx(), 2usize), (cz(), 2)] {
            let fa = analyze(u, n);
            let v = fa.separable_protocol_v().unwrap();
            let basis_id = fa.rm_measurement_basis(fa.gate(0).unwrap(), &v).unwrap();
            for col in 0..basis_id.matrix.ncols() {
                let c = basis_id.matrix.column(col);
                let nonzero = c.iter().filter(|e| e.norm() > 1e-9).count();
                assert_eq!(nonzero, 1, "column {col} is not a computational state");
            }
            let basis_u = fa.rm_measurement_basis(fa.gate(1).unwrap(), &v).unwrap();
            for col in 0..basis_u.matrix.ncols() {
                let c = basis_u.matrix.column(col);
                for e in c.iter() {
                    let dim = basis_u.matrix.nrows() as f64;
                    assert!(
                        (e.norm() - 1.0 / dim.sqrt()).abs() < 1e-9,
                        "column {col} is not an X-basis product state"
                    );
                }
            }
        }
    }

    #[test]
    fn three_gate_family_protocols() {
        // {I, S, Sdg} shares the preserved row Z; every member decomposes
        // over B = <Z> and both protocols work for any choice index.
        let fam = GateFamily::new(
            2,
            vec![
                FamilyGate::Fixed(identity(4)),
                FamilyGate::Fixed(gates::kron(&s_gate(), &identity(2))),
                FamilyGate::Fixed(gates::kron(&gates::sdg_gate(), &identity(2))),
            ],
        )
        .unwrap();
        let fa = FamilyAnalysis::analyze(&fam).unwrap();
        assert_eq!(fa.family.gates.len(), 3);
        let psi = psi_random(2, 131);
        let v = identity(1 << fa.qubit_cost());
        let mut r = rng(137);
        for d in 0..3 {
            let gate = fa.gate(d).unwrap().clone();
            let run = run_rm(&fa, d, &gate, &v, &psi, &mut r, None).unwrap();
            assert!(run.transcript.fidelity_to_target.unwrap().0 >= 1.0 - FIDELITY_TOL);
            let ps = run_ps_two_round(&fa, d, &gate, &psi, &mut r, None).unwrap();
            assert!(ps.transcript.fidelity_to_target.unwrap().0 >= 1.0 - FIDELITY_TOL);
        }
        // Bob's mixture is identical across all three choices.
        let gates_c: Vec<CMat> = (0..3).map(|d| fa.gate(d).unwrap().clone()).collect();
        let rep = verify_blindness_rm(&fa, &gates_c, &v, &[("psi".into(), psi)]).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn rm_run_accepts_mixed_inputs() {
        let fa = analyze(cx(), 2);
        let rho = crate::sim::random_density(4, 2, &mut rng(139));
        let psi = QuantumState::mixed(Layout::single("psi", 2), rho.clone()).unwrap();
        let run = run_rm(
            &fa,
            1,
            fa.gate(1).unwrap(),
            &identity(4),
            &psi,
            &mut rng(141),
            Some(2),
        )
        .unwrap();
        assert!((run.probability - 0.25).abs() < 1e-10);
        assert!(run.transcript.fidelity_to_target.is_none());
        // The conditional output is the padded conjugate of the input.
        let op = run.padding.dense().unwrap() * fa.gate(1).unwrap();
        let want = &op * &rho * op.adjoint();
        assert!(gates::max_norm_diff(&run.bob_state.density_matrix(), &want) < 1e-9);
    }

    #[test]
    fn transcript_structure_rm_has_no_alice_traffic() {
        let fa = analyze(cx(), 2);
        let psi = psi_random(2, 101);
        let run = run_rm(
            &fa,
            1,
            fa.gate(1).unwrap(),
            &identity(4),
            &psi,
            &mut rng(103),
            None,
        )
        .unwrap();
        assert_eq!(run.transcript.alice_to_bob_traffic(), 0);
        assert_eq!(run.transcript.total_qubits_sent, fa.qubit_cost());
    }
}
