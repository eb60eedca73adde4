//! Command implementations and their JSON report types.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use blindgate_core::clifford::{
    enumerate_free_gates, separable_v, stabilizers_of_phi, CliffordTableau, FreeGateRow,
};
use blindgate_core::gates;
use blindgate_core::padding::{
    b_uniform_padding, check_hiding_property, check_hiding_rule, default_test_states,
    padding_report, solve_valid_paddings, walsh_transform, PaddingReport, PaddingSet,
};
use blindgate_core::pauli::{CMat, PauliString};
use blindgate_core::protocols::{
    entropy_ledger_ps1, entropy_ledger_ps2, entropy_ledger_rm, run_ps_single_round,
    run_ps_two_round, run_rm, resource_bound_experiment, verify_blindness_ps, verify_blindness_rm,
    FamilyAnalysis, LedgerReport, ProtocolTranscript,
};
use blindgate_core::report::{CheckRecord, Real};
use blindgate_core::sim::{
    haar_random_pure, haar_random_unitary, random_density, von_neumann_entropy, Layout,
    QuantumState, StateFixture,
};
use blindgate_core::subspaces::decompose_in_b;

use crate::config::{parse_family, ConfigError, FamilyConfig};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CmdError {
    /// Configuration or file problems; exit code 2.
    Config(String),
    /// Failed checks or engine errors during a run; exit code 1.
    Check(String),
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(m) => write!(f, "{m}"),
            CmdError::Check(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.to_string())
    }
}

impl From<blindgate_core::Error> for CmdError {
    fn from(e: blindgate_core::Error) -> Self {
        CmdError::Check(e.to_string())
    }
}

pub fn load_family(path: &Path) -> Result<FamilyConfig, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse_family(&text)?;
    // The normalized document must survive a serialize/parse cycle.
    let echo = serde_json::to_string(&cfg.document)
        .map_err(|e| CmdError::Config(format!("cannot re-serialize config: {e}")))?;
    parse_family(&echo)?;
    Ok(cfg)
}

fn analyze_family(cfg: &FamilyConfig) -> Result<FamilyAnalysis, CmdError> {
    let family = cfg.to_gate_family()?;
    Ok(FamilyAnalysis::analyze(&family)?)
}

#[derive(Serialize)]
pub struct AnalyzeReport {
    pub engine_version: &'static str,
    pub n: usize,
    pub r: usize,
    pub qubit_cost: usize,
    pub preserved_generators: Vec<String>,
    pub basis: Vec<String>,
    pub c_vectors: Vec<u64>,
    pub dual_basis: Vec<String>,
    pub adjustments: Vec<String>,
    pub standard_transform_width: usize,
    pub standard_transform_action: Vec<[String; 2]>,
    /// The canonical basis padding with its Walsh table.
    pub basis_padding: PaddingReport,
}

pub fn cmd_analyze(path: &Path) -> Result<(String, bool), CmdError> {
    let cfg = load_family(path)?;
    let fa = analyze_family(&cfg)?;
    let report = AnalyzeReport {
        engine_version: ENGINE_VERSION,
        n: fa.n(),
        r: fa.pf.rank(),
        qubit_cost: fa.qubit_cost(),
        preserved_generators: fa
            .pf
            .generator_paulis()
            .iter()
            .map(|p| p.to_string())
            .collect(),
        basis: fa.basis.paulis().iter().map(|p| p.to_string()).collect(),
        c_vectors: fa.basis.c_vectors().to_vec(),
        dual_basis: fa.dual.paulis().iter().map(|p| p.to_string()).collect(),
        adjustments: fa.adjustments.iter().map(|p| p.to_string()).collect(),
        standard_transform_width: fa.vst.m,
        standard_transform_action: fa
            .vst
            .action
            .iter()
            .map(|(s, t)| [s.to_string(), t.to_string()])
            .collect(),
        basis_padding: padding_report(&b_uniform_padding(&fa.basis)?, &fa.pf)?,
    };
    Ok((to_pretty(&report)?, true))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum RunMode {
    Rm,
    Ps2,
    Ps1,
}

#[derive(Serialize)]
pub struct RunReport {
    pub engine_version: &'static str,
    pub family: String,
    pub seed: u64,
    pub psi_source: String,
    pub transcript: ProtocolTranscript,
    /// Largest pairwise trace distance between Bob's mixtures across gate
    /// choices at this input (receive-and-measure mode only).
    pub blindness_max_distance: Option<Real>,
}

pub struct RunOptions {
    pub mode: RunMode,
    pub choice: usize,
    pub theta: Option<f64>,
    pub seed: u64,
    pub psi: String,
    pub force_outcomes: Vec<u64>,
}

fn build_psi(
    source: &str,
    n: usize,
    rng: &mut ChaCha12Rng,
) -> Result<QuantumState, CmdError> {
    match source {
        "zero" => Ok(QuantumState::zero(Layout::single("psi", n))?),
        "random" => Ok(haar_random_pure(Layout::single("psi", n), rng)?),
        "entref" => Ok(QuantumState::maximally_entangled("psi", "ref", n)?),
        other => {
            if let Some(path) = other.strip_prefix("file:") {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CmdError::Config(format!("cannot read {path}: {e}")))?;
                let fixture: StateFixture = serde_json::from_str(&text)
                    .map_err(|e| CmdError::Config(format!("bad state fixture {path}: {e}")))?;
                Ok(fixture.to_state()?)
            } else {
                Err(CmdError::Config(format!(
                    "unknown psi source {other:?} (expected zero|random|file:PATH|entref)"
                )))
            }
        }
    }
}

/// The concrete adjusted unitary for gate choice `d`.
fn concrete_gate(
    cfg: &FamilyConfig,
    fa: &FamilyAnalysis,
    d: usize,
    theta: Option<f64>,
) -> Result<CMat, CmdError> {
    let program = cfg
        .programs
        .get(d)
        .ok_or_else(|| CmdError::Config(format!("gate index {d} out of range")))?;
    if program.is_parametric() {
        let raw = program.build(cfg.n, theta)?;
        Ok(fa.adjust_concrete(d, &raw)?)
    } else {
        Ok(fa.gate(d)?.clone())
    }
}

/// All concrete fixed gates (probe instantiations for parametrized members).
fn concrete_gates_for_blindness(
    cfg: &FamilyConfig,
    fa: &FamilyAnalysis,
) -> Result<Vec<CMat>, CmdError> {
    let mut out = Vec::new();
    for (d, program) in cfg.programs.iter().enumerate() {
        if program.is_parametric() {
            for t in FamilyConfig::probe_values().into_iter().take(3) {
                let raw = program.build(cfg.n, Some(t))?;
                out.push(fa.adjust_concrete(d, &raw)?);
            }
        } else {
            out.push(fa.gate(d)?.clone());
        }
    }
    Ok(out)
}

/// Default rotation for the receive-and-measure circuit: the separable
/// construction when the family supports it, identity otherwise.
fn default_v(fa: &FamilyAnalysis) -> CMat {
    fa.separable_protocol_v()
        .unwrap_or_else(|_| gates::identity(1 << fa.qubit_cost()))
}

pub fn cmd_run(path: &Path, opts: &RunOptions) -> Result<(String, bool), CmdError> {
    let cfg = load_family(path)?;
    let fa = analyze_family(&cfg)?;
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let psi = build_psi(&opts.psi, cfg.n, &mut rng)?;
    let gate = concrete_gate(&cfg, &fa, opts.choice, opts.theta)?;
    let forced = opts.force_outcomes.first().copied();
    let (mut transcript, blindness) = match opts.mode {
        RunMode::Rm => {
            let v = default_v(&fa);
            let run = run_rm(&fa, opts.choice, &gate, &v, &psi, &mut rng, forced)?;
            let mut transcript = run.transcript;
            transcript.entropy_ledger = entropy_ledger_rm(&fa, &gate, &v, &psi)?.rows;
            // Bob's view compared across every family member.
            let mut all_gates = concrete_gates_for_blindness(&cfg, &fa)?;
            if cfg.programs[opts.choice].is_parametric() {
                all_gates.push(gate.clone());
            }
            let labeled = vec![("run".to_string(), psi.clone())];
            let report = verify_blindness_rm(&fa, &all_gates, &v, &labeled)?;
            let max_d = report.rows[0].max_pairwise_distance;
            (transcript, Some(max_d))
        }
        RunMode::Ps2 => {
            let run = run_ps_two_round(&fa, opts.choice, &gate, &psi, &mut rng, forced)?;
            let mut transcript = run.transcript;
            transcript.entropy_ledger = entropy_ledger_ps2(&fa, &gate, &psi)?.rows;
            (transcript, None)
        }
        RunMode::Ps1 => {
            let run = run_ps_single_round(&fa, opts.choice, &gate, &psi, &mut rng, forced)?;
            let mut transcript = run.transcript;
            transcript.entropy_ledger = entropy_ledger_ps1(&fa, &gate, &psi)?.rows;
            (transcript, None)
        }
    };
    // A run passes when the final state matched its target and the ledger
    // inequalities held.
    let fidelity_ok = transcript
        .fidelity_to_target
        .map(|f| f.0 >= 1.0 - 1e-9)
        .unwrap_or(true);
    let ledger_ok = transcript
        .entropy_ledger
        .iter()
        .all(|row| row.slack.0 >= -1e-8);
    transcript.alice_choice = Some(opts.choice);
    let report = RunReport {
        engine_version: ENGINE_VERSION,
        family: stem(path),
        seed: opts.seed,
        psi_source: opts.psi.clone(),
        transcript,
        blindness_max_distance: blindness,
    };
    Ok((to_pretty(&report)?, fidelity_ok && ledger_ok))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Blindness,
    Padding,
    Entropy,
    Orthonormality,
    Theorem1,
    All,
}

#[derive(Serialize)]
pub struct VerificationReport {
    pub suite: String,
    pub engine_version: &'static str,
    pub seed: u64,
    pub records: Vec<CheckRecord>,
    pub overall_pass: bool,
}

pub fn cmd_verify(path: &Path, suite: Suite, seed: u64) -> Result<(String, bool), CmdError> {
    let cfg = load_family(path)?;
    let fa = analyze_family(&cfg)?;
    let mut records = Vec::new();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    if matches!(suite, Suite::Padding | Suite::All) {
        padding_suite(&cfg, &fa, &mut records, &mut rng)?;
    }
    if matches!(suite, Suite::Blindness | Suite::All) {
        blindness_suite(&cfg, &fa, &mut records, &mut rng)?;
    }
    if matches!(suite, Suite::Entropy | Suite::All) {
        entropy_suite(&cfg, &fa, &mut records, &mut rng)?;
    }
    if matches!(suite, Suite::Orthonormality | Suite::All) {
        orthonormality_suite(&cfg, &fa, &mut records, &mut rng)?;
    }
    if matches!(suite, Suite::Theorem1 | Suite::All) {
        resource_bound_suite(&fa, &mut records)?;
    }
    let overall_pass = records.iter().all(|r| r.pass);
    let name = format!("{suite:?}").to_lowercase();
    let report = VerificationReport {
        suite: name,
        engine_version: ENGINE_VERSION,
        seed,
        records,
        overall_pass,
    };
    Ok((to_pretty(&report)?, report.overall_pass))
}

fn padding_suite(
    cfg: &FamilyConfig,
    fa: &FamilyAnalysis,
    records: &mut Vec<CheckRecord>,
    rng: &mut ChaCha12Rng,
) -> Result<(), CmdError> {
    let n = fa.n();
    let bpad = b_uniform_padding(&fa.basis)?;
    let rule = check_hiding_rule(&bpad, &fa.pf)?;
    records.push(CheckRecord::le(
        "basis padding satisfies the Walsh support condition",
        "padding.hiding_rule.basis",
        rule.max_violation.0,
        1e-10,
    ));
    let uniform = PaddingSet::uniform(n)?;
    let urule = check_hiding_rule(&uniform, &fa.pf)?;
    records.push(CheckRecord::le(
        "uniform padding satisfies the Walsh support condition",
        "padding.hiding_rule.uniform",
        urule.max_violation.0,
        1e-10,
    ));
    // Walsh transform of the basis padding is the subspace indicator.
    let hat = walsh_transform(&bpad);
    let mut indicator_dev = 0.0f64;
    for (&y, &h) in &hat {
        let expect = if fa.pf.contains(y) { 1.0 } else { 0.0 };
        indicator_dev = indicator_dev.max((h - expect).abs());
    }
    records.push(CheckRecord::le(
        "Walsh transform of the basis padding indicates the preserved rows",
        "padding.walsh.indicator",
        indicator_dev,
        1e-10,
    ));
    // The identical padding hides every member against the identity.
    let states = default_test_states(n, 32, rng)?;
    let mut max_td = 0.0f64;
    for gate in concrete_gates_for_blindness(cfg, fa)? {
        let rep = check_hiding_property(&bpad, &bpad, &gate, &states)?;
        max_td = max_td.max(rep.max_trace_distance.0);
    }
    records.push(CheckRecord::le(
        "basis padding channel hides every family member",
        "padding.hiding_property",
        max_td,
        1e-9,
    ));
    let solution = solve_valid_paddings(&fa.pf)?;
    let expect_dim = (1usize << fa.pf.rank()) - 1;
    records.push(CheckRecord::flag(
        "equality solution space has one free coefficient per preserved row",
        "padding.solution.dimension",
        solution.dimension() == expect_dim,
        solution.dimension() as f64,
    ));
    let (_, residual) = solution.project(&bpad);
    records.push(CheckRecord::le(
        "basis padding lies in the solution space",
        "padding.solution.contains_basis_padding",
        residual,
        1e-10,
    ));
    if fa.pf.rank() == 0 {
        let unique_dev = solution
            .particular
            .iter()
            .map(|w| (w - 1.0 / (1u64 << (2 * n)) as f64).abs())
            .fold(0.0, f64::max);
        records.push(CheckRecord::le(
            "trivial preserved subspace forces the uniform padding",
            "padding.solution.unique_uniform",
            unique_dev,
            1e-10,
        ));
    }
    Ok(())
}

fn blindness_suite(
    cfg: &FamilyConfig,
    fa: &FamilyAnalysis,
    records: &mut Vec<CheckRecord>,
    rng: &mut ChaCha12Rng,
) -> Result<(), CmdError> {
    let n = fa.n();
    let gates_c = concrete_gates_for_blindness(cfg, fa)?;
    let psis = vec![
        ("zero".to_string(), QuantumState::zero(Layout::single("psi", n))?),
        (
            "random".to_string(),
            haar_random_pure(Layout::single("psi", n), rng)?,
        ),
        (
            "entref".to_string(),
            QuantumState::maximally_entangled("psi", "ref", n)?,
        ),
    ];
    let v = gates::identity(1 << fa.qubit_cost());
    let report = verify_blindness_rm(fa, &gates_c, &v, &psis)?;
    let max_pair = report
        .rows
        .iter()
        .map(|r| r.max_pairwise_distance.0)
        .fold(0.0, f64::max);
    let max_twirl = report
        .rows
        .iter()
        .map(|r| r.distance_to_twirl.0)
        .fold(0.0, f64::max);
    records.push(CheckRecord::le(
        "server mixture is independent of the gate choice",
        "blindness.rm.pairwise",
        max_pair,
        1e-10,
    ));
    records.push(CheckRecord::le(
        "server mixture equals the basis twirl of the input",
        "blindness.rm.twirl",
        max_twirl,
        1e-10,
    ));
    // The reduced state does not depend on the agreed rotation V.
    let psi = haar_random_pure(Layout::single("psi", n), rng)?;
    let mut mixtures = Vec::new();
    for _ in 0..4 {
        let vr = haar_random_unitary(1 << fa.qubit_cost(), rng);
        let rep = verify_blindness_rm(fa, &gates_c, &vr, &[("v".into(), psi.clone())])?;
        mixtures.push(rep.rows[0].distance_to_twirl.0);
    }
    let v_dev = mixtures.iter().cloned().fold(0.0, f64::max);
    records.push(CheckRecord::le(
        "server mixture is independent of the rotation V",
        "blindness.rm.v_independence",
        v_dev,
        1e-10,
    ));
    if let Ok(v_sep) = fa.separable_protocol_v() {
        let rep = verify_blindness_rm(fa, &gates_c, &v_sep, &psis)?;
        let dev = rep
            .rows
            .iter()
            .map(|r| r.max_pairwise_distance.0.max(r.distance_to_twirl.0))
            .fold(0.0, f64::max);
        records.push(CheckRecord::le(
            "separable rotation preserves blindness",
            "blindness.rm.separable_v",
            dev,
            1e-10,
        ));
    }
    // Prepare-and-send blindness under adversarial outcome reports.
    let fixed_targets: Vec<usize> = cfg
        .programs
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_parametric())
        .map(|(d, _)| d)
        .collect();
    let k = fa.qubit_cost();
    let ys: Vec<u64> = (0..(1u64 << k).min(8)).collect();
    let ps = verify_blindness_ps(fa, &fixed_targets, &ys, rng)?;
    let gram = ps.rows.iter().map(|r| r.gram_deviation.0).fold(0.0, f64::max);
    let mix = ps
        .rows
        .iter()
        .map(|r| r.mixture_deviation.0)
        .fold(0.0, f64::max);
    records.push(CheckRecord::le(
        "sent states stay orthonormal under adversarial reports",
        "blindness.ps.gram",
        gram,
        1e-10,
    ));
    records.push(CheckRecord::le(
        "pad-averaged sent state is maximally mixed",
        "blindness.ps.mixture",
        mix,
        1e-10,
    ));
    records.push(CheckRecord::le(
        "sent mixtures agree across targets",
        "blindness.ps.cross_target",
        ps.cross_target_deviation.0,
        1e-10,
    ));
    Ok(())
}

fn ledger_min_slack(report: &LedgerReport) -> f64 {
    report
        .rows
        .iter()
        .map(|r| r.slack.0)
        .fold(f64::INFINITY, f64::min)
}

fn entropy_suite(
    cfg: &FamilyConfig,
    fa: &FamilyAnalysis,
    records: &mut Vec<CheckRecord>,
    rng: &mut ChaCha12Rng,
) -> Result<(), CmdError> {
    let n = fa.n();
    let v = gates::identity(1 << fa.qubit_cost());
    let psis = [
        QuantumState::zero(Layout::single("psi", n))?,
        haar_random_pure(Layout::single("psi", n), rng)?,
    ];
    let mut min_slack = f64::INFINITY;
    for gate in concrete_gates_for_blindness(cfg, fa)? {
        for psi in &psis {
            min_slack = min_slack.min(ledger_min_slack(&entropy_ledger_rm(fa, &gate, &v, psi)?));
        }
    }
    records.push(CheckRecord::flag(
        "per-round entropy inequality holds for receive-and-measure",
        "entropy.ledger.rm",
        min_slack >= -1e-8,
        min_slack,
    ));
    if let Ok(gate) = fa.gate(1) {
        let gate = gate.clone();
        let rep = entropy_ledger_ps2(fa, &gate, &psis[1])?;
        records.push(CheckRecord::flag(
            "per-round entropy inequality holds for two-round prepare-and-send",
            "entropy.ledger.ps2",
            rep.pass,
            ledger_min_slack(&rep),
        ));
        records.push(CheckRecord::le(
            "final average entropy is bounded by the qubit cost",
            "entropy.ledger.ps2.final",
            rep.final_entropy.0,
            fa.qubit_cost() as f64 + 1e-8,
        ));
        if CliffordTableau::from_dense(&gate).is_ok() {
            let rep1 = entropy_ledger_ps1(fa, &gate, &psis[1])?;
            records.push(CheckRecord::flag(
                "per-round entropy inequality holds for single-round prepare-and-send",
                "entropy.ledger.ps1",
                rep1.pass,
                ledger_min_slack(&rep1),
            ));
        }
    }
    // Spot checks of the general entropy facts used by the ledger.
    let mut concavity_margin = f64::INFINITY;
    for _ in 0..20 {
        let dim = 4;
        let rho = random_density(dim, 3, rng);
        let basis = haar_random_unitary(dim, rng);
        let s = von_neumann_entropy(&rho)?;
        // Coarse projective measurement with two rank-2 outcomes, so that the
        // conditional states stay mixed.
        let mut avg = 0.0;
        for half in 0..2 {
            let cols = basis.columns(half * 2, 2);
            let proj = cols * cols.adjoint();
            let post = &proj * &rho * &proj;
            let p: f64 = post.diagonal().iter().map(|e| e.re).sum();
            if p > 1e-12 {
                avg += p * von_neumann_entropy(&post.map(|e| e / p))?;
            }
        }
        concavity_margin = concavity_margin.min(s - avg);
    }
    records.push(CheckRecord::flag(
        "measurement does not increase average entropy",
        "entropy.concavity",
        concavity_margin >= -1e-8,
        concavity_margin,
    ));
    let mut araki_lieb_margin = f64::INFINITY;
    for _ in 0..20 {
        let state = haar_random_pure(
            Layout(vec![
                blindgate_core::sim::Register {
                    name: "a".into(),
                    qubits: 1,
                },
                blindgate_core::sim::Register {
                    name: "b".into(),
                    qubits: 1,
                },
                blindgate_core::sim::Register {
                    name: "c".into(),
                    qubits: 1,
                },
            ]),
            rng,
        )?;
        let s_ab = von_neumann_entropy(&state.partial_trace_registers(&["a", "b"])?)?;
        let s_a = von_neumann_entropy(&state.partial_trace_registers(&["a"])?)?;
        let s_b = von_neumann_entropy(&state.partial_trace_registers(&["b"])?)?;
        araki_lieb_margin = araki_lieb_margin.min(s_ab + s_a - s_b);
    }
    records.push(CheckRecord::flag(
        "subadditivity of entropy across subsystem splits",
        "entropy.araki_lieb",
        araki_lieb_margin >= -1e-8,
        araki_lieb_margin,
    ));
    let mut unitary_dev = 0.0f64;
    for _ in 0..10 {
        let rho = random_density(8, 3, rng);
        let u = haar_random_unitary(8, rng);
        let s1 = von_neumann_entropy(&rho)?;
        let s2 = von_neumann_entropy(&(&u * &rho * u.adjoint()))?;
        unitary_dev = unitary_dev.max((s1 - s2).abs());
    }
    records.push(CheckRecord::le(
        "entropy is invariant under unitaries",
        "entropy.unitary_invariance",
        unitary_dev,
        1e-8,
    ));
    Ok(())
}

fn orthonormality_suite(
    cfg: &FamilyConfig,
    fa: &FamilyAnalysis,
    records: &mut Vec<CheckRecord>,
    rng: &mut ChaCha12Rng,
) -> Result<(), CmdError> {
    let k = fa.qubit_cost();
    let mut max_dev = 0.0f64;
    let gram_dev = |gate: &CMat| -> Result<f64, CmdError> {
        let mut vectors = Vec::new();
        for x in 0..(1u64 << k) {
            let shifted = fa.basis.b_x(x).dense()? * gate;
            vectors.push(fa.phi_state(&shifted, false)?.vector());
        }
        let mut dev = 0.0f64;
        for (i, vi) in vectors.iter().enumerate() {
            for (j, vj) in vectors.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((vi.dotc(vj) - Complex64::new(want, 0.0)).norm());
            }
        }
        Ok(dev)
    };
    for gate in concrete_gates_for_blindness(cfg, fa)? {
        max_dev = max_dev.max(gram_dev(&gate)?);
    }
    records.push(CheckRecord::le(
        "shifted coefficient states of family members are orthonormal",
        "orthonormality.family_gram",
        max_dev,
        1e-9,
    ));
    // Random members supported on the same basis.
    let mut random_dev = 0.0f64;
    for _ in 0..10 {
        let u = random_member_on_basis(fa, rng)?;
        random_dev = random_dev.max(gram_dev(&u)?);
    }
    records.push(CheckRecord::le(
        "shifted coefficient states of random supported members are orthonormal",
        "orthonormality.random_gram",
        random_dev,
        1e-9,
    ));
    // The protocol measurement bases validate as orthonormal.
    let v = gates::identity(1 << k);
    let mut basis_ok = true;
    for gate in concrete_gates_for_blindness(cfg, fa)? {
        basis_ok &= fa.rm_measurement_basis(&gate, &v).is_ok();
    }
    records.push(CheckRecord::flag(
        "measurement bases are orthonormal",
        "orthonormality.measurement_basis",
        basis_ok,
        if basis_ok { 0.0 } else { 1.0 },
    ));
    Ok(())
}

/// A Haar-flavoured random unitary with support on the decomposition basis:
/// `exp(iH)` for a random Hermitian element of the basis algebra.
fn random_member_on_basis(
    fa: &FamilyAnalysis,
    rng: &mut ChaCha12Rng,
) -> Result<CMat, CmdError> {
    let k = fa.qubit_cost();
    let dim = 1usize << fa.n();
    let mut a = CMat::zeros(dim, dim);
    for x in 0..(1u64 << k) {
        let coeff = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        a += fa.basis.b_x(x).dense()?.map(|e| e * coeff);
    }
    let h = (&a + a.adjoint()).map(|e| e * Complex64::new(0.5, 0.0));
    // exp(iH) via the Hermitian eigendecomposition.
    let sym = (&h + h.adjoint()).map(|e| e * Complex64::new(0.5, 0.0));
    let eig = sym.symmetric_eigen();
    let mut u = CMat::zeros(dim, dim);
    for (idx, lambda) in eig.eigenvalues.iter().enumerate() {
        let col = eig.eigenvectors.column(idx);
        let phase = Complex64::from_polar(1.0, *lambda);
        u += (col * col.adjoint()).map(|e| e * phase);
    }
    // Membership: the result must decompose over the basis.
    decompose_in_b(&u, &fa.basis)?;
    Ok(u)
}

fn resource_bound_suite(fa: &FamilyAnalysis, records: &mut Vec<CheckRecord>) -> Result<(), CmdError> {
    let report = resource_bound_experiment(fa)?;
    records.push(CheckRecord::le(
        "witness state entropy equals the preserved dimension",
        "resource_bound.witness_entropy",
        (report.witness_entropy.0 - report.r as f64).abs(),
        1e-8,
    ));
    records.push(CheckRecord::le(
        "averaged server state is maximally mixed",
        "resource_bound.maximally_mixed",
        report.max_deviation_from_maximally_mixed.0,
        1e-10,
    ));
    records.push(CheckRecord::le(
        "final entropy reaches the full register",
        "resource_bound.final_entropy",
        (report.final_entropy.0 - 2.0 * report.n as f64).abs(),
        1e-8,
    ));
    records.push(CheckRecord::flag(
        "implied communication bound equals the protocol cost",
        "resource_bound.bound_equals_cost",
        report.bound_equals_cost,
        report.implied_bound as f64,
    ));
    Ok(())
}

#[derive(Serialize)]
pub struct SeparableReport {
    pub identity_stabilizers: Vec<String>,
    pub gate_stabilizers: Vec<String>,
    pub shared_stabilizer: bool,
    pub v_tableau: String,
    pub conjugation_deviation: Real,
    pub matches_catalog: Option<String>,
}

#[derive(Serialize)]
pub struct CliffordReport {
    pub engine_version: &'static str,
    pub family: String,
    pub separable: Option<SeparableReport>,
    pub enumeration: Option<Vec<FreeGateRow>>,
}

pub fn cmd_clifford(
    path: &Path,
    want_separable: bool,
    want_enumerate: bool,
) -> Result<(String, bool), CmdError> {
    let cfg = load_family(path)?;
    let fa = analyze_family(&cfg)?;
    let mut pass = true;
    let separable = if want_separable {
        let gate = fa.gate(1)?;
        let g = stabilizers_of_phi(
            &gates::identity(1 << fa.n()),
            &fa.basis,
            &fa.vst.matrix,
        )?;
        let h = stabilizers_of_phi(gate, &fa.basis, &fa.vst.matrix)?;
        let shared = blindgate_core::clifford::shared_stabilizer_check(&g, &h)?;
        let v = separable_v(&g, &h)?;
        let vd = v.to_dense()?;
        // Dense verification of both conjugation families.
        let mut dev = 0.0f64;
        for (i, gi) in g.generators().iter().enumerate() {
            let z = PauliString::single(g.width(), i, 'Z')?;
            let got = vd.adjoint() * gi.dense()? * &vd;
            dev = dev.max(gates::max_norm_diff(&got, &z.dense()?));
        }
        for (i, hh) in v.x_images().iter().enumerate() {
            let x = PauliString::single(g.width(), i, 'X')?;
            let got = vd.adjoint() * hh.dense()? * &vd;
            dev = dev.max(gates::max_norm_diff(&got, &x.dense()?));
        }
        pass &= !shared && dev <= 1e-10;
        let matches_catalog = blindgate_core::clifford::diagonal_clifford_catalog(g.width())
            .into_iter()
            .find(|(_, c)| {
                blindgate_core::clifford::pauli_from_dense_up_to_phase(&(&vd * c.adjoint()))
                    .is_ok()
            })
            .map(|(name, _)| name);
        Some(SeparableReport {
            identity_stabilizers: g.generators().iter().map(|p| p.to_string()).collect(),
            gate_stabilizers: h.generators().iter().map(|p| p.to_string()).collect(),
            shared_stabilizer: shared,
            v_tableau: v.describe(),
            conjugation_deviation: Real(dev),
            matches_catalog,
        })
    } else {
        None
    };
    let enumeration = if want_enumerate {
        let v = fa
            .separable_protocol_v()
            .unwrap_or_else(|_| gates::identity(1 << fa.qubit_cost()));
        Some(enumerate_free_gates(&fa.basis, &v)?)
    } else {
        None
    };
    let report = CliffordReport {
        engine_version: ENGINE_VERSION,
        family: stem(path),
        separable,
        enumeration,
    };
    Ok((to_pretty(&report)?, pass))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "family".into())
}

fn to_pretty<T: Serialize>(value: &T) -> Result<String, CmdError> {
    serde_json::to_string_pretty(value).map_err(|e| CmdError::Check(format!("serialize: {e}")))
}

/// Resolve the output destination: `-` streams to stdout, an explicit path is
/// used as-is, and the default lands in the report directory.
pub fn write_report(
    out: Option<&str>,
    default_name: &str,
    body: &str,
) -> Result<Option<PathBuf>, CmdError> {
    match out {
        Some("-") => {
            println!("{body}");
            Ok(None)
        }
        Some(path) => {
            std::fs::write(path, body)
                .map_err(|e| CmdError::Config(format!("cannot write {path}: {e}")))?;
            Ok(Some(PathBuf::from(path)))
        }
        None => {
            let dir = std::env::var("BLINDGATE_REPORT_DIR").unwrap_or_else(|_| ".".into());
            let path = Path::new(&dir).join(default_name);
            std::fs::write(&path, body)
                .map_err(|e| CmdError::Config(format!("cannot write {}: {e}", path.display())))?;
            Ok(Some(path))
        }
    }
}
