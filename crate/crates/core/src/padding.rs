//! Pauli padding sets and the hiding conditions they must satisfy.
//!
//! A padding set is a probability distribution over Pauli `(x|z)` rows used
//! as the output pad of a blind gate protocol. The Walsh transform
//! `alpha_hat(y) = sum_x alpha_x (-1)^(x^T Omega y)` turns the hiding
//! requirement into a support condition: the transform must vanish on every
//! row outside the preserved subspace.

use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pauli::{symplectic_product, CMat, PauliString};
use crate::report::Real;
use crate::sim::trace_distance;
use crate::subspaces::{BasisB, PauliSubspace};

/// Walsh enumeration guard (4^n rows).
pub const MAX_PADDING_QUBITS: usize = 6;

pub const HIDING_RULE_TOL: f64 = 1e-10;
pub const HIDING_PROPERTY_TOL: f64 = 1e-9;

/// A probability distribution over Pauli rows, stored sparsely.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddingSet {
    n: usize,
    weights: BTreeMap<u64, f64>,
}

impl PaddingSet {
    pub fn new(n: usize, weights: BTreeMap<u64, f64>) -> Result<Self> {
        if n > MAX_PADDING_QUBITS {
            return Err(Error::Resource(format!("padding sets refused for n={n}")));
        }
        let mut total = 0.0;
        for (&row, &w) in &weights {
            if row >= 1u64 << (2 * n) {
                return Err(Error::Dimension(format!("row {row} out of range for n={n}")));
            }
            if w < -1e-15 {
                return Err(Error::Validation(format!("negative weight {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("weights sum to {total}")));
        }
        Ok(Self { n, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &BTreeMap<u64, f64> {
        &self.weights
    }

    pub fn weight(&self, row: u64) -> f64 {
        self.weights.get(&row).copied().unwrap_or(0.0)
    }

    /// Uniform distribution over all 4^n rows.
    pub fn uniform(n: usize) -> Result<Self> {
        let count = 1u64 << (2 * n);
        let w = 1.0 / count as f64;
        Self::new(n, (0..count).map(|r| (r, w)).collect())
    }

    /// All probability on a single row.
    pub fn point_mass(n: usize, row: u64) -> Result<Self> {
        Self::new(n, BTreeMap::from([(row, 1.0)]))
    }

    /// From dense weights indexed by row.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        let weights = dense
            .iter()
            .enumerate()
            .filter(|(_, &w)| w.abs() > 0.0)
            .map(|(r, &w)| (r as u64, w))
            .collect();
        Self::new(n, weights)
    }
}

/// Uniform weight over the row space of B, zero elsewhere.
pub fn b_uniform_padding(b: &BasisB) -> Result<PaddingSet> {
    let k = b.len();
    let w = 1.0 / (1u64 << k) as f64;
    let mut weights = BTreeMap::new();
    for sel in 0..(1u64 << k) {
        let mut row = 0u64;
        for (i, p) in b.paulis().iter().enumerate() {
            if (sel >> i) & 1 == 1 {
                row ^= p.row();
            }
        }
        weights.insert(row, w);
    }
    PaddingSet::new(b.n(), weights)
}

/// `alpha_hat(y) = sum_x alpha_x (-1)^(x^T Omega y)` for every row y.
pub fn walsh_transform(p: &PaddingSet) -> BTreeMap<u64, f64> {
    let n = p.n();
    let mut out = BTreeMap::new();
    for y in 0..(1u64 << (2 * n)) {
        let mut acc = 0.0;
        for (&x, &w) in p.weights() {
            if symplectic_product(x, y, n) == 0 {
                acc += w;
            } else {
                acc -= w;
            }
        }
        out.insert(y, acc);
    }
    out
}

/// Inverse of [`walsh_transform`] up to the 4^n scaling.
pub fn inverse_walsh(n: usize, hat: &BTreeMap<u64, f64>) -> Result<PaddingSet> {
    let count = 1u64 << (2 * n);
    let scale = 1.0 / count as f64;
    let mut weights = BTreeMap::new();
    for x in 0..count {
        let mut acc = 0.0;
        for (&y, &h) in hat {
            if symplectic_product(x, y, n) == 0 {
                acc += h;
            } else {
                acc -= h;
            }
        }
        let w = acc * scale;
        if w.abs() > 1e-15 {
            weights.insert(x, w);
        }
    }
    PaddingSet::new(n, weights)
}

/// Outcome of the Walsh-support check against a preserved subspace.
#[derive(Clone, Debug, Serialize)]
pub struct HidingRuleReport {
    pub pass: bool,
    pub max_violation: Real,
    /// Rows outside the subspace whose transform exceeds tolerance.
    pub violations: Vec<(String, Real)>,
}

/// The transform must vanish on every row outside the preserved subspace.
pub fn check_hiding_rule(p: &PaddingSet, pf: &PauliSubspace) -> Result<HidingRuleReport> {
    if p.n() != pf.n() {
        return Err(Error::Dimension("padding and subspace widths differ".into()));
    }
    let hat = walsh_transform(p);
    let mut violations = Vec::new();
    let mut max_violation = 0.0f64;
    for (&y, &h) in &hat {
        if pf.contains(y) {
            continue;
        }
        max_violation = max_violation.max(h.abs());
        if h.abs() > HIDING_RULE_TOL {
            violations.push((
                PauliString::from_row(p.n(), y)?.to_string(),
                Real(h),
            ));
        }
    }
    Ok(HidingRuleReport {
        pass: violations.is_empty(),
        max_violation: Real(max_violation),
        violations,
    })
}

/// Result of comparing the two padded channels on a set of test states.
#[derive(Clone, Debug, Serialize)]
pub struct HidingPropertyReport {
    pub pass: bool,
    pub max_trace_distance: Real,
    pub per_state: Vec<Real>,
}

/// Apply the padding channel `rho -> sum_x alpha_x P_x rho P_x`.
pub fn padded_channel(p: &PaddingSet, rho: &CMat) -> Result<CMat> {
    let mut out = CMat::zeros(rho.nrows(), rho.ncols());
    for (&row, &w) in p.weights() {
        let pd = PauliString::from_row(p.n(), row)?.dense()?;
        out += (&pd * rho * &pd).map(|e| e * w);
    }
    Ok(out)
}

/// Compare `sum alpha^(0) P rho P` against `sum alpha^(1) P U rho U^dag P`
/// on each test state, in trace distance.
pub fn check_hiding_property(
    p0: &PaddingSet,
    p1: &PaddingSet,
    u: &CMat,
    test_states: &[CMat],
) -> Result<HidingPropertyReport> {
    let mut per_state = Vec::new();
    let mut max_td = 0.0f64;
    for rho in test_states {
        let lhs = padded_channel(p0, rho)?;
        let rhs = padded_channel(p1, &(u * rho * u.adjoint()))?;
        let td = trace_distance(&lhs, &rhs)?;
        max_td = max_td.max(td);
        per_state.push(Real(td));
    }
    Ok(HidingPropertyReport {
        pass: max_td <= HIDING_PROPERTY_TOL,
        max_trace_distance: Real(max_td),
        per_state,
    })
}

/// Default test-state set: all computational projectors, all (I ± P)/2^n
/// single-Pauli states, and `haar_count` Haar-random pure states.
pub fn default_test_states<R: rand::Rng + ?Sized>(
    n: usize,
    haar_count: usize,
    rng: &mut R,
) -> Result<Vec<CMat>> {
    let dim = 1usize << n;
    let mut states = Vec::new();
    for b in 0..dim {
        let mut m = CMat::zeros(dim, dim);
        m[(b, b)] = num_complex::Complex64::new(1.0, 0.0);
        states.push(m);
    }
    let scale = num_complex::Complex64::new(1.0 / dim as f64, 0.0);
    for row in 1..(1u64 << (2 * n)) {
        let pd = PauliString::from_row(n, row)?.dense()?;
        let id = CMat::identity(dim, dim);
        states.push((&id + &pd).map(|e| e * scale));
        states.push((&id - &pd).map(|e| e * scale));
    }
    for _ in 0..haar_count {
        let psi = crate::sim::haar_random_pure(crate::sim::Layout::single("t", n), rng)?;
        states.push(psi.density_matrix());
    }
    Ok(states)
}

/// Serializable padding description: support weights by Pauli text, the full
/// Walsh table, and any rows violating the support condition.
#[derive(Clone, Debug, Serialize)]
pub struct PaddingReport {
    pub support: Vec<(String, Real)>,
    pub walsh: Vec<(String, Real)>,
    pub violations: Vec<(String, Real)>,
    pub pass: bool,
}

pub fn padding_report(p: &PaddingSet, pf: &PauliSubspace) -> Result<PaddingReport> {
    let n = p.n();
    let support = p
        .weights()
        .iter()
        .map(|(&row, &w)| Ok((PauliString::from_row(n, row)?.to_string(), Real(w))))
        .collect::<Result<_>>()?;
    let walsh = walsh_transform(p)
        .into_iter()
        .map(|(row, h)| Ok((PauliString::from_row(n, row)?.to_string(), Real(h))))
        .collect::<Result<_>>()?;
    let rule = check_hiding_rule(p, pf)?;
    Ok(PaddingReport {
        support,
        walsh,
        violations: rule.violations,
        pass: rule.pass,
    })
}

/// Affine description of every weight vector satisfying normalization and
/// the Walsh-support equalities (nonnegativity is reported, not enforced).
#[derive(Clone, Debug)]
pub struct PaddingSolution {
    pub n: usize,
    /// The uniform distribution, which always satisfies the equalities.
    pub particular: Vec<f64>,
    /// Basis of the homogeneous solution space, one dense vector per row of
    /// the preserved subspace beyond the identity.
    pub nullspace: Vec<Vec<f64>>,
    pub note: String,
}

impl PaddingSolution {
    pub fn dimension(&self) -> usize {
        self.nullspace.len()
    }

    /// Least-squares coordinates of `weights - particular` in the nullspace
    /// basis, with the residual of the projection.
    pub fn project(&self, p: &PaddingSet) -> (Vec<f64>, f64) {
        let count = 1usize << (2 * self.n);
        let mut delta: Vec<f64> = (0..count)
            .map(|r| p.weight(r as u64) - self.particular[r])
            .collect();
        // The analytic basis vectors are orthogonal with norm^2 = count/16^n.
        let mut coords = Vec::new();
        for basis in &self.nullspace {
            let dot: f64 = basis.iter().zip(&delta).map(|(b, d)| b * d).sum();
            let nrm: f64 = basis.iter().map(|b| b * b).sum();
            let c = dot / nrm;
            for (d, b) in delta.iter_mut().zip(basis) {
                *d -= c * b;
            }
            coords.push(c);
        }
        let residual = delta.iter().map(|d| d.abs()).fold(0.0, f64::max);
        (coords, residual)
    }
}

/// Solve the hiding equalities in the Walsh domain: the transform is pinned
/// to 1 at the identity row and 0 outside the subspace, leaving one free
/// coefficient per nonzero subspace row.
pub fn solve_valid_paddings(pf: &PauliSubspace) -> Result<PaddingSolution> {
    let n = pf.n();
    if n > 3 {
        return Err(Error::Resource(format!(
            "valid-padding enumeration refused for n={n}"
        )));
    }
    let count = 1usize << (2 * n);
    let particular = vec![1.0 / count as f64; count];
    let mut nullspace = Vec::new();
    for y in pf.enumerate_rows() {
        if y == 0 {
            continue;
        }
        let basis: Vec<f64> = (0..count)
            .map(|x| {
                let sign = if symplectic_product(x as u64, y, n) == 0 {
                    1.0
                } else {
                    -1.0
                };
                sign / count as f64
            })
            .collect();
        nullspace.push(basis);
    }
    nullspace.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(PaddingSolution {
        n,
        particular,
        nullspace,
        note: "equalities only; nonnegativity must be checked per solution".into(),
    })
}
