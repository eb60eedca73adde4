//! Dense matrices for the primitive gate catalog.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::pauli::CMat;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

pub fn hadamard() -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_row_slice(2, 2, &[c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)])
}

pub fn s_gate() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 1.)])
}

pub fn sdg_gate() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., -1.)])
}

pub fn t_gate() -> CMat {
    let e = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), e])
}

pub fn rz(theta: f64) -> CMat {
    let e = Complex64::from_polar(1.0, theta);
    CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), e])
}

pub fn rx(theta: f64) -> CMat {
    let (s, co) = (theta / 2.0).sin_cos();
    CMat::from_row_slice(2, 2, &[c(co, 0.), c(0., -s), c(0., -s), c(co, 0.)])
}

pub fn cx() -> CMat {
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = c(1., 0.);
    m[(1, 1)] = c(1., 0.);
    m[(2, 3)] = c(1., 0.);
    m[(3, 2)] = c(1., 0.);
    m
}

pub fn cz() -> CMat {
    let mut m = identity(4);
    m[(3, 3)] = c(-1., 0.);
    m
}

pub fn swap() -> CMat {
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = c(1., 0.);
    m[(1, 2)] = c(1., 0.);
    m[(2, 1)] = c(1., 0.);
    m[(3, 3)] = c(1., 0.);
    m
}

/// Block gate |0><0| ⊗ I + |1><1| ⊗ u with the control as the most
/// significant qubit.
pub fn controlled(u: &CMat) -> CMat {
    let d = u.nrows();
    let mut m = identity(2 * d);
    for i in 0..d {
        for j in 0..d {
            m[(d + i, d + j)] = u[(i, j)];
        }
    }
    m
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Embed a gate on the listed target qubits into an `n`-qubit register
/// (qubit 0 most significant, `targets[0]` the gate's most significant qubit).
pub fn embed(n: usize, targets: &[usize], u: &CMat) -> CMat {
    let k = targets.len();
    assert_eq!(u.nrows(), 1 << k, "gate size does not match target count");
    let dim = 1usize << n;
    let bit = |q: usize| 1usize << (n - 1 - q);
    let mut rest_positions = Vec::new();
    for q in 0..n {
        if !targets.contains(&q) {
            rest_positions.push(bit(q));
        }
    }
    let gather = |a: usize| -> usize {
        let mut idx = 0usize;
        for (j, &t) in targets.iter().enumerate() {
            if (a >> (k - 1 - j)) & 1 == 1 {
                idx |= bit(t);
            }
        }
        idx
    };
    let mut m = CMat::zeros(dim, dim);
    for r in 0..(1usize << rest_positions.len()) {
        let mut base = 0usize;
        for (j, &pos) in rest_positions.iter().enumerate() {
            if (r >> j) & 1 == 1 {
                base |= pos;
            }
        }
        for a in 0..(1 << k) {
            for b in 0..(1 << k) {
                m[(base | gather(a), base | gather(b))] = u[(a, b)];
            }
        }
    }
    m
}

pub fn is_unitary(m: &CMat, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let prod = m.adjoint() * m;
    let id = DMatrix::identity(m.nrows(), m.ncols());
    (prod - id).iter().all(|e| e.norm() <= tol)
}

pub fn max_norm_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|e| e.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_gates_are_unitary() {
        for g in [
            pauli_x(),
            pauli_y(),
            pauli_z(),
            hadamard(),
            s_gate(),
            sdg_gate(),
            t_gate(),
            rz(1.234),
            rx(-0.77),
            cx(),
            cz(),
            swap(),
        ] {
            assert!(is_unitary(&g, 1e-12));
        }
    }

    #[test]
    fn controlled_embeds_target_block() {
        let cpx = controlled(&pauli_x());
        assert_eq!(max_norm_diff(&cpx, &cx()), 0.0);
    }
}
