//! Phase-exact n-qubit Pauli strings in binary symplectic form.
//!
//! A string is stored as bit vectors `x`, `z` plus an exponent of `i` mod 4.
//! The dense operator is `i^phase · i^(x·z) X_x Z_z`; with `phase == 0` this
//! is the canonical Hermitian representative of the `(x|z)` row, i.e. the
//! literal tensor product of the letters I, X, Y, Z.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Largest register for which dense Pauli matrices may be materialised.
pub const MAX_DENSE_QUBITS: usize = 12;

/// A phase-tracked Pauli string on `n` qubits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    /// Exponent of i relative to the Hermitian representative, mod 4.
    phase: u8,
}

const PHASES: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            x: 0,
            z: 0,
            phase: 0,
        }
    }

    /// The canonical Hermitian representative of an `(x, z)` bit pair.
    pub fn from_xz(n: usize, x: u64, z: u64) -> Result<Self> {
        if 2 * n > 64 {
            return Err(Error::Resource(format!("{n} qubits exceed bit storage")));
        }
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        if x & !mask != 0 || z & !mask != 0 {
            return Err(Error::Dimension(format!("bits beyond qubit count {n}")));
        }
        Ok(Self { n, x, z, phase: 0 })
    }

    /// Canonical representative of a packed `(x|z)` row (x in the low bits).
    pub fn from_row(n: usize, row: u64) -> Result<Self> {
        let mask = (1u64 << n) - 1;
        Self::from_xz(n, row & mask, (row >> n) & mask)
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase % 4;
        self
    }

    /// Single-qubit letter placed at `qubit`, identity elsewhere.
    pub fn single(n: usize, qubit: usize, letter: char) -> Result<Self> {
        if qubit >= n {
            return Err(Error::Dimension(format!("qubit {qubit} out of range")));
        }
        let bit = 1u64 << qubit;
        let (x, z) = match letter {
            'I' => (0, 0),
            'X' => (bit, 0),
            'Y' => (bit, bit),
            'Z' => (0, bit),
            _ => return Err(Error::Parse(format!("unknown Pauli letter {letter:?}"))),
        };
        Self::from_xz(n, x, z)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    /// Packed `(x|z)` row with x in the low bits.
    pub fn row(&self) -> u64 {
        self.x | (self.z << self.n)
    }

    /// Deterministic ordering key: the packed `(x|z)` row value.
    pub fn packed_key(&self) -> u64 {
        self.row()
    }

    pub fn is_identity_up_to_phase(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_multiple_of(2)
    }

    pub fn scalar(&self) -> Complex64 {
        PHASES[self.phase as usize]
    }

    fn check_width(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "pauli widths differ: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(())
    }

    /// Symplectic commutator bit: 0 if the operators commute, 1 otherwise.
    pub fn commutator(&self, other: &Self) -> Result<u8> {
        self.check_width(other)?;
        Ok(symplectic_product(self.row(), other.row(), self.n))
    }

    /// Phase-exact group product `self · other`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_width(other)?;
        let (xa, za) = (self.x, self.z);
        let (xb, zb) = (other.x, other.z);
        let x = xa ^ xb;
        let z = za ^ zb;
        // i^(xa·za) Xa Za · i^(xb·zb) Xb Zb = i^k · i^(x·z) X_x Z_z
        let mut k = self.phase as u32 + other.phase as u32;
        k += (xa & za).count_ones() + (xb & zb).count_ones() + 2 * (za & xb).count_ones();
        k += 4 - (x & z).count_ones() % 4;
        Ok(Self {
            n: self.n,
            x,
            z,
            phase: (k % 4) as u8,
        })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self {
            phase: (4 - self.phase) % 4,
            ..*self
        }
    }

    /// Entrywise complex conjugate: flips the sign once per Y letter.
    pub fn conjugated(&self) -> Self {
        let ys = (self.x & self.z).count_ones();
        Self {
            phase: ((4 - self.phase as u32 + 2 * ys) % 4) as u8,
            ..*self
        }
    }

    /// Tensor product; `self` takes the most significant qubits.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.n + other.n;
        if 2 * n > 64 {
            return Err(Error::Resource(format!("{n} qubits exceed bit storage")));
        }
        Ok(Self {
            n,
            x: (self.x << other.n) | other.x,
            z: (self.z << other.n) | other.z,
            phase: (self.phase + other.phase) % 4,
        })
    }

    /// Embed into a register of `total` qubits with this string acting on the
    /// `n` qubits starting at `offset` (qubit 0 being the most significant).
    pub fn embed(&self, total: usize, offset: usize) -> Result<Self> {
        if offset + self.n > total {
            return Err(Error::Dimension(format!(
                "embedding {} qubits at offset {offset} into {total}",
                self.n
            )));
        }
        Ok(Self {
            n: total,
            x: self.x << offset,
            z: self.z << offset,
            phase: self.phase,
        })
    }

    /// Dense matrix, qubit 0 most significant.
    pub fn dense(&self) -> Result<CMat> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::Resource(format!(
                "dense Pauli on {} qubits refused",
                self.n
            )));
        }
        let dim = 1usize << self.n;
        let global = PHASES[((self.phase as u32 + (self.x & self.z).count_ones()) % 4) as usize];
        let mut m = CMat::zeros(dim, dim);
        for col in 0..dim {
            // X_x Z_z |col> = (-1)^(z·col) |col ^ x>
            let mut zc = 0u32;
            for q in 0..self.n {
                let bit_pos = self.n - 1 - q; // qubit q <-> bit (n-1-q)
                if (self.z >> q) & 1 == 1 && (col >> bit_pos) & 1 == 1 {
                    zc += 1;
                }
            }
            let mut row = col;
            for q in 0..self.n {
                if (self.x >> q) & 1 == 1 {
                    row ^= 1 << (self.n - 1 - q);
                }
            }
            let sign = if zc.is_multiple_of(2) { 1.0 } else { -1.0 };
            m[(row, col)] = global * Complex64::new(sign, 0.0);
        }
        Ok(m)
    }
}

/// Symplectic product of two packed `(x|z)` rows of width 2n.
pub fn symplectic_product(a: u64, b: u64, n: usize) -> u8 {
    let mask = (1u64 << n) - 1;
    let (xa, za) = (a & mask, (a >> n) & mask);
    let (xb, zb) = (b & mask, (b >> n) & mask);
    (((xa & zb).count_ones() + (za & xb).count_ones()) % 2) as u8
}

/// Apply the symplectic form to a packed row: swap the x and z halves.
pub fn omega_row(a: u64, n: usize) -> u64 {
    let mask = (1u64 << n) - 1;
    ((a >> n) & mask) | ((a & mask) << n)
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}")?;
        for q in 0..self.n {
            let x = (self.x >> q) & 1;
            let z = (self.z >> q) & 1;
            let c = match (x, z) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, 1) => 'Z',
                _ => 'Y',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        // Accept both the ASCII '-' and the typeset minus sign.
        let s = s.trim().replace('\u{2212}', "-");
        let (phase, rest) = if let Some(r) = s.strip_prefix("+i") {
            (1u8, r)
        } else if let Some(r) = s.strip_prefix("-i") {
            (3u8, r)
        } else if let Some(r) = s.strip_prefix('i') {
            (1u8, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (2u8, r)
        } else if let Some(r) = s.strip_prefix('+') {
            (0u8, r)
        } else {
            (0u8, s.as_str())
        };
        if rest.is_empty() {
            return Err(Error::Parse("empty Pauli string".into()));
        }
        let n = rest.chars().count();
        if 2 * n > 64 {
            return Err(Error::Resource(format!("{n} qubits exceed bit storage")));
        }
        let mut x = 0u64;
        let mut z = 0u64;
        for (q, c) in rest.chars().enumerate() {
            let bit = 1u64 << q;
            match c {
                'I' => {}
                'X' => x |= bit,
                'Z' => z |= bit,
                'Y' => {
                    x |= bit;
                    z |= bit;
                }
                _ => return Err(Error::Parse(format!("unknown Pauli letter {c:?}"))),
            }
        }
        Ok(Self { n, x, z, phase })
    }
}
