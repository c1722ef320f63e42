//! Exact state-vector and density-matrix evolution in a truncated multimode
//! Fock basis.
//!
//! Amplitude layout: mode 0 is the slowest-varying index, so for `m` modes at
//! cutoff `d` the flat index of the configuration `(n_0, ..., n_{m-1})` is
//! `n_0 d^{m-1} + n_1 d^{m-2} + ... + n_{m-1}`. Snapshots serialize amplitudes
//! in exactly this order.
//!
//! Conventions (fixed for the whole crate): hbar = 1, `x = (a + a†)/√2`,
//! `p = (a − a†)/(i√2)`, vacuum quadrature variance 1/2.

mod gates;

pub use gates::{
    apply_gate, apply_gate_rho, apply_gate_with_report, apply_loss, displacement_matrix,
    gate_matrix, GateOp, DEFAULT_TRUNCATION_TOL, TRUNCATION_WARN_TOL,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Result, SimError};

/// Pure multimode state in the truncated Fock basis.
///
/// Amplitudes are kept normalized; `norm_weight` accumulates the probability
/// weight picked up through measurement conditioning.
#[derive(Debug, Clone)]
pub struct FockState {
    pub mode_count: usize,
    pub cutoff: usize,
    pub amplitudes: Vec<Complex64>,
    pub norm_weight: f64,
}

/// Mixed multimode state in the same truncated basis.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    pub mode_count: usize,
    pub cutoff: usize,
    pub matrix: DMatrix<Complex64>,
    pub trace_weight: f64,
}

impl FockState {
    /// Vacuum state on `mode_count` modes.
    pub fn vacuum(mode_count: usize, cutoff: usize) -> Self {
        assert!(mode_count >= 1 && cutoff >= 2);
        let mut amplitudes = vec![Complex64::ZERO; cutoff.pow(mode_count as u32)];
        amplitudes[0] = Complex64::ONE;
        FockState {
            mode_count,
            cutoff,
            amplitudes,
            norm_weight: 1.0,
        }
    }

    /// Product Fock state `|n_0, n_1, ...⟩`.
    pub fn fock(occupations: &[usize], cutoff: usize) -> Self {
        assert!(!occupations.is_empty() && cutoff >= 2);
        assert!(occupations.iter().all(|&n| n < cutoff));
        let mut state = Self::vacuum(occupations.len(), cutoff);
        state.amplitudes[0] = Complex64::ZERO;
        let idx = state.flat_index(occupations);
        state.amplitudes[idx] = Complex64::ONE;
        state
    }

    /// Coherent state `|α⟩` from the closed-form amplitudes
    /// `e^{−|α|²/2} α^n/√(n!)`, renormalized on the truncated basis.
    pub fn coherent(alpha: Complex64, cutoff: usize) -> Self {
        let pre = (-alpha.norm_sqr() / 2.0).exp();
        let mut amps = Vec::with_capacity(cutoff);
        let mut term = Complex64::new(pre, 0.0);
        amps.push(term);
        for n in 1..cutoff {
            term *= alpha / (n as f64).sqrt();
            amps.push(term);
        }
        Self::from_amplitudes(1, cutoff, amps).expect("coherent amplitudes are nonzero")
    }

    /// Build from raw amplitudes, normalizing them.
    pub fn from_amplitudes(
        mode_count: usize,
        cutoff: usize,
        mut amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        let expected = cutoff.pow(mode_count as u32);
        if amplitudes.len() != expected {
            return Err(SimError::ShapeMismatch(format!(
                "expected {} amplitudes, got {}",
                expected,
                amplitudes.len()
            )));
        }
        let n2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if n2 <= 0.0 {
            return Err(SimError::ZeroNorm);
        }
        let inv = 1.0 / n2.sqrt();
        for a in &mut amplitudes {
            *a *= inv;
        }
        Ok(FockState {
            mode_count,
            cutoff,
            amplitudes,
            norm_weight: 1.0,
        })
    }

    /// Tensor product `self ⊗ other` (equal cutoffs required).
    pub fn tensor(&self, other: &FockState) -> Result<FockState> {
        if self.cutoff != other.cutoff {
            return Err(SimError::ShapeMismatch(format!(
                "cutoff {} vs {}",
                self.cutoff, other.cutoff
            )));
        }
        let mode_count = self.mode_count + other.mode_count;
        let mut amplitudes =
            Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ok(FockState {
            mode_count,
            cutoff: self.cutoff,
            amplitudes,
            norm_weight: self.norm_weight * other.norm_weight,
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Stride of `mode` in the flat amplitude index.
    pub fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((self.mode_count - 1 - mode) as u32)
    }

    pub fn flat_index(&self, occupations: &[usize]) -> usize {
        debug_assert_eq!(occupations.len(), self.mode_count);
        occupations
            .iter()
            .fold(0, |acc, &n| acc * self.cutoff + n)
    }

    pub fn occupation_of(&self, flat: usize) -> Vec<usize> {
        let mut occ = vec![0; self.mode_count];
        let mut rest = flat;
        for k in (0..self.mode_count).rev() {
            occ[k] = rest % self.cutoff;
            rest /= self.cutoff;
        }
        occ
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.mode_count {
            return Err(SimError::InvalidMode {
                mode,
                mode_count: self.mode_count,
            });
        }
        Ok(())
    }

    /// Photon-number parity expectation `⟨(−1)^{Σ n}⟩`.
    pub fn parity(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(idx, a)| {
                let total: usize = self.occupation_of(idx).iter().sum();
                if total % 2 == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum()
    }

    /// Mean photon number in one mode.
    pub fn mean_photons(&self, mode: usize) -> Result<f64> {
        self.check_mode(mode)?;
        let stride = self.stride(mode);
        let mut total = 0.0;
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let n = (idx / stride) % self.cutoff;
            total += n as f64 * a.norm_sqr();
        }
        Ok(total)
    }

    /// Population of the top retained Fock level of each mode.
    pub fn top_level_population(&self) -> Vec<f64> {
        let mut tops = vec![0.0; self.mode_count];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let mut rest = idx;
            for k in (0..self.mode_count).rev() {
                if rest % self.cutoff == self.cutoff - 1 {
                    tops[k] += p;
                }
                rest /= self.cutoff;
            }
        }
        tops
    }

    /// Promote to a density operator `|ψ⟩⟨ψ|`.
    pub fn promote(&self) -> DensityOperator {
        let dim = self.dim();
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        let matrix = &v * v.adjoint();
        DensityOperator {
            mode_count: self.mode_count,
            cutoff: self.cutoff,
            matrix: DMatrix::from(matrix.view((0, 0), (dim, dim))),
            trace_weight: self.norm_weight,
        }
    }

    /// Photon addition `a†` on one mode. Returns the normalized image and the
    /// relative heralding weight (squared norm of the raw image).
    pub fn photon_add(&self, mode: usize, top_tol: f64) -> Result<(FockState, f64)> {
        self.check_mode(mode)?;
        let top = self.top_level_population()[mode];
        if top > top_tol {
            return Err(SimError::Truncation {
                leakage: top,
                tolerance: top_tol,
            });
        }
        let stride = self.stride(mode);
        let d = self.cutoff;
        let mut out = vec![Complex64::ZERO; self.dim()];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let n = (idx / stride) % d;
            if n + 1 < d {
                out[idx + stride] += a * ((n + 1) as f64).sqrt();
            }
        }
        self.normalized_image(out)
    }

    /// Photon subtraction `a` on one mode.
    pub fn photon_subtract(&self, mode: usize) -> Result<(FockState, f64)> {
        self.check_mode(mode)?;
        let stride = self.stride(mode);
        let d = self.cutoff;
        let mut out = vec![Complex64::ZERO; self.dim()];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let n = (idx / stride) % d;
            if n > 0 {
                out[idx - stride] += a * (n as f64).sqrt();
            }
        }
        self.normalized_image(out)
    }

    fn normalized_image(&self, mut out: Vec<Complex64>) -> Result<(FockState, f64)> {
        let weight: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        if weight < 1e-14 {
            return Err(SimError::ZeroNorm);
        }
        let inv = 1.0 / weight.sqrt();
        for a in &mut out {
            *a *= inv;
        }
        Ok((
            FockState {
                mode_count: self.mode_count,
                cutoff: self.cutoff,
                amplitudes: out,
                norm_weight: self.norm_weight,
            },
            weight,
        ))
    }

    /// Inner product `⟨self|other⟩`.
    pub fn overlap(&self, other: &FockState) -> Result<Complex64> {
        self.check_same_shape(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub(crate) fn check_same_shape(&self, other: &FockState) -> Result<()> {
        if self.mode_count != other.mode_count || self.cutoff != other.cutoff {
            return Err(SimError::ShapeMismatch(format!(
                "({} modes, cutoff {}) vs ({} modes, cutoff {})",
                self.mode_count, self.cutoff, other.mode_count, other.cutoff
            )));
        }
        Ok(())
    }
}

impl DensityOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((self.mode_count - 1 - mode) as u32)
    }

    /// Probability of finding `n` photons in `mode`.
    pub fn mode_population(&self, mode: usize, n: usize) -> f64 {
        let stride = self.stride(mode);
        let d = self.cutoff;
        (0..self.dim())
            .filter(|idx| (idx / stride) % d == n)
            .map(|idx| self.matrix[(idx, idx)].re)
            .sum()
    }

    /// Partial trace over one mode.
    pub fn partial_trace(&self, mode: usize) -> Result<DensityOperator> {
        if mode >= self.mode_count {
            return Err(SimError::InvalidMode {
                mode,
                mode_count: self.mode_count,
            });
        }
        assert!(self.mode_count >= 2, "cannot trace out the last mode");
        let d = self.cutoff;
        let stride = self.stride(mode);
        let new_mode_count = self.mode_count - 1;
        let new_dim = d.pow(new_mode_count as u32);
        let mut out = DMatrix::<Complex64>::zeros(new_dim, new_dim);
        // Map a reduced flat index to a full index with digit 0 at `mode`.
        let expand = |reduced: usize| -> usize {
            let hi_div = stride; // d^(m-1-mode)
            let hi = reduced / hi_div;
            let lo = reduced % hi_div;
            hi * hi_div * d + lo
        };
        for r in 0..new_dim {
            let rb = expand(r);
            for c in 0..new_dim {
                let cb = expand(c);
                let mut acc = Complex64::ZERO;
                for n in 0..d {
                    acc += self.matrix[(rb + n * stride, cb + n * stride)];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(DensityOperator {
            mode_count: new_mode_count,
            cutoff: d,
            matrix: out,
            trace_weight: self.trace_weight,
        })
    }

    /// Hermiticity deficit `max |ρ − ρ†|`.
    pub fn hermiticity_deficit(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim() {
            for c in r..self.dim() {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }
}

/// Fidelity between two pure states: `|⟨a|b⟩|²`.
pub fn fidelity_pure(a: &FockState, b: &FockState) -> Result<f64> {
    Ok(a.overlap(b)?.norm_sqr())
}

/// Fidelity `⟨ψ|ρ|ψ⟩` between a pure state and a density operator.
pub fn fidelity_pure_mixed(psi: &FockState, rho: &DensityOperator) -> Result<f64> {
    if psi.mode_count != rho.mode_count || psi.cutoff != rho.cutoff {
        return Err(SimError::ShapeMismatch(
            "pure/mixed fidelity on mismatched shapes".into(),
        ));
    }
    let v = nalgebra::DVector::from_column_slice(&psi.amplitudes);
    let rv = &rho.matrix * &v;
    Ok(v.dotc(&rv).re)
}

/// Uhlmann fidelity between two density operators.
pub fn fidelity_mixed(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.mode_count != b.mode_count || a.cutoff != b.cutoff {
        return Err(SimError::ShapeMismatch(
            "mixed fidelity on mismatched shapes".into(),
        ));
    }
    let sqrt_a = hermitian_sqrt(&a.matrix);
    let inner = &sqrt_a * &b.matrix * &sqrt_a;
    let eig = inner.symmetric_eigen();
    let tr: f64 = eig
        .eigenvalues
        .iter()
        .map(|&l| if l > 0.0 { l.sqrt() } else { 0.0 })
        .sum();
    Ok(tr * tr)
}

fn hermitian_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let vals: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l > 0.0 { l.sqrt() } else { 0.0 })
        .collect();
    let mut out = DMatrix::<Complex64>::zeros(m.nrows(), m.ncols());
    for (k, &s) in vals.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                out[(r, c)] += col[r] * col[c].conj() * s;
            }
        }
    }
    out
}

/// Per-mode truncation summary.
///
/// `top_level_population` is the population of level `d−1` exactly;
/// `edge_population` adds level `d−2`, which catches parity-structured states
/// (squeezed vacuum occupies even levels only, so a single top level can read
/// zero while the tail is already pressing against the cutoff). The guard
/// value `worst` uses the edge population.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub top_level_population: Vec<f64>,
    pub edge_population: Vec<f64>,
    pub worst: f64,
}

pub fn truncation_report(state: &FockState) -> TruncationReport {
    let tops = state.top_level_population();
    let d = state.cutoff;
    let mut edges = tops.clone();
    if d >= 3 {
        for (idx, a) in state.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let mut rest = idx;
            for k in (0..state.mode_count).rev() {
                if rest % d == d - 2 {
                    edges[k] += p;
                }
                rest /= d;
            }
        }
    }
    let worst = edges.iter().cloned().fold(0.0, f64::max);
    TruncationReport {
        top_level_population: tops,
        edge_population: edges,
        worst,
    }
}

impl Serialize for FockState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("FockState", 4)?;
        s.serialize_field("mode_count", &self.mode_count)?;
        s.serialize_field("cutoff", &self.cutoff)?;
        let pairs: Vec<[f64; 2]> = self.amplitudes.iter().map(|a| [a.re, a.im]).collect();
        s.serialize_field("amplitudes", &pairs)?;
        s.serialize_field("norm_weight", &self.norm_weight)?;
        s.end()
    }
}

#[derive(Deserialize)]
struct FockSnapshot {
    mode_count: usize,
    cutoff: usize,
    amplitudes: Vec<[f64; 2]>,
    norm_weight: f64,
}

impl<'de> Deserialize<'de> for FockState {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let snap = FockSnapshot::deserialize(deserializer)?;
        let amplitudes: Vec<Complex64> = snap
            .amplitudes
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        if amplitudes.len() != snap.cutoff.pow(snap.mode_count as u32) {
            return Err(serde::de::Error::custom("amplitude length mismatch"));
        }
        Ok(FockState {
            mode_count: snap.mode_count,
            cutoff: snap.cutoff,
            amplitudes,
            norm_weight: snap.norm_weight,
        })
    }
}
