//! Gate set of the Fock engine.
//!
//! Non-diagonal gate matrices are dense matrix exponentials of the truncated
//! generator, built at a padded internal dimension and cut back to the working
//! cutoff. The retained block then reproduces the infinite-dimensional matrix
//! elements, so `1 − ‖Mψ‖²` measures the population the untruncated gate would
//! move above the retained levels. Matrices are memoized per
//! (gate, parameters, cutoff).

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fock::{DensityOperator, FockState};

/// Gate application fails above this leakage.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-6;
/// Leakage worth reporting even when tolerated.
pub const TRUNCATION_WARN_TOL: f64 = 1e-8;

/// Padding added to the working cutoff when exponentiating generators, so the
/// retained block carries converged matrix elements.
fn padded_dim(cutoff: usize) -> usize {
    2 * cutoff + 16
}

/// One gate event on named modes.
///
/// Conventions: squeeze `exp[(r/2)(e^{−2iφ}a² − e^{2iφ}a†²)]`, beamsplitter
/// `exp[θ(e^{iφ}a_i†a_j − e^{−iφ}a_i a_j†)]` (θ = π/4 is 50:50), Kerr
/// `exp[iΦ n̂(n̂−1)]`, phase `exp[iφ n̂]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateOp {
    Displace {
        mode: usize,
        beta: Complex64,
    },
    Squeeze {
        mode: usize,
        r: f64,
        phi: f64,
    },
    BeamSplitter {
        mode_a: usize,
        mode_b: usize,
        theta: f64,
        phi: f64,
    },
    Phase {
        mode: usize,
        phi: f64,
    },
    Kerr {
        mode: usize,
        phi: f64,
    },
    Loss {
        mode: usize,
        eta: f64,
    },
}

impl GateOp {
    pub fn modes(&self) -> Vec<usize> {
        match self {
            GateOp::Displace { mode, .. }
            | GateOp::Squeeze { mode, .. }
            | GateOp::Phase { mode, .. }
            | GateOp::Kerr { mode, .. }
            | GateOp::Loss { mode, .. } => vec![*mode],
            GateOp::BeamSplitter { mode_a, mode_b, .. } => vec![*mode_a, *mode_b],
        }
    }

    pub fn is_gaussian(&self) -> bool {
        !matches!(self, GateOp::Kerr { .. })
    }

    pub fn validate(&self, mode_count: usize) -> Result<()> {
        for m in self.modes() {
            if m >= mode_count {
                return Err(SimError::InvalidMode {
                    mode: m,
                    mode_count,
                });
            }
        }
        if let GateOp::BeamSplitter { mode_a, mode_b, .. } = self {
            if mode_a == mode_b {
                return Err(SimError::InvalidParam(
                    "beamsplitter needs two distinct modes".into(),
                ));
            }
        }
        if let GateOp::Loss { eta, .. } = self {
            if !(0.0..=1.0).contains(eta) || !eta.is_finite() {
                return Err(SimError::InvalidEta(*eta));
            }
        }
        if let GateOp::Squeeze { r, .. } = self {
            if *r < 0.0 {
                return Err(SimError::InvalidParam("squeeze r must be ≥ 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(PartialEq, Eq, Hash, Clone)]
struct MatrixKey {
    kind: u8,
    cutoff: usize,
    params: [u64; 2],
}

static MATRIX_CACHE: Lazy<Mutex<HashMap<MatrixKey, Arc<DMatrix<Complex64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn cache_get_or_build(
    key: MatrixKey,
    build: impl FnOnce() -> DMatrix<Complex64>,
) -> Arc<DMatrix<Complex64>> {
    if let Some(hit) = MATRIX_CACHE.lock().unwrap().get(&key) {
        return Arc::clone(hit);
    }
    let built = Arc::new(build());
    MATRIX_CACHE
        .lock()
        .unwrap()
        .entry(key)
        .or_insert(built)
        .clone()
}

fn annihilation(dim: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// exp(G) for anti-Hermitian G, via eigendecomposition of H = −iG.
fn exp_antihermitian(g: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = g.map(|z| z * Complex64::new(0.0, -1.0));
    let eig = h.symmetric_eigen();
    let dim = g.nrows();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::new(0.0, lambda).exp();
        let col = eig.eigenvectors.column(k);
        for r in 0..dim {
            let vr = col[r] * phase;
            for c in 0..dim {
                out[(r, c)] += vr * col[c].conj();
            }
        }
    }
    out
}

fn displace_matrix_block(beta: Complex64, cutoff: usize) -> DMatrix<Complex64> {
    let dim = padded_dim(cutoff);
    let a = annihilation(dim);
    let g = &a.adjoint() * beta - &a * beta.conj();
    let full = exp_antihermitian(&g);
    DMatrix::from(full.view((0, 0), (cutoff, cutoff)))
}

fn squeeze_matrix_block(r: f64, phi: f64, cutoff: usize) -> DMatrix<Complex64> {
    let dim = padded_dim(cutoff);
    let a = annihilation(dim);
    let a2 = &a * &a;
    let half = Complex64::new(r / 2.0, 0.0);
    let e_m = Complex64::new(0.0, -2.0 * phi).exp();
    let e_p = Complex64::new(0.0, 2.0 * phi).exp();
    let g = &a2 * (half * e_m) - a2.adjoint() * (half * e_p);
    let full = exp_antihermitian(&g);
    DMatrix::from(full.view((0, 0), (cutoff, cutoff)))
}

/// Beamsplitter matrix on the ordered pair space (row/col index `n_a·d + n_b`).
///
/// Built block-exactly: the generator conserves total photon number, so each
/// total-photon block is exponentiated in closed dimension and entries are
/// kept only where both single-mode indices stay below the cutoff.
fn beamsplitter_pair_matrix(theta: f64, phi: f64, cutoff: usize) -> DMatrix<Complex64> {
    let d = cutoff;
    let mut out = DMatrix::<Complex64>::zeros(d * d, d * d);
    let e_p = Complex64::new(0.0, phi).exp();
    let e_m = Complex64::new(0.0, -phi).exp();
    for total in 0..=(2 * d - 2) {
        let block = total + 1; // basis |k, total-k⟩, k = 0..=total
        let mut g = DMatrix::<Complex64>::zeros(block, block);
        for k in 0..total {
            // a†_a a_b : |k, total−k⟩ → |k+1, total−k−1⟩
            let c = (((k + 1) * (total - k)) as f64).sqrt();
            g[(k + 1, k)] = e_p * (theta * c);
            g[(k, k + 1)] = -e_m * (theta * c);
        }
        let u = exp_antihermitian(&g);
        for ka in 0..=total {
            let kb = total - ka;
            if ka >= d || kb >= d {
                continue;
            }
            for na in 0..=total {
                let nb = total - na;
                if na >= d || nb >= d {
                    continue;
                }
                out[(ka * d + kb, na * d + nb)] = u[(ka, na)];
            }
        }
    }
    out
}

/// Dense matrix of a gate at a given cutoff: `d×d` for single-mode gates,
/// `d²×d²` on the ordered pair space for the beamsplitter. Loss has no
/// unitary matrix and is rejected.
pub fn gate_matrix(op: &GateOp, cutoff: usize) -> Result<DMatrix<Complex64>> {
    match op {
        GateOp::Displace { beta, .. } => Ok(displace_cached(*beta, cutoff).as_ref().clone()),
        GateOp::Squeeze { r, phi, .. } => Ok(squeeze_cached(*r, *phi, cutoff).as_ref().clone()),
        GateOp::BeamSplitter { theta, phi, .. } => {
            Ok(beamsplitter_cached(*theta, *phi, cutoff).as_ref().clone())
        }
        GateOp::Phase { phi, .. } => Ok(DMatrix::from_diagonal(&DVector::from_iterator(
            cutoff,
            (0..cutoff).map(|n| Complex64::new(0.0, *phi * n as f64).exp()),
        ))),
        GateOp::Kerr { phi, .. } => Ok(DMatrix::from_diagonal(&DVector::from_iterator(
            cutoff,
            (0..cutoff).map(|n| Complex64::new(0.0, *phi * (n * n.saturating_sub(1)) as f64).exp()),
        ))),
        GateOp::Loss { .. } => Err(SimError::InvalidParam(
            "loss is a channel, not a unitary gate".into(),
        )),
    }
}

fn displace_cached(beta: Complex64, cutoff: usize) -> Arc<DMatrix<Complex64>> {
    cache_get_or_build(
        MatrixKey {
            kind: 0,
            cutoff,
            params: [beta.re.to_bits(), beta.im.to_bits()],
        },
        || displace_matrix_block(beta, cutoff),
    )
}

fn squeeze_cached(r: f64, phi: f64, cutoff: usize) -> Arc<DMatrix<Complex64>> {
    cache_get_or_build(
        MatrixKey {
            kind: 1,
            cutoff,
            params: [r.to_bits(), phi.to_bits()],
        },
        || squeeze_matrix_block(r, phi, cutoff),
    )
}

fn beamsplitter_cached(theta: f64, phi: f64, cutoff: usize) -> Arc<DMatrix<Complex64>> {
    cache_get_or_build(
        MatrixKey {
            kind: 2,
            cutoff,
            params: [theta.to_bits(), phi.to_bits()],
        },
        || beamsplitter_pair_matrix(theta, phi, cutoff),
    )
}

/// Exact displacement matrix elements `⟨m|D(α)|n⟩` on the truncated block,
/// from the closed Laguerre form. Independent of the matrix-exponential route.
pub fn displacement_matrix(alpha: Complex64, dim: usize) -> DMatrix<Complex64> {
    let x = alpha.norm_sqr();
    let arg = alpha.arg();
    let ln_fact: Vec<f64> = {
        let mut v = vec![0.0f64; dim + 1];
        for n in 1..=dim {
            v[n] = v[n - 1] + (n as f64).ln();
        }
        v
    };
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for offset in 0..dim {
        // L_k^{(offset)}(x) by upward recurrence
        let count = dim - offset;
        let mut lag = vec![0.0f64; count];
        if count > 0 {
            lag[0] = 1.0;
        }
        if count > 1 {
            lag[1] = 1.0 + offset as f64 - x;
        }
        for k in 1..count.saturating_sub(1) {
            let kf = k as f64;
            lag[k + 1] = ((2.0 * kf + 1.0 + offset as f64 - x) * lag[k]
                - (kf + offset as f64) * lag[k - 1])
                / (kf + 1.0);
        }
        for n in 0..count {
            let m = n + offset;
            let ln_pre = if x > 0.0 {
                0.5 * (ln_fact[n] - ln_fact[m]) + offset as f64 * x.sqrt().ln() - x / 2.0
            } else if offset == 0 {
                0.0
            } else {
                f64::NEG_INFINITY
            };
            let mag = ln_pre.exp() * lag[n];
            let phase = Complex64::new(0.0, arg * offset as f64).exp();
            // row m, col n: α^{m−n}; row n, col m: (−ᾱ)^{m−n}
            out[(m, n)] = phase * mag;
            if offset > 0 {
                let sign = if offset % 2 == 0 { 1.0 } else { -1.0 };
                out[(n, m)] = phase.conj() * (sign * mag);
            }
        }
    }
    out
}

fn apply_single_mode_matrix(
    amplitudes: &[Complex64],
    cutoff: usize,
    mode_count: usize,
    mode: usize,
    m: &DMatrix<Complex64>,
) -> Vec<Complex64> {
    let d = cutoff;
    let stride = cutoff.pow((mode_count - 1 - mode) as u32);
    let outer = cutoff.pow(mode as u32);
    let mut out = vec![Complex64::ZERO; amplitudes.len()];
    let mut gathered = vec![Complex64::ZERO; d];
    for o in 0..outer {
        let base_o = o * d * stride;
        for inner in 0..stride {
            let base = base_o + inner;
            for n in 0..d {
                gathered[n] = amplitudes[base + n * stride];
            }
            for r in 0..d {
                let mut acc = Complex64::ZERO;
                for n in 0..d {
                    acc += m[(r, n)] * gathered[n];
                }
                out[base + r * stride] = acc;
            }
        }
    }
    out
}

fn apply_pair_matrix(
    amplitudes: &[Complex64],
    cutoff: usize,
    mode_count: usize,
    mode_a: usize,
    mode_b: usize,
    m: &DMatrix<Complex64>,
) -> Vec<Complex64> {
    let d = cutoff;
    let stride_a = cutoff.pow((mode_count - 1 - mode_a) as u32);
    let stride_b = cutoff.pow((mode_count - 1 - mode_b) as u32);
    let dim = amplitudes.len();
    let mut out = vec![Complex64::ZERO; dim];
    let mut gathered = vec![Complex64::ZERO; d * d];
    // Enumerate base indices where the digits of both modes are zero.
    let mut bases = Vec::with_capacity(dim / (d * d));
    for idx in 0..dim {
        if (idx / stride_a) % d == 0 && (idx / stride_b) % d == 0 {
            bases.push(idx);
        }
    }
    for &base in &bases {
        for na in 0..d {
            for nb in 0..d {
                gathered[na * d + nb] = amplitudes[base + na * stride_a + nb * stride_b];
            }
        }
        for ra in 0..d {
            for rb in 0..d {
                let row = ra * d + rb;
                let mut acc = Complex64::ZERO;
                for col in 0..d * d {
                    acc += m[(row, col)] * gathered[col];
                }
                out[base + ra * stride_a + rb * stride_b] = acc;
            }
        }
    }
    out
}

fn apply_diagonal(
    amplitudes: &[Complex64],
    cutoff: usize,
    mode_count: usize,
    mode: usize,
    phases: &[Complex64],
) -> Vec<Complex64> {
    let stride = cutoff.pow((mode_count - 1 - mode) as u32);
    amplitudes
        .iter()
        .enumerate()
        .map(|(idx, a)| a * phases[(idx / stride) % cutoff])
        .collect()
}

fn kerr_phases(phi: f64, cutoff: usize) -> Vec<Complex64> {
    (0..cutoff)
        .map(|n| Complex64::new(0.0, phi * (n * n.saturating_sub(1)) as f64).exp())
        .collect()
}

fn phase_phases(phi: f64, cutoff: usize) -> Vec<Complex64> {
    (0..cutoff)
        .map(|n| Complex64::new(0.0, phi * n as f64).exp())
        .collect()
}

/// Apply a gate and report the truncation leakage of this application.
pub fn apply_gate_with_report(
    state: &FockState,
    op: &GateOp,
    tolerance: f64,
) -> Result<(FockState, f64)> {
    op.validate(state.mode_count)?;
    let d = state.cutoff;
    let raw = match op {
        GateOp::Phase { mode, phi } => apply_diagonal(
            &state.amplitudes,
            d,
            state.mode_count,
            *mode,
            &phase_phases(*phi, d),
        ),
        GateOp::Kerr { mode, phi } => apply_diagonal(
            &state.amplitudes,
            d,
            state.mode_count,
            *mode,
            &kerr_phases(*phi, d),
        ),
        GateOp::Displace { mode, beta } => {
            let m = displace_cached(*beta, d);
            apply_single_mode_matrix(&state.amplitudes, d, state.mode_count, *mode, &m)
        }
        GateOp::Squeeze { mode, r, phi } => {
            let m = squeeze_cached(*r, *phi, d);
            apply_single_mode_matrix(&state.amplitudes, d, state.mode_count, *mode, &m)
        }
        GateOp::BeamSplitter {
            mode_a,
            mode_b,
            theta,
            phi,
        } => {
            let m = beamsplitter_cached(*theta, *phi, d);
            apply_pair_matrix(&state.amplitudes, d, state.mode_count, *mode_a, *mode_b, &m)
        }
        GateOp::Loss { .. } => return Err(SimError::LossOnPureState),
    };
    let norm_sqr: f64 = raw.iter().map(|a| a.norm_sqr()).sum();
    let leakage = (1.0 - norm_sqr).max(0.0);
    if leakage > tolerance {
        return Err(SimError::Truncation {
            leakage,
            tolerance,
        });
    }
    let inv = 1.0 / norm_sqr.sqrt();
    let amplitudes = raw.into_iter().map(|a| a * inv).collect();
    Ok((
        FockState {
            mode_count: state.mode_count,
            cutoff: d,
            amplitudes,
            norm_weight: state.norm_weight,
        },
        leakage,
    ))
}

/// Apply a gate at the default truncation tolerance.
pub fn apply_gate(state: &FockState, op: &GateOp) -> Result<FockState> {
    apply_gate_with_report(state, op, DEFAULT_TRUNCATION_TOL).map(|(s, _)| s)
}

/// Apply a gate to a density operator (`UρU†`, or the loss channel).
pub fn apply_gate_rho(rho: &DensityOperator, op: &GateOp) -> Result<DensityOperator> {
    op.validate(rho.mode_count)?;
    if let GateOp::Loss { mode, eta } = op {
        return apply_loss(rho, *mode, *eta);
    }
    let d = rho.cutoff;
    let dim = rho.dim();
    let transform = |m_full: &dyn Fn(&[Complex64]) -> Vec<Complex64>| -> DMatrix<Complex64> {
        // ρ → MρM†: apply M column-wise, then the conjugate row-wise.
        let mut cols = DMatrix::<Complex64>::zeros(dim, dim);
        for c in 0..dim {
            let col: Vec<Complex64> = (0..dim).map(|r| rho.matrix[(r, c)]).collect();
            let new_col = m_full(&col);
            for r in 0..dim {
                cols[(r, c)] = new_col[r];
            }
        }
        let mut out = DMatrix::<Complex64>::zeros(dim, dim);
        for r in 0..dim {
            let row: Vec<Complex64> = (0..dim).map(|c| cols[(r, c)].conj()).collect();
            let new_row = m_full(&row);
            for c in 0..dim {
                out[(r, c)] = new_row[c].conj();
            }
        }
        out
    };
    let mc = rho.mode_count;
    let raw = match op {
        GateOp::Phase { mode, phi } => {
            let ph = phase_phases(*phi, d);
            transform(&|v: &[Complex64]| apply_diagonal(v, d, mc, *mode, &ph))
        }
        GateOp::Kerr { mode, phi } => {
            let ph = kerr_phases(*phi, d);
            transform(&|v: &[Complex64]| apply_diagonal(v, d, mc, *mode, &ph))
        }
        GateOp::Displace { mode, beta } => {
            let m = displace_cached(*beta, d);
            transform(&|v: &[Complex64]| apply_single_mode_matrix(v, d, mc, *mode, &m))
        }
        GateOp::Squeeze { mode, r, phi } => {
            let m = squeeze_cached(*r, *phi, d);
            transform(&|v: &[Complex64]| apply_single_mode_matrix(v, d, mc, *mode, &m))
        }
        GateOp::BeamSplitter {
            mode_a,
            mode_b,
            theta,
            phi,
        } => {
            let m = beamsplitter_cached(*theta, *phi, d);
            transform(&|v: &[Complex64]| apply_pair_matrix(v, d, mc, *mode_a, *mode_b, &m))
        }
        GateOp::Loss { .. } => unreachable!(),
    };
    let tr: f64 = (0..dim).map(|i| raw[(i, i)].re).sum();
    let leakage = (1.0 - tr).max(0.0);
    if leakage > DEFAULT_TRUNCATION_TOL {
        return Err(SimError::Truncation {
            leakage,
            tolerance: DEFAULT_TRUNCATION_TOL,
        });
    }
    Ok(DensityOperator {
        mode_count: rho.mode_count,
        cutoff: d,
        matrix: raw / Complex64::new(tr, 0.0),
        trace_weight: rho.trace_weight,
    })
}

/// Pure-loss channel on one mode: Kraus sum with
/// `K_k = Σ_n √(C(n,k) η^{n−k} (1−η)^k) |n−k⟩⟨n|`. Trace-preserving on the
/// truncated space by binomial completeness.
pub fn apply_loss(rho: &DensityOperator, mode: usize, eta: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
        return Err(SimError::InvalidEta(eta));
    }
    if mode >= rho.mode_count {
        return Err(SimError::InvalidMode {
            mode,
            mode_count: rho.mode_count,
        });
    }
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let d = rho.cutoff;
    let dim = rho.dim();
    let mc = rho.mode_count;
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..d {
        let mut kraus = DMatrix::<Complex64>::zeros(d, d);
        for n in k..d {
            let coeff =
                (binomial(n, k) * eta.powi((n - k) as i32) * (1.0 - eta).powi(k as i32)).sqrt();
            kraus[(n - k, n)] = Complex64::new(coeff, 0.0);
        }
        // K ρ K†, one column/row sweep each
        let mut cols = DMatrix::<Complex64>::zeros(dim, dim);
        for c in 0..dim {
            let col: Vec<Complex64> = (0..dim).map(|r| rho.matrix[(r, c)]).collect();
            let new_col = apply_single_mode_matrix(&col, d, mc, mode, &kraus);
            for r in 0..dim {
                cols[(r, c)] = new_col[r];
            }
        }
        for r in 0..dim {
            let row: Vec<Complex64> = (0..dim).map(|c| cols[(r, c)].conj()).collect();
            let new_row = apply_single_mode_matrix(&row, d, mc, mode, &kraus);
            for c in 0..dim {
                out[(r, c)] += new_row[c].conj();
            }
        }
    }
    Ok(DensityOperator {
        mode_count: mc,
        cutoff: d,
        matrix: out,
        trace_weight: rho.trace_weight,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
