//! Projective and sampled measurements with conditional-state output:
//! homodyne detection, photon-number-resolving detection, heralded Fock
//! sources.
//!
//! Quadrature eigenfunctions follow the crate convention (vacuum variance
//! 1/2): `⟨x|n⟩ = π^{−1/4} (2^n n!)^{−1/2} H_n(x) e^{−x²/2}`, evaluated by
//! stable upward recurrence. Measuring the θ-rotated quadrature projects onto
//! `⟨x;θ| = ⟨x| e^{−iθn̂}`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fock::{apply_loss, DensityOperator, FockState};

/// Sampling / marginal grid. Defaults to ±8 with 4096 points.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid {
            min: -8.0,
            max: 8.0,
            points: 4096,
        }
    }
}

impl QuadratureGrid {
    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.points as f64 - 1.0)
    }

    pub fn positions(&self) -> Vec<f64> {
        let dx = self.step();
        (0..self.points).map(|i| self.min + i as f64 * dx).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementKind {
    Homodyne,
    Pnrd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutcomeValue {
    Count(u64),
    Real(f64),
}

/// One measurement event: kind, mode, angle (homodyne only), outcome, branch
/// weight (probability, or probability density for homodyne), and the filter
/// flag used by acceptance windows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub kind: MeasurementKind,
    pub mode: usize,
    pub theta: Option<f64>,
    pub outcome: OutcomeValue,
    pub weight: f64,
    pub accepted: bool,
}

impl MeasurementRecord {
    /// One JSON object per line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Normalized harmonic-oscillator eigenfunctions `h_0..h_{count-1}` at `x`.
pub fn hermite_functions(count: usize, x: f64) -> Vec<f64> {
    let mut h = vec![0.0; count];
    if count == 0 {
        return h;
    }
    let norm0 = std::f64::consts::PI.powf(-0.25);
    h[0] = norm0 * (-x * x / 2.0).exp();
    if count > 1 {
        h[1] = std::f64::consts::SQRT_2 * x * h[0];
    }
    for n in 1..count.saturating_sub(1) {
        let nf = n as f64;
        h[n + 1] = x * (2.0 / (nf + 1.0)).sqrt() * h[n] - (nf / (nf + 1.0)).sqrt() * h[n - 1];
    }
    h
}

/// Coefficients `⟨x;θ|n⟩ = e^{−iθn} h_n(x)` of the rotated-quadrature
/// eigenstate.
fn rotated_eigenfunction(cutoff: usize, theta: f64, x: f64) -> Vec<Complex64> {
    hermite_functions(cutoff, x)
        .into_iter()
        .enumerate()
        .map(|(n, h)| Complex64::new(0.0, -theta * n as f64).exp() * h)
        .collect()
}

fn zero_mode_state(norm_weight: f64, cutoff: usize) -> FockState {
    FockState {
        mode_count: 0,
        cutoff,
        amplitudes: vec![Complex64::ONE],
        norm_weight,
    }
}

/// Condition on a sharp homodyne outcome `x` of the θ-rotated quadrature.
///
/// Returns the renormalized state on the remaining modes (a zero-mode state
/// if the last mode was measured) and the outcome density. The density is
/// folded into `norm_weight`.
pub fn homodyne_project(
    state: &FockState,
    mode: usize,
    theta: f64,
    x: f64,
) -> Result<(FockState, f64)> {
    state.check_mode(mode)?;
    let d = state.cutoff;
    let g = rotated_eigenfunction(d, theta, x);
    let stride = state.stride(mode);
    let rest_dim = state.dim() / d;
    let mut conditional = vec![Complex64::ZERO; rest_dim];
    let mut write = 0;
    for idx in 0..state.dim() {
        if (idx / stride) % d != 0 {
            continue;
        }
        let mut acc = Complex64::ZERO;
        for n in 0..d {
            // ⟨x;θ|ψ⟩ contracts the conjugate of the eigenstate coefficients
            acc += g[n].conj() * state.amplitudes[idx + n * stride];
        }
        conditional[write] = acc;
        write += 1;
    }
    let density: f64 = conditional.iter().map(|a| a.norm_sqr()).sum();
    if density < 1e-300 {
        return Err(SimError::ZeroDensity);
    }
    let weight = state.norm_weight * density;
    if state.mode_count == 1 {
        return Ok((zero_mode_state(weight, d), density));
    }
    let inv = 1.0 / density.sqrt();
    for a in &mut conditional {
        *a *= inv;
    }
    Ok((
        FockState {
            mode_count: state.mode_count - 1,
            cutoff: d,
            amplitudes: conditional,
            norm_weight: weight,
        },
        density,
    ))
}

/// Marginal density of the θ-rotated quadrature of one mode of a pure state.
pub fn marginal_distribution(
    state: &FockState,
    mode: usize,
    theta: f64,
    grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    state.check_mode(mode)?;
    let d = state.cutoff;
    let stride = state.stride(mode);
    let bases: Vec<usize> = (0..state.dim())
        .filter(|idx| (idx / stride) % d == 0)
        .collect();
    let mut density = Vec::with_capacity(grid.points);
    for x in grid.positions() {
        let g = rotated_eigenfunction(d, theta, x);
        let mut total = 0.0;
        for &base in &bases {
            let mut acc = Complex64::ZERO;
            for n in 0..d {
                acc += g[n].conj() * state.amplitudes[base + n * stride];
            }
            total += acc.norm_sqr();
        }
        density.push(total);
    }
    Ok(density)
}

/// Marginal density for a single-mode density operator.
pub fn marginal_distribution_rho(
    rho: &DensityOperator,
    theta: f64,
    grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    if rho.mode_count != 1 {
        return Err(SimError::ShapeMismatch(
            "marginal_distribution_rho expects a single-mode operator; reduce first".into(),
        ));
    }
    let d = rho.cutoff;
    let mut density = Vec::with_capacity(grid.points);
    for x in grid.positions() {
        let g = rotated_eigenfunction(d, theta, x);
        let mut acc = Complex64::ZERO;
        for m in 0..d {
            for n in 0..d {
                acc += g[m] * rho.matrix[(m, n)] * g[n].conj();
            }
        }
        density.push(acc.re.max(0.0));
    }
    Ok(density)
}

/// Trapezoid integral of a grid density.
pub fn integrate(density: &[f64], dx: f64) -> f64 {
    if density.len() < 2 {
        return 0.0;
    }
    let inner: f64 = density[1..density.len() - 1].iter().sum();
    dx * (inner + 0.5 * (density[0] + density[density.len() - 1]))
}

/// Draw a homodyne outcome from the exact marginal by inverse-CDF on the
/// grid, then condition on it.
pub fn homodyne_sample<R: Rng + ?Sized>(
    state: &FockState,
    mode: usize,
    theta: f64,
    grid: &QuadratureGrid,
    rng: &mut R,
) -> Result<(f64, FockState, MeasurementRecord)> {
    let density = marginal_distribution(state, mode, theta, grid)?;
    let dx = grid.step();
    // cumulative mass per cell (piecewise-constant inversion)
    let mut cdf = Vec::with_capacity(grid.points);
    let mut acc = 0.0;
    for &p in &density {
        acc += p * dx;
        cdf.push(acc);
    }
    let total = acc;
    if total <= 0.0 {
        return Err(SimError::ZeroDensity);
    }
    let u: f64 = rng.gen::<f64>() * total;
    let cell = match cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
        Ok(i) => i,
        Err(i) => i.min(grid.points - 1),
    };
    let prev = if cell == 0 { 0.0 } else { cdf[cell - 1] };
    let frac = if cdf[cell] > prev {
        (u - prev) / (cdf[cell] - prev)
    } else {
        0.5
    };
    let x = grid.min + (cell as f64 + frac - 0.5) * dx;
    let (conditional, dens) = homodyne_project(state, mode, theta, x)?;
    let record = MeasurementRecord {
        kind: MeasurementKind::Homodyne,
        mode,
        theta: Some(theta),
        outcome: OutcomeValue::Real(x),
        weight: dens,
        accepted: true,
    };
    Ok((x, conditional, record))
}

/// Photon-number-resolving projection onto `|n⟩` in one mode.
pub fn pnrd_project(state: &FockState, mode: usize, n: usize) -> Result<(FockState, f64)> {
    state.check_mode(mode)?;
    let d = state.cutoff;
    if n >= d {
        return Err(SimError::InvalidParam(format!(
            "PNRD outcome {n} is not below the cutoff {d}"
        )));
    }
    let stride = state.stride(mode);
    let mut conditional = Vec::with_capacity(state.dim() / d);
    for idx in 0..state.dim() {
        if (idx / stride) % d == n {
            // strip the measured digit: idx = hi·(d·stride) + n·stride + lo
            conditional.push(state.amplitudes[idx]);
        }
    }
    let probability: f64 = conditional.iter().map(|a| a.norm_sqr()).sum();
    if probability < 1e-14 {
        return Err(SimError::ZeroProbability);
    }
    let weight = state.norm_weight * probability;
    if state.mode_count == 1 {
        return Ok((zero_mode_state(weight, d), probability));
    }
    let inv = 1.0 / probability.sqrt();
    for a in &mut conditional {
        *a *= inv;
    }
    Ok((
        FockState {
            mode_count: state.mode_count - 1,
            cutoff: d,
            amplitudes: conditional,
            norm_weight: weight,
        },
        probability,
    ))
}

/// Sample a photon number in one mode and condition on it.
pub fn pnrd_sample<R: Rng + ?Sized>(
    state: &FockState,
    mode: usize,
    rng: &mut R,
) -> Result<(usize, FockState, MeasurementRecord)> {
    state.check_mode(mode)?;
    let d = state.cutoff;
    let stride = state.stride(mode);
    let mut populations = vec![0.0; d];
    for (idx, a) in state.amplitudes.iter().enumerate() {
        populations[(idx / stride) % d] += a.norm_sqr();
    }
    let total: f64 = populations.iter().sum();
    let mut u: f64 = rng.gen::<f64>() * total;
    let mut outcome = d - 1;
    for (n, &p) in populations.iter().enumerate() {
        if u < p {
            outcome = n;
            break;
        }
        u -= p;
    }
    let (conditional, probability) = pnrd_project(state, mode, outcome)?;
    let record = MeasurementRecord {
        kind: MeasurementKind::Pnrd,
        mode,
        theta: None,
        outcome: OutcomeValue::Count(outcome as u64),
        weight: probability,
        accepted: true,
    };
    Ok((outcome, conditional, record))
}

/// Loss-degraded heralded Fock source: `apply_loss(|n⟩⟨n|, η)`.
pub fn heralded_fock_source(n: usize, eta: f64, cutoff: usize) -> Result<DensityOperator> {
    if n >= cutoff {
        return Err(SimError::InvalidParam(format!(
            "source photon number {n} is not below the cutoff {cutoff}"
        )));
    }
    let pure = FockState::fock(&[n], cutoff).promote();
    apply_loss(&pure, 0, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{apply_gate, fidelity_pure, GateOp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    const SQRT_PI: f64 = 1.772453850905516;

    #[test]
    fn vacuum_homodyne_density_is_gaussian() {
        let vac = FockState::vacuum(1, 10);
        for &x in &[0.0, 0.5, -1.3] {
            let (_, density) = homodyne_project(&vac, 0, 0.7, x).unwrap();
            let expected = (-x * x).exp() / SQRT_PI;
            assert!((density - expected).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn single_photon_homodyne_density() {
        let one = FockState::fock(&[1], 10);
        for &x in &[0.3, 1.0, -2.0] {
            let (_, density) = homodyne_project(&one, 0, 0.0, x).unwrap();
            let expected = 2.0 * x * x * (-x * x).exp() / SQRT_PI;
            assert!((density - expected).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn entangled_projection_picks_the_matching_branch() {
        // (|0,1⟩ + |1,0⟩)/√2, project mode 0 at x = 0: h_1(0) = 0 removes the
        // |1⟩-on-mode-0 branch, leaving |1⟩ on mode 1.
        let mut amps = vec![Complex64::ZERO; 9];
        let s = FockState::vacuum(2, 3);
        amps[s.flat_index(&[0, 1])] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[s.flat_index(&[1, 0])] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let psi = FockState::from_amplitudes(2, 3, amps).unwrap();
        let (cond, _) = homodyne_project(&psi, 0, 0.0, 0.0).unwrap();
        assert_eq!(cond.mode_count, 1);
        assert!((cond.amplitudes[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_integrates_to_one() {
        let grid = QuadratureGrid::default();
        let states = [
            FockState::vacuum(1, 16),
            FockState::fock(&[3], 16),
            FockState::coherent(Complex64::new(1.0, 0.5), 16),
        ];
        for s in &states {
            let density = marginal_distribution(s, 0, 0.3, &grid).unwrap();
            assert!(density.iter().all(|&p| p >= 0.0));
            let total = integrate(&density, grid.step());
            assert!((total - 1.0).abs() < 1e-6, "total = {total}");
        }
    }

    #[test]
    fn coherent_marginal_centered_at_sqrt2_re_alpha() {
        let grid = QuadratureGrid::default();
        let s = FockState::coherent(Complex64::new(1.0, 0.0), 20);
        let density = marginal_distribution(&s, 0, 0.0, &grid).unwrap();
        let xs = grid.positions();
        let mean: f64 = xs
            .iter()
            .zip(&density)
            .map(|(x, p)| x * p)
            .sum::<f64>()
            * grid.step();
        assert!((mean - std::f64::consts::SQRT_2).abs() < 1e-6, "mean = {mean}");
    }

    #[test]
    fn vacuum_sampling_moments() {
        let vac = FockState::vacuum(1, 10);
        let grid = QuadratureGrid::default();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let shots = 10_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..shots {
            let (x, _, _) = homodyne_sample(&vac, 0, 0.0, &grid, &mut rng).unwrap();
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / shots as f64;
        let var = sum2 / shots as f64 - mean * mean;
        // 3σ bands: σ_mean = √(0.5/N), σ_var ≈ √(2/N)·0.5
        assert!(mean.abs() < 3.0 * (0.5f64 / shots as f64).sqrt());
        assert!((var - 0.5).abs() < 3.0 * 0.5 * (2.0f64 / shots as f64).sqrt());
    }

    #[test]
    fn squeezed_sampling_variance() {
        let r = 0.4;
        let sq = apply_gate(
            &FockState::vacuum(1, 24),
            &GateOp::Squeeze {
                mode: 0,
                r,
                phi: 0.0,
            },
        )
        .unwrap();
        let grid = QuadratureGrid::default();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let shots = 10_000;
        let mut sum2 = 0.0;
        for _ in 0..shots {
            let (x, _, _) = homodyne_sample(&sq, 0, 0.0, &grid, &mut rng).unwrap();
            sum2 += x * x;
        }
        let var = sum2 / shots as f64;
        let expected = (-2.0 * r).exp() / 2.0;
        assert!(
            (var - expected).abs() < 3.0 * expected * (2.0f64 / shots as f64).sqrt() + 1e-3,
            "var = {var}, expected = {expected}"
        );
    }

    #[test]
    fn cat_fringes_match_analytic_marginal() {
        // Odd cat (|α⟩−|−α⟩)/N, p-quadrature density ∝ e^{−p²} sin²(√2 α p).
        let alpha = 1.2f64;
        let d = 24;
        let plus = FockState::coherent(Complex64::new(alpha, 0.0), d);
        let minus = FockState::coherent(Complex64::new(-alpha, 0.0), d);
        let amps: Vec<Complex64> = plus
            .amplitudes
            .iter()
            .zip(&minus.amplitudes)
            .map(|(a, b)| a - b)
            .collect();
        let cat = FockState::from_amplitudes(1, d, amps).unwrap();

        let analytic = |p: f64| {
            let norm = SQRT_PI / 2.0 * (1.0 - (-2.0 * alpha * alpha).exp());
            (-p * p).exp() * (std::f64::consts::SQRT_2 * alpha * p).sin().powi(2) / norm
        };

        let grid = QuadratureGrid::default();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let shots = 100_000usize;
        let lo = -4.0;
        let hi = 4.0;
        let bins = 40usize;
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for _ in 0..shots {
            let (p, _, _) =
                homodyne_sample(&cat, 0, std::f64::consts::FRAC_PI_2, &grid, &mut rng).unwrap();
            if p >= lo && p < hi {
                let b = ((p - lo) / width) as usize;
                counts[b.min(bins - 1)] += 1;
            }
        }
        // χ² against the analytic bin masses, merging thin bins
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        for (b, &c) in counts.iter().enumerate() {
            let x0 = lo + b as f64 * width;
            // Simpson for the bin mass
            let mass =
                (analytic(x0) + 4.0 * analytic(x0 + width / 2.0) + analytic(x0 + width)) * width
                    / 6.0;
            let expected = mass * shots as f64;
            if expected < 8.0 {
                continue;
            }
            chi2 += (c as f64 - expected).powi(2) / expected;
            dof += 1;
        }
        let dof = (dof - 1) as f64;
        // Wilson–Hilferty 99% critical value
        let z = 2.3263478740408408;
        let crit = dof * (1.0 - 2.0 / (9.0 * dof) + z * (2.0 / (9.0 * dof)).sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 = {chi2}, crit = {crit} (dof {dof})");
    }

    #[test]
    fn pnrd_poisson_statistics() {
        let alpha = Complex64::new(0.8, 0.3);
        let s = FockState::coherent(alpha, 20);
        let a2 = alpha.norm_sqr();
        let mut nf = 1.0;
        for n in 0..6 {
            if n > 0 {
                nf *= n as f64;
            }
            let (_, p) = pnrd_project(&s, 0, n).unwrap();
            let expected = (-a2).exp() * a2.powi(n as i32) / nf;
            assert!((p - expected).abs() < 1e-9, "n={n}: {p} vs {expected}");
        }
    }

    #[test]
    fn pnrd_on_single_photon() {
        let s = FockState::fock(&[1], 6);
        let (rest, p) = pnrd_project(&s, 0, 1).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert_eq!(rest.mode_count, 0);
        assert!((rest.norm_weight - 1.0).abs() < 1e-12);
        assert!(matches!(pnrd_project(&s, 0, 0), Err(SimError::ZeroProbability)));
    }

    #[test]
    fn hom_suppression_seen_by_pnrd() {
        let s = FockState::fock(&[1, 1], 4);
        let out = apply_gate(
            &s,
            &GateOp::BeamSplitter {
                mode_a: 0,
                mode_b: 1,
                theta: std::f64::consts::FRAC_PI_4,
                phi: 0.0,
            },
        )
        .unwrap();
        assert!(matches!(
            pnrd_project(&out, 0, 1),
            Err(SimError::ZeroProbability)
        ));
    }

    #[test]
    fn pnrd_completeness_and_partial_trace() {
        let s = {
            let a = FockState::coherent(Complex64::new(0.5, 0.1), 12);
            let b = FockState::coherent(Complex64::new(0.2, -0.4), 12);
            let joint = a.tensor(&b).unwrap();
            apply_gate(
                &joint,
                &GateOp::BeamSplitter {
                    mode_a: 0,
                    mode_b: 1,
                    theta: 0.6,
                    phi: 0.2,
                },
            )
            .unwrap()
        };
        let mut total = 0.0;
        let mut mix = DensityOperator {
            mode_count: 1,
            cutoff: 12,
            matrix: nalgebra::DMatrix::zeros(12, 12),
            trace_weight: 1.0,
        };
        for n in 0..12 {
            match pnrd_project(&s, 0, n) {
                Ok((cond, p)) => {
                    total += p;
                    mix.matrix += cond.promote().matrix * Complex64::new(p, 0.0);
                }
                Err(SimError::ZeroProbability) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(total >= 1.0 - 1e-6, "total = {total}");
        let reduced = s.promote().partial_trace(0).unwrap();
        let diff = (&mix.matrix - &reduced.matrix).map(|z| z.norm()).max();
        assert!(diff < 1e-10, "diff = {diff}");
    }

    #[test]
    fn heralded_source_matches_binomial_loss() {
        let rho = heralded_fock_source(1, 0.93, 6).unwrap();
        assert!((rho.matrix[(1, 1)].re - 0.93).abs() < 1e-12);
        assert!((rho.matrix[(0, 0)].re - 0.07).abs() < 1e-12);

        let rho2 = heralded_fock_source(2, 0.9, 6).unwrap();
        assert!((rho2.matrix[(2, 2)].re - 0.81).abs() < 1e-12);
        assert!((rho2.matrix[(1, 1)].re - 0.18).abs() < 1e-12);
        assert!((rho2.matrix[(0, 0)].re - 0.01).abs() < 1e-12);

        let pure = heralded_fock_source(1, 1.0, 6).unwrap();
        assert!((pure.matrix[(1, 1)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_histogram_tracks_marginal() {
        // KS statistic below the 1% critical value at 10⁵ shots.
        let s = FockState::coherent(Complex64::new(0.7, 0.4), 16);
        let theta = 0.9;
        let grid = QuadratureGrid::default();
        let density = marginal_distribution(&s, 0, theta, &grid).unwrap();
        let dx = grid.step();
        let mut cdf = Vec::with_capacity(density.len());
        let mut acc = 0.0;
        for &p in &density {
            acc += p * dx;
            cdf.push(acc);
        }
        let total = acc;

        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let shots = 100_000usize;
        let mut xs: Vec<f64> = (0..shots)
            .map(|_| homodyne_sample(&s, 0, theta, &grid, &mut rng).unwrap().0)
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let cell = ((x - grid.min) / dx).floor().max(0.0) as usize;
            let model = cdf[cell.min(cdf.len() - 1)] / total;
            let emp_hi = (i + 1) as f64 / shots as f64;
            let emp_lo = i as f64 / shots as f64;
            ks = ks.max((emp_hi - model).abs()).max((model - emp_lo).abs());
        }
        let crit = 1.6276 / (shots as f64).sqrt();
        assert!(ks < crit, "KS = {ks}, crit = {crit}");
    }

    #[test]
    fn record_json_lines() {
        let rec = MeasurementRecord {
            kind: MeasurementKind::Homodyne,
            mode: 1,
            theta: Some(1.5707963267948966),
            outcome: OutcomeValue::Real(0.25),
            weight: 0.31,
            accepted: false,
        };
        let line = rec.to_json_line();
        assert!(line.contains("\"kind\":\"homodyne\""));
        assert!(!line.contains('\n'));
        let back: MeasurementRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.mode, 1);
        assert!(!back.accepted);
    }

    #[test]
    fn conditional_states_keep_fidelity_under_rotation_convention() {
        // Projecting at θ and at 0 after a phase gate must agree.
        let s = {
            let a = FockState::coherent(Complex64::new(0.4, 0.2), 14);
            let b = FockState::fock(&[1], 14);
            a.tensor(&b).unwrap()
        };
        let theta = 0.77;
        let (cond_rot, d_rot) = homodyne_project(&s, 0, theta, 0.6).unwrap();
        let pre = apply_gate(
            &s,
            &GateOp::Phase {
                mode: 0,
                phi: -theta,
            },
        )
        .unwrap();
        let (cond_plain, d_plain) = homodyne_project(&pre, 0, 0.0, 0.6).unwrap();
        assert!((d_rot - d_plain).abs() < 1e-10);
        assert!((fidelity_pure(&cond_rot, &cond_plain).unwrap() - 1.0).abs() < 1e-10);
    }
}
