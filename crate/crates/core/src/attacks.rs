//! Explicit eavesdropping attacks and the upper-bound curves they produce.
//!
//! Tripartite bounds carry the 1/(M−1) = ½ prefactor of quantum tripartite
//! intrinsic non-locality; the bipartite bound has prefactor 1. The supremum
//! over input distributions is a maximum over deterministic input tuples:
//! with the extension fixed, I(·|E X⃗) is linear in q(x⃗).

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::{
    from_state_and_povms, input_register, output_register, quantum_extension_from_pure_state,
    tuples, Correlation, CqState,
};
use crate::error::{check_range, Error, Result};
use crate::games::bell_value_s;
use crate::infotheory::{
    classical_total_correlation, conditional_total_correlation, Conditioning, RegisterPartition,
};
use crate::qmat::{
    c, sigma_x, sigma_y, sigma_z, tensor_all, ComplexMatrix, DensityMatrix, Povm, PureState, C64,
};

/// Isotropic-noise level at which the GHZ family turns local (S = 1).
pub const LOCAL_THRESHOLD_P: f64 = 1.0 - FRAC_1_SQRT_2;
pub const EPS_GRID_STEP: f64 = 1e-3;
pub const EPS_REFINE_STEP: f64 = 1e-5;

/// (|0…0⟩ + sign·|1…1⟩)/√2 on `n` qubits.
pub fn ghz_vector(n: usize, sign: f64) -> Vec<C64> {
    let mut v = vec![c(0.0, 0.0); 1 << n];
    v[0] = c(FRAC_1_SQRT_2, 0.0);
    v[(1 << n) - 1] = c(sign * FRAC_1_SQRT_2, 0.0);
    v
}

pub fn ghz_state() -> DensityMatrix {
    DensityMatrix::from_pure(&ghz_vector(3, 1.0), vec![2, 2, 2]).expect("normalized")
}

/// (1−p)|GHZ⟩⟨GHZ| + p·I/8
pub fn isotropic_ghz_state(p: f64) -> Result<DensityMatrix> {
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    let ghz = ComplexMatrix::outer(&ghz_vector(3, 1.0));
    let m = &ghz.scale(1.0 - p) + &ComplexMatrix::identity(8).scale(p / 8.0);
    DensityMatrix::from_noisy(m, vec![2, 2, 2])
}

fn obs(o: &ComplexMatrix) -> Povm {
    Povm::from_observable(o).expect("Pauli combinations are valid observables")
}

/// (σ_z + t σ_x)/√(1+t²)
fn tilted(t: f64) -> ComplexMatrix {
    (&sigma_z() + &sigma_x().scale(t)).scale(1.0 / (1.0 + t * t).sqrt())
}

/// Alice {σ_z, σ_x}; Bob {(σ_z+σ_x)/√2, (σ_z−σ_x)/√2, σ_z}; Charlie {σ_z, σ_x}.
pub fn standard_measurements_tripartite() -> Vec<Vec<Povm>> {
    dephasing_measurements(1.0, 0.0).expect("valid parameters")
}

/// As [`standard_measurements_tripartite`] but with Bob's test settings
/// (σ_z ± Cσ_x)/√(1+C²) and his key setting a σ_z measurement whose outcome
/// is replaced by a uniform bit with probability `random_prob`.
pub fn dephasing_measurements(cc: f64, random_prob: f64) -> Result<Vec<Vec<Povm>>> {
    check_range("C", cc, 0.0, 1.0, "[0, 1]")?;
    let key = obs(&sigma_z()).with_random_assignment(random_prob)?;
    Ok(vec![
        vec![obs(&sigma_z()), obs(&sigma_x())],
        vec![obs(&tilted(cc)), obs(&tilted(-cc)), key],
        vec![obs(&sigma_z()), obs(&sigma_x())],
    ])
}

/// Correlation of the isotropic GHZ family under the standard measurements.
pub fn isotropic_correlation(p: f64) -> Result<Correlation> {
    from_state_and_povms(
        &isotropic_ghz_state(p)?,
        &standard_measurements_tripartite(),
    )
}

/// S = √2(1−p) for the isotropic family.
pub fn s_of_isotropic_p(p: f64) -> f64 {
    SQRT_2 * (1.0 - p)
}

/// Inverse of [`s_of_isotropic_p`], clamped to [0, 1 − 1/√2] for S ∈ [1, √2].
pub fn isotropic_p_of_s(s: f64) -> Result<f64> {
    check_range("S", s, 1.0 - 1e-12, SQRT_2 + 1e-12, "[1, sqrt 2]")?;
    Ok((1.0 - s * FRAC_1_SQRT_2).clamp(0.0, LOCAL_THRESHOLD_P))
}

/// α(ε) = (p−ε)/(1 − 1/√2 − ε), the weight of the local endpoint when the
/// isotropic correlation at p is split between noise levels ε and 1 − 1/√2.
pub fn alpha_of_eps(p: f64, eps: f64) -> Result<f64> {
    check_range("p", p, 0.0, LOCAL_THRESHOLD_P, "[0, 1 - 1/sqrt 2]")?;
    check_range("eps", eps, 0.0, p, "[0, p]")?;
    let den = LOCAL_THRESHOLD_P - eps;
    if den == 0.0 {
        // ε = p = 1 − 1/√2: numerator and denominator coincide
        return Ok(1.0);
    }
    Ok((p - eps) / den)
}

/// max over input tuples of I(A₁;…;A_M|X⃗ = x⃗) with the trivial extension.
pub fn max_tuple_total_correlation(p: &Correlation) -> f64 {
    let n_in = p.num_input_tuples();
    let n_out = p.num_output_tuples();
    (0..n_in)
        .map(|x| {
            let row: Vec<f64> = (0..n_out).map(|a| p.table()[a * n_in + x]).collect();
            classical_total_correlation(&row, p.output_sizes())
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Evaluates ε ↦ max-tuple I(A;B;C) of the isotropic correlation at ε
/// without rebuilding the state: outputs mix linearly with the uniform row.
struct IsotropicTc {
    ghz_rows: Vec<Vec<f64>>,
    sizes: Vec<usize>,
}

impl IsotropicTc {
    fn new() -> Result<Self> {
        let q = isotropic_correlation(0.0)?;
        let n_in = q.num_input_tuples();
        let n_out = q.num_output_tuples();
        Ok(Self {
            ghz_rows: (0..n_in)
                .map(|x| (0..n_out).map(|a| q.table()[a * n_in + x]).collect())
                .collect(),
            sizes: q.output_sizes().to_vec(),
        })
    }

    fn at(&self, eps: f64) -> f64 {
        self.ghz_rows
            .iter()
            .map(|r| {
                let u = eps / r.len() as f64;
                let row: Vec<f64> = r.iter().map(|&v| (1.0 - eps) * v + u).collect();
                classical_total_correlation(&row, &self.sizes)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// ½ min_{0≤ε≤p} (1 − α(ε)) max_{x⃗} I(A;B;C)_{q_ε}: split the isotropic
/// correlation at p into the one at ε and the local one at 1 − 1/√2, give
/// Eve the branch flag, and use the trivial extension on the non-local part.
///
/// The minimum is taken over a 1e-3 grid together with the endpoint ε = p,
/// then refined to 1e-5 around the best grid point.
pub fn convex_attack_bound(p: f64) -> Result<f64> {
    check_range("p", p, 0.0, LOCAL_THRESHOLD_P, "[0, 1 - 1/sqrt 2]")?;
    let f = IsotropicTc::new()?;
    let objective = |eps: f64| -> Result<f64> { Ok((1.0 - alpha_of_eps(p, eps)?) * f.at(eps)) };

    let steps = (p / EPS_GRID_STEP).floor() as usize;
    let mut best = (objective(p)?, p);
    for k in 0..=steps {
        let eps = (k as f64 * EPS_GRID_STEP).min(p);
        let v = objective(eps)?;
        if v < best.0 {
            best = (v, eps);
        }
    }
    let centre = best.1;
    let fine = (EPS_GRID_STEP / EPS_REFINE_STEP).round() as i64;
    for k in -fine..=fine {
        let eps = centre + k as f64 * EPS_REFINE_STEP;
        if !(0.0..=p).contains(&eps) {
            continue;
        }
        let v = objective(eps)?;
        if v < best.0 {
            best = (v, eps);
        }
    }
    Ok(0.5 * best.0)
}

fn bits_partition(m: usize) -> RegisterPartition {
    RegisterPartition::new(
        (0..m).map(|i| vec![output_register(i)]).collect(),
        Conditioning::e(),
    )
    .expect("distinct register names")
}

/// max over input tuples of I(A₁;…;A_M|E, X⃗ = x⃗) for an extension built by
/// [`quantum_extension_from_pure_state`] or `embed_cq`.
pub fn max_tuple_conditional_total_correlation(s: &CqState, input_sizes: &[usize]) -> Result<f64> {
    let m = input_sizes.len();
    let part = bits_partition(m);
    let names: Vec<String> = (0..m).map(input_register).collect();
    let mut best = f64::NEG_INFINITY;
    for x in tuples(input_sizes) {
        let fixed: Vec<(&str, usize)> = names.iter().map(String::as_str).zip(x).collect();
        let cond = s.condition_on(&fixed)?;
        best = best.max(conditional_total_correlation(&cond, &part)?);
    }
    Ok(best)
}

/// Collective dephasing of GHZ: ((1+C)/2)|GHZ⁺⟩⟨GHZ⁺| + ((1−C)/2)|GHZ⁻⟩⟨GHZ⁻|,
/// together with its purification
/// √((1−C)/2)|GHZ⁻⟩|0⟩_E + √((1+C)/2)|GHZ⁺⟩|1⟩_E.
pub fn dephasing_state(cc: f64) -> Result<(DensityMatrix, PureState)> {
    check_range("C", cc, 0.0, 1.0, "[0, 1]")?;
    dephased_family(3, cc)
}

fn dephased_family(n: usize, cc: f64) -> Result<(DensityMatrix, PureState)> {
    let wm = ((1.0 - cc) / 2.0).max(0.0);
    let wp = ((1.0 + cc) / 2.0).min(1.0);
    let gp = ghz_vector(n, 1.0);
    let gm = ghz_vector(n, -1.0);
    let mixed = &ComplexMatrix::outer(&gp).scale(wp) + &ComplexMatrix::outer(&gm).scale(wm);
    let mut amps = Vec::with_capacity(2 << n);
    for (p, m) in gp.iter().zip(&gm) {
        amps.push(m * wm.sqrt());
        amps.push(p * wp.sqrt());
    }
    let mut dims = vec![2; n];
    let rho = DensityMatrix::from_noisy(mixed, dims.clone())?;
    dims.push(2);
    Ok((rho, PureState::new(amps, dims)?))
}

/// C = √(S² − 1), clamped to [0, 1].
pub fn dephasing_c_of_s(s: f64) -> Result<f64> {
    check_range("S", s, 1.0 - 1e-12, SQRT_2 + 1e-12, "[1, sqrt 2]")?;
    Ok((s * s - 1.0).max(0.0).sqrt().min(1.0))
}

/// Q = ½(1 − S/√2), clamped to [0, ½].
pub fn tripartite_qber_of_s(s: f64) -> f64 {
    (0.5 * (1.0 - s * FRAC_1_SQRT_2)).clamp(0.0, 0.5)
}

/// Purification-based extension of the dephasing attack at violation S, with
/// Bob's key bit randomized at rate 2Q, under uniform inputs.
pub fn dephasing_extension(s: f64) -> Result<CqState> {
    let cc = dephasing_c_of_s(s)?;
    let q = tripartite_qber_of_s(s);
    let (_, psi) = dephasing_state(cc)?;
    let povms = dephasing_measurements(cc, 2.0 * q)?;
    let n_in = 2 * 3 * 2;
    quantum_extension_from_pure_state(&psi, &povms, &vec![1.0 / n_in as f64; n_in])
}

/// ½ max over input tuples of I(A;B;C|E) for the dephasing attack.
pub fn dephasing_attack_bound(s: f64) -> Result<f64> {
    let ext = dephasing_extension(s)?;
    Ok(0.5 * max_tuple_conditional_total_correlation(&ext, &[2, 3, 2])?)
}

/// Eve's states ρ_E given outputs 000 and 111 at the key inputs (0, 2, 0).
pub fn dephasing_e_states(cc: f64) -> Result<[DensityMatrix; 2]> {
    let (_, psi) = dephasing_state(cc)?;
    let povms = dephasing_measurements(cc, 0.0)?;
    let mut q = vec![0.0; 12];
    q[4] = 1.0; // (0, 2, 0), row-major over 2×3×2
    let ext = quantum_extension_from_pure_state(&psi, &povms, &q)?;
    let pick = |bit: usize| -> Result<DensityMatrix> {
        ext.entries()
            .iter()
            .find(|e| e.values[..6] == [bit, bit, bit, 0, 2, 0])
            .map(|e| e.e_state.clone())
            .ok_or_else(|| {
                Error::InvalidCqState(format!("outcome {bit}{bit}{bit} has probability zero"))
            })
    };
    Ok([pick(0)?, pick(1)?])
}

/// D(ρ) = (1−p)ρ + p·I/2 applied to every qubit, via the Pauli twirl
/// Tr_i(ρ) ⊗ I/2 = ¼ Σ_P P_i ρ P_i.
pub fn depolarize_each_qubit(state: &DensityMatrix, p_dep: f64) -> Result<DensityMatrix> {
    check_range("p_dep", p_dep, 0.0, 1.0, "[0, 1]")?;
    if state.dims().iter().any(|&d| d != 2) {
        return Err(Error::DimensionMismatch(format!(
            "depolarizing acts on qubits, got dims {:?}",
            state.dims()
        )));
    }
    let n = state.dims().len();
    let paulis = [ComplexMatrix::identity(2), sigma_x(), sigma_y(), sigma_z()];
    let id = ComplexMatrix::identity(2);
    let mut rho = state.matrix().clone();
    for i in 0..n {
        let mut twirled = ComplexMatrix::zeros(rho.rows(), rho.cols());
        for p in &paulis {
            let op = tensor_all((0..n).map(|k| if k == i { p } else { &id }));
            twirled = &twirled + &op.matmul(&rho)?.matmul(&op)?;
        }
        rho = &rho.scale(1.0 - p_dep) + &twirled.scale(p_dep / 4.0);
    }
    DensityMatrix::from_noisy(rho, state.dims().to_vec())
}

pub fn depolarized_ghz_correlation(p_dep: f64) -> Result<Correlation> {
    from_state_and_povms(
        &depolarize_each_qubit(&ghz_state(), p_dep)?,
        &standard_measurements_tripartite(),
    )
}

pub fn s_of_p_dep(p_dep: f64) -> Result<f64> {
    bell_value_s(&depolarized_ghz_correlation(p_dep)?)
}

/// The p_dep at which S drops to 1, by bisection (S is decreasing).
pub fn depolarizing_threshold() -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if s_of_p_dep(mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub s: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn new(rows: Vec<SweepRow>) -> Result<Self> {
        if rows.windows(2).any(|w| w[1].parameter < w[0].parameter) {
            return Err(Error::InvalidConfig(
                "sweep rows must be sorted by parameter".into(),
            ));
        }
        Ok(Self { rows })
    }

    /// Linear interpolation of the bound at violation `s`, with rows sorted
    /// by S (either direction). Outside the covered range the nearest end
    /// value is returned.
    pub fn bound_at_s(&self, s: f64) -> Result<f64> {
        let mut pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.s, r.bound)).collect();
        if pts.is_empty() {
            return Err(Error::InvalidConfig("empty sweep".into()));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if s <= pts[0].0 {
            return Ok(pts[0].1);
        }
        let last = pts[pts.len() - 1];
        if s >= last.0 {
            return Ok(last.1);
        }
        let k = pts.partition_point(|p| p.0 <= s);
        let (s0, b0) = pts[k - 1];
        let (s1, b1) = pts[k];
        if s1 == s0 {
            return Ok(b0);
        }
        Ok(b0 + (b1 - b0) * (s - s0) / (s1 - s0))
    }
}

/// p_dep ↦ (S, bound) where the bound is the isotropic convex-attack bound at
/// the same S. Rows stop at the first grid point with S ≤ 1, whose bound is 0.
pub fn depolarizing_sweep(grid: &[f64]) -> Result<SweepResult> {
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&p_dep| -> Result<SweepRow> {
            let s = s_of_p_dep(p_dep)?;
            let bound = if s <= 1.0 {
                0.0
            } else {
                convex_attack_bound(isotropic_p_of_s(s.min(SQRT_2))?)?
            };
            Ok(SweepRow {
                parameter: p_dep,
                s,
                bound,
            })
        })
        .collect::<Result<_>>()?;
    let cut = rows
        .iter()
        .position(|r| r.s <= 1.0)
        .map_or(rows.len(), |k| k + 1);
    SweepResult::new(rows[..cut].to_vec())
}

/// Bipartite dephased Bell state and its purification.
pub fn diqkd_state(cc: f64) -> Result<(DensityMatrix, PureState)> {
    check_range("C", cc, 0.0, 1.0, "[0, 1]")?;
    dephased_family(2, cc)
}

/// C = √(S²/4 − 1), clamped to [0, 1].
pub fn diqkd_c_of_s(s: f64) -> Result<f64> {
    check_range("S", s, 2.0 - 1e-12, 2.0 * SQRT_2 + 1e-12, "[2, 2 sqrt 2]")?;
    Ok((s * s / 4.0 - 1.0).max(0.0).sqrt().min(1.0))
}

/// Q = ½(1 − S/(2√2)), clamped to [0, ½].
pub fn diqkd_qber_of_s(s: f64) -> f64 {
    (0.5 * (1.0 - s / (2.0 * SQRT_2))).clamp(0.0, 0.5)
}

/// Alice {σ_z, σ_x}; Bob {σ_z, σ_x, (σ_z ± Cσ_x)/√(1+C²)}, with Bob's two key
/// settings randomized at rate `random_prob`.
pub fn diqkd_measurements(cc: f64, random_prob: f64) -> Result<Vec<Vec<Povm>>> {
    check_range("C", cc, 0.0, 1.0, "[0, 1]")?;
    Ok(vec![
        vec![obs(&sigma_z()), obs(&sigma_x())],
        vec![
            obs(&sigma_z()).with_random_assignment(random_prob)?,
            obs(&sigma_x()).with_random_assignment(random_prob)?,
            obs(&tilted(cc)),
            obs(&tilted(-cc)),
        ],
    ])
}

/// Noise-free correlation of the bipartite dephased family.
pub fn diqkd_correlation(cc: f64) -> Result<Correlation> {
    let (rho, _) = diqkd_state(cc)?;
    from_state_and_povms(&rho, &diqkd_measurements(cc, 0.0)?)
}

/// The two extensions tried by the DIQKD attack: Eve keeps the purifying
/// qubit, or measures it in the σ_x basis.
pub fn diqkd_extensions(s: f64) -> Result<[CqState; 2]> {
    let cc = diqkd_c_of_s(s)?;
    let q = diqkd_qber_of_s(s);
    let (_, psi) = diqkd_state(cc)?;
    let povms = diqkd_measurements(cc, 2.0 * q)?;
    let purified = quantum_extension_from_pure_state(&psi, &povms, &[0.125; 8])?;
    let measured = purified.measure_e(&obs(&sigma_x()))?;
    Ok([purified, measured])
}

/// min over the two extensions of max over input pairs of I(A;B|E).
pub fn diqkd_attack_bound(s: f64) -> Result<f64> {
    let [a, b] = diqkd_extensions(s)?;
    Ok(max_tuple_conditional_total_correlation(&a, &[2, 4])?
        .min(max_tuple_conditional_total_correlation(&b, &[2, 4])?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    /// Convex-decomposition attack on the isotropic GHZ family, against S.
    Fig2Attack1,
    /// Collective-dephasing attack, against S.
    Fig2Dephasing,
    /// Depolarized GHZ, against p_dep.
    Fig3,
    /// Bipartite DIQKD attack, against the CHSH value.
    Fig4,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Default parameter grid with `steps` points for each figure.
pub fn figure_grid(which: Figure, steps: usize) -> Result<Vec<f64>> {
    Ok(match which {
        Figure::Fig2Attack1 | Figure::Fig2Dephasing => linspace(1.0, SQRT_2, steps),
        Figure::Fig3 => linspace(0.0, depolarizing_threshold()?, steps),
        Figure::Fig4 => linspace(2.0, 2.0 * SQRT_2, steps),
    })
}

/// Evaluates one figure's curve on `grid` (S for figures 2 and 4, p_dep for
/// figure 3), in parallel with rows kept in grid order.
pub fn figure_sweep(which: Figure, grid: &[f64]) -> Result<SweepResult> {
    if which == Figure::Fig3 {
        return depolarizing_sweep(grid);
    }
    let rows = grid
        .par_iter()
        .map(|&s| -> Result<SweepRow> {
            let bound = match which {
                Figure::Fig2Attack1 => convex_attack_bound(isotropic_p_of_s(s)?)?,
                Figure::Fig2Dephasing => dephasing_attack_bound(s)?,
                Figure::Fig4 => diqkd_attack_bound(s)?,
                Figure::Fig3 => unreachable!(),
            };
            Ok(SweepRow {
                parameter: s,
                s,
                bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SweepResult::new(rows)
}
