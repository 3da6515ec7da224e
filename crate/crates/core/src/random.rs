//! Seeded random instances: states, measurements, correlations, wirings and
//! classical-quantum states. Used by the property suites and by the CLI's
//! identity checker.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::correlations::{
    from_state_and_povms, tuples, Correlation, CqEntry, CqState, InputBox, OutputBox, Register,
    Wiring,
};
use crate::error::Result;
use crate::qmat::{c, hermitian_eig, ComplexMatrix, DensityMatrix, Povm, C64};

/// A point drawn uniformly from the probability simplex of size `n`.
pub fn random_distribution<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `rows × cols` matrix with i.i.d. complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let data = (0..rows * cols).map(|_| gaussian(rng)).collect();
    ComplexMatrix::from_vec(rows, cols, data).expect("sizes agree")
}

/// Random density matrix GG†/Tr(GG†) with G a `d × rank` Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(
    dims: &[usize],
    rank: usize,
    rng: &mut R,
) -> DensityMatrix {
    let d: usize = dims.iter().product();
    let g = ginibre(d, rank.max(1), rng);
    let m = g.matmul(&g.adjoint()).expect("square product");
    DensityMatrix::from_noisy(m, dims.to_vec()).expect("Ginibre product is a state")
}

/// Haar-random orthonormal basis of C^d, as the columns of a unitary.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(d, d, rng);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v = g.column(j);
        for u in &cols {
            let overlap: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= overlap * ui;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    let mut u = ComplexMatrix::zeros(d, d);
    for (j, col) in cols.iter().enumerate() {
        for (i, &z) in col.iter().enumerate() {
            u[(i, j)] = z;
        }
    }
    u
}

/// Projective measurement in a random basis; basis vectors are dealt to the
/// `outcomes` effects round-robin, so `outcomes ≤ d` keeps every effect nonzero.
pub fn random_projective_povm<R: Rng + ?Sized>(
    d: usize,
    outcomes: usize,
    rng: &mut R,
) -> Result<Povm> {
    let u = random_unitary(d, rng);
    let mut effects = vec![ComplexMatrix::zeros(d, d); outcomes];
    for j in 0..d {
        let p = ComplexMatrix::outer(&u.column(j));
        effects[j % outcomes] = &effects[j % outcomes] + &p;
    }
    Povm::new(effects)
}

/// General POVM S^{-1/2} G_k S^{-1/2} with G_k random PSD and S = Σ G_k.
pub fn random_povm<R: Rng + ?Sized>(d: usize, outcomes: usize, rng: &mut R) -> Result<Povm> {
    let gs: Vec<ComplexMatrix> = (0..outcomes)
        .map(|_| {
            let g = ginibre(d, d, rng);
            g.matmul(&g.adjoint()).expect("square product")
        })
        .collect();
    let mut s = ComplexMatrix::zeros(d, d);
    for g in &gs {
        s = &s + g;
    }
    let eig = hermitian_eig(&s.hermitian_part())?;
    let inv_sqrt: Vec<f64> = eig.values.iter().map(|&l| 1.0 / l.sqrt()).collect();
    let mut w = eig.vectors.clone();
    for j in 0..d {
        for i in 0..d {
            w[(i, j)] *= inv_sqrt[j];
        }
    }
    let s_inv_half = w.matmul(&eig.vectors.adjoint())?;
    let effects = gs
        .iter()
        .map(|g| {
            s_inv_half
                .matmul(g)
                .and_then(|m| m.matmul(&s_inv_half))
                .map(|m| m.hermitian_part())
        })
        .collect::<Result<Vec<_>>>()?;
    Povm::new(effects)
}

/// Quantum correlation from a random state on `dims` and, per party, one
/// random POVM per input.
pub fn random_quantum_correlation<R: Rng + ?Sized>(
    dims: &[usize],
    input_sizes: &[usize],
    output_sizes: &[usize],
    rng: &mut R,
) -> Result<Correlation> {
    let d: usize = dims.iter().product();
    let rank = rng.random_range(1..=d);
    let state = random_density_matrix(dims, rank, rng);
    let povms = dims
        .iter()
        .zip(input_sizes.iter().zip(output_sizes))
        .map(|(&di, (&ni, &ki))| {
            (0..ni)
                .map(|_| {
                    if rng.random_bool(0.5) && ki <= di {
                        random_projective_povm(di, ki, rng)
                    } else {
                        random_povm(di, ki, rng)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    from_state_and_povms(&state, &povms)
}

/// Classical-quantum state with random weights on every value tuple of the
/// given registers and random E states of random rank.
pub fn random_cq_state<R: Rng + ?Sized>(
    registers: &[(&str, usize)],
    e_dim: usize,
    rng: &mut R,
) -> Result<CqState> {
    let sizes: Vec<usize> = registers.iter().map(|r| r.1).collect();
    let values = tuples(&sizes);
    let weights = random_distribution(values.len(), rng);
    let entries = values
        .into_iter()
        .zip(weights)
        .map(|(values, weight)| {
            let rank = rng.random_range(1..=e_dim);
            CqEntry {
                values,
                weight,
                e_state: random_density_matrix(&[e_dim], rank, rng),
            }
        })
        .collect();
    CqState::new(
        registers
            .iter()
            .map(|&(n, k)| Register::new(n, k))
            .collect(),
        entries,
        e_dim,
    )
}

fn random_stochastic_column<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    // Half the time a deterministic relabeling, which the simplex sampler
    // never produces.
    if rng.random_bool(0.5) {
        let mut v = vec![0.0; n];
        v[rng.random_range(0..n)] = 1.0;
        v
    } else {
        random_distribution(n, rng)
    }
}

/// Local output post-processing O(a_f|a, x, λ₂) with `lambdas` values of
/// common randomness; inputs pass through unchanged.
pub fn random_output_wiring<R: Rng + ?Sized>(
    p: &Correlation,
    final_outputs: &[usize],
    lambdas: usize,
    rng: &mut R,
) -> Result<Wiring> {
    let lambda2 = random_distribution(lambdas, rng);
    let output_boxes = (0..p.num_parties())
        .map(|i| {
            let n = p.input_sizes()[i];
            let k = p.output_sizes()[i];
            let kf = final_outputs[i];
            let cols: Vec<Vec<f64>> = (0..lambdas * n * k)
                .map(|_| random_stochastic_column(kf, rng))
                .collect();
            OutputBox::from_fn(lambdas, n, n, k, kf, |af, a, x, xf, l| {
                if x != xf {
                    // never queried: the identity input box pins x = x_f
                    return (af == 0) as u8 as f64;
                }
                cols[(l * n + x) * k + a][af]
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Wiring::new(
        vec![1.0],
        lambda2,
        p.input_sizes()
            .iter()
            .map(|&n| InputBox::identity(n))
            .collect(),
        output_boxes,
    )
}

/// General LOCR wiring with random input and output boxes.
pub fn random_wiring<R: Rng + ?Sized>(
    p: &Correlation,
    final_inputs: &[usize],
    final_outputs: &[usize],
    lambdas: (usize, usize),
    rng: &mut R,
) -> Result<Wiring> {
    let m = p.num_parties();
    let lambda1 = random_distribution(lambdas.0, rng);
    let lambda2 = random_distribution(lambdas.1, rng);
    let mut input_boxes = Vec::with_capacity(m);
    let mut output_boxes = Vec::with_capacity(m);
    for i in 0..m {
        let n = p.input_sizes()[i];
        let k = p.output_sizes()[i];
        let (nf, kf) = (final_inputs[i], final_outputs[i]);
        let icols: Vec<Vec<f64>> = (0..lambdas.0 * nf)
            .map(|_| random_stochastic_column(n, rng))
            .collect();
        input_boxes.push(InputBox::from_fn(lambdas.0, nf, n, |x, xf, l| {
            icols[l * nf + xf][x]
        })?);
        let ocols: Vec<Vec<f64>> = (0..lambdas.1 * nf * n * k)
            .map(|_| random_stochastic_column(kf, rng))
            .collect();
        output_boxes.push(OutputBox::from_fn(
            lambdas.1,
            nf,
            n,
            k,
            kf,
            |af, a, x, xf, l| ocols[((l * nf + xf) * n + x) * k + a][af],
        )?);
    }
    Wiring::new(lambda1, lambda2, input_boxes, output_boxes)
}
