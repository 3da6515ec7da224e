//! Bell games: the M-partite parity-CHSH game, bipartite CHSH, QBER and the
//! tripartite ν functional.

use crate::correlations::{tuples, Correlation};
use crate::error::{Error, Result};
use crate::qmat::{hermitian_eig, tensor_all, ComplexMatrix, DensityMatrix, HERMITIAN_TOL};

/// Winning condition over (outputs, inputs).
pub type Predicate = fn(&[usize], &[usize]) -> bool;

/// a₁ ⊕ a₂ = x₁ ∧ (x₂ ⊕ a₃ ⊕ … ⊕ a_M). With two parties this is CHSH.
pub fn parity_chsh_predicate(a: &[usize], x: &[usize]) -> bool {
    let tail = a[2..].iter().fold(x[1], |acc, &ai| acc ^ ai);
    (a[0] ^ a[1]) == (x[0] & tail)
}

/// A game: a predicate together with the distribution of test inputs.
#[derive(Clone, Debug)]
pub struct GameSpec {
    pub num_parties: usize,
    pub test_inputs: Vec<(Vec<usize>, f64)>,
    pub predicate: Predicate,
}

impl GameSpec {
    /// Parity-CHSH with x₁, x₂ uniform on {0,1} and every further party
    /// fed input 1.
    pub fn parity_chsh(num_parties: usize) -> Result<Self> {
        if num_parties < 2 {
            return Err(Error::ShapeMismatch(
                "parity-CHSH needs two or more parties".into(),
            ));
        }
        let test_inputs = tuples(&[2, 2])
            .into_iter()
            .map(|x12| {
                let mut x = x12;
                x.resize(num_parties, 1);
                (x, 0.25)
            })
            .collect();
        Ok(Self {
            num_parties,
            test_inputs,
            predicate: parity_chsh_predicate,
        })
    }

    fn check_shape(&self, p: &Correlation) -> Result<()> {
        if p.num_parties() != self.num_parties {
            return Err(Error::ShapeMismatch(format!(
                "{}-party game on a {}-party correlation",
                self.num_parties,
                p.num_parties()
            )));
        }
        if p.output_sizes().iter().any(|&k| k != 2) {
            return Err(Error::ShapeMismatch(format!(
                "game needs binary outputs, got {:?}",
                p.output_sizes()
            )));
        }
        for (x, _) in &self.test_inputs {
            if x.iter().zip(p.input_sizes()).any(|(&xi, &n)| xi >= n) {
                return Err(Error::ShapeMismatch(format!(
                    "test input {x:?} not available with input alphabets {:?}",
                    p.input_sizes()
                )));
            }
        }
        Ok(())
    }

    pub fn win_probability(&self, p: &Correlation) -> Result<f64> {
        self.check_shape(p)?;
        let outs = tuples(p.output_sizes());
        Ok(self
            .test_inputs
            .iter()
            .map(|(x, q)| {
                q * outs
                    .iter()
                    .filter(|a| (self.predicate)(a, x))
                    .map(|a| p.prob(a, x))
                    .sum::<f64>()
            })
            .sum())
    }

    /// Best winning probability over local deterministic strategies on the
    /// given input alphabets, by exhaustive search.
    pub fn classical_optimum(&self, input_sizes: &[usize]) -> Result<f64> {
        let outputs = vec![2; self.num_parties];
        // A deterministic strategy for party i is a bit per input: encode it
        // as an integer in [0, 2^{n_i}).
        let strategy_counts: Vec<usize> = input_sizes.iter().map(|&n| 1usize << n).collect();
        let mut best: f64 = 0.0;
        for s in tuples(&strategy_counts) {
            let p = Correlation::deterministic(outputs.clone(), input_sizes.to_vec(), |i, xi| {
                (s[i] >> xi) & 1
            })?;
            best = best.max(self.win_probability(&p)?);
        }
        Ok(best)
    }
}

pub fn parity_chsh_win_probability(p: &Correlation) -> Result<f64> {
    GameSpec::parity_chsh(p.num_parties())?.win_probability(p)
}

/// S = 4ω − 2: the affine rescaling taking the classical optimum 3/4 to 1
/// and the GHZ value (2+√2)/4 to √2.
pub fn bell_value_s(p: &Correlation) -> Result<f64> {
    Ok(4.0 * parity_chsh_win_probability(p)? - 2.0)
}

/// ⟨A_x B_y⟩ = Σ (−1)^{a⊕b} p(a,b|x,y) for binary outputs.
pub fn correlator(p: &Correlation, x: usize, y: usize) -> Result<f64> {
    if p.num_parties() != 2 || p.output_sizes() != [2, 2] {
        return Err(Error::ShapeMismatch(
            "correlators need a bipartite correlation with binary outputs".into(),
        ));
    }
    if x >= p.input_sizes()[0] || y >= p.input_sizes()[1] {
        return Err(Error::ShapeMismatch(format!(
            "inputs ({x}, {y}) out of range"
        )));
    }
    Ok(tuples(&[2, 2])
        .iter()
        .map(|a| {
            let sign = if a[0] == a[1] { 1.0 } else { -1.0 };
            sign * p.prob(a, &[x, y])
        })
        .sum())
}

/// E(x₀,y₀) + E(x₀,y₁) + E(x₁,y₀) − E(x₁,y₁) on the chosen settings.
pub fn chsh_value_at(p: &Correlation, xs: [usize; 2], ys: [usize; 2]) -> Result<f64> {
    Ok(
        correlator(p, xs[0], ys[0])? + correlator(p, xs[0], ys[1])? + correlator(p, xs[1], ys[0])?
            - correlator(p, xs[1], ys[1])?,
    )
}

pub fn chsh_value(p: &Correlation) -> Result<f64> {
    chsh_value_at(p, [0, 1], [0, 1])
}

/// Probability that parties `pair.0` and `pair.1` disagree at `key_inputs`.
pub fn qber(p: &Correlation, key_inputs: &[usize], pair: (usize, usize)) -> Result<f64> {
    let m = p.num_parties();
    if key_inputs.len() != m
        || key_inputs
            .iter()
            .zip(p.input_sizes())
            .any(|(&x, &n)| x >= n)
    {
        return Err(Error::ShapeMismatch(format!(
            "key input tuple {key_inputs:?} invalid for alphabets {:?}",
            p.input_sizes()
        )));
    }
    if pair.0 >= m || pair.1 >= m || pair.0 == pair.1 {
        return Err(Error::InvalidSubsystems(format!("party pair {pair:?}")));
    }
    Ok(tuples(p.output_sizes())
        .iter()
        .filter(|a| a[pair.0] != a[pair.1])
        .map(|a| p.prob(a, key_inputs))
        .sum())
}

fn check_observable(o: &ComplexMatrix) -> Result<()> {
    let dev = o.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let eig = hermitian_eig(o)?;
    if eig.values.iter().any(|l| l.abs() > 1.0 + 1e-10) {
        return Err(Error::InvalidPovm(
            "observable eigenvalues must lie in [-1, 1]".into(),
        ));
    }
    Ok(())
}

/// ν = ⟨O⁰₁ O⁺₂ O⁺₃⟩ − ⟨O¹₁ O⁺₂⟩ with O⁺ᵢ = (O⁰ᵢ + O¹ᵢ)/2 on a three-party
/// state; the second term acts trivially on party 3.
pub fn nu_bell_functional(
    state: &DensityMatrix,
    observables: &[[ComplexMatrix; 2]],
) -> Result<f64> {
    if observables.len() != 3 || state.dims().len() != 3 {
        return Err(Error::ShapeMismatch(
            "ν is defined for three parties".into(),
        ));
    }
    for pair in observables {
        check_observable(&pair[0])?;
        check_observable(&pair[1])?;
    }
    let plus = |i: usize| (&observables[i][0] + &observables[i][1]).scale(0.5);
    let (p2, p3) = (plus(1), plus(2));
    let id3 = ComplexMatrix::identity(state.dims()[2]);
    let first = state.expectation(&tensor_all([&observables[0][0], &p2, &p3]))?;
    let second = state.expectation(&tensor_all([&observables[0][1], &p2, &id3]))?;
    Ok((first - second).re)
}
