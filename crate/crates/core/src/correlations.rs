//! Multipartite conditional probability tables p(a₁…a_M | x₁…x_M).
//!
//! Tables are stored flat and row-major over (a₁,…,a_M,x₁,…,x_M) with a₁
//! varying slowest and x_M fastest. The same order is used by the JSON
//! format, by extension state lists passed to [`embed_cq`], and by every
//! `input tuple` distribution (row-major over x₁,…,x_M).

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::infotheory::{self, Conditioning};
use crate::qmat::{
    compose, digits, purify, tensor_all, ComplexMatrix, DensityMatrix, Povm, PureState, C64,
};

/// Entries above −1e-12 and below zero are treated as rounding noise.
pub const NEGATIVE_CLAMP: f64 = 1e-12;
pub const ROW_SUM_TOL: f64 = 1e-10;
/// Tolerance used before dropping inputs in [`marginal`].
pub const MARGINAL_NS_TOL: f64 = 1e-8;

/// All tuples of the mixed-radix alphabet `sizes`, first coordinate slowest.
pub fn tuples(sizes: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut d = vec![0; sizes.len()];
    for idx in 0..total {
        digits(idx, sizes, &mut d);
        out.push(d.clone());
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CorrelationJson", into = "CorrelationJson")]
pub struct Correlation {
    num_parties: usize,
    output_sizes: Vec<usize>,
    input_sizes: Vec<usize>,
    table: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrelationJson {
    num_parties: usize,
    output_sizes: Vec<usize>,
    input_sizes: Vec<usize>,
    table: Vec<f64>,
}

impl TryFrom<CorrelationJson> for Correlation {
    type Error = Error;

    fn try_from(raw: CorrelationJson) -> Result<Self> {
        if raw.num_parties != raw.output_sizes.len() {
            return Err(Error::InvalidCorrelation(format!(
                "num_parties = {} but {} output alphabets",
                raw.num_parties,
                raw.output_sizes.len()
            )));
        }
        Self::new(raw.output_sizes, raw.input_sizes, raw.table)
    }
}

impl From<Correlation> for CorrelationJson {
    fn from(p: Correlation) -> Self {
        Self {
            num_parties: p.num_parties,
            output_sizes: p.output_sizes,
            input_sizes: p.input_sizes,
            table: p.table,
        }
    }
}

impl Correlation {
    /// Validates and normalizes a table. Entries in [−1e-12, 0) are clamped
    /// to zero and their row renormalized; anything more negative is an error.
    pub fn new(
        output_sizes: Vec<usize>,
        input_sizes: Vec<usize>,
        mut table: Vec<f64>,
    ) -> Result<Self> {
        let m = output_sizes.len();
        if m < 2 {
            return Err(Error::InvalidCorrelation(format!(
                "need at least 2 parties, got {m}"
            )));
        }
        if input_sizes.len() != m {
            return Err(Error::InvalidCorrelation(format!(
                "{m} output alphabets but {} input alphabets",
                input_sizes.len()
            )));
        }
        if output_sizes.iter().chain(&input_sizes).any(|&s| s == 0) {
            return Err(Error::InvalidCorrelation("empty alphabet".into()));
        }
        let n_out: usize = output_sizes.iter().product();
        let n_in: usize = input_sizes.iter().product();
        if table.len() != n_out * n_in {
            return Err(Error::InvalidCorrelation(format!(
                "table has {} entries, expected {}",
                table.len(),
                n_out * n_in
            )));
        }
        for x in 0..n_in {
            let mut clamped = false;
            let mut sum = 0.0;
            for a in 0..n_out {
                let v = &mut table[a * n_in + x];
                if !v.is_finite() {
                    return Err(Error::InvalidCorrelation(format!("non-finite entry {v}")));
                }
                if *v < 0.0 {
                    if *v < -NEGATIVE_CLAMP {
                        return Err(Error::InvalidCorrelation(format!(
                            "negative entry {v} at output {a}, input {x}"
                        )));
                    }
                    *v = 0.0;
                    clamped = true;
                }
                sum += *v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidCorrelation(format!(
                    "outputs for input tuple {x} sum to {sum}"
                )));
            }
            if clamped {
                for a in 0..n_out {
                    table[a * n_in + x] /= sum;
                }
            }
        }
        Ok(Self {
            num_parties: m,
            output_sizes,
            input_sizes,
            table,
        })
    }

    pub fn from_fn<F>(output_sizes: Vec<usize>, input_sizes: Vec<usize>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize], &[usize]) -> f64,
    {
        let outs = tuples(&output_sizes);
        let ins = tuples(&input_sizes);
        let mut table = Vec::with_capacity(outs.len() * ins.len());
        for a in &outs {
            for x in &ins {
                table.push(f(a, x));
            }
        }
        Self::new(output_sizes, input_sizes, table)
    }

    pub fn uniform(output_sizes: Vec<usize>, input_sizes: Vec<usize>) -> Result<Self> {
        let n: usize = output_sizes.iter().product();
        Self::from_fn(output_sizes, input_sizes, |_, _| 1.0 / n as f64)
    }

    /// Local deterministic strategy: party `i` outputs `strategy(i, x_i)`.
    pub fn deterministic<F>(
        output_sizes: Vec<usize>,
        input_sizes: Vec<usize>,
        strategy: F,
    ) -> Result<Self>
    where
        F: Fn(usize, usize) -> usize,
    {
        Self::from_fn(output_sizes, input_sizes, |a, x| {
            let hit = a
                .iter()
                .zip(x)
                .enumerate()
                .all(|(i, (&ai, &xi))| strategy(i, xi) == ai);
            if hit {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Independent juxtaposition: parties of `self` followed by parties of `other`.
    pub fn product(&self, other: &Correlation) -> Correlation {
        let mut output_sizes = self.output_sizes.clone();
        output_sizes.extend_from_slice(&other.output_sizes);
        let mut input_sizes = self.input_sizes.clone();
        input_sizes.extend_from_slice(&other.input_sizes);
        let m = self.num_parties;
        Self::from_fn(output_sizes, input_sizes, |a, x| {
            self.prob(&a[..m], &x[..m]) * other.prob(&a[m..], &x[m..])
        })
        .expect("product of valid correlations is valid")
    }

    pub fn num_parties(&self) -> usize {
        self.num_parties
    }

    pub fn output_sizes(&self) -> &[usize] {
        &self.output_sizes
    }

    pub fn input_sizes(&self) -> &[usize] {
        &self.input_sizes
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn num_output_tuples(&self) -> usize {
        self.output_sizes.iter().product()
    }

    pub fn num_input_tuples(&self) -> usize {
        self.input_sizes.iter().product()
    }

    pub fn output_index(&self, outputs: &[usize]) -> usize {
        compose(outputs, &self.output_sizes)
    }

    pub fn input_index(&self, inputs: &[usize]) -> usize {
        compose(inputs, &self.input_sizes)
    }

    pub fn index(&self, outputs: &[usize], inputs: &[usize]) -> usize {
        self.output_index(outputs) * self.num_input_tuples() + self.input_index(inputs)
    }

    pub fn prob(&self, outputs: &[usize], inputs: &[usize]) -> f64 {
        self.table[self.index(outputs, inputs)]
    }

    /// Output distribution at a fixed input tuple, indexed by output tuple.
    pub fn row(&self, inputs: &[usize]) -> Vec<f64> {
        let x = self.input_index(inputs);
        let n_in = self.num_input_tuples();
        (0..self.num_output_tuples())
            .map(|a| self.table[a * n_in + x])
            .collect()
    }

    pub fn same_shape(&self, other: &Correlation) -> bool {
        self.output_sizes == other.output_sizes && self.input_sizes == other.input_sizes
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Uniform distribution over all input tuples of `p`.
pub fn uniform_inputs(p: &Correlation) -> Vec<f64> {
    let n = p.num_input_tuples();
    vec![1.0 / n as f64; n]
}

/// Point mass on one input tuple.
pub fn point_mass(p: &Correlation, inputs: &[usize]) -> Vec<f64> {
    let mut q = vec![0.0; p.num_input_tuples()];
    q[p.input_index(inputs)] = 1.0;
    q
}

fn check_input_distribution(p: &Correlation, q: &[f64]) -> Result<()> {
    if q.len() != p.num_input_tuples() {
        return Err(Error::ShapeMismatch(format!(
            "input distribution has {} entries for {} input tuples",
            q.len(),
            p.num_input_tuples()
        )));
    }
    if q.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidCorrelation(
            "negative input probability".into(),
        ));
    }
    let s: f64 = q.iter().sum();
    if (s - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidCorrelation(format!(
            "input distribution sums to {s}"
        )));
    }
    Ok(())
}

/// p(a⃗|x⃗) = Tr[(Π^{(x₁)}_{a₁} ⊗ … ⊗ Π^{(x_M)}_{a_M}) ρ].
///
/// `povms[i][x]` is party `i`'s measurement for input `x`; all of a party's
/// measurements must have the same number of outcomes.
pub fn from_state_and_povms(state: &DensityMatrix, povms: &[Vec<Povm>]) -> Result<Correlation> {
    let (output_sizes, input_sizes) = measurement_shape(state.dims(), povms)?;
    Correlation::from_fn(output_sizes, input_sizes, |a, x| {
        let op = tensor_all(
            a.iter()
                .zip(x)
                .enumerate()
                .map(|(i, (&ai, &xi))| povms[i][xi].effect(ai)),
        );
        state.matrix().trace_of_product(&op).re
    })
}

fn measurement_shape(dims: &[usize], povms: &[Vec<Povm>]) -> Result<(Vec<usize>, Vec<usize>)> {
    if povms.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parties measured on a state with {} subsystems",
            povms.len(),
            dims.len()
        )));
    }
    let mut output_sizes = Vec::with_capacity(povms.len());
    for (i, party) in povms.iter().enumerate() {
        let Some(first) = party.first() else {
            return Err(Error::InvalidPovm(format!("party {i} has no measurements")));
        };
        for (x, m) in party.iter().enumerate() {
            if m.dim() != dims[i] {
                return Err(Error::DimensionMismatch(format!(
                    "party {i} input {x}: POVM on dimension {} but subsystem has {}",
                    m.dim(),
                    dims[i]
                )));
            }
            if m.num_outcomes() != first.num_outcomes() {
                return Err(Error::InvalidPovm(format!(
                    "party {i} measurements have differing outcome counts"
                )));
            }
        }
        output_sizes.push(first.num_outcomes());
    }
    Ok((output_sizes, povms.iter().map(Vec::len).collect()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoSignalingReport {
    pub passed: bool,
    pub worst_violation: f64,
    /// Party whose input leaked, if any violation was nonzero.
    pub party: Option<usize>,
    pub location: String,
}

/// Checks, for every party i and every fixing of the other parties' inputs
/// and outputs, that Σ_{aᵢ} p(a⃗|x⃗) does not depend on xᵢ.
///
/// Single-party conditions imply the conditions for every subset of parties.
pub fn check_no_signaling(p: &Correlation, tol: f64) -> NoSignalingReport {
    let m = p.num_parties;
    let mut worst = 0.0;
    let mut party = None;
    let mut location = String::from("none");
    for i in 0..m {
        let other_out: Vec<usize> = (0..m)
            .filter(|&k| k != i)
            .map(|k| p.output_sizes[k])
            .collect();
        let other_in: Vec<usize> = (0..m)
            .filter(|&k| k != i)
            .map(|k| p.input_sizes[k])
            .collect();
        let mut a = vec![0; m];
        let mut x = vec![0; m];
        for ao in tuples(&other_out) {
            for xo in tuples(&other_in) {
                let mut slot = 0;
                for k in (0..m).filter(|&k| k != i) {
                    a[k] = ao[slot];
                    x[k] = xo[slot];
                    slot += 1;
                }
                let marg: Vec<f64> = (0..p.input_sizes[i])
                    .map(|xi| {
                        x[i] = xi;
                        (0..p.output_sizes[i])
                            .map(|ai| {
                                a[i] = ai;
                                p.prob(&a, &x)
                            })
                            .sum()
                    })
                    .collect();
                for u in 0..marg.len() {
                    for v in (u + 1)..marg.len() {
                        let d = (marg[u] - marg[v]).abs();
                        if d > worst {
                            worst = d;
                            party = Some(i);
                            location = format!(
                                "party {i} inputs {u} vs {v}, other outputs {ao:?}, other inputs {xo:?}"
                            );
                        }
                    }
                }
            }
        }
    }
    NoSignalingReport {
        passed: worst <= tol,
        worst_violation: worst,
        party,
        location,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CmiTerm {
    pub label: String,
    pub value: f64,
}

/// Register names used by [`embed_cq`].
pub fn output_register(i: usize) -> String {
    format!("A{}", i + 1)
}

pub fn input_register(i: usize) -> String {
    format!("X{}", i + 1)
}

/// The information-theoretic form of no-signaling: I(Xᵢ; A_{−i} | X_{−i})
/// for every party, evaluated on the classical embedding of `p` under the
/// input distribution `q` (which should have full support).
pub fn nosignaling_via_cmi(p: &Correlation, q: &[f64]) -> Result<Vec<CmiTerm>> {
    let s = embed_cq(p, q, None)?;
    let m = p.num_parties;
    (0..m)
        .map(|i| {
            let others: Vec<usize> = (0..m).filter(|&k| k != i).collect();
            let outs: Vec<String> = others.iter().map(|&k| output_register(k)).collect();
            let ins: Vec<String> = others.iter().map(|&k| input_register(k)).collect();
            let value = infotheory::conditional_mutual_information(
                &s,
                &[input_register(i)],
                &outs,
                &Conditioning::classical(ins.clone()),
            )?;
            Ok(CmiTerm {
                label: format!(
                    "I({};{}|{})",
                    input_register(i),
                    outs.concat(),
                    ins.concat()
                ),
                value,
            })
        })
        .collect()
}

/// Marginal correlation of the listed parties (in ascending order). The
/// dropped parties' inputs are fixed to 0, which is only meaningful when `p`
/// is no-signaling, so that is checked first.
pub fn marginal(p: &Correlation, parties: &[usize]) -> Result<Correlation> {
    let mut keep = parties.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(Error::InvalidSubsystems("no parties selected".into()));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= p.num_parties) {
        return Err(Error::InvalidSubsystems(format!(
            "party {bad} out of range"
        )));
    }
    if keep.len() == p.num_parties {
        return Ok(p.clone());
    }
    if keep.len() < 2 {
        return Err(Error::InvalidSubsystems(
            "a correlation needs at least two parties".into(),
        ));
    }
    let report = check_no_signaling(p, MARGINAL_NS_TOL);
    if !report.passed {
        return Err(Error::Signaling {
            violation: report.worst_violation,
            location: report.location,
        });
    }
    let dropped: Vec<usize> = (0..p.num_parties).filter(|k| !keep.contains(k)).collect();
    let dropped_out: Vec<usize> = dropped.iter().map(|&k| p.output_sizes[k]).collect();
    let out_sizes: Vec<usize> = keep.iter().map(|&k| p.output_sizes[k]).collect();
    let in_sizes: Vec<usize> = keep.iter().map(|&k| p.input_sizes[k]).collect();
    let dropped_tuples = tuples(&dropped_out);
    let m = p.num_parties;
    Correlation::from_fn(out_sizes, in_sizes, |a, x| {
        let mut full_a = vec![0; m];
        let mut full_x = vec![0; m];
        for (slot, &k) in keep.iter().enumerate() {
            full_a[k] = a[slot];
            full_x[k] = x[slot];
        }
        dropped_tuples
            .iter()
            .map(|d| {
                for (slot, &k) in dropped.iter().enumerate() {
                    full_a[k] = d[slot];
                }
                p.prob(&full_a, &full_x)
            })
            .sum()
    })
}

/// λt + (1−λ)r
pub fn mix(t: &Correlation, r: &Correlation, lambda: f64) -> Result<Correlation> {
    check_range("lambda", lambda, 0.0, 1.0, "[0, 1]")?;
    if !t.same_shape(r) {
        return Err(Error::ShapeMismatch(format!(
            "mixing shapes {:?}|{:?} and {:?}|{:?}",
            t.output_sizes, t.input_sizes, r.output_sizes, r.input_sizes
        )));
    }
    let table = t
        .table
        .iter()
        .zip(&r.table)
        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
        .collect();
    Correlation::new(t.output_sizes.clone(), t.input_sizes.clone(), table)
}

fn check_distribution(name: &str, d: &[f64]) -> Result<()> {
    if d.is_empty() || d.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidWiring(format!(
            "{name} is not a distribution"
        )));
    }
    let s: f64 = d.iter().sum();
    if (s - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidWiring(format!("{name} sums to {s}")));
    }
    Ok(())
}

/// I(x | x_f, λ₁) for one party.
#[derive(Clone, Debug, PartialEq)]
pub struct InputBox {
    lambdas: usize,
    final_inputs: usize,
    inputs: usize,
    table: Vec<f64>,
}

impl InputBox {
    pub fn from_fn<F>(lambdas: usize, final_inputs: usize, inputs: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize) -> f64,
    {
        let mut table = Vec::with_capacity(lambdas * final_inputs * inputs);
        for l in 0..lambdas {
            for xf in 0..final_inputs {
                let col: Vec<f64> = (0..inputs).map(|x| f(x, xf, l)).collect();
                check_distribution(&format!("input box column (x_f={xf}, λ₁={l})"), &col)?;
                table.extend(col);
            }
        }
        Ok(Self {
            lambdas,
            final_inputs,
            inputs,
            table,
        })
    }

    pub fn identity(inputs: usize) -> Self {
        Self::from_fn(
            1,
            inputs,
            inputs,
            |x, xf, _| if x == xf { 1.0 } else { 0.0 },
        )
        .unwrap()
    }

    pub fn prob(&self, x: usize, xf: usize, lambda: usize) -> f64 {
        self.table[(lambda * self.final_inputs + xf) * self.inputs + x]
    }

    /// The box with its common randomness fixed to `lambda`.
    pub fn restrict(&self, lambda: usize) -> Self {
        let chunk = self.final_inputs * self.inputs;
        Self {
            lambdas: 1,
            final_inputs: self.final_inputs,
            inputs: self.inputs,
            table: self.table[lambda * chunk..(lambda + 1) * chunk].to_vec(),
        }
    }
}

/// O(a_f | a, x, x_f, λ₂) for one party.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputBox {
    lambdas: usize,
    final_inputs: usize,
    inputs: usize,
    outputs: usize,
    final_outputs: usize,
    table: Vec<f64>,
}

impl OutputBox {
    pub fn from_fn<F>(
        lambdas: usize,
        final_inputs: usize,
        inputs: usize,
        outputs: usize,
        final_outputs: usize,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(usize, usize, usize, usize, usize) -> f64,
    {
        let mut table =
            Vec::with_capacity(lambdas * final_inputs * inputs * outputs * final_outputs);
        for l in 0..lambdas {
            for xf in 0..final_inputs {
                for x in 0..inputs {
                    for a in 0..outputs {
                        let col: Vec<f64> =
                            (0..final_outputs).map(|af| f(af, a, x, xf, l)).collect();
                        check_distribution(
                            &format!("output box column (a={a}, x={x}, x_f={xf}, λ₂={l})"),
                            &col,
                        )?;
                        table.extend(col);
                    }
                }
            }
        }
        Ok(Self {
            lambdas,
            final_inputs,
            inputs,
            outputs,
            final_outputs,
            table,
        })
    }

    pub fn identity(inputs: usize, outputs: usize) -> Self {
        Self::from_fn(1, inputs, inputs, outputs, outputs, |af, a, _, _, _| {
            if af == a {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    pub fn final_outputs(&self) -> usize {
        self.final_outputs
    }

    pub fn prob(&self, af: usize, a: usize, x: usize, xf: usize, lambda: usize) -> f64 {
        self.table[(((lambda * self.final_inputs + xf) * self.inputs + x) * self.outputs + a)
            * self.final_outputs
            + af]
    }

    /// The box with its common randomness fixed to `lambda`.
    pub fn restrict(&self, lambda: usize) -> Self {
        let chunk = self.final_inputs * self.inputs * self.outputs * self.final_outputs;
        Self {
            lambdas: 1,
            table: self.table[lambda * chunk..(lambda + 1) * chunk].to_vec(),
            ..*self
        }
    }
}

/// Local pre- and post-processing with common randomness. λ₁ and λ₂ are
/// independent of each other.
#[derive(Clone, Debug, PartialEq)]
pub struct Wiring {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub input_boxes: Vec<InputBox>,
    pub output_boxes: Vec<OutputBox>,
}

impl Wiring {
    pub fn new(
        lambda1: Vec<f64>,
        lambda2: Vec<f64>,
        input_boxes: Vec<InputBox>,
        output_boxes: Vec<OutputBox>,
    ) -> Result<Self> {
        check_distribution("λ₁ distribution", &lambda1)?;
        check_distribution("λ₂ distribution", &lambda2)?;
        if input_boxes.len() != output_boxes.len() {
            return Err(Error::InvalidWiring(format!(
                "{} input boxes but {} output boxes",
                input_boxes.len(),
                output_boxes.len()
            )));
        }
        for (i, (ib, ob)) in input_boxes.iter().zip(&output_boxes).enumerate() {
            if ib.lambdas != lambda1.len() || ob.lambdas != lambda2.len() {
                return Err(Error::InvalidWiring(format!(
                    "party {i} boxes disagree with the common randomness alphabets"
                )));
            }
            if ib.final_inputs != ob.final_inputs || ib.inputs != ob.inputs {
                return Err(Error::InvalidWiring(format!(
                    "party {i} input and output boxes disagree on input alphabets"
                )));
            }
        }
        Ok(Self {
            lambda1,
            lambda2,
            input_boxes,
            output_boxes,
        })
    }

    pub fn identity(p: &Correlation) -> Self {
        Self::new(
            vec![1.0],
            vec![1.0],
            p.input_sizes
                .iter()
                .map(|&n| InputBox::identity(n))
                .collect(),
            p.input_sizes
                .iter()
                .zip(&p.output_sizes)
                .map(|(&n, &k)| OutputBox::identity(n, k))
                .collect(),
        )
        .unwrap()
    }

    pub fn num_parties(&self) -> usize {
        self.input_boxes.len()
    }

    /// The wiring conditioned on λ₁ = `l1` and λ₂ = `l2`; averaging these
    /// with weights λ₁(l1)λ₂(l2) recovers the original action.
    pub fn with_fixed_randomness(&self, l1: usize, l2: usize) -> Result<Self> {
        if l1 >= self.lambda1.len() || l2 >= self.lambda2.len() {
            return Err(Error::InvalidWiring(format!(
                "randomness values ({l1}, {l2}) out of range"
            )));
        }
        Self::new(
            vec![1.0],
            vec![1.0],
            self.input_boxes.iter().map(|b| b.restrict(l1)).collect(),
            self.output_boxes.iter().map(|b| b.restrict(l2)).collect(),
        )
    }
}

/// p_f(a⃗_f | x⃗_f) = Σ O^{(L)}(a⃗_f | x⃗_f, a⃗, x⃗) p(a⃗ | x⃗) I^{(L)}(x⃗ | x⃗_f).
pub fn apply_locr(p: &Correlation, w: &Wiring) -> Result<Correlation> {
    let m = p.num_parties;
    if w.num_parties() != m {
        return Err(Error::ShapeMismatch(format!(
            "{}-party wiring on a {m}-party correlation",
            w.num_parties()
        )));
    }
    for i in 0..m {
        let ob = &w.output_boxes[i];
        if ob.inputs != p.input_sizes[i] || ob.outputs != p.output_sizes[i] {
            return Err(Error::ShapeMismatch(format!(
                "party {i} wiring expects {} inputs / {} outputs, correlation has {} / {}",
                ob.inputs, ob.outputs, p.input_sizes[i], p.output_sizes[i]
            )));
        }
    }
    let final_in: Vec<usize> = w.input_boxes.iter().map(|b| b.final_inputs).collect();
    let final_out: Vec<usize> = w.output_boxes.iter().map(|b| b.final_outputs).collect();
    let in_tuples = tuples(&p.input_sizes);
    let out_tuples = tuples(&p.output_sizes);
    let final_out_tuples = tuples(&final_out);
    let n_fin_out = final_out_tuples.len();
    let n_fin_in: usize = final_in.iter().product();

    let mut table = vec![0.0; n_fin_out * n_fin_in];
    for (xf_idx, xf) in tuples(&final_in).iter().enumerate() {
        for x in &in_tuples {
            // I^{(L)}(x | x_f)
            let pin: f64 = w
                .lambda1
                .iter()
                .enumerate()
                .map(|(l, pl)| {
                    pl * (0..m)
                        .map(|i| w.input_boxes[i].prob(x[i], xf[i], l))
                        .product::<f64>()
                })
                .sum();
            if pin == 0.0 {
                continue;
            }
            for a in &out_tuples {
                let pa = p.prob(a, x);
                if pa == 0.0 {
                    continue;
                }
                for (af_idx, af) in final_out_tuples.iter().enumerate() {
                    let pout: f64 = w
                        .lambda2
                        .iter()
                        .enumerate()
                        .map(|(l, pl)| {
                            pl * (0..m)
                                .map(|i| w.output_boxes[i].prob(af[i], a[i], x[i], xf[i], l))
                                .product::<f64>()
                        })
                        .sum();
                    table[af_idx * n_fin_in + xf_idx] += pout * pa * pin;
                }
            }
        }
    }
    Correlation::new(final_out, final_in, table)
}

/// A named classical register with its alphabet size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub size: usize,
}

impl Register {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self {
            name: name.into(),
            size,
        }
    }
}

/// One classical value tuple with its probability and the conditional state
/// of the eavesdropper register.
#[derive(Clone, Debug, PartialEq)]
pub struct CqEntry {
    pub values: Vec<usize>,
    pub weight: f64,
    pub e_state: DensityMatrix,
}

/// Σ_v w(v) |v⟩⟨v| ⊗ ρ_E^v over named classical registers and one quantum
/// register E. Zero-weight values are not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CqState {
    registers: Vec<Register>,
    entries: Vec<CqEntry>,
    e_dim: usize,
}

impl CqState {
    pub fn new(registers: Vec<Register>, entries: Vec<CqEntry>, e_dim: usize) -> Result<Self> {
        for (i, r) in registers.iter().enumerate() {
            if r.size == 0 {
                return Err(Error::InvalidCqState(format!(
                    "register {} is empty",
                    r.name
                )));
            }
            if registers[..i].iter().any(|o| o.name == r.name) {
                return Err(Error::InvalidCqState(format!(
                    "duplicate register name {}",
                    r.name
                )));
            }
        }
        let mut total = 0.0;
        let mut kept = Vec::with_capacity(entries.len());
        for e in entries {
            if e.values.len() != registers.len()
                || e.values.iter().zip(&registers).any(|(&v, r)| v >= r.size)
            {
                return Err(Error::InvalidCqState(format!(
                    "value tuple {:?} does not fit the registers",
                    e.values
                )));
            }
            if e.weight < 0.0 || !e.weight.is_finite() {
                return Err(Error::InvalidCqState(format!("weight {}", e.weight)));
            }
            if e.e_state.dim() != e_dim {
                return Err(Error::InvalidCqState(format!(
                    "E state of dimension {} in a state with E dimension {e_dim}",
                    e.e_state.dim()
                )));
            }
            total += e.weight;
            if e.weight > 0.0 {
                kept.push(e);
            }
        }
        if (total - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidCqState(format!("weights sum to {total}")));
        }
        Ok(Self {
            registers,
            entries: kept,
            e_dim,
        })
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn entries(&self) -> &[CqEntry] {
        &self.entries
    }

    pub fn e_dim(&self) -> usize {
        self.e_dim
    }

    pub fn register_index(&self, name: &str) -> Result<usize> {
        self.registers
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    /// Restricts to the given register values and renormalizes.
    pub fn condition_on(&self, fixed: &[(&str, usize)]) -> Result<CqState> {
        let idx: Vec<(usize, usize)> = fixed
            .iter()
            .map(|&(n, v)| Ok((self.register_index(n)?, v)))
            .collect::<Result<_>>()?;
        let entries: Vec<CqEntry> = self
            .entries
            .iter()
            .filter(|e| idx.iter().all(|&(k, v)| e.values[k] == v))
            .cloned()
            .collect();
        let total: f64 = entries.iter().map(|e| e.weight).sum();
        if total <= 0.0 {
            return Err(Error::InvalidCqState(format!(
                "conditioning event {fixed:?} has probability zero"
            )));
        }
        Self::new(
            self.registers.clone(),
            entries
                .into_iter()
                .map(|mut e| {
                    e.weight /= total;
                    e
                })
                .collect(),
            self.e_dim,
        )
    }

    /// Passes one classical register through the stochastic map
    /// `channel[input][output]`.
    pub fn map_register(&self, name: &str, channel: &[Vec<f64>]) -> Result<CqState> {
        let k = self.register_index(name)?;
        if channel.len() != self.registers[k].size {
            return Err(Error::ShapeMismatch(format!(
                "channel has {} rows for register {name} of size {}",
                channel.len(),
                self.registers[k].size
            )));
        }
        let new_size = channel[0].len();
        for row in channel {
            if row.len() != new_size {
                return Err(Error::ShapeMismatch("ragged channel".into()));
            }
            check_distribution("channel row", row)?;
        }
        let mut registers = self.registers.clone();
        registers[k].size = new_size;
        let mut entries = Vec::new();
        for e in &self.entries {
            for (out, &pr) in channel[e.values[k]].iter().enumerate() {
                if pr > 0.0 {
                    let mut values = e.values.clone();
                    values[k] = out;
                    entries.push(CqEntry {
                        values,
                        weight: e.weight * pr,
                        e_state: e.e_state.clone(),
                    });
                }
            }
        }
        Self::new(registers, entries, self.e_dim)
    }

    /// Tensor product with disjoint register names; E registers are tensored.
    pub fn product(&self, other: &CqState) -> Result<CqState> {
        let mut registers = self.registers.clone();
        registers.extend(other.registers.iter().cloned());
        let mut entries = Vec::with_capacity(self.entries.len() * other.entries.len());
        for a in &self.entries {
            for b in &other.entries {
                let mut values = a.values.clone();
                values.extend_from_slice(&b.values);
                entries.push(CqEntry {
                    values,
                    weight: a.weight * b.weight,
                    e_state: a.e_state.tensor(&b.e_state),
                });
            }
        }
        Self::new(registers, entries, self.e_dim * other.e_dim)
    }

    /// Replaces E by the classical outcome of measuring it with `povm`; the
    /// new E register is diagonal with one entry per outcome.
    pub fn measure_e(&self, povm: &Povm) -> Result<CqState> {
        if povm.dim() != self.e_dim {
            return Err(Error::DimensionMismatch(format!(
                "POVM on dimension {} applied to E of dimension {}",
                povm.dim(),
                self.e_dim
            )));
        }
        let k = povm.num_outcomes();
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let probs: Vec<f64> = povm
                    .effects()
                    .iter()
                    .map(|f| e.e_state.matrix().trace_of_product(f).re.max(0.0))
                    .collect();
                let total: f64 = probs.iter().sum();
                let diag: Vec<f64> = probs.iter().map(|q| q / total).collect();
                CqEntry {
                    values: e.values.clone(),
                    weight: e.weight,
                    e_state: DensityMatrix::new_unchecked(ComplexMatrix::diag(&diag), vec![k]),
                }
            })
            .collect();
        Self::new(self.registers.clone(), entries, k)
    }

    /// Adds `suffix` to every register name.
    pub fn rename_registers(&self, suffix: &str) -> CqState {
        let mut s = self.clone();
        for r in &mut s.registers {
            r.name.push_str(suffix);
        }
        s
    }

    /// Σ_v w(v) ρ_E^v over the entries matching `pred`, unnormalized.
    pub fn e_block<F>(&self, pred: F) -> ComplexMatrix
    where
        F: Fn(&[usize]) -> bool,
    {
        let mut m = ComplexMatrix::zeros(self.e_dim, self.e_dim);
        for e in self.entries.iter().filter(|e| pred(&e.values)) {
            m = &m + &e.e_state.matrix().scale(e.weight);
        }
        m
    }
}

/// ρ_{A⃗X⃗E} = Σ q(x⃗) p(a⃗|x⃗) [a⃗ x⃗] ⊗ ρ_E^{a⃗x⃗} with registers A1…AM, X1…XM.
///
/// `ext`, when given, lists one E state per table entry in table order; the
/// trivial one-dimensional extension is used otherwise.
pub fn embed_cq(p: &Correlation, q: &[f64], ext: Option<&[DensityMatrix]>) -> Result<CqState> {
    check_input_distribution(p, q)?;
    if let Some(ext) = ext {
        if ext.len() != p.table.len() {
            return Err(Error::InvalidCqState(format!(
                "{} extension states for {} table entries",
                ext.len(),
                p.table.len()
            )));
        }
    }
    let e_dim = ext.map_or(1, |e| e[0].dim());
    let m = p.num_parties;
    let mut registers: Vec<Register> = (0..m)
        .map(|i| Register::new(output_register(i), p.output_sizes[i]))
        .collect();
    registers.extend((0..m).map(|i| Register::new(input_register(i), p.input_sizes[i])));
    let mut entries = Vec::new();
    let n_in = p.num_input_tuples();
    for (ai, a) in tuples(&p.output_sizes).into_iter().enumerate() {
        for (xi, x) in tuples(&p.input_sizes).into_iter().enumerate() {
            let idx = ai * n_in + xi;
            let weight = q[xi] * p.table[idx];
            if weight == 0.0 {
                continue;
            }
            let mut values = a.clone();
            values.extend_from_slice(&x);
            entries.push(CqEntry {
                values,
                weight,
                e_state: ext.map_or_else(DensityMatrix::trivial, |e| e[idx].clone()),
            });
        }
    }
    CqState::new(registers, entries, e_dim)
}

/// Extension of mix(t, r, λ) in which E holds a flag recording the branch:
/// ρ_E^{a⃗x⃗} ∝ λ t(a⃗|x⃗)|0⟩⟨0| + (1−λ) r(a⃗|x⃗)|1⟩⟨1|.
pub fn flag_extension(t: &Correlation, r: &Correlation, lambda: f64, q: &[f64]) -> Result<CqState> {
    let p = mix(t, r, lambda)?;
    let ext: Vec<DensityMatrix> = t
        .table
        .iter()
        .zip(&r.table)
        .map(|(&pt, &pr)| {
            let w0 = lambda * pt;
            let w1 = (1.0 - lambda) * pr;
            let s = w0 + w1;
            if s > 0.0 {
                DensityMatrix::new_unchecked(ComplexMatrix::diag(&[w0 / s, w1 / s]), vec![2])
            } else {
                DensityMatrix::maximally_mixed(vec![2])
            }
        })
        .collect();
    embed_cq(&p, q, Some(&ext))
}

/// Outcomes with probability at or below this carry no E state.
pub const ZERO_OUTCOME_TOL: f64 = 1e-15;

/// Quantum extension obtained by measuring the parties' shares of a pure
/// state whose last tensor factor is held by the eavesdropper:
/// ρ_E^{a⃗x⃗} = Tr_parties[(⊗Π ⊗ I_E) |ψ⟩⟨ψ|] / p(a⃗|x⃗).
pub fn quantum_extension_from_pure_state(
    psi: &PureState,
    povms: &[Vec<Povm>],
    q: &[f64],
) -> Result<CqState> {
    let n = psi.dims.len();
    if n < 3 {
        return Err(Error::DimensionMismatch(
            "pure state needs at least two parties and an E factor".into(),
        ));
    }
    let party_dims = &psi.dims[..n - 1];
    let e_dim = psi.dims[n - 1];
    let d: usize = party_dims.iter().product();
    let (output_sizes, input_sizes) = measurement_shape(party_dims, povms)?;
    let m = party_dims.len();
    let n_in: usize = input_sizes.iter().product();
    if q.len() != n_in {
        return Err(Error::ShapeMismatch(format!(
            "input distribution has {} entries for {n_in} input tuples",
            q.len()
        )));
    }

    let mut table = Vec::new();
    let mut ext = Vec::new();
    for a in tuples(&output_sizes) {
        for x in tuples(&input_sizes) {
            let op = tensor_all((0..m).map(|i| povms[i][x[i]].effect(a[i])));
            let mut rho_e = ComplexMatrix::zeros(e_dim, e_dim);
            for j in 0..d {
                for e in 0..e_dim {
                    let phi: C64 = (0..d)
                        .map(|i| op[(j, i)] * psi.amplitudes[i * e_dim + e])
                        .sum();
                    if phi == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for e2 in 0..e_dim {
                        rho_e[(e, e2)] += phi * psi.amplitudes[j * e_dim + e2].conj();
                    }
                }
            }
            let pr = rho_e.trace().re;
            if pr > ZERO_OUTCOME_TOL {
                table.push(pr);
                ext.push(DensityMatrix::from_noisy(rho_e, vec![e_dim])?);
            } else {
                table.push(0.0);
                ext.push(DensityMatrix::maximally_mixed(vec![e_dim]));
            }
        }
    }
    let p = Correlation::new(output_sizes, input_sizes, table)?;
    embed_cq(&p, q, Some(&ext))
}

/// Purifies `state` with a rank-sized environment and builds the induced
/// quantum extension.
pub fn quantum_extension_from_purification(
    state: &DensityMatrix,
    povms: &[Vec<Povm>],
    q: &[f64],
) -> Result<CqState> {
    quantum_extension_from_pure_state(&purify(state)?, povms, q)
}

/// Recovers p(a⃗|x⃗) from a CqState produced by [`embed_cq`] (inputs with
/// zero probability under q get the uniform row).
pub fn correlation_of_cq(s: &CqState, num_parties: usize) -> Result<Correlation> {
    let (out_idx, in_idx) = party_register_indices(s, num_parties)?;
    let out_sizes: Vec<usize> = out_idx.iter().map(|&k| s.registers[k].size).collect();
    let in_sizes: Vec<usize> = in_idx.iter().map(|&k| s.registers[k].size).collect();
    let n_out: usize = out_sizes.iter().product();
    let n_in: usize = in_sizes.iter().product();
    let mut table = vec![0.0; n_out * n_in];
    let mut q = vec![0.0; n_in];
    for e in &s.entries {
        let a: Vec<usize> = out_idx.iter().map(|&k| e.values[k]).collect();
        let x: Vec<usize> = in_idx.iter().map(|&k| e.values[k]).collect();
        let xi = compose(&x, &in_sizes);
        table[compose(&a, &out_sizes) * n_in + xi] += e.weight;
        q[xi] += e.weight;
    }
    for xi in 0..n_in {
        for a in 0..n_out {
            table[a * n_in + xi] = if q[xi] > 0.0 {
                table[a * n_in + xi] / q[xi]
            } else {
                1.0 / n_out as f64
            };
        }
    }
    Correlation::new(out_sizes, in_sizes, table)
}

fn party_register_indices(s: &CqState, m: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let outs = (0..m)
        .map(|i| s.register_index(&output_register(i)))
        .collect::<Result<Vec<_>>>()?;
    let ins = (0..m)
        .map(|i| s.register_index(&input_register(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok((outs, ins))
}

/// Largest entrywise violation of the no-signaling extension conditions:
/// Σ_{aᵢ} p(a⃗|x⃗) ρ_E^{a⃗x⃗} must not depend on xᵢ, for every party i.
/// Only input tuples with positive probability are compared.
pub fn extension_no_signaling_violation(s: &CqState, num_parties: usize) -> Result<f64> {
    let m = num_parties;
    let (out_idx, in_idx) = party_register_indices(s, m)?;
    let in_sizes: Vec<usize> = in_idx.iter().map(|&k| s.registers[k].size).collect();
    let out_sizes: Vec<usize> = out_idx.iter().map(|&k| s.registers[k].size).collect();
    let n_in: usize = in_sizes.iter().product();
    let mut q = vec![0.0; n_in];
    for e in &s.entries {
        let x: Vec<usize> = in_idx.iter().map(|&k| e.values[k]).collect();
        q[compose(&x, &in_sizes)] += e.weight;
    }
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let others: Vec<usize> = (0..m).filter(|&k| k != i).collect();
        let other_out: Vec<usize> = others.iter().map(|&k| out_sizes[k]).collect();
        let other_in: Vec<usize> = others.iter().map(|&k| in_sizes[k]).collect();
        for ao in tuples(&other_out) {
            for xo in tuples(&other_in) {
                let mut blocks: Vec<ComplexMatrix> = Vec::new();
                for xi in 0..in_sizes[i] {
                    let mut x = vec![0; m];
                    for (slot, &k) in others.iter().enumerate() {
                        x[k] = xo[slot];
                    }
                    x[i] = xi;
                    let qx = q[compose(&x, &in_sizes)];
                    if qx <= 0.0 {
                        continue;
                    }
                    let block =
                        s.e_block(|v| {
                            others.iter().enumerate().all(|(slot, &k)| {
                                v[out_idx[k]] == ao[slot] && v[in_idx[k]] == xo[slot]
                            }) && v[in_idx[i]] == xi
                        });
                    blocks.push(block.scale(1.0 / qx));
                }
                for u in 0..blocks.len() {
                    for v in (u + 1)..blocks.len() {
                        worst = worst.max(blocks[u].max_abs_diff(&blocks[v]));
                    }
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{sigma_x, sigma_z};
    use approx::assert_abs_diff_eq;

    fn ghz3() -> DensityMatrix {
        let mut v = vec![C64::new(0.0, 0.0); 8];
        v[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        v[7] = v[0];
        DensityMatrix::from_pure(&v, vec![2, 2, 2]).unwrap()
    }

    fn z_everywhere(m: usize) -> Vec<Vec<Povm>> {
        (0..m)
            .map(|_| vec![Povm::from_observable(&sigma_z()).unwrap()])
            .collect()
    }

    /// p(a,b|x,y) = δ_{a,y}/|B|: Alice's output copies Bob's input.
    fn signaling_box() -> Correlation {
        Correlation::from_fn(
            vec![2, 2],
            vec![2, 2],
            |a, x| {
                if a[0] == x[1] {
                    0.5
                } else {
                    0.0
                }
            },
        )
        .unwrap()
    }

    #[test]
    fn ghz_sigma_z_correlations() {
        let p = from_state_and_povms(&ghz3(), &z_everywhere(3)).unwrap();
        assert_abs_diff_eq!(p.prob(&[0, 0, 0], &[0, 0, 0]), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.prob(&[1, 1, 1], &[0, 0, 0]), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.prob(&[0, 1, 0], &[0, 0, 0]), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn product_state_is_deterministic() {
        let mut v = vec![C64::new(0.0, 0.0); 8];
        v[0] = C64::new(1.0, 0.0);
        let s = DensityMatrix::from_pure(&v, vec![2, 2, 2]).unwrap();
        let p = from_state_and_povms(&s, &z_everywhere(3)).unwrap();
        assert_eq!(p.prob(&[0, 0, 0], &[0, 0, 0]), 1.0);
    }

    #[test]
    fn povm_dimension_mismatch() {
        let s = DensityMatrix::maximally_mixed(vec![2, 3]);
        assert!(matches!(
            from_state_and_povms(&s, &z_everywhere(2)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn no_signaling_checks() {
        let p = from_state_and_povms(&ghz3(), &z_everywhere(3)).unwrap();
        assert!(check_no_signaling(&p, 1e-12).passed);
        let u = Correlation::uniform(vec![2, 3, 2], vec![2, 2, 3]).unwrap();
        assert!(check_no_signaling(&u, 0.0).passed);
        let r = check_no_signaling(&signaling_box(), 1e-10);
        assert!(!r.passed);
        assert_abs_diff_eq!(r.worst_violation, 1.0, epsilon = 1e-15);
        assert_eq!(r.party, Some(1));
    }

    #[test]
    fn cmi_form_of_no_signaling() {
        let u = Correlation::uniform(vec![2, 2, 2], vec![2, 2, 2]).unwrap();
        for t in nosignaling_via_cmi(&u, &uniform_inputs(&u)).unwrap() {
            assert!(t.value.abs() < 1e-12, "{t:?}");
        }
        let sb = signaling_box();
        let terms = nosignaling_via_cmi(&sb, &uniform_inputs(&sb)).unwrap();
        assert_eq!(terms[1].label, "I(X2;A1|X1)");
        assert_abs_diff_eq!(terms[1].value, 1.0, epsilon = 1e-12);
        // p(a|x)p(b|y)p(c|z)
        let local = Correlation::from_fn(vec![2, 2, 2], vec![2, 2, 2], |a, x| {
            a.iter()
                .zip(x)
                .map(|(&ai, &xi)| if ai == xi { 0.8 } else { 0.2 })
                .product()
        })
        .unwrap();
        for t in nosignaling_via_cmi(&local, &uniform_inputs(&local)).unwrap() {
            assert!(t.value.abs() < 1e-12);
        }
    }

    #[test]
    fn marginals() {
        let t = Correlation::from_fn(vec![2, 2], vec![2, 2], |a, x| {
            if (a[0] ^ a[1]) == (x[0] & x[1]) {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        let r = Correlation::uniform(vec![3], vec![2]);
        assert!(r.is_err());
        let r = Correlation::uniform(vec![2, 3], vec![1, 2]).unwrap();
        let tr = t.product(&r);
        let back = marginal(&tr, &[0, 1]).unwrap();
        assert!(back
            .table()
            .iter()
            .zip(t.table())
            .all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(marginal(&tr, &[0, 1, 2, 3]).unwrap(), tr);

        let g = from_state_and_povms(&ghz3(), &z_everywhere(3)).unwrap();
        let gm = marginal(&g, &[0, 1]).unwrap();
        assert_abs_diff_eq!(gm.prob(&[0, 0], &[0, 0]), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(gm.prob(&[1, 1], &[0, 0]), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(gm.prob(&[0, 1], &[0, 0]), 0.0, epsilon = 1e-15);

        let sb = signaling_box().product(&r);
        assert!(matches!(
            marginal(&sb, &[0, 1]),
            Err(Error::Signaling { .. })
        ));
    }

    #[test]
    fn mixing() {
        let t = signaling_box();
        let r = Correlation::uniform(vec![2, 2], vec![2, 2]).unwrap();
        assert_eq!(mix(&t, &r, 1.0).unwrap(), t);
        assert_eq!(mix(&t, &r, 0.0).unwrap(), r);
        assert!(mix(&t, &r, 1.5).is_err());
        let other = Correlation::uniform(vec![2, 2], vec![2, 3]).unwrap();
        assert!(matches!(mix(&t, &other, 0.5), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn clamping_and_rejection() {
        let p = Correlation::new(vec![2, 1], vec![1, 1], vec![1.0 + 5e-13, -5e-13]).unwrap();
        assert_eq!(p.table()[1], 0.0);
        assert!(Correlation::new(vec![2, 1], vec![1, 1], vec![1.1, -0.1]).is_err());
        assert!(Correlation::new(vec![2, 1], vec![1, 1], vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let p = from_state_and_povms(
            &ghz3(),
            &(0..3)
                .map(|_| {
                    vec![
                        Povm::from_observable(&sigma_z()).unwrap(),
                        Povm::from_observable(&sigma_x()).unwrap(),
                    ]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let back = Correlation::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        assert!(Correlation::from_json("{\"num_parties\": 2").is_err());
    }

    #[test]
    fn locr_identity_relabel_and_constant() {
        let p = signaling_box();
        assert_eq!(apply_locr(&p, &Wiring::identity(&p)).unwrap(), p);

        // flip party 0's output
        let flip = Wiring::new(
            vec![1.0],
            vec![1.0],
            vec![InputBox::identity(2), InputBox::identity(2)],
            vec![
                OutputBox::from_fn(1, 2, 2, 2, 2, |af, a, _, _, _| (af == 1 - a) as u8 as f64)
                    .unwrap(),
                OutputBox::identity(2, 2),
            ],
        )
        .unwrap();
        let f = apply_locr(&p, &flip).unwrap();
        for a in tuples(&[2, 2]) {
            for x in tuples(&[2, 2]) {
                assert_eq!(f.prob(&a, &x), p.prob(&[1 - a[0], a[1]], &x));
            }
        }

        let constant = Wiring::new(
            vec![1.0],
            vec![1.0],
            vec![InputBox::identity(2), InputBox::identity(2)],
            (0..2)
                .map(|_| {
                    OutputBox::from_fn(1, 2, 2, 2, 2, |af, _, _, _, _| (af == 0) as u8 as f64)
                        .unwrap()
                })
                .collect(),
        )
        .unwrap();
        let c = apply_locr(&p, &constant).unwrap();
        for x in tuples(&[2, 2]) {
            assert_eq!(c.prob(&[0, 0], &x), 1.0);
        }
        let s = embed_cq(&c, &uniform_inputs(&c), None).unwrap();
        let tc = infotheory::conditional_total_correlation(
            &s,
            &infotheory::RegisterPartition::new(
                vec![vec!["A1".into()], vec!["A2".into()]],
                Conditioning::classical(vec!["X1".into(), "X2".into()]),
            )
            .unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(tc, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn wiring_validation() {
        assert!(InputBox::from_fn(1, 2, 2, |_, _, _| 0.7).is_err());
        assert!(Wiring::new(vec![0.5], vec![1.0], vec![], vec![]).is_err());
    }

    #[test]
    fn embedding_shapes() {
        let p = from_state_and_povms(&ghz3(), &z_everywhere(3)).unwrap();
        let s = embed_cq(&p, &uniform_inputs(&p), None).unwrap();
        assert_eq!(s.e_dim(), 1);
        assert_eq!(s.registers()[0].name, "A1");
        assert_eq!(s.registers()[3].name, "X1");
        assert!(s
            .entries()
            .iter()
            .all(|e| e.e_state == DensityMatrix::trivial()));
        assert_eq!(s.entries().len(), 2);
        let back = correlation_of_cq(&s, 3).unwrap();
        assert!(back
            .table()
            .iter()
            .zip(p.table())
            .all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn flag_extension_splits_branches() {
        let t = signaling_box();
        let r = Correlation::uniform(vec![2, 2], vec![2, 2]).unwrap();
        let s = flag_extension(&t, &r, 0.3, &uniform_inputs(&t)).unwrap();
        assert_eq!(s.e_dim(), 2);
        let flag0: f64 = s
            .entries()
            .iter()
            .map(|e| e.weight * e.e_state.matrix()[(0, 0)].re)
            .sum();
        assert_abs_diff_eq!(flag0, 0.3, epsilon = 1e-14);
    }

    #[test]
    fn pure_state_extension_is_trivial() {
        let p = ghz3();
        let povms = z_everywhere(3);
        let q = vec![1.0];
        let s = quantum_extension_from_purification(&p, &povms, &q).unwrap();
        assert_eq!(s.e_dim(), 1);
        assert_eq!(s.entries().len(), 2);
    }

    #[test]
    fn condition_and_map() {
        let u = Correlation::uniform(vec![2, 2], vec![2, 2]).unwrap();
        let s = embed_cq(&u, &uniform_inputs(&u), None).unwrap();
        let c = s.condition_on(&[("X1", 1), ("X2", 0)]).unwrap();
        assert_eq!(c.entries().len(), 4);
        assert!(s.condition_on(&[("Q", 0)]).is_err());
        let m = s.map_register("A1", &[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(m.registers()[0].size, 1);
    }
}
