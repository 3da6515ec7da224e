//! Entropies of classical-quantum states, conditional total correlation and
//! its chain rules.
//!
//! Every quantity is assembled from the block structure of the state: for a
//! set V of classical registers, H(V E) = Σ_v S(Σ_{entries with V=v} w ρ_E),
//! where S is evaluated on the unnormalized block. No joint matrix larger than
//! dim(E) is ever formed.

use std::collections::{BTreeMap, HashMap};

use crate::correlations::CqState;
use crate::error::{check_range, Error, Result};
use crate::qmat::{digits, hermitian_eig, matrix_entropy, shannon_term, ComplexMatrix};

/// Identity residuals above this indicate a bug, not rounding.
pub const IDENTITY_TOL: f64 = 1e-9;

/// What a quantity is conditioned on: classical registers and optionally E.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Conditioning {
    pub classical: Vec<String>,
    pub include_e: bool,
}

impl Conditioning {
    pub fn none() -> Self {
        Self::default()
    }

    /// Conditioning on E alone.
    pub fn e() -> Self {
        Self {
            classical: Vec::new(),
            include_e: true,
        }
    }

    pub fn classical(names: Vec<String>) -> Self {
        Self {
            classical: names,
            include_e: false,
        }
    }

    pub fn e_and(names: Vec<String>) -> Self {
        Self {
            classical: names,
            include_e: true,
        }
    }

    /// The same conditioning with extra classical registers appended.
    pub fn with<S: AsRef<str>>(&self, extra: &[S]) -> Self {
        let mut c = self.clone();
        c.classical
            .extend(extra.iter().map(|s| s.as_ref().to_string()));
        c
    }
}

/// Groups A₁;…;A_M of classical registers and a conditioner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterPartition {
    groups: Vec<Vec<String>>,
    conditioning: Conditioning,
}

impl RegisterPartition {
    pub fn new(groups: Vec<Vec<String>>, conditioning: Conditioning) -> Result<Self> {
        if groups.is_empty() || groups.iter().any(Vec::is_empty) {
            return Err(Error::InvalidSubsystems("empty register group".into()));
        }
        let mut seen: Vec<&str> = conditioning.classical.iter().map(String::as_str).collect();
        for name in groups.iter().flatten() {
            if seen.contains(&name.as_str()) {
                return Err(Error::OverlappingRegisters(name.clone()));
            }
            seen.push(name);
        }
        Ok(Self {
            groups,
            conditioning,
        })
    }

    pub fn groups(&self) -> &[Vec<String>] {
        &self.groups
    }

    pub fn conditioning(&self) -> &Conditioning {
        &self.conditioning
    }
}

fn resolve<S: AsRef<str>>(s: &CqState, names: &[S]) -> Result<Vec<usize>> {
    names.iter().map(|n| s.register_index(n.as_ref())).collect()
}

fn disjoint(sets: &[&[usize]], s: &CqState) -> Result<()> {
    let mut seen = Vec::new();
    for set in sets {
        for &k in *set {
            if seen.contains(&k) {
                return Err(Error::OverlappingRegisters(s.registers()[k].name.clone()));
            }
            seen.push(k);
        }
    }
    Ok(())
}

/// H(V) or H(V E) in bits for the registers at the given positions.
fn joint_entropy(s: &CqState, regs: &[usize], with_e: bool) -> Result<f64> {
    let mut regs = regs.to_vec();
    regs.sort_unstable();
    regs.dedup();
    let key = |v: &[usize]| regs.iter().map(|&k| v[k]).collect::<Vec<usize>>();
    if !with_e || s.e_dim() == 1 {
        let mut w: HashMap<Vec<usize>, f64> = HashMap::new();
        for e in s.entries() {
            *w.entry(key(&e.values)).or_insert(0.0) += e.weight;
        }
        return Ok(w.values().map(|&p| shannon_term(p)).sum());
    }
    // BTreeMap keeps the summation order, hence the result, deterministic.
    let mut blocks: BTreeMap<Vec<usize>, ComplexMatrix> = BTreeMap::new();
    for e in s.entries() {
        let b = blocks
            .entry(key(&e.values))
            .or_insert_with(|| ComplexMatrix::zeros(s.e_dim(), s.e_dim()));
        *b = &*b + &e.e_state.matrix().scale(e.weight);
    }
    blocks.values().map(matrix_entropy).sum()
}

fn cond_entropy_idx(s: &CqState, subject: &[usize], cond: &[usize], with_e: bool) -> Result<f64> {
    let mut all = subject.to_vec();
    all.extend_from_slice(cond);
    Ok(joint_entropy(s, &all, with_e)? - joint_entropy(s, cond, with_e)?)
}

/// Von Neumann entropy of the listed classical registers, jointly with E
/// when `include_e` is set.
pub fn entropy<S: AsRef<str>>(s: &CqState, registers: &[S], include_e: bool) -> Result<f64> {
    joint_entropy(s, &resolve(s, registers)?, include_e)
}

/// H(subject | conditioning) = H(subject, conditioning) − H(conditioning).
pub fn conditional_entropy<S: AsRef<str>>(
    s: &CqState,
    subject: &[S],
    cond: &Conditioning,
) -> Result<f64> {
    let a = resolve(s, subject)?;
    let c = resolve(s, &cond.classical)?;
    cond_entropy_idx(s, &a, &c, cond.include_e)
}

/// I(A;B|C) = H(AC) + H(BC) − H(ABC) − H(C).
pub fn conditional_mutual_information<S: AsRef<str>, T: AsRef<str>>(
    s: &CqState,
    a: &[S],
    b: &[T],
    cond: &Conditioning,
) -> Result<f64> {
    let a = resolve(s, a)?;
    let b = resolve(s, b)?;
    let c = resolve(s, &cond.classical)?;
    disjoint(&[&a, &b, &c], s)?;
    let e = cond.include_e;
    let ac: Vec<usize> = a.iter().chain(&c).copied().collect();
    let bc: Vec<usize> = b.iter().chain(&c).copied().collect();
    let abc: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
    Ok(joint_entropy(s, &ac, e)? + joint_entropy(s, &bc, e)?
        - joint_entropy(s, &abc, e)?
        - joint_entropy(s, &c, e)?)
}

/// I(A₁;…;A_M|C) = Σᵢ H(Aᵢ|C) − H(A₁⋯A_M|C).
pub fn conditional_total_correlation(s: &CqState, part: &RegisterPartition) -> Result<f64> {
    let groups = part
        .groups
        .iter()
        .map(|g| resolve(s, g))
        .collect::<Result<Vec<_>>>()?;
    let c = resolve(s, &part.conditioning.classical)?;
    let e = part.conditioning.include_e;
    let mut sets: Vec<&[usize]> = groups.iter().map(Vec::as_slice).collect();
    sets.push(&c);
    disjoint(&sets, s)?;
    let all: Vec<usize> = groups.iter().flatten().copied().collect();
    let mut total = -cond_entropy_idx(s, &all, &c, e)?;
    for g in &groups {
        total += cond_entropy_idx(s, g, &c, e)?;
    }
    Ok(total)
}

/// Σᵢ H(Aᵢ) − H(A₁⋯A_M) of a joint distribution over the mixed-radix
/// alphabet `sizes` (first coordinate slowest).
pub fn classical_total_correlation(dist: &[f64], sizes: &[usize]) -> f64 {
    let mut marginals: Vec<Vec<f64>> = sizes.iter().map(|&k| vec![0.0; k]).collect();
    let mut d = vec![0; sizes.len()];
    let mut joint = 0.0;
    for (idx, &p) in dist.iter().enumerate() {
        digits(idx, sizes, &mut d);
        for (m, &di) in marginals.iter_mut().zip(&d) {
            m[di] += p;
        }
        joint += shannon_term(p);
    }
    marginals
        .iter()
        .flatten()
        .map(|&p| shannon_term(p))
        .sum::<f64>()
        - joint
}

fn tc(s: &CqState, groups: Vec<Vec<String>>, cond: Conditioning) -> Result<f64> {
    conditional_total_correlation(s, &RegisterPartition::new(groups, cond)?)
}

fn join(parts: &[&[String]]) -> Vec<String> {
    parts.iter().flat_map(|p| p.iter().cloned()).collect()
}

/// Register labels for the bipartitioned tripartite identity: each party
/// holds a first block (A₁, B₁, C₁) and a second block (A₂, B₂, C₂).
#[derive(Clone, Debug)]
pub struct TripartiteLabels {
    pub a1: Vec<String>,
    pub a2: Vec<String>,
    pub b1: Vec<String>,
    pub b2: Vec<String>,
    pub c1: Vec<String>,
    pub c2: Vec<String>,
    pub conditioning: Conditioning,
}

/// |LHS − RHS| of
/// I(A₁A₂;B₁B₂;C₁C₂|E) = I(A₁;B₁;C₁|EA₂B₂C₂) + I(A₂;B₂;C₂|E)
///   + I(A₂B₂;C₁|EC₂) + I(B₂C₂;A₁|EA₂) + I(A₂C₂;B₁|EB₂).
pub fn chain_rule_residual_tripartite(s: &CqState, l: &TripartiteLabels) -> Result<f64> {
    let e = &l.conditioning;
    let lhs = tc(
        s,
        vec![
            join(&[&l.a1, &l.a2]),
            join(&[&l.b1, &l.b2]),
            join(&[&l.c1, &l.c2]),
        ],
        e.clone(),
    )?;
    let seconds = join(&[&l.a2, &l.b2, &l.c2]);
    let rhs = tc(
        s,
        vec![l.a1.clone(), l.b1.clone(), l.c1.clone()],
        e.with(&seconds),
    )? + tc(s, vec![l.a2.clone(), l.b2.clone(), l.c2.clone()], e.clone())?
        + conditional_mutual_information(s, &join(&[&l.a2, &l.b2]), &l.c1, &e.with(&l.c2))?
        + conditional_mutual_information(s, &join(&[&l.b2, &l.c2]), &l.a1, &e.with(&l.a2))?
        + conditional_mutual_information(s, &join(&[&l.a2, &l.c2]), &l.b1, &e.with(&l.b2))?;
    Ok((lhs - rhs).abs())
}

/// Party i's (first block, second block) register labels.
pub type BlockPair = (Vec<String>, Vec<String>);

/// |LHS − RHS| of the M-party generalization
/// I(A_{1,1}A_{1,2};…;A_{M,1}A_{M,2}|E) = I(A_{1,2};…;A_{M,2}|E)
///   + I(A_{1,1};…;A_{M,1}|E A_{[M],2}) + Σᵢ I(A_{[M]∖i,2}; A_{i,1}|E A_{i,2}).
pub fn chain_rule_residual_multipartite(
    s: &CqState,
    blocks: &[BlockPair],
    cond: &Conditioning,
) -> Result<f64> {
    if blocks.len() < 2 {
        return Err(Error::InvalidSubsystems("need at least two parties".into()));
    }
    let lhs = tc(
        s,
        blocks.iter().map(|(f, g)| join(&[f, g])).collect(),
        cond.clone(),
    )?;
    let seconds: Vec<String> = blocks.iter().flat_map(|(_, g)| g.iter().cloned()).collect();
    let mut rhs = tc(
        s,
        blocks.iter().map(|(_, g)| g.clone()).collect(),
        cond.clone(),
    )? + tc(
        s,
        blocks.iter().map(|(f, _)| f.clone()).collect(),
        cond.with(&seconds),
    )?;
    for (i, (first, second)) in blocks.iter().enumerate() {
        let others: Vec<String> = blocks
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .flat_map(|(_, (_, g))| g.iter().cloned())
            .collect();
        rhs += conditional_mutual_information(s, &others, first, &cond.with(second))?;
    }
    Ok((lhs - rhs).abs())
}

/// |I(A₁;…;A_M|C) − Σ_{j<M} I(A_j; A_{j+1}⋯A_M|C)|.
pub fn chain_rule_telescope(s: &CqState, part: &RegisterPartition) -> Result<f64> {
    let lhs = conditional_total_correlation(s, part)?;
    let g = &part.groups;
    let mut rhs = 0.0;
    for j in 0..g.len() - 1 {
        let rest: Vec<String> = g[j + 1..].iter().flatten().cloned().collect();
        rhs += conditional_mutual_information(s, &g[j], &rest, &part.conditioning)?;
    }
    Ok((lhs - rhs).abs())
}

/// g(ε) = (ε+1) log₂(ε+1) − ε log₂ ε, with g(0) = 0.
pub fn g_epsilon(eps: f64) -> Result<f64> {
    check_range("eps", eps, 0.0, 1.0, "[0, 1]")?;
    let t = if eps > 0.0 { eps * eps.log2() } else { 0.0 };
    Ok((eps + 1.0) * (eps + 1.0).log2() - t)
}

/// 2ε log₂ dim(A₁⋯A_{M−1}) + M g(ε).
pub fn continuity_bound(eps: f64, dim_first_parties: usize, num_parties: usize) -> Result<f64> {
    if dim_first_parties == 0 {
        return Err(Error::DimensionMismatch("zero dimension".into()));
    }
    Ok(2.0 * eps * (dim_first_parties as f64).log2() + num_parties as f64 * g_epsilon(eps)?)
}

/// ½‖ρ − σ‖₁ for two classical-quantum states over the same registers; the
/// norm splits over classical values.
pub fn cq_trace_distance(s: &CqState, t: &CqState) -> Result<f64> {
    if s.registers() != t.registers() || s.e_dim() != t.e_dim() {
        return Err(Error::ShapeMismatch(
            "trace distance between states on different registers".into(),
        ));
    }
    let d = s.e_dim();
    let mut blocks: BTreeMap<Vec<usize>, ComplexMatrix> = BTreeMap::new();
    for (st, sign) in [(s, 1.0), (t, -1.0)] {
        for e in st.entries() {
            let b = blocks
                .entry(e.values.clone())
                .or_insert_with(|| ComplexMatrix::zeros(d, d));
            *b = &*b + &e.e_state.matrix().scale(sign * e.weight);
        }
    }
    let mut total = 0.0;
    for b in blocks.values() {
        total += hermitian_eig(b)?
            .values
            .iter()
            .map(|l| l.abs())
            .sum::<f64>();
    }
    Ok(0.5 * total)
}
