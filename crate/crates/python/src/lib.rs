//! Python bindings. Correlations cross the boundary as their JSON text and
//! matrices as nested lists of complex numbers.

use dicka_core::attacks::{self, Figure};
use dicka_core::correlations::{
    check_no_signaling, embed_cq, input_register, output_register, uniform_inputs,
};
use dicka_core::games;
use dicka_core::infotheory::{conditional_total_correlation, Conditioning, RegisterPartition};
use dicka_core::protocol::{run_rmw18, ProtocolConfig};
use dicka_core::qmat::{self, ComplexMatrix, DensityMatrix, C64};
use dicka_core::Correlation;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: dicka_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn correlation(json: &str) -> PyResult<Correlation> {
    Correlation::from_json(json).map_err(err)
}

fn density(rows: Vec<Vec<C64>>, dims: Option<Vec<usize>>) -> PyResult<DensityMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let m = ComplexMatrix::from_vec(n, n, rows.into_iter().flatten().collect()).map_err(err)?;
    DensityMatrix::new(m, dims.unwrap_or_else(|| vec![n])).map_err(err)
}

/// Returns (passed, worst violation).
#[pyfunction]
#[pyo3(signature = (json, tol = 1e-10))]
fn check_nosig(json: &str, tol: f64) -> PyResult<(bool, f64)> {
    let r = check_no_signaling(&correlation(json)?, tol);
    Ok((r.passed, r.worst_violation))
}

/// I(A1;...;AM|X) in bits under the trivial extension; `q` defaults to uniform.
#[pyfunction]
#[pyo3(signature = (json, q = None))]
fn total_correlation(json: &str, q: Option<Vec<f64>>) -> PyResult<f64> {
    let p = correlation(json)?;
    let q = q.unwrap_or_else(|| uniform_inputs(&p));
    let m = p.num_parties();
    let part = RegisterPartition::new(
        (0..m).map(|i| vec![output_register(i)]).collect(),
        Conditioning::classical((0..m).map(input_register).collect()),
    )
    .map_err(err)?;
    conditional_total_correlation(&embed_cq(&p, &q, None).map_err(err)?, &part).map_err(err)
}

#[pyfunction]
fn parity_chsh_win_probability(json: &str) -> PyResult<f64> {
    games::parity_chsh_win_probability(&correlation(json)?).map_err(err)
}

#[pyfunction]
fn bell_value_s(json: &str) -> PyResult<f64> {
    games::bell_value_s(&correlation(json)?).map_err(err)
}

#[pyfunction]
fn isotropic_correlation(p: f64) -> PyResult<String> {
    attacks::isotropic_correlation(p)
        .and_then(|c| c.to_json())
        .map_err(err)
}

#[pyfunction]
fn convex_attack_bound(s: f64) -> PyResult<f64> {
    attacks::convex_attack_bound(attacks::isotropic_p_of_s(s).map_err(err)?).map_err(err)
}

#[pyfunction]
fn dephasing_attack_bound(s: f64) -> PyResult<f64> {
    attacks::dephasing_attack_bound(s).map_err(err)
}

#[pyfunction]
fn diqkd_attack_bound(s: f64) -> PyResult<f64> {
    attacks::diqkd_attack_bound(s).map_err(err)
}

/// Rows (parameter, S, bound) of one figure curve. `which` is one of
/// "fig2", "fig2-dephasing", "fig3", "fig4".
#[pyfunction]
#[pyo3(signature = (which, grid_steps = 101))]
fn figure(which: &str, grid_steps: usize) -> PyResult<Vec<(f64, f64, f64)>> {
    let fig = match which {
        "fig2" => Figure::Fig2Attack1,
        "fig2-dephasing" => Figure::Fig2Dephasing,
        "fig3" => Figure::Fig3,
        "fig4" => Figure::Fig4,
        other => return Err(PyValueError::new_err(format!("unknown figure {other:?}"))),
    };
    let grid = attacks::figure_grid(fig, grid_steps).map_err(err)?;
    let curve = attacks::figure_sweep(fig, &grid).map_err(err)?;
    Ok(curve
        .rows
        .iter()
        .map(|r| (r.parameter, r.s, r.bound))
        .collect())
}

/// Runs the protocol on a config JSON and returns the stats JSON.
#[pyfunction]
fn simulate(config_json: &str) -> PyResult<String> {
    let cfg = ProtocolConfig::from_json(config_json).map_err(err)?;
    run_rmw18(&cfg).and_then(|s| s.to_json()).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (rows, dims = None))]
fn von_neumann_entropy(rows: Vec<Vec<C64>>, dims: Option<Vec<usize>>) -> PyResult<f64> {
    qmat::von_neumann_entropy(&density(rows, dims)?).map_err(err)
}

/// Partial trace keeping the subsystems listed in `keep`.
#[pyfunction]
fn partial_trace(
    rows: Vec<Vec<C64>>,
    dims: Vec<usize>,
    keep: Vec<usize>,
) -> PyResult<Vec<Vec<C64>>> {
    let r = qmat::partial_trace(&density(rows, Some(dims))?, &keep).map_err(err)?;
    let m = r.matrix();
    Ok((0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect())
}

#[pymodule]
fn dicka(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(check_nosig, m)?)?;
    m.add_function(wrap_pyfunction!(total_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(parity_chsh_win_probability, m)?)?;
    m.add_function(wrap_pyfunction!(bell_value_s, m)?)?;
    m.add_function(wrap_pyfunction!(isotropic_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(convex_attack_bound, m)?)?;
    m.add_function(wrap_pyfunction!(dephasing_attack_bound, m)?)?;
    m.add_function(wrap_pyfunction!(diqkd_attack_bound, m)?)?;
    m.add_function(wrap_pyfunction!(figure, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(von_neumann_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(partial_trace, m)?)?;
    Ok(())
}
