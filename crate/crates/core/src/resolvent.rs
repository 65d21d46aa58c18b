//! Eigenvalue sequences along a dyadic mollification ladder.

use serde::Serialize;

use crate::eigen::{eigensolve, EigenSystem};
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::noise::{enhance, Mollifier};
use crate::operator::AndersonOperator;

/// Whether the renormalization constant is subtracted along the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Renormalization {
    Subtract,
    Zero,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventTable {
    pub eps: Vec<f64>,
    pub c_eps: Vec<f64>,
    /// `lambdas[i][k]` is `λ_k(ε_i)`.
    pub lambdas: Vec<Vec<f64>>,
    /// `diffs[i][k] = λ_k(ε_{i+1}) - λ_k(ε_i)`.
    pub diffs: Vec<Vec<f64>>,
}

pub fn resolvent_probe(grid: TorusGrid, seed: u64, eps_list: &[f64], m: usize, renorm: Renormalization) -> Result<ResolventTable> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("mollification scales must decrease".into()));
    }
    let mut c_eps = Vec::new();
    let mut lambdas = Vec::new();
    for &eps in eps_list {
        let noise = enhance(grid, seed, &Mollifier::new(eps)?);
        let mut op = AndersonOperator::new(&noise);
        if renorm == Renormalization::Zero {
            op = op.with_renorm(0.0);
        }
        let es: EigenSystem = eigensolve(&op, m)?;
        c_eps.push(noise.c_eps);
        lambdas.push(es.eigenvalues);
    }
    let diffs = lambdas
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
        .collect();
    Ok(ResolventTable {
        eps: eps_list.to_vec(),
        c_eps,
        lambdas,
        diffs,
    })
}

/// The zero-noise probe: every row is the free Laplacian spectrum.
pub fn resolvent_probe_free(grid: TorusGrid, eps_list: &[f64], m: usize) -> Result<ResolventTable> {
    let mut lambdas = Vec::new();
    for _ in eps_list {
        let op = AndersonOperator::with_potential(crate::grid::GridField::zeros(grid), 0.0);
        lambdas.push(eigensolve(&op, m)?.eigenvalues);
    }
    let diffs = lambdas
        .windows(2)
        .map(|w: &[Vec<f64>]| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
        .collect();
    Ok(ResolventTable {
        eps: eps_list.to_vec(),
        c_eps: vec![0.0; eps_list.len()],
        lambdas,
        diffs,
    })
}
