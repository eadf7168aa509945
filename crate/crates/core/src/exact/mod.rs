//! Exact proportions chain on the discrete simplex and the quantities built
//! on it: spectra, total-variation curves, mixing times, metastable sets,
//! descending paths and the cyclic decomposition.

pub mod cyclic;
pub mod metastable;
pub mod paths;
pub mod spectral;
pub mod states;

use serde::{Deserialize, Serialize};

use crate::chain::FiniteChain;
use crate::error::Result;
use crate::exec::Exec;
use crate::model::{log_stationary_weight, proportions_rate, ModelParams};
pub use states::StateSpace;

/// Default cap on the number of grid points of an exact chain.
pub const DEFAULT_MAX_STATES: usize = 2_000_000;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChainOptions {
    pub max_states: usize,
    pub exec: Exec,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions { max_states: DEFAULT_MAX_STATES, exec: Exec::default() }
    }
}

/// The proportions chain of Glauber dynamics for given `(q, beta, N, kind)`.
#[derive(Clone, Debug)]
pub struct ProportionsChain {
    pub params: ModelParams,
    pub space: StateSpace,
    pub chain: FiniteChain,
}

pub fn build_exact_chain(params: ModelParams, opts: ChainOptions) -> Result<ProportionsChain> {
    params.validate()?;
    let space = StateSpace::new(params.n, params.q, opts.max_states)?;
    let adj = opts.exec.map_range(space.len(), |i| {
        let s = space.state(i);
        space
            .moves(i)
            .into_iter()
            .map(|(k, l, j)| (j, proportions_rate(s, k, l, params.beta, params.kind)))
            .collect::<Vec<_>>()
    });
    let logw = opts
        .exec
        .map_range(space.len(), |i| log_stationary_weight(space.state(i), params.beta));
    let chain = FiniteChain::from_adjacency(adj, logw)?;
    Ok(ProportionsChain { params, space, chain })
}

impl ProportionsChain {
    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// Free energy of every grid point.
    pub fn free_energies(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| crate::model::free_energy(&self.space.proportion(i), self.params.beta))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RateKind;

    #[test]
    fn q2_n2_chain_by_hand() {
        let p = ModelParams::new(2, 2.5, 2, RateKind::Sqrt).unwrap();
        let c = build_exact_chain(p, ChainOptions::default()).unwrap();
        assert_eq!(c.len(), 3);
        // pi ∝ C(2,k) e^{beta (k^2 + (2-k)^2)/4}
        let w = [(2.5f64 * 4.0 / 4.0).exp(), 2.0 * (2.5f64 * 2.0 / 4.0).exp(), (2.5f64).exp()];
        let z: f64 = w.iter().sum();
        for i in 0..3 {
            assert!((c.chain.stationary[i] - w[i] / z).abs() < 1e-14);
        }
        // from (2,0) to (1,1): x_1 exp(-beta/2 (1 - 0 - 1/2))
        assert!((c.chain.rate(0, 1) - (-2.5f64 / 4.0).exp()).abs() < 1e-15);
        assert!(c.chain.detailed_balance_residual() < 1e-13);
    }

    #[test]
    fn all_kinds_reversible() {
        for kind in RateKind::ALL {
            let p = ModelParams::new(3, 3.1, 15, kind).unwrap();
            let c = build_exact_chain(p, ChainOptions::default()).unwrap();
            assert!(c.chain.detailed_balance_residual() < 1e-12, "{kind}");
        }
    }
}
