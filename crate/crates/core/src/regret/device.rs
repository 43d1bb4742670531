use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfg::{mixture_flow, MixedPolicy, PolicySet, PopulationFlow, PROB_TOL};

/// One atom of a correlation device: population distribution `nu`
/// recommended with probability `weight`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub nu: MixedPolicy,
}

/// Finite distribution over population distributions of one policy set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDevice {
    atoms: Vec<Atom>,
}

impl CorrelationDevice {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Parameter("correlation device has no atoms".into()));
        }
        if atoms.iter().any(|a| !(a.weight >= 0.0 && a.weight.is_finite())) {
            return Err(Error::Parameter("device weights must be finite and >= 0".into()));
        }
        // Summation error grows with the number of atoms.
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > PROB_TOL * atoms.len() as f64 {
            return Err(Error::Parameter(format!("device weights sum to {total}, not 1")));
        }
        Ok(CorrelationDevice { atoms })
    }

    /// Builds a device from weights that sum to one up to accumulated rounding,
    /// dropping zero-weight atoms.
    pub fn from_weighted(parts: impl IntoIterator<Item = (f64, MixedPolicy)>) -> Result<Self> {
        let mut atoms: Vec<Atom> = parts
            .into_iter()
            .filter(|(w, _)| *w > 0.0)
            .map(|(weight, nu)| Atom { weight, nu })
            .collect();
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Parameter("device weights have no mass".into()));
        }
        atoms.iter_mut().for_each(|a| a.weight /= total);
        Self::new(atoms)
    }

    pub fn singleton(nu: MixedPolicy) -> Self {
        CorrelationDevice {
            atoms: vec![Atom { weight: 1.0, nu }],
        }
    }

    /// Empirical play of a sequence: each member with weight `1/T`.
    pub fn uniform(nus: impl IntoIterator<Item = MixedPolicy>) -> Result<Self> {
        let nus: Vec<_> = nus.into_iter().collect();
        let w = 1.0 / nus.len() as f64;
        Self::from_weighted(nus.into_iter().map(|nu| (w, nu)))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Largest policy index referenced plus one.
    pub fn width(&self) -> usize {
        self.atoms.iter().map(|a| a.nu.len()).max().unwrap_or(0)
    }

    /// `rho(pi_i) = sum_t rho_t nu_t(i)`.
    pub fn marginal(&self, index: usize) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.nu.weight(index)).sum()
    }

    pub fn marginals(&self) -> Vec<f64> {
        (0..self.width()).map(|i| self.marginal(i)).collect()
    }

    /// Atom weights conditioned on recommendation `index`:
    /// `rho(nu_t | pi_i) = rho_t nu_t(i) / rho(pi_i)`.
    pub fn conditional_weights(&self, index: usize) -> Result<Vec<f64>> {
        let m = self.marginal(index);
        if m <= 0.0 {
            return Err(Error::UndefinedConditional(index));
        }
        Ok(self
            .atoms
            .iter()
            .map(|a| a.weight * a.nu.weight(index) / m)
            .collect())
    }

    /// Population flow of each atom.
    pub fn flows(&self, set: &PolicySet) -> Result<Vec<PopulationFlow>> {
        self.atoms.iter().map(|a| mixture_flow(set, &a.nu)).collect()
    }

    pub(crate) fn check(&self, set: &PolicySet) -> Result<()> {
        if self.width() > set.len() {
            return Err(Error::Lookup(format!(
                "device refers to {} policies but the set holds {}",
                self.width(),
                set.len()
            )));
        }
        Ok(())
    }
}
