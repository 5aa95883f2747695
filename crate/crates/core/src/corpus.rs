//! Shipped regression data: the rational factorization corpus, commutator norm
//! baselines and minimum-norm instances, with the constructions that regenerate them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::factorization::RationalFunction;
use crate::norms::bmo_norm;
use crate::operators::{assemble_dense, operator_norm, symmetric_spectrum, unrealify, OperatorHandle, PowerOptions};
use crate::quantities::{eval_quantity, QuantityDescriptor};
use crate::spectral::{random_field, random_real_field, Field, GridSpec};

const RATIONAL_JSON: &str = include_str!("../data/rational_corpus.json");
const COMMUTATOR_JSON: &str = include_str!("../data/commutator_corpus.json");
const MINNORM_JSON: &str = include_str!("../data/minnorm_instances.json");

/// Relative width of the commutator baseline window.
pub const BASELINE_WINDOW: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDims {
    #[serde(default = "one")]
    pub dim: usize,
    pub n: usize,
    pub period: f64,
}

fn one() -> usize {
    1
}

impl GridDims {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, self.n, self.period)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalInstance {
    pub name: String,
    pub function: RationalFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalCorpus {
    pub grid: GridDims,
    pub instances: Vec<RationalInstance>,
}

impl RationalCorpus {
    pub fn shipped() -> Self {
        serde_json::from_str(RATIONAL_JSON).expect("shipped rational corpus parses")
    }

    pub fn get(&self, name: &str) -> Option<&RationalFunction> {
        self.instances.iter().find(|i| i.name == name).map(|i| &i.function)
    }
}

/// One `(b, kind)` pair with its recorded ratio `‖T_b‖ / ‖b‖_BMO`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutatorSample {
    pub quantity: String,
    pub grid: GridDims,
    pub seed: u64,
    pub band: usize,
    pub baseline: f64,
}

impl CommutatorSample {
    pub fn descriptor(&self) -> Result<QuantityDescriptor> {
        QuantityDescriptor::parse(&self.quantity, self.grid.spec()?)
    }

    /// Seeded real band-limited symbol, rescaled to unit sup norm.
    pub fn symbol(&self) -> Result<Field<f64>> {
        let g = self.grid.spec()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let b = random_real_field::<f64, _>(&g, self.band, &mut rng);
        Ok(b.scale(1.0 / b.max_abs()))
    }

    pub fn ratio(&self) -> Result<f64> {
        commutator_ratio(&self.descriptor()?, &self.symbol()?)
    }

    pub fn within_baseline(&self, ratio: f64) -> bool {
        (ratio - self.baseline).abs() <= BASELINE_WINDOW * self.baseline
    }
}

/// `‖T_b‖ / ‖b‖_BMO` with the BMO supremum over all dyadic generations of the grid.
pub fn commutator_ratio(d: &QuantityDescriptor, b: &Field<f64>) -> Result<f64> {
    let h = OperatorHandle::new(d, b)?;
    let norm = operator_norm(&h, &PowerOptions::default());
    let depth = d.grid().n().trailing_zeros() as usize;
    let bmo = bmo_norm(b, depth)?;
    if bmo <= 0.0 {
        return Err(LabError::precondition("symbol has zero mean oscillation"));
    }
    Ok(norm.value / bmo)
}

pub fn commutator_corpus() -> Vec<CommutatorSample> {
    serde_json::from_str(COMMUTATOR_JSON).expect("shipped commutator corpus parses")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// `f = Qω` for a unit top eigenvector `ω` of `T_b`, `b` normalized to `‖b‖_{X_Q} = 1`;
    /// the minimum energy is exactly 1.
    Eigen,
    /// `f = Qω₀` for a seeded random `ω₀`; only `‖f‖_{X_Q*} ≤ ‖ω₀‖²` is known.
    Feasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinNormInstance {
    pub name: String,
    pub quantity: String,
    pub grid: GridDims,
    pub construction: Construction,
    pub seed: u64,
    pub band: usize,
}

/// A built instance: data `f`, the generating `ω` and, for eigen constructions, the multiplier.
#[derive(Clone, Debug)]
pub struct BuiltInstance {
    pub descriptor: QuantityDescriptor,
    pub data: Field<f64>,
    pub omega: Field<f64>,
    pub multiplier: Option<Field<f64>>,
}

impl BuiltInstance {
    pub fn certified(&self) -> bool {
        self.multiplier.is_some()
    }

    /// Energy of the generating field, an upper bound for the minimum.
    pub fn energy_bound(&self) -> f64 {
        self.omega.norm_sq()
    }
}

impl MinNormInstance {
    pub fn build(&self) -> Result<BuiltInstance> {
        let d = QuantityDescriptor::parse(&self.quantity, self.grid.spec()?)?;
        match self.construction {
            Construction::Eigen => {
                let (b, omega) = eigen_pair(&d, self.seed, self.band)?;
                let data = eval_quantity(&d, &omega)?;
                Ok(BuiltInstance { descriptor: d, data, omega, multiplier: Some(b) })
            }
            Construction::Feasible => {
                let g = *d.grid();
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let omega = if d.is_complex() {
                    random_field::<f64, _>(&g, self.band, false, &mut rng)
                } else {
                    random_real_field::<f64, _>(&g, self.band, &mut rng)
                };
                let data = eval_quantity(&d, &omega)?;
                Ok(BuiltInstance { descriptor: d, data, omega, multiplier: None })
            }
        }
    }
}

pub fn minnorm_instances() -> Vec<MinNormInstance> {
    serde_json::from_str(MINNORM_JSON).expect("shipped minimum-norm instances parse")
}

/// Seeded symbol `b` rescaled so that the top eigenvalue of the dense `T_b` is 1,
/// together with a unit top eigenvector.
pub fn eigen_pair(d: &QuantityDescriptor, seed: u64, band: usize) -> Result<(Field<f64>, Field<f64>)> {
    let g = *d.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = random_real_field::<f64, _>(&g, band, &mut rng);
    let h = OperatorHandle::new(d, &b)?;
    let (vals, vecs) = symmetric_spectrum(&assemble_dense(&h)?);
    if vals[0] <= 0.0 {
        return Err(LabError::precondition("T_b has no positive eigenvalue"));
    }
    let x: Vec<f64> = vecs.column(0).iter().copied().collect();
    Ok((b.scale(1.0 / vals[0]), unrealify(&g, d.is_complex(), &x)))
}
