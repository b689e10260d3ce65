//! The GNN design space: genotypes, their canonical codec, sampling,
//! variation operators, knowledge seeding and evolutionary search.

mod codec;
mod genotype;
mod search;
mod seed;
mod space;
mod variation;

pub use codec::{decode, encode, CodecError};
pub use genotype::{
    Activation, ArchGenotype, Epochs, LearningRate, Op, Pooling, TaskType, WeightDecay, DIMS,
    DROPOUT_STEPS, MAX_LAYERS,
};
pub use search::{
    evolve, random_search, EvolveBudget, EvolveParams, Evaluator, EvalFailure, Generation,
    SearchTrace, Scored,
};
pub use seed::seed_from_knowledge;
pub use space::{sample, validate, SearchSpace};
pub use variation::{crossover, mutate, Mutation};
