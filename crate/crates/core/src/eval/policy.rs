use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::CompiledRouter;
use crate::numerics::SplitMix64;
use crate::simenv::SimQuery;

/// A routing policy: maps a query to a retriever id (0 is no retrieval).
pub trait Policy {
    fn name(&self) -> &str;
    fn choose(&self, q: &SimQuery) -> Result<usize>;
}

/// Routes every query to the same retriever.
#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    name: String,
    pub id: usize,
}

impl ConstantPolicy {
    pub fn new(name: impl Into<String>, id: usize) -> Self {
        Self { name: name.into(), id }
    }

    pub fn no_retrieval() -> Self {
        Self::new("no_retrieval", 0)
    }
}

impl Policy for ConstantPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn choose(&self, _: &SimQuery) -> Result<usize> {
        Ok(self.id)
    }
}

/// Looks each query up in a precomputed table.
#[derive(Debug, Clone)]
pub struct TablePolicy {
    name: String,
    pub choices: BTreeMap<String, usize>,
}

impl TablePolicy {
    pub fn new(name: impl Into<String>, choices: BTreeMap<String, usize>) -> Self {
        Self { name: name.into(), choices }
    }
}

impl Policy for TablePolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn choose(&self, q: &SimQuery) -> Result<usize> {
        self.choices
            .get(&q.id)
            .copied()
            .ok_or_else(|| Error::Empty(format!("policy {} has no choice for query {}", self.name, q.id)))
    }
}

/// Uniform over `0..num_choices`, one keyed draw per query id.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    pub seed: u64,
    pub num_choices: usize,
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn choose(&self, q: &SimQuery) -> Result<usize> {
        if self.num_choices == 0 {
            return Err(Error::Empty("random policy over zero choices".into()));
        }
        Ok(SplitMix64::keyed(self.seed, &["random-policy".into(), q.id.as_str().into()]).below(self.num_choices))
    }
}

/// The trained router.
#[derive(Debug, Clone)]
pub struct RouterPolicy<'a> {
    name: String,
    router: CompiledRouter<'a>,
}

impl<'a> RouterPolicy<'a> {
    pub fn new(name: impl Into<String>, router: CompiledRouter<'a>) -> Self {
        Self { name: name.into(), router }
    }
}

impl Policy for RouterPolicy<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn choose(&self, q: &SimQuery) -> Result<usize> {
        Ok(self.router.route(&q.text)?.chosen)
    }
}
