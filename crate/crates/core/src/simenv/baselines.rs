use std::collections::BTreeMap;

use super::world::{SimQuery, SimWorld, Split};
use crate::error::{Error, Result};
use crate::eval::{ConstantPolicy, RandomPolicy, TablePolicy};
use crate::supervision::GenerationOutcome;

/// Generation outcomes per query id, indexed by retriever id `0..=K`.
pub type OutcomeTable = BTreeMap<String, Vec<GenerationOutcome>>;

pub fn outcome_table(world: &SimWorld, queries: &[SimQuery]) -> Result<OutcomeTable> {
    queries
        .iter()
        .map(|q| {
            let row = (0..=world.config.num_retrievers)
                .map(|i| world.mock_generate(q, i))
                .collect::<Result<Vec<_>>>()?;
            Ok((q.id.clone(), row))
        })
        .collect()
}

/// Reference policies: per-query oracle, best fixed retriever, random.
#[derive(Debug, Clone)]
pub struct BaselinePolicies {
    pub per_query_oracle: TablePolicy,
    pub single_best: ConstantPolicy,
    pub random: RandomPolicy,
}

fn argmax_lowest(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Builds the baselines from a complete outcome table over `queries`.
pub fn oracle_policies_from(
    table: &OutcomeTable,
    queries: &[SimQuery],
    num_choices: usize,
    random_seed: u64,
) -> Result<BaselinePolicies> {
    if queries.is_empty() {
        return Err(Error::Empty("baseline split".into()));
    }
    let rows = queries
        .iter()
        .map(|q| match table.get(&q.id) {
            Some(row) if row.len() == num_choices => Ok((q.id.as_str(), row)),
            Some(row) => Err(Error::LengthMismatch { expected: num_choices, actual: row.len() }),
            None => Err(Error::Empty(format!("no outcomes for query {}", q.id))),
        })
        .collect::<Result<Vec<_>>>()?;

    let choices = rows
        .iter()
        .map(|(id, row)| (id.to_string(), argmax_lowest(row.iter().map(|o| f64::from(o.em))).unwrap_or(0)))
        .collect();
    let totals = (0..num_choices).map(|i| rows.iter().map(|(_, row)| u64::from(row[i].em)).sum::<u64>() as f64);
    let best = argmax_lowest(totals).unwrap_or(0);
    Ok(BaselinePolicies {
        per_query_oracle: TablePolicy::new("per_query_oracle", choices),
        single_best: ConstantPolicy::new("single_best", best),
        random: RandomPolicy { seed: random_seed, num_choices },
    })
}

pub fn oracle_policies(world: &SimWorld, split: Split, random_seed: u64) -> Result<BaselinePolicies> {
    let queries = world.split(split);
    let table = outcome_table(world, queries)?;
    oracle_policies_from(&table, queries, world.config.num_retrievers + 1, random_seed)
}
