//! Benchmark problems together with their decompositions.

mod map;
mod rooms;
mod taxi;

use crate::error::Result;
use crate::hierarchy::{induce_partition, PartitionInput, PartitionSpec, SubtaskTemplate};
use crate::lmdp::Lmdp;
use crate::scalar::Scalar;

pub use map::{load_map, parse_map, GridMap};
pub use rooms::{build_rooms, RoomsConfig, Slot};
pub use taxi::{build_taxi, TaxiConfig, TaxiState};

/// A problem with a verified decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T> {
    pub lmdp: Lmdp<T>,
    pub spec: PartitionSpec,
    pub templates: Vec<SubtaskTemplate<T>>,
}

impl<T: Scalar> Decomposition<T> {
    pub fn new(lmdp: Lmdp<T>, input: &PartitionInput) -> Result<Self> {
        let (spec, templates) = induce_partition(&lmdp, input)?;
        Ok(Decomposition { lmdp, spec, templates })
    }
}

/// Uniform distribution over each successor set, as sparse rows.
pub(crate) fn uniform_rows<T: Scalar>(successors: Vec<Vec<usize>>) -> Vec<Vec<(usize, T)>> {
    successors
        .into_iter()
        .map(|mut next| {
            next.sort_unstable();
            next.dedup();
            let p = T::one() / T::from_usize(next.len()).expect("row length fits scalar");
            next.into_iter().map(|s| (s, p)).collect()
        })
        .collect()
}
