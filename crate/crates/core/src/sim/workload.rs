use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{FileId, TimeStep};
use crate::error::{Error, Result};

/// A user request arriving at a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub t: TimeStep,
    pub leaf_id: usize,
    pub file_id: FileId,
}

/// Popularity as seen by one region: a shared Zipf pmf over ranks plus a
/// region-specific assignment of files to ranks.
#[derive(Debug, Clone)]
pub struct RegionPopularity {
    rank_to_file: Vec<FileId>,
    // file_rank[file_id - 1] is the 1-based rank in this region
    file_rank: Vec<u32>,
    pmf: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl RegionPopularity {
    /// Shuffles the file-to-rank assignment with `rng`.
    pub fn random<R: Rng + ?Sized>(pmf: &[f64], rng: &mut R) -> Result<Self> {
        let mut perm: Vec<FileId> = (1..=pmf.len() as FileId).collect();
        perm.shuffle(rng);
        Self::with_permutation(pmf, perm)
    }

    /// `rank_to_file[r]` is the file at rank `r + 1`.
    pub fn with_permutation(pmf: &[f64], rank_to_file: Vec<FileId>) -> Result<Self> {
        let n = pmf.len();
        if rank_to_file.len() != n {
            return Err(Error::config("permutation length differs from pmf length"));
        }
        let mut file_rank = vec![0u32; n];
        for (rank, &f) in rank_to_file.iter().enumerate() {
            let idx = (f as usize)
                .checked_sub(1)
                .filter(|&i| i < n && file_rank[i] == 0)
                .ok_or_else(|| Error::config("rank assignment is not a permutation of 1..=N"))?;
            file_rank[idx] = rank as u32 + 1;
        }
        let sampler = WeightedIndex::new(pmf)
            .map_err(|e| Error::config(format!("invalid popularity weights: {e}")))?;
        Ok(RegionPopularity {
            rank_to_file,
            file_rank,
            pmf: pmf.to_vec(),
            sampler,
        })
    }

    pub fn n_files(&self) -> usize {
        self.rank_to_file.len()
    }

    /// File at 1-based `rank`.
    pub fn file_at_rank(&self, rank: u32) -> FileId {
        self.rank_to_file[rank as usize - 1]
    }

    /// 1-based popularity rank of `file_id` in this region.
    pub fn rank_of(&self, file_id: FileId) -> u32 {
        self.file_rank[file_id as usize - 1]
    }

    /// Request probability of `file_id` in this region.
    pub fn probability(&self, file_id: FileId) -> f64 {
        self.pmf[self.rank_of(file_id) as usize - 1]
    }

    pub fn sample_file<R: Rng + ?Sized>(&self, rng: &mut R) -> FileId {
        self.rank_to_file[self.sampler.sample(rng)]
    }
}

/// Requests for one leaf at one step: a Poisson(`w`) count, each file drawn
/// independently from the leaf's regional popularity.
pub fn generate_requests<R: Rng + ?Sized>(
    t: TimeStep,
    leaf_id: usize,
    region: &RegionPopularity,
    w: f64,
    rng: &mut R,
) -> Result<Vec<Request>> {
    let arrivals =
        Poisson::new(w).map_err(|e| Error::config(format!("invalid request rate {w}: {e}")))?;
    let count = arrivals.sample(rng) as usize;
    Ok((0..count)
        .map(|_| Request {
            t,
            leaf_id,
            file_id: region.sample_file(rng),
        })
        .collect())
}
