use rand::Rng;

use super::FileId;
use crate::error::{Error, Result};

/// One device and the single file type it produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogEntry {
    pub file_id: FileId,
    pub device_id: u32,
    /// Validity duration in time steps.
    pub lifetime: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
    lifetime_lo: u32,
    lifetime_hi: u32,
}

impl Catalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    /// Panics on an id outside `1..=N`; requests are generated from the
    /// catalog so an unknown id is a workload bug.
    pub fn entry(&self, file_id: FileId) -> &CatalogEntry {
        match (file_id as usize)
            .checked_sub(1)
            .and_then(|i| self.entries.get(i))
        {
            Some(e) => e,
            None => panic!("unknown file id {file_id} (catalog has {})", self.len()),
        }
    }

    pub fn lifetime_lo(&self) -> u32 {
        self.lifetime_lo
    }

    pub fn lifetime_hi(&self) -> u32 {
        self.lifetime_hi
    }
}

/// Draws one lifetime per device, uniformly over `lifetime_lo..=lifetime_hi`.
pub fn build_catalog<R: Rng + ?Sized>(
    n_devices: usize,
    lifetime_lo: u32,
    lifetime_hi: u32,
    rng: &mut R,
) -> Result<Catalog> {
    if n_devices < 1 {
        return Err(Error::config("catalog needs at least one device"));
    }
    if lifetime_lo < 1 || lifetime_lo > lifetime_hi {
        return Err(Error::config(format!(
            "invalid lifetime bounds [{lifetime_lo}, {lifetime_hi}]"
        )));
    }
    let entries = (1..=n_devices as u32)
        .map(|id| CatalogEntry {
            file_id: id,
            device_id: id,
            lifetime: rng.random_range(lifetime_lo..=lifetime_hi),
        })
        .collect();
    Ok(Catalog {
        entries,
        lifetime_lo,
        lifetime_hi,
    })
}
