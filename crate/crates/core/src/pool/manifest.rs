use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::mixing::MixWeights;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Real,
    SpatialAug,
    SemanticAug,
}

/// How a synthetic sample was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Provenance {
    Spatial {
        source: String,
        targets: [String; 2],
        weights: MixWeights,
        seed: u64,
        config_hash: String,
    },
    Semantic {
        lesion: String,
        healthy: String,
        seed: u64,
        config_hash: String,
    },
}

impl Provenance {
    pub fn kind(&self) -> SampleKind {
        match self {
            Provenance::Spatial { .. } => SampleKind::SpatialAug,
            Provenance::Semantic { .. } => SampleKind::SemanticAug,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub kind: SampleKind,
    pub image: String,
    pub mask: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl SampleEntry {
    pub fn real(id: impl Into<String>, image: impl Into<String>, mask: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: SampleKind::Real,
            image: image.into(),
            mask: mask.into(),
            provenance: None,
        }
    }

    pub fn synthetic(
        id: impl Into<String>,
        image: impl Into<String>,
        mask: impl Into<String>,
        provenance: Provenance,
    ) -> Self {
        Self {
            id: id.into(),
            kind: provenance.kind(),
            image: image.into(),
            mask: mask.into(),
            provenance: Some(provenance),
        }
    }

    fn check(&self) -> Result<()> {
        match (&self.provenance, self.kind) {
            (None, SampleKind::Real) => Ok(()),
            (Some(_), SampleKind::Real) => bail!(
                Argument,
                "real entry {} carries synthesis provenance",
                self.id
            ),
            (None, _) => bail!(Argument, "synthetic entry {} has no provenance", self.id),
            (Some(p), k) if p.kind() != k => bail!(
                Argument,
                "entry {} provenance does not match its kind",
                self.id
            ),
            _ => Ok(()),
        }
    }
}

/// A planned entry that could not be produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub id: String,
    pub kind: SampleKind,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub real: usize,
    pub spatial_aug: usize,
    pub semantic_aug: usize,
}

impl KindCounts {
    fn tally<'a>(entries: impl IntoIterator<Item = &'a SampleEntry>) -> Self {
        let mut c = Self::default();
        for e in entries {
            match e.kind {
                SampleKind::Real => c.real += 1,
                SampleKind::SpatialAug => c.spatial_aug += 1,
                SampleKind::SemanticAug => c.semantic_aug += 1,
            }
        }
        c
    }

    pub fn synthetic(&self) -> usize {
        self.spatial_aug + self.semantic_aug
    }
}

/// Real and synthetic entries with the sampling ratio and the skip log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawManifest", into = "RawManifest")]
pub struct PoolManifest {
    seed: u64,
    r_real: f64,
    entries: Vec<SampleEntry>,
    counts: KindCounts,
    skipped: Vec<SkipRecord>,
}

#[derive(Serialize, Deserialize)]
struct RawManifest {
    version: u32,
    seed: u64,
    r_real: f64,
    counts: KindCounts,
    entries: Vec<SampleEntry>,
    #[serde(default)]
    skipped: Vec<SkipRecord>,
}

impl PoolManifest {
    pub fn new(
        seed: u64,
        r_real: f64,
        entries: Vec<SampleEntry>,
        skipped: Vec<SkipRecord>,
    ) -> Result<Self> {
        if !(r_real > 0.0 && r_real <= 1.0) {
            bail!(Argument, "r_real must lie in (0, 1], got {r_real}");
        }
        let mut ids = BTreeSet::new();
        for e in &entries {
            e.check()?;
            if !ids.insert(e.id.as_str()) {
                bail!(Argument, "duplicate entry id {}", e.id);
            }
        }
        let counts = KindCounts::tally(&entries);
        Ok(Self {
            seed,
            r_real,
            entries,
            counts,
            skipped,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn r_real(&self) -> f64 {
        self.r_real
    }

    pub fn entries(&self) -> &[SampleEntry] {
        &self.entries
    }

    pub fn counts(&self) -> KindCounts {
        self.counts
    }

    pub fn skipped(&self) -> &[SkipRecord] {
        &self.skipped
    }

    pub fn get(&self, id: &str) -> Option<&SampleEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

impl TryFrom<RawManifest> for PoolManifest {
    type Error = crate::Error;
    fn try_from(raw: RawManifest) -> Result<Self> {
        if raw.version != MANIFEST_VERSION {
            bail!(Argument, "unsupported manifest version {}", raw.version);
        }
        let m = Self::new(raw.seed, raw.r_real, raw.entries, raw.skipped)?;
        if m.counts != raw.counts {
            bail!(Data, "manifest counts do not match its entries");
        }
        Ok(m)
    }
}

impl From<PoolManifest> for RawManifest {
    fn from(m: PoolManifest) -> Self {
        Self {
            version: MANIFEST_VERSION,
            seed: m.seed,
            r_real: m.r_real,
            counts: m.counts,
            entries: m.entries,
            skipped: m.skipped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn spatial(id: &str) -> SampleEntry {
        SampleEntry::synthetic(
            id,
            "a.nii.gz",
            "b.nii.gz",
            Provenance::Spatial {
                source: "s".to_string(),
                targets: ["t1".to_string(), "t2".to_string()],
                weights: MixWeights::new(0.4).unwrap(),
                seed: 1,
                config_hash: "h".to_string(),
            },
        )
    }

    #[test]
    fn counts_and_uniqueness() {
        let m = PoolManifest::new(
            0,
            0.5,
            vec![SampleEntry::real("r", "i", "m"), spatial("x")],
            vec![],
        )
        .unwrap();
        assert_eq!(
            m.counts(),
            KindCounts {
                real: 1,
                spatial_aug: 1,
                semantic_aug: 0
            }
        );
        assert!(PoolManifest::new(0, 0.5, vec![spatial("x"), spatial("x")], vec![]).is_err());
        assert!(PoolManifest::new(0, 0.0, vec![], vec![]).is_err());
        assert!(PoolManifest::new(0, 1.5, vec![], vec![]).is_err());
    }

    #[test]
    fn real_entries_carry_no_provenance() {
        let mut e = spatial("x");
        e.kind = SampleKind::Real;
        assert!(PoolManifest::new(0, 1.0, vec![e], vec![]).is_err());
    }
}
