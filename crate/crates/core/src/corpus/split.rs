use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{largest_remainder, Cohort, Label};
use crate::error::{Error, Result};
use crate::rng;

/// Minimum notes per label when stratifying.
const MIN_PER_CLASS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
    pub stratify: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: [0.7, 0.1, 0.2],
            seed: 0,
            stratify: true,
        }
    }
}

impl SplitSpec {
    pub fn new(ratios: [f64; 3], seed: u64) -> Result<Self> {
        let spec = Self {
            ratios,
            seed,
            stratify: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a spec from relative weights such as `7,1,2`.
    pub fn from_weights(weights: [f64; 3], seed: u64) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || sum <= 0.0 {
            return Err(Error::InvalidArgument(format!("bad split weights {weights:?}")));
        }
        Self::new(weights.map(|w| w / sum), seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidArgument(format!("negative split ratio in {:?}", self.ratios)));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios {:?} sum to {sum}, not 1",
                self.ratios
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl DataSplit {
    pub fn parts(&self) -> [&[String]; 3] {
        [&self.train, &self.val, &self.test]
    }
}

/// Serialized split: `{train, val, test, spec}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub spec: SplitSpec,
}

impl SplitManifest {
    pub fn new(split: DataSplit, spec: SplitSpec) -> Self {
        Self {
            train: split.train,
            val: split.val,
            test: split.test,
            spec,
        }
    }

    pub fn split(&self) -> DataSplit {
        DataSplit {
            train: self.train.clone(),
            val: self.val.clone(),
            test: self.test.clone(),
        }
    }
}

/// A patient's notes, which always land in the same partition.
struct Group {
    positions: Vec<usize>,
}

/// Partitions a cohort into train/val/test.
///
/// Within each label (or over the whole cohort when `stratify` is false),
/// patient groups are shuffled by the seed and poured into the partitions in
/// order until each reaches its largest-remainder target. When every patient
/// has a single note the per-label counts equal the apportionment exactly; a
/// multi-note patient that does not fit the current partition spills into
/// the partition with the most room left.
pub fn stratified_split(cohort: &Cohort, spec: &SplitSpec) -> Result<DataSplit> {
    spec.validate()?;
    let notes = cohort.notes();

    // group by patient, keyed by the label of the patient's first note
    let mut group_of: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<(Label, Group)> = Vec::new();
    for (i, n) in notes.iter().enumerate() {
        match group_of.get(n.patient_id.as_str()) {
            Some(&g) => groups[g].1.positions.push(i),
            None => {
                group_of.insert(&n.patient_id, groups.len());
                groups.push((n.label, Group { positions: vec![i] }));
            }
        }
    }

    let mut strata: BTreeMap<Option<Label>, Vec<Group>> = BTreeMap::new();
    for (label, g) in groups {
        let key = if spec.stratify { Some(label) } else { None };
        strata.entry(key).or_default().push(g);
    }

    if spec.stratify {
        let counts = cohort.label_counts();
        for label in Label::ALL {
            let available = counts.get(label);
            if available < MIN_PER_CLASS {
                return Err(Error::ClassTooSmall {
                    label: label.to_string(),
                    available,
                    required: MIN_PER_CLASS,
                });
            }
        }
    }

    let mut parts: [Vec<usize>; 3] = Default::default();
    for (stratum, (key, mut stratum_groups)) in strata.into_iter().enumerate() {
        let tag = key.map(|l| l.index() as u64).unwrap_or(stratum as u64);
        let mut rng = rng::sub_rng(spec.seed, rng::SPLIT, tag);
        stratum_groups.shuffle(&mut rng);
        let size: usize = stratum_groups.iter().map(|g| g.positions.len()).sum();
        let targets = largest_remainder(size, &spec.ratios);
        let mut room: [isize; 3] = [targets[0] as isize, targets[1] as isize, targets[2] as isize];
        for g in stratum_groups {
            let need = g.positions.len() as isize;
            let slot = (0..3).find(|&p| room[p] >= need).unwrap_or_else(|| {
                (0..3).rev().max_by_key(|&p| room[p]).unwrap_or(0)
            });
            room[slot] -= need;
            parts[slot].extend(g.positions);
        }
    }

    let ids = |v: &Vec<usize>| v.iter().map(|&i| notes[i].id.clone()).collect::<Vec<_>>();
    Ok(DataSplit {
        train: ids(&parts[0]),
        val: ids(&parts[1]),
        test: ids(&parts[2]),
    })
}
