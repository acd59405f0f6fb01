use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    TheoremWise,
    ProjectWise,
}

impl FromStr for SplitPolicy {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theorem-wise" | "theorem_wise" => Ok(SplitPolicy::TheoremWise),
            "project-wise" | "project_wise" => Ok(SplitPolicy::ProjectWise),
            _ => Err(CorpusError::InvalidSpec(format!("unknown split policy `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Train,
    Valid,
    Test,
}

impl FromStr for Subset {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Subset::Train),
            "valid" | "validation" => Ok(Subset::Valid),
            "test" => Ok(Subset::Test),
            _ => Err(CorpusError::InvalidSpec(format!("unknown subset `{s}`"))),
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::Train => "train",
            Subset::Valid => "valid",
            Subset::Test => "test",
        })
    }
}

/// Exact (train, valid, test) fractions summing to one.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Fractions([Ratio<u64>; 3]);

impl Fractions {
    pub fn new(train: Ratio<u64>, valid: Ratio<u64>, test: Ratio<u64>) -> Result<Self, CorpusError> {
        if train + valid + test != Ratio::one() {
            return Err(CorpusError::InvalidSpec(format!("fractions {train}, {valid}, {test} do not sum to 1")));
        }
        Ok(Fractions([train, valid, test]))
    }

    pub fn as_array(&self) -> [Ratio<u64>; 3] {
        self.0
    }
}

fn parse_decimal(s: &str) -> Result<Ratio<u64>, CorpusError> {
    let bad = || CorpusError::InvalidSpec(format!("not a non-negative decimal: `{s}`"));
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if (int.is_empty() && frac.is_empty()) || frac.len() > 18 || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let den = 10u64.pow(frac.len() as u32);
    let num: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    Ok(Ratio::from_integer(int) + Ratio::new(num, den))
}

impl FromStr for Fractions {
    type Err = CorpusError;

    /// `0.95,0.01,0.04` (decimals or `p/q`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s.split(',').map(parse_decimal).collect::<Result<Vec<_>, _>>()?;
        match parts.as_slice() {
            [a, b, c] => Fractions::new(*a, *b, *c),
            _ => Err(CorpusError::InvalidSpec(format!("expected three fractions, got `{s}`"))),
        }
    }
}

impl fmt::Display for Fractions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "{a},{b},{c}")
    }
}

impl Serialize for Fractions {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fractions {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SplitSpec {
    pub policy: SplitPolicy,
    pub fractions: Fractions,
    pub seed: u64,
}

/// Theorem ids per subset, each in corpus order.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn subset(&self, which: Subset) -> &[String] {
        match which {
            Subset::Train => &self.train,
            Subset::Valid => &self.valid,
            Subset::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }
}

/// Largest-remainder apportionment of `total` items; ties go to the earlier subset.
pub(crate) fn apportion(total: u64, fractions: &[Ratio<u64>; 3]) -> [u64; 3] {
    let quotas: Vec<Ratio<u64>> = fractions.iter().map(|f| f * total).collect();
    let mut counts: [u64; 3] = std::array::from_fn(|i| quotas[i].to_integer());
    let mut left = total - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..3).filter(|&i| !fractions[i].is_zero()).collect();
    order.sort_by(|&a, &b| quotas[b].fract().cmp(&quotas[a].fract()).then(a.cmp(&b)));
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Partition the corpus' theorems into train / valid / test.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<Split, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let fractions = spec.fractions.as_array();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut assignment: HashMap<&str, usize> = HashMap::new();
    match spec.policy {
        SplitPolicy::TheoremWise => {
            let counts = apportion(corpus.theorems.len() as u64, &fractions);
            let mut ids: Vec<&str> = corpus.theorems.iter().map(|t| t.id.as_str()).collect();
            ids.shuffle(&mut rng);
            let mut it = ids.into_iter();
            for (subset, &n) in counts.iter().enumerate() {
                for id in it.by_ref().take(n as usize) {
                    assignment.insert(id, subset);
                }
            }
        }
        SplitPolicy::ProjectWise => {
            let mut projects: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
            for t in &corpus.theorems {
                projects.entry(t.project.as_str()).or_default().push(t.id.as_str());
            }
            let targets = apportion(corpus.theorems.len() as u64, &fractions);
            let mut names: Vec<&str> = projects.keys().copied().collect();
            names.shuffle(&mut rng);
            let mut filled = [0u64; 3];
            for name in names {
                let members = &projects[name];
                let subset = (0..3)
                    .filter(|&i| !fractions[i].is_zero())
                    .max_by(|&a, &b| {
                        let da = targets[a] as i64 - filled[a] as i64;
                        let db = targets[b] as i64 - filled[b] as i64;
                        da.cmp(&db).then(b.cmp(&a))
                    })
                    .expect("fractions sum to one");
                filled[subset] += members.len() as u64;
                for id in members {
                    assignment.insert(id, subset);
                }
            }
            let largest = projects.values().map(Vec::len).max().unwrap_or(0) as u64;
            for i in 0..3 {
                let starved = targets[i] > 0 && filled[i] == 0;
                if starved || filled[i].abs_diff(targets[i]) > largest {
                    return Err(CorpusError::InfeasibleSplit(format!(
                        "subset {i} holds {} theorems, target {} (largest project {largest})",
                        filled[i], targets[i]
                    )));
                }
            }
        }
    }
    let mut out = Split::default();
    for t in &corpus.theorems {
        let bucket = match assignment[t.id.as_str()] {
            0 => &mut out.train,
            1 => &mut out.valid,
            _ => &mut out.test,
        };
        bucket.push(t.id.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_theory, Corpus};

    fn corpus(projects: usize, per_project: usize) -> Corpus {
        let mut files = Vec::new();
        for p in 0..projects {
            let mut src = format!("theory t{p}\naxiom a: f(x) = x\n");
            for i in 0..per_project {
                src.push_str(&format!("lemma l{i}: f(a{i}) = a{i}\nproof:\n  rw a\n  refl\n"));
            }
            files.push(parse_theory(&src, &format!("proj{p}"), &format!("proj{p}/t{p}.thy")).unwrap());
        }
        Corpus::from_files(files).unwrap()
    }

    #[test]
    fn parses_exact_fractions() {
        let f: Fractions = "0.95,0.01,0.04".parse().unwrap();
        assert_eq!(f.as_array(), [Ratio::new(95, 100), Ratio::new(1, 100), Ratio::new(4, 100)]);
        assert!("0.5,0.5,0.1".parse::<Fractions>().is_err());
        assert!("1,0".parse::<Fractions>().is_err());
        assert!("1/3,1/3,1/3".parse::<Fractions>().is_ok());
    }

    #[test]
    fn largest_remainder() {
        let f: Fractions = "0.95,0.01,0.04".parse().unwrap();
        assert_eq!(apportion(100, &f.as_array()), [95, 1, 4]);
        let thirds: Fractions = "1/3,1/3,1/3".parse().unwrap();
        assert_eq!(apportion(10, &thirds.as_array()), [4, 3, 3]);
        let f: Fractions = "0.5,0.25,0.25".parse().unwrap();
        assert_eq!(apportion(7, &f.as_array()), [3, 2, 2]);
    }

    #[test]
    fn theorem_wise_sizes_and_partition() {
        let c = corpus(5, 20);
        let spec = SplitSpec { policy: SplitPolicy::TheoremWise, fractions: "0.95,0.01,0.04".parse().unwrap(), seed: 7 };
        let s = split(&c, &spec).unwrap();
        assert_eq!(s.sizes(), (95, 1, 4));
        let mut all: Vec<_> = s.train.iter().chain(&s.valid).chain(&s.test).cloned().collect();
        all.sort();
        let mut ids: Vec<_> = c.theorems.iter().map(|t| t.id.clone()).collect();
        ids.sort();
        assert_eq!(all, ids);
        assert_eq!(split(&c, &spec).unwrap(), s);
        let other = split(&c, &SplitSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(other, s);
    }

    #[test]
    fn everything_in_train() {
        let c = corpus(2, 3);
        let spec = SplitSpec { policy: SplitPolicy::TheoremWise, fractions: "1,0,0".parse().unwrap(), seed: 0 };
        assert_eq!(split(&c, &spec).unwrap().sizes(), (6, 0, 0));
    }

    #[test]
    fn project_wise_keeps_projects_whole() {
        let c = corpus(10, 20);
        let spec = SplitSpec { policy: SplitPolicy::ProjectWise, fractions: "0.8,0.1,0.1".parse().unwrap(), seed: 3 };
        let s = split(&c, &spec).unwrap();
        assert_eq!(s.sizes(), (160, 20, 20));
        let idx = c.index();
        let projects = |ids: &[String]| ids.iter().map(|i| idx[i.as_str()].project.clone()).collect::<std::collections::BTreeSet<_>>();
        let (a, b, t) = (projects(&s.train), projects(&s.valid), projects(&s.test));
        assert_eq!((a.len(), b.len(), t.len()), (8, 1, 1));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&t) && b.is_disjoint(&t));
    }

    #[test]
    fn project_wise_infeasible() {
        // two projects cannot populate three non-empty subsets
        let c = corpus(2, 20);
        let spec = SplitSpec { policy: SplitPolicy::ProjectWise, fractions: "0.8,0.1,0.1".parse().unwrap(), seed: 1 };
        assert!(matches!(split(&c, &spec), Err(CorpusError::InfeasibleSplit(_))));
        let ok = SplitSpec { fractions: "0.5,0,0.5".parse().unwrap(), ..spec };
        assert_eq!(split(&c, &ok).unwrap().sizes(), (20, 0, 20));
        let empty = Corpus::default();
        assert!(matches!(split(&empty, &spec), Err(CorpusError::Empty)));
    }
}
