//! Survival records: full site datasets and inverse-probability-weighted samples.
//!
//! Both types keep their records physically sorted by nonincreasing observed
//! time, so risk-set sums are running sums over a prefix. The original
//! (input or draw) order is kept through a permutation.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One observed record: `time = min(T, C)`, `event = (T <= C)` and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl Subject {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Self {
        Subject {
            time,
            event,
            covariates,
        }
    }
}

fn validate_record(time: f64, covariates: &[f64], row: usize) -> Result<()> {
    if !(time > 0.0) || !time.is_finite() {
        return Err(Error::invalid(alloc::format!(
            "record {row}: time must be positive and finite, got {time}"
        )));
    }
    if let Some(bad) = covariates.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(alloc::format!(
            "record {row}: non-finite covariate {bad}"
        )));
    }
    Ok(())
}

/// Stable permutation ordering `times` by nonincreasing value.
fn descending_order(times: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    order
}

fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = alloc::vec![0; perm.len()];
    for (pos, &idx) in perm.iter().enumerate() {
        inv[idx] = pos;
    }
    inv
}

/// Borrowed, time-sorted columns with per-record weights `1 / (n * pi)`.
/// `weights == None` means every weight is exactly one (census).
#[derive(Clone, Copy)]
pub(crate) struct Records<'a> {
    pub p: usize,
    pub times: &'a [f64],
    pub events: &'a [bool],
    pub x: &'a [f64],
    pub weights: Option<&'a [f64]>,
}

impl<'a> Records<'a> {
    #[inline]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }
}

/// A site's full survival dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    p: usize,
    times: Vec<f64>,
    events: Vec<bool>,
    covariates: Vec<f64>,
    /// Sorted position -> input index.
    sort_index: Vec<usize>,
    /// Input index -> sorted position.
    position: Vec<usize>,
}

impl SurvivalDataset {
    /// Builds a dataset from columns; `covariates` is row-major `n × p`.
    pub fn from_columns(
        times: Vec<f64>,
        events: Vec<bool>,
        covariates: Vec<f64>,
        p: usize,
    ) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::invalid("dataset has no records"));
        }
        if p == 0 {
            return Err(Error::invalid("covariate dimension must be at least 1"));
        }
        if events.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: events.len(),
            });
        }
        if covariates.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: covariates.len(),
            });
        }
        for (i, t) in times.iter().enumerate() {
            validate_record(*t, &covariates[i * p..(i + 1) * p], i)?;
        }
        let sort_index = descending_order(&times);
        let position = inverse_permutation(&sort_index);
        let sorted_times = sort_index.iter().map(|&i| times[i]).collect();
        let sorted_events = sort_index.iter().map(|&i| events[i]).collect();
        let mut sorted_x = Vec::with_capacity(n * p);
        for &i in &sort_index {
            sorted_x.extend_from_slice(&covariates[i * p..(i + 1) * p]);
        }
        Ok(SurvivalDataset {
            p,
            times: sorted_times,
            events: sorted_events,
            covariates: sorted_x,
            sort_index,
            position,
        })
    }

    pub fn from_subjects(subjects: &[Subject]) -> Result<Self> {
        let p = subjects.first().map_or(0, |s| s.covariates.len());
        let mut x = Vec::with_capacity(subjects.len() * p);
        for (i, s) in subjects.iter().enumerate() {
            if s.covariates.len() != p {
                return Err(Error::invalid(alloc::format!(
                    "record {i}: expected {p} covariates, got {}",
                    s.covariates.len()
                )));
            }
            x.extend_from_slice(&s.covariates);
        }
        Self::from_columns(
            subjects.iter().map(|s| s.time).collect(),
            subjects.iter().map(|s| s.event).collect(),
            x,
            p,
        )
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// Sorted position -> input index (nonincreasing time).
    pub fn sort_index(&self) -> &[usize] {
        &self.sort_index
    }

    /// The record at input position `index`.
    pub fn subject(&self, index: usize) -> Subject {
        let pos = self.position[index];
        Subject {
            time: self.times[pos],
            event: self.events[pos],
            covariates: self.covariates[pos * self.p..(pos + 1) * self.p].to_vec(),
        }
    }

    /// Records in input order.
    pub fn subjects(&self) -> impl Iterator<Item = Subject> + '_ {
        (0..self.n()).map(move |i| self.subject(i))
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|e| **e).count()
    }

    pub fn censoring_rate(&self) -> f64 {
        1.0 - self.event_count() as f64 / self.n() as f64
    }

    pub fn max_time(&self) -> f64 {
        self.times[0]
    }

    pub(crate) fn records(&self) -> Records<'_> {
        Records {
            p: self.p,
            times: &self.times,
            events: &self.events,
            x: &self.covariates,
            weights: None,
        }
    }

    pub(crate) fn sorted_row(&self, pos: usize) -> &[f64] {
        &self.covariates[pos * self.p..(pos + 1) * self.p]
    }
}

/// An inverse-probability-weighted sample of `r` units drawn from a source
/// dataset of size `source_n`. Each unit carries its own inclusion
/// probability; duplicates are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    p: usize,
    source_n: usize,
    times: Vec<f64>,
    events: Vec<bool>,
    covariates: Vec<f64>,
    pi: Vec<f64>,
    weights: Vec<f64>,
    /// Sorted position -> unit index.
    sort_index: Vec<usize>,
    /// Unit index -> sorted position.
    position: Vec<usize>,
}

impl WeightedSample {
    /// Units in draw order, each with its inclusion probability.
    pub fn new(units: &[(Subject, f64)], source_n: usize) -> Result<Self> {
        let p = units.first().map_or(0, |(s, _)| s.covariates.len());
        let mut x = Vec::with_capacity(units.len() * p);
        for (i, (s, _)) in units.iter().enumerate() {
            if s.covariates.len() != p {
                return Err(Error::invalid(alloc::format!(
                    "unit {i}: expected {p} covariates, got {}",
                    s.covariates.len()
                )));
            }
            x.extend_from_slice(&s.covariates);
        }
        Self::from_columns(
            units.iter().map(|(s, _)| s.time).collect(),
            units.iter().map(|(s, _)| s.event).collect(),
            x,
            units.iter().map(|(_, pi)| *pi).collect(),
            p,
            source_n,
        )
    }

    pub(crate) fn from_columns(
        times: Vec<f64>,
        events: Vec<bool>,
        covariates: Vec<f64>,
        pi: Vec<f64>,
        p: usize,
        source_n: usize,
    ) -> Result<Self> {
        let r = times.len();
        if r == 0 {
            return Err(Error::invalid("weighted sample has no units"));
        }
        if p == 0 {
            return Err(Error::invalid("covariate dimension must be at least 1"));
        }
        if source_n == 0 {
            return Err(Error::invalid("source_n must be at least 1"));
        }
        for (i, t) in times.iter().enumerate() {
            validate_record(*t, &covariates[i * p..(i + 1) * p], i)?;
            let q = pi[i];
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::invalid(alloc::format!(
                    "unit {i}: inclusion probability must lie in (0, 1], got {q}"
                )));
            }
        }
        let sort_index = descending_order(&times);
        let position = inverse_permutation(&sort_index);
        let nf = source_n as f64;
        let mut s_x = Vec::with_capacity(r * p);
        for &i in &sort_index {
            s_x.extend_from_slice(&covariates[i * p..(i + 1) * p]);
        }
        let s_pi: Vec<f64> = sort_index.iter().map(|&i| pi[i]).collect();
        Ok(WeightedSample {
            p,
            source_n,
            times: sort_index.iter().map(|&i| times[i]).collect(),
            events: sort_index.iter().map(|&i| events[i]).collect(),
            covariates: s_x,
            weights: s_pi.iter().map(|q| 1.0 / (nf * q)).collect(),
            pi: s_pi,
            sort_index,
            position,
        })
    }

    /// The whole dataset as a sample with `pi = 1/n` (unit weights).
    pub fn census(dataset: &SurvivalDataset) -> Self {
        let n = dataset.n();
        WeightedSample {
            p: dataset.p,
            source_n: n,
            times: dataset.times.clone(),
            events: dataset.events.clone(),
            covariates: dataset.covariates.clone(),
            pi: alloc::vec![1.0 / n as f64; n],
            weights: alloc::vec![1.0; n],
            sort_index: dataset.sort_index.clone(),
            position: dataset.position.clone(),
        }
    }

    /// Gathers dataset records by input index with matching probabilities.
    pub fn from_dataset(dataset: &SurvivalDataset, indices: &[usize], pi: &[f64]) -> Result<Self> {
        if indices.len() != pi.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                found: pi.len(),
            });
        }
        let p = dataset.p;
        let mut times = Vec::with_capacity(indices.len());
        let mut events = Vec::with_capacity(indices.len());
        let mut x = Vec::with_capacity(indices.len() * p);
        for &i in indices {
            if i >= dataset.n() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: dataset.n(),
                });
            }
            let pos = dataset.position[i];
            times.push(dataset.times[pos]);
            events.push(dataset.events[pos]);
            x.extend_from_slice(dataset.sorted_row(pos));
        }
        Self::from_columns(times, events, x, pi.to_vec(), p, dataset.n())
    }

    /// Number of units `r`.
    #[inline]
    pub fn r(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn source_n(&self) -> usize {
        self.source_n
    }

    /// Unit `index` (draw order) and its inclusion probability.
    pub fn unit(&self, index: usize) -> (Subject, f64) {
        let pos = self.position[index];
        (
            Subject {
                time: self.times[pos],
                event: self.events[pos],
                covariates: self.covariates[pos * self.p..(pos + 1) * self.p].to_vec(),
            },
            self.pi[pos],
        )
    }

    /// Inclusion probabilities in unit order.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.r()).map(|i| self.pi[self.position[i]]).collect()
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|e| **e).count()
    }

    pub fn max_time(&self) -> f64 {
        self.times[0]
    }

    pub(crate) fn records(&self) -> Records<'_> {
        Records {
            p: self.p,
            times: &self.times,
            events: &self.events,
            x: &self.covariates,
            weights: Some(&self.weights),
        }
    }

    pub(crate) fn sorted_pi(&self) -> &[f64] {
        &self.pi
    }

    pub(crate) fn position(&self) -> &[usize] {
        &self.position
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dataset_sorts_by_nonincreasing_time() {
        let ds = SurvivalDataset::from_columns(
            vec![2.0, 5.0, 1.0, 5.0],
            vec![true, false, true, true],
            vec![0.1, 0.2, 0.3, 0.4],
            1,
        )
        .unwrap();
        assert_eq!(ds.sort_index(), &[1, 3, 0, 2]);
        assert_eq!(ds.subject(2), Subject::new(1.0, true, vec![0.3]));
        assert_eq!(ds.event_count(), 3);
        assert_eq!(ds.max_time(), 5.0);
    }

    #[test]
    fn rejects_bad_records() {
        assert!(SurvivalDataset::from_columns(vec![0.0], vec![true], vec![1.0], 1).is_err());
        assert!(SurvivalDataset::from_columns(vec![1.0], vec![true], vec![f64::NAN], 1).is_err());
        assert!(SurvivalDataset::from_columns(vec![1.0], vec![true], vec![], 0).is_err());
        let units = [(Subject::new(1.0, true, vec![0.0]), 0.0)];
        assert!(WeightedSample::new(&units, 1).is_err());
        let units = [(Subject::new(1.0, true, vec![0.0]), 1.5)];
        assert!(WeightedSample::new(&units, 1).is_err());
    }

    #[test]
    fn sample_keeps_unit_order() {
        let units = [
            (Subject::new(1.0, true, vec![1.0]), 0.5),
            (Subject::new(3.0, false, vec![2.0]), 0.25),
        ];
        let s = WeightedSample::new(&units, 4).unwrap();
        assert_eq!(s.unit(0), units[0]);
        assert_eq!(s.unit(1), units[1]);
        assert_eq!(s.probabilities(), vec![0.5, 0.25]);
        assert_eq!(s.r(), 2);
    }
}
