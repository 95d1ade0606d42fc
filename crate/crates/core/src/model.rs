//! Observation containers and design bookkeeping.
//!
//! An [`ObservationSet`] holds the discretely sampled curves `(i, T_ij, Y_ij)`
//! grouped by subject. Construction validates the raw triples once; every
//! downstream module can then assume sorted, finite, in-range data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Absolute tolerance under which two sampling points are treated as one knot.
pub const DEDUP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignKind {
    /// Every subject is observed on the same grid.
    Common,
    /// Subjects carry their own sampling points.
    Independent,
}

/// Observations belonging to one curve, sorted by `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject<S> {
    pub id: i64,
    pub t: Vec<S>,
    pub y: Vec<S>,
}

impl<S: Scalar> Subject<S> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (S, S)> + '_ {
        self.t.iter().copied().zip(self.y.iter().copied())
    }
}

/// Validated collection of discretized curves.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet<S> {
    subjects: Vec<Subject<S>>,
    design: DesignKind,
}

impl<S: Scalar> ObservationSet<S> {
    /// Groups long-format `(subject, t, y)` triples by subject id.
    ///
    /// Subjects are ordered by id and points within a subject by `t`.
    pub fn validate(raw: &[(i64, S, S)]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut grouped: BTreeMap<i64, Vec<(S, S)>> = BTreeMap::new();
        for &(id, t, y) in raw {
            grouped.entry(id).or_default().push((t, y));
        }
        let subjects = grouped
            .into_iter()
            .map(|(id, pts)| Subject {
                id,
                t: pts.iter().map(|p| p.0).collect(),
                y: pts.iter().map(|p| p.1).collect(),
            })
            .collect();
        Self::from_subjects(subjects)
    }

    /// Builds a set from per-subject records, sorting each subject by `t`.
    pub fn from_subjects(mut subjects: Vec<Subject<S>>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::EmptyInput);
        }
        for s in &mut subjects {
            if s.t.is_empty() {
                return Err(Error::EmptySubject(s.id));
            }
            if s.t.len() != s.y.len() {
                return Err(Error::InvalidConfig(format!(
                    "subject {} has {} times but {} responses",
                    s.id,
                    s.t.len(),
                    s.y.len()
                )));
            }
            for (&t, &y) in s.t.iter().zip(&s.y) {
                if !t.is_finite() || !y.is_finite() {
                    return Err(Error::NonFiniteValue);
                }
                if t < S::zero() || t > S::one() {
                    return Err(Error::TOutOfRange(t.as_f64()));
                }
            }
            if s.t.windows(2).any(|w| w[1] < w[0]) {
                let mut idx: Vec<usize> = (0..s.t.len()).collect();
                idx.sort_by(|&i, &j| s.t[i].partial_cmp(&s.t[j]).unwrap());
                s.t = idx.iter().map(|&i| s.t[i]).collect();
                s.y = idx.iter().map(|&i| s.y[i]).collect();
            }
        }
        let design = infer_design(&subjects);
        Ok(Self { subjects, design })
    }

    pub fn subjects(&self) -> &[Subject<S>] {
        &self.subjects
    }

    pub fn design(&self) -> DesignKind {
        self.design
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    /// Per-subject point counts `m_i`.
    pub fn counts(&self) -> Vec<usize> {
        self.subjects.iter().map(Subject::len).collect()
    }

    pub fn total_points(&self) -> usize {
        self.subjects.iter().map(Subject::len).sum()
    }

    /// Flattens back to long format, subject by subject.
    pub fn to_long(&self) -> Vec<(i64, S, S)> {
        self.subjects
            .iter()
            .flat_map(|s| s.points().map(move |(t, y)| (s.id, t, y)))
            .collect()
    }

    /// Iterates `(subject index, t, y)` in storage order.
    pub fn observations(&self) -> impl Iterator<Item = (usize, S, S)> + '_ {
        self.subjects
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.points().map(move |(t, y)| (i, t, y)))
    }
}

fn infer_design<S: Scalar>(subjects: &[Subject<S>]) -> DesignKind {
    let tol = S::lit(DEDUP_TOL);
    let first = &subjects[0].t;
    let shared = subjects.iter().skip(1).all(|s| {
        s.t.len() == first.len() && s.t.iter().zip(first).all(|(&a, &b)| (a - b).abs() <= tol)
    });
    if shared {
        DesignKind::Common
    } else {
        DesignKind::Independent
    }
}

/// Sampling-density summary of an observation set.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSummary<S> {
    pub n: usize,
    /// Harmonic mean of the per-subject counts.
    pub m_harmonic: S,
    /// Deduplicated, strictly increasing sampling points.
    pub unique_knots: Vec<S>,
    pub a: S,
    pub b: S,
}

/// Harmonic mean of the `m_i`, computed from the integer counts.
///
/// Equal counts short-circuit to the shared value so a common design
/// reports `m` with no rounding.
pub fn harmonic_mean_count<S: Scalar>(counts: &[usize]) -> S {
    let first = counts[0];
    if counts.iter().all(|&m| m == first) {
        return S::from_usize_exact(first);
    }
    let inv_sum: f64 = counts.iter().map(|&m| 1.0 / m as f64).sum();
    S::lit(counts.len() as f64 / inv_sum)
}

/// Merges sorted values closer than `tol` to the previously kept value.
///
/// The last cluster is represented by its maximum so that every input lies
/// inside `[first, last]`.
pub fn dedup_sorted<S: Scalar>(sorted: &[S], tol: S) -> Vec<S> {
    let mut out: Vec<S> = Vec::with_capacity(sorted.len());
    for &t in sorted {
        match out.last_mut() {
            Some(last) if t - *last <= tol => {}
            _ => out.push(t),
        }
    }
    if out.len() > 1 {
        let max = sorted[sorted.len() - 1];
        *out.last_mut().unwrap() = max;
    }
    out
}

pub fn summarize<S: Scalar>(data: &ObservationSet<S>, dedup_tol: S) -> DesignSummary<S> {
    let mut all: Vec<S> = data
        .subjects
        .iter()
        .flat_map(|s| s.t.iter().copied())
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let unique_knots = dedup_sorted(&all, dedup_tol);
    DesignSummary {
        n: data.n_subjects(),
        m_harmonic: harmonic_mean_count(&data.counts()),
        a: unique_knots[0],
        b: *unique_knots.last().unwrap(),
        unique_knots,
    }
}
