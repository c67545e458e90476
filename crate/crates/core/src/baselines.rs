//! k-means clustering (Lloyd's algorithm with Forgy restarts) and
//! majority-vote mapping of clusters to labels.

use crate::error::{Error, Result};
use crate::numkernel::{sqdist, Rng, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    pub centroids: Vec<Vec<T>>,
    pub assignments: Vec<usize>,
    /// Total squared distance of every point to its assigned centroid.
    pub inertia: T,
    pub iterations: usize,
    /// Inertia of the initial centroids, then after each iteration, for the
    /// winning restart.
    pub history: Vec<T>,
    /// Index of the restart that produced this result.
    pub restart: usize,
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest<T: Scalar>(x: &[T], centroids: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, sqdist(x, &centroids[0]));
    for (c, cent) in centroids.iter().enumerate().skip(1) {
        let d = sqdist(x, cent);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn check_points<T: Scalar>(points: &[Vec<T>]) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::Input("k-means needs at least one point".into()))?;
    let dim = first.len();
    if let Some(i) = points.iter().position(|p| p.len() != dim) {
        return Err(Error::Input(format!("point {i} has a different dimension")));
    }
    Ok(dim)
}

/// Indices of the first occurrence of every distinct point.
fn distinct_indices<T: Scalar>(points: &[Vec<T>]) -> Vec<usize> {
    let mut keyed: Vec<(Vec<u64>, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.iter().map(|v| v.as_f64().to_bits()).collect(), i))
        .collect();
    keyed.sort();
    keyed.dedup_by(|a, b| a.0 == b.0);
    let mut idx: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();
    idx.sort_unstable();
    idx
}

/// Sum of squared distances to the nearest centroid, with the assignment.
pub fn assign<T: Scalar>(points: &[Vec<T>], centroids: &[Vec<T>]) -> (Vec<usize>, T) {
    let mut total = T::zero();
    let labels = points
        .iter()
        .map(|p| {
            let (c, d) = nearest(p, centroids);
            total += d;
            c
        })
        .collect();
    (labels, total)
}

/// Lloyd iterations from the given initial centroids.
///
/// Each iteration assigns every point to its nearest centroid, then moves each
/// centroid to the mean of its members. A centroid left without members is
/// moved onto the point farthest from its current centroid. Stops when the
/// assignment no longer changes or after `max_iter` iterations.
pub fn lloyd<T: Scalar>(points: &[Vec<T>], init: Vec<Vec<T>>, max_iter: usize) -> Result<KMeansResult<T>> {
    let dim = check_points(points)?;
    if init.is_empty() {
        return Err(Error::Input("k must be >= 1".into()));
    }
    if init.iter().any(|c| c.len() != dim) {
        return Err(Error::Input("initial centroid dimension differs from the data".into()));
    }
    let k = init.len();
    let mut centroids = init;
    let (mut labels, mut inertia) = assign(points, &centroids);
    let mut history = vec![inertia];
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;

        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&labels) {
            counts[c] += 1;
            for (s, &v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let n = T::lit(counts[c] as f64);
                centroids[c] = sums[c].iter().map(|&s| s / n).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let (far, _) = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, nearest(p, &centroids).1))
                    .fold((0, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
                centroids[c] = points[far].clone();
            }
        }

        let (next, total) = assign(points, &centroids);
        history.push(total);
        inertia = total;
        if next == labels {
            break;
        }
        labels = next;
    }

    Ok(KMeansResult {
        centroids,
        assignments: labels,
        inertia,
        iterations,
        history,
        restart: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            restarts: 10,
            max_iter: 300,
        }
    }
}

/// Best of `restarts` Lloyd runs, each started from `k` distinct data points
/// sampled without replacement (Forgy). Restart `r` uses a stream forked from
/// `rng`; the winner is the lowest `(inertia, r)`.
pub fn kmeans<T: Scalar>(points: &[Vec<T>], cfg: KMeansConfig, rng: &mut Rng) -> Result<KMeansResult<T>> {
    check_points(points)?;
    if cfg.k == 0 {
        return Err(Error::Input("k must be >= 1".into()));
    }
    if cfg.restarts == 0 {
        return Err(Error::Input("restarts must be >= 1".into()));
    }
    let distinct = distinct_indices(points);
    if cfg.k > distinct.len() {
        return Err(Error::Input(format!(
            "k = {} exceeds the {} distinct points",
            cfg.k,
            distinct.len()
        )));
    }

    let mut best: Option<KMeansResult<T>> = None;
    for r in 0..cfg.restarts {
        let mut stream = rng.fork();
        let mut pool = distinct.clone();
        // Partial Fisher–Yates: the first k slots become the sample.
        for i in 0..cfg.k {
            let j = i + stream.below(pool.len() - i);
            pool.swap(i, j);
        }
        let init = pool[..cfg.k].iter().map(|&i| points[i].clone()).collect();
        let mut result = lloyd(points, init, cfg.max_iter)?;
        result.restart = r;
        if best.as_ref().is_none_or(|b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Majority label per cluster (ties go to the smaller label, so binary ties
/// map to 0) and the resulting accuracy.
pub fn map_clusters_to_labels<T>(result: &KMeansResult<T>, labels: &[u8]) -> Result<(Vec<u8>, f64)> {
    if result.assignments.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} assignments but {} labels",
            result.assignments.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Input("no points to score".into()));
    }
    let k = result.centroids.len();
    let mut votes = vec![[0usize; 256]; k];
    for (&c, &l) in result.assignments.iter().zip(labels) {
        votes[c][usize::from(l)] += 1;
    }
    let mapping: Vec<u8> = votes
        .iter()
        .map(|v| {
            let mut best = 0;
            for (label, &n) in v.iter().enumerate() {
                if n > v[best] {
                    best = label;
                }
            }
            best as u8
        })
        .collect();
    let correct = result
        .assignments
        .iter()
        .zip(labels)
        .filter(|(&c, &l)| mapping[c] == l)
        .count();
    Ok((mapping, correct as f64 / labels.len() as f64))
}

/// Tab-separated `index`, `cluster`, `mapped_label` table with a header.
pub fn assignment_table<T>(result: &KMeansResult<T>, mapping: &[u8]) -> String {
    let mut out = String::from("index\tcluster\tmapped_label\n");
    for (i, &c) in result.assignments.iter().enumerate() {
        out.push_str(&format!("{i}\t{c}\t{}\n", mapping[c]));
    }
    out
}
