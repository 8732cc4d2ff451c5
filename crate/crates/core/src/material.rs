//! Raw stress-strain data and nearest-neighbor queries over it.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("data set is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub strain: f64,
    /// Pa
    pub stress: f64,
}

impl DataPoint {
    pub fn new(strain: f64, stress: f64) -> Self {
        Self { strain, stress }
    }
}

/// Material data set with a strain-sorted index for windowed kNN.
#[derive(Debug, Clone)]
pub struct MaterialDataSet {
    points: Vec<DataPoint>,
    /// Original indices ordered by (strain, index).
    sorted_index: Vec<usize>,
    /// `sorted_strains[p] == points[sorted_index[p]].strain`
    sorted_strains: Vec<f64>,
}

impl MaterialDataSet {
    pub fn new(points: Vec<DataPoint>) -> Result<Self, DataError> {
        if points.is_empty() {
            return Err(DataError::Empty);
        }
        if let Some(line) = points.iter().position(|p| !p.strain.is_finite() || !p.stress.is_finite()) {
            return Err(DataError::Parse { line: line + 1, msg: "non-finite value".into() });
        }
        let mut sorted_index: Vec<usize> = (0..points.len()).collect();
        sorted_index.sort_unstable_by(|&a, &b| points[a].strain.partial_cmp(&points[b].strain).unwrap().then(a.cmp(&b)));
        let sorted_strains = sorted_index.iter().map(|&j| points[j].strain).collect();
        Ok(Self { points, sorted_index, sorted_strains })
    }

    /// Parses `strain,stress` records with an optional `strain,stress` header.
    pub fn from_csv(text: &str) -> Result<Self, DataError> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("strain,stress")) {
                continue;
            }
            let err = |msg: &str| DataError::Parse { line: lineno + 1, msg: msg.to_string() };
            let mut fields = line.split(',');
            let (Some(e), Some(s), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err("expected two comma-separated fields"));
            };
            let parse = |f: &str| -> Result<f64, DataError> {
                let v: f64 = f.trim().parse().map_err(|_| err(&format!("not a number: {f:?}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err("non-finite value"))
                }
            };
            points.push(DataPoint::new(parse(e)?, parse(s)?));
        }
        Self::new(points)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("strain,stress\n");
        for p in &self.points {
            writeln!(out, "{},{}", p.strain, p.stress).unwrap();
        }
        out
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn point(&self, j: usize) -> DataPoint {
        self.points[j]
    }

    pub fn sorted_index(&self) -> &[usize] {
        &self.sorted_index
    }

    pub fn select(&self, indices: &[usize]) -> Vec<DataPoint> {
        indices.iter().map(|&j| self.points[j]).collect()
    }

    /// The `k` points nearest to `eps` in strain, as ascending original indices.
    ///
    /// Equal distances are resolved in favor of the smaller original index.
    /// Runs in O(log d + k) plus the size of any tie group at the cut.
    pub fn knn(&self, eps: f64, k: usize) -> Vec<usize> {
        let d = self.len();
        assert!(k >= 1 && k <= d, "knn requires 1 <= k <= d (k = {k}, d = {d})");
        let s = &self.sorted_strains;
        let dist = |p: usize| (s[p] - eps).abs();

        // grow [lo, hi) outward from the insertion point
        let start = s.partition_point(|&x| x < eps);
        let (mut lo, mut hi) = (start, start);
        while hi - lo < k {
            let take_left = match (lo > 0, hi < d) {
                (true, true) => dist(lo - 1) <= dist(hi),
                (l, _) => l,
            };
            if take_left {
                lo -= 1;
            } else {
                hi += 1;
            }
        }

        // The cut distance may be shared by points outside the window; gather
        // the whole tie group and keep its smallest indices.
        let cut = dist(lo).max(dist(hi - 1));
        while lo > 0 && dist(lo - 1) <= cut {
            lo -= 1;
        }
        while hi < d && dist(hi) <= cut {
            hi += 1;
        }
        let mut inside = Vec::with_capacity(k);
        let mut ties = Vec::new();
        for p in lo..hi {
            if dist(p) < cut {
                inside.push(self.sorted_index[p]);
            } else {
                ties.push(self.sorted_index[p]);
            }
        }
        ties.sort_unstable();
        let need = k - inside.len();
        inside.extend_from_slice(&ties[..need]);
        inside.sort_unstable();
        inside
    }

    /// The `k` points nearest to `(eps, sig)` under
    /// `c_e/2 (eps' - eps)^2 + 1/(2 c_e) (sig' - sig)^2`, as ascending indices.
    pub fn knn_weighted(&self, eps: f64, sig: f64, c_e: f64, k: usize) -> Vec<usize> {
        let d = self.len();
        assert!(k >= 1 && k <= d, "knn requires 1 <= k <= d (k = {k}, d = {d})");
        assert!(c_e > 0.0, "c_e must be positive");
        let mut scored: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(j, p)| (weighted_distance(p, eps, sig, c_e), j))
            .collect();
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d {
            scored.select_nth_unstable_by(k - 1, by_distance);
        }
        let mut out: Vec<usize> = scored[..k].iter().map(|&(_, j)| j).collect();
        out.sort_unstable();
        out
    }
}

pub fn weighted_distance(p: &DataPoint, eps: f64, sig: f64, c_e: f64) -> f64 {
    let de = p.strain - eps;
    let ds = p.stress - sig;
    0.5 * c_e * de * de + 0.5 * ds * ds / c_e
}
