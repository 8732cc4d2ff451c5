//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's assembly or factorization code.

#![allow(dead_code)]

use ddtruss::truss::{MemberSpec, NodeSpec, TrussModel};
use ddtruss::{DataPoint, MaterialDataSet};
use rand::Rng;

/// Gaussian elimination with partial pivoting. Returns None when a pivot
/// vanishes relative to the largest entry.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Free-dof numbering by node id, x before y.
pub fn oracle_dofs(nodes: &[NodeSpec]) -> Vec<[Option<usize>; 2]> {
    let mut sorted: Vec<&NodeSpec> = nodes.iter().collect();
    sorted.sort_by_key(|n| n.id);
    let mut map = vec![[None, None]; nodes.len()];
    let mut next = 0;
    for n in sorted {
        for (dir, fixed) in [n.fix_x, n.fix_y].into_iter().enumerate() {
            if !fixed {
                map[n.id][dir] = Some(next);
                next += 1;
            }
        }
    }
    map
}

/// Direction cosines over length for member `(a -> b)`, one entry per
/// endpoint dof: `(-c, -s)/l` at a, `(c, s)/l` at b.
pub fn oracle_b(nodes: &[NodeSpec], m: &MemberSpec) -> (f64, Vec<(usize, usize, f64)>) {
    let na = nodes.iter().find(|n| n.id == m.node_a).unwrap();
    let nb = nodes.iter().find(|n| n.id == m.node_b).unwrap();
    let (dx, dy) = (nb.x - na.x, nb.y - na.y);
    let l = dx.hypot(dy);
    let (c, s) = (dx / l, dy / l);
    let entries = vec![(na.id, 0, -c / l), (na.id, 1, -s / l), (nb.id, 0, c / l), (nb.id, 1, s / l)];
    (l, entries)
}

/// Classical linear solve for members following `sigma = w eps + v`:
/// `K u = p - sum a l v b` with `K = sum a l w b b^T`.
pub fn stiffness_oracle(nodes: &[NodeSpec], members: &[MemberSpec], w: f64, v: f64, p: &[f64]) -> Option<Vec<f64>> {
    let dofs = oracle_dofs(nodes);
    let n = p.len();
    let mut k = vec![vec![0.0; n]; n];
    let mut rhs = p.to_vec();
    for m in members {
        let (l, entries) = oracle_b(nodes, m);
        let free: Vec<(usize, f64)> = entries.iter().filter_map(|&(node, dir, b)| dofs[node][dir].map(|d| (d, b))).collect();
        let al = m.area * l;
        for &(r, br) in &free {
            rhs[r] -= al * v * br;
            for &(c, bc) in &free {
                k[r][c] += al * w * br * bc;
            }
        }
    }
    gauss_solve(k, rhs)
}

/// Random rigid truss: two pinned supports, every further node braced to two
/// earlier nodes at a healthy angle, then a few redundant members, at most
/// `max_members` in total.
pub fn random_truss<R: Rng>(rng: &mut R, max_members: usize) -> (Vec<NodeSpec>, Vec<MemberSpec>) {
    let free_nodes = rng.random_range(1..=(max_members - 1) / 2);
    let mut nodes = vec![
        NodeSpec { id: 0, x: 0.0, y: 0.0, fix_x: true, fix_y: true },
        NodeSpec { id: 1, x: rng.random_range(2.0..6.0), y: 0.0, fix_x: true, fix_y: true },
    ];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    while nodes.len() < 2 + free_nodes {
        let id = nodes.len();
        let (x, y) = (rng.random_range(-2.0..8.0), rng.random_range(0.5..6.0));
        let a = rng.random_range(0..id);
        let b = loop {
            let b = rng.random_range(0..id);
            if b != a {
                break b;
            }
        };
        let (ua, ub) = (unit(&nodes[a], x, y), unit(&nodes[b], x, y));
        let sin = (ua.0 * ub.1 - ua.1 * ub.0).abs();
        let too_close = nodes.iter().any(|n| (n.x - x).hypot(n.y - y) < 0.5);
        if sin < 0.3 || too_close {
            continue;
        }
        nodes.push(NodeSpec { id, x, y, fix_x: false, fix_y: false });
        pairs.push((a, id));
        pairs.push((b, id));
    }
    let extra = rng.random_range(0..=max_members - pairs.len());
    for _ in 0..extra * 4 {
        if pairs.len() >= max_members {
            break;
        }
        let a = rng.random_range(0..nodes.len());
        let b = rng.random_range(0..nodes.len());
        let supported = a < 2 && b < 2;
        if a == b || supported || pairs.iter().any(|&(p, q)| (p, q) == (a, b) || (p, q) == (b, a)) {
            continue;
        }
        pairs.push((a, b));
    }
    let members = pairs
        .into_iter()
        .enumerate()
        .map(|(id, (a, b))| MemberSpec { id, node_a: a, node_b: b, area: rng.random_range(1e-4..3e-3) })
        .collect();
    (nodes, members)
}

fn unit(n: &NodeSpec, x: f64, y: f64) -> (f64, f64) {
    let (dx, dy) = (x - n.x, y - n.y);
    let l = dx.hypot(dy);
    (dx / l, dy / l)
}

pub fn build(nodes: &[NodeSpec], members: &[MemberSpec]) -> TrussModel {
    TrussModel::new(nodes.to_vec(), members.to_vec()).expect("valid random truss")
}

/// `d` points exactly on `sigma = w eps + v` with strains uniform on `[lo, hi]`.
pub fn affine_data<R: Rng>(rng: &mut R, d: usize, w: f64, v: f64, lo: f64, hi: f64) -> MaterialDataSet {
    let pts = (0..d)
        .map(|_| {
            let e = rng.random_range(lo..hi);
            DataPoint::new(e, w * e + v)
        })
        .collect();
    MaterialDataSet::new(pts).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Brute-force kNN under the strain metric with the lower-index tie rule.
pub fn brute_knn(strains: &[f64], eps: f64, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..strains.len()).collect();
    idx.sort_by(|&i, &j| (strains[i] - eps).abs().total_cmp(&(strains[j] - eps).abs()).then(i.cmp(&j)));
    let mut out = idx[..k].to_vec();
    out.sort_unstable();
    out
}

/// Huber objective written out independently of the library.
pub fn huber_obj(points: &[DataPoint], w: f64, v: f64, m: f64) -> f64 {
    points
        .iter()
        .map(|p| {
            let t = (p.stress - w * p.strain - v).abs();
            if t <= m {
                t * t
            } else {
                m * (2.0 * t - m)
            }
        })
        .sum()
}

/// Minimizes the fixed-M Huber objective: start from the best line through
/// any two data points, scan a dense grid around it, then refine with a
/// shrinking pattern search over 16 directions.
pub fn huber_oracle(points: &[DataPoint], m: f64) -> (f64, f64, f64) {
    let f = |w: f64, v: f64| huber_obj(points, w, v, m);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            if p.strain == q.strain {
                continue;
            }
            let w = (q.stress - p.stress) / (q.strain - p.strain);
            let v = p.stress - w * p.strain;
            let val = f(w, v);
            if val < best.0 {
                best = (val, w, v);
            }
        }
    }
    // work in centered coordinates so the two parameters are comparable
    let n = points.len() as f64;
    let e_mean = points.iter().map(|p| p.strain).sum::<f64>() / n;
    let e_spread = points.iter().map(|p| (p.strain - e_mean).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let s_spread = {
        let mean = points.iter().map(|p| p.stress).sum::<f64>() / n;
        points.iter().map(|p| (p.stress - mean).abs()).fold(0.0, f64::max).max(m)
    };
    // (w, c) with c = value at the mean strain
    let to_wv = |w: f64, c: f64| (w, c - w * e_mean);
    let (_, w0, v0) = best;
    let (mut w, mut c) = (w0, v0 + w0 * e_mean);
    let mut val = best.0;
    let (gw, gc) = (0.2 * s_spread / e_spread, 0.2 * s_spread);
    for i in -40..=40 {
        for j in -40..=40 {
            let (tw, tc) = (w0 + gw * i as f64 / 40.0, v0 + w0 * e_mean + gc * j as f64 / 40.0);
            let (ww, vv) = to_wv(tw, tc);
            let cand = f(ww, vv);
            if cand < val {
                val = cand;
                w = tw;
                c = tc;
            }
        }
    }
    let dirs: Vec<(f64, f64)> = (0..16).map(|i| (std::f64::consts::PI * i as f64 / 8.0).sin_cos()).collect();
    let mut step = 0.05;
    while step > 1e-13 {
        let mut improved = false;
        for &(sn, cs) in &dirs {
            let tw = w + step * cs * s_spread / e_spread;
            let tc = c + step * sn * s_spread;
            let (ww, vv) = to_wv(tw, tc);
            let cand = f(ww, vv);
            if cand < val {
                val = cand;
                w = tw;
                c = tc;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let (ww, vv) = to_wv(w, c);
    (val, ww, vv)
}
