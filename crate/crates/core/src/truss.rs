//! Small-deformation planar truss models.
//!
//! A [`TrussModel`] owns validated node and member data and answers the
//! kinematic queries every solver needs: the free-dof numbering, member
//! lengths and the compatibility vectors `b_i` with `eps_i = b_i . u`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("node ids must be unique and contiguous from 0 (offending id {0})")]
    NodeIds(usize),
    #[error("member ids must be unique and contiguous from 0 (offending id {0})")]
    MemberIds(usize),
    #[error("node {0} has non-finite coordinates")]
    NonFiniteNode(usize),
    #[error("member {member} references missing node {node}")]
    MissingNode { member: usize, node: usize },
    #[error("member {0} connects a node to itself")]
    SelfLoop(usize),
    #[error("member {0} has zero length")]
    ZeroLength(usize),
    #[error("member {0} has a non-positive or non-finite area")]
    BadArea(usize),
    #[error("model has no supports")]
    NoSupports,
    #[error("model has no members")]
    NoMembers,
    #[error("model has no free degrees of freedom")]
    NoFreeDofs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub fix_x: bool,
    pub fix_y: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub id: usize,
    #[serde(rename = "a")]
    pub node_a: usize,
    #[serde(rename = "b")]
    pub node_b: usize,
    /// Cross-sectional area in m^2.
    pub area: f64,
}

/// On-disk layout of a model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub nodes: Vec<NodeSpec>,
    pub members: Vec<MemberSpec>,
}

/// Sparse compatibility row: at most four `(dof, coefficient)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatRow {
    pub entries: Vec<(usize, f64)>,
}

impl CompatRow {
    pub fn dot(&self, u: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, c)| c * u[j]).sum()
    }
}

/// Validated, immutable truss.
#[derive(Debug, Clone)]
pub struct TrussModel {
    nodes: Vec<NodeSpec>,
    members: Vec<MemberSpec>,
    lengths: Vec<f64>,
    /// `dof_map[node] = [x dof, y dof]`, `None` where supported.
    dof_map: Vec<[Option<usize>; 2]>,
    n_free: usize,
    compat: Vec<CompatRow>,
}

impl TrussModel {
    /// Parses and validates model-file JSON.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text)?;
        Self::new(file.nodes, file.members)
    }

    pub fn new(mut nodes: Vec<NodeSpec>, mut members: Vec<MemberSpec>) -> Result<Self, ModelError> {
        nodes.sort_by_key(|n| n.id);
        for (expected, node) in nodes.iter().enumerate() {
            if node.id != expected {
                return Err(ModelError::NodeIds(node.id));
            }
            if !node.x.is_finite() || !node.y.is_finite() {
                return Err(ModelError::NonFiniteNode(node.id));
            }
        }
        members.sort_by_key(|m| m.id);
        for (expected, member) in members.iter().enumerate() {
            if member.id != expected {
                return Err(ModelError::MemberIds(member.id));
            }
        }
        if members.is_empty() {
            return Err(ModelError::NoMembers);
        }
        if !nodes.iter().any(|n| n.fix_x || n.fix_y) {
            return Err(ModelError::NoSupports);
        }

        let mut dof_map = Vec::with_capacity(nodes.len());
        let mut n_free = 0;
        for node in &nodes {
            let mut slot = [None, None];
            for (dir, fixed) in [node.fix_x, node.fix_y].into_iter().enumerate() {
                if !fixed {
                    slot[dir] = Some(n_free);
                    n_free += 1;
                }
            }
            dof_map.push(slot);
        }
        if n_free == 0 {
            return Err(ModelError::NoFreeDofs);
        }

        let mut lengths = Vec::with_capacity(members.len());
        let mut compat = Vec::with_capacity(members.len());
        for member in &members {
            for node in [member.node_a, member.node_b] {
                if node >= nodes.len() {
                    return Err(ModelError::MissingNode { member: member.id, node });
                }
            }
            if member.node_a == member.node_b {
                return Err(ModelError::SelfLoop(member.id));
            }
            if !(member.area.is_finite() && member.area > 0.0) {
                return Err(ModelError::BadArea(member.id));
            }
            let (a, b) = (&nodes[member.node_a], &nodes[member.node_b]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let length = dx.hypot(dy);
            if length <= 0.0 {
                return Err(ModelError::ZeroLength(member.id));
            }
            let (c, s) = (dx / length, dy / length);
            let mut entries = Vec::with_capacity(4);
            for (node, sign) in [(member.node_a, -1.0), (member.node_b, 1.0)] {
                for (dir, cosine) in [c, s].into_iter().enumerate() {
                    if let Some(dof) = dof_map[node][dir] {
                        if cosine != 0.0 {
                            entries.push((dof, sign * cosine / length));
                        }
                    }
                }
            }
            lengths.push(length);
            compat.push(CompatRow { entries });
        }

        Ok(Self { nodes, members, lengths, dof_map, n_free, compat })
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile { nodes: self.nodes.clone(), members: self.members.clone() };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn members(&self) -> &[MemberSpec] {
        &self.members
    }

    /// Member count `m`.
    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Free degree-of-freedom count `n`.
    pub fn dof_count(&self) -> usize {
        self.n_free
    }

    pub fn length(&self, member: usize) -> f64 {
        self.lengths[member]
    }

    pub fn area(&self, member: usize) -> f64 {
        self.members[member].area
    }

    /// Free dof index of `(node, direction)` with direction 0 = x, 1 = y.
    pub fn dof(&self, node: usize, direction: usize) -> Option<usize> {
        self.dof_map.get(node).and_then(|slot| slot[direction])
    }

    pub fn compat_row(&self, member: usize) -> &CompatRow {
        &self.compat[member]
    }

    /// Dense compatibility vector `b_i` (units 1/m).
    pub fn compatibility_vector(&self, member: usize) -> Vec<f64> {
        let mut b = vec![0.0; self.n_free];
        for &(j, c) in &self.compat[member].entries {
            b[j] += c;
        }
        b
    }

    /// Member strains `eps_i = b_i . u`.
    pub fn strains(&self, u: &[f64]) -> Vec<f64> {
        self.compat.iter().map(|row| row.dot(u)).collect()
    }

    /// Nodal force resultant `sum_i a_i l_i sigma_i b_i`.
    pub fn internal_force(&self, stresses: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.n_free];
        for (i, row) in self.compat.iter().enumerate() {
            let scale = self.members[i].area * self.lengths[i] * stresses[i];
            for &(j, c) in &row.entries {
                f[j] += scale * c;
            }
        }
        f
    }
}
