//! OCB operations. Each execution starts from a root object and yields an
//! [`AccessRecord`] listing, in visit order, every object it touched.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::db::{Database, Evolution};
use crate::error::{Error, Result};
use crate::ids::{Oid, RefType};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    RandomAccess,
    Scan,
    RangeLookup,
    SetTraversal,
    SimpleTraversal,
    HierarchyTraversal,
    StochasticTraversal,
    AttributeUpdate,
    SequentialUpdate,
    DatabaseEvolution,
}

impl OpKind {
    pub const ALL: [OpKind; 10] = [
        OpKind::RandomAccess,
        OpKind::Scan,
        OpKind::RangeLookup,
        OpKind::SetTraversal,
        OpKind::SimpleTraversal,
        OpKind::HierarchyTraversal,
        OpKind::StochasticTraversal,
        OpKind::AttributeUpdate,
        OpKind::SequentialUpdate,
        OpKind::DatabaseEvolution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::RandomAccess => "random_access",
            OpKind::Scan => "scan",
            OpKind::RangeLookup => "range_lookup",
            OpKind::SetTraversal => "set_traversal",
            OpKind::SimpleTraversal => "simple_traversal",
            OpKind::HierarchyTraversal => "hierarchy_traversal",
            OpKind::StochasticTraversal => "stochastic_traversal",
            OpKind::AttributeUpdate => "attribute_update",
            OpKind::SequentialUpdate => "sequential_update",
            OpKind::DatabaseEvolution => "database_evolution",
        }
    }

    /// Operations that do not need an existing root.
    pub fn ignores_root(self) -> bool {
        matches!(self, OpKind::RandomAccess | OpKind::DatabaseEvolution)
    }

    /// Operations that always touch the same objects for a given root.
    pub fn is_deterministic_traversal(self) -> bool {
        matches!(
            self,
            OpKind::SimpleTraversal | OpKind::HierarchyTraversal | OpKind::SetTraversal
        )
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown operation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccessMode {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Access {
    pub oid: Oid,
    pub mode: AccessMode,
}

impl Access {
    pub fn read(oid: Oid) -> Self {
        Access {
            oid,
            mode: AccessMode::Read,
        }
    }

    pub fn write(oid: Oid) -> Self {
        Access {
            oid,
            mode: AccessMode::Write,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRecord {
    pub seq: u64,
    pub root_oid: Oid,
    pub op_kind: OpKind,
    pub accessed: Vec<Access>,
}

impl AccessRecord {
    pub fn oids(&self) -> impl Iterator<Item = Oid> + '_ {
        self.accessed.iter().map(|a| a.oid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadParams {
    pub op_kind: OpKind,
    pub depth: u32,
    pub reverse: bool,
    pub nrnd: u32,
    pub ntest: u32,
    pub nupdt: u32,
    pub hier_ref_type: RefType,
}

impl Default for WorkloadParams {
    /// Simple depth-first traversal of depth 2.
    fn default() -> Self {
        WorkloadParams {
            op_kind: OpKind::SimpleTraversal,
            depth: 2,
            reverse: false,
            nrnd: 50,
            ntest: 1,
            nupdt: 50,
            hier_ref_type: RefType::INHERITANCE,
        }
    }
}

/// Edge view used by traversals: forward references or back-references.
fn neighbours(db: &Database, oid: Oid, reverse: bool) -> impl Iterator<Item = (Oid, RefType)> + '_ {
    let obj = &db.objects[oid.index()];
    let list = if reverse { &obj.backrefs } else { &obj.orefs };
    list.iter()
        .map(|r| (r.target, r.ref_type))
        .filter(|(t, _)| db.contains(*t))
}

/// Executes one read-only or update operation. `database_evolution` needs
/// exclusive access and goes through [`execute_mut`].
pub fn execute(
    db: &Database,
    root: Oid,
    params: &WorkloadParams,
    seq: u64,
    rng: &mut SimRng,
) -> Result<AccessRecord> {
    if !params.op_kind.ignores_root() && !db.contains(root) {
        return Err(Error::RootNotFound(root));
    }
    let accessed = match params.op_kind {
        OpKind::RandomAccess => (0..params.nrnd)
            .filter_map(|_| db.random_oid(rng))
            .map(Access::read)
            .collect(),
        OpKind::Scan | OpKind::RangeLookup => class_members(db, root, AccessMode::Read),
        OpKind::SequentialUpdate => class_members(db, root, AccessMode::Write),
        OpKind::SetTraversal => breadth_first(db, root, params.depth, params.reverse, None),
        OpKind::SimpleTraversal => depth_first(db, root, params.depth, params.reverse, None),
        OpKind::HierarchyTraversal => depth_first(
            db,
            root,
            params.depth,
            params.reverse,
            Some(params.hier_ref_type),
        ),
        OpKind::StochasticTraversal => stochastic(db, root, params.depth, params.reverse, rng),
        OpKind::AttributeUpdate => (0..params.nupdt)
            .filter_map(|_| db.random_oid(rng))
            .map(Access::write)
            .collect(),
        OpKind::DatabaseEvolution => {
            return Err(Error::config(
                "database_evolution needs a mutable database",
            ))
        }
    };
    Ok(AccessRecord {
        seq,
        root_oid: root,
        op_kind: params.op_kind,
        accessed,
    })
}

/// Like [`execute`], but also runs `database_evolution`.
pub fn execute_mut(
    db: &mut Database,
    root: Oid,
    params: &WorkloadParams,
    seq: u64,
    rng: &mut SimRng,
) -> Result<AccessRecord> {
    if params.op_kind != OpKind::DatabaseEvolution {
        return execute(db, root, params, seq, rng);
    }
    // The changed object comes first, followed by the objects whose
    // references were fixed up.
    let accessed = match db.evolve(rng) {
        Some(Evolution::Inserted { oid, touched }) | Some(Evolution::Deleted { oid, touched }) => {
            std::iter::once(oid)
                .chain(touched)
                .map(Access::write)
                .collect()
        }
        None => Vec::new(),
    };
    Ok(AccessRecord {
        seq,
        root_oid: root,
        op_kind: params.op_kind,
        accessed,
    })
}

fn class_members(db: &Database, root: Oid, mode: AccessMode) -> Vec<Access> {
    let class = db.objects[root.index()].class_id;
    db.class(class)
        .iterator
        .iter()
        .map(|&oid| Access { oid, mode })
        .collect()
}

/// Levels are counted from the root at level 0; a node at level `l` is
/// expanded only while `l + 1 < depth`, so depth 2 is the root and its
/// direct references.
#[inline]
fn expands(level: u32, depth: u32) -> bool {
    level + 1 < depth
}

fn depth_first(
    db: &Database,
    root: Oid,
    depth: u32,
    reverse: bool,
    only: Option<RefType>,
) -> Vec<Access> {
    let mut visited = HashSet::new();
    let mut out = Vec::new();
    // explicit stack of (node, level); children pushed in reverse so they pop
    // in stored order
    let mut stack = vec![(root, 0u32)];
    while let Some((oid, level)) = stack.pop() {
        if !visited.insert(oid) {
            continue;
        }
        out.push(Access::read(oid));
        if !expands(level, depth) {
            continue;
        }
        let children: Vec<Oid> = neighbours(db, oid, reverse)
            .filter(|&(_, ty)| only.is_none_or(|want| want == ty))
            .map(|(t, _)| t)
            .collect();
        for &c in children.iter().rev() {
            if !visited.contains(&c) {
                stack.push((c, level + 1));
            }
        }
    }
    out
}

fn breadth_first(
    db: &Database,
    root: Oid,
    depth: u32,
    reverse: bool,
    only: Option<RefType>,
) -> Vec<Access> {
    let mut visited = HashSet::from([root]);
    let mut out = Vec::new();
    let mut queue = VecDeque::from([(root, 0u32)]);
    while let Some((oid, level)) = queue.pop_front() {
        out.push(Access::read(oid));
        if !expands(level, depth) {
            continue;
        }
        for (t, ty) in neighbours(db, oid, reverse) {
            if only.is_none_or(|want| want == ty) && visited.insert(t) {
                queue.push_back((t, level + 1));
            }
        }
    }
    out
}

/// Random walk: one uniformly chosen outgoing edge per step. Stops at a sink
/// or when the walk would revisit an object.
fn stochastic(
    db: &Database,
    root: Oid,
    depth: u32,
    reverse: bool,
    rng: &mut SimRng,
) -> Vec<Access> {
    let mut visited = HashSet::from([root]);
    let mut out = vec![Access::read(root)];
    let mut cur = root;
    let mut level = 0;
    while expands(level, depth) {
        let edges: Vec<Oid> = neighbours(db, cur, reverse).map(|(t, _)| t).collect();
        if edges.is_empty() {
            break;
        }
        let next = edges[rng.gen_range(0..edges.len())];
        if !visited.insert(next) {
            break;
        }
        out.push(Access::read(next));
        cur = next;
        level += 1;
    }
    out
}
