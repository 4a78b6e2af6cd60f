//! The interprocedural control-flow graph.
//!
//! One graph spans every CodeBlock and ProxyBlock in an [`Ir`](crate::Ir).
//! The graph itself only knows UUIDs; endpoint typing is checked by
//! [`Ir::add_edge`](crate::Ir::add_edge) and by the validator.

use std::cmp::Ordering;
use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum EdgeKind {
    Fallthrough,
    Branch,
    Call,
    Return,
    Syscall,
    Sysret,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 6] = [
        EdgeKind::Fallthrough,
        EdgeKind::Branch,
        EdgeKind::Call,
        EdgeKind::Return,
        EdgeKind::Syscall,
        EdgeKind::Sysret,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn from_ordinal(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::Fallthrough => "Fallthrough",
            EdgeKind::Branch => "Branch",
            EdgeKind::Call => "Call",
            EdgeKind::Return => "Return",
            EdgeKind::Syscall => "Syscall",
            EdgeKind::Sysret => "Sysret",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeLabel {
    pub conditional: bool,
    pub direct: bool,
    pub kind: EdgeKind,
}

impl EdgeLabel {
    pub const fn new(conditional: bool, direct: bool, kind: EdgeKind) -> Self {
        EdgeLabel { conditional, direct, kind }
    }

    /// The only well-formed fallthrough label.
    pub const fn fallthrough() -> Self {
        Self::new(false, true, EdgeKind::Fallthrough)
    }

    /// Packs the label: bit 0 conditional, bit 1 direct, bits 2-4 kind.
    pub fn code(self) -> u8 {
        (self.conditional as u8) | ((self.direct as u8) << 1) | (self.kind.ordinal() << 2)
    }

    pub fn from_code(code: u8) -> Result<Self, CfgError> {
        if code >> 5 != 0 {
            return Err(CfgError::InvalidLabelCode(code));
        }
        let kind = EdgeKind::from_ordinal((code >> 2) & 0b111)
            .ok_or(CfgError::InvalidLabelCode(code))?;
        Ok(EdgeLabel { conditional: code & 1 != 0, direct: code & 2 != 0, kind })
    }

    /// Fallthrough edges must be unconditional and direct.
    pub fn is_well_formed(self) -> bool {
        self.kind != EdgeKind::Fallthrough || (!self.conditional && self.direct)
    }

    /// Every packable label, in code order.
    pub fn all() -> impl Iterator<Item = EdgeLabel> {
        (0u8..24).map(|c| EdgeLabel::from_code(c).expect("codes below 24 are valid"))
    }
}

impl PartialOrd for EdgeLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EdgeLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.code().cmp(&other.code())
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        if self.conditional {
            f.write_str(",cond")?;
        }
        if !self.direct {
            f.write_str(",indirect")?;
        }
        Ok(())
    }
}

/// Ordered by (source, target, label code), the canonical edge order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub source: Uuid,
    pub target: Uuid,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CfgError {
    #[error("edge endpoint {0} is not a code or proxy block")]
    EndpointNotCodeOrProxy(Uuid),
    #[error("edge {} -> {} [{}] already present", .0.source, .0.target, .0.label)]
    DuplicateEdge(Edge),
    #[error("block {0} already has a fallthrough successor")]
    SecondFallthrough(Uuid),
    #[error("fallthrough edges must be unconditional and direct")]
    MalformedFallthrough,
    #[error("invalid edge label code {0:#04x}")]
    InvalidLabelCode(u8),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cfg {
    vertices: BTreeSet<Uuid>,
    edges: BTreeSet<Edge>,
    // (target, source, label) for in-edge range queries
    reverse: BTreeSet<(Uuid, Uuid, EdgeLabel)>,
}

impl Cfg {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &BTreeSet<Uuid> {
        &self.vertices
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = &Edge> + '_ {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_edge(&self, e: &Edge) -> bool {
        self.edges.contains(e)
    }

    pub fn add_vertex(&mut self, v: Uuid) -> bool {
        self.vertices.insert(v)
    }

    /// Drops the vertex and every edge touching it.
    pub fn remove_vertex(&mut self, v: Uuid) -> bool {
        let incident: Vec<Edge> = self.out_edges(v).chain(self.in_edges(v)).collect();
        for e in &incident {
            self.remove_edge(e);
        }
        self.vertices.remove(&v)
    }

    /// Inserts an edge, enforcing the graph-shape rules. Endpoint typing is
    /// the caller's concern.
    pub fn add_edge(&mut self, source: Uuid, target: Uuid, label: EdgeLabel) -> Result<Edge, CfgError> {
        if !label.is_well_formed() {
            return Err(CfgError::MalformedFallthrough);
        }
        let edge = Edge { source, target, label };
        if self.edges.contains(&edge) {
            return Err(CfgError::DuplicateEdge(edge));
        }
        if label.kind == EdgeKind::Fallthrough
            && self.out_edges(source).any(|e| e.label.kind == EdgeKind::Fallthrough)
        {
            return Err(CfgError::SecondFallthrough(source));
        }
        self.vertices.insert(source);
        self.vertices.insert(target);
        self.edges.insert(edge);
        self.reverse.insert((target, source, label));
        Ok(edge)
    }

    pub fn remove_edge(&mut self, e: &Edge) -> bool {
        if self.edges.remove(e) {
            self.reverse.remove(&(e.target, e.source, e.label));
            true
        } else {
            false
        }
    }

    /// Outgoing edges of `v` in canonical order.
    pub fn out_edges(&self, v: Uuid) -> impl Iterator<Item = Edge> + '_ {
        let lo = Edge { source: v, target: Uuid::NIL, label: EdgeLabel::from_code(0).unwrap() };
        self.edges.range(lo..).take_while(move |e| e.source == v).copied()
    }

    /// Incoming edges of `v`, ordered by (source, label).
    pub fn in_edges(&self, v: Uuid) -> impl Iterator<Item = Edge> + '_ {
        let lo = (v, Uuid::NIL, EdgeLabel::from_code(0).unwrap());
        self.reverse
            .range(lo..)
            .take_while(move |(t, _, _)| *t == v)
            .map(|&(target, source, label)| Edge { source, target, label })
    }

    /// Every vertex reachable from `entries` through edges accepted by
    /// `follow`. Entries are always part of the result.
    pub fn reachable<F>(&self, entries: impl IntoIterator<Item = Uuid>, follow: F) -> BTreeSet<Uuid>
    where
        F: Fn(&EdgeLabel) -> bool,
    {
        let mut seen = BTreeSet::new();
        let mut work = VecDeque::new();
        for v in entries {
            if seen.insert(v) {
                work.push_back(v);
            }
        }
        while let Some(v) = work.pop_front() {
            for e in self.out_edges(v) {
                if follow(&e.label) && seen.insert(e.target) {
                    work.push_back(e.target);
                }
            }
        }
        seen
    }
}
