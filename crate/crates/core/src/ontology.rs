//! Event ontology: a forest of event-type dependency trees.
//!
//! Nodes live in one arena stored in pre-order, trees in file order, so a
//! subtree is always a contiguous index range. Every mutation rebuilds the
//! arena through [`OntologyBuilder`], which is where the invariants (unique
//! names, acyclic, consistent parent/child links) are enforced.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::text::{heldout_key, name_key};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OntologyError {
    #[error("line {line}: event type name is empty")]
    EmptyName { line: usize },
    #[error("duplicate event type {name:?} at line {first_line} and line {second_line}")]
    DuplicateName {
        name: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("line {line}: event type {name:?} names unknown parent {parent:?}")]
    UnknownParent {
        name: String,
        parent: String,
        line: usize,
    },
    #[error("event type {name:?} is its own ancestor")]
    Cycle { name: String },
    #[error("unknown event type {name:?}")]
    UnknownName { name: String },
}

/// Index of a node inside one [`Ontology`]. Not stable across rebuilds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// One line of the ontology JSONL format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub name: String,
    pub parent: Option<String>,
    #[serde(default)]
    pub external_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTypeNode {
    name: String,
    external_id: Option<String>,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    subtree_end: usize,
    /// Definitions in curation order; `definitions[0]` is the curated seed.
    pub definitions: Vec<String>,
}

impl EventTypeNode {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn external_id(&self) -> Option<&str> {
        self.external_id.as_deref()
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn children(&self) -> &[NodeId] {
        &self.children
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ontology {
    nodes: Vec<EventTypeNode>,
    roots: Vec<NodeId>,
    index: BTreeMap<String, NodeId>,
    pub version: String,
    pub source: String,
}

/// Borrowed view of one dependency tree.
#[derive(Debug, Clone, Copy)]
pub struct Tree<'a> {
    ontology: &'a Ontology,
    root: NodeId,
}

impl<'a> Tree<'a> {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn ontology(&self) -> &'a Ontology {
        self.ontology
    }

    /// Node ids of the tree in pre-order.
    pub fn ids(&self) -> impl Iterator<Item = NodeId> + 'a {
        self.ontology.subtree_range(self.root).map(NodeId)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &'a EventTypeNode> + 'a {
        let ontology = self.ontology;
        self.ids().map(move |id| ontology.node(id))
    }

    pub fn len(&self) -> usize {
        self.ontology.subtree_range(self.root).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of [`Ontology::filter_heldout`].
#[derive(Debug, Clone)]
pub struct HeldoutFilter {
    pub ontology: Ontology,
    /// Root names of the removed trees, in tree order.
    pub removed_trees: Vec<String>,
    /// Held-out names that matched no node.
    pub unmatched: Vec<String>,
}

impl Ontology {
    pub fn from_records<I>(records: I) -> Result<Self, OntologyError>
    where
        I: IntoIterator<Item = NodeRecord>,
    {
        let mut builder = OntologyBuilder::default();
        for (i, record) in records.into_iter().enumerate() {
            builder.push(i + 1, record, Vec::new());
        }
        builder.build()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &EventTypeNode {
        &self.nodes[id.0]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut EventTypeNode {
        &mut self.nodes[id.0]
    }

    /// Case-insensitive, trim-insensitive lookup.
    pub fn get(&self, name: &str) -> Option<NodeId> {
        self.index.get(&name_key(name)).copied()
    }

    pub fn lookup(&self, name: &str) -> Result<NodeId, OntologyError> {
        self.get(name).ok_or_else(|| OntologyError::UnknownName {
            name: name.to_string(),
        })
    }

    /// All nodes, trees in order and pre-order within each tree.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &EventTypeNode)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn trees(&self) -> impl Iterator<Item = Tree<'_>> {
        self.roots.iter().map(move |&root| Tree { ontology: self, root })
    }

    pub fn tree(&self, root: NodeId) -> Tree<'_> {
        Tree { ontology: self, root }
    }

    /// Root of the tree containing `id`.
    pub fn tree_root(&self, id: NodeId) -> NodeId {
        let mut cur = id;
        while let Some(p) = self.nodes[cur.0].parent {
            cur = p;
        }
        cur
    }

    fn subtree_range(&self, id: NodeId) -> Range<usize> {
        id.0..self.nodes[id.0].subtree_end
    }

    /// Proper descendants of `id` in pre-order.
    pub fn descendants(&self, id: NodeId) -> impl Iterator<Item = NodeId> {
        (id.0 + 1..self.nodes[id.0].subtree_end).map(NodeId)
    }

    pub fn is_descendant_or_self(&self, id: NodeId, ancestor: NodeId) -> bool {
        self.subtree_range(ancestor).contains(&id.0)
    }

    /// Ancestors nearest first.
    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        core::iter::successors(self.nodes[id.0].parent, move |p| self.nodes[p.0].parent)
    }

    pub fn sibling_ids(&self, id: NodeId) -> Vec<NodeId> {
        match self.nodes[id.0].parent {
            Some(p) => self.nodes[p.0]
                .children
                .iter()
                .copied()
                .filter(|&c| c != id)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Nodes sharing the parent of `name`, excluding the node itself. Roots
    /// have no siblings.
    pub fn siblings(&self, name: &str) -> Result<Vec<&EventTypeNode>, OntologyError> {
        let id = self.lookup(name)?;
        Ok(self.sibling_ids(id).into_iter().map(|s| self.node(s)).collect())
    }

    pub fn to_records(&self) -> Vec<NodeRecord> {
        self.nodes
            .iter()
            .map(|n| NodeRecord {
                name: n.name.clone(),
                parent: n.parent.map(|p| self.nodes[p.0].name.clone()),
                external_id: n.external_id.clone(),
            })
            .collect()
    }

    fn rebuild<F>(&self, keep: F) -> Ontology
    where
        F: Fn(NodeId) -> bool,
    {
        let mut builder = OntologyBuilder::default();
        for (id, node) in self.iter() {
            if !keep(id) {
                continue;
            }
            let parent = self
                .ancestors(id)
                .find(|&a| keep(a))
                .map(|a| self.nodes[a.0].name.clone());
            builder.push(
                id.0 + 1,
                NodeRecord {
                    name: node.name.clone(),
                    parent,
                    external_id: node.external_id.clone(),
                },
                node.definitions.clone(),
            );
        }
        let mut out = builder.build().expect("a subset of a valid ontology is valid");
        out.version = self.version.clone();
        out.source = self.source.clone();
        out
    }

    /// Removes every tree containing a held-out event. Matching ignores case,
    /// surrounding and repeated whitespace, and treats `-` and `_` as spaces.
    pub fn filter_heldout<S: AsRef<str>>(&self, heldout: &[S]) -> HeldoutFilter {
        let wanted: BTreeMap<String, &str> = heldout
            .iter()
            .map(|h| (heldout_key(h.as_ref()), h.as_ref()))
            .collect();
        let mut matched: BTreeSet<&String> = BTreeSet::new();
        let mut drop_roots: BTreeSet<NodeId> = BTreeSet::new();
        for (id, node) in self.iter() {
            if let Some((key, _)) = wanted.get_key_value(&heldout_key(&node.name)) {
                matched.insert(key);
                drop_roots.insert(self.tree_root(id));
            }
        }
        let unmatched = wanted
            .iter()
            .filter(|(k, _)| !matched.contains(k))
            .map(|(_, original)| original.to_string())
            .collect();
        let removed_trees = self
            .roots
            .iter()
            .filter(|r| drop_roots.contains(r))
            .map(|r| self.nodes[r.0].name.clone())
            .collect();
        let ontology = self.rebuild(|id| !drop_roots.contains(&self.tree_root(id)));
        HeldoutFilter {
            ontology,
            removed_trees,
            unmatched,
        }
    }

    /// Drops the given nodes. Children of a removed node move up to its
    /// nearest surviving ancestor, taking its place in the child order.
    pub fn without_nodes(&self, removed: &BTreeSet<NodeId>) -> Ontology {
        self.rebuild(|id| !removed.contains(&id))
    }
}

#[derive(Debug)]
struct Pending {
    line: usize,
    record: NodeRecord,
    definitions: Vec<String>,
}

/// Accumulates node records (with their source line) and validates them.
#[derive(Debug, Default)]
pub struct OntologyBuilder {
    pending: Vec<Pending>,
}

impl OntologyBuilder {
    pub fn push(&mut self, line: usize, record: NodeRecord, definitions: Vec<String>) {
        self.pending.push(Pending {
            line,
            record,
            definitions,
        });
    }

    pub fn build(self) -> Result<Ontology, OntologyError> {
        let pending = self.pending;
        let mut by_key: BTreeMap<String, usize> = BTreeMap::new();
        for (i, p) in pending.iter().enumerate() {
            let name = p.record.name.trim();
            if name.is_empty() {
                return Err(OntologyError::EmptyName { line: p.line });
            }
            if let Some(&first) = by_key.get(&name_key(name)) {
                return Err(OntologyError::DuplicateName {
                    name: name.to_string(),
                    first_line: pending[first].line,
                    second_line: p.line,
                });
            }
            by_key.insert(name_key(name), i);
        }

        let mut parent_of: Vec<Option<usize>> = Vec::with_capacity(pending.len());
        let mut children_of: Vec<Vec<usize>> = (0..pending.len()).map(|_| Vec::new()).collect();
        let mut roots = Vec::new();
        for (i, p) in pending.iter().enumerate() {
            let parent = match p.record.parent.as_deref().map(str::trim) {
                None | Some("") => None,
                Some(parent) => match by_key.get(&name_key(parent)) {
                    Some(&j) if j == i => {
                        return Err(OntologyError::Cycle {
                            name: p.record.name.trim().to_string(),
                        })
                    }
                    Some(&j) => Some(j),
                    None => {
                        return Err(OntologyError::UnknownParent {
                            name: p.record.name.trim().to_string(),
                            parent: parent.to_string(),
                            line: p.line,
                        })
                    }
                },
            };
            match parent {
                Some(j) => children_of[j].push(i),
                None => roots.push(i),
            }
            parent_of.push(parent);
        }

        // Pre-order walk; anything left unvisited hangs off a cycle.
        let mut order: Vec<usize> = Vec::with_capacity(pending.len());
        let mut subtree_len = alloc::vec![0usize; pending.len()];
        for &root in &roots {
            let mut stack: Vec<(usize, usize)> = alloc::vec![(root, 0)];
            order.push(root);
            while let Some((node, next)) = stack.pop() {
                if let Some(&child) = children_of[node].get(next) {
                    stack.push((node, next + 1));
                    stack.push((child, 0));
                    order.push(child);
                } else {
                    subtree_len[node] = 1 + children_of[node].iter().map(|&c| subtree_len[c]).sum::<usize>();
                }
            }
        }
        if order.len() != pending.len() {
            let mut visited = alloc::vec![false; pending.len()];
            for &i in &order {
                visited[i] = true;
            }
            let first = visited.iter().position(|v| !v).unwrap_or(0);
            return Err(OntologyError::Cycle {
                name: pending[first].record.name.trim().to_string(),
            });
        }

        let mut position = alloc::vec![0usize; pending.len()];
        for (pos, &i) in order.iter().enumerate() {
            position[i] = pos;
        }
        let mut slots: Vec<Option<Pending>> = pending.into_iter().map(Some).collect();
        let mut nodes = Vec::with_capacity(order.len());
        let mut index = BTreeMap::new();
        for (pos, &i) in order.iter().enumerate() {
            let p = slots[i].take().expect("each node is visited once");
            let name = p.record.name.trim().to_string();
            index.insert(name_key(&name), NodeId(pos));
            nodes.push(EventTypeNode {
                name,
                external_id: p.record.external_id,
                parent: parent_of[i].map(|j| NodeId(position[j])),
                children: children_of[i].iter().map(|&c| NodeId(position[c])).collect(),
                subtree_end: pos + subtree_len[i],
                definitions: p.definitions,
            });
        }
        Ok(Ontology {
            nodes,
            roots: roots.iter().map(|&r| NodeId(position[r])).collect(),
            index,
            version: String::new(),
            source: String::new(),
        })
    }
}
