//! Node-set evaluation of `must` expressions over one device's instance tree.

use crate::schema::{MustExpr, MustPath, MustStart, MustStep};
use crate::state::{InstanceNode, InstanceTree, KeyTuple, ListEntry};

#[derive(Debug, Clone, PartialEq)]
pub(super) enum XNode<'a> {
    Root,
    Container(Vec<&'a str>),
    Entry {
        list: Vec<&'a str>,
        key: &'a KeyTuple,
        entry: &'a ListEntry,
    },
    Field {
        list: Vec<&'a str>,
        key: &'a KeyTuple,
        entry: &'a ListEntry,
        field: &'a str,
    },
    Leaf(Vec<&'a str>),
}

pub(super) struct Evaluator<'a> {
    pub tree: &'a InstanceTree,
}

fn push_unique<'a>(out: &mut Vec<XNode<'a>>, n: XNode<'a>) {
    if !out.contains(&n) {
        out.push(n);
    }
}

fn parent_of<'a>(path: &[&'a str]) -> XNode<'a> {
    if path.len() <= 1 {
        XNode::Root
    } else {
        XNode::Container(path[..path.len() - 1].to_vec())
    }
}

impl<'a> Evaluator<'a> {
    fn lookup(&self, path: &[&str]) -> Option<&'a InstanceNode> {
        crate::state::tree_get(self.tree, path)
    }

    fn children_named(&self, node: &XNode<'a>, name: &str, out: &mut Vec<XNode<'a>>) {
        let (map, base): (Option<_>, Vec<&'a str>) = match node {
            XNode::Root => {
                if let Some((k, _)) = self.tree.get_key_value(name) {
                    self.classify(vec![k.as_str()], out);
                }
                return;
            }
            XNode::Container(p) => match self.lookup(p) {
                Some(InstanceNode::Container(m)) => (Some(m), p.clone()),
                _ => (None, Vec::new()),
            },
            XNode::Entry { list, key, entry } => {
                if let Some((f, _)) = entry.get_key_value(name) {
                    push_unique(
                        out,
                        XNode::Field {
                            list: list.clone(),
                            key,
                            entry,
                            field: f.as_str(),
                        },
                    );
                }
                return;
            }
            XNode::Field { .. } | XNode::Leaf(_) => return,
        };
        if let Some((k, _)) = map.and_then(|m| m.get_key_value(name)) {
            let mut p = base;
            p.push(k.as_str());
            self.classify(p, out);
        }
    }

    /// Expands a tree path into XPath nodes: a list yields its entries.
    fn classify(&self, path: Vec<&'a str>, out: &mut Vec<XNode<'a>>) {
        match self.lookup(&path) {
            Some(InstanceNode::Container(_)) => push_unique(out, XNode::Container(path)),
            Some(InstanceNode::List(entries)) => {
                for (key, entry) in entries {
                    push_unique(
                        out,
                        XNode::Entry {
                            list: path.clone(),
                            key,
                            entry,
                        },
                    );
                }
            }
            Some(InstanceNode::Leaf(_) | InstanceNode::LeafList(_)) => push_unique(out, XNode::Leaf(path)),
            None => {}
        }
    }

    fn parent(&self, node: &XNode<'a>) -> Option<XNode<'a>> {
        match node {
            XNode::Root => None,
            XNode::Container(p) | XNode::Leaf(p) => Some(parent_of(p)),
            XNode::Entry { list, .. } => Some(parent_of(list)),
            XNode::Field { list, key, entry, .. } => Some(XNode::Entry {
                list: list.clone(),
                key,
                entry,
            }),
        }
    }

    pub fn string_values(&self, node: &XNode<'a>) -> Vec<String> {
        match node {
            XNode::Field { entry, field, .. } => entry
                .get(*field)
                .map(|v| v.items().iter().map(|s| s.to_string()).collect())
                .unwrap_or_default(),
            XNode::Leaf(p) => match self.lookup(p) {
                Some(InstanceNode::Leaf(s)) => vec![s.to_string()],
                Some(InstanceNode::LeafList(v)) => v.iter().map(ToString::to_string).collect(),
                _ => Vec::new(),
            },
            _ => Vec::new(),
        }
    }

    fn values_of(&self, nodes: &[XNode<'a>]) -> Vec<String> {
        nodes.iter().flat_map(|n| self.string_values(n)).collect()
    }

    pub fn eval_path(&self, path: &MustPath, context: &XNode<'a>, current: &XNode<'a>) -> Vec<XNode<'a>> {
        let mut set = match path.start {
            MustStart::Current => vec![current.clone()],
            MustStart::Root => vec![XNode::Root],
            MustStart::Context => vec![context.clone()],
        };
        for step in &path.steps {
            let mut next = Vec::new();
            for n in &set {
                match step {
                    MustStep::Parent => {
                        if let Some(p) = self.parent(n) {
                            push_unique(&mut next, p);
                        }
                    }
                    MustStep::Child { name, predicates } => {
                        let mut cands = Vec::new();
                        self.children_named(n, &name.name, &mut cands);
                        for c in cands {
                            let keep = predicates.iter().all(|p| {
                                let mut field = Vec::new();
                                self.children_named(&c, &p.name.name, &mut field);
                                let lhs = self.values_of(&field);
                                let rhs = self.values_of(&self.eval_path(&p.value, &c, current));
                                lhs.iter().any(|v| rhs.contains(v))
                            });
                            if keep {
                                push_unique(&mut next, c);
                            }
                        }
                    }
                }
            }
            set = next;
        }
        set
    }

    pub fn holds(&self, expr: &MustExpr, context: &XNode<'a>) -> bool {
        match expr {
            MustExpr::Exists(p) => !self.eval_path(p, context, context).is_empty(),
            MustExpr::Equals(a, b) => {
                let lhs = self.values_of(&self.eval_path(a, context, context));
                let rhs = self.values_of(&self.eval_path(b, context, context));
                lhs.iter().any(|v| rhs.contains(v))
            }
        }
    }
}
