use std::collections::{BTreeMap, BTreeSet};

use super::{
    NodeKind, SchemaError, SchemaModule, SchemaNode, SchemaPath, Segment, TypeRef, TypeSpec,
};

/// A set of modules with every typedef inlined and every leafref checked.
///
/// Immutable once built; share it behind an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSchema {
    modules: Vec<SchemaModule>,
}

/// A schema node located by path.
#[derive(Debug, Clone, Copy)]
pub struct NodeRef<'a> {
    pub module: &'a SchemaModule,
    pub node: &'a SchemaNode,
    /// Depth of the node below the module root (root container = 0).
    pub depth: usize,
}

/// A config-DB table: a container directly below a module's root container.
#[derive(Debug, Clone)]
pub struct TableRef<'a> {
    pub module: &'a SchemaModule,
    pub root: &'a SchemaNode,
    pub table: &'a SchemaNode,
}

impl TableRef<'_> {
    pub fn path(&self) -> SchemaPath {
        canonical(&self.module.name, [self.root.name.as_str(), self.table.name.as_str()])
    }

    /// The list in this table whose key arity matches a `|`-joined key.
    pub fn list_for_arity(&self, arity: usize) -> Option<&SchemaNode> {
        self.table
            .children
            .iter()
            .find(|c| c.kind == NodeKind::List && c.key_leaves.len() == arity)
    }
}

/// Canonical path form: the root container and the table are qualified with
/// the module name, deeper segments are plain.
pub fn canonical<'s>(module: &str, names: impl IntoIterator<Item = &'s str>) -> SchemaPath {
    SchemaPath::new(
        names
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                if i < 2 {
                    Segment::qualified(module, n)
                } else {
                    Segment::new(n)
                }
            })
            .collect(),
    )
}

/// Resolves a module set: checks imports, inlines typedefs and resolves leafrefs.
pub fn resolve(modules: impl IntoIterator<Item = SchemaModule>) -> Result<ResolvedSchema, SchemaError> {
    let mut by_name: BTreeMap<String, SchemaModule> = BTreeMap::new();
    for m in modules {
        if by_name.contains_key(&m.name) {
            return Err(SchemaError::DuplicateModule(m.name));
        }
        by_name.insert(m.name.clone(), m);
    }
    for m in by_name.values() {
        for i in &m.imports {
            if !by_name.contains_key(&i.module) {
                return Err(SchemaError::UnresolvedImport {
                    module: m.name.clone(),
                    import: i.module.clone(),
                });
            }
        }
    }
    check_cycles(&by_name)?;

    // Typedefs first, against the untouched module set.
    let original = by_name.clone();
    for m in by_name.values_mut() {
        let ctx = &original[&m.name];
        for t in &mut m.typedefs {
            t.type_ref = TypeRef::Resolved(resolve_type(&original, ctx, &t.type_ref, &mut Vec::new())?);
        }
        for n in &mut m.root_nodes {
            resolve_node_types(&original, ctx, n)?;
        }
    }

    let mut schema = ResolvedSchema {
        modules: by_name.into_values().collect(),
    };

    // Leafrefs: canonicalize paths and attach the target leaf's type.
    let mut fixes: Vec<(usize, Vec<usize>, SchemaPath, TypeSpec)> = Vec::new();
    for (mi, m) in schema.modules.iter().enumerate() {
        for (ri, root) in m.root_nodes.iter().enumerate() {
            let mut names = Vec::new();
            collect_leafrefs(&schema, m, root, &mut vec![ri], &mut names, mi, &mut fixes)?;
        }
    }
    for (mi, idx, path, target) in fixes {
        let module = &mut schema.modules[mi];
        let mut node = &mut module.root_nodes[idx[0]];
        for &i in &idx[1..] {
            node = &mut node.children[i];
        }
        node.type_ref = Some(TypeRef::Resolved(TypeSpec::Leafref {
            path,
            target: Some(Box::new(target)),
        }));
    }
    Ok(schema)
}

fn check_cycles(modules: &BTreeMap<String, SchemaModule>) -> Result<(), SchemaError> {
    fn visit(
        name: &str,
        modules: &BTreeMap<String, SchemaModule>,
        stack: &mut Vec<String>,
        done: &mut BTreeSet<String>,
    ) -> Result<(), SchemaError> {
        if done.contains(name) {
            return Ok(());
        }
        if let Some(pos) = stack.iter().position(|s| s == name) {
            let mut cycle = stack[pos..].to_vec();
            cycle.push(name.to_string());
            return Err(SchemaError::ImportCycle(cycle));
        }
        stack.push(name.to_string());
        for i in &modules[name].imports {
            visit(&i.module, modules, stack, done)?;
        }
        stack.pop();
        done.insert(name.to_string());
        Ok(())
    }
    let mut done = BTreeSet::new();
    for name in modules.keys() {
        visit(name, modules, &mut Vec::new(), &mut done)?;
    }
    Ok(())
}

fn resolve_type(
    modules: &BTreeMap<String, SchemaModule>,
    ctx: &SchemaModule,
    ty: &TypeRef,
    visiting: &mut Vec<String>,
) -> Result<TypeSpec, SchemaError> {
    let name = match ty {
        TypeRef::Resolved(spec) => return Ok(spec.clone()),
        TypeRef::Named(n) => n,
    };
    let unresolved = || SchemaError::UnresolvedTypedef {
        module: ctx.name.clone(),
        name: name.clone(),
    };
    let (owner, local) = match name.split_once(':') {
        Some((p, n)) => {
            let target = ctx.module_for_prefix(p).ok_or_else(unresolved)?;
            (modules.get(target).ok_or_else(unresolved)?, n)
        }
        None => (ctx, name.as_str()),
    };
    let key = format!("{}:{local}", owner.name);
    if visiting.contains(&key) {
        return Err(SchemaError::Invalid {
            module: ctx.name.clone(),
            message: format!("typedef cycle through `{key}`"),
        });
    }
    let td = owner.typedef(local).ok_or_else(unresolved)?;
    visiting.push(key);
    let spec = resolve_type(modules, owner, &td.type_ref, visiting);
    visiting.pop();
    spec
}

fn resolve_node_types(
    modules: &BTreeMap<String, SchemaModule>,
    ctx: &SchemaModule,
    node: &mut SchemaNode,
) -> Result<(), SchemaError> {
    if let Some(ty) = &node.type_ref {
        node.type_ref = Some(TypeRef::Resolved(resolve_type(modules, ctx, ty, &mut Vec::new())?));
    }
    for c in &mut node.children {
        resolve_node_types(modules, ctx, c)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn collect_leafrefs(
    schema: &ResolvedSchema,
    module: &SchemaModule,
    node: &SchemaNode,
    index: &mut Vec<usize>,
    names: &mut Vec<String>,
    mi: usize,
    fixes: &mut Vec<(usize, Vec<usize>, SchemaPath, TypeSpec)>,
) -> Result<(), SchemaError> {
    names.push(node.name.clone());
    if let Some(TypeSpec::Leafref { path, .. }) = node.type_spec() {
        let at = canonical(&module.name, names.iter().map(String::as_str));
        let target_path = qualify_leafref(schema, module, &at, path)?;
        let dangling = || SchemaError::UnresolvedLeafref {
            path: path.to_string(),
            at: at.to_string(),
        };
        let target = schema.find_node(&target_path).map_err(|_| dangling())?;
        if !target.node.kind.is_data_leaf() {
            return Err(dangling());
        }
        let target_spec = match target.node.type_spec() {
            Some(TypeSpec::Leafref {
                target: Some(t), ..
            }) => (**t).clone(),
            Some(TypeSpec::Leafref { target: None, path: p }) => {
                // target is itself an unprocessed leafref; chase it once
                let tp = qualify_leafref(schema, target.module, &target_path, p)?;
                schema
                    .find_node(&tp)
                    .ok()
                    .and_then(|n| n.node.type_spec().cloned())
                    .unwrap_or(TypeSpec::String)
            }
            Some(t) => t.clone(),
            None => return Err(dangling()),
        };
        fixes.push((mi, index.clone(), target_path, target_spec));
    }
    for (ci, c) in node.children.iter().enumerate() {
        index.push(ci);
        collect_leafrefs(schema, module, c, index, names, mi, fixes)?;
        index.pop();
    }
    names.pop();
    Ok(())
}

/// Turns a leafref path written inside `module` into canonical absolute form.
fn qualify_leafref(
    schema: &ResolvedSchema,
    module: &SchemaModule,
    at: &SchemaPath,
    path: &SchemaPath,
) -> Result<SchemaPath, SchemaError> {
    if path.is_absolute() {
        let first = &path.segments[0];
        let owner = match &first.prefix {
            Some(p) => module
                .module_for_prefix(p)
                .map(str::to_string)
                .or_else(|| schema.module(p).map(|m| m.name.clone()))
                .ok_or_else(|| SchemaError::UnresolvedLeafref {
                    path: path.to_string(),
                    at: at.to_string(),
                })?,
            None => module.name.clone(),
        };
        Ok(canonical(&owner, path.names()))
    } else {
        if path.relative_ups > at.len() {
            return Err(SchemaError::UnresolvedLeafref {
                path: path.to_string(),
                at: at.to_string(),
            });
        }
        let keep = at.len() - path.relative_ups;
        let names: Vec<&str> = at.names().take(keep).chain(path.names()).collect();
        Ok(canonical(&module.name, names))
    }
}

impl ResolvedSchema {
    pub fn modules(&self) -> &[SchemaModule] {
        &self.modules
    }

    pub fn module(&self, name_or_prefix: &str) -> Option<&SchemaModule> {
        self.modules
            .iter()
            .find(|m| m.name == name_or_prefix)
            .or_else(|| self.modules.iter().find(|m| m.prefix == name_or_prefix))
    }

    /// Looks up a node by absolute path.
    ///
    /// Prefixed segments must match the owning module (name or prefix);
    /// unprefixed root segments must match exactly one module.
    pub fn find_node(&self, path: &SchemaPath) -> Result<NodeRef<'_>, SchemaError> {
        let not_found = |depth: usize| SchemaError::PathNotFound {
            path: path.to_string(),
            resolved: path.prefix_of(depth),
        };
        if !path.is_absolute() || path.is_empty() {
            return Err(SchemaError::InvalidPath(path.to_string()));
        }
        let first = &path.segments[0];
        let candidates: Vec<(&SchemaModule, &SchemaNode)> = match &first.prefix {
            Some(p) => self
                .module(p)
                .into_iter()
                .filter_map(|m| {
                    m.root_nodes
                        .iter()
                        .find(|n| n.name == first.name)
                        .map(|n| (m, n))
                })
                .collect(),
            None => self
                .modules
                .iter()
                .filter_map(|m| {
                    m.root_nodes
                        .iter()
                        .find(|n| n.name == first.name)
                        .map(|n| (m, n))
                })
                .collect(),
        };
        let (module, mut node) = match candidates.as_slice() {
            [] => return Err(not_found(0)),
            [one] => *one,
            _ => {
                return Err(SchemaError::AmbiguousPath {
                    path: path.to_string(),
                    segment: first.to_string(),
                })
            }
        };
        for (depth, seg) in path.segments.iter().enumerate().skip(1) {
            if let Some(p) = &seg.prefix {
                if p != &module.name && p != &module.prefix {
                    return Err(not_found(depth));
                }
            }
            node = node.child(&seg.name).ok_or_else(|| not_found(depth))?;
        }
        Ok(NodeRef {
            module,
            node,
            depth: path.len() - 1,
        })
    }

    /// Like [`find_node`](Self::find_node), but also accepts the string form
    /// `module/root/table/...` where the first segment names the module.
    pub fn find_data_node(&self, path: &SchemaPath) -> Result<(NodeRef<'_>, SchemaPath), SchemaError> {
        match self.find_node(path) {
            Ok(n) => {
                let canon = canonical(&n.module.name, path.names());
                Ok((n, canon))
            }
            Err(strict) => {
                let first = &path.segments[0];
                if first.prefix.is_none() && path.len() >= 2 && self.module(&first.name).is_some() {
                    let mut segs = path.segments[1..].to_vec();
                    if segs[0].prefix.is_none() {
                        segs[0].prefix = Some(first.name.clone());
                    }
                    let folded = SchemaPath::new(segs);
                    if let Ok(n) = self.find_node(&folded) {
                        let canon = canonical(&n.module.name, folded.names());
                        return Ok((n, canon));
                    }
                }
                Err(strict)
            }
        }
    }

    /// All config-DB tables in module order.
    pub fn tables(&self) -> Vec<TableRef<'_>> {
        let mut out = Vec::new();
        for m in &self.modules {
            for root in m.root_nodes.iter().filter(|n| n.kind == NodeKind::Container) {
                for table in root.children.iter().filter(|n| n.kind == NodeKind::Container) {
                    out.push(TableRef {
                        module: m,
                        root,
                        table,
                    });
                }
            }
        }
        out
    }

    pub fn table(&self, name: &str) -> Option<TableRef<'_>> {
        self.tables().into_iter().find(|t| t.table.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_module;

    const PORT: &str = r#"module sonic-port { prefix port;
        container sonic-port { container PORT { list PORT_LIST { key "name";
            leaf name { type string; } leaf mtu { type uint16; } } } } }"#;

    const INTF: &str = r#"module sonic-interface { prefix intf;
        import sonic-port { prefix port; }
        container sonic-interface { container INTERFACE {
            list INTERFACE_LIST { key "name";
                leaf name { type leafref { path "/port:sonic-port/port:PORT/port:PORT_LIST/port:name"; } } }
            list INTERFACE_IPPREFIX_LIST { key "name ip-prefix";
                leaf name { type leafref { path "../../INTERFACE_LIST/name"; } }
                leaf ip-prefix { type string; } } } } }"#;

    fn fixture() -> ResolvedSchema {
        resolve([parse_module(PORT).unwrap(), parse_module(INTF).unwrap()]).unwrap()
    }

    #[test]
    fn leafref_resolves_through_import_prefix() {
        let s = fixture();
        let n = s
            .find_node(&SchemaPath::parse("/sonic-interface:sonic-interface/INTERFACE/INTERFACE_LIST/name").unwrap())
            .unwrap();
        match n.node.type_spec().unwrap() {
            TypeSpec::Leafref { path, target } => {
                assert_eq!(path.to_wire(), ["sonic-port:sonic-port", "sonic-port:PORT", "PORT_LIST", "name"]);
                assert_eq!(**target.as_ref().unwrap(), TypeSpec::String);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn relative_leafref_and_chained_target() {
        let s = fixture();
        let n = s
            .find_node(&SchemaPath::parse("/sonic-interface/INTERFACE/INTERFACE_IPPREFIX_LIST/name").unwrap())
            .unwrap();
        match n.node.type_spec().unwrap() {
            TypeSpec::Leafref { path, target } => {
                assert_eq!(path.to_wire()[3], "name");
                assert_eq!(path.to_wire()[2], "INTERFACE_LIST");
                assert_eq!(**target.as_ref().unwrap(), TypeSpec::String);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_leafref_names_path() {
        let port = PORT.replace("leaf name { type string; }", "leaf ifname { type string; }").replace("key \"name\"", "key \"ifname\"");
        let err = resolve([parse_module(&port).unwrap(), parse_module(INTF).unwrap()]).unwrap_err();
        match err {
            SchemaError::UnresolvedLeafref { path, .. } => {
                assert_eq!(path, "/port:sonic-port/port:PORT/port:PORT_LIST/port:name")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_import_and_cycle() {
        assert!(matches!(
            resolve([parse_module(INTF).unwrap()]),
            Err(SchemaError::UnresolvedImport { .. })
        ));
        let a = parse_module("module a { prefix a; import b { prefix b; } }").unwrap();
        let b = parse_module("module b { prefix b; import a { prefix a; } }").unwrap();
        assert!(matches!(resolve([a, b]), Err(SchemaError::ImportCycle(_))));
    }

    #[test]
    fn unresolved_typedef() {
        let m = parse_module("module m { prefix m; leaf x { type nope; } }").unwrap();
        assert!(matches!(resolve([m]), Err(SchemaError::UnresolvedTypedef { .. })));
    }

    #[test]
    fn find_node_reports_deepest_prefix() {
        let s = fixture();
        let err = s
            .find_node(&SchemaPath::parse("/sonic-interface:sonic-interface/INTERFAC/INTERFACE_LIST").unwrap())
            .unwrap_err();
        match err {
            SchemaError::PathNotFound { resolved, .. } => {
                assert_eq!(resolved.to_wire(), ["sonic-interface:sonic-interface"])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn root_path_finds_root_container() {
        let s = fixture();
        let n = s.find_node(&SchemaPath::parse("/sonic-port").unwrap()).unwrap();
        assert_eq!(n.node.name, "sonic-port");
        assert_eq!(n.depth, 0);
        let n = s.find_node(&SchemaPath::parse("/port:sonic-port").unwrap()).unwrap();
        assert_eq!(n.module.name, "sonic-port");
    }

    #[test]
    fn wrong_prefix_is_not_found() {
        let s = fixture();
        assert!(s
            .find_node(&SchemaPath::parse("/sonic-interface:sonic-interface/sonic-port:INTERFACE").unwrap())
            .is_err());
    }

    #[test]
    fn module_first_string_form() {
        let s = fixture();
        let p = SchemaPath::parse("sonic-interface/sonic-interface/INTERFACE/INTERFACE_IPPREFIX_LIST").unwrap();
        let (n, canon) = s.find_data_node(&p).unwrap();
        assert_eq!(n.node.name, "INTERFACE_IPPREFIX_LIST");
        assert_eq!(
            canon.to_wire(),
            ["sonic-interface:sonic-interface", "sonic-interface:INTERFACE", "INTERFACE_IPPREFIX_LIST"]
        );
    }

    #[test]
    fn resolve_is_idempotent() {
        let s = fixture();
        let again = resolve(s.modules().to_vec()).unwrap();
        assert_eq!(s, again);
    }
}
