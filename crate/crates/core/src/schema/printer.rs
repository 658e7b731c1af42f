use std::fmt::Write;

use super::{NodeKind, SchemaModule, SchemaNode, TypeRef, TypeSpec};

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("    ");
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn write_type(out: &mut String, ty: &TypeRef, indent: usize) {
    pad(out, indent);
    let spec = match ty {
        TypeRef::Named(n) => {
            let _ = writeln!(out, "type {n};");
            return;
        }
        TypeRef::Resolved(spec) => spec,
    };
    match spec {
        TypeSpec::String => out.push_str("type string;\n"),
        TypeSpec::Ip4Prefix => out.push_str("type ipv4-prefix;\n"),
        TypeSpec::PatternString { pattern } => {
            out.push_str("type string {\n");
            pad(out, indent + 1);
            // single quotes keep regex backslashes literal
            let _ = writeln!(out, "pattern '{}';", pattern.source());
            pad(out, indent);
            out.push_str("}\n");
        }
        TypeSpec::IntegerRange { kind, min, max } => {
            if (*min, *max) == kind.bounds() {
                let _ = writeln!(out, "type {};", kind.name());
            } else {
                let _ = writeln!(out, "type {} {{", kind.name());
                pad(out, indent + 1);
                let _ = writeln!(out, "range \"{min}..{max}\";");
                pad(out, indent);
                out.push_str("}\n");
            }
        }
        TypeSpec::Enumeration { values } => {
            out.push_str("type enumeration {\n");
            for v in values {
                pad(out, indent + 1);
                let _ = writeln!(out, "enum {v};");
            }
            pad(out, indent);
            out.push_str("}\n");
        }
        TypeSpec::Leafref { path, .. } => {
            out.push_str("type leafref {\n");
            pad(out, indent + 1);
            let _ = writeln!(out, "path \"{path}\";");
            pad(out, indent);
            out.push_str("}\n");
        }
    }
}

pub(super) fn write_node(out: &mut String, node: &SchemaNode, indent: usize) {
    pad(out, indent);
    let _ = writeln!(out, "{} {} {{", node.kind.keyword(), node.name);
    if node.kind == NodeKind::List {
        pad(out, indent + 1);
        let _ = writeln!(out, "key {};", quote(&node.key_leaves.join(" ")));
    }
    if let Some(ty) = &node.type_ref {
        write_type(out, ty, indent + 1);
    }
    for m in &node.must_exprs {
        pad(out, indent + 1);
        let _ = writeln!(out, "must {};", quote(&format!("({m})")));
    }
    if node.mandatory {
        pad(out, indent + 1);
        out.push_str("mandatory true;\n");
    }
    if let Some(d) = &node.description {
        pad(out, indent + 1);
        let _ = writeln!(out, "description {};", quote(d));
    }
    for c in &node.children {
        write_node(out, c, indent + 1);
    }
    pad(out, indent);
    out.push_str("}\n");
}

pub(super) fn module_to_yang(m: &SchemaModule) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "module {} {{", m.name);
    let _ = writeln!(out, "    prefix {};", m.prefix);
    for i in &m.imports {
        let _ = writeln!(out, "    import {} {{ prefix {}; }}", i.module, i.prefix);
    }
    if let Some(d) = &m.description {
        let _ = writeln!(out, "    description {};", quote(d));
    }
    for t in &m.typedefs {
        let _ = writeln!(out, "    typedef {} {{", t.name);
        write_type(&mut out, &t.type_ref, 2);
        if let Some(d) = &t.description {
            let _ = writeln!(out, "        description {};", quote(d));
        }
        out.push_str("    }\n");
    }
    for n in &m.root_nodes {
        write_node(&mut out, n, 1);
    }
    out.push_str("}\n");
    out
}
