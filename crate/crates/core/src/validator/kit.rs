//! Clean change sets for the bundled Clos fixture and mutations of them that
//! the validator must reject.

use std::fmt;

use serde::Serialize;

use super::{validate_after_apply, Rule, VerificationReport};
use crate::schema::{ResolvedSchema, SchemaPath, TypeSpec};
use crate::state::{Action, ChangeOp, ChangeSet, FieldValue, NetworkState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationKind {
    KeyDeletion,
    BadIp4Prefix,
    PathRetarget,
    LeafrefOrphan,
    DuplicateKey,
}

impl MutationKind {
    pub const ALL: [MutationKind; 5] = [
        MutationKind::KeyDeletion,
        MutationKind::BadIp4Prefix,
        MutationKind::PathRetarget,
        MutationKind::LeafrefOrphan,
        MutationKind::DuplicateKey,
    ];

    /// Rules any one of which counts as the expected detection.
    pub fn expected_rules(self) -> &'static [Rule] {
        match self {
            MutationKind::KeyDeletion => &[Rule::KeyMissing],
            MutationKind::BadIp4Prefix => &[Rule::TypeMismatch],
            MutationKind::PathRetarget => &[Rule::UnknownPath],
            MutationKind::LeafrefOrphan => &[Rule::LeafrefUnsatisfied, Rule::MustViolation],
            MutationKind::DuplicateKey => &[Rule::DuplicateKey],
        }
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MutationKind::KeyDeletion => "key-deletion",
            MutationKind::BadIp4Prefix => "bad-ip4-prefix",
            MutationKind::PathRetarget => "path-retarget",
            MutationKind::LeafrefOrphan => "leafref-orphan",
            MutationKind::DuplicateKey => "duplicate-key",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CleanCase {
    pub name: String,
    pub change_set: ChangeSet,
}

#[derive(Debug, Clone)]
pub struct Mutation {
    pub name: String,
    pub kind: MutationKind,
    pub base: String,
    pub change_set: ChangeSet,
}

fn path(segments: &[&str]) -> SchemaPath {
    SchemaPath::from_segments(segments).expect("static path")
}

fn intf_list() -> SchemaPath {
    path(&["sonic-interface:sonic-interface", "sonic-interface:INTERFACE", "INTERFACE_LIST"])
}

fn ipprefix_list() -> SchemaPath {
    path(&["sonic-interface:sonic-interface", "sonic-interface:INTERFACE", "INTERFACE_IPPREFIX_LIST"])
}

fn port_list() -> SchemaPath {
    path(&["sonic-port:sonic-port", "sonic-port:PORT", "PORT_LIST"])
}

fn l3(cs: &mut ChangeSet, device: &str, port: &str, prefix: &str) {
    cs.push(device, ChangeOp::new(Action::Append, intf_list()).with("name", port));
    cs.push(
        device,
        ChangeOp::new(Action::Append, ipprefix_list())
            .with("name", port)
            .with("ip-prefix", prefix),
    );
}

/// Twenty change sets that apply cleanly to the bundled Clos state.
pub fn clean_cases() -> Vec<CleanCase> {
    let mut out = Vec::new();
    let mut add = |name: String, cs: ChangeSet| out.push(CleanCase { name, change_set: cs });

    let mut walkthrough = ChangeSet::new();
    for (dev, ip) in [("L0", "10.1.1.1/30"), ("S0", "10.1.1.2/30"), ("L1", "10.1.1.5/30"), ("S1", "10.1.1.6/30")] {
        l3(&mut walkthrough, dev, "Ethernet4", ip);
    }
    add("connect-ethernet4".into(), walkthrough);

    let mut replace = ChangeSet::new();
    replace.push(
        "S0",
        ChangeOp::new(Action::Remove, ipprefix_list())
            .with("name", "Ethernet8")
            .with("ip-prefix", "10.0.2.1/24"),
    );
    replace.push(
        "S0",
        ChangeOp::new(Action::Append, ipprefix_list())
            .with("name", "Ethernet8")
            .with("ip-prefix", "10.0.5.1/24"),
    );
    add("replace-s0-ethernet8-prefix".into(), replace);

    let fresh = [
        ("S0", "Ethernet0"),
        ("S0", "Ethernet4"),
        ("S1", "Ethernet0"),
        ("S1", "Ethernet4"),
        ("L0", "Ethernet4"),
        ("L0", "Ethernet8"),
        ("L1", "Ethernet4"),
        ("L1", "Ethernet8"),
    ];
    for (i, (dev, port)) in fresh.iter().enumerate() {
        let mut cs = ChangeSet::new();
        l3(&mut cs, dev, port, &format!("10.2.{i}.1/31"));
        add(format!("l3-{dev}-{port}"), cs);
    }

    for (dev, mtu) in [("S0", "1500"), ("S1", "9000"), ("L0", "4000"), ("L1", "9216")] {
        let mut cs = ChangeSet::new();
        cs.push(dev, ChangeOp::new(Action::Remove, port_list()).with("name", "Ethernet0"));
        cs.push(
            dev,
            ChangeOp::new(Action::Append, port_list())
                .with("name", "Ethernet0")
                .with("admin_status", "up")
                .with("alias", "eth0")
                .with("mtu", mtu)
                .with("speed", "100000"),
        );
        add(format!("mtu-{dev}-ethernet0"), cs);
    }

    for dev in ["L0", "L1"] {
        let mut cs = ChangeSet::new();
        cs.push(
            dev,
            ChangeOp::new(Action::Append, path(&["sonic-acl:sonic-acl", "sonic-acl:ACL_TABLE", "ACL_TABLE_LIST"]))
                .with("ACL_TABLE_NAME", "DATAACL")
                .with("type", "L3")
                .with("stage", "ingress")
                .with("ports", FieldValue::List(vec!["Ethernet4".into(), "Ethernet8".into()])),
        );
        cs.push(
            dev,
            ChangeOp::new(Action::Append, path(&["sonic-acl:sonic-acl", "sonic-acl:ACL_RULE", "ACL_RULE_LIST"]))
                .with("ACL_TABLE_NAME", "DATAACL")
                .with("RULE_NAME", "DENY_SSH")
                .with("PRIORITY", "100")
                .with("PACKET_ACTION", "DROP")
                .with("SRC_IP", "10.0.0.0/8")
                .with("L4_DST_PORT", "22"),
        );
        add(format!("acl-{dev}"), cs);
    }

    for (dev, peer, asn) in [("S0", "10.0.2.2", "65001"), ("S1", "10.0.3.2", "65002")] {
        let mut cs = ChangeSet::new();
        cs.push(
            dev,
            ChangeOp::new(
                Action::Append,
                path(&["sonic-bgp-neighbor:sonic-bgp-neighbor", "sonic-bgp-neighbor:BGP_NEIGHBOR", "BGP_NEIGHBOR_LIST"]),
            )
            .with("neighbor", peer)
            .with("asn", asn)
            .with("admin_status", "up"),
        );
        add(format!("bgp-{dev}"), cs);
    }

    for (dev, ip) in [("L0", "10.3.0.1/24"), ("L1", "10.3.1.1/24")] {
        let mut cs = ChangeSet::new();
        cs.push(
            dev,
            ChangeOp::new(Action::Append, port_list())
                .with("name", "Ethernet12")
                .with("admin_status", "up")
                .with("mtu", "9100")
                .with("speed", "100000"),
        );
        l3(&mut cs, dev, "Ethernet12", ip);
        add(format!("new-port-{dev}-ethernet12"), cs);
    }
    out
}

fn ops_mut(cs: &mut ChangeSet) -> impl Iterator<Item = &mut ChangeOp> {
    cs.0.iter_mut().flat_map(|d| d.config.iter_mut())
}

fn key_leaves(schema: &ResolvedSchema, p: &SchemaPath) -> Vec<String> {
    schema
        .find_data_node(p)
        .map(|(n, _)| n.node.key_leaves.clone())
        .unwrap_or_default()
}

fn field_type(schema: &ResolvedSchema, p: &SchemaPath, field: &str) -> Option<TypeSpec> {
    let (n, _) = schema.find_data_node(p).ok()?;
    n.node.child(field)?.type_spec().cloned()
}

const BAD_PREFIXES: [&str; 4] = ["10.1.1.1/33", "10.1.1.256/24", "10.1.1.1", "10.1.1.1/-1"];

fn mutate(schema: &ResolvedSchema, base: &ChangeSet, kind: MutationKind, variant: usize) -> Option<ChangeSet> {
    let mut cs = base.clone();
    match kind {
        MutationKind::KeyDeletion => {
            let op = ops_mut(&mut cs).find(|op| !key_leaves(schema, &op.path).is_empty())?;
            let key = key_leaves(schema, &op.path).pop()?;
            op.value.shift_remove(&key)?;
        }
        MutationKind::BadIp4Prefix => {
            let mut done = false;
            for op in ops_mut(&mut cs) {
                let field = op
                    .value
                    .keys()
                    .find(|f| {
                        matches!(
                            field_type(schema, &op.path, f),
                            Some(TypeSpec::Ip4Prefix | TypeSpec::PatternString { .. })
                        ) && f.as_str() != "name"
                    })
                    .cloned();
                if let Some(f) = field {
                    let bad = match field_type(schema, &op.path, &f) {
                        Some(TypeSpec::Ip4Prefix) => BAD_PREFIXES[variant % BAD_PREFIXES.len()],
                        _ => "10.0.0.256",
                    };
                    op.value.insert(f, bad.into());
                    done = true;
                    break;
                }
            }
            if !done {
                return None;
            }
        }
        MutationKind::PathRetarget => {
            let op = ops_mut(&mut cs).next()?;
            let seg = if variant.is_multiple_of(2) { 1 } else { op.path.len() - 1 };
            op.path.segments[seg].name.push('S');
        }
        MutationKind::LeafrefOrphan => {
            // dropping the INTERFACE_LIST prerequisite orphans the prefix entry
            for d in &mut cs.0 {
                if let Some(pos) = d
                    .config
                    .iter()
                    .position(|op| op.action == Action::Append && op.path.names().last() == Some("INTERFACE_LIST"))
                {
                    d.config.remove(pos);
                    return Some(cs);
                }
            }
            let op = ops_mut(&mut cs).find(|op| {
                op.action == Action::Append
                    && op
                        .value
                        .keys()
                        .any(|f| matches!(field_type(schema, &op.path, f), Some(TypeSpec::Leafref { .. })))
            })?;
            let f = op
                .value
                .keys()
                .find(|f| matches!(field_type(schema, &op.path, f), Some(TypeSpec::Leafref { .. })))
                .cloned()?;
            let orphan = match &op.value[&f] {
                FieldValue::List(_) => FieldValue::List(vec!["Ethernet999".into()]),
                FieldValue::Scalar(_) if f == "name" => "Ethernet999".into(),
                FieldValue::Scalar(_) => "MISSING_TABLE".into(),
            };
            op.value.insert(f, orphan);
        }
        MutationKind::DuplicateKey => {
            for d in &mut cs.0 {
                let pair = d.config.windows(2).position(|w| {
                    w[0].action == Action::Remove && w[1].action == Action::Append && w[0].path == w[1].path
                });
                if let Some(i) = pair {
                    d.config.remove(i);
                    return Some(cs);
                }
            }
            let d = cs.0.iter_mut().find(|d| d.config.iter().any(|op| op.action == Action::Append))?;
            let i = d.config.iter().position(|op| op.action == Action::Append)?;
            let dup = d.config[i].clone();
            d.config.insert(i + 1, dup);
        }
    }
    (cs != *base).then_some(cs)
}

/// Two mutations per clean case, rotating through the mutation kinds.
pub fn mutation_kit(schema: &ResolvedSchema) -> Vec<Mutation> {
    let mut out = Vec::new();
    for (i, case) in clean_cases().iter().enumerate() {
        let mut taken = Vec::new();
        let mut k = 2 * i;
        while taken.len() < 2 && k < 2 * i + 2 + MutationKind::ALL.len() {
            let kind = MutationKind::ALL[k % MutationKind::ALL.len()];
            k += 1;
            if taken.contains(&kind) {
                continue;
            }
            if let Some(cs) = mutate(schema, &case.change_set, kind, i) {
                taken.push(kind);
                out.push(Mutation {
                    name: format!("{}/{kind}", case.name),
                    kind,
                    base: case.name.clone(),
                    change_set: cs,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct KitOutcome {
    pub name: String,
    pub kind: Option<MutationKind>,
    pub passed: bool,
    pub expected_rule_hit: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KitSummary {
    pub mutations: usize,
    pub detected: usize,
    pub clean: usize,
    pub false_positives: usize,
    pub outcomes: Vec<KitOutcome>,
}

impl KitSummary {
    pub fn detection_rate(&self) -> f64 {
        if self.mutations == 0 {
            1.0
        } else {
            self.detected as f64 / self.mutations as f64
        }
    }
}

/// Runs every clean case and mutation through [`validate_after_apply`].
pub fn run_kit(state: &NetworkState, schema: &ResolvedSchema) -> KitSummary {
    let mut outcomes = Vec::new();
    let clean = clean_cases();
    let mut false_positives = 0;
    for c in &clean {
        let r = validate_after_apply(state, &c.change_set, schema);
        if !r.passed() {
            false_positives += 1;
        }
        outcomes.push(KitOutcome {
            name: c.name.clone(),
            kind: None,
            passed: r.passed(),
            expected_rule_hit: r.passed(),
        });
    }
    let kit = mutation_kit(schema);
    let mut detected = 0;
    for m in &kit {
        let r: VerificationReport = validate_after_apply(state, &m.change_set, schema);
        if !r.passed() {
            detected += 1;
        }
        outcomes.push(KitOutcome {
            name: m.name.clone(),
            kind: Some(m.kind),
            passed: r.passed(),
            expected_rule_hit: m.kind.expected_rules().iter().any(|rule| r.has_rule(*rule)),
        });
    }
    KitSummary {
        mutations: kit.len(),
        detected,
        clean: clean.len(),
        false_positives,
        outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn kit_shape() {
        let schema = fixtures::schema();
        assert_eq!(clean_cases().len(), 20);
        let kit = mutation_kit(&schema);
        assert_eq!(kit.len(), 40);
        for kind in MutationKind::ALL {
            assert!(kit.iter().filter(|m| m.kind == kind).count() >= 6, "{kind}");
        }
    }

    #[test]
    fn every_mutation_is_detected_with_the_expected_rule() {
        let schema = fixtures::schema();
        let summary = run_kit(&fixtures::clos_state(), &schema);
        assert_eq!(summary.false_positives, 0, "{:#?}", summary.outcomes);
        for o in &summary.outcomes {
            assert!(o.expected_rule_hit, "{} not detected as expected", o.name);
        }
        assert_eq!(summary.detected, summary.mutations);
    }
}
