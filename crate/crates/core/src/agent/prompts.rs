//! Prompt templates and their instantiation. Placeholders are `{name}`;
//! every other brace in a template is literal.

use std::collections::BTreeMap;

use regex::{Captures, Regex};
use std::sync::LazyLock;
use thiserror::Error;

pub const GENERATION_SYSTEM: &str = include_str!("../../prompts/generation_system.txt");
pub const GENERATION_USER: &str = include_str!("../../prompts/generation_user.txt");
pub const REPAIR_SYSTEM: &str = include_str!("../../prompts/repair_system.txt");
pub const REPAIR_USER: &str = include_str!("../../prompts/repair_user.txt");
pub const PLAN_SYSTEM: &str = include_str!("../../prompts/plan_system.txt");
pub const PLAN_USER: &str = include_str!("../../prompts/plan_user.txt");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("no content for the {0} placeholder")]
    MissingPlaceholderContent(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_]+)\}").expect("placeholder regex"));

/// Single-pass substitution, so values containing `{name}` are left alone.
pub fn render(template: &str, values: &BTreeMap<&str, &str>) -> String {
    PLACEHOLDER
        .replace_all(template, |c: &Captures| match values.get(&c[1]) {
            Some(v) => (*v).to_string(),
            None => c[0].to_string(),
        })
        .into_owned()
}

fn count_word(n: usize) -> String {
    const WORDS: [&str; 13] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    ];
    WORDS.get(n).map_or_else(|| n.to_string(), |w| (*w).to_string())
}

/// `S0', `S1', ... in the quoting style of the templates.
fn quoted_names(devices: &[String]) -> String {
    devices.iter().map(|d| format!("`{d}'")).collect::<Vec<_>>().join(", ")
}

fn require<'a>(name: &'static str, value: &'a str) -> Result<&'a str, PromptError> {
    if value.trim().is_empty() {
        Err(PromptError::MissingPlaceholderContent(name))
    } else {
        Ok(value)
    }
}

/// Spines (names starting with `S`) first, then the rest, each sorted.
pub fn prompt_device_order<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<String> = names.into_iter().map(str::to_string).collect();
    v.sort_by(|a, b| (!a.starts_with('S'), a).cmp(&(!b.starts_with('S'), b)));
    v
}

fn device_header(devices: &[String]) -> (String, String) {
    (count_word(devices.len()), quoted_names(devices))
}

#[derive(Debug, Clone, Copy)]
pub struct GenerationContext<'a> {
    pub devices: &'a [String],
    pub network_state: &'a str,
    pub yang_modules: &'a str,
    pub user_request: &'a str,
}

pub fn build_generation_prompt(ctx: GenerationContext<'_>) -> Result<Prompt, PromptError> {
    let state = require("network state", ctx.network_state)?;
    let yang = require("YANG modules", ctx.yang_modules)?;
    let request = require("user request", ctx.user_request)?;
    let (count, names) = device_header(ctx.devices);
    let system = render(
        GENERATION_SYSTEM,
        &BTreeMap::from([("device_count", count.as_str()), ("device_names", names.as_str())]),
    );
    let user = render(
        GENERATION_USER,
        &BTreeMap::from([("network_state", state), ("yang_modules", yang), ("user_request", request)]),
    );
    Ok(Prompt { system, user })
}

#[derive(Debug, Clone, Copy)]
pub struct RepairContext<'a> {
    pub faulty_config: &'a str,
    pub error_logs: &'a str,
    pub retrieved_modules: &'a str,
}

pub fn build_repair_prompt(ctx: RepairContext<'_>) -> Result<Prompt, PromptError> {
    let faulty = require("faulty configuration", ctx.faulty_config)?;
    let errors = require("error logs", ctx.error_logs)?;
    let modules = require("retrieved modules", ctx.retrieved_modules)?;
    let user = render(
        REPAIR_USER,
        &BTreeMap::from([("faulty_config", faulty), ("error_logs", errors), ("retrieved_modules", modules)]),
    );
    Ok(Prompt {
        system: REPAIR_SYSTEM.to_string(),
        user,
    })
}

pub fn build_plan_prompt(devices: &[String], network_state: &str, user_request: &str) -> Result<Prompt, PromptError> {
    let state = require("network state", network_state)?;
    let request = require("user request", user_request)?;
    let (count, names) = device_header(devices);
    Ok(Prompt {
        system: render(
            PLAN_SYSTEM,
            &BTreeMap::from([("device_count", count.as_str()), ("device_names", names.as_str())]),
        ),
        user: render(PLAN_USER, &BTreeMap::from([("network_state", state), ("user_request", request)])),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn clos_devices() -> Vec<String> {
        prompt_device_order(fixtures::CLOS_DEVICES.iter().copied())
    }

    #[test]
    fn clos_generation_prompt_names_the_devices() {
        let devices = clos_devices();
        let p = build_generation_prompt(GenerationContext {
            devices: &devices,
            network_state: "Spine0 (S0)",
            yang_modules: "container sonic-port {}",
            user_request: fixtures::CONNECT_ETHERNET4_QUERY,
        })
        .unwrap();
        assert!(p
            .system
            .contains("four devices in a 3-stage clos network, named `S0', `S1', `L0', `L1'"));
        assert!(!p.system.contains("{device_"));
        // JSON braces in the exemplar survive rendering
        assert!(p.system.contains("\"value\": {\"name\": \"Ethernet8\", \"ip-prefix\": \"10.0.5.1/24\"}"));
        assert_eq!(
            p.user,
            format!(
                "Here is information about the current network state: Spine0 (S0)\n\nHere are the YANG modules that are relevant for this configuration:\ncontainer sonic-port {{}}\n\nNatural language query: {}\n\nConfiguration:\n",
                fixtures::CONNECT_ETHERNET4_QUERY
            )
        );
    }

    #[test]
    fn empty_placeholders_are_rejected() {
        let devices = clos_devices();
        let err = build_generation_prompt(GenerationContext {
            devices: &devices,
            network_state: "x",
            yang_modules: " \n",
            user_request: "q",
        })
        .unwrap_err();
        assert_eq!(err, PromptError::MissingPlaceholderContent("YANG modules"));
        assert!(build_repair_prompt(RepairContext {
            faulty_config: "[]",
            error_logs: "",
            retrieved_modules: "m",
        })
        .is_err());
    }

    #[test]
    fn repair_prompt_carries_the_error_log_verbatim() {
        let log = "Must condition (current() = ../../INTERFACE_LIST[name=current()]/name) not satisfied (device L0; rule must-violation)\n";
        let p = build_repair_prompt(RepairContext {
            faulty_config: "[{\"device\": \"L0\"}]",
            error_logs: log,
            retrieved_modules: "list INTERFACE_LIST {}",
        })
        .unwrap();
        assert!(p.user.contains(log));
        assert!(p.system.ends_with("```python\n[   <configuration>   ]\n'''\n"));
        assert!(p.user.starts_with("Faulty YANG configuration: [{\"device\": \"L0\"}]\n\nError logs: "));
    }

    #[test]
    fn substitution_is_single_pass() {
        let out = render("{a} {b}", &BTreeMap::from([("a", "{b}"), ("b", "x")]));
        assert_eq!(out, "{b} x");
    }

    #[test]
    fn device_order_puts_spines_first() {
        assert_eq!(clos_devices(), ["S0", "S1", "L0", "L1"]);
        assert_eq!(count_word(4), "four");
        assert_eq!(count_word(20), "20");
    }
}
