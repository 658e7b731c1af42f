//! Two retrieval stores: rendered network state and IR documentation.

mod embed;

use std::cmp::Ordering;
use std::io::{BufRead, Write};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{canonical, node_to_yang, SchemaModule, SchemaNode};
use crate::state::{render_table_nl, render_table_raw, NetworkState};
use crate::schema::ResolvedSchema;

pub use embed::{EmbeddingBackend, EmbeddingVector, HashingEmbedder, HttpEmbedder};

pub const DEFAULT_K: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MemoryError {
    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("the {0} store is empty")]
    EmptyStore(StoreKind),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("embedding dimension {got} does not match store dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("store dump: {0}")]
    Dump(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoreKind {
    State,
    IrDoc,
}

impl std::fmt::Display for StoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StoreKind::State => "state",
            StoreKind::IrDoc => "ir-doc",
        })
    }
}

/// State rendering: natural-language sentences or config-DB JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Nl,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub store: StoreKind,
    /// Set for state documents only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub text: String,
    pub source: String,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalHit {
    pub document: Document,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub revision: u64,
    pub state_documents: usize,
    pub ir_documents: usize,
    /// True when the state was older than what the store already holds.
    pub stale: bool,
}

#[derive(Debug, Default)]
struct Snapshot {
    revision: Option<u64>,
    entries: Vec<(Document, EmbeddingVector)>,
}

/// Builds the state documents: one per (device, table) and mode.
pub fn state_documents(state: &NetworkState, schema: &ResolvedSchema) -> Vec<Document> {
    let mut docs = Vec::new();
    for device in state.devices.values() {
        for (root, table) in device.tables() {
            let source = format!("{}:{}", device.device_name, canonical_table(schema, &root, &table));
            docs.push(Document {
                doc_id: format!("state/nl/{}/{table}", device.device_name),
                store: StoreKind::State,
                mode: Some(Mode::Nl),
                text: render_table_nl(device, &root, &table),
                source: source.clone(),
                revision: state.revision,
            });
            docs.push(Document {
                doc_id: format!("state/raw/{}/{table}", device.device_name),
                store: StoreKind::State,
                mode: Some(Mode::Raw),
                text: render_table_raw(device, &table, schema),
                source,
                revision: state.revision,
            });
        }
    }
    docs
}

fn canonical_table(schema: &ResolvedSchema, root: &str, table: &str) -> String {
    match schema.table(table) {
        Some(t) if t.root.name == root => t.path().to_string(),
        _ => format!("/{root}/{table}"),
    }
}

/// Builds the IR documents: every schema subtree rooted at depth 0 (module
/// root container), 1 (table) or 2 (list or container in a table), printed as
/// YANG with its descriptions.
pub fn ir_documents(modules: &[SchemaModule], revision: u64) -> Vec<Document> {
    fn visit(module: &SchemaModule, node: &SchemaNode, names: &mut Vec<String>, revision: u64, out: &mut Vec<Document>) {
        if node.kind.is_data_leaf() {
            return;
        }
        names.push(node.name.clone());
        let path = canonical(&module.name, names.iter().map(String::as_str));
        out.push(Document {
            doc_id: format!("ir/{}{}", module.name, names.iter().fold(String::new(), |acc, n| acc + "/" + n)),
            store: StoreKind::IrDoc,
            mode: None,
            text: node_to_yang(node, 0),
            source: format!("{}:{path}", module.name),
            revision,
        });
        if names.len() < 3 {
            for c in &node.children {
                visit(module, c, names, revision, out);
            }
        }
        names.pop();
    }
    let mut out = Vec::new();
    for m in modules {
        for root in &m.root_nodes {
            visit(m, root, &mut Vec::new(), revision, &mut out);
        }
    }
    out
}

/// Embedded documents behind an atomically swapped snapshot. Queries run
/// against whichever snapshot was current when they started.
pub struct MemoryStore {
    backend: Arc<dyn EmbeddingBackend>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl MemoryStore {
    pub fn new(backend: Arc<dyn EmbeddingBackend>) -> Self {
        Self {
            backend,
            snapshot: RwLock::new(Arc::new(Snapshot::default())),
        }
    }

    pub fn offline() -> Self {
        Self::new(Arc::new(HashingEmbedder::default()))
    }

    pub fn backend(&self) -> &dyn EmbeddingBackend {
        self.backend.as_ref()
    }

    fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("store lock").clone()
    }

    pub fn revision(&self) -> Option<u64> {
        self.current().revision
    }

    pub fn documents(&self) -> Vec<Document> {
        self.current().entries.iter().map(|(d, _)| d.clone()).collect()
    }

    /// Re-renders and re-embeds everything for `state`. A state older than
    /// the stored revision is ignored.
    pub fn chunk_and_ingest(
        &self,
        state: &NetworkState,
        schema: &ResolvedSchema,
        schema_docs: &[SchemaModule],
    ) -> Result<IngestStats, MemoryError> {
        let held = self.current();
        if held.revision.is_some_and(|r| r > state.revision) {
            let count = |k| held.entries.iter().filter(|(d, _)| d.store == k).count();
            return Ok(IngestStats {
                revision: held.revision.unwrap_or(0),
                state_documents: count(StoreKind::State),
                ir_documents: count(StoreKind::IrDoc),
                stale: true,
            });
        }
        let mut docs = state_documents(state, schema);
        let state_count = docs.len();
        docs.extend(ir_documents(schema_docs, state.revision));
        let ir_count = docs.len() - state_count;
        let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
        let vectors = if texts.is_empty() {
            Vec::new()
        } else {
            self.backend.embed_batch(&texts)?
        };
        if let Some(first) = vectors.first() {
            if let Some(bad) = vectors.iter().find(|v| v.dim() != first.dim()) {
                return Err(MemoryError::DimensionMismatch {
                    expected: first.dim(),
                    got: bad.dim(),
                });
            }
        }
        let next = Snapshot {
            revision: Some(state.revision),
            entries: docs.into_iter().zip(vectors).collect(),
        };
        *self.snapshot.write().expect("store lock") = Arc::new(next);
        Ok(IngestStats {
            revision: state.revision,
            state_documents: state_count,
            ir_documents: ir_count,
            stale: false,
        })
    }

    /// Exhaustive cosine search. `mode` selects the state rendering and is
    /// ignored for the IR store.
    pub fn query_top_k(&self, query: &str, store: StoreKind, k: usize, mode: Mode) -> Result<Vec<RetrievalHit>, MemoryError> {
        if k == 0 {
            return Err(MemoryError::InvalidK);
        }
        let snap = self.current();
        let candidates: Vec<&(Document, EmbeddingVector)> = snap
            .entries
            .iter()
            .filter(|(d, _)| d.store == store && (store == StoreKind::IrDoc || d.mode == Some(mode)))
            .collect();
        if candidates.is_empty() {
            return Err(MemoryError::EmptyStore(store));
        }
        let q = self.backend.embed(query)?;
        let dim = candidates[0].1.dim();
        if q.dim() != dim {
            return Err(MemoryError::DimensionMismatch { expected: dim, got: q.dim() });
        }
        let mut scored: Vec<(f64, &Document)> = candidates.iter().map(|(d, v)| (q.cosine(v), d)).collect();
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.1.doc_id.cmp(&b.1.doc_id))
        });
        Ok(scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (score, d))| RetrievalHit {
                document: d.clone(),
                score,
                rank: i + 1,
            })
            .collect())
    }

    /// Writes one `{"document", "vector"}` object per line.
    pub fn dump_jsonl(&self, out: &mut impl Write) -> Result<(), MemoryError> {
        #[derive(Serialize)]
        struct Line<'a> {
            document: &'a Document,
            vector: &'a EmbeddingVector,
        }
        for (d, v) in &self.current().entries {
            let line = serde_json::to_string(&Line { document: d, vector: v }).map_err(|e| MemoryError::Dump(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| MemoryError::Dump(e.to_string()))?;
        }
        Ok(())
    }

    /// Replaces the store contents with a dump; the revision becomes the
    /// highest one found.
    pub fn load_jsonl(&self, input: impl BufRead) -> Result<usize, MemoryError> {
        #[derive(Deserialize)]
        struct Line {
            document: Document,
            vector: EmbeddingVector,
        }
        let mut entries = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| MemoryError::Dump(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let l: Line = serde_json::from_str(&line).map_err(|e| MemoryError::Dump(format!("line {}: {e}", i + 1)))?;
            entries.push((l.document, l.vector));
        }
        let revision = entries.iter().map(|(d, _)| d.revision).max();
        let n = entries.len();
        *self.snapshot.write().expect("store lock") = Arc::new(Snapshot { revision, entries });
        Ok(n)
    }
}
