use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    apply_field_request, parse_schema, CategorySchema, DataType, Decision, FieldRequest, FieldSpec,
    NewFieldRequest, RequestStatus, SchemaError, TITLE_LABEL,
};
use crate::ids::{IdSequence, RequestId};

#[derive(Debug, Error)]
#[error("failed to load schema {path}: {reason}")]
pub struct SchemaLoadError {
    pub path: PathBuf,
    pub reason: String,
}

/// One category: its current template plus every earlier version.
///
/// Categories proposed by users start unapproved with a lone `Title` field and
/// become searchable once their first field request is approved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub current: CategorySchema,
    #[serde(default)]
    pub history: Vec<CategorySchema>,
    pub approved: bool,
}

impl SchemaEntry {
    pub fn version(&self, version: u32) -> Option<&CategorySchema> {
        if self.current.version == version {
            return Some(&self.current);
        }
        self.history.iter().find(|s| s.version == version)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SchemaRegistry {
    entries: BTreeMap<String, SchemaEntry>,
    requests: BTreeMap<RequestId, FieldRequest>,
    request_ids: IdSequence,
}

impl SchemaRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `*.xml` file in `dir`, one category per file.
    pub fn load_dir(dir: &Path) -> Result<Self, SchemaLoadError> {
        let mut registry = SchemaRegistry::new();
        let read = fs::read_dir(dir).map_err(|e| SchemaLoadError {
            path: dir.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut paths: Vec<PathBuf> = read
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "xml"))
            .collect();
        paths.sort();
        for path in paths {
            let fail = |reason: String| SchemaLoadError {
                path: path.clone(),
                reason,
            };
            let text = fs::read_to_string(&path).map_err(|e| fail(e.to_string()))?;
            let schema = parse_schema(&text).map_err(|e| fail(e.to_string()))?;
            registry.insert(schema).map_err(|e| fail(e.to_string()))?;
        }
        Ok(registry)
    }

    /// Adds an approved template for a new category.
    pub fn insert(&mut self, schema: CategorySchema) -> Result<(), SchemaError> {
        schema.check()?;
        if self.entries.contains_key(&schema.category) {
            return Err(SchemaError::DuplicateCategory(schema.category));
        }
        self.entries.insert(
            schema.category.clone(),
            SchemaEntry {
                current: schema,
                history: Vec::new(),
                approved: true,
            },
        );
        Ok(())
    }

    /// Current template of an approved category.
    pub fn approved(&self, category: &str) -> Option<&CategorySchema> {
        self.entries
            .get(category)
            .filter(|e| e.approved)
            .map(|e| &e.current)
    }

    pub fn entry(&self, category: &str) -> Option<&SchemaEntry> {
        self.entries.get(category)
    }

    pub fn approved_schemas(&self) -> impl Iterator<Item = &CategorySchema> {
        self.entries.values().filter(|e| e.approved).map(|e| &e.current)
    }

    pub fn entries(&self) -> impl Iterator<Item = &SchemaEntry> {
        self.entries.values()
    }

    pub fn requests(&self) -> impl Iterator<Item = &FieldRequest> {
        self.requests.values()
    }

    pub fn request(&self, id: RequestId) -> Option<&FieldRequest> {
        self.requests.get(&id)
    }

    /// Files a field request. A request naming an unknown category opens a
    /// pending category seeded with the mandatory title field.
    ///
    /// Returns the filed request and, when a category was opened, its entry.
    pub fn submit(
        &mut self,
        new: NewFieldRequest,
    ) -> Result<(FieldRequest, Option<SchemaEntry>), SchemaError> {
        new.check()?;
        if let Some(entry) = self.entries.get(&new.category) {
            if entry.current.field(&new.label).is_some() {
                return Err(SchemaError::DuplicateFieldLabel(new.label));
            }
        }
        let id = RequestId(self.request_ids.next());
        let opened = if self.entries.contains_key(&new.category) {
            None
        } else {
            let entry = SchemaEntry {
                current: CategorySchema {
                    schema_id: format!("R{id}"),
                    category: new.category.clone(),
                    creator: new.creator.clone(),
                    version: 1,
                    fields: vec![FieldSpec::new(TITLE_LABEL, DataType::Text).filterable()],
                },
                history: Vec::new(),
                approved: false,
            };
            self.entries.insert(new.category.clone(), entry.clone());
            Some(entry)
        };
        let request = new.into_request(id);
        self.requests.insert(id, request.clone());
        Ok((request, opened))
    }

    /// Approves or rejects a pending request.
    ///
    /// A request whose label already exists is rejected automatically; the
    /// rejection is recorded and the error returned.
    pub fn decide(
        &mut self,
        id: RequestId,
        decision: Decision,
    ) -> Result<(FieldRequest, SchemaEntry), SchemaError> {
        let request = self.requests.get(&id).ok_or(SchemaError::UnknownRequestId(id))?;
        if request.status != RequestStatus::Pending {
            return Err(SchemaError::RequestNotPending(id));
        }
        let entry = self
            .entries
            .get_mut(&request.category)
            .ok_or_else(|| SchemaError::SchemaNotFound(request.category.clone()))?;

        match apply_field_request(&entry.current, request, decision) {
            Ok((next, decided)) => {
                if decided.status == RequestStatus::Approved {
                    let previous = std::mem::replace(&mut entry.current, next);
                    entry.history.push(previous);
                    entry.approved = true;
                }
                self.requests.insert(id, decided.clone());
                Ok((decided, entry.clone()))
            }
            Err(err @ SchemaError::DuplicateFieldLabel(_)) => {
                let request = self.requests.get_mut(&id).unwrap();
                request.status = RequestStatus::Rejected;
                request.rejection_reason = Some(err.to_string());
                Err(err)
            }
            Err(err) => Err(err),
        }
    }

    pub(crate) fn restore_entry(&mut self, entry: SchemaEntry) {
        self.entries.insert(entry.current.category.clone(), entry);
    }

    pub(crate) fn restore_request(&mut self, request: FieldRequest) {
        self.request_ids.observe(request.id.0);
        self.requests.insert(request.id, request);
    }
}
