//! Category templates.
//!
//! Every listing category is described by an XML template: an ordered list of
//! typed fields, some of which double as search filters. Templates evolve by
//! appending fields through administrator-approved requests; evolution never
//! mutates an existing [`CategorySchema`] value, it produces the next version.

mod registry;
mod values;
mod xml;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::RequestId;

pub use registry::{SchemaEntry, SchemaRegistry};
pub use values::{
    parse_currency, parse_date_time, parse_number, validate_values, FieldCheck, FieldReport,
    FieldValue, Money, ValidationReport,
};
pub use xml::{parse_field_request, parse_schema, serialize_field_request, serialize_schema};

/// Label of the field every category must carry.
pub const TITLE_LABEL: &str = "Title";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("unexpected element <{0}>")]
    UnknownElement(String),
    #[error("unknown attribute `{attribute}` on <{element}>")]
    UnknownAttribute { element: String, attribute: String },
    #[error("missing attribute `{attribute}` on <{element}>")]
    MissingAttribute { element: String, attribute: String },
    #[error("invalid value {value:?} for attribute `{attribute}`")]
    InvalidAttribute { attribute: String, value: String },
    #[error("duplicate field label {0:?}")]
    DuplicateFieldLabel(String),
    #[error("schema has no fields")]
    EmptySchema,
    #[error("unknown data type {0:?}")]
    UnknownDataType(String),
    #[error("unknown input type {0:?}")]
    UnknownInputType(String),
    #[error("invalid field label {0:?}")]
    InvalidLabel(String),
    #[error("field {label:?} of type {data_type} cannot be a search filter")]
    FilterNotAllowed { label: String, data_type: DataType },
    #[error("request targets category {request:?} but schema is {schema:?}")]
    CategoryMismatch { schema: String, request: String },
    #[error("request {0} is not pending")]
    RequestNotPending(RequestId),
    #[error("unknown request id {0}")]
    UnknownRequestId(RequestId),
    #[error("no approved schema for category {0:?}")]
    SchemaNotFound(String),
    #[error("category {0:?} is already defined")]
    DuplicateCategory(String),
}

impl SchemaError {
    pub fn code(&self) -> &'static str {
        match self {
            SchemaError::MalformedXml(_) => "MalformedXml",
            SchemaError::UnknownElement(_) => "UnknownElement",
            SchemaError::UnknownAttribute { .. } => "UnknownAttribute",
            SchemaError::MissingAttribute { .. } => "MissingAttribute",
            SchemaError::InvalidAttribute { .. } => "InvalidAttribute",
            SchemaError::DuplicateFieldLabel(_) => "DuplicateFieldLabel",
            SchemaError::EmptySchema => "EmptySchema",
            SchemaError::UnknownDataType(_) => "UnknownDataType",
            SchemaError::UnknownInputType(_) => "UnknownInputType",
            SchemaError::InvalidLabel(_) => "InvalidLabel",
            SchemaError::FilterNotAllowed { .. } => "FilterNotAllowed",
            SchemaError::CategoryMismatch { .. } => "CategoryMismatch",
            SchemaError::RequestNotPending(_) => "RequestNotPending",
            SchemaError::UnknownRequestId(_) => "UnknownRequestId",
            SchemaError::SchemaNotFound(_) => "SchemaNotFound",
            SchemaError::DuplicateCategory(_) => "DuplicateCategory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputType {
    #[default]
    Textbox,
    Textarea,
    Select,
    Checkbox,
}

impl InputType {
    pub const ALL: [InputType; 4] = [
        InputType::Textbox,
        InputType::Textarea,
        InputType::Select,
        InputType::Checkbox,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputType::Textbox => "textbox",
            InputType::Textarea => "textarea",
            InputType::Select => "select",
            InputType::Checkbox => "checkbox",
        }
    }
}

impl FromStr for InputType {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InputType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| SchemaError::UnknownInputType(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataType {
    #[default]
    Text,
    DateTime,
    Currency,
    Number,
    Location,
    Url,
}

impl DataType {
    pub const ALL: [DataType; 6] = [
        DataType::Text,
        DataType::DateTime,
        DataType::Currency,
        DataType::Number,
        DataType::Location,
        DataType::Url,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Text => "text",
            DataType::DateTime => "date-time",
            DataType::Currency => "currency",
            DataType::Number => "number",
            DataType::Location => "location",
            DataType::Url => "url",
        }
    }

    /// Whether fields of this type may be exposed as search filters.
    pub fn filterable(self) -> bool {
        matches!(
            self,
            DataType::Text | DataType::Currency | DataType::Number | DataType::DateTime
        )
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataType {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DataType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| SchemaError::UnknownDataType(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub label: String,
    #[serde(default)]
    pub input_type: InputType,
    pub data_type: DataType,
    #[serde(default)]
    pub visible_in_search_filter: bool,
}

impl FieldSpec {
    pub fn new(label: impl Into<String>, data_type: DataType) -> Self {
        FieldSpec {
            label: label.into(),
            input_type: InputType::Textbox,
            data_type,
            visible_in_search_filter: false,
        }
    }

    pub fn filterable(mut self) -> Self {
        self.visible_in_search_filter = true;
        self
    }

    pub fn with_input(mut self, input_type: InputType) -> Self {
        self.input_type = input_type;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorySchema {
    pub schema_id: String,
    pub category: String,
    pub creator: String,
    pub version: u32,
    pub fields: Vec<FieldSpec>,
}

impl CategorySchema {
    /// Case-insensitive label lookup.
    pub fn field(&self, label: &str) -> Option<&FieldSpec> {
        self.fields
            .iter()
            .find(|f| f.label.to_lowercase() == label.to_lowercase())
    }

    /// Checks every structural invariant a schema value must satisfy.
    pub fn check(&self) -> Result<(), SchemaError> {
        check_token("id", &self.schema_id)?;
        check_category(&self.category)?;
        check_token("creator", &self.creator)?;
        if self.version == 0 {
            return Err(SchemaError::InvalidAttribute {
                attribute: "version".into(),
                value: "0".into(),
            });
        }
        if self.fields.is_empty() {
            return Err(SchemaError::EmptySchema);
        }
        let mut seen = std::collections::HashSet::new();
        for field in &self.fields {
            check_label(&field.label)?;
            if !seen.insert(field.label.to_lowercase()) {
                return Err(SchemaError::DuplicateFieldLabel(field.label.clone()));
            }
            if field.visible_in_search_filter && !field.data_type.filterable() {
                return Err(SchemaError::FilterNotAllowed {
                    label: field.label.clone(),
                    data_type: field.data_type,
                });
            }
        }
        Ok(())
    }
}

/// The fields shown as search filters, in schema order.
pub fn derive_filter_spec(schema: &CategorySchema) -> Vec<FieldSpec> {
    schema
        .fields
        .iter()
        .filter(|f| f.visible_in_search_filter)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestStatus {
    Pending,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Approve,
    Reject,
}

/// A proposed field before it has been filed with the registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewFieldRequest {
    pub category: String,
    pub label: String,
    pub data_type: DataType,
    pub creator: String,
}

impl NewFieldRequest {
    pub fn check(&self) -> Result<(), SchemaError> {
        check_category(&self.category)?;
        check_label(&self.label)?;
        check_token("creator", &self.creator)
    }

    pub fn into_request(self, id: RequestId) -> FieldRequest {
        FieldRequest {
            id,
            category: self.category,
            label: self.label,
            data_type: self.data_type,
            creator: self.creator,
            status: RequestStatus::Pending,
            rejection_reason: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldRequest {
    pub id: RequestId,
    pub category: String,
    pub label: String,
    pub data_type: DataType,
    pub creator: String,
    pub status: RequestStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection_reason: Option<String>,
}

/// Decides a pending field request against `schema`.
///
/// Approval returns the next schema version with the field appended; rejection
/// returns an identical copy of `schema`. The input is never modified.
pub fn apply_field_request(
    schema: &CategorySchema,
    request: &FieldRequest,
    decision: Decision,
) -> Result<(CategorySchema, FieldRequest), SchemaError> {
    if request.status != RequestStatus::Pending {
        return Err(SchemaError::RequestNotPending(request.id));
    }
    if request.category != schema.category {
        return Err(SchemaError::CategoryMismatch {
            schema: schema.category.clone(),
            request: request.category.clone(),
        });
    }

    let mut decided = request.clone();
    match decision {
        Decision::Reject => {
            decided.status = RequestStatus::Rejected;
            Ok((schema.clone(), decided))
        }
        Decision::Approve => {
            check_label(&request.label)?;
            if schema.field(&request.label).is_some() {
                return Err(SchemaError::DuplicateFieldLabel(request.label.clone()));
            }
            let mut next = schema.clone();
            next.fields.push(FieldSpec::new(request.label.clone(), request.data_type));
            next.version += 1;
            decided.status = RequestStatus::Approved;
            Ok((next, decided))
        }
    }
}

pub(crate) fn check_label(label: &str) -> Result<(), SchemaError> {
    let ok = !label.is_empty()
        && label.trim() == label
        && label.chars().count() <= 64
        && !label.chars().any(char::is_control);
    if ok {
        Ok(())
    } else {
        Err(SchemaError::InvalidLabel(label.to_string()))
    }
}

pub(crate) fn check_category(category: &str) -> Result<(), SchemaError> {
    let ok = !category.is_empty()
        && category.len() <= 64
        && category
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(SchemaError::InvalidAttribute {
            attribute: "category".into(),
            value: category.to_string(),
        })
    }
}

fn check_token(attribute: &str, value: &str) -> Result<(), SchemaError> {
    if value.is_empty() || value.trim() != value || value.chars().any(char::is_control) {
        return Err(SchemaError::InvalidAttribute {
            attribute: attribute.to_string(),
            value: value.to_string(),
        });
    }
    Ok(())
}
