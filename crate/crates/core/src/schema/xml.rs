//! XML form of category templates and field requests.
//!
//! The vocabulary is closed: a `schema` root with `id`, `category`, `creator`
//! (and `version` once a template has evolved past its first revision), and
//! `field` children with `input-type`, `data-type` and
//! `visibility-in-search-filter`. Anything else is rejected rather than
//! ignored.

use std::collections::HashSet;
use std::fmt::Write;

use roxmltree::{Document, Node};

use super::{
    check_category, check_label, CategorySchema, DataType, FieldSpec, InputType, NewFieldRequest,
    SchemaError,
};

const SCHEMA_ATTRS: [&str; 4] = ["id", "category", "creator", "version"];
const FIELD_ATTRS: [&str; 3] = ["input-type", "data-type", "visibility-in-search-filter"];
const REQUEST_ATTRS: [&str; 3] = ["category", "data-type", "creator"];

pub fn parse_schema(xml: &str) -> Result<CategorySchema, SchemaError> {
    let doc = Document::parse(xml).map_err(|e| SchemaError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    expect_element(root, "schema")?;
    check_attributes(root, &SCHEMA_ATTRS)?;

    let schema_id = required(root, "id")?.to_string();
    let category = required(root, "category")?.to_string();
    check_category(&category)?;
    let creator = required(root, "creator")?.to_string();
    let version = match root.attribute("version") {
        None => 1,
        Some(v) => v
            .parse::<u32>()
            .ok()
            .filter(|v| *v >= 1)
            .ok_or_else(|| SchemaError::InvalidAttribute {
                attribute: "version".into(),
                value: v.to_string(),
            })?,
    };

    let mut fields = Vec::new();
    let mut labels = HashSet::new();
    for child in root.children() {
        if child.is_element() {
            expect_element(child, "field")?;
            let field = parse_field(child)?;
            if !labels.insert(field.label.to_lowercase()) {
                return Err(SchemaError::DuplicateFieldLabel(field.label));
            }
            fields.push(field);
        } else if child.is_text() && !child.text().unwrap_or("").trim().is_empty() {
            return Err(SchemaError::MalformedXml("unexpected text inside <schema>".into()));
        }
    }
    if fields.is_empty() {
        return Err(SchemaError::EmptySchema);
    }

    let schema = CategorySchema {
        schema_id,
        category,
        creator,
        version,
        fields,
    };
    schema.check()?;
    Ok(schema)
}

fn parse_field(node: Node<'_, '_>) -> Result<FieldSpec, SchemaError> {
    check_attributes(node, &FIELD_ATTRS)?;
    let input_type = match node.attribute("input-type") {
        Some(v) => v.parse()?,
        None => InputType::default(),
    };
    let data_type = match node.attribute("data-type") {
        Some(v) => v.parse()?,
        None => DataType::default(),
    };
    let visible_in_search_filter = match node.attribute("visibility-in-search-filter") {
        None => false,
        Some("true") => true,
        Some("false") => false,
        Some(other) => {
            return Err(SchemaError::InvalidAttribute {
                attribute: "visibility-in-search-filter".into(),
                value: other.to_string(),
            })
        }
    };
    let label = element_text(node)?;
    check_label(&label)?;
    if visible_in_search_filter && !data_type.filterable() {
        return Err(SchemaError::FilterNotAllowed { label, data_type });
    }
    Ok(FieldSpec {
        label,
        input_type,
        data_type,
        visible_in_search_filter,
    })
}

pub fn parse_field_request(xml: &str) -> Result<NewFieldRequest, SchemaError> {
    let doc = Document::parse(xml).map_err(|e| SchemaError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    expect_element(root, "requestField")?;
    check_attributes(root, &REQUEST_ATTRS)?;
    let request = NewFieldRequest {
        category: required(root, "category")?.to_string(),
        data_type: match root.attribute("data-type") {
            Some(v) => v.parse()?,
            None => DataType::default(),
        },
        creator: required(root, "creator")?.to_string(),
        label: element_text(root)?,
    };
    request.check()?;
    Ok(request)
}

/// Emits the template; attributes are written only where they differ from
/// their defaults.
pub fn serialize_schema(schema: &CategorySchema) -> String {
    let mut out = String::new();
    write!(
        out,
        r#"<schema id="{}" category="{}" creator="{}""#,
        escape_attr(&schema.schema_id),
        escape_attr(&schema.category),
        escape_attr(&schema.creator)
    )
    .unwrap();
    if schema.version != 1 {
        write!(out, r#" version="{}""#, schema.version).unwrap();
    }
    out.push_str(">\n");
    for field in &schema.fields {
        out.push_str("  <field");
        if field.input_type != InputType::default() {
            write!(out, r#" input-type="{}""#, field.input_type.as_str()).unwrap();
        }
        if field.data_type != DataType::default() {
            write!(out, r#" data-type="{}""#, field.data_type.as_str()).unwrap();
        }
        if field.visible_in_search_filter {
            out.push_str(r#" visibility-in-search-filter="true""#);
        }
        writeln!(out, ">{}</field>", escape_text(&field.label)).unwrap();
    }
    out.push_str("</schema>\n");
    out
}

pub fn serialize_field_request(request: &NewFieldRequest) -> String {
    format!(
        "<requestField category=\"{}\" data-type=\"{}\" creator=\"{}\">{}</requestField>\n",
        escape_attr(&request.category),
        request.data_type.as_str(),
        escape_attr(&request.creator),
        escape_text(&request.label)
    )
}

fn expect_element(node: Node<'_, '_>, name: &str) -> Result<(), SchemaError> {
    let tag = node.tag_name();
    if tag.name() != name || tag.namespace().is_some() {
        return Err(SchemaError::UnknownElement(tag.name().to_string()));
    }
    Ok(())
}

fn check_attributes(node: Node<'_, '_>, allowed: &[&str]) -> Result<(), SchemaError> {
    for attr in node.attributes() {
        if attr.namespace().is_some() || !allowed.contains(&attr.name()) {
            return Err(SchemaError::UnknownAttribute {
                element: node.tag_name().name().to_string(),
                attribute: attr.name().to_string(),
            });
        }
    }
    Ok(())
}

fn required<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str, SchemaError> {
    let value = node.attribute(name).ok_or_else(|| SchemaError::MissingAttribute {
        element: node.tag_name().name().to_string(),
        attribute: name.to_string(),
    })?;
    if value.is_empty() || value.trim() != value || value.chars().any(char::is_control) {
        return Err(SchemaError::InvalidAttribute {
            attribute: name.to_string(),
            value: value.to_string(),
        });
    }
    Ok(value)
}

/// Concatenated text content of a leaf element, trimmed. Child elements are
/// not part of the vocabulary.
fn element_text(node: Node<'_, '_>) -> Result<String, SchemaError> {
    let mut text = String::new();
    for child in node.children() {
        if child.is_element() {
            return Err(SchemaError::UnknownElement(child.tag_name().name().to_string()));
        }
        if let Some(t) = child.text() {
            if child.is_text() {
                text.push_str(t);
            }
        }
    }
    Ok(text.trim().to_string())
}

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
    out
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}
