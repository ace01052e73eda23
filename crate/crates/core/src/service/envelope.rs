use std::collections::BTreeMap;
use std::fmt::Write;

use super::ServiceError;
use crate::xml::{cdata, escape_attr, escape_text, node_text};

pub const ENVELOPE_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub version: String,
    pub metadata: BTreeMap<String, String>,
    pub payload_format: String,
    pub payload: String,
}

/// `<cordiet version>` document wrapping a payload and its metadata.
pub fn render_envelope(metadata: &BTreeMap<String, String>, payload_format: &str, payload: &str) -> String {
    let mut out = format!("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<cordiet version=\"{ENVELOPE_VERSION}\">\n  <metadata>\n");
    for (k, v) in metadata {
        let _ = writeln!(out, "    <entry key=\"{}\">{}</entry>", escape_attr(k), escape_text(v));
    }
    let _ = writeln!(
        out,
        "  </metadata>\n  <payload format=\"{}\">{}</payload>\n</cordiet>",
        escape_attr(payload_format),
        cdata(payload)
    );
    out
}

pub fn parse_envelope(xml: &str) -> Result<Envelope, ServiceError> {
    let bad = |m: String| ServiceError::BadRequest(format!("envelope: {m}"));
    let doc = roxmltree::Document::parse(xml).map_err(|e| bad(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "cordiet" {
        return Err(bad(format!("root is <{}>", root.tag_name().name())));
    }
    let version = root.attribute("version").ok_or_else(|| bad("missing version".into()))?.to_string();
    let mut metadata = BTreeMap::new();
    let mut payload = None;
    for child in root.children().filter(|n| n.is_element()) {
        match child.tag_name().name() {
            "metadata" => {
                for e in child.children().filter(|n| n.is_element()) {
                    let key = e.attribute("key").ok_or_else(|| bad("entry without key".into()))?;
                    metadata.insert(key.to_string(), node_text(e));
                }
            }
            "payload" => {
                let format = child.attribute("format").unwrap_or("json").to_string();
                payload = Some((format, node_text(child)));
            }
            other => return Err(bad(format!("unexpected <{other}>"))),
        }
    }
    let (payload_format, payload) = payload.ok_or_else(|| bad("missing payload".into()))?;
    Ok(Envelope {
        version,
        metadata,
        payload_format,
        payload,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_awkward_payload() {
        let mut meta = BTreeMap::new();
        meta.insert("artifact".to_string(), "a<&>\"b".to_string());
        let payload = "{\"x\": \"]]> and <tags>\"}\n";
        let xml = render_envelope(&meta, "json", payload);
        let env = parse_envelope(&xml).unwrap();
        assert_eq!(env.version, ENVELOPE_VERSION);
        assert_eq!(env.metadata, meta);
        assert_eq!(env.payload, payload);
        assert!(parse_envelope("<other/>").is_err());
    }
}
