//! TEI XML parsing for GROBID output.
//!
//! Consumes the TEI dialect GROBID emits for scientific PDFs: body `<div>`
//! elements become sections, `<head>` the section heading, `<p>` the
//! paragraphs. Figures, tables, formulas, notes, and inline references are
//! dropped rather than linearized.

use quick_xml::events::Event;
use quick_xml::Reader;

use super::{CorpusError, Document, Paragraph, Section};
use crate::util::normalize_ws;

/// Elements whose entire content is skipped.
const SKIPPED: &[&[u8]] = &[b"figure", b"table", b"formula", b"ref", b"note", b"graphic"];

/// Parse GROBID-style TEI XML into a [`Document`].
///
/// The paper id is taken from the first `<idno>` in the TEI header, falling
/// back to a slug of the title. Callers that know a better id (e.g. the file
/// stem) should overwrite `paper_id` afterwards.
pub fn parse_tei(raw: &[u8]) -> Result<Document, CorpusError> {
    let text = std::str::from_utf8(raw)
        .map_err(|e| CorpusError::MalformedInput(format!("invalid UTF-8: {e}")))?;
    let mut reader = Reader::from_str(text);
    reader.config_mut().expand_empty_elements = true;

    let mut title = String::new();
    let mut idno = String::new();
    let mut sections: Vec<Section> = Vec::new();

    let mut in_header = false;
    let mut in_body = false;
    let mut depth = 0usize;
    let mut skip_depth = 0usize;
    // Text sink while inside the header: 0 = none, 1 = title, 2 = idno.
    let mut header_sink = 0u8;
    let mut current_heading: Option<String> = None;
    let mut para_buf: Option<String> = None;

    loop {
        match reader.read_event() {
            Err(e) => return Err(CorpusError::MalformedInput(e.to_string())),
            Ok(Event::Eof) => {
                if depth != 0 {
                    return Err(CorpusError::MalformedInput(format!(
                        "unexpected end of input with {depth} unclosed element(s)"
                    )));
                }
                break;
            }
            Ok(Event::Start(e)) => {
                depth += 1;
                let name = e.local_name();
                let name = name.as_ref();
                if skip_depth > 0 {
                    skip_depth += 1;
                    continue;
                }
                match name {
                    b"teiHeader" => in_header = true,
                    b"body" => in_body = true,
                    b"title" if in_header && title.is_empty() => header_sink = 1,
                    b"idno" if in_header && idno.is_empty() => header_sink = 2,
                    _ if SKIPPED.contains(&name) => skip_depth = 1,
                    b"div" if in_body => {
                        sections.push(Section {
                            heading: String::new(),
                            paragraphs: Vec::new(),
                        });
                    }
                    b"head" if in_body && !sections.is_empty() => {
                        current_heading = Some(String::new());
                    }
                    b"p" if in_body => {
                        if sections.is_empty() {
                            // Paragraph outside any div: open an implicit
                            // unheaded section.
                            sections.push(Section {
                                heading: String::new(),
                                paragraphs: Vec::new(),
                            });
                        }
                        para_buf = Some(String::new());
                    }
                    _ => {}
                }
            }
            Ok(Event::End(e)) => {
                depth = depth.saturating_sub(1);
                let name = e.local_name();
                let name = name.as_ref();
                if skip_depth > 0 {
                    skip_depth -= 1;
                    continue;
                }
                match name {
                    b"teiHeader" => {
                        in_header = false;
                        header_sink = 0;
                    }
                    b"body" => in_body = false,
                    b"title" | b"idno" if in_header => header_sink = 0,
                    b"head" if in_body => {
                        if let (Some(h), Some(section)) =
                            (current_heading.take(), sections.last_mut())
                        {
                            if section.heading.is_empty() {
                                section.heading = normalize_ws(&h);
                            }
                        }
                    }
                    b"p" if in_body => {
                        if let Some(buf) = para_buf.take() {
                            let text = normalize_ws(&buf);
                            if !text.is_empty() {
                                if let Some(section) = sections.last_mut() {
                                    section.paragraphs.push(Paragraph::new(text));
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
            Ok(Event::Text(t)) => {
                if skip_depth > 0 {
                    continue;
                }
                let piece = t
                    .unescape()
                    .map_err(|e| CorpusError::MalformedInput(e.to_string()))?;
                if in_header {
                    match header_sink {
                        1 => title.push_str(&piece),
                        2 => idno.push_str(&piece),
                        _ => {}
                    }
                } else if let Some(buf) = para_buf.as_mut() {
                    buf.push_str(&piece);
                } else if let Some(h) = current_heading.as_mut() {
                    h.push_str(&piece);
                }
            }
            Ok(_) => {}
        }
    }

    sections.retain(|s| !s.paragraphs.is_empty());
    if sections.is_empty() {
        return Err(CorpusError::EmptyDocument);
    }

    let title = normalize_ws(&title);
    let idno = normalize_ws(&idno);
    let paper_id = if !idno.is_empty() {
        idno
    } else if !title.is_empty() {
        slug(&title)
    } else {
        "untitled".to_string()
    };

    Ok(Document {
        paper_id,
        title,
        sections,
    })
}

fn slug(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
        if out.len() >= 48 {
            break;
        }
    }
    out.trim_matches('-').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<TEI xmlns="http://www.tei-c.org/ns/1.0">
  <teiHeader>
    <fileDesc>
      <titleStmt><title level="a" type="main">A Minimal Paper</title></titleStmt>
      <sourceDesc><biblStruct><idno type="DOI">10.0000/minimal</idno></biblStruct></sourceDesc>
    </fileDesc>
  </teiHeader>
  <text><body>
    <div><head>Introduction</head><p>Bias is a tilt in reporting.</p></div>
  </body></text>
</TEI>"#;

    #[test]
    fn minimal_tei_parses() {
        let doc = parse_tei(MINIMAL.as_bytes()).unwrap();
        assert_eq!(doc.paper_id, "10.0000/minimal");
        assert_eq!(doc.title, "A Minimal Paper");
        assert_eq!(doc.sections.len(), 1);
        assert_eq!(doc.sections[0].heading, "Introduction");
        assert_eq!(doc.sections[0].paragraphs.len(), 1);
        assert_eq!(
            doc.sections[0].paragraphs[0].text,
            "Bias is a tilt in reporting."
        );
        assert_eq!(doc.sections[0].paragraphs[0].sentences.len(), 1);
    }

    #[test]
    fn empty_body_is_an_error() {
        let xml = r#"<TEI xmlns="http://www.tei-c.org/ns/1.0"><teiHeader/><text><body><div><head>Only a heading</head></div></body></text></TEI>"#;
        assert!(matches!(
            parse_tei(xml.as_bytes()),
            Err(CorpusError::EmptyDocument)
        ));
    }

    #[test]
    fn malformed_xml_is_an_error() {
        let xml = "<TEI><text><body><div><p>unclosed";
        assert!(matches!(
            parse_tei(xml.as_bytes()),
            Err(CorpusError::MalformedInput(_))
        ));
    }

    #[test]
    fn refs_and_figures_are_dropped() {
        let xml = r#"<TEI xmlns="http://www.tei-c.org/ns/1.0"><teiHeader/><text><body>
          <div><head>S</head>
            <p>Framing<ref type="bibr">[3]</ref> shapes coverage.</p>
            <figure><head>Fig 1</head><figDesc>A chart.</figDesc></figure>
            <p>See also <formula>x=1</formula> the appendix.</p>
          </div>
        </body></text></TEI>"#;
        let doc = parse_tei(xml.as_bytes()).unwrap();
        assert_eq!(doc.sections.len(), 1);
        let texts: Vec<&str> = doc.sections[0]
            .paragraphs
            .iter()
            .map(|p| p.text.as_str())
            .collect();
        assert_eq!(
            texts,
            vec!["Framing shapes coverage.", "See also the appendix."]
        );
    }

    #[test]
    fn three_section_fixture_matches_hand_count() {
        let raw = std::fs::read(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/fixtures/three_sections.tei.xml"
        ))
        .unwrap();
        let doc = parse_tei(&raw).unwrap();
        // Hand count of the fixture: 3 sections with 2 / 1 / 3 paragraphs.
        assert_eq!(doc.sections.len(), 3);
        let counts: Vec<usize> = doc.sections.iter().map(|s| s.paragraphs.len()).collect();
        assert_eq!(counts, vec![2, 1, 3]);
        assert_eq!(doc.sections[1].heading, "Method");
    }

    #[test]
    fn missing_idno_falls_back_to_title_slug() {
        let xml = r#"<TEI xmlns="http://www.tei-c.org/ns/1.0"><teiHeader><fileDesc>
          <titleStmt><title>On Word Choice</title></titleStmt>
        </fileDesc></teiHeader>
        <text><body><div><p>Short body text.</p></div></body></text></TEI>"#;
        let doc = parse_tei(xml.as_bytes()).unwrap();
        assert_eq!(doc.paper_id, "on-word-choice");
    }
}
