//! Reader for the XES subset used by process-mining event logs: a `<log>` of
//! `<trace>` elements holding `<event>` elements whose direct children are
//! typed attributes (`<string key=".." value=".."/>`, `<date .../>`, ...).
//! Nested attribute values, globals, classifiers and extensions are skipped.

use std::collections::HashMap;

use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use super::time::parse_timestamp;
use super::{activity_label, EventLog, RawEvent, RawTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XesOptions {
    /// Event attribute keys kept as categorical features, in order.
    pub attr_keys: Vec<String>,
}

impl Default for XesOptions {
    fn default() -> Self {
        Self {
            attr_keys: vec!["org:resource".to_owned()],
        }
    }
}

/// Case id (if seen) and the attribute maps of the events read so far.
type OpenTrace = (Option<String>, Vec<HashMap<String, String>>);

const ATTRIBUTE_TAGS: &[&[u8]] = &[
    b"string", b"date", b"int", b"float", b"boolean", b"id", b"list", b"container",
];

#[derive(PartialEq, Clone, Copy)]
enum Frame {
    Log,
    Trace,
    Event,
    Other,
}

pub fn parse_xes(bytes: &[u8], options: &XesOptions) -> Result<EventLog> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);

    let mut stack: Vec<Frame> = Vec::new();
    let mut traces: Vec<RawTrace> = Vec::new();
    let mut trace: Option<OpenTrace> = None;
    let mut event: Option<HashMap<String, String>> = None;
    let mut buf = Vec::new();

    loop {
        let ev = reader
            .read_event_into(&mut buf)
            .map_err(|e| Error::Xml(format!("at byte {}: {e}", reader.buffer_position())))?;
        match ev {
            XmlEvent::Start(ref e) | XmlEvent::Empty(ref e) => {
                let is_empty = matches!(ev, XmlEvent::Empty(_));
                let parent = stack.last().copied();
                let frame = match e.local_name().as_ref() {
                    b"log" if parent.is_none() => Frame::Log,
                    b"trace" if parent == Some(Frame::Log) => {
                        trace = Some((None, Vec::new()));
                        Frame::Trace
                    }
                    b"event" if parent == Some(Frame::Trace) => {
                        event = Some(HashMap::new());
                        Frame::Event
                    }
                    tag if ATTRIBUTE_TAGS.contains(&tag) => {
                        match parent {
                            Some(Frame::Event) => {
                                if let (Some(map), Some((k, v))) = (event.as_mut(), key_value(e)?) {
                                    map.insert(k, v);
                                }
                            }
                            Some(Frame::Trace) => {
                                if let (Some((name, _)), Some((k, v))) = (trace.as_mut(), key_value(e)?) {
                                    if k == "concept:name" {
                                        *name = Some(v);
                                    }
                                }
                            }
                            _ => {}
                        }
                        Frame::Other
                    }
                    _ => Frame::Other,
                };
                if is_empty {
                    close(frame, &mut trace, &mut event, &mut traces, options)?;
                } else {
                    stack.push(frame);
                }
            }
            XmlEvent::End(_) => {
                let frame = stack
                    .pop()
                    .ok_or_else(|| Error::Xml("unbalanced end tag".into()))?;
                close(frame, &mut trace, &mut event, &mut traces, options)?;
            }
            XmlEvent::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !stack.is_empty() {
        return Err(Error::Xml("unexpected end of document".into()));
    }
    let attr_names = options.attr_keys.clone();
    Ok(EventLog::from_raw(traces, attr_names))
}

fn close(
    frame: Frame,
    trace: &mut Option<OpenTrace>,
    event: &mut Option<HashMap<String, String>>,
    traces: &mut Vec<RawTrace>,
    options: &XesOptions,
) -> Result<()> {
    match frame {
        Frame::Event => {
            if let (Some(ev), Some((_, evs))) = (event.take(), trace.as_mut()) {
                evs.push(ev);
            }
        }
        Frame::Trace => {
            if let Some((name, evs)) = trace.take() {
                let ti = traces.len();
                let case_id = name.unwrap_or_else(|| ti.to_string());
                let events = evs
                    .into_iter()
                    .enumerate()
                    .map(|(ei, ev)| to_raw_event(ev, options).map_err(|message| Error::Log {
                        location: format!("trace {ti} (case {case_id:?}), event {ei}"),
                        message,
                    }))
                    .collect::<Result<Vec<_>>>()?;
                traces.push(RawTrace { case_id, events });
            }
        }
        _ => {}
    }
    Ok(())
}

fn to_raw_event(
    mut ev: HashMap<String, String>,
    options: &XesOptions,
) -> std::result::Result<RawEvent, String> {
    let name = ev
        .remove("concept:name")
        .ok_or_else(|| "missing concept:name".to_owned())?;
    let ts = ev
        .remove("time:timestamp")
        .ok_or_else(|| "missing time:timestamp".to_owned())?;
    let timestamp =
        parse_timestamp(&ts, None).ok_or_else(|| format!("unparseable timestamp {ts:?}"))?;
    let lifecycle = ev.get("lifecycle:transition").map(String::as_str);
    let activity = activity_label(&name, lifecycle);
    let attrs = options.attr_keys.iter().map(|k| ev.get(k).cloned()).collect();
    Ok(RawEvent {
        activity,
        timestamp,
        attrs,
    })
}

fn key_value(e: &BytesStart<'_>) -> Result<Option<(String, String)>> {
    let mut key = None;
    let mut value = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| Error::Xml(err.to_string()))?;
        let v = attr
            .unescape_value()
            .map_err(|err| Error::Xml(err.to_string()))?
            .into_owned();
        match attr.key.as_ref() {
            b"key" => key = Some(v),
            b"value" => value = Some(v),
            _ => {}
        }
    }
    Ok(key.zip(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_TRACE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <extension name="Concept" prefix="concept" uri="http://www.xes-standard.org/concept.xesext"/>
  <global scope="event"><string key="concept:name" value="__INVALID__"/></global>
  <classifier name="Activity" keys="concept:name"/>
  <trace>
    <string key="concept:name" value="214364"/>
    <event>
      <string key="concept:name" value="A_SUBMITTED"/>
      <string key="lifecycle:transition" value="COMPLETE"/>
      <string key="org:resource" value="Joseph"/>
      <date key="time:timestamp" value="2012-03-01T10:00:00.000+01:00"/>
    </event>
    <event>
      <string key="concept:name" value="A_PARTLYSUBMITTED"/>
      <date key="time:timestamp" value="2012-03-02T10:00:00.000+01:00"/>
      <list key="nested"><values><string key="x" value="y"/></values></list>
    </event>
  </trace>
</log>"#;

    #[test]
    fn lifecycle_is_folded_into_label() {
        let log = parse_xes(ONE_TRACE.as_bytes(), &XesOptions::default()).unwrap();
        assert_eq!(log.traces.len(), 1);
        let t = &log.traces[0];
        assert_eq!(t.case_id, "214364");
        assert_eq!(log.activity_vocab.label(t.events[0].activity), Some("A_SUBMITTED+COMPLETE"));
        assert_eq!(log.activity_vocab.label(t.events[1].activity), Some("A_PARTLYSUBMITTED"));
        assert_eq!(log.attr_vocabs[0].label(t.events[0].attrs[0]), Some("Joseph"));
        assert_eq!(log.attr_vocabs[0].label(t.events[1].attrs[0]), Some(""));
        assert_eq!(t.events[1].timestamp - t.events[0].timestamp, 86400);
        assert_eq!(log.max_trace_len, 2);
    }

    #[test]
    fn empty_log() {
        let log = parse_xes(b"<log xes.version=\"1.0\"></log>", &XesOptions::default()).unwrap();
        assert!(log.traces.is_empty());
        assert_eq!(log.max_trace_len, 0);
    }

    #[test]
    fn single_event_trace() {
        let doc = r#"<log><trace><event><string key="concept:name" value="a"/><date key="time:timestamp" value="2020-01-01T00:00:00Z"/></event></trace></log>"#;
        let log = parse_xes(doc.as_bytes(), &XesOptions::default()).unwrap();
        assert_eq!(log.max_trace_len, 1);
    }

    #[test]
    fn missing_timestamp_names_the_event() {
        let doc = r#"<log><trace><string key="concept:name" value="c7"/><event><string key="concept:name" value="a"/></event></trace></log>"#;
        let err = parse_xes(doc.as_bytes(), &XesOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("c7") && msg.contains("event 0") && msg.contains("time:timestamp"), "{msg}");
    }

    #[test]
    fn malformed_xml_is_rejected() {
        assert!(matches!(
            parse_xes(b"<log><trace></log>", &XesOptions::default()),
            Err(Error::Xml(_))
        ));
    }
}
