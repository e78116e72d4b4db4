//! PNML reader for place/transition nets.
//!
//! Reads `<place>`, `<transition>` and `<arc>` elements anywhere under
//! `<net>` (pages are flattened). A transition is silent when it has no
//! name, when [`is_silent_label`] accepts its name, or when it carries a
//! `<toolspecific activity="$invisible$"/>` marker as written by ProM and
//! pm4py. Arc inscriptions (weights) are ignored.

use std::collections::HashMap;

use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{Arc, PetriNet, Place, Transition};
use crate::error::{Error, Result};

/// True for labels conventionally used for silent transitions:
/// empty, `tau`, `invisible`, `silent` (any case), or `tau_*`/`tau *`.
pub fn is_silent_label(label: &str) -> bool {
    let l = label.trim().to_ascii_lowercase();
    l.is_empty()
        || l == "tau"
        || l == "invisible"
        || l == "silent"
        || l.starts_with("tau_")
        || l.starts_with("tau ")
        || l == "$invisible$"
}

#[derive(Default)]
struct NodeDraft {
    id: String,
    name: Option<String>,
    invisible: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Place,
    Transition,
    Name,
    Text,
    Other,
}

pub fn parse_pnml(bytes: &[u8]) -> Result<PetriNet> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();

    let mut stack: Vec<Ctx> = Vec::new();
    let mut places: Vec<NodeDraft> = Vec::new();
    let mut transitions: Vec<NodeDraft> = Vec::new();
    let mut arcs: Vec<(String, String)> = Vec::new();
    let mut current: Option<(Ctx, NodeDraft)> = None;
    // nesting depth below the open place/transition at which a <name> is direct
    let mut node_depth = 0usize;
    let mut saw_net = false;

    loop {
        let ev = reader
            .read_event_into(&mut buf)
            .map_err(|e| Error::Xml(format!("at byte {}: {e}", reader.buffer_position())))?;
        match ev {
            XmlEvent::Start(ref e) | XmlEvent::Empty(ref e) => {
                let empty = matches!(ev, XmlEvent::Empty(_));
                let ctx = match e.local_name().as_ref() {
                    b"net" => {
                        saw_net = true;
                        Ctx::Other
                    }
                    tag @ (b"place" | b"transition") if current.is_none() => {
                        // marking references use idref and are not nodes
                        match attr(e, b"id")? {
                            Some(id) => {
                                let kind = if tag == b"place" { Ctx::Place } else { Ctx::Transition };
                                current = Some((kind, NodeDraft { id, ..NodeDraft::default() }));
                                node_depth = stack.len() + 1;
                                kind
                            }
                            None => Ctx::Other,
                        }
                    }
                    b"arc" if current.is_none() => {
                        let src = attr(e, b"source")?
                            .ok_or_else(|| Error::Pnml("arc without source".into()))?;
                        let tgt = attr(e, b"target")?
                            .ok_or_else(|| Error::Pnml("arc without target".into()))?;
                        arcs.push((src, tgt));
                        Ctx::Other
                    }
                    b"name" if current.is_some() && stack.len() == node_depth => Ctx::Name,
                    b"text" if stack.last() == Some(&Ctx::Name) => Ctx::Text,
                    b"toolspecific" => {
                        if let Some((Ctx::Transition, d)) = current.as_mut() {
                            if attr(e, b"activity")?.as_deref() == Some("$invisible$") {
                                d.invisible = true;
                            }
                        }
                        Ctx::Other
                    }
                    _ => Ctx::Other,
                };
                if empty {
                    finish(ctx, &mut current, &mut places, &mut transitions);
                } else {
                    stack.push(ctx);
                }
            }
            XmlEvent::Text(t) => {
                if stack.last() == Some(&Ctx::Text) {
                    if let Some((_, d)) = current.as_mut() {
                        let text = t.unescape().map_err(|e| Error::Xml(e.to_string()))?;
                        d.name = Some(text.trim().to_owned());
                    }
                }
            }
            XmlEvent::End(_) => {
                let ctx = stack
                    .pop()
                    .ok_or_else(|| Error::Xml("unbalanced end tag".into()))?;
                finish(ctx, &mut current, &mut places, &mut transitions);
            }
            XmlEvent::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !stack.is_empty() {
        return Err(Error::Xml("unexpected end of document".into()));
    }
    if !saw_net {
        return Err(Error::Pnml("no <net> element".into()));
    }

    let mut place_ix = HashMap::new();
    for (i, p) in places.iter().enumerate() {
        if place_ix.insert(p.id.clone(), i).is_some() {
            return Err(Error::Pnml(format!("duplicate place id {:?}", p.id)));
        }
    }
    let mut trans_ix = HashMap::new();
    for (i, t) in transitions.iter().enumerate() {
        if place_ix.contains_key(&t.id) || trans_ix.insert(t.id.clone(), i).is_some() {
            return Err(Error::Pnml(format!("duplicate node id {:?}", t.id)));
        }
    }
    let arcs = arcs
        .into_iter()
        .map(|(s, t)| {
            match (place_ix.get(&s), trans_ix.get(&s), place_ix.get(&t), trans_ix.get(&t)) {
                (Some(&p), _, _, Some(&tr)) => Ok(Arc::Input(p, tr)),
                (_, Some(&tr), Some(&p), _) => Ok(Arc::Output(tr, p)),
                (None, None, _, _) => Err(Error::Pnml(format!("arc source {s:?} is not a node"))),
                (_, _, None, None) => Err(Error::Pnml(format!("arc target {t:?} is not a node"))),
                _ => Err(Error::Pnml(format!("arc {s:?} -> {t:?} joins two nodes of one kind"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let places = places
        .into_iter()
        .map(|d| Place {
            id: d.id,
            name: d.name,
        })
        .collect();
    let transitions = transitions
        .into_iter()
        .map(|d| {
            let silent = d.invisible || d.name.as_deref().is_none_or(is_silent_label);
            Transition {
                id: d.id,
                label: if silent { None } else { d.name },
            }
        })
        .collect();
    PetriNet::new(places, transitions, arcs)
}

fn finish(
    ctx: Ctx,
    current: &mut Option<(Ctx, NodeDraft)>,
    places: &mut Vec<NodeDraft>,
    transitions: &mut Vec<NodeDraft>,
) {
    if matches!(ctx, Ctx::Place | Ctx::Transition) {
        if let Some((kind, d)) = current.take() {
            match kind {
                Ctx::Place => places.push(d),
                _ => transitions.push(d),
            }
        }
    }
}

fn attr(e: &BytesStart<'_>, key: &[u8]) -> Result<Option<String>> {
    for a in e.attributes() {
        let a = a.map_err(|err| Error::Xml(err.to_string()))?;
        if a.key.as_ref() == key {
            let v = a.unescape_value().map_err(|err| Error::Xml(err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}
