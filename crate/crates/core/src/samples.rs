//! The image API example: two descriptions, agent knowledge, a goal, the
//! proof a reasoner produces for them, and a recorded interaction trace.
//!
//! Source IRIs are the file stems (`desc_images`, ...).

use crate::n3::parse_document;
use crate::reason::{FilterRule, KnowledgeBase, SourceDoc};

pub const DESC_IMAGES: &str = include_str!("../samples/desc_images.n3");
pub const DESC_THUMBNAIL: &str = include_str!("../samples/desc_thumbnail.n3");
pub const AGENT_KNOWLEDGE: &str = include_str!("../samples/agent_knowledge.n3");
pub const AGENT_GOAL: &str = include_str!("../samples/agent_goal.n3");
pub const COMPOSITION_PROOF: &str = include_str!("../samples/composition_proof.n3");
pub const INTERACTION_TRACE: &str = include_str!("../samples/interaction_trace.txt");

fn doc(iri: &str, text: &str) -> SourceDoc {
    SourceDoc::new(iri, parse_document(text, None).expect("bundled sample parses"))
}

/// Both descriptions, POST first.
pub fn descriptions() -> Vec<SourceDoc> {
    vec![doc("desc_images", DESC_IMAGES), doc("desc_thumbnail", DESC_THUMBNAIL)]
}

pub fn knowledge() -> KnowledgeBase {
    KnowledgeBase::new(vec![doc("agent_knowledge", AGENT_KNOWLEDGE)])
}

pub fn goal() -> FilterRule {
    FilterRule::parse("agent_goal", AGENT_GOAL).expect("bundled goal is valid")
}
