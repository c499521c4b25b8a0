//! Arena-backed document tree built from an error-recovering HTML5 parse.
//!
//! Nodes are stored in pre-order, so a node's index is also its document
//! order, and every subtree occupies the contiguous index range
//! `[id, subtree_end)`.

use std::fmt;

use scraper::{Html, Node as HtmlNode};

/// Elements whose contents never contribute text.
pub const OPAQUE_TAGS: &[&str] = &["script", "style", "noscript", "template"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    /// The document root (depth 0).
    Document,
    /// Element with its lowercase tag name.
    Element(String),
    Text(String),
}

#[derive(Debug, Clone)]
pub struct DomNode {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub depth: usize,
    /// One past the last descendant's index.
    pub subtree_end: usize,
}

impl DomNode {
    pub fn tag(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Element(tag) => Some(tag),
            _ => None,
        }
    }

    pub fn is_element(&self) -> bool {
        matches!(self.kind, NodeKind::Element(_))
    }

    pub fn text(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Text(text) => Some(text),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DomError {
    #[error("document contains no content")]
    EmptyDocument,
}

#[derive(Debug, Clone)]
pub struct Document {
    nodes: Vec<DomNode>,
}

/// Parses arbitrary bytes as HTML. Invalid UTF-8 is replaced lossily and
/// malformed markup is repaired the way browsers repair it.
pub fn parse_html(html: &[u8]) -> Result<Document, DomError> {
    let text = String::from_utf8_lossy(html);
    Document::parse(&text)
}

impl Document {
    pub fn parse(html: &str) -> Result<Self, DomError> {
        let parsed = Html::parse_document(html);
        let mut nodes = Vec::new();
        convert(parsed.tree.root(), None, 0, &mut nodes);
        let doc = Document { nodes };
        if doc.is_blank() {
            return Err(DomError::EmptyDocument);
        }
        Ok(doc)
    }

    /// True when the parse yielded nothing beyond the implied
    /// `html`/`head`/`body` skeleton and whitespace.
    fn is_blank(&self) -> bool {
        self.nodes.iter().all(|node| match &node.kind {
            NodeKind::Document => true,
            NodeKind::Element(tag) => matches!(tag.as_str(), "html" | "head" | "body"),
            NodeKind::Text(text) => text.trim().is_empty(),
        })
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &DomNode {
        &self.nodes[id.0]
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn elements(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(|&id| self.node(id).is_element())
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.node(id).parent
    }

    /// Parent only if it is an element (the document root is not).
    pub fn parent_element(&self, id: NodeId) -> Option<NodeId> {
        self.parent(id).filter(|&p| self.node(p).is_element())
    }

    pub fn element_ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.parent_element(id), move |&p| self.parent_element(p))
    }

    /// Whether `inner` lies in the subtree rooted at `outer` (inclusive).
    pub fn contains(&self, outer: NodeId, inner: NodeId) -> bool {
        outer.0 <= inner.0 && inner.0 < self.node(outer).subtree_end
    }

    /// Every node in the subtree rooted at `id`, in document order.
    pub fn subtree(&self, id: NodeId) -> impl Iterator<Item = NodeId> {
        (id.0..self.node(id).subtree_end).map(NodeId)
    }

    /// Text nodes in the subtree of `id`.
    pub fn text_nodes(&self, id: NodeId) -> impl Iterator<Item = (NodeId, &str)> + '_ {
        self.subtree(id)
            .filter_map(move |n| self.node(n).text().map(|t| (n, t)))
    }

    /// Whitespace-normalized text content of a subtree.
    pub fn text_content(&self, id: NodeId) -> String {
        normalize_text(self.text_nodes(id).map(|(_, t)| t))
    }
}

fn convert(
    node: ego_tree::NodeRef<'_, HtmlNode>,
    parent: Option<NodeId>,
    depth: usize,
    out: &mut Vec<DomNode>,
) {
    let kind = match node.value() {
        HtmlNode::Document | HtmlNode::Fragment => NodeKind::Document,
        HtmlNode::Element(el) => NodeKind::Element(el.name().to_ascii_lowercase()),
        HtmlNode::Text(text) => NodeKind::Text(text.to_string()),
        // comments, doctypes, processing instructions
        _ => return,
    };
    let opaque = matches!(&kind, NodeKind::Element(tag) if OPAQUE_TAGS.contains(&tag.as_str()));
    let id = NodeId(out.len());
    out.push(DomNode {
        kind,
        parent,
        children: Vec::new(),
        depth,
        subtree_end: id.0 + 1,
    });
    if let Some(p) = parent {
        out[p.0].children.push(id);
    }
    if !opaque {
        for child in node.children() {
            convert(child, Some(id), depth + 1, out);
        }
    }
    out[id.0].subtree_end = out.len();
}

/// Joins text fragments with single spaces, collapses whitespace runs and
/// trims both ends.
pub fn normalize_text<'a, I>(parts: I) -> String
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = String::new();
    for word in parts.into_iter().flat_map(str::split_whitespace) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
