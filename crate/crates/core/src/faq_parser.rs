//! Heuristic extraction of question/answer pairs from FAQ pages.
//!
//! The pipeline makes two assumptions about a page: most question marks on
//! it belong to FAQ questions, and every question is marked up the same way.
//!
//! 1. Collect the innermost elements whose text contains `?`.
//! 2. Vote on their [`ElementSignature`] (tag, up to three ancestor tags and
//!    depth); the most frequent one identifies the question markup.
//! 3. Every element carrying that signature is a question, whether or not
//!    its own text contains `?`.
//! 4. For each question, climb to the highest ancestor that does not
//!    contain the following question. The majority hop count is the answer
//!    scope distance.
//! 5. Answers are the text between consecutive questions, clipped to the
//!    container implied by the scope distance.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dom::{normalize_text, parse_html, DomError, Document, NodeId};

const ANCESTOR_TAGS: usize = 3;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error(transparent)]
    Dom(#[from] DomError),
    #[error("found {found} question candidate(s); at least 2 are needed, page does not look like an FAQ")]
    TooFewCandidates { found: usize },
    #[error("no element matches the inferred question signature {0}")]
    NoMatches(ElementSignature),
    #[error("found {found} question(s); at least 2 are needed to infer an answer scope")]
    TooFewQuestions { found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementSignature {
    pub tag: String,
    /// Nearest ancestor first.
    pub ancestor_tags: Vec<String>,
    pub depth: usize,
}

impl ElementSignature {
    pub fn of(doc: &Document, id: NodeId) -> Self {
        let node = doc.node(id);
        let tag = node.tag().unwrap_or_default().to_string();
        let ancestor_tags = doc
            .element_ancestors(id)
            .take(ANCESTOR_TAGS)
            .map(|a| doc.node(a).tag().unwrap_or_default().to_string())
            .collect();
        ElementSignature {
            tag,
            ancestor_tags,
            depth: node.depth,
        }
    }
}

impl std::fmt::Display for ElementSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.tag)?;
        for tag in &self.ancestor_tags {
            write!(f, " < {tag}")?;
        }
        write!(f, " @ depth {}", self.depth)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
}

pub type QaPairSet = Vec<QaPair>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub candidate_count: usize,
    pub winning_signature: ElementSignature,
    pub winning_votes: usize,
    pub answer_scope_distance: usize,
    /// Indices of pairs whose answer came out empty.
    pub empty_answers: Vec<usize>,
    pub pairs: QaPairSet,
}

fn has_question_mark(doc: &Document) -> Vec<bool> {
    let mut flags = vec![false; doc.len()];
    // children always follow their parent, so a reverse sweep is bottom-up
    for id in doc.ids().rev() {
        let node = doc.node(id);
        let own = node.text().is_some_and(|t| t.contains('?'));
        flags[id.0] = own || node.children.iter().any(|c| flags[c.0]);
    }
    flags
}

/// Innermost elements whose text contains `?`, de-duplicated by normalized
/// text (first occurrence wins), in document order.
pub fn find_question_candidates(doc: &Document) -> Vec<NodeId> {
    let flags = has_question_mark(doc);
    let mut seen = HashSet::new();
    doc.elements()
        .filter(|&id| flags[id.0])
        .filter(|&id| {
            !doc.node(id)
                .children
                .iter()
                .any(|&c| doc.node(c).is_element() && flags[c.0])
        })
        .filter(|&id| seen.insert(doc.text_content(id)))
        .collect()
}

/// Majority vote over candidate signatures. Ties go to the signature seen
/// first in document order. Returns the signature and its vote count.
pub fn infer_question_pattern(
    doc: &Document,
    candidates: &[NodeId],
) -> Result<(ElementSignature, usize), ParseError> {
    if candidates.len() < 2 {
        return Err(ParseError::TooFewCandidates {
            found: candidates.len(),
        });
    }
    // signature -> (votes, first document position)
    let mut votes: HashMap<ElementSignature, (usize, usize)> = HashMap::new();
    for &id in candidates {
        let entry = votes.entry(ElementSignature::of(doc, id)).or_insert((0, id.0));
        entry.0 += 1;
        entry.1 = entry.1.min(id.0);
    }
    let (signature, (count, _)) = votes
        .into_iter()
        .max_by(|(_, (ca, fa)), (_, (cb, fb))| ca.cmp(cb).then(fb.cmp(fa)))
        .expect("at least two candidates");
    Ok((signature, count))
}

/// All non-empty elements carrying `signature`, in document order.
pub fn extract_questions(
    doc: &Document,
    signature: &ElementSignature,
) -> Result<Vec<NodeId>, ParseError> {
    let questions: Vec<NodeId> = doc
        .elements()
        .filter(|&id| {
            let node = doc.node(id);
            node.depth == signature.depth
                && node.tag() == Some(signature.tag.as_str())
                && ElementSignature::of(doc, id) == *signature
        })
        .filter(|&id| !doc.text_content(id).is_empty())
        .collect();
    if questions.is_empty() {
        return Err(ParseError::NoMatches(signature.clone()));
    }
    Ok(questions)
}

/// Hop count from `question` to its highest ancestor that does not contain
/// `next`.
pub fn scope_distance(doc: &Document, question: NodeId, next: NodeId) -> usize {
    let mut hops = 0;
    let mut current = question;
    while let Some(parent) = doc.parent_element(current) {
        if doc.contains(parent, next) {
            break;
        }
        current = parent;
        hops += 1;
    }
    hops
}

/// Majority of [`scope_distance`] over consecutive question pairs; ties go
/// to the smaller distance.
pub fn infer_answer_scope(doc: &Document, questions: &[NodeId]) -> Result<usize, ParseError> {
    if questions.len() < 2 {
        return Err(ParseError::TooFewQuestions {
            found: questions.len(),
        });
    }
    let mut tally: HashMap<usize, usize> = HashMap::new();
    for pair in questions.windows(2) {
        *tally.entry(scope_distance(doc, pair[0], pair[1])).or_default() += 1;
    }
    let (distance, _) = tally
        .into_iter()
        .max_by(|(da, ca), (db, cb)| ca.cmp(cb).then(db.cmp(da)))
        .expect("non-empty tally");
    Ok(distance)
}

fn ancestor_at(doc: &Document, id: NodeId, hops: usize) -> NodeId {
    let mut current = id;
    for _ in 0..hops {
        match doc.parent_element(current) {
            Some(p) => current = p,
            None => break,
        }
    }
    current
}

/// Container that bounds the answer of `question`: the scope ancestor
/// itself when it wraps the question (distance > 0), otherwise the
/// question's parent.
fn answer_container(doc: &Document, question: NodeId, scope_distance: usize) -> NodeId {
    if scope_distance > 0 {
        ancestor_at(doc, question, scope_distance)
    } else {
        doc.parent(question).unwrap_or(doc.root())
    }
}

/// Pairs each question with the text that follows it, up to the next
/// question and never outside the answer container.
pub fn extract_qa_pairs(
    doc: &Document,
    questions: &[NodeId],
    scope_distance: usize,
    source_url: Option<&str>,
) -> QaPairSet {
    questions
        .iter()
        .enumerate()
        .map(|(index, &question)| {
            let container = answer_container(doc, question, scope_distance);
            let start = doc.node(question).subtree_end;
            let end = questions
                .get(index + 1)
                .map_or(usize::MAX, |next| next.0)
                .min(doc.node(container).subtree_end);
            let answer = normalize_text(
                (start..end.max(start))
                    .map(NodeId)
                    .filter(|&n| doc.contains(container, n))
                    .filter_map(|n| doc.node(n).text()),
            );
            QaPair {
                question: doc.text_content(question),
                answer,
                index,
                source_url: source_url.map(str::to_string),
            }
        })
        .collect()
}

/// Runs the full extraction pipeline on raw HTML bytes.
pub fn parse_faq(html: &[u8], source_url: Option<&str>) -> Result<ParseReport, ParseError> {
    let doc = parse_html(html)?;
    parse_document(&doc, source_url)
}

pub fn parse_document(doc: &Document, source_url: Option<&str>) -> Result<ParseReport, ParseError> {
    let candidates = find_question_candidates(doc);
    let (signature, votes) = infer_question_pattern(doc, &candidates)?;
    let questions = extract_questions(doc, &signature)?;
    let distance = infer_answer_scope(doc, &questions)?;
    let pairs = extract_qa_pairs(doc, &questions, distance, source_url);
    let empty_answers = pairs
        .iter()
        .filter(|p| p.answer.is_empty())
        .map(|p| p.index)
        .collect();
    Ok(ParseReport {
        candidate_count: candidates.len(),
        winning_signature: signature,
        winning_votes: votes,
        answer_scope_distance: distance,
        empty_answers,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(html: &str) -> Document {
        Document::parse(html).unwrap()
    }

    fn texts(doc: &Document, ids: &[NodeId]) -> Vec<String> {
        ids.iter().map(|&id| doc.text_content(id)).collect()
    }

    fn tags(doc: &Document, ids: &[NodeId]) -> Vec<String> {
        ids.iter()
            .map(|&id| doc.node(id).tag().unwrap().to_string())
            .collect()
    }

    #[test]
    fn candidates_are_the_headings() {
        let d = doc("<h3>One?</h3><p>a</p><h3>Two?</h3><p>b</p><h3>Three?</h3><p>c</p>");
        let c = find_question_candidates(&d);
        assert_eq!(tags(&d, &c), ["h3", "h3", "h3"]);
        assert_eq!(texts(&d, &c), ["One?", "Two?", "Three?"]);
    }

    #[test]
    fn innermost_rule() {
        let d = doc("<div><p>Why?</p></div>");
        let c = find_question_candidates(&d);
        assert_eq!(tags(&d, &c), ["p"]);
    }

    #[test]
    fn element_with_mixed_content_is_innermost_when_children_lack_marks() {
        let d = doc("<p>Is it <b>safe</b>?</p>");
        assert_eq!(tags(&d, &find_question_candidates(&d)), ["p"]);
    }

    #[test]
    fn script_question_marks_are_ignored() {
        let d = doc("<p>plain</p><script>let x = a ? b : c;</script><style>q::after{content:'?'}</style>");
        assert!(find_question_candidates(&d).is_empty());
    }

    #[test]
    fn duplicate_texts_keep_first() {
        let d = doc("<h3>Same?</h3><p>x</p><li>Same?</li><h3>Other?</h3>");
        let c = find_question_candidates(&d);
        assert_eq!(tags(&d, &c), ["h3", "h3"]);
    }

    #[test]
    fn majority_signature_wins() {
        let d = doc(
            "<body><section><div><h3>a?</h3></div><div><h3>b?</h3></div>\
             <div><h3>c?</h3></div><div><h3>d?</h3></div></section>\
             <div><p>e?</p></div></body>",
        );
        let c = find_question_candidates(&d);
        assert_eq!(c.len(), 5);
        let (sig, votes) = infer_question_pattern(&d, &c).unwrap();
        assert_eq!(votes, 4);
        assert_eq!(
            sig,
            ElementSignature {
                tag: "h3".into(),
                ancestor_tags: vec!["div".into(), "section".into(), "body".into()],
                depth: 5,
            }
        );
    }

    #[test]
    fn tie_goes_to_first_in_document_order() {
        let d = doc("<p>first?</p><div><span>second?</span></div>");
        let c = find_question_candidates(&d);
        let (sig, votes) = infer_question_pattern(&d, &c).unwrap();
        assert_eq!(votes, 1);
        assert_eq!(sig.tag, "p");

        let d = doc("<div><span>first?</span></div><p>second?</p>");
        let c = find_question_candidates(&d);
        assert_eq!(infer_question_pattern(&d, &c).unwrap().0.tag, "span");
    }

    #[test]
    fn one_candidate_is_not_enough() {
        let d = doc("<p>Ever wondered why?</p>");
        let c = find_question_candidates(&d);
        assert_eq!(
            infer_question_pattern(&d, &c).unwrap_err(),
            ParseError::TooFewCandidates { found: 1 }
        );
    }

    #[test]
    fn ancestor_tags_are_truncated_near_the_root() {
        let d = doc("<p>x?</p>");
        let p = find_question_candidates(&d)[0];
        let sig = ElementSignature::of(&d, p);
        assert_eq!(sig.ancestor_tags, ["body", "html"]);
        assert_eq!(sig.depth, 3);
    }

    #[test]
    fn pattern_matches_non_interrogative_items() {
        let d = doc(
            "<h3>Can I go out?</h3><p>a</p><h3>Limit time with older adults.</h3><p>b</p>\
             <h3>Is it safe?</h3><p>c</p><h3>Who pays?</h3><p>d</p>",
        );
        let c = find_question_candidates(&d);
        assert_eq!(c.len(), 3);
        let (sig, _) = infer_question_pattern(&d, &c).unwrap();
        let q = extract_questions(&d, &sig).unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(d.text_content(q[1]), "Limit time with older adults.");
        assert!(q.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn foreign_signature_has_no_matches() {
        let d = doc("<h3>a?</h3><h3>b?</h3>");
        let sig = ElementSignature {
            tag: "dt".into(),
            ancestor_tags: vec!["dl".into()],
            depth: 9,
        };
        assert!(matches!(
            extract_questions(&d, &sig),
            Err(ParseError::NoMatches(_))
        ));
    }

    #[test]
    fn sequential_layout_has_distance_zero() {
        let d = doc(
            "<main><div>Q1?</div><div>A1</div><div>Q2?</div><div>A2</div>\
             <div>Q3?</div><div>A3</div></main>",
        );
        let c = find_question_candidates(&d);
        assert_eq!(infer_answer_scope(&d, &c).unwrap(), 0);
    }

    #[test]
    fn grouped_layout_has_distance_one() {
        let d = doc(
            "<main><div id=questionGroup1><h4>Q1?</h4><div>A1</div></div>\
             <div id=questionGroup2><h4>Q2?</h4><div>A2</div></div>\
             <div id=questionGroup3><h4>Q3?</h4><div>A3</div></div></main>",
        );
        let c = find_question_candidates(&d);
        assert_eq!(infer_answer_scope(&d, &c).unwrap(), 1);
    }

    #[test]
    fn scope_majority_and_tie_break() {
        // three grouped questions then a stray one sharing the group's parent
        let d = doc(
            "<main><div><h4>Q1?</h4><p>A1</p></div><div><h4>Q2?</h4><p>A2</p></div>\
             <div><h4>Q3?</h4><p>A3</p></div><div><h4>Q4?</h4><p>A4</p></div></main>",
        );
        let q = find_question_candidates(&d);
        let per: Vec<_> = q.windows(2).map(|w| scope_distance(&d, w[0], w[1])).collect();
        assert_eq!(per, [1, 1, 1]);
        assert_eq!(infer_answer_scope(&d, &q).unwrap(), 1);

        // distances [1, 0]: tie resolves to 0
        let d = doc("<main><div><h4>Q1?</h4><p>A1</p></div><h4>Q2?</h4><h4>Q3?</h4></main>");
        let q = find_question_candidates(&d);
        let per: Vec<_> = q.windows(2).map(|w| scope_distance(&d, w[0], w[1])).collect();
        assert_eq!(per, [1, 0]);
        assert_eq!(infer_answer_scope(&d, &q).unwrap(), 0);
    }

    #[test]
    fn scope_needs_two_questions() {
        let d = doc("<h3>Q?</h3>");
        let q = find_question_candidates(&d);
        assert_eq!(
            infer_answer_scope(&d, &q).unwrap_err(),
            ParseError::TooFewQuestions { found: 1 }
        );
    }

    #[test]
    fn single_question_answer_runs_to_container_end() {
        let d = doc("<header>Site</header><main><h3>Only?</h3><p>first</p><p>second</p></main><footer>f</footer>");
        let q = find_question_candidates(&d);
        let pairs = extract_qa_pairs(&d, &q, 0, None);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].answer, "first second");
    }

    #[test]
    fn empty_answers_are_flagged() {
        let html = "<main><h3>A?</h3><h3>B?</h3><p>b</p></main>";
        let report = parse_faq(html.as_bytes(), Some("http://x")).unwrap();
        assert_eq!(report.pairs[0].answer, "");
        assert_eq!(report.pairs[1].answer, "b");
        assert_eq!(report.empty_answers, [0]);
        assert_eq!(report.pairs[0].source_url.as_deref(), Some("http://x"));
    }

    #[test]
    fn topic_sections_do_not_leak_headings() {
        let html = "<main>\
            <section><h2>Basics</h2><h3>What is it?</h3><p>A thing.</p><h3>Where is it?</h3><p>Here.</p></section>\
            <section><h2>Travel</h2><h3>Can I fly?</h3><p>Maybe.</p><h3>Can I drive?</h3><p>Yes.</p></section>\
            </main>";
        let report = parse_faq(html.as_bytes(), None).unwrap();
        let answers: Vec<_> = report.pairs.iter().map(|p| p.answer.as_str()).collect();
        assert_eq!(answers, ["A thing.", "Here.", "Maybe.", "Yes."]);
        assert_eq!(report.answer_scope_distance, 0);
    }

    #[test]
    fn blog_with_single_question_is_rejected() {
        let html = "<article><h1>My trip</h1><p>Was it worth it? Absolutely.</p><p>We saw lakes.</p></article>";
        assert_eq!(
            parse_faq(html.as_bytes(), None).unwrap_err(),
            ParseError::TooFewCandidates { found: 1 }
        );
    }

    #[test]
    fn empty_document_propagates() {
        assert_eq!(
            parse_faq(b"", None).unwrap_err(),
            ParseError::Dom(DomError::EmptyDocument)
        );
    }
}
