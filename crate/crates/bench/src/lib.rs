//! Synthetic inputs shared by the benchmarks.

use faqmatch_core::QaPair;

/// A grouped FAQ page with `n` questions.
pub fn faq_page(n: usize) -> String {
    let mut html = String::from("<html><body><main>");
    for i in 0..n {
        html.push_str(&format!(
            "<div class=\"item\"><h3>How does feature number {i} work?</h3>\
             <p>Feature {i} works by combining step {} with step {}.</p>\
             <p>See the manual, section {i}.</p></div>",
            i * 2,
            i * 3
        ));
    }
    html.push_str("</main></body></html>");
    html
}

pub fn questions(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| format!("How do I configure option {i} for the {} module?", i % 17))
        .collect()
}

pub fn pairs(n: usize) -> Vec<QaPair> {
    questions(n)
        .into_iter()
        .enumerate()
        .map(|(index, question)| QaPair {
            question,
            answer: format!("Answer {index}."),
            index,
            source_url: None,
        })
        .collect()
}
