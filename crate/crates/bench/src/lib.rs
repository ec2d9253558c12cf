//! Fixtures shared by the planner benchmarks.

use paco_core::attributes::{AttributeTarget, Document, Targets, Utterance};

/// A meeting transcript of `turns` utterances requesting all five attributes.
pub fn meeting(turns: usize) -> Document {
    let speakers = ["Ana", "Ben", "Kim"];
    let lines = [
        "The library extension is over budget by 12 percent.",
        "Steel prices in Cardiff rose again in March.",
        "We could delay the cafe wing until June.",
        "The council will vote on the revised plan next week.",
    ];
    let utterances: Vec<Utterance> = (0..turns)
        .map(|i| Utterance {
            speaker: speakers[i % speakers.len()].to_string(),
            text: lines[i % lines.len()].to_string(),
        })
        .collect();
    let text = utterances
        .iter()
        .map(|u| format!("{}: {}", u.speaker, u.text))
        .collect::<Vec<_>>()
        .join(" ");
    let targets = Targets::new(vec![
        AttributeTarget::Extractiveness(60.0),
        AttributeTarget::Length(20),
        AttributeTarget::Specificity(15.0),
        AttributeTarget::Topic(vec!["budget".into(), "steel".into()]),
        AttributeTarget::Speaker("Ben".into()),
    ])
    .expect("valid targets");
    Document::new(format!("meeting-{turns}"), text, Some(utterances), None, targets).expect("valid document")
}
