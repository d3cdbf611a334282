//! Scenario files shipped with the repository, looked up by name.

const PRESETS: &[(&str, &str)] = &[
    ("table1-default", include_str!("../../../presets/table1-default.json")),
    ("fig2-analytic", include_str!("../../../presets/fig2-analytic.json")),
    ("fig3-jam", include_str!("../../../presets/fig3-jam.json")),
    ("alpha-sweep", include_str!("../../../presets/alpha-sweep.json")),
    ("beta-sweep", include_str!("../../../presets/beta-sweep.json")),
    ("feedback-jam", include_str!("../../../presets/feedback-jam.json")),
    ("clean-feedback", include_str!("../../../presets/clean-feedback.json")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}
