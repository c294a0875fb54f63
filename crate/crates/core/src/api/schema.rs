//! JSON Schemas for every response payload, served under `/schema/`.

pub const NAMES: [&str; 9] = [
    "error",
    "repo_created",
    "stem_summary",
    "scope",
    "table",
    "cluster_commits",
    "inspection",
    "history",
    "pin_board",
];

pub fn get(name: &str) -> Option<&'static str> {
    Some(match name {
        "error" => include_str!("../../schemas/error.json"),
        "repo_created" => include_str!("../../schemas/repo_created.json"),
        "stem_summary" => include_str!("../../schemas/stem_summary.json"),
        "scope" => include_str!("../../schemas/scope.json"),
        "table" => include_str!("../../schemas/table.json"),
        "cluster_commits" => include_str!("../../schemas/cluster_commits.json"),
        "inspection" => include_str!("../../schemas/inspection.json"),
        "history" => include_str!("../../schemas/history.json"),
        "pin_board" => include_str!("../../schemas/pin_board.json"),
        _ => return None,
    })
}
