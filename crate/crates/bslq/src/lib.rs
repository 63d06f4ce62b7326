//! Problem files, JSON reports and the `bslq` command-line tool built on
//! [`bslq_core`].

pub mod cli;
pub mod json;
pub mod problem_file;
pub mod report;
pub mod trajectories;

/// The bundled example problem, as written by [`problem_file::save_spec`].
pub const EXAMPLE_JSON: &str = include_str!("../data/example.json");

/// JSON schema of problem files.
pub const SCHEMA_JSON: &str = include_str!("../data/problem.schema.json");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_example_is_current() {
        assert_eq!(EXAMPLE_JSON, problem_file::save_spec(&bslq_core::example::example_spec()));
    }

    #[test]
    fn schema_is_valid_json() {
        let v: serde_json::Value = serde_json::from_str(SCHEMA_JSON).unwrap();
        assert_eq!(v["required"].as_array().unwrap().len(), 14);
    }
}
