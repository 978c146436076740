use serde::{Deserialize, Serialize};

use super::RetrievalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTemplate {
    Conversational,
    SqlSchema,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub task_name: String,
    pub k: usize,
    pub template: PromptTemplate,
    /// Schema of the query's database.
    #[serde(default)]
    pub schema_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub utterance: String,
    pub parse: String,
    /// Schema of the exemplar's own database; falls back to the query schema.
    #[serde(default)]
    pub schema: Option<String>,
}

impl Exemplar {
    pub fn new(utterance: impl Into<String>, parse: impl Into<String>) -> Self {
        Exemplar { utterance: utterance.into(), parse: parse.into(), schema: None }
    }

    pub fn with_schema(mut self, schema: impl Into<String>) -> Self {
        self.schema = Some(schema.into());
        self
    }
}

/// Renders a few-shot prompt. `exemplars` must already be in ascending
/// similarity order, i.e. the reverse of a top-k list.
pub fn build_prompt(
    spec: &PromptSpec,
    exemplars: &[Exemplar],
    query: &str,
) -> Result<String, RetrievalError> {
    if spec.k == 0 || exemplars.len() != spec.k {
        return Err(RetrievalError::CountMismatch { expected: spec.k, got: exemplars.len() });
    }
    let mut out = String::new();
    match spec.template {
        PromptTemplate::Conversational => {
            out.push_str(&format!(
                "Below are examples of converting user utterances into {} semantic parses:\n\n",
                spec.task_name
            ));
            for (i, ex) in exemplars.iter().enumerate() {
                out.push_str(&format!(
                    "Example {}\nUser: {}\nParse: {}\n\n",
                    i + 1,
                    ex.utterance,
                    ex.parse
                ));
            }
            out.push_str(&format!("Query\nUser: {query}\nParse:"));
        }
        PromptTemplate::SqlSchema => {
            let schema = spec.schema_text.as_deref().ok_or(RetrievalError::MissingSchema)?;
            out.push_str(&format!(
                "Below are examples of database schema and text-to-SQL generation for {}:\n\n",
                spec.task_name
            ));
            for ex in exemplars {
                let s = ex.schema.as_deref().unwrap_or(schema);
                out.push_str(&format!(
                    "/* Given the following database schema: */\n{}\n\n/* Answer the following: {} */\nSQL Query: {}\n\n",
                    s.trim_end(),
                    ex.utterance,
                    ex.parse
                ));
            }
            out.push_str(&format!(
                "/* Given the following database schema: */\n{}\n\n/* Answer the following: {query} */\nSQL Query:",
                schema.trim_end()
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_k_is_count_mismatch() {
        let spec = PromptSpec {
            task_name: "MTop".into(),
            k: 0,
            template: PromptTemplate::Conversational,
            schema_text: None,
        };
        assert_eq!(
            build_prompt(&spec, &[], "q"),
            Err(RetrievalError::CountMismatch { expected: 0, got: 0 })
        );
    }

    #[test]
    fn sql_needs_schema() {
        let spec = PromptSpec {
            task_name: "Spider".into(),
            k: 1,
            template: PromptTemplate::SqlSchema,
            schema_text: None,
        };
        assert_eq!(
            build_prompt(&spec, &[Exemplar::new("u", "p")], "q"),
            Err(RetrievalError::MissingSchema)
        );
    }

    #[test]
    fn conversational_layout() {
        let spec = PromptSpec {
            task_name: "T".into(),
            k: 2,
            template: PromptTemplate::Conversational,
            schema_text: None,
        };
        let p = build_prompt(&spec, &[Exemplar::new("a", "A"), Exemplar::new("b", "B")], "q").unwrap();
        assert_eq!(
            p,
            "Below are examples of converting user utterances into T semantic parses:\n\n\
             Example 1\nUser: a\nParse: A\n\nExample 2\nUser: b\nParse: B\n\nQuery\nUser: q\nParse:"
        );
    }
}
