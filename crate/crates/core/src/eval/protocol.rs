//! Worker wire format: one record per `\n`-terminated UTF-8 line, written as
//! the record kind, one space, and a compact JSON object.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EvalRequest;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub request_id: String,
    pub epoch: u32,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub request_id: String,
    pub metric_mean: f64,
    pub metric_std: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub request_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Hello(Hello),
    EvalRequest(EvalRequest),
    Progress(ProgressRecord),
    EvalResult(ResultRecord),
    EvalError(ErrorRecord),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("line has no record kind")]
    MissingKind,
    #[error("unknown record kind {0:?}")]
    UnknownKind(String),
    #[error("malformed {kind} body: {message}")]
    Body { kind: String, message: String },
    #[error("embedded newline in record")]
    EmbeddedNewline,
}

impl Record {
    pub fn kind(&self) -> &'static str {
        match self {
            Record::Hello(_) => "hello",
            Record::EvalRequest(_) => "eval_request",
            Record::Progress(_) => "progress",
            Record::EvalResult(_) => "eval_result",
            Record::EvalError(_) => "eval_error",
        }
    }

    /// The line without its terminator.
    pub fn to_line(&self) -> String {
        let body = match self {
            Record::Hello(r) => serde_json::to_string(r),
            Record::EvalRequest(r) => serde_json::to_string(r),
            Record::Progress(r) => serde_json::to_string(r),
            Record::EvalResult(r) => serde_json::to_string(r),
            Record::EvalError(r) => serde_json::to_string(r),
        }
        .expect("protocol records serialize");
        format!("{} {body}", self.kind())
    }

    pub fn parse_line(line: &str) -> Result<Record, ProtocolError> {
        let line = line.strip_suffix('\n').unwrap_or(line);
        if line.contains('\n') {
            return Err(ProtocolError::EmbeddedNewline);
        }
        let (kind, body) = line.split_once(' ').ok_or(ProtocolError::MissingKind)?;
        fn body_of<T: serde::de::DeserializeOwned>(kind: &str, body: &str) -> Result<T, ProtocolError> {
            serde_json::from_str(body).map_err(|e| ProtocolError::Body {
                kind: kind.to_string(),
                message: e.to_string(),
            })
        }
        Ok(match kind {
            "hello" => Record::Hello(body_of(kind, body)?),
            "eval_request" => Record::EvalRequest(body_of(kind, body)?),
            "progress" => Record::Progress(body_of(kind, body)?),
            "eval_result" => Record::EvalResult(body_of(kind, body)?),
            "eval_error" => Record::EvalError(body_of(kind, body)?),
            "" => return Err(ProtocolError::MissingKind),
            other => return Err(ProtocolError::UnknownKind(other.to_string())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Directive;

    #[test]
    fn hello_line() {
        let line = Record::Hello(Hello { version: 1 }).to_line();
        assert_eq!(line, r#"hello {"version":1}"#);
        assert_eq!(Record::parse_line(&format!("{line}\n")).unwrap(), Record::Hello(Hello { version: 1 }));
    }

    #[test]
    fn request_field_order() {
        let req = EvalRequest {
            request_id: "req-1".into(),
            genotype: "v1;ops=gcn".into(),
            feature_plan: vec![Directive::NormalizeFeatures],
            dataset: "toy-cora".into(),
            seeds: vec![1, 2],
            epochs_cap: 200,
        };
        let line = Record::EvalRequest(req.clone()).to_line();
        assert_eq!(
            line,
            r#"eval_request {"request_id":"req-1","genotype":"v1;ops=gcn","feature_plan":["normalize-features"],"dataset":"toy-cora","seeds":[1,2],"epochs_cap":200}"#
        );
        assert_eq!(Record::parse_line(&line).unwrap(), Record::EvalRequest(req));
    }

    #[test]
    fn result_and_error_round_trip() {
        for record in [
            Record::Progress(ProgressRecord { request_id: "r".into(), epoch: 3, metric: 0.5 }),
            Record::EvalResult(ResultRecord {
                request_id: "r".into(),
                metric_mean: 0.8123,
                metric_std: 0.0061,
                wall_ms: 12,
            }),
            Record::EvalError(ErrorRecord { request_id: "r".into(), message: "oom".into() }),
        ] {
            assert_eq!(Record::parse_line(&record.to_line()).unwrap(), record);
        }
    }

    #[test]
    fn malformed_lines() {
        assert_eq!(Record::parse_line("hello"), Err(ProtocolError::MissingKind));
        assert!(matches!(Record::parse_line("greet {}"), Err(ProtocolError::UnknownKind(_))));
        assert!(matches!(Record::parse_line("hello {\"version\":\"x\"}"), Err(ProtocolError::Body { .. })));
        assert!(matches!(Record::parse_line("eval_result {}"), Err(ProtocolError::Body { .. })));
        assert_eq!(Record::parse_line("hello {}\nhello {}"), Err(ProtocolError::EmbeddedNewline));
    }
}
