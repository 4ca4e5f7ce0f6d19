//! Client side of the out-of-process macro host.
//!
//! The host is started as `<command...> <macro-module>` and speaks one JSON
//! object per line over its standard streams. Requests:
//!
//! ```json
//! {"id":1,"kind":"variable","name":"EOF"}
//! {"id":2,"kind":"call","name":"incr","args":["var",45]}
//! ```
//!
//! Responses echo the id and carry either `"value"` (when `"ok"` is true) or
//! `"error"`:
//!
//! ```json
//! {"id":1,"ok":true,"value":["trunc",-1,"int8"]}
//! {"id":3,"ok":false,"error":"unresolved macro: missing"}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde_json::{json, Map, Value};

use super::resolver::{MacroResolver, ResolveError};

const UNRESOLVED_PREFIX: &str = "unresolved macro: ";

#[derive(Debug, Clone, PartialEq)]
pub enum HostRequest {
    Variable {
        id: u64,
        name: String,
    },
    Call {
        id: u64,
        name: String,
        args: Vec<Value>,
    },
}

impl HostRequest {
    pub fn id(&self) -> u64 {
        match self {
            HostRequest::Variable { id, .. } | HostRequest::Call { id, .. } => *id,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            HostRequest::Variable { id, name } => {
                json!({"id": id, "kind": "variable", "name": name})
            }
            HostRequest::Call { id, name, args } => {
                json!({"id": id, "kind": "call", "name": name, "args": args})
            }
        }
    }

    pub fn from_json(value: &Value) -> Result<Self, String> {
        let obj = value.as_object().ok_or("request must be an object")?;
        let id = obj
            .get("id")
            .and_then(Value::as_u64)
            .ok_or("request needs an integer id")?;
        let name = obj
            .get("name")
            .and_then(Value::as_str)
            .filter(|n| !n.is_empty())
            .ok_or("request needs a nonempty name")?
            .to_owned();
        match (obj.get("kind").and_then(Value::as_str), obj.get("args")) {
            (Some("variable"), None) => Ok(HostRequest::Variable { id, name }),
            (Some("call"), Some(Value::Array(args))) => Ok(HostRequest::Call {
                id,
                name,
                args: args.clone(),
            }),
            (Some("variable"), Some(_)) => Err("variable request must not carry args".into()),
            (Some("call"), _) => Err("call request needs an args array".into()),
            _ => Err("request kind must be \"variable\" or \"call\"".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HostResponse {
    pub id: u64,
    pub result: Result<Value, String>,
}

impl HostResponse {
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("id".into(), json!(self.id));
        match &self.result {
            Ok(value) => {
                obj.insert("ok".into(), json!(true));
                obj.insert("value".into(), value.clone());
            }
            Err(error) => {
                obj.insert("ok".into(), json!(false));
                obj.insert("error".into(), json!(error));
            }
        }
        Value::Object(obj)
    }

    pub fn from_json(value: &Value) -> Result<Self, String> {
        let obj = value.as_object().ok_or("response must be an object")?;
        let id = obj
            .get("id")
            .and_then(Value::as_u64)
            .ok_or("response needs an integer id")?;
        let ok = obj
            .get("ok")
            .and_then(Value::as_bool)
            .ok_or("response needs a boolean ok")?;
        let result = match (ok, obj.get("value"), obj.get("error")) {
            (true, Some(v), None) => Ok(v.clone()),
            (false, None, Some(Value::String(e))) => Err(e.clone()),
            _ => return Err("response must carry exactly one of value/error matching ok".into()),
        };
        Ok(HostResponse { id, result })
    }
}

/// A [`MacroResolver`] backed by a macro host subprocess.
///
/// Requests are sent one at a time and answered in order. Dropping the
/// resolver closes the host's stdin and waits for it to exit.
pub struct HostResolver {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    next_id: u64,
}

impl HostResolver {
    /// Starts `command` (program followed by its arguments) with the macro
    /// module path appended.
    pub fn spawn(command: &[String], module: &Path) -> Result<Self, ResolveError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| ResolveError::Host("empty macro host command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .arg(module)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| {
                ResolveError::Host(format!(
                    "cannot start `{program}` ({e}); set --macro-host or CLISP_MACRO_HOST"
                ))
            })?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            child,
            stdin,
            stdout,
            next_id: 1,
        })
    }

    fn roundtrip(&mut self, request: HostRequest) -> Result<Value, ResolveError> {
        let name = match &request {
            HostRequest::Variable { name, .. } | HostRequest::Call { name, .. } => name.clone(),
        };
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| ResolveError::Host("host closed".into()))?;
        let line = request.to_json().to_string();
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| ResolveError::Host(format!("write failed: {e}")))?;
        let mut reply = String::new();
        let n = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| ResolveError::Host(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(ResolveError::Host("host exited before answering".into()));
        }
        let value: Value = serde_json::from_str(reply.trim_end())
            .map_err(|e| ResolveError::Host(format!("invalid response line: {e}")))?;
        let response = HostResponse::from_json(&value).map_err(ResolveError::Host)?;
        if response.id != request.id() {
            return Err(ResolveError::Host(format!(
                "response id {} does not match request id {}",
                response.id,
                request.id()
            )));
        }
        response
            .result
            .map_err(|error| match error.strip_prefix(UNRESOLVED_PREFIX) {
                Some(missing) => ResolveError::Unresolved(missing.to_owned()),
                None => ResolveError::Failed {
                    name,
                    message: error,
                },
            })
    }

    fn take_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }
}

impl MacroResolver for HostResolver {
    fn resolve_variable(&mut self, name: &str) -> Result<Value, ResolveError> {
        let id = self.take_id();
        self.roundtrip(HostRequest::Variable {
            id,
            name: name.into(),
        })
    }

    fn resolve_call(&mut self, name: &str, args: &[Value]) -> Result<Value, ResolveError> {
        let id = self.take_id();
        self.roundtrip(HostRequest::Call {
            id,
            name: name.into(),
            args: args.to_vec(),
        })
    }
}

impl Drop for HostResolver {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_format() {
        let req = HostRequest::Variable {
            id: 1,
            name: "EOF".into(),
        };
        assert_eq!(
            req.to_json().to_string(),
            r#"{"id":1,"kind":"variable","name":"EOF"}"#
        );
        let req = HostRequest::Call {
            id: 2,
            name: "incr".into(),
            args: vec![json!("var"), json!(45)],
        };
        assert_eq!(
            req.to_json().to_string(),
            r#"{"id":2,"kind":"call","name":"incr","args":["var",45]}"#
        );
        assert_eq!(HostRequest::from_json(&req.to_json()).unwrap(), req);
        assert!(HostRequest::from_json(&json!({"id": 1, "kind": "variable", "name": ""})).is_err());
        assert!(HostRequest::from_json(&json!({"id": 1, "kind": "call", "name": "f"})).is_err());
    }

    #[test]
    fn response_wire_format() {
        let ok = HostResponse {
            id: 1,
            result: Ok(json!(["trunc", -1, "int8"])),
        };
        assert_eq!(HostResponse::from_json(&ok.to_json()).unwrap(), ok);
        let err = HostResponse::from_json(
            &json!({"id": 3, "ok": false, "error": "unresolved macro: missing"}),
        )
        .unwrap();
        assert_eq!(err.result, Err("unresolved macro: missing".into()));
        assert!(HostResponse::from_json(&json!({"id": 3, "ok": true})).is_err());
        assert!(
            HostResponse::from_json(&json!({"id": 3, "ok": true, "value": 1, "error": "x"}))
                .is_err()
        );
    }
}
