use std::collections::HashMap;
use std::fmt;

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("unresolved macro: {0}")]
    Unresolved(String),
    #[error("macro `{name}` failed: {message}")]
    Failed { name: String, message: String },
    #[error("macro host: {0}")]
    Host(String),
}

/// Source of macro values.
///
/// Resolution must be deterministic for a fixed set of definitions, and an
/// unknown name must produce [`ResolveError::Unresolved`].
pub trait MacroResolver {
    fn resolve_variable(&mut self, name: &str) -> Result<Value, ResolveError>;
    fn resolve_call(&mut self, name: &str, args: &[Value]) -> Result<Value, ResolveError>;
}

impl<R: MacroResolver + ?Sized> MacroResolver for &mut R {
    fn resolve_variable(&mut self, name: &str) -> Result<Value, ResolveError> {
        (**self).resolve_variable(name)
    }

    fn resolve_call(&mut self, name: &str, args: &[Value]) -> Result<Value, ResolveError> {
        (**self).resolve_call(name, args)
    }
}

impl<R: MacroResolver + ?Sized> MacroResolver for Box<R> {
    fn resolve_variable(&mut self, name: &str) -> Result<Value, ResolveError> {
        (**self).resolve_variable(name)
    }

    fn resolve_call(&mut self, name: &str, args: &[Value]) -> Result<Value, ResolveError> {
        (**self).resolve_call(name, args)
    }
}

type MacroFn = Box<dyn Fn(&[Value]) -> Result<Value, String> + Send + Sync>;

/// In-process macro definitions.
///
/// Functions are plain Rust closures, or templates loaded with
/// [`StaticResolver::from_definitions`].
#[derive(Default)]
pub struct StaticResolver {
    variables: HashMap<String, Value>,
    functions: HashMap<String, MacroFn>,
}

impl fmt::Debug for StaticResolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut functions: Vec<&String> = self.functions.keys().collect();
        functions.sort();
        f.debug_struct("StaticResolver")
            .field("variables", &self.variables)
            .field("functions", &functions)
            .finish()
    }
}

impl StaticResolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable(mut self, name: impl Into<String>, value: Value) -> Self {
        self.variables.insert(name.into(), value);
        self
    }

    pub fn function<F>(mut self, name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[Value]) -> Result<Value, String> + Send + Sync + 'static,
    {
        self.functions.insert(name.into(), Box::new(f));
        self
    }

    /// Loads definitions written as JSON:
    ///
    /// ```json
    /// { "variables": { "EOF": ["sext", ["trunc", -1, "int8"], "int"] },
    ///   "functions": { "incr": { "params": ["name", "amt"],
    ///                            "body": ["set", "name", ["add", "name", "amt"]] } } }
    /// ```
    ///
    /// A template function substitutes each argument for every string in its
    /// body equal to the matching parameter name.
    pub fn from_definitions(defs: &Value) -> Result<Self, String> {
        let Value::Object(top) = defs else {
            return Err("macro definitions must be a JSON object".into());
        };
        let mut resolver = Self::new();
        for key in top.keys() {
            if key != "variables" && key != "functions" {
                return Err(format!("unknown section `{key}` in macro definitions"));
            }
        }
        if let Some(vars) = top.get("variables") {
            let Value::Object(vars) = vars else {
                return Err("`variables` must be an object".into());
            };
            for (name, value) in vars {
                resolver.variables.insert(name.clone(), value.clone());
            }
        }
        if let Some(funcs) = top.get("functions") {
            let Value::Object(funcs) = funcs else {
                return Err("`functions` must be an object".into());
            };
            for (name, def) in funcs {
                let params: Vec<String> = def
                    .get("params")
                    .and_then(Value::as_array)
                    .and_then(|ps| ps.iter().map(|p| p.as_str().map(str::to_owned)).collect())
                    .ok_or_else(|| format!("function `{name}` needs a `params` list of names"))?;
                let body = def
                    .get("body")
                    .cloned()
                    .ok_or_else(|| format!("function `{name}` needs a `body`"))?;
                let fname = name.clone();
                resolver = resolver.function(name.clone(), move |args| {
                    if args.len() != params.len() {
                        return Err(format!(
                            "{fname} expects {} arguments, got {}",
                            params.len(),
                            args.len()
                        ));
                    }
                    Ok(substitute(&body, &params, args))
                });
            }
        }
        Ok(resolver)
    }
}

fn substitute(template: &Value, params: &[String], args: &[Value]) -> Value {
    match template {
        Value::String(s) => match params.iter().position(|p| p == s) {
            Some(i) => args[i].clone(),
            None => template.clone(),
        },
        Value::Array(items) => Value::Array(
            items
                .iter()
                .map(|item| substitute(item, params, args))
                .collect(),
        ),
        other => other.clone(),
    }
}

impl MacroResolver for StaticResolver {
    fn resolve_variable(&mut self, name: &str) -> Result<Value, ResolveError> {
        self.variables
            .get(name)
            .cloned()
            .ok_or_else(|| ResolveError::Unresolved(name.into()))
    }

    fn resolve_call(&mut self, name: &str, args: &[Value]) -> Result<Value, ResolveError> {
        let f = self
            .functions
            .get(name)
            .ok_or_else(|| ResolveError::Unresolved(name.into()))?;
        f(args).map_err(|message| ResolveError::Failed {
            name: name.into(),
            message,
        })
    }
}

/// Tries each resolver in order; the first one that knows the name wins.
#[derive(Default)]
pub struct LayeredResolver {
    layers: Vec<Box<dyn MacroResolver>>,
}

impl LayeredResolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, layer: impl MacroResolver + 'static) {
        self.layers.push(Box::new(layer));
    }

    pub fn with(mut self, layer: impl MacroResolver + 'static) -> Self {
        self.push(layer);
        self
    }
}

impl MacroResolver for LayeredResolver {
    fn resolve_variable(&mut self, name: &str) -> Result<Value, ResolveError> {
        for layer in &mut self.layers {
            match layer.resolve_variable(name) {
                Err(ResolveError::Unresolved(_)) => continue,
                result => return result,
            }
        }
        Err(ResolveError::Unresolved(name.into()))
    }

    fn resolve_call(&mut self, name: &str, args: &[Value]) -> Result<Value, ResolveError> {
        for layer in &mut self.layers {
            match layer.resolve_call(name, args) {
                Err(ResolveError::Unresolved(_)) => continue,
                result => return result,
            }
        }
        Err(ResolveError::Unresolved(name.into()))
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    #[test]
    fn template_definitions() {
        let defs = json!({
            "variables": { "EOF": ["trunc", -1, "int8"] },
            "functions": {
                "incr": { "params": ["name", "amt"], "body": ["set", "name", ["add", "name", "amt"]] }
            }
        });
        let mut r = StaticResolver::from_definitions(&defs).unwrap();
        assert_eq!(
            r.resolve_variable("EOF").unwrap(),
            json!(["trunc", -1, "int8"])
        );
        assert_eq!(
            r.resolve_call("incr", &[json!("var"), json!(45)]).unwrap(),
            json!(["set", "var", ["add", "var", 45]])
        );
        assert!(matches!(
            r.resolve_call("incr", &[json!("var")]),
            Err(ResolveError::Failed { .. })
        ));
        assert!(matches!(
            r.resolve_variable("nope"),
            Err(ResolveError::Unresolved(_))
        ));
        assert!(StaticResolver::from_definitions(&json!([])).is_err());
        assert!(StaticResolver::from_definitions(&json!({"macros": {}})).is_err());
    }

    #[test]
    fn layers_fall_through_on_unknown_names() {
        let mut r = LayeredResolver::new()
            .with(StaticResolver::new().variable("A", json!(1)))
            .with(
                StaticResolver::new()
                    .variable("A", json!(2))
                    .variable("B", json!(3)),
            );
        assert_eq!(r.resolve_variable("A").unwrap(), json!(1));
        assert_eq!(r.resolve_variable("B").unwrap(), json!(3));
        assert!(matches!(
            r.resolve_variable("C"),
            Err(ResolveError::Unresolved(_))
        ));
    }
}
