//! Live HTTP backend speaking the wire contract: POST a JSON body of
//! `{model, messages, temperature, tools}` (plus `seed` when configured) and
//! read back `{content, tool_calls: [{name, arguments}]}`.
//!
//! Endpoints differ in where they put those fields, so the response is
//! addressed through configurable JSON Pointers. A body that is not JSON at
//! all still comes back as assistant text — a misbehaving endpoint is model
//! output to score, not an infrastructure failure.

use super::{AgentBackend, AssistantItem, BackendSpec, HarnessError};
use crate::guardrail::{tool_catalog, Message};
use crate::policy::ToolCall;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use std::time::Duration;

fn default_content() -> String {
    "/content".to_string()
}

fn default_tool_calls() -> String {
    "/tool_calls".to_string()
}

fn default_name() -> String {
    "/name".to_string()
}

fn default_arguments() -> String {
    "/arguments".to_string()
}

/// JSON Pointers into the response. `content` and `tool_calls` address the
/// whole body; `name` and `arguments` address each tool-call entry.
#[derive(Clone, Debug, Deserialize)]
pub struct FieldMapping {
    #[serde(default = "default_content")]
    pub content: String,
    #[serde(default = "default_tool_calls")]
    pub tool_calls: String,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_arguments")]
    pub arguments: String,
}

impl Default for FieldMapping {
    fn default() -> Self {
        FieldMapping {
            content: default_content(),
            tool_calls: default_tool_calls(),
            name: default_name(),
            arguments: default_arguments(),
        }
    }
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint_url: String,
    model_id: String,
    auth_token_env: Option<String>,
    seed: Option<u64>,
    mapping: FieldMapping,
}

impl HttpBackend {
    pub fn new(endpoint_url: &str, model_id: &str, auth_token_env: Option<&str>) -> Self {
        HttpBackend {
            client: client_with_timeout(30),
            endpoint_url: endpoint_url.to_string(),
            model_id: model_id.to_string(),
            auth_token_env: auth_token_env.map(String::from),
            seed: None,
            mapping: FieldMapping::default(),
        }
    }

    pub fn from_spec(spec: &BackendSpec) -> Self {
        HttpBackend {
            client: client_with_timeout(spec.timeout_secs.unwrap_or(30)),
            endpoint_url: spec.endpoint_url.clone(),
            model_id: spec.model_id.clone(),
            auth_token_env: spec.auth_token_env.clone(),
            seed: spec.seed,
            mapping: spec.field_mapping.clone().unwrap_or_default(),
        }
    }
}

fn client_with_timeout(secs: u64) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(secs))
        .build()
        .expect("http client construction")
}

impl AgentBackend for HttpBackend {
    fn model_id(&self) -> String {
        self.model_id.clone()
    }

    fn respond(&self, messages: &[Message]) -> Result<Vec<AssistantItem>, HarnessError> {
        let token = match &self.auth_token_env {
            Some(var) => {
                Some(std::env::var(var).map_err(|_| HarnessError::AuthMissing(var.clone()))?)
            }
            None => None,
        };
        let mut body = json!({
            "model": self.model_id,
            "messages": messages,
            "temperature": 0.0,
            "tools": tool_catalog(),
        });
        if let Some(seed) = self.seed {
            body["seed"] = json!(seed);
        }
        let mut request = self.client.post(&self.endpoint_url).json(&body);
        if let Some(token) = token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| HarnessError::BackendUnavailable(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| HarnessError::BackendUnavailable(e.to_string()))?;
        if !status.is_success() {
            return Err(HarnessError::BackendUnavailable(format!(
                "HTTP {status}: {}",
                truncate(&text, 200)
            )));
        }
        let Ok(value) = serde_json::from_str::<Value>(&text) else {
            return Ok(vec![AssistantItem::Text(text)]);
        };
        Ok(parse_items(&value, &self.mapping, &text))
    }
}

fn parse_items(value: &Value, mapping: &FieldMapping, raw_body: &str) -> Vec<AssistantItem> {
    let content = value.pointer(&mapping.content);
    let calls = value.pointer(&mapping.tool_calls);
    let mut items = Vec::new();
    if let Some(text) = content.and_then(Value::as_str) {
        if !text.is_empty() {
            items.push(AssistantItem::Text(text.to_string()));
        }
    }
    if let Some(entries) = calls.and_then(Value::as_array) {
        for entry in entries {
            items.push(parse_call(entry, mapping));
        }
    }
    // Neither pointer resolved: the shape is foreign, so score the raw body
    // as text rather than silently dropping it.
    if items.is_empty() && content.is_none() && calls.is_none() {
        items.push(AssistantItem::Text(raw_body.to_string()));
    }
    items
}

fn parse_call(entry: &Value, mapping: &FieldMapping) -> AssistantItem {
    let Some(name) = entry
        .pointer(&mapping.name)
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
    else {
        return AssistantItem::Text(entry.to_string());
    };
    let arguments = match entry.pointer(&mapping.arguments) {
        None | Some(Value::Null) => Map::new(),
        Some(Value::Object(map)) => map.clone(),
        Some(Value::String(s)) => match serde_json::from_str::<Value>(s) {
            Ok(Value::Object(map)) => map,
            Ok(Value::Null) => Map::new(),
            Ok(other) => Map::from_iter([("value".to_string(), other)]),
            Err(_) => return AssistantItem::Text(entry.to_string()),
        },
        Some(_) => return AssistantItem::Text(entry.to_string()),
    };
    AssistantItem::Call(ToolCall {
        name: name.to_string(),
        arguments,
    })
}

fn truncate(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_string()
    } else {
        let mut out: String = s.chars().take(max).collect();
        out.push('…');
        out
    }
}
