//! Shell stub backends shared by the protocol suites.
#![allow(dead_code)]

use std::time::Duration;

use pareto_tuner::protocol::{BackendSpec, WireRequest};
use proptest::prelude::*;

pub const HANDSHAKE: &str =
    r#"export LC_ALL=C; echo '{"protocol":"pareto-tuner","version":"1","parallel_safe":false}'"#;
/// Extracts the request id of `$line` into `$id`; ids must not contain quotes.
pub const ID: &str = r#"id=$(printf '%s\n' "$line" | sed 's/^{"id":"\([^"]*\)".*/\1/')"#;

pub fn stub(script: &str) -> BackendSpec {
    BackendSpec {
        command: vec!["sh".into(), "-c".into(), script.into()],
        handshake_timeout: Duration::from_secs(5),
        request_timeout: Duration::from_secs(5),
    }
}

/// Answers every request with `reply`, where `$id` is the request id.
pub fn replying(reply: &str) -> BackendSpec {
    stub(&format!("{HANDSHAKE}\nwhile IFS= read -r line; do\n{ID}\nprintf '%s\\n' \"{reply}\"\ndone"))
}

/// Answers every request with time_ms 1000 and quality 0.5.
pub fn identity_stub() -> BackendSpec {
    replying(r#"{\"id\":\"$id\",\"time_ms\":1000,\"quality\":0.5}"#)
}

/// Echoes each request line back inside the `error` field.
pub fn echo_stub() -> BackendSpec {
    stub(&format!(
        "{HANDSHAKE}\nwhile IFS= read -r line; do\n{ID}\nesc=$(printf '%s' \"$line\" | sed 's/\\\\/\\\\\\\\/g; s/\"/\\\\\"/g')\nprintf '{{\"id\":\"%s\",\"error\":\"%s\"}}\\n' \"$id\" \"$esc\"\ndone"
    ))
}

/// Completes the handshake, then never answers.
pub fn silent_stub(request_timeout: Duration) -> BackendSpec {
    let mut spec = stub(&format!("{HANDSHAKE}; exec sleep 30"));
    spec.request_timeout = request_timeout;
    spec
}

pub fn request(id: &str) -> WireRequest {
    WireRequest {
        id: id.into(),
        steps: 50,
        guidance_scale: 7.5,
        guidance_rescale: 0.7,
        seed: 7,
        positive_prompt: "two people and a bus, photograph".into(),
        negative_prompt: "sketch".into(),
        base_prompt: "two people and a bus".into(),
    }
}

/// Strings with commas, quotes, backslashes, newlines and non-ASCII characters.
pub fn text() -> impl Strategy<Value = String> {
    prop_oneof![any::<String>(), "[a-z ,\"\\\\\n\t\u{e9}\u{4e2d}\u{1f68c}]{0,40}",]
}

pub fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -1e6..1e6f64]
}

prop_compose! {
    pub fn wire_request()(
        id in text(), steps in any::<i64>(), guidance_scale in finite(), guidance_rescale in finite(),
        seed in any::<i64>(), positive_prompt in text(), negative_prompt in text(), base_prompt in text(),
    ) -> WireRequest {
        WireRequest { id, steps, guidance_scale, guidance_rescale, seed, positive_prompt, negative_prompt, base_prompt }
    }
}
