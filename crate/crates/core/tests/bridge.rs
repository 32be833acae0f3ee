#![cfg(unix)]

use mdlfuzz::sampler::{generate, Backend, BridgeBackend, SamplerConfig};

// answers request N with the Nth scripted token
const SCRIPTED: &str = r#"
n=0
while IFS= read -r line; do
  id=$(printf '%s' "$line" | sed 's/.*"id":\([0-9]*\).*/\1/')
  case $n in
    0) tok='System' ;;
    1) tok='{' ;;
    2|3) tok='}' ;;
    *) tok='<endoftext>' ;;
  esac
  printf '{"id":%s,"tokens":["%s","Block"],"probs":[0.9999999,0.0000001]}\n' "$id" "$tok"
  n=$((n+1))
done
"#;

fn stub(script: &str) -> BridgeBackend {
    BridgeBackend::spawn("sh", &["-c".to_string(), script.to_string()], 8).unwrap()
}

#[test]
fn generates_through_a_bridge_process() {
    let backend = stub(SCRIPTED);
    let cfg = SamplerConfig {
        temperature: 1e-6,
        ..SamplerConfig::default()
    };
    let out = generate(&backend, &cfg).unwrap();
    assert!(out.completed);
    assert_eq!(out.text, "Model { System { } }");
}

#[test]
fn wrong_id_is_a_backend_failure() {
    let backend = stub(r#"while read -r l; do echo '{"id":99,"tokens":["a"],"probs":[1.0]}'; done"#);
    let err = backend.next_distribution("Model {").unwrap_err();
    assert!(err.to_string().contains("does not echo"), "{err}");
}

#[test]
fn malformed_json_is_a_backend_failure() {
    let backend = stub("while read -r l; do echo 'not json'; done");
    let err = backend.next_distribution("Model {").unwrap_err();
    assert!(err.to_string().contains("malformed"), "{err}");
}

#[test]
fn unnormalized_probabilities_are_rejected() {
    let backend = stub(r#"while read -r l; do echo '{"id":0,"tokens":["a","b"],"probs":[0.5,0.2]}'; done"#);
    assert!(backend.next_distribution("Model {").is_err());
}

#[test]
fn exited_bridge_is_reported() {
    let backend = stub("exit 0");
    let err = backend.next_distribution("Model {").unwrap_err();
    assert!(err.to_string().contains("bridge"), "{err}");
}

#[test]
fn command_line_spawn() {
    let backend = BridgeBackend::spawn_command_line(&format!("sh -c '{}'", SCRIPTED.replace('\'', "'\\''")), 8).unwrap();
    let d = backend.next_distribution("Model {").unwrap();
    assert_eq!(d.argmax(), Some("System"));
}
