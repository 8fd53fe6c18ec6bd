use std::path::PathBuf;
use std::process::Command;

fn splitlab(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_splitlab")).args(args).output().expect("run splitlab");
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("splitlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn singularities_json() {
    let (ok, out, err) = splitlab(&["singularities", "--alpha", "0.4", "--format", "json"]);
    assert!(ok, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let im: f64 = v["rho_minus.im"].as_str().unwrap().parse().unwrap();
    // Im asinh(0.4 + i sqrt(0.84))
    assert!((im - 0.886077123792613682).abs() < 1e-15);
}

#[test]
fn melnikov_methods_agree() {
    let (ok, out, err) = splitlab(&["melnikov", "--eps", "0.2", "--alpha", "0.5"]);
    assert!(ok, "{err}");
    let get = |k: &str| -> f64 { out.lines().find_map(|l| l.strip_prefix(&format!("{k},"))).unwrap().parse().unwrap() };
    assert!((get("residue.amplitude") / get("quadrature.amplitude") - 1.0).abs() < 1e-8);
}

#[test]
fn scaling_law_alpha() {
    let (ok, out, err) = splitlab(&["melnikov", "--eps", "0.1", "--alpha", "1 - 1.0*eps^2"]);
    assert!(ok, "{err}");
    assert!(out.contains("alpha,0.99") && out.contains("regime,narrow-poly"), "{out}");
}

#[test]
fn sweep_then_fit() {
    let csv = scratch("wide.csv");
    let (ok, _, err) = splitlab(&["sweep", "--preset", "prop21-intermediate", "--out", csv.to_str().unwrap()]);
    assert!(ok, "{err}");
    let (ok, out, err) = splitlab(&["fit", csv.to_str().unwrap(), "--format", "json"]);
    assert!(ok, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["rate"].as_f64().unwrap() / 0.886077123792613682 - 1.0).abs() < 0.02);
    assert_eq!(v["n_points"], 10);
}

#[test]
fn validate_exit_codes() {
    let (ok, out, err) = splitlab(&["validate", "--only", "A4"]);
    assert!(ok, "{err}");
    assert!(err.contains("A4 PASS") && out.starts_with("id,label"));
    let (ok, _, err) = splitlab(&["validate", "--only", "A5"]);
    assert!(!ok && err.contains("A5 FAIL"));
    let (ok, _, _) = splitlab(&["validate", "--only", "A99"]);
    assert!(!ok);
}

#[test]
fn bad_input_is_reported() {
    let (ok, _, err) = splitlab(&["melnikov", "--alpha", "eps^^2"]);
    assert!(!ok && err.contains("scaling law"));
    let (ok, _, err) = splitlab(&["melnikov", "--forcing", "qp"]);
    assert!(!ok && err.contains("melnikov-qp"));
}
