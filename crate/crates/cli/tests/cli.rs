//! Golden-file tests of every subcommand on the committed inputs in `data/`.
//! Reports are compared field by field with numbers matched to `REL_TOL`
//! (absolute `ABS_TOL` near zero); `UPDATE_GOLDEN=1` rewrites `golden/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const REL_TOL: f64 = 1e-6;
const ABS_TOL: f64 = 1e-9;

fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn out_dir(tag: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(tag);
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn isogauss(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isogauss"))
        .args(args)
        .env("ISOGAUSS_OUT", dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn close(a: &Value, b: &Value, at: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= ABS_TOL.max(REL_TOL * x.abs().max(y.abs())) {
                Ok(())
            } else {
                Err(format!("{at}: {x} vs golden {y}"))
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return Err(format!("{at}: length {} vs golden {}", x.len(), y.len()));
            }
            x.iter().zip(y).enumerate().try_for_each(|(i, (p, q))| close(p, q, &format!("{at}[{i}]")))
        }
        (Value::Object(x), Value::Object(y)) => {
            let kx: Vec<_> = x.keys().collect();
            let ky: Vec<_> = y.keys().collect();
            if kx != ky {
                return Err(format!("{at}: keys {kx:?} vs golden {ky:?}"));
            }
            x.iter().try_for_each(|(k, v)| close(v, &y[k], &format!("{at}.{k}")))
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{at}: {a} vs golden {b}")),
    }
}

/// Compares a report with `golden/<name>` and the manifest's check names and
/// artifact list with `golden/<name minus .json>.manifest.json`.
fn golden(dir: &Path, report: &str, command: &str, name: &str) {
    let gdir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let got = read_json(&dir.join(report));
    let mut manifest = read_json(&dir.join(format!("{command}.manifest.json")));
    // Hashes and check values are covered by the report comparison and the
    // determinism test; the golden pins which checks ran and what was written.
    for a in manifest["artifacts"].as_array_mut().unwrap() {
        a.as_object_mut().unwrap().remove("sha256");
    }
    for c in manifest["checks"].as_array_mut().unwrap() {
        c.as_object_mut().unwrap().remove("value");
    }
    let stem = name.trim_end_matches(".json");
    let pairs = [(name.to_string(), got), (format!("{stem}.manifest.json"), manifest)];
    for (file, value) in pairs {
        let path = gdir.join(&file);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            fs::create_dir_all(&gdir).unwrap();
            fs::write(&path, serde_json::to_string_pretty(&value).unwrap() + "\n").unwrap();
        } else {
            close(&value, &read_json(&path), &file).unwrap();
        }
    }
}

#[test]
fn validate_channel_identity_is_isometric() {
    let dir = out_dir("validate");
    let o = isogauss(&dir, &["validate-channel", &data("identity.json")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("isometric: true"));
    golden(&dir, "validate-channel.json", "validate-channel", "validate-channel.json");
}

#[test]
fn validate_channel_rejects_non_cptp() {
    let dir = out_dir("validate-bad");
    let o = isogauss(&dir, &["validate-channel", &data("bad-channel.json")]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("isometric: false"));
    assert!(stderr(&o).contains("cptp_excess"));
}

#[test]
fn steady_state_with_boundary() {
    let dir = out_dir("steady");
    let o = isogauss(&dir, &["steady-state", &data("channel.json"), "--boundary", &data("boundary.json")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read_json(&dir.join("steady-state.json"));
    assert_eq!(report["n_preserved"], 2);
    golden(&dir, "steady-state.json", "steady-state", "steady-state.json");
}

#[test]
fn brickwall_spectrum_is_continuous() {
    let dir = out_dir("brickwall");
    let o = isogauss(&dir, &["brickwall-spectrum", &data("two-site.json"), "--grid", "64"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.join("brickwall-spectrum-spectrum.csv")).unwrap();
    assert!(csv.starts_with("k,branch_index,lambda,epsilon,exceptional_flag\n"));
    let branches = read_json(&dir.join("brickwall-spectrum.json"))["n_branches"].as_u64().unwrap() as usize;
    assert!(branches > 0);
    assert_eq!(csv.lines().count(), 1 + 64 * branches);
    golden(&dir, "brickwall-spectrum.json", "brickwall-spectrum", "brickwall-spectrum.json");
}

#[test]
fn decay_respects_the_bound() {
    let dir = out_dir("decay");
    let o = isogauss(&dir, &["decay", &data("two-site.json"), "--grid", "256"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.join("decay.csv")).unwrap();
    assert!(csv.starts_with("distance,max_abs_correlation\n"));
    golden(&dir, "decay.json", "decay", "decay.json");
}

#[test]
fn decay_of_bad_channel_exits_2() {
    let dir = out_dir("decay-bad");
    let o = isogauss(&dir, &["decay", &data("bad-channel.json"), "--grid", "1024"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cptp_excess"));
    let manifest = read_json(&dir.join("decay.manifest.json"));
    assert_eq!(manifest["passed"], false);
}

#[test]
fn tensor_audit_mps() {
    let dir = out_dir("tensor-mps");
    let o = isogauss(&dir, &["tensor-audit", &data("mps-tensor.json")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    golden(&dir, "tensor-audit.json", "tensor-audit", "tensor-audit-mps.json");
}

#[test]
fn tensor_audit_lightlike() {
    let dir = out_dir("tensor-lightlike");
    let o = isogauss(&dir, &["tensor-audit", &data("lightlike-tensor.json"), "--grid", "64"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.join("tensor-audit-spectrum.csv").exists());
    golden(&dir, "tensor-audit.json", "tensor-audit", "tensor-audit-lightlike.json");
}

#[test]
fn pip_spectrum_crosses_zero_near_k0() {
    let dir = out_dir("pip");
    let o = isogauss(&dir, &["pip-spectrum", "--lx", "24", "--ly", "24", "--ycut", "12"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(dir.join("pip-spectrum.csv")).unwrap();
    let near_zero = rd
        .records()
        .map(|r| r.unwrap())
        .filter(|r| r[0].parse::<f64>().unwrap().abs() < 0.3)
        .filter_map(|r| r[3].parse::<f64>().ok())
        .any(|eps| eps.abs() < 0.05);
    assert!(near_zero, "no branch near ε = 0 at small k");
    golden(&dir, "pip-spectrum.json", "pip-spectrum", "pip-spectrum.json");
}

#[test]
fn chern_of_pip() {
    let dir = out_dir("chern-pip");
    let o = isogauss(&dir, &["chern", "--model", "pip"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read_json(&dir.join("chern.json"));
    assert_eq!(report["nu"], 1);
    assert_eq!(report["nu_edge"], 1);
    golden(&dir, "chern.json", "chern", "chern-pip.json");
}

#[test]
fn chern_of_model_file() {
    let dir = out_dir("chern-file");
    let model = data("pip-model.json");
    let o = isogauss(&dir, &["chern", "--model", &model, "--grid", "16", "--ly", "16", "--nq", "48"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_json(&dir.join("chern.json"))["nu"], 1);
}

#[test]
fn oracle_check_passes() {
    let dir = out_dir("oracle");
    let o = isogauss(&dir, &["oracle-check", "--seed", "1", "--circuits", "6"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = fs::read_to_string(dir.join("oracle-check.csv")).unwrap();
    // Circuits alternate d = 2 (3 steps) and d = 3 (3 steps): 4 cuts each.
    assert_eq!(rows.lines().count(), 1 + 6 * 4);
    golden(&dir, "oracle-check.json", "oracle-check", "oracle-check.json");
}

#[test]
fn missing_file_is_a_usage_error() {
    let dir = out_dir("missing");
    let o = isogauss(&dir, &["decay", "no/such/channel.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no/such/channel.json"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = out_dir("flags");
    assert_eq!(code(&isogauss(&dir, &["pip-spectrum", "--lx", "many"])), 1);
    assert_eq!(code(&isogauss(&dir, &["no-such-command"])), 1);
    assert_eq!(code(&isogauss(&dir, &["validate-channel"])), 1);
}

#[test]
fn config_file_supplies_flags() {
    let dir = out_dir("config");
    let cfg_out = dir.join("from-config");
    let cfg = dir.join("run.toml");
    fs::create_dir_all(&dir).unwrap();
    let body = format!("out = {:?}\ninput = {:?}\ngrid = 32\n", cfg_out.to_str().unwrap(), data("two-site.json"));
    fs::write(&cfg, body).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_isogauss"))
        .args(["--config", cfg.to_str().unwrap(), "brickwall-spectrum"])
        .env_remove("ISOGAUSS_OUT")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = read_json(&cfg_out.join("brickwall-spectrum.manifest.json"));
    assert_eq!(manifest["parameters"]["grid"], 32);

    fs::write(&cfg, "gird = 32\n").unwrap();
    let o = isogauss(&dir, &["--config", cfg.to_str().unwrap(), "decay"]);
    assert_eq!(code(&o), 1, "unknown config keys are rejected");
}

#[test]
fn explicit_out_overrides_environment() {
    let dir = out_dir("override");
    let flag = dir.join("flag");
    let o = isogauss(&dir.join("env"), &["--out", flag.to_str().unwrap(), "validate-channel", &data("identity.json")]);
    assert_eq!(code(&o), 0);
    assert!(flag.join("validate-channel.manifest.json").exists());
    assert!(!dir.join("env").exists());
}

#[test]
fn same_inputs_give_identical_outputs() {
    let runs: [&[&str]; 3] = [
        &["brickwall-spectrum", &data("two-site.json"), "--grid", "48"],
        &["steady-state", &data("channel.json")],
        &["oracle-check", "--seed", "3", "--circuits", "4"],
    ];
    for args in runs {
        let command = args[0];
        let a = out_dir(&format!("det-{command}-a"));
        let b = out_dir(&format!("det-{command}-b"));
        assert_eq!(code(&isogauss(&a, args)), 0);
        assert_eq!(code(&isogauss(&b, args)), 0);
        let ma = fs::read(a.join(format!("{command}.manifest.json"))).unwrap();
        let mb = fs::read(b.join(format!("{command}.manifest.json"))).unwrap();
        // The manifest carries the sha256 of every artifact.
        assert_eq!(ma, mb, "{command} is not deterministic");
    }
}
