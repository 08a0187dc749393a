use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ocs_core::formulation::{build, Formulation, SelectionInstance};
use ocs_core::kinship::relationship_matrix;
use ocs_core::pedigree::parse_pedigree;
use ocs_core::solver::{solve, SolverConfig};
use ocs_core::verify::{cross_check, min_group_coancestry_exhaustive};
use serde_json::Value;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn ocs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocs")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn read_contributions(p: &Path) -> Vec<(String, f64)> {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,contribution"));
    lines
        .map(|l| {
            let (id, v) = l.split_once(',').unwrap();
            (id.to_string(), v.parse().unwrap())
        })
        .collect()
}

/// The single JSON error line on standard error.
fn error_line(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "{text}");
    let v: Value = serde_json::from_str(lines[0]).unwrap();
    assert!(v["error"].is_string() && v["message"].is_string());
    v
}

fn solve_figure1(dir: &TempDir, theta: &str, formulation: &str) -> (Output, PathBuf, PathBuf) {
    let out = dir.path().join(format!("{formulation}-{theta}.csv"));
    let summary = dir.path().join(format!("{formulation}-{theta}.json"));
    let o = ocs(&[
        "solve",
        "--pedigree",
        s(&data("figure1.csv")),
        "--theta",
        theta,
        "--formulation",
        formulation,
        "--out",
        s(&out),
        "--summary",
        s(&summary),
    ]);
    (o, out, summary)
}

#[test]
fn solve_figure1_matches_cross_check() {
    let dir = TempDir::new().unwrap();
    let (o, out, summary) = solve_figure1(&dir, "0.25", "compact");
    assert_eq!(o.status.code(), Some(0));
    let j = read_json(&summary);
    assert_eq!(j["status"], "Optimal");
    assert_eq!(j["formulation"], "compact");
    for key in ["objective", "group_coancestry", "gap"] {
        assert!(j[key].as_f64().unwrap().is_finite());
    }
    assert!(j["iterations"].as_u64().unwrap() > 0);
    for key in ["parse", "build", "solve"] {
        assert!(j["timings"][key].as_f64().unwrap() >= 0.0);
    }
    assert!(j["group_coancestry"].as_f64().unwrap() <= 0.25 + 1e-9);

    let ped = parse_pedigree(fs::read(data("figure1.csv")).unwrap().as_slice()).unwrap();
    let inst = SelectionInstance::uniform(ped, 0.0, 1.0, 0.25).unwrap();
    let report = cross_check(&inst, &SolverConfig::default()).unwrap();
    let oracle = report.outcomes.iter().find(|o| o.formulation == Formulation::Compact).unwrap();
    assert!((j["objective"].as_f64().unwrap() - oracle.objective.unwrap()).abs() <= 1e-7);

    let x = read_contributions(&out);
    let ids: Vec<&str> = x.iter().map(|(id, _)| id.as_str()).collect();
    assert_eq!(ids, ["1", "2", "3", "4", "5", "6", "7", "8", "9"]);
    assert!((x.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-7);
}

#[test]
fn infeasible_cap_exits_two() {
    let ped = parse_pedigree(fs::read(data("figure1.csv")).unwrap().as_slice()).unwrap();
    let floor = min_group_coancestry_exhaustive(&relationship_matrix(&ped).unwrap()).unwrap();
    assert!(floor > 0.01, "minimum coancestry {floor}");

    let dir = TempDir::new().unwrap();
    let (o, out, summary) = solve_figure1(&dir, "0.01", "compact");
    assert_eq!(o.status.code(), Some(2));
    let j = read_json(&summary);
    assert_eq!(j["status"], "PrimalInfeasible");
    assert!(j["objective"].is_null());
    assert!(!out.exists());
}

#[test]
fn simple_and_compact_agree() {
    let dir = TempDir::new().unwrap();
    let (a, xa, ja) = solve_figure1(&dir, "0.25", "simple");
    let (b, xb, jb) = solve_figure1(&dir, "0.25", "compact");
    assert_eq!((a.status.code(), b.status.code()), (Some(0), Some(0)));
    let (oa, ob) = (read_json(&ja)["objective"].as_f64().unwrap(), read_json(&jb)["objective"].as_f64().unwrap());
    assert!((oa - ob).abs() <= 1e-7);
    for ((ia, va), (ib, vb)) in read_contributions(&xa).iter().zip(read_contributions(&xb).iter()) {
        assert_eq!(ia, ib);
        assert!((va - vb).abs() <= 1e-5);
    }
}

#[test]
fn bounds_from_files() {
    let dir = TempDir::new().unwrap();
    let upper = dir.path().join("upper.csv");
    fs::write(&upper, "id,bound\n1,0.1\n2,0.5\n3,0.5\n4,0.5\n5,0.5\n6,0.5\n7,0.5\n8,0.5\n9,0.5\n").unwrap();
    let out = dir.path().join("x.csv");
    let o = ocs(&[
        "solve", "--pedigree", s(&data("figure1.csv")), "--theta", "0.3", "--upper", s(&upper), "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let x = read_contributions(&out);
    assert!(x[0].1 <= 0.1 + 1e-7);

    fs::write(&upper, "id,bound\n1,0.1\n").unwrap();
    let o = ocs(&["solve", "--pedigree", s(&data("figure1.csv")), "--theta", "0.3", "--upper", s(&upper)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"], "bounds");
}

#[test]
fn library_and_binary_agree_on_generated_instance() {
    let dir = TempDir::new().unwrap();
    let ped_path = dir.path().join("ped.csv");
    assert_eq!(ocs(&["generate", "--seed", "3", "--out", s(&ped_path)]).status.code(), Some(0));
    let summary = dir.path().join("s.json");
    let o = ocs(&[
        "solve", "--pedigree", s(&ped_path), "--theta", "0.08", "--upper", "0.2", "--tol", "1e-9",
        "--max-iter", "100", "--summary", s(&summary), "--out", s(&dir.path().join("x.csv")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ped = parse_pedigree(fs::read(&ped_path).unwrap().as_slice()).unwrap();
    let inst = SelectionInstance::uniform(ped, 0.0, 0.2, 0.08).unwrap();
    let built = build(&inst, Formulation::Compact).unwrap();
    let cfg = SolverConfig { tol_gap: 1e-9, tol_feas: 1e-9, max_iter: 100, ..SolverConfig::default() };
    let sol = solve(&built.problem, &cfg).unwrap();
    assert_eq!(read_json(&summary)["objective"].as_f64().unwrap(), sol.objective);
}

#[test]
fn solver_failure_exits_one() {
    let o = ocs(&["solve", "--pedigree", s(&data("figure1.csv")), "--theta", "0.25", "--max-iter", "2"]);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8_lossy(&o.stderr);
    let last: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["error"], "solver");
}

#[test]
fn export_single_member_matches_golden() {
    let dir = TempDir::new().unwrap();
    let ped = dir.path().join("one.csv");
    fs::write(&ped, "id,sire,dam,ebv\n1,0,0,1\n").unwrap();
    let out = dir.path().join("one.dat-s");
    let o = ocs(&["export-sdpa", "--pedigree", s(&ped), "--theta", "0.6", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(&out).unwrap(), fs::read(data("single_member.dat-s")).unwrap());
}

#[test]
fn export_figure1_block_structure() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("f.dat-s");
    let o = ocs(&["export-sdpa", "--pedigree", s(&data("figure1.csv")), "--theta", "0.25", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("blocks -1 -1 -9 -9 10"), "{stdout}");
    let text = fs::read_to_string(&out).unwrap();
    let header: Vec<&str> = text.lines().take(3).collect();
    assert_eq!(header, ["9", "5", "-1 -1 -9 -9 10"]);
}

#[test]
fn export_missing_input_exits_one() {
    let dir = TempDir::new().unwrap();
    let o = ocs(&[
        "export-sdpa", "--pedigree", s(&dir.path().join("absent.csv")), "--theta", "0.3", "--out",
        s(&dir.path().join("o.dat-s")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"], "io");
}

#[test]
fn check_figure1_and_generated() {
    let o = ocs(&["check", "--pedigree", s(&data("figure1.csv")), "--theta", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().contains("result PASS"));

    let dir = TempDir::new().unwrap();
    let ped = dir.path().join("g.csv");
    let gen = ocs(&[
        "generate", "--seed", "11", "--founders", "50", "--cycles", "5", "--offspring", "50", "--out", s(&ped),
    ]);
    assert_eq!(gen.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&ped).unwrap().lines().count(), 301);
    let o = ocs(&["check", "--pedigree", s(&ped), "--theta", "0.05", "--upper", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn cyclic_pedigree_fails_at_parse() {
    let dir = TempDir::new().unwrap();
    let ped = dir.path().join("cyclic.csv");
    fs::write(&ped, "id,sire,dam,ebv\n1,3,0,1\n2,1,0,1\n3,2,0,1\n").unwrap();
    let o = ocs(&["check", "--pedigree", s(&ped), "--theta", "0.3"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"], "cyclic_ancestry");
}

#[test]
fn dense_limit_applies_to_check() {
    let o = Command::new(env!("CARGO_BIN_EXE_ocs"))
        .args(["check", "--pedigree", s(&data("figure1.csv")), "--theta", "0.25"])
        .env("OCS_DENSE_LIMIT", "5")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"], "dense_limit");
}

#[test]
fn generate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let run = |seed: &str, name: &str| {
        let p = dir.path().join(name);
        let o = ocs(&["generate", "--seed", seed, "--founders", "20", "--cycles", "5", "--offspring", "20", "--out", s(&p)]);
        assert_eq!(o.status.code(), Some(0));
        fs::read(p).unwrap()
    };
    let (a, b, c) = (run("1", "a.csv"), run("1", "b.csv"), run("2", "c.csv"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 121);
}

#[test]
fn usage_errors_exit_one() {
    for args in [&["solve", "--theta", "0.2"][..], &["solve", "--pedigree", "x", "--theta", "0"], &["bogus"]] {
        let o = ocs(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert_eq!(error_line(&o)["error"], "usage");
    }
    let o = ocs(&["solve", "--pedigree", s(&data("figure1.csv")), "--theta", "0.2", "--formulation", "dense"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn conic_dump_reads_back() {
    let dir = TempDir::new().unwrap();
    let dump = dir.path().join("p.txt");
    let o = ocs(&[
        "solve", "--pedigree", s(&data("figure1.csv")), "--theta", "0.25", "--dump", s(&dump), "--out",
        s(&dir.path().join("x.csv")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&dump).unwrap();
    assert_eq!(text.lines().next(), Some("20 10"));
    let back = ocs_core::formulation::ConicProblem::read_text(text.as_bytes()).unwrap();
    assert_eq!((back.n_l(), back.n_q(), back.n_vars()), (20, 10, 9));
}
