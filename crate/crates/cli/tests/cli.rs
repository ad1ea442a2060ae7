use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const RUNNING_EXAMPLE: &str = "var r1 0.5\nvar r2 0.6\nvar s1 0.3\nvar s2 0.4\nvar s3 0.5\n\
    var t1 0.4\nvar t2 0.8\nformula (or (and r1 (or (and s1 t1) (and s2 t2))) (and r2 s3 t2))\n";

fn anybound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anybound"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_tables(dir: &Path) {
    fs::write(dir.join("R.csv"), "X,_p\na,0.5\nb,0.6\n").unwrap();
    fs::write(dir.join("S.csv"), "X,Y,_p\na,c,0.3\na,d,0.4\nb,d,0.5\n").unwrap();
    fs::write(dir.join("T.csv"), "Y,_p\nc,0.4\nd,0.8\n").unwrap();
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn ground_running_example() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(dir.path());
    let out = dir.path().join("phi.lin");
    let o = anybound(&[
        "ground",
        "--query",
        "Q :- R(X), S(X,Y), T(Y)",
        "--tables",
        dir.path().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("7 variables, 3 clauses"));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("var ")).count(), 7);
    assert!(text.contains("formula (or (and r1 (or (and s1 t1) (and s2 t2))) (and r2 s3 t2))"));
}

#[test]
fn ground_unmatched_and_missing_table() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(dir.path());
    let tables = dir.path().to_str().unwrap();
    let o = anybound(&["ground", "--query", "Q :- R('zz')", "--tables", tables]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("formula false"));
    let o = anybound(&["ground", "--query", "Q :- W(X)", "--tables", tables]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`W`"));
}

#[test]
fn eval_running_example() {
    let dir = tempfile::tempdir().unwrap();
    let lin = dir.path().join("phi.lin");
    fs::write(&lin, RUNNING_EXAMPLE).unwrap();
    let o = anybound(&["eval", "--lineage", lin.to_str().unwrap(), "--strategy", "sd", "--eps-abs", "1e-6", "--oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next().unwrap(), "elapsed_ms,lower,upper,expansions");
    let r = rows(&out);
    assert_eq!(r.len(), 2);
    assert!((r[0][1] - 0.297041).abs() < 1e-6 && (r[0][2] - 0.392608).abs() < 1e-6);
    assert_eq!(r[0][3], 0.0);
    assert!((r[1][1] - 0.38416).abs() < 1e-9 && (r[1][2] - 0.38416).abs() < 1e-9);
    assert_eq!(r[1][3], 1.0);
    assert!(stderr(&o).contains("contain the exact probability"));
}

#[test]
fn eval_zero_expansions_pgd() {
    let dir = tempfile::tempdir().unwrap();
    let lin = dir.path().join("phi.lin");
    fs::write(&lin, RUNNING_EXAMPLE).unwrap();
    let o = anybound(&["eval", "--lineage", lin.to_str().unwrap(), "--strategy", "pgd", "--max-expansions", "0"]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 1);
    assert!(r[0][1] >= 0.297041 && r[0][1] <= 0.304341);
}

#[test]
fn eval_read_once_and_verbose() {
    let dir = tempfile::tempdir().unwrap();
    let lin = dir.path().join("ro.lin");
    fs::write(&lin, "var x 0.5\nvar y 0.6\nformula (or x y)\n").unwrap();
    let o = anybound(&["eval", "--lineage", lin.to_str().unwrap(), "--verbose"]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][1], r[0][2]);
    assert!(stderr(&o).contains("read-once"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(anybound(&["eval", "--lineage", "x", "--strategy", "zz"]).status.code(), Some(2));
    assert_eq!(anybound(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(anybound(&["eval"]).status.code(), Some(2));
    assert_eq!(anybound(&["eval", "--lineage", "/nonexistent/file"]).status.code(), Some(1));
}

#[test]
fn gen_is_deterministic() {
    let a = anybound(&["gen", "--seed", "42"]);
    let b = anybound(&["gen", "--seed", "42"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let full = anybound(&["gen", "--num-x", "2", "--num-y", "2", "--density", "1"]);
    assert_eq!(stdout(&full).lines().filter(|l| l.starts_with("var ")).count(), 8);
}

fn strip_elapsed(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut c: Vec<&str> = l.split(',').collect();
            c.remove(4);
            c.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn bench_all_strategies() {
    let dir = tempfile::tempdir().unwrap();
    let lin = dir.path().join("phi.lin");
    fs::write(&lin, RUNNING_EXAMPLE).unwrap();
    let run = || anybound(&["bench", "--lineage", lin.to_str().unwrap(), "--seeds", "1,2", "--heuristics", "freq,infl"]);
    let (a, b) = (run(), run());
    assert!(a.status.success(), "{}", stderr(&a));
    let out = stdout(&a);
    assert!(out.starts_with("instance,strategy,heuristic,seed,elapsed_ms,lower,upper,expansions,error\n"));
    assert_eq!(strip_elapsed(&out), strip_elapsed(&stdout(&b)));
    let groups: std::collections::BTreeSet<_> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(4).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(groups.len(), 4 * 2 * 2);

    let o = anybound(&["bench", "--lineage", lin.to_str().unwrap(), "--strategies", ""]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn bench_query_permutations() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(dir.path());
    let o = anybound(&[
        "bench",
        "--query",
        "Q :- R(X), S(X,Y), T(Y)",
        "--tables",
        dir.path().to_str().unwrap(),
        "--permute",
        "--strategies",
        "sd",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names: std::collections::BTreeSet<_> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(names.len(), 6);
}
